"""Resonance spectra: dense eigensolves, counting, Weyl fits and the Walsh oracle."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import schur, solve_triangular
from scipy.optimize import linear_sum_assignment

from .classical import BakerParams
from .maps import OmegaBlock, build_open_baker, operator_norm
from .torus import QuantumMap, check_size

__all__ = [
    "EigensolveError",
    "ResonanceSpectrum",
    "NecklaceOrbit",
    "MatchReport",
    "canonical_order",
    "eigenvalues",
    "count_at_radius",
    "necklace_orbits",
    "walsh_analytic_spectrum",
    "oracle_match",
    "radial_profile",
    "weyl_fit",
    "necklace_period_fraction",
    "modulus_multiplicities",
    "table2_counts",
    "TABLE2_RADII",
]

TABLE2_RADII = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
MAX_NECKLACE_K = 24


class EigensolveError(RuntimeError):
    """Eigenpairs failed the backward-error check; ``diagnostic`` holds details."""

    def __init__(self, message: str, diagnostic: dict):
        super().__init__(message)
        self.diagnostic = diagnostic


def _sort_key(z: complex) -> tuple[float, float, float]:
    arg = math.atan2(z.imag, z.real) % (2 * math.pi)
    # rounding groups moduli equal up to roundoff before the angle decides
    return (-round(abs(z), 12), round(arg, 12), z.real)


def canonical_order(values: Iterable[complex]) -> list[complex]:
    """Sort by modulus descending, then argument in [0, 2 pi), then real part."""
    return sorted((complex(z) for z in values), key=_sort_key)


@dataclass(frozen=True)
class ResonanceSpectrum:
    """Eigenvalue multiset as canonically sorted (value, multiplicity) pairs."""

    entries: tuple[tuple[complex, int], ...]
    source: str
    N: int | None = None
    k: int | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ents = sorted(((complex(z), int(m)) for z, m in self.entries), key=lambda e: _sort_key(e[0]))
        if any(m < 1 for _, m in ents):
            raise ValueError("multiplicities must be positive")
        if self.N is not None and sum(m for _, m in ents) > self.N:
            raise ValueError("total multiplicity exceeds N")
        object.__setattr__(self, "entries", tuple(ents))

    @classmethod
    def from_values(cls, values: Iterable[complex], source: str = "numerical", **kw) -> "ResonanceSpectrum":
        return cls(tuple((z, 1) for z in values), source, **kw)

    @property
    def values(self) -> np.ndarray:
        """All eigenvalues repeated by multiplicity, in canonical order."""
        return np.array([z for z, m in self.entries for _ in range(m)], dtype=complex)

    @property
    def total(self) -> int:
        return sum(m for _, m in self.entries)

    def nonzero(self, zero_tol: float = 1e-6) -> np.ndarray:
        v = self.values
        return v[np.abs(v) >= zero_tol]


def _inverse_iteration_residual(T: np.ndarray, lam: complex, iters: int = 3) -> float:
    """min_v ||(T - lam) v|| over unit v, estimated by inverse iteration on triangular T."""
    n = T.shape[0]
    M = T - lam * np.eye(n)
    d = np.diag(M).copy()
    floor = np.finfo(float).eps * max(np.abs(T).max(), 1.0)
    d[np.abs(d) < floor] = floor
    M[np.diag_indices(n)] = d
    b = np.ones(n, dtype=complex) / math.sqrt(n)
    for _ in range(iters):
        y = solve_triangular(M, b, check_finite=False)
        b = y / np.linalg.norm(y)
    return float(np.linalg.norm((T - lam * np.eye(n)) @ b))


def _core_basis(A: np.ndarray, rtol: float, max_cols: int) -> np.ndarray | None:
    """Orthonormal basis of range(A^n) once rank(A^n) stops dropping.

    That range is the invariant subspace carrying every nonzero eigenvalue;
    the complementary part of the spectrum is nilpotent.  Powers are formed
    sparsely, and the rank is only measured when A^n has at most ``max_cols``
    nonzero columns.
    """
    n = A.shape[0]
    S = sparse.csc_matrix(A)
    P = S.copy()
    prev = None
    for _ in range(n + 1):
        P.eliminate_zeros()
        cols = np.flatnonzero(P.getnnz(axis=0))
        if len(cols) == 0:
            return np.zeros((n, 0), dtype=complex)
        if len(cols) <= max_cols:
            U, sv, _ = np.linalg.svd(P[:, cols].toarray(), full_matrices=False)
            r = int(np.sum(sv > rtol * sv[0]))
            if r == prev:
                return U[:, :r]
            prev = r
        else:
            prev = None
        P = S @ P
    return None


def eigenvalues(
    M: QuantumMap | np.ndarray,
    tol: float = 1e-8,
    deflate: bool = False,
    rank_rtol: float = 1e-9,
    max_core_cols: int = 512,
) -> ResonanceSpectrum:
    """All eigenvalues of a dense matrix with a per-pair backward-error check.

    Eigenvalues come from LAPACK (Hessenberg reduction and shifted QR).  Each
    eigenvalue must have backward error ||M v - lambda v|| / ||M|| < tol for
    some unit v; the LAPACK eigenvector is tried first and, failing that, a
    vector from inverse iteration on the complex Schur form.

    With ``deflate`` the nilpotent part is split off first: nonzero
    eigenvalues are computed on range(M^n) and the rest are reported as exact
    zeros.  Defective zero eigenvalues otherwise scatter to radius about
    eps**(1/m) for a Jordan block of size m.
    """
    A = M.matrix if isinstance(M, QuantumMap) else np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("eigenvalues needs a square matrix")
    n = A.shape[0]
    check_size(n)
    N = M.N if isinstance(M, QuantumMap) else n
    scale = operator_norm(A)
    diag: dict = {}
    zeros = 0
    work = A
    if deflate and scale > 0:
        Q = _core_basis(A, rank_rtol, max_core_cols)
        if Q is None:
            diag["deflation"] = "no stable rank found; full solve"
        else:
            work = Q.conj().T @ A @ Q
            zeros = n - Q.shape[1]
            diag["deflation"] = f"core dimension {Q.shape[1]}"
    if work.shape[0] == 0 or scale == 0.0:
        lam = np.zeros(0 if scale > 0 else n, dtype=complex)
        berr = np.zeros(len(lam))
        if scale == 0.0:
            zeros = 0
    else:
        lam, V = np.linalg.eig(work)
        V = V / np.linalg.norm(V, axis=0)
        invariance = 0.0
        if work is not A:
            V = Q @ V
            invariance = operator_norm(A @ Q - Q @ work) / scale
        berr = np.linalg.norm(A @ V - V * lam, axis=0) / scale
        if V.shape[1] <= 1024:
            diag["eigvec_cond"] = float(np.linalg.cond(V))
        bad = np.flatnonzero(berr >= tol)
        if len(bad):
            T, Z = schur(work, output="complex")
            schur_err = operator_norm(work - Z @ T @ Z.conj().T) / scale
            for i in bad:
                # Schur eigenvalues and geev eigenvalues agree up to roundoff
                berr[i] = min(berr[i], _inverse_iteration_residual(T, lam[i]) / scale + schur_err + invariance)
            diag["refined_pairs"] = len(bad)
    diag["max_backward_error"] = float(berr.max(initial=0.0))
    if not np.all(berr < tol):
        raise EigensolveError(f"backward error {diag['max_backward_error']:.3e} exceeds {tol:g}", diag)
    entries = [(z, 1) for z in lam]
    if zeros:
        entries.append((0j, zeros))
    return ResonanceSpectrum(tuple(entries), "numerical", N=N, diagnostics=diag)


def count_at_radius(spec: ResonanceSpectrum, r: float, tie_tol: float = 1e-10) -> int:
    """Number of eigenvalues, with multiplicity, with |lambda| >= r - tie_tol."""
    if not 0 < r <= 1:
        raise ValueError("radius must lie in (0, 1]")
    return sum(m for z, m in spec.entries if abs(z) >= r - tie_tol)


# --- necklaces ------------------------------------------------------------------


@dataclass(frozen=True)
class NecklaceOrbit:
    """Cyclic-shift orbit of a word over {+, -}; symbols stored as 0 (+) and 1 (-)."""

    representative: tuple[int, ...]
    period: int
    degree: int

    def __str__(self):
        return "".join("+-"[s] for s in self.representative)


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _orbit_table(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimal rotation, primitive period and degree for all 2**k words."""
    if not 1 <= k <= MAX_NECKLACE_K:
        raise ValueError(f"k must be in 1..{MAX_NECKLACE_K}")
    mask = (1 << k) - 1
    w = np.arange(1 << k, dtype=np.int64)
    canon = w.copy()
    period = np.full(w.shape, k, dtype=np.int64)
    for d in reversed(_divisors(k)[:-1]):
        rot = ((w << d) | (w >> (k - d))) & mask
        period[rot == w] = d
    for s in range(1, k):
        np.minimum(canon, ((w << s) | (w >> (k - s))) & mask, out=canon)
    degree = np.zeros(w.shape, dtype=np.int64)
    for s in range(k):
        degree += (w >> s) & 1
    return canon, period, degree


def _word_bits(x: int, k: int) -> tuple[int, ...]:
    return tuple((x >> (k - 1 - i)) & 1 for i in range(k))


def necklace_orbits(k: int) -> list[NecklaceOrbit]:
    """All cyclic-shift orbits on {+, -}^k, represented by their minimal word."""
    canon, period, degree = _orbit_table(k)
    reps = np.nonzero(canon == np.arange(1 << k))[0]
    return [NecklaceOrbit(_word_bits(int(x), k), int(period[x]), int(degree[x])) for x in reps]


def _orbit_classes(k: int) -> Counter:
    """Counts of orbits by (period, number of minus signs within one period)."""
    canon, period, degree = _orbit_table(k)
    reps = canon == np.arange(1 << k)
    per, deg = period[reps], degree[reps]
    return Counter(zip(per.tolist(), (deg * per // k).tolist()))


def walsh_analytic_spectrum(k: int, block: OmegaBlock, zero_tol: float = 1e-14) -> ResonanceSpectrum:
    """Exact spectrum of the Walsh open baker with a 2 x 2 block.

    An orbit of period l whose period word has d minus signs carries
    mu = lambda_+^(l-d) lambda_-^d and contributes all l-th roots of mu.
    Values are aggregated exactly: the root with index j equals
    exp((1-a) Log lambda_+ + a Log lambda_- + 2 pi i b) with a = d/l and
    b = j/l mod 1, so equal (a, b) pairs are merged.  The kernel fills the
    remaining D**k dimensions.
    """
    if block.size != 2:
        raise ValueError("the necklace oracle needs a 2 x 2 block")
    lp, lm = block.eigenvalues()
    if abs(lp) <= zero_tol:
        raise ValueError("block is nilpotent")
    rank1 = abs(lm) <= zero_tol
    mult: Counter = Counter()
    for (l, d), count in _orbit_classes(k).items():
        if rank1 and d > 0:
            continue
        a = Fraction(d, l)
        for j in range(l):
            mult[(a, Fraction(j, l) % 1)] += count
    log_p = complex(np.log(lp))
    log_m = complex(np.log(lm)) if not rank1 else 0j
    entries = []
    for (a, b), m in mult.items():
        z = np.exp((1 - float(a)) * log_p + float(a) * log_m + 2j * np.pi * float(b))
        entries.append((complex(z), m))
    N = block.D**k
    kernel = N - sum(m for _, m in entries)
    if kernel:
        entries.append((0j, kernel))
    return ResonanceSpectrum(tuple(entries), "analytic-walsh", N=N, k=k)


@dataclass(frozen=True)
class MatchReport:
    ok: bool
    max_distance: float
    sum_distance: float
    n_nonzero: int
    n_expected: int
    n_zero: int
    kernel_dim: int
    message: str = ""


def oracle_match(
    numerical: ResonanceSpectrum,
    analytic: ResonanceSpectrum,
    tol: float = 1e-7,
    zero_tol: float = 1e-6,
) -> MatchReport:
    """Match nonzero numerical eigenvalues to the analytic multiset.

    Uses an optimal assignment (Hungarian algorithm) on the distance matrix.
    Eigenvalues below ``zero_tol`` are counted against the analytic kernel.
    """
    num = numerical.nonzero(zero_tol)
    ana = analytic.nonzero(zero_tol)
    n_zero = numerical.total - len(num)
    kernel = analytic.total - len(ana)
    if len(num) != len(ana):
        return MatchReport(
            False, math.inf, math.inf, len(num), len(ana), n_zero, kernel,
            f"nonzero count {len(num)} != expected {len(ana)}",
        )
    if len(num) == 0:
        return MatchReport(n_zero == kernel, 0.0, 0.0, 0, 0, n_zero, kernel)
    cost = np.abs(num[:, None] - ana[None, :])
    rows, cols = linear_sum_assignment(cost)
    d = cost[rows, cols]
    ok = bool(d.max() < tol and n_zero == kernel)
    msg = "" if ok else ("kernel dimension mismatch" if d.max() < tol else "distance above tolerance")
    return MatchReport(ok, float(d.max()), float(d.sum()), len(num), len(ana), n_zero, kernel, msg)


def radial_profile(spec: ResonanceSpectrum, k: int, radii: Sequence[float], tie_tol: float = 1e-10) -> np.ndarray:
    """2**-k times the number of eigenvalues outside each radius."""
    return np.array([count_at_radius(spec, r, tie_tol) / 2**k for r in radii])


def modulus_multiplicities(spec: ResonanceSpectrum, digits: int = 10, zero_tol: float = 1e-6) -> list[tuple[float, int]]:
    """Nonzero eigenvalue counts grouped by modulus (rounded), largest first."""
    c: Counter = Counter()
    for z, m in spec.entries:
        if abs(z) >= zero_tol:
            c[round(abs(z), digits)] += m
    return sorted(c.items(), reverse=True)


def weyl_fit(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(count) against log(N)."""
    if len(points) < 3:
        raise ValueError("weyl_fit needs at least three points")
    N = np.array([p[0] for p in points], dtype=float)
    c = np.array([p[1] for p in points], dtype=float)
    if np.any(N <= 0) or np.any(c <= 0):
        raise ValueError("N and counts must be positive")
    x, y = np.log(N), np.log(c)
    if np.ptp(x) == 0:
        raise ValueError("degenerate input: all N equal")
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def _mobius(n: int) -> int:
    res, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            res = -res
        p += 1
    return -res if m > 1 else res


def necklace_period_fraction(k: int, p: int) -> Fraction:
    """Fraction of degree-p words of length k whose primitive period is < k.

    Words whose period divides e (e | k) number C(e, p e/k) when k/e divides
    p; Mobius inversion over the divisors gives the primitive-period count.
    """
    if not 1 <= p <= k - 1:
        raise ValueError("need 1 <= p <= k-1")
    primitive = 0
    for e in _divisors(k):
        if p * e % k == 0:
            primitive += _mobius(k // e) * math.comb(e, p * e // k)
    total = math.comb(k, p)
    return Fraction(total - primitive, total)


def table2_counts(
    kmax: int = 6,
    radii: Sequence[float] = TABLE2_RADII,
    params: BakerParams | None = None,
    tie_tol: float = 1e-10,
    tol: float = 1e-8,
) -> list[tuple[int, int, float, int]]:
    """Rows (k, N, r, count) for the quantized open baker at N = 3**k."""
    params = params or BakerParams.symmetric(3)
    rows = []
    for k in range(1, kmax + 1):
        N = 3**k
        spec = eigenvalues(build_open_baker(params, N), tol)
        rows.extend((k, N, r, count_at_radius(spec, r, tie_tol)) for r in radii)
    return rows

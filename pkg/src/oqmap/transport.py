"""Transport through the two-lead Walsh 4-baker: t(theta), conductance, shot noise.

Leads sit on the outer position strips of the D=4 baker: lead 1 is strip 0,
lead 2 is strip 3, and strips 1, 2 form the cavity.  An input channel is a
position word 0 eps_2 ... eps_k; lead-2 coordinates drop the leading 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .maps import build_walsh_open_baker
from .torus import QuantumMap, QuDitWord, dft_matrix, index_to_word

__all__ = [
    "LeadConfig",
    "ChannelClass",
    "TransmissionMatrix",
    "WalshColumn",
    "TransportSummary",
    "TransportReport",
    "TailNotReached",
    "classify_channel",
    "closed_walsh_baker",
    "transmission_matrix",
    "transmission_matrix_resolvent",
    "transmission_eigenvalues",
    "walsh_t_apply",
    "conductance",
    "noise_power",
    "fano",
    "nonclassical_words",
    "nonclassical_gram",
    "transport_summary",
    "psi_zero_norm2",
    "nongeneric_words_measured",
    "nongeneric_words_combinatorial",
]

D = 4
_F = dft_matrix(D).matrix
_FS = _F.conj().T
_INTERIOR = (1, 2)


class TailNotReached(RuntimeError):
    """The bounce series did not reach the requested tail bound."""


@dataclass(frozen=True)
class LeadConfig:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def N(self) -> int:
        return D**self.k

    @property
    def M(self) -> int:
        """Channels per lead."""
        return D ** (self.k - 1)

    def strip(self, s: int) -> np.ndarray:
        return np.arange(s * self.M, (s + 1) * self.M)

    @property
    def lead1(self) -> np.ndarray:
        return self.strip(0)

    @property
    def lead2(self) -> np.ndarray:
        return self.strip(3)

    @property
    def interior(self) -> np.ndarray:
        return np.concatenate([self.strip(1), self.strip(2)])

    def projector(self, which: str) -> np.ndarray:
        idx = {"L1": self.lead1, "L2": self.lead2, "I": self.interior}[which]
        P = np.zeros(self.N)
        P[idx] = 1.0
        return np.diag(P)


@dataclass(frozen=True)
class ChannelClass:
    word: tuple[int, ...]
    kind: str  # "transmitted", "reflected" or "nonclassical"
    exit_index: int | None = None  # 1-based position l_0 of the first 0 or 3


def classify_channel(word: QuDitWord | Sequence[int]) -> ChannelClass:
    """Symbolic classification of the lead-1 channel 0 eps_2 ... eps_k."""
    if isinstance(word, QuDitWord):
        if word.D != D:
            raise ValueError("channels are base-4 words")
        symbols = word.symbols
    else:
        symbols = tuple(int(s) for s in word)
    if not symbols or symbols[0] != 0 or any(not 0 <= s < D for s in symbols):
        raise ValueError(f"invalid lead-1 channel word {symbols}")
    for pos, s in enumerate(symbols[1:], start=2):
        if s == 3:
            return ChannelClass(symbols, "transmitted", pos)
        if s == 0:
            return ChannelClass(symbols, "reflected", pos)
    return ChannelClass(symbols, "nonclassical", None)


def closed_walsh_baker(k: int) -> QuantumMap:
    """Unitary Walsh 4-baker W_k^* (I x W_{k-1}) with all strips kept."""
    return build_walsh_open_baker(D, k, range(D))


# --- dense path -----------------------------------------------------------------


@dataclass(frozen=True)
class TransmissionMatrix:
    t: np.ndarray
    theta: float
    n_max: int
    tail_bound: float
    components: dict = field(default_factory=dict, compare=False)


def _theta_list(theta) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    return arr, np.ndim(theta) == 0


def transmission_matrix(
    U: QuantumMap,
    cfg: LeadConfig,
    theta=0.0,
    tail_tol: float = 1e-10,
    max_iter: int = 100_000,
    n_components: int = 0,
):
    """t(theta) = sum_n e^{i n theta} Pi_L2 U (Pi_I U)^{n-1} Pi_L1 on the lead blocks.

    ``theta`` may be a scalar or a sequence; the bounce series is shared
    between all quasi-energies.  The sum stops once the geometric
    extrapolation of the remaining cavity amplitude, measured in Frobenius
    norm, drops below ``tail_tol``.  The first ``n_components`` terms t_n are
    kept in ``components``.
    """
    if U.N != cfg.N:
        raise ValueError("U and lead configuration disagree on N")
    thetas, scalar = _theta_list(theta)
    A = U.matrix
    if np.count_nonzero(A) < 0.05 * A.size:
        A = sparse.csr_matrix(A)
    L1, L2, I = cfg.lead1, cfg.lead2, cfg.interior
    U_in = A[:, L1]
    U_int = A[:, I]
    Y = U_in.toarray() if sparse.issparse(U_in) else np.array(U_in)
    ts = np.zeros((len(thetas), cfg.M, cfg.M), dtype=complex)
    comps = {}
    prev = None
    tail = math.inf
    for n in range(1, max_iter + 1):
        tn = Y[L2, :]
        ts += np.exp(1j * n * thetas)[:, None, None] * tn
        if n <= n_components:
            comps[n] = tn.copy()
        R = Y[I, :]
        r = np.linalg.norm(R)
        if r == 0.0:
            tail = 0.0
        elif prev is not None and prev > 0 and r < prev:
            rho = r / prev
            tail = r / (1 - rho)
        if tail < tail_tol and n >= n_components:
            break
        prev = r
        Y = U_int @ R
    else:
        raise TailNotReached(f"tail bound {tail:.3e} after {max_iter} bounces")
    out = [TransmissionMatrix(ts[i], float(th), n, tail, comps) for i, th in enumerate(thetas)]
    return out[0] if scalar else out


def transmission_matrix_resolvent(U: QuantumMap, cfg: LeadConfig, theta: float = 0.0) -> np.ndarray:
    """Closed form e^{i theta} Pi_L2 U (1 - e^{i theta} Pi_I U)^{-1} Pi_L1 by a linear solve."""
    A = np.asarray(U.matrix)
    z = np.exp(1j * theta)
    PI = np.zeros(cfg.N)
    PI[cfg.interior] = 1.0
    K = np.eye(cfg.N) - z * (PI[:, None] * A)
    X = np.linalg.solve(K, np.eye(cfg.N)[:, cfg.lead1])
    return z * (A[cfg.lead2, :] @ X)


def _as_t(t) -> np.ndarray:
    return t.t if isinstance(t, TransmissionMatrix) else np.asarray(t)


def transmission_eigenvalues(t) -> np.ndarray:
    """Eigenvalues T_i of t^* t, ascending."""
    t = _as_t(t)
    return np.linalg.eigvalsh(t.conj().T @ t)


def conductance(t) -> float:
    """g = tr(t^* t)."""
    t = _as_t(t)
    return float(np.vdot(t, t).real)


def noise_power(t) -> float:
    """P = tr(t^* t (1 - t^* t))."""
    t = _as_t(t)
    G = t.conj().T @ t
    return float(np.trace(G).real - np.vdot(G, G).real)


def fano(t) -> float:
    g = conductance(t)
    if g < 1e-14:
        raise ZeroDivisionError("Fano factor undefined for vanishing conductance")
    return noise_power(t) / g


# --- Walsh tensor path ----------------------------------------------------------


def _proj(v: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    out = np.zeros_like(v)
    keep = list(keep)
    out[keep] = v[keep]
    return out


@dataclass(frozen=True)
class WalshColumn:
    """t|eps> as a sum of product states in lead-2 coordinates.

    Term i is coeffs[i] * factors[i, 0] x ... x factors[i, k-2] and comes
    from the bounce count ns[i].
    """

    word: tuple[int, ...]
    theta: float
    ns: np.ndarray
    coeffs: np.ndarray
    factors: np.ndarray
    tail_bound: float

    def component_norm2(self, n: int) -> float:
        hits = np.flatnonzero(self.ns == n)
        if len(hits) == 0:
            return 0.0
        i = hits[0]
        return float(abs(self.coeffs[i]) ** 2 * np.prod(np.sum(np.abs(self.factors[i]) ** 2, axis=1)))

    def gram_with(self, other: "WalshColumn") -> complex:
        return complex(np.conj(self.coeffs) @ _factor_overlaps(self.factors, other.factors) @ other.coeffs)

    def norm2(self) -> float:
        return self.gram_with(self).real

    def dense(self) -> np.ndarray:
        out = 0
        for c, f in zip(self.coeffs, self.factors):
            v = np.ones(1, dtype=complex)
            for q in f:
                v = np.kron(v, q)
            out = out + c * v
        return np.asarray(out)


def _factor_overlaps(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """prod_j <A[t, j], B[s, j]> for all term pairs (t, s)."""
    if A.shape[1] == 0:
        return np.ones((len(A), len(B)), dtype=complex)
    return np.einsum("tjd,sjd->tsj", A.conj(), B).prod(axis=2)


def _steps_for(k: int, theta_cut: float | None) -> int | None:
    if theta_cut is None:
        return None
    return int(math.floor(min(theta_cut * k, k - 1) + 1e-12)) if theta_cut <= 1 else int(math.floor(theta_cut * k))


def walsh_t_apply(
    word: QuDitWord | Sequence[int],
    theta: float = 0.0,
    theta_cut: float | None = 0.2,
    tail_tol: float = 1e-10,
    max_steps: int = 10_000,
) -> WalshColumn:
    """Sum of e^{i n theta} t_n|eps> over n = k .. k + m_max on product states.

    The closed Walsh baker sends v_1 x ... x v_k to v_2 x ... x v_k x F_4^* v_1
    and the lead and cavity projectors act on the first factor only, so every
    t_n|eps> is one product state.  With ``theta_cut`` in (0, 1] the sum keeps
    m_max = floor(min(theta_cut k, k - 1)) steps past n = k and reports the
    geometric tail sum_{m > m_max} 2^{-m/2}/2; larger ``theta_cut`` gives
    floor(theta_cut k) steps.  With ``theta_cut=None`` the sum runs until the
    extrapolated cavity amplitude is below ``tail_tol``.
    """
    cls = classify_channel(word)
    if cls.kind != "nonclassical":
        raise ValueError(f"channel {cls.word} is classical ({cls.kind})")
    symbols = cls.word
    k = len(symbols)
    f = np.zeros((k, D), dtype=complex)
    f[np.arange(k), symbols] = 1.0
    scale = 1.0 + 0j
    m_max = _steps_for(k, theta_cut)
    n_stop = None if m_max is None else k + m_max
    ns, coeffs, facs = [], [], []
    prev = None
    tail = math.inf
    for n in range(1, max_steps + 1):
        f = np.vstack([f[1:], (_FS @ f[0])[None, :]])
        first = f[0]
        if first[3] != 0:
            ns.append(n)
            coeffs.append(np.exp(1j * n * theta) * scale * first[3])
            facs.append(f[1:].copy())
        f[0] = _proj(first, _INTERIOR)
        # fold factor norms into the scalar to avoid underflow
        norms = np.linalg.norm(f, axis=1)
        if np.any(norms == 0):
            tail = 0.0
            break
        f /= norms[:, None]
        scale *= np.prod(norms)
        r = abs(scale)
        if n_stop is not None:
            if n >= n_stop:
                tail = 0.5 * 2 ** (-(m_max + 1) / 2) / (1 - 2**-0.5)
                break
            continue
        if n > k and prev is not None and r < prev:
            tail = r / (1 - r / prev)
            if tail < tail_tol:
                break
        prev = r
    else:
        raise TailNotReached(f"tail bound {tail:.3e} after {max_steps} steps")
    factors = np.array(facs) if facs else np.zeros((0, k - 1, D), complex)
    return WalshColumn(symbols, float(theta), np.array(ns), np.array(coeffs, dtype=complex), factors, float(tail))


def nonclassical_words(k: int) -> list[tuple[int, ...]]:
    """All words 0 eps_2 ... eps_k with eps_l in {1, 2}, in index order."""
    return [(0,) + w for w in product(_INTERIOR, repeat=k - 1)]


def nonclassical_gram(
    k: int, theta: float = 0.0, theta_cut: float | None = 0.2, tail_tol: float = 1e-10, block: int = 64
) -> tuple[np.ndarray, float]:
    """Gram matrix <t eps, t eps'> over nonclassical channels, and the worst tail bound."""
    cols = [walsh_t_apply(w, theta, theta_cut, tail_tol) for w in nonclassical_words(k)]
    T = max(len(c.coeffs) for c in cols)
    C = len(cols)
    X = np.zeros((C, T, k - 1, D), dtype=complex)
    a = np.zeros((C, T), dtype=complex)
    for i, c in enumerate(cols):
        X[i, : len(c.coeffs)] = c.factors
        a[i, : len(c.coeffs)] = c.coeffs
    G = np.zeros((C, C), dtype=complex)
    for lo in range(0, C, block):
        hi = min(C, lo + block)
        # overlaps[u, v, t, s] = prod_j <X[u, t, j], X[v, s, j]>
        ov = np.einsum("utjd,vsjd->uvtsj", X[lo:hi].conj(), X).prod(axis=4) if k > 1 else np.ones((hi - lo, C, T, T))
        G[lo:hi] = np.einsum("ut,uvts,vs->uv", a[lo:hi].conj(), ov, a)
    return G, max(c.tail_bound for c in cols)


# --- summaries --------------------------------------------------------------------


@dataclass(frozen=True)
class TransportSummary:
    k: int
    theta: float
    g: float
    P: float
    F: float
    transmitted: int
    reflected: int
    nonclassical: int
    n_max: int
    tail_bound: float

    @property
    def M(self) -> int:
        return D ** (self.k - 1)

    @property
    def g_per_channel(self) -> float:
        return self.g / self.M

    @property
    def P_normalized(self) -> float:
        """P / 2^{k-1}, which tends to 11/80."""
        return self.P / 2 ** (self.k - 1)


@dataclass(frozen=True)
class TransportReport:
    summaries: tuple[TransportSummary, ...]
    path: str

    def _stat(self, name: str) -> tuple[float, float]:
        v = np.array([getattr(s, name) for s in self.summaries])
        return float(v.mean()), float(v.std())

    @property
    def g_mean_std(self) -> tuple[float, float]:
        return self._stat("g")

    @property
    def P_mean_std(self) -> tuple[float, float]:
        return self._stat("P")

    @property
    def F_mean_std(self) -> tuple[float, float]:
        return self._stat("F")


def _channel_counts(k: int) -> dict[str, int]:
    counts = {"transmitted": 0, "reflected": 0, "nonclassical": 0}
    for j in range(D ** (k - 1)):
        counts[classify_channel((0,) + index_to_word(j, D, k - 1) if k > 1 else (0,)).kind] += 1
    return counts


def transport_summary(
    k: int,
    thetas: Sequence[float] | int = 16,
    path: str = "auto",
    tail_tol: float = 1e-10,
    theta_cut: float | None = None,
    max_dense_k: int = 6,
    max_tensor_k: int = 12,
) -> TransportReport:
    """g, P and F over a quasi-energy grid (16 equispaced points by default).

    The dense path sums the bounce series for the full matrix U.  The tensor
    path uses the exact classical ledger (transmitted channels carry
    T = 1, reflected T = 0, both orthogonal to the rest) plus the Gram
    matrix of the nonclassical columns built from product states.
    """
    if isinstance(thetas, int):
        thetas = 2 * np.pi * np.arange(thetas) / thetas
    thetas = np.asarray(thetas, dtype=float)
    if path == "auto":
        path = "dense" if k <= 5 else "tensor"
    counts = _channel_counts(k)
    out = []
    if path == "dense":
        if k > max_dense_k:
            raise ValueError(f"dense transport limited to k <= {max_dense_k}")
        U = closed_walsh_baker(k)
        cfg = LeadConfig(k)
        for tm in transmission_matrix(U, cfg, thetas, tail_tol):
            g, P = conductance(tm), noise_power(tm)
            out.append(TransportSummary(k, tm.theta, g, P, P / g, counts["transmitted"], counts["reflected"],
                                        counts["nonclassical"], tm.n_max, tm.tail_bound))
    elif path == "tensor":
        if k > max_tensor_k:
            raise ValueError(f"tensor transport limited to k <= {max_tensor_k}")
        for th in thetas:
            G, tail = nonclassical_gram(k, float(th), theta_cut, tail_tol)
            g = counts["transmitted"] + float(np.trace(G).real)
            P = float(np.trace(G).real - np.vdot(G, G).real)
            out.append(TransportSummary(k, float(th), g, P, P / g, counts["transmitted"], counts["reflected"],
                                        counts["nonclassical"], -1, tail))
    else:
        raise ValueError(f"unknown path {path!r}")
    return TransportReport(tuple(out), path)


# --- second-order structure and genericity -----------------------------------------


def _adjoint_step(f: np.ndarray) -> np.ndarray:
    """U^* on factors: (v_1, ..., v_k) -> (F_4 v_k, v_1, ..., v_{k-1})."""
    return np.vstack([(_F @ f[-1])[None, :], f[:-1]])


def _t_components(symbols: tuple[int, ...], n_max: int) -> dict[int, np.ndarray]:
    """Full-space factors of t_n|eps> (first factor pi_3 v) for n <= n_max."""
    k = len(symbols)
    f = np.zeros((k, D), dtype=complex)
    f[np.arange(k), symbols] = 1.0
    out = {}
    for n in range(1, n_max + 1):
        f = np.vstack([f[1:], (_FS @ f[0])[None, :]])
        if f[0, 3] != 0:
            g = f.copy()
            g[0] = _proj(g[0], (3,))
            out[n] = g
        f[0] = _proj(f[0], _INTERIOR)
    return out


def _t_adjoint(f: np.ndarray, n: int) -> np.ndarray | None:
    """t_n^* = Pi_L1 U^* (Pi_I U^*)^{n-1} Pi_L2 applied to a product state."""
    g = f.copy()
    g[0] = _proj(g[0], (3,))
    for _ in range(n - 1):
        g = _adjoint_step(g)
        g[0] = _proj(g[0], _INTERIOR)
    g = _adjoint_step(g)
    g[0] = _proj(g[0], (0,))
    if not np.any(g[0]):
        return None
    return g


def psi_zero_norm2(word: Sequence[int], m_max: int) -> float:
    """|| sum_{m <= m_max} t_{k+m}^* t_{k+m} |eps> ||^2, the zero-shift part of t^* t."""
    cls = classify_channel(word)
    if cls.kind != "nonclassical":
        raise ValueError("psi_zero_norm2 needs a nonclassical word")
    k = len(cls.word)
    comps = _t_components(cls.word, k + m_max)
    states = []
    for m in range(m_max + 1):
        psi = _t_adjoint(comps[k + m], k + m)
        if psi is not None:
            states.append(psi)
    if not states:
        return 0.0
    X = np.array(states)
    return float(np.einsum("tjd,sjd->tsj", X.conj(), X).prod(axis=2).sum().real)


def nongeneric_words_measured(k: int, theta: float = 0.2, tol: float = 1e-12) -> set[tuple[int, ...]]:
    """Nonclassical words with <t_{k+m} eps, t_{k+m'} eps> != 0 for some m' < m <= theta k."""
    m_max = int(math.floor(theta * k + 1e-12))
    out = set()
    for w in nonclassical_words(k):
        comps = _t_components(w, k + m_max)
        for m in range(1, m_max + 1):
            for mp in range(m):
                a, b = comps[k + m], comps[k + mp]
                if abs(np.prod(np.einsum("jd,jd->j", a.conj(), b))) > tol:
                    out.add(w)
    return out


def nongeneric_words_combinatorial(k: int, theta: float = 0.2) -> set[tuple[int, ...]]:
    """Words where eps_{m+2..k} equals eps_{m'+2..k+m'-m} for some m' < m <= theta k.

    Unequal subsequences force orthogonality, so this set contains the
    measured one.
    """
    m_max = int(math.floor(theta * k + 1e-12))
    out = set()
    for w in nonclassical_words(k):
        e = (None,) + w  # 1-based
        for m in range(1, m_max + 1):
            for mp in range(m):
                if e[m + 2 : k + 1] == e[mp + 2 : k + mp - m + 1]:
                    out.add(w)
    return out

"""Quantized torus: position basis, Fourier and Walsh transforms, Weyl quantization.

Matrices act on column vectors in the position basis |Q_j>, Q_j = j/N.
Row index is the output position, column index the input position.
For N = D**k the index j is identified with the word eps_1 ... eps_k of its
base-D digits, eps_1 most significant, so that |Q_j> = e_{eps_1} x ... x e_{eps_k}.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "SizeLimitError",
    "PlanckGrid",
    "QuantumMap",
    "TorusState",
    "QuDitWord",
    "TrigObservable",
    "check_size",
    "get_size_limit",
    "set_size_limit",
    "roots_of_unity",
    "word_to_index",
    "index_to_word",
    "digit_table",
    "product_state",
    "dft_matrix",
    "walsh_matrix",
    "walsh_apply",
    "weyl_quantize",
]

_SIZE_LIMIT = int(os.environ.get("OQMAP_MAX_N", 2**12))  # largest dense matrix dimension


class SizeLimitError(ValueError):
    """Requested Hilbert space dimension exceeds the configured limit."""


def get_size_limit() -> int:
    return _SIZE_LIMIT


def set_size_limit(limit: int) -> int:
    """Set the largest dense dimension builders accept; returns the previous value."""
    global _SIZE_LIMIT
    if limit < 1:
        raise ValueError("size limit must be positive")
    old, _SIZE_LIMIT = _SIZE_LIMIT, int(limit)
    return old


def check_size(N: int) -> None:
    if N > _SIZE_LIMIT:
        raise SizeLimitError(f"dimension {N} exceeds size limit {_SIZE_LIMIT}")


@dataclass(frozen=True)
class PlanckGrid:
    """Inverse Planck constant N = 1/(2 pi h), optionally N = base**k."""

    N: int
    base: int | None = None
    k: int | None = None

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if (self.base is None) != (self.k is None):
            raise ValueError("base and k must be given together")
        if self.base is not None:
            if self.base < 2 or self.k < 0 or self.base**self.k != self.N:
                raise ValueError(f"{self.base}**{self.k} != {self.N}")

    @classmethod
    def power(cls, base: int, k: int) -> "PlanckGrid":
        if base < 2 or k < 0:
            raise ValueError("need base >= 2 and k >= 0")
        return cls(base**k, base, k)

    @property
    def h(self) -> float:
        return 1.0 / (2.0 * math.pi * self.N)

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.N) / self.N


def _as_grid(grid: PlanckGrid | int) -> PlanckGrid:
    return grid if isinstance(grid, PlanckGrid) else PlanckGrid(int(grid))


@dataclass(frozen=True)
class QuantumMap:
    """Dense N x N operator on the quantized torus with builder metadata."""

    matrix: np.ndarray
    grid: PlanckGrid
    kind: str = "custom"
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"matrix shape {m.shape} does not match N={self.grid.N}")
        m = m.copy() if m is self.matrix and m.flags.writeable else m
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def N(self) -> int:
        return self.grid.N

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def unitarity_defect(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(self.N), 2))

    def op_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def roots_of_unity(num, den: int) -> np.ndarray:
    """exp(2 pi i num/den) with num reduced mod den before exponentiating."""
    r = np.mod(np.asarray(num, dtype=np.int64), den)
    return np.exp(2j * np.pi * r / den)


# --- qu-D-it words -------------------------------------------------------------


def word_to_index(symbols: Sequence[int], D: int) -> int:
    j = 0
    for s in symbols:
        if not 0 <= s < D:
            raise ValueError(f"symbol {s} out of range for base {D}")
        j = j * D + int(s)
    return j


def index_to_word(j: int, D: int, k: int) -> tuple[int, ...]:
    if not 0 <= j < D**k:
        raise ValueError(f"index {j} out of range for {D}**{k}")
    out = []
    for _ in range(k):
        j, r = divmod(j, D)
        out.append(r)
    return tuple(reversed(out))


@dataclass(frozen=True)
class QuDitWord:
    D: int
    symbols: tuple[int, ...]

    def __post_init__(self):
        if self.D < 2:
            raise ValueError("base must be >= 2")
        syms = tuple(int(s) for s in self.symbols)
        for s in syms:
            if not 0 <= s < self.D:
                raise ValueError(f"symbol {s} out of range for base {self.D}")
        object.__setattr__(self, "symbols", syms)

    @property
    def k(self) -> int:
        return len(self.symbols)

    @property
    def index(self) -> int:
        return word_to_index(self.symbols, self.D)

    @classmethod
    def from_index(cls, j: int, D: int, k: int) -> "QuDitWord":
        return cls(D, index_to_word(j, D, k))

    def __str__(self):
        return " ".join(map(str, self.symbols))


def digit_table(D: int, k: int) -> np.ndarray:
    """Array of shape (D**k, k); row j holds the digits eps_1..eps_k of j."""
    j = np.arange(D**k, dtype=np.int64)
    powers = D ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return (j[:, None] // powers[None, :]) % D


# --- states -------------------------------------------------------------------


@dataclass(frozen=True)
class TorusState:
    coeffs: np.ndarray
    grid: PlanckGrid

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.N,):
            raise ValueError("coefficient vector length must equal N")
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def product_state(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Position-basis vector of v_1 x ... x v_k (v_1 most significant)."""
    out = np.ones(1, dtype=complex)
    for v in factors:
        out = np.kron(out, np.asarray(v, dtype=complex))
    return out


# --- transforms ---------------------------------------------------------------


def dft_matrix(grid: PlanckGrid | int) -> QuantumMap:
    """(F_N)_{jj'} = exp(-2 pi i j j'/N) / sqrt(N)."""
    g = _as_grid(grid)
    check_size(g.N)
    j = np.arange(g.N, dtype=np.int64)
    m = roots_of_unity(-np.outer(j, j), g.N) / math.sqrt(g.N)
    return QuantumMap(m, g, "dft", {"N": g.N})


def walsh_matrix(D: int, k: int) -> QuantumMap:
    """Walsh-Fourier transform on (Z_D)^k.

    (W_k)_{jj'} = D^{-k/2} omega_D^{-sum_l eps_l(j) eps_{k+1-l}(j')}, so that
    W_k (v_1 x ... x v_k) = F_D v_k x ... x F_D v_1.
    """
    if D < 2 or k < 1:
        raise ValueError("walsh_matrix needs D >= 2 and k >= 1")
    N = D**k
    check_size(N)
    eps = digit_table(D, k)
    phase = (eps @ eps[:, ::-1].T) % D
    m = roots_of_unity(-phase, D) / D ** (k / 2)
    return QuantumMap(m, PlanckGrid.power(D, k), "walsh", {"D": D, "k": k})


def walsh_apply(v: np.ndarray, D: int, k: int, inverse: bool = False) -> np.ndarray:
    """Apply W_k (or W_k^*) to vectors without forming the N x N matrix.

    ``v`` may be a vector of length D**k or a matrix whose columns are such
    vectors.
    """
    v = np.asarray(v, dtype=complex)
    tail = v.shape[1:]
    F = dft_matrix(D).matrix
    if inverse:
        F = F.conj().T
    t = v.reshape((D,) * k + tail)
    if inverse:
        # W^* = Rev o (F^*)^{x k}
        for ax in range(k):
            t = np.moveaxis(np.tensordot(F, t, axes=([1], [ax])), 0, ax)
        t = t.transpose(tuple(range(k - 1, -1, -1)) + tuple(range(k, k + len(tail))))
    else:
        t = t.transpose(tuple(range(k - 1, -1, -1)) + tuple(range(k, k + len(tail))))
        for ax in range(k):
            t = np.moveaxis(np.tensordot(F, t, axes=([1], [ax])), 0, ax)
    return np.ascontiguousarray(t).reshape(v.shape)


# --- Weyl quantization --------------------------------------------------------


class TrigObservable:
    """Trigonometric polynomial f(q, p) = sum c[l, m] exp(2 pi i (l q + m p))."""

    def __init__(self, coeffs: Mapping[tuple[int, int], complex] | None = None):
        self.coeffs: dict[tuple[int, int], complex] = {}
        for (l, m), c in (coeffs or {}).items():
            c = complex(c)
            if c != 0:
                self.coeffs[(int(l), int(m))] = c

    @classmethod
    def constant(cls, c: complex = 1.0) -> "TrigObservable":
        return cls({(0, 0): c})

    @classmethod
    def from_function(
        cls,
        f: Callable[[np.ndarray, np.ndarray], np.ndarray],
        bandwidth: int = 40,
        samples: int = 128,
        cutoff: float = 1e-14,
    ) -> "TrigObservable":
        """Fourier coefficients of a smooth periodic f by FFT sampling.

        Harmonics with |l|, |m| <= bandwidth and modulus above ``cutoff`` are kept.
        """
        if samples < 2 * bandwidth + 1:
            raise ValueError("samples must exceed twice the bandwidth")
        x = np.arange(samples) / samples
        Q, P = np.meshgrid(x, x, indexing="ij")
        c = np.fft.fft2(np.asarray(f(Q, P), dtype=complex)) / samples**2
        out = {}
        for l in range(-bandwidth, bandwidth + 1):
            for m in range(-bandwidth, bandwidth + 1):
                a = c[l % samples, m % samples]
                if abs(a) > cutoff:
                    out[(l, m)] = a
        return cls(out)

    def __call__(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        q, p = np.broadcast_arrays(q, p)
        shape = q.shape
        if not self.coeffs:
            return np.zeros(shape, dtype=complex)
        keys = np.array(list(self.coeffs), dtype=np.int64)
        ls, li = np.unique(keys[:, 0], return_inverse=True)
        ms, mi = np.unique(keys[:, 1], return_inverse=True)
        C = np.zeros((len(ls), len(ms)), dtype=complex)
        C[li, mi] = list(self.coeffs.values())
        Eq = np.exp(2j * np.pi * np.outer(ls, q.ravel()))
        Ep = np.exp(2j * np.pi * np.outer(ms, p.ravel()))
        return np.einsum("ls,lm,ms->s", Eq, C, Ep, optimize=True).reshape(shape)

    def __add__(self, other: "TrigObservable") -> "TrigObservable":
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0) + c
        return TrigObservable(out)

    def __mul__(self, a) -> "TrigObservable":
        if isinstance(a, TrigObservable):
            out: dict[tuple[int, int], complex] = {}
            for (l1, m1), c1 in self.coeffs.items():
                for (l2, m2), c2 in a.coeffs.items():
                    key = (l1 + l2, m1 + m2)
                    out[key] = out.get(key, 0) + c1 * c2
            return TrigObservable(out)
        return TrigObservable({key: a * c for key, c in self.coeffs.items()})

    __rmul__ = __mul__

    def conj(self) -> "TrigObservable":
        """Coefficients of the complex-conjugate function."""
        return TrigObservable({(-l, -m): np.conj(c) for (l, m), c in self.coeffs.items()})

    def is_real(self, tol: float = 1e-12) -> bool:
        for (l, m), c in self.coeffs.items():
            if abs(self.coeffs.get((-l, -m), 0) - np.conj(c)) > tol:
                return False
        return True

    def __repr__(self):
        return f"TrigObservable({len(self.coeffs)} harmonics)"


def weyl_quantize(f: TrigObservable, grid: PlanckGrid | int) -> QuantumMap:
    """Weyl quantization Op_h(f) on the one-dimensional quantized torus.

    The harmonic exp(2 pi i (l q + m p)) sends |Q_j> to
    exp(pi i (2 j l - m l)/N) |Q_{j-m mod N}>, j in [0, N).  Taking j in
    [0, N) in the phase accounts for the lattice-shift sign
    (-1)^{r l} when |m| >= N, so no restriction on m is needed.
    """
    g = _as_grid(grid)
    N = g.N
    check_size(N)
    out = np.zeros((N, N), dtype=complex)
    j = np.arange(N, dtype=np.int64)
    for (l, m), c in f.coeffs.items():
        # exp(pi i x / N) = root of unity of order 2N
        out[(j - m) % N, j] += c * roots_of_unity((2 * j - m) * l, 2 * N)
    return QuantumMap(out, g, "weyl", {"harmonics": len(f.coeffs)})

"""Quantum baker matrices and semiclassical residual diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .classical import BakerParams, WeightedRelation
from .torus import (
    PlanckGrid,
    QuantumMap,
    TrigObservable,
    check_size,
    dft_matrix,
    walsh_matrix,
    weyl_quantize,
)

__all__ = [
    "OmegaBlock",
    "build_open_baker",
    "build_toy_baker",
    "build_walsh_open_baker",
    "build_walsh_2baker",
    "omega_block",
    "walsh_baker_tensor_action",
    "walsh_baker_adjoint_tensor_action",
    "operator_norm",
    "weighted_relation_residual",
    "egorov_residual",
    "TENSOR_THRESHOLD",
]

TENSOR_THRESHOLD = 3**5  # auto path switches to index assembly above this N


def _grid(grid: PlanckGrid | int) -> PlanckGrid:
    return grid if isinstance(grid, PlanckGrid) else PlanckGrid(int(grid))


def build_open_baker(params: BakerParams, grid: PlanckGrid | int) -> QuantumMap:
    """B_h = F_N^* blockdiag(0, F_{M1}, 0, F_{M2}, 0) with M_j = N/D_j."""
    g = _grid(grid)
    N = g.N
    for D in (params.D1, params.D2):
        if N % D:
            raise ValueError(f"N={N} is not divisible by D={D}")
    check_size(N)
    M1, M2 = N // params.D1, N // params.D2
    widths = [
        params.l1 * M1,
        M1,
        params.l2 * M2 - (params.l1 + 1) * M1,
        M2,
        (params.D2 - params.l2 - 1) * M2,
    ]
    assert sum(widths) == N and min(widths) >= 0
    blk = np.zeros((N, N), dtype=complex)
    a1, a2 = params.l1 * M1, params.l2 * M2
    blk[a1 : a1 + M1, a1 : a1 + M1] = dft_matrix(M1).matrix
    blk[a2 : a2 + M2, a2 : a2 + M2] = dft_matrix(M2).matrix
    m = dft_matrix(N).matrix.conj().T @ blk
    return QuantumMap(m, g, "open-baker", {"D1": params.D1, "D2": params.D2, "l1": params.l1, "l2": params.l2})


def build_toy_baker(grid: PlanckGrid | int) -> QuantumMap:
    """Toy model [B1, 0, B2]: column l feeds rows 3l, 3l+1, 3l+2."""
    g = _grid(grid)
    N = g.N
    if N % 3:
        raise ValueError(f"N={N} is not divisible by 3")
    check_size(N)
    M = N // 3
    rows = np.arange(N)
    m = np.zeros((N, N), dtype=complex)
    m[rows, rows // 3] = 1 / math.sqrt(3)
    m[rows, 2 * M + rows // 3] = np.exp(4j * np.pi * (rows % 3) / 3) / math.sqrt(3)
    return QuantumMap(m, g, "toy", {"N": N})


@dataclass(frozen=True)
class OmegaBlock:
    """Restriction of F_D^* to the kept strips (rows and columns alike)."""

    D: int
    kept: tuple[int, ...]
    block: np.ndarray

    @property
    def size(self) -> int:
        return len(self.kept)

    def eigenvalues(self) -> np.ndarray:
        """Block eigenvalues ordered by modulus, largest first."""
        ev = np.linalg.eigvals(self.block)
        return ev[np.argsort(-np.abs(ev), kind="stable")]


def _kept(D: int, kept: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(set(int(c) for c in kept)))
    if not out:
        raise ValueError("kept strip set must be nonempty")
    if out[0] < 0 or out[-1] >= D:
        raise ValueError(f"kept strips {out} out of range for D={D}")
    return out


def omega_block(D: int, kept: Iterable[int]) -> OmegaBlock:
    kept = _kept(D, kept)
    Fs = dft_matrix(D).matrix.conj().T
    blk = Fs[np.ix_(kept, kept)].copy()
    blk.flags.writeable = False
    return OmegaBlock(D, kept, blk)


def _masked_inverse_dft(D: int, kept: Sequence[int]) -> np.ndarray:
    Fs = dft_matrix(D).matrix.conj().T.copy()
    drop = [c for c in range(D) if c not in kept]
    Fs[:, drop] = 0
    return Fs


def build_walsh_open_baker(D: int, k: int, kept: Iterable[int], path: str = "auto") -> QuantumMap:
    """W_k^* blockdiag(W_{k-1} on kept strips, 0 elsewhere).

    ``path`` is "dense" (explicit products of Walsh matrices), "tensor"
    (direct index assembly from v_1 x ... x v_k -> v_2 x ... x v_k x F~^* v_1,
    where F~^* is F_D^* with removed columns zeroed) or "auto".
    """
    if D < 2 or k < 1:
        raise ValueError("need D >= 2 and k >= 1")
    kept = _kept(D, kept)
    N = D**k
    check_size(N)
    if path == "auto":
        path = "tensor" if N > TENSOR_THRESHOLD else "dense"
    M = N // D
    if path == "dense":
        inner = walsh_matrix(D, k - 1).matrix if k > 1 else np.ones((1, 1), complex)
        blk = np.zeros((N, N), dtype=complex)
        for c in kept:
            blk[c * M : (c + 1) * M, c * M : (c + 1) * M] = inner
        m = walsh_matrix(D, k).matrix.conj().T @ blk
    elif path == "tensor":
        Fs = _masked_inverse_dft(D, kept)
        m = np.zeros((N, N), dtype=complex)
        rest = np.arange(M)
        for c in kept:
            for r in range(D):
                m[rest * D + r, c * M + rest] = Fs[r, c]
    else:
        raise ValueError(f"unknown path {path!r}")
    return QuantumMap(m, PlanckGrid.power(D, k), "walsh", {"D": D, "k": k, "kept": list(kept)})


def build_walsh_2baker(k: int) -> QuantumMap:
    """Closed Walsh 2-baker: (A)_{n, j N/2 + floor(n/2)} = (-1)^{jn}/sqrt(2)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    N = 2**k
    check_size(N)
    n = np.arange(N)
    m = np.zeros((N, N), dtype=complex)
    m[n, n // 2] = 1 / math.sqrt(2)
    m[n, N // 2 + n // 2] = (-1.0) ** n / math.sqrt(2)
    return QuantumMap(m, PlanckGrid.power(2, k), "walsh-2baker", {"k": k})


def walsh_baker_tensor_action(factors: Sequence[np.ndarray], D: int, kept: Iterable[int]) -> list[np.ndarray]:
    """Walsh open baker on a product state: (v_1, ..., v_k) -> (v_2, ..., v_k, F~^* v_1)."""
    Fs = _masked_inverse_dft(D, _kept(D, kept))
    return [np.asarray(f, complex) for f in factors[1:]] + [Fs @ np.asarray(factors[0], complex)]


def walsh_baker_adjoint_tensor_action(factors: Sequence[np.ndarray], D: int, kept: Iterable[int]) -> list[np.ndarray]:
    """Adjoint of the above: (v_1, ..., v_k) -> (F~ v_k, v_1, ..., v_{k-1})."""
    Fs = _masked_inverse_dft(D, _kept(D, kept))
    return [Fs.conj().T @ np.asarray(factors[-1], complex)] + [np.asarray(f, complex) for f in factors[:-1]]


# --- semiclassical diagnostics -------------------------------------------------


def operator_norm(A: np.ndarray, tol: float = 1e-8, max_iter: int = 2000, seed: int = 0) -> float:
    """Largest singular value by power iteration on A^* A, SVD if it stalls."""
    A = np.asarray(A)
    if not A.any():
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1]) + 1j * rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A.conj().T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        new = math.sqrt(nw)
        v = w / nw
        if abs(new - sigma) <= tol * max(new, 1e-300):
            return new
        sigma = new
    return float(np.linalg.norm(A, 2))


def weighted_relation_residual(
    U: QuantumMap,
    relation: WeightedRelation,
    chi_left: TrigObservable,
    chi_right: TrigObservable,
    bandwidth: int = 40,
    samples: int = 128,
) -> float:
    """|| U_chi^* U_chi - Op_h(g_R) ||_op with U_chi = Op_h(chi_L) U Op_h(chi_R).

    g_R is the right pushforward weight of ``relation``, expanded in a
    truncated Fourier series before quantization.  The cutoffs should vanish
    near strip boundaries and near the singular momenta of the relation; this
    is not checked.
    """
    L = weyl_quantize(chi_left, U.grid).matrix
    R = weyl_quantize(chi_right, U.grid).matrix
    Uc = L @ U.matrix @ R
    g = TrigObservable.from_function(relation.pushforward_weight(chi_left, chi_right), bandwidth, samples)
    G = weyl_quantize(g, U.grid).matrix
    return operator_norm(Uc.conj().T @ Uc - G)


def egorov_residual(U: QuantumMap, f_left: TrigObservable, f_right: TrigObservable) -> float:
    """|| Op_h(f_L) U - U Op_h(f_R) ||_op, with f_R the pullback of f_L by the map."""
    L = weyl_quantize(f_left, U.grid).matrix
    R = weyl_quantize(f_right, U.grid).matrix
    return operator_norm(L @ U.matrix - U.matrix @ R)

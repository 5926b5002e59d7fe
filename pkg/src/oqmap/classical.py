"""Classical open baker relations, their Markovian weights and trapped sets."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "BakerParams",
    "Point",
    "Branch",
    "WeightedRelation",
    "TRAPPED",
    "baker_image",
    "baker_preimage",
    "toy_probability",
    "toy_images",
    "sin2_sum",
    "escape_time",
    "escape_time_histogram",
    "cantor_dimension",
    "boxcount_trapped",
    "boxcount_table",
    "open_baker_relation",
    "toy_relation",
]

TRAPPED = None  # escape_time result for orbits that survive max_steps


@dataclass(frozen=True)
class BakerParams:
    """Two-strip open baker: strip j is [l_j/D_j, (l_j+1)/D_j)."""

    D1: int
    D2: int
    l1: int
    l2: int

    def __post_init__(self):
        if self.D1 < 2 or self.D2 < 2:
            raise ValueError("stretching factors must be integers > 1")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("strip offsets must be >= 0")
        if Fraction(self.l1 + 1, self.D1) > Fraction(self.l2, self.D2):
            raise ValueError("strips overlap or are out of order")
        if Fraction(self.l2 + 1, self.D2) > 1:
            raise ValueError("second strip leaves the unit interval")

    @classmethod
    def symmetric(cls, D: int) -> "BakerParams":
        return cls(D, D, 0, D - 1)

    @property
    def is_symmetric(self) -> bool:
        return self.D1 == self.D2 and self.l1 == self.D1 - self.l2 - 1

    @property
    def strips(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.D1, self.l1), (self.D2, self.l2))

    def strip_index(self, q) -> int | None:
        for idx, (D, l) in enumerate(self.strips):
            if l <= D * q < l + 1:
                return idx
        return None


@dataclass(frozen=True)
class Point:
    q: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "q", self.q % 1)
        object.__setattr__(self, "p", self.p % 1)

    def __iter__(self):
        return iter((self.q, self.p))


def baker_image(params: BakerParams, rho: Point) -> Point | None:
    """Forward image (D_j q - l_j, (p + l_j)/D_j), or None if rho escapes.

    Works with floats or Fractions; Fractions give exact orbits.
    """
    q, p = rho
    idx = params.strip_index(q)
    if idx is None:
        return None
    D, l = params.strips[idx]
    return Point(D * q - l, (p + l) / D)


def baker_preimage(params: BakerParams, rho: Point) -> Point | None:
    q, p = rho
    for D, l in params.strips:
        if l <= D * p < l + 1:
            return Point((q + l) / D, D * p - l)
    return None


def escape_time(params: BakerParams, rho: Point, max_steps: int) -> int | None:
    """Smallest n >= 1 with the n-th forward image undefined, else TRAPPED."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    for n in range(1, max_steps + 1):
        rho = baker_image(params, rho)
        if rho is None:
            return n
    return TRAPPED


def escape_time_histogram(
    params: BakerParams, points: Iterable[Point], max_steps: int
) -> list[tuple[int, int]]:
    """Rows (step, count); trapped orbits are reported under step max_steps + 1."""
    c = Counter()
    for rho in points:
        n = escape_time(params, rho, max_steps)
        c[max_steps + 1 if n is None else n] += 1
    return sorted(c.items())


# --- multivalued toy relation -------------------------------------------------


def sin2_sum(D: int, x) -> np.ndarray:
    """sum_{j<D} sin^2(D x) / sin^2(x + j pi/D), which is identically D**2.

    Terms with a vanishing denominator are replaced by their series limit.
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for j in range(D):
        y = x + j * np.pi / D
        y = y - np.pi * np.round(y / np.pi)  # sin^2 is pi-periodic
        small = np.abs(y) < 1e-5
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.sin(D * y) ** 2 / np.sin(y) ** 2
        series = D**2 * (1 - (D**2 - 1) * y**2 / 3)
        total = total + np.where(small, series, term)
    return total


def toy_probability(p, j: int, strip: int = 1):
    """Jump probability of branch j from strip 1 or 2 of the toy relation.

    P_j(p) = sin^2(pi p) / (9 sin^2(pi (p + j - s)/3)) with s = 0 on strip 1 and
    s = 2 on strip 2; the removable singularity takes its limit value 1.
    """
    if strip not in (1, 2):
        raise ValueError("strip must be 1 or 2")
    shift = 0 if strip == 1 else 2
    p = np.asarray(p, dtype=float)
    y = np.pi * (p + j - shift) / 3
    # sin(pi p) = +-sin(3y) and sin(3y)/sin(y) = 3 - 4 sin^2(y), so no division
    out = (1 - (4 / 3) * np.sin(y) ** 2) ** 2
    return out if out.ndim else float(out)


_TOY_STRIPS = {1: (Fraction(0), Fraction(1, 3)), 2: (Fraction(2, 3), Fraction(1))}


def toy_images(rho: Point, drop_zero: bool = True) -> list[tuple[Point, float]]:
    """Images and probabilities of rho under the multivalued toy relation."""
    q, p = rho
    for strip, (lo, hi) in _TOY_STRIPS.items():
        if lo <= q < hi:
            break
    else:
        return []
    out = []
    for j in range(3):
        w = toy_probability(float(p), j, strip)
        if drop_zero and w < 1e-14:
            continue
        out.append((Point(3 * q, (p + j) / 3), w))
    return out


# --- weighted relations -------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    """One smooth piece of a relation: q in [lo, hi) jumps to ``jump`` with ``prob``."""

    lo: float
    hi: float
    jump: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    prob: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def indicator(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return ((self.lo <= q) & (q < self.hi)).astype(float)


@dataclass(frozen=True)
class WeightedRelation:
    branches: tuple[Branch, ...]
    kind: str

    def images(self, rho: Point) -> list[tuple[Point, float]]:
        out = []
        for b in self.branches:
            if b.lo <= rho.q < b.hi:
                q2, p2 = b.jump(np.float64(rho.q), np.float64(rho.p))
                out.append((Point(float(q2), float(p2)), float(b.prob(rho.q, rho.p))))
        return out

    def total_probability(self, q, p) -> np.ndarray:
        q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
        return sum(b.indicator(q) * b.prob(q, p) for b in self.branches)

    def pushforward_weight(self, chi_left, chi_right) -> Callable:
        """g_R(q, p) = |chi_R(q, p)|^2 sum_j |chi_L(kappa_j(q, p))|^2 P_j(q, p).

        The squares come from U_chi^* U_chi = Op(chi_R) U^* Op(chi_L)^2 U Op(chi_R)
        to leading order.
        """

        def g(q, p):
            q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
            acc = np.zeros(q.shape)
            for b in self.branches:
                q2, p2 = b.jump(q, p)
                acc = acc + b.indicator(q) * np.abs(chi_left(q2 % 1, p2 % 1)) ** 2 * b.prob(q, p)
            return np.abs(chi_right(q, p)) ** 2 * acc

        return g


def open_baker_relation(params: BakerParams) -> WeightedRelation:
    """Single-valued open baker with unit jump probability on each strip."""
    branches = []
    for D, l in params.strips:
        branches.append(
            Branch(
                l / D,
                (l + 1) / D,
                lambda q, p, D=D, l=l: (D * q - l, (p + l) / D),
                lambda q, p: np.ones(np.shape(q)),
            )
        )
    return WeightedRelation(tuple(branches), "open_baker")


def toy_relation() -> WeightedRelation:
    """Multivalued symmetric 3-baker: three images per point with sin^2 weights."""
    branches = []
    for strip, (lo, hi) in _TOY_STRIPS.items():
        for j in range(3):
            branches.append(
                Branch(
                    float(lo),
                    float(hi),
                    lambda q, p, j=j: (3 * q, (p + j) / 3),
                    lambda q, p, j=j, s=strip: toy_probability(p, j, s) * np.ones(np.shape(q)),
                )
            )
    return WeightedRelation(tuple(branches), "multivalued_toy")


# --- fractal dimension ----------------------------------------------------------


def cantor_dimension(D1: float, D2: float, tol: float = 1e-12) -> float:
    """Unique nu with D1**-nu + D2**-nu = 1 (bisection; closed form if D1 == D2)."""
    if D1 <= 1 or D2 <= 1:
        raise ValueError("stretching factors must exceed 1")
    if D1 == D2:
        return math.log(2) / math.log(D1)
    f = lambda nu: D1**-nu + D2**-nu - 1
    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_MAX_BOXES = 1 << 24


def _survivors_symmetric(D: int, kept: Sequence[int], depth: int) -> np.ndarray:
    # integer left ends of the surviving D-adic intervals of width D**-n
    ends = np.zeros(1, dtype=np.int64)
    for n in range(1, depth + 1):
        ends = (ends[None, :] + np.array(kept, dtype=np.int64)[:, None] * D ** (n - 1)).ravel()
    return ends


def boxcount_trapped(
    params: BakerParams | None = None,
    depth: int = 8,
    *,
    D: int | None = None,
    kept: Sequence[int] | None = None,
) -> tuple[int, float]:
    """Box count of the forward trapped set Gamma_- = C x [0,1) projected on q.

    Counts q-boxes of size D**-depth meeting the depth-step survivor set and
    returns (count, log(count)/(depth log D)).  Either ``params`` or a base
    ``D`` with a set of ``kept`` strips is accepted.  Survival is tracked by
    exact integer digit arithmetic.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if params is not None:
        if params.D1 == params.D2:
            D, kept = params.D1, (params.l1, params.l2)
        else:
            return _boxcount_general(params, depth)
    if D is None or kept is None:
        raise ValueError("give params or D and kept")
    kept = sorted(set(kept))
    if len(kept) ** depth > _MAX_BOXES:
        raise OverflowError(f"{len(kept)}**{depth} boxes exceeds the enumeration limit")
    count = len(np.unique(_survivors_symmetric(D, kept, depth)))
    return count, math.log(count) / (depth * math.log(D))


def _boxcount_general(params: BakerParams, depth: int) -> tuple[int, float]:
    Dres = max(params.D1, params.D2)
    eps = Fraction(1, Dres**depth)
    # refine each survivor interval until it fits within one box width
    stack = [(Fraction(0), Fraction(1))]
    boxes: set[int] = set()
    while stack:
        a, b = stack.pop()
        if b - a > eps:
            stack.extend(((a + l) / Dj, (b + l) / Dj) for Dj, l in params.strips)
            if len(stack) + len(boxes) > _MAX_BOXES:
                raise OverflowError(f"depth {depth} exceeds the enumeration limit")
            continue
        boxes.update(range(math.floor(a / eps), math.ceil(b / eps)))
    count = len(boxes)
    return count, math.log(count) / (depth * math.log(Dres))


def boxcount_table(params: BakerParams, depths: Iterable[int]) -> list[tuple[int, int, float]]:
    """Rows (depth, count, estimate)."""
    return [(d, *boxcount_trapped(params, d)) for d in depths]

"""Muckenhoupt classes and the multiple-weight classes ``A_P`` and ``A_{P,q}``.

Every constant is a supremum over a grid cube family (``full`` by default),
computed from per-scale window means.  ``p_j = 1`` slots use the window
minimum of ``w_j``, inverted, in place of the power average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _cubes
from .grid import Grid, GridFunction, _check_same_grid, _fsum, _weak_sup
from .operators import hl_maximal

__all__ = [
    "Weight",
    "WeightVector",
    "ap_constant",
    "a1_constant",
    "multi_ap_constant",
    "multi_apq_constant",
    "derived_weights",
    "coarsen",
    "a_infinity_surrogate",
    "check_weight_implications",
    "weighted_lp_norm",
    "weighted_weak_norm",
    "power_weight",
]

A_INFINITY_EXPONENTS = (1.5, 2.0, 4.0, 8.0, 16.0)
# tolerated growth of a constant under one coarsening step
A_INFINITY_STABILITY = 1.25
IMPLICATION_STABILITY = 2.0


@dataclass(frozen=True, eq=False)
class Weight:
    """A strictly positive grid function.

    ``descriptor`` (optional, JSON-able) regenerates the weight on any grid;
    refinement checks use it to resample instead of block-averaging.
    """

    w: GridFunction
    descriptor: dict | None = None

    def __post_init__(self) -> None:
        if isinstance(self.w, Weight):
            if self.descriptor is None:
                object.__setattr__(self, "descriptor", self.w.descriptor)
            object.__setattr__(self, "w", self.w.w)
        v = self.w.values
        if v.size and not np.min(v) > 0:
            raise ValueError("weights must be strictly positive")

    @property
    def grid(self) -> Grid:
        return self.w.grid

    @property
    def values(self) -> np.ndarray:
        return self.w.values

    def power(self, a: float) -> "Weight":
        d = None if self.descriptor is None else {"type": "product", "factors": [[self.descriptor, a]]}
        return Weight(self.w.with_values(self.values**a), d)


def _as_weight(w) -> Weight:
    return w if isinstance(w, Weight) else Weight(w)


def _conj(p: float) -> float:
    return math.inf if p == 1 else p / (p - 1)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Weights ``w_1..w_m`` with exponents ``P = (p_1..p_m)`` and target ``q``."""

    weights: tuple[Weight, ...]
    P: tuple[float, ...]
    q: float | None = None

    def __post_init__(self) -> None:
        ws = tuple(_as_weight(w) for w in self.weights)
        object.__setattr__(self, "weights", ws)
        P = tuple(float(p) for p in self.P)
        object.__setattr__(self, "P", P)
        if len(ws) != len(P):
            raise ValueError(f"{len(ws)} weights but {len(P)} exponents")
        if not ws:
            raise ValueError("need at least one weight")
        if any(not (1 <= p < math.inf) for p in P):
            raise ValueError(f"every p_j must lie in [1, inf), got {P}")
        if self.q is not None and not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        _check_same_grid(*[w.w for w in ws])

    @property
    def m(self) -> int:
        return len(self.P)

    @property
    def p(self) -> float:
        return 1.0 / sum(1.0 / pj for pj in self.P)

    @property
    def grid(self) -> Grid:
        return self.weights[0].grid

    def to_dict(self) -> dict[str, Any]:
        return {"P": list(self.P), "q": self.q, "m": self.m}


def ap_constant(w, p: float, mode: str = "full") -> float:
    """Muckenhoupt ``A_p`` constant over the cube family.

    ``p > 1``: ``sup_Q avg_Q(w) * avg_Q(w^(1-p'))^(p-1)``.
    ``p = 1``: ``max Mw / w`` with ``M`` over the same family.
    """
    w = _as_weight(w)
    if not p >= 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if p == 1:
        return a1_constant(w, mode)
    a = w.values
    b = a ** (1.0 - _conj(p))
    stats = (
        (s, mw * mb ** (p - 1.0))
        for (s, mw), (_, mb) in zip(_cubes.iter_window_means(a, mode), _cubes.iter_window_means(b, mode))
    )
    return _cubes.family_sup(stats)


def a1_constant(w, mode: str = "full") -> float:
    w = _as_weight(w)
    return float(np.max(hl_maximal(w.w, mode).values / w.values))


def _slot_stats(wj: np.ndarray, pj: float, exponent: float, mode: str):
    """Per-scale ``avg(wj^exponent)^(1/pj')`` or ``1/min(wj)`` when ``pj = 1``."""
    N = wj.shape[0]
    if pj == 1:
        return _cubes.per_scale(N, mode, lambda s: 1.0 / _cubes.window_min(wj, s, mode))
    c = 1.0 / _conj(pj)
    return ((s, v**c) for s, v in _cubes.iter_window_means(wj**exponent, mode))


def _product_sup(first, slots) -> float:
    best = -np.inf
    for items in zip(first, *slots):
        v = items[0][1]
        for _, x in items[1:]:
            v = v * x
        if v.size:
            best = max(best, float(np.max(v)))
    return best


def multi_ap_constant(v: WeightVector, mode: str = "full") -> float:
    """``sup_Q avg(u)^(1/p) prod_j avg(w_j^(1-p_j'))^(1/p_j')``."""
    u, _ = derived_weights(v)
    p = v.p
    first = ((s, x ** (1.0 / p)) for s, x in _cubes.iter_window_means(u.values, mode))
    slots = [
        _slot_stats(w.values, pj, 1.0 - _conj(pj) if pj > 1 else 0.0, mode)
        for w, pj in zip(v.weights, v.P)
    ]
    return _product_sup(first, slots)


def multi_apq_constant(v: WeightVector, mode: str = "full") -> float:
    """``sup_Q avg(v_w^q)^(1/q) prod_j avg(w_j^(-p_j'))^(1/p_j')``."""
    if v.q is None:
        raise ValueError("the weight vector has no target exponent q")
    _, vp = derived_weights(v)
    q = v.q
    first = ((s, x ** (1.0 / q)) for s, x in _cubes.iter_window_means(vp.values**q, mode))
    slots = [
        _slot_stats(w.values, pj, -_conj(pj) if pj > 1 else 0.0, mode)
        for w, pj in zip(v.weights, v.P)
    ]
    return _product_sup(first, slots)


def derived_weights(v: WeightVector) -> tuple[Weight, Weight]:
    """``u = prod w_j^(p/p_j)`` and ``v = prod w_j``."""
    p = v.p
    u = np.ones(v.grid.shape)
    vp = np.ones(v.grid.shape)
    for w, pj in zip(v.weights, v.P):
        u = u * w.values ** (p / pj)
        vp = vp * w.values
    du = dv = None
    if all(w.descriptor is not None for w in v.weights):
        du = {"type": "product", "factors": [[w.descriptor, p / pj] for w, pj in zip(v.weights, v.P)]}
        dv = {"type": "product", "factors": [[w.descriptor, 1.0] for w in v.weights]}
    return Weight(GridFunction(v.grid, u), du), Weight(GridFunction(v.grid, vp), dv)


def coarsen(w, factor: int = 2):
    """The weight on the grid with ``N / factor`` cells per side.

    Weights with a descriptor are resampled; anything else is block-averaged.
    Block averages keep the mass of a singular cell, so they hide blow-up at
    a point and make the refinement tests below less sensitive.
    """
    f = w.w if isinstance(w, Weight) else w
    grid = f.grid
    if grid.N % factor:
        raise ValueError(f"cannot coarsen N={grid.N} by {factor}")
    coarse = Grid(grid.box, grid.N // factor)
    if isinstance(w, Weight) and w.descriptor is not None:
        return weight_from_dict(w.descriptor, coarse)
    out = GridFunction(coarse, _cubes.window_means(f.values, factor, "dyadic"))
    return Weight(out) if isinstance(w, Weight) else out


def a_infinity_surrogate(w, mode: str = "full") -> tuple[float, float] | None:
    """Smallest ``p`` in :data:`A_INFINITY_EXPONENTS` whose ``A_p`` constant is
    stable under one coarsening step, with that constant; ``None`` if none is.
    """
    w = _as_weight(w)
    for p in A_INFINITY_EXPONENTS:
        fine = ap_constant(w, p, mode)
        if not math.isfinite(fine):
            continue
        if w.grid.N < 2:
            return p, fine
        crude = ap_constant(coarsen(w), p, mode)
        if fine <= A_INFINITY_STABILITY * crude:
            return p, fine
    return None


@dataclass(frozen=True)
class ImpliedConstant:
    name: str
    p: float
    constant: float
    coarse_constant: float

    @property
    def ratio(self) -> float:
        return self.constant / self.coarse_constant

    @property
    def stable(self) -> bool:
        return math.isfinite(self.constant) and self.ratio <= IMPLICATION_STABILITY


@dataclass(frozen=True)
class ImplicationReport:
    kind: str
    hypothesis: float
    hypothesis_coarse: float
    implied: tuple[ImpliedConstant, ...]
    skipped: tuple[str, ...] = field(default_factory=tuple)

    @property
    def hypothesis_stable(self) -> bool:
        return math.isfinite(self.hypothesis) and self.hypothesis <= IMPLICATION_STABILITY * self.hypothesis_coarse

    @property
    def passed(self) -> bool:
        # the implication only binds when the hypothesis constant looks finite
        return (not self.hypothesis_stable) or all(c.stable for c in self.implied)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "hypothesis": self.hypothesis,
            "hypothesis_coarse": self.hypothesis_coarse,
            "hypothesis_stable": self.hypothesis_stable,
            "implied": [
                {"name": c.name, "p": c.p, "constant": c.constant, "coarse": c.coarse_constant, "stable": c.stable}
                for c in self.implied
            ],
            "skipped": list(self.skipped),
            "passed": self.passed,
        }


def _coarse_vector(v: WeightVector) -> WeightVector:
    return WeightVector(tuple(coarsen(w) for w in v.weights), v.P, v.q)


def _implied(v: WeightVector, kind: str, mode: str) -> tuple[list[tuple[str, Weight, float]], list[str]]:
    m = v.m
    out: list[tuple[str, Weight, float]] = []
    skipped: list[str] = []
    for j, (w, pj) in enumerate(zip(v.weights, v.P)):
        if kind == "AP":
            if pj == 1:
                out.append((f"w{j + 1}^(1/m) in A_1", w.power(1.0 / m), 1.0))
            else:
                pc = _conj(pj)
                out.append((f"w{j + 1}^(1-p'{j + 1}) in A_(m p'{j + 1})", w.power(1.0 - pc), m * pc))
        else:
            if pj == 1:
                skipped.append(f"w{j + 1}^(-p'{j + 1}): p_{j + 1} = 1 has no finite conjugate")
            else:
                pc = _conj(pj)
                out.append((f"w{j + 1}^(-p'{j + 1}) in A_(m p'{j + 1})", w.power(-pc), m * pc))
    u, vp = derived_weights(v)
    if kind == "AP":
        out.append(("u_w in A_(mp)", u, m * v.p))
    else:
        out.append(("v_w^q in A_(mq)", vp.power(v.q), m * v.q))
    return out, skipped


def check_weight_implications(v: WeightVector, kind: str = "AP", mode: str = "full") -> ImplicationReport:
    """Compute the constants of the weights implied by ``A_P`` (``kind="AP"``)
    or ``A_{P,q}`` (``kind="APq"``) membership, at ``N`` and at ``N/2``.

    An implied constant counts as finite when it grows by at most
    :data:`IMPLICATION_STABILITY` under the refinement ``N/2 -> N``.
    """
    if kind not in ("AP", "APq"):
        raise ValueError(f"kind must be 'AP' or 'APq', got {kind!r}")
    if kind == "APq" and v.q is None:
        raise ValueError("kind 'APq' needs a target exponent q")
    hyp = multi_ap_constant if kind == "AP" else multi_apq_constant
    coarse = _coarse_vector(v)
    fine_list, skipped = _implied(v, kind, mode)
    coarse_list, _ = _implied(coarse, kind, mode)
    implied = tuple(
        ImpliedConstant(name, p, ap_constant(wf, p, mode), ap_constant(wc, p, mode))
        for (name, wf, p), (_, wc, _) in zip(fine_list, coarse_list)
    )
    return ImplicationReport(kind, hyp(v, mode), hyp(coarse, mode), implied, tuple(skipped))


def weighted_lp_norm(f: GridFunction, p: float, w=None) -> float:
    """``(int |f|^p w)^(1/p)``; ``p = inf`` gives the sup norm."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max(initial=0.0))
    wv = 1.0 if w is None else _as_weight(w).values
    return (f.grid.cell_volume * _fsum(a**p * wv)) ** (1.0 / p)


def weighted_weak_norm(f: GridFunction, p: float, w=None) -> float:
    """``sup_t t * w({|f| >= t})^(1/p)`` over the distinct sample values."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    a = np.abs(f.values)
    wv = np.ones(a.shape) if w is None else _as_weight(w).values
    return _weak_sup(a, wv * f.grid.cell_volume, p)


def power_weight(a: float, grid: Grid) -> Weight:
    """``max(|x|, h/2)^a`` at the cell centers."""
    r = np.maximum(grid.radius(), 0.5 * grid.h)
    return Weight(GridFunction(grid, r**a), {"type": "power", "a": float(a)})


def weight_from_dict(d: dict[str, Any], grid: Grid) -> Weight:
    """Build a weight from ``{"type": "power", "a"}``, ``{"type": "constant", "c"}``
    or ``{"type": "product", "factors": [[descriptor, exponent], ...]}``."""
    kind = d.get("type", "power")
    if kind == "power":
        return power_weight(float(d["a"]), grid)
    if kind == "constant":
        c = float(d.get("c", 1.0))
        return Weight(GridFunction(grid, np.full(grid.shape, c)), {"type": "constant", "c": c})
    if kind == "product":
        v = np.ones(grid.shape)
        for sub, e in d["factors"]:
            v = v * weight_from_dict(sub, grid).values ** float(e)
        return Weight(GridFunction(grid, v), d)
    raise ValueError(f"unknown weight descriptor type {kind!r}")


def weight_vector_from_dict(d: dict[str, Any], grid: Grid) -> WeightVector:
    ws = tuple(weight_from_dict(x, grid) for x in d["weights"])
    return WeightVector(ws, tuple(d["P"]), d.get("q"))

"""Empirical verification of the boundedness inequalities.

Every check evaluates a left- and right-hand side on each case of a seeded
test family and reports the empirical constant ``max LHS / RHS``.  Cases
with ``RHS = 0`` are tallied as trivial and must have ``LHS = 0``; they never
enter the constant.  Constants are maxima over finite families on a finite
grid, so they are estimates, and :func:`refinement_stability` is the tool
for judging them.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import beta as beta_fn

from .czdecomp import cz_decompose, cz_height, verify_cz_properties
from .grid import Cube, Grid, GridFunction, _fsum, _weak_sup, lp_norm, weak_lq_norm
from .kernelcore import Kernel, tail_integral_check, verify_size
from .operators import (
    apply_T_batch,
    default_sharp_delta,
    frac_maximal,
    m_delta,
    multilinear_frac_maximal,
    sharp_maximal,
    tabulate,
)
from .varexp import (
    ExponentFunction,
    exponent_from_dict,
    harmonic_exponent_sum,
    log_holder_constants,
    luxemburg_norm,
)
from .weights import (
    IMPLICATION_STABILITY,
    Weight,
    WeightVector,
    a_infinity_surrogate,
    ap_constant,
    coarsen,
    derived_weights,
    multi_apq_constant,
    power_weight,
    weight_from_dict,
    weight_vector_from_dict,
    weighted_lp_norm,
    weighted_weak_norm,
)

__all__ = [
    "TestFamily",
    "CaseRecord",
    "InequalityReport",
    "RefinementResult",
    "check_endpoint_weak",
    "check_weighted",
    "check_sharp_pointwise",
    "check_T_vs_maximal",
    "check_fefferman_stein",
    "check_kolmogorov",
    "check_varexp_bound",
    "check_product_domination",
    "refinement_stability",
    "check_tail_integral",
    "check_ap_constant",
    "kernel_gate",
    "set_threads",
    "CHECK_INFO",
]

FAMILY_KINDS = ("indicators", "bumps", "oscillations", "spikes", "mixed", "zero")
_MIXED_CYCLE = ("indicators", "bumps", "oscillations", "spikes")
# indicator endpoints live on this many cells per side, so every N >= it resolves them
ALIGN_CELLS = 32
SIZE_GATE_RTOL = 1e-6
LOG_HOLDER_GATE = 2.0
ZERO_TOL = 1e-8
EXACT_TOL = 1e-12
REFINEMENT_BAND = (0.5, 2.0)
TAIL_TOL = 1e-3


_THREADS = 1


def set_threads(k: int) -> None:
    """Worker threads for per-case work.  Results are collected in case order,
    so reports do not depend on ``k``."""
    global _THREADS
    if k < 1:
        raise ValueError(f"threads must be >= 1, got {k}")
    _THREADS = int(k)


def _map(fn: Callable, items: Sequence) -> list:
    if _THREADS == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_THREADS) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- test families


def _case_rng(seed: int, i: int) -> np.random.Generator:
    # one stream per case index, so case i never depends on the family size
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def _draw_spec(kind: str, rng: np.random.Generator, n: int) -> dict[str, Any]:
    """A bounded profile supported in the central half ``[1/4, 3/4)^n`` of the unit box."""
    u = 1.0 / ALIGN_CELLS
    lo_cell, hi_cell = ALIGN_CELLS // 4, 3 * ALIGN_CELLS // 4
    if kind == "zero":
        return {"kind": "zero"}
    if kind == "indicators":
        pieces = []
        for _ in range(int(rng.integers(1, 4))):
            side = [int(rng.integers(1, 7)) for _ in range(n)]
            corner = [int(rng.integers(lo_cell, hi_cell - s + 1)) for s in side]
            pieces.append(
                {"lo": [c * u for c in corner], "hi": [(c + s) * u for c, s in zip(corner, side)],
                 "c": float(rng.uniform(0.5, 2.0))}
            )
        return {"kind": "indicators", "pieces": pieces}
    if kind == "bumps":
        rho = float(rng.uniform(1 / 32, 1 / 8))
        center = [float(rng.uniform(0.25 + rho, 0.75 - rho)) for _ in range(n)]
        return {"kind": "bumps", "center": center, "rho": rho, "c": float(rng.uniform(0.5, 2.0))}
    if kind == "oscillations":
        side = 2 * int(rng.integers(2, 5))
        corner = [int(rng.integers(lo_cell, hi_cell - side + 1)) for _ in range(n)]
        return {
            "kind": "oscillations",
            "lo": [c * u for c in corner],
            "hi": [(c + side) * u for c in corner],
            "periods": int(rng.integers(1, 4)),
            "c": float(rng.uniform(0.5, 2.0)),
        }
    if kind == "spikes":
        R = float(rng.uniform(1 / 16, 1 / 8))
        center = [float(rng.uniform(0.25 + R, 0.75 - R)) for _ in range(n)]
        return {
            "kind": "spikes", "center": center, "R": R, "rho": 1 / 256,
            "beta": float(rng.uniform(0.2, 0.8)) * n, "c": float(rng.uniform(0.5, 2.0)),
        }
    raise ValueError(f"unknown family kind {kind!r}")


def _evaluate(spec: dict[str, Any], grid: Grid) -> np.ndarray:
    """Sample a profile (given on the unit box) at the cell centers of ``grid``."""
    lo = np.asarray(grid.box.lo)
    x = (grid.centers() - lo) / grid.box.L
    kind = spec["kind"]
    if kind == "zero":
        return np.zeros(grid.shape)
    if kind == "indicators":
        v = np.zeros(grid.shape)
        for p in spec["pieces"]:
            inside = np.all((x >= np.asarray(p["lo"])) & (x < np.asarray(p["hi"])), axis=-1)
            v += p["c"] * inside
        return v
    if kind == "bumps":
        r2 = np.sum((x - np.asarray(spec["center"])) ** 2, axis=-1) / spec["rho"] ** 2
        with np.errstate(divide="ignore", over="ignore"):
            v = np.where(r2 < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        return spec["c"] * v
    if kind == "oscillations":
        a, b = np.asarray(spec["lo"]), np.asarray(spec["hi"])
        inside = np.all((x >= a) & (x < b), axis=-1)
        t = (x[..., 0] - a[0]) / (b[0] - a[0])
        return spec["c"] * inside * np.sin(2 * np.pi * spec["periods"] * t)
    if kind == "spikes":
        r = np.linalg.norm(x - np.asarray(spec["center"]), axis=-1)
        v = np.maximum(r, spec["rho"]) ** (-spec["beta"])
        return spec["c"] * np.where(r < spec["R"], v, 0.0)
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class TestFamily:
    """Seeded family of ``count`` cases, each a tuple of ``m`` bounded functions
    supported strictly inside the box.

    Profiles are analytic, so the same family can be sampled on any grid.
    Indicator endpoints are aligned to ``ALIGN_CELLS`` cells per side.
    ``normalize`` rescales each function to unit ``L^1`` norm on the grid.
    """

    __test__ = False  # not a pytest class

    kind: str
    count: int
    seed: int = 0
    m: int = 1
    normalize: bool = False

    def __post_init__(self) -> None:
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"family kind must be one of {FAMILY_KINDS}, got {self.kind!r}")
        if self.count < 0 or self.m < 1:
            raise ValueError("count must be >= 0 and m >= 1")

    def specs(self, n: int) -> list[list[dict[str, Any]]]:
        out = []
        for i in range(self.count):
            rng = _case_rng(self.seed, i)
            row = []
            for j in range(self.m):
                kind = _MIXED_CYCLE[(i + j) % 4] if self.kind == "mixed" else self.kind
                row.append(_draw_spec(kind, rng, n))
            out.append(row)
        return out

    def cases(self, grid: Grid) -> list[tuple[GridFunction, ...]]:
        out = []
        for row in self.specs(grid.n):
            fs = []
            for spec in row:
                v = _evaluate(spec, grid)
                if self.normalize:
                    norm = grid.cell_volume * _fsum(np.abs(v))
                    if norm > 0:
                        v = v / norm
                fs.append(GridFunction(grid, v))
            out.append(tuple(fs))
        return out

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


Cases = Sequence[Sequence[GridFunction]]


def _materialize(family: TestFamily | Cases, grid: Grid | None, m: int) -> tuple[Grid, list[tuple[GridFunction, ...]], dict]:
    if isinstance(family, TestFamily):
        if grid is None:
            raise ValueError("a grid is needed to sample a test family")
        if family.m != m:
            raise ValueError(f"family has m={family.m}, check needs m={m}")
        return grid, family.cases(grid), family.to_dict()
    cases = [tuple(c) for c in family]
    if not cases:
        if grid is None:
            raise ValueError("an empty explicit case list needs a grid")
        return grid, [], {"kind": "explicit", "count": 0}
    if any(len(c) != m for c in cases):
        raise ValueError(f"every case must hold {m} functions")
    g = cases[0][0].grid
    if grid is not None and grid != g:
        raise ValueError("explicit cases live on another grid")
    return g, cases, {"kind": "explicit", "count": len(cases)}


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class CaseRecord:
    index: int
    lhs: float
    rhs: float
    ratio: float | None
    """``None`` for trivial cases (``RHS = 0``)."""

    @property
    def trivial(self) -> bool:
        return self.ratio is None


@dataclass(frozen=True)
class InequalityReport:
    check: str
    params: dict[str, Any]
    family: dict[str, Any]
    N: int
    cases: tuple[CaseRecord, ...]
    constant: float
    passed: bool
    refinement_ratio: float | None = None
    notes: tuple[str, ...] = ()
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def trivial_count(self) -> int:
        return sum(c.trivial for c in self.cases)

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "params": self.params,
            "family": self.family,
            "N": self.N,
            "constant": self.constant,
            "passed": self.passed,
            "refinement_ratio": self.refinement_ratio,
            "cases": len(self.cases),
            "trivial_cases": self.trivial_count,
            "notes": list(self.notes),
            "diagnostics": self.diagnostics,
        }

    def rows(self) -> list[list[Any]]:
        """CSV rows ``check, N, case, lhs, rhs, ratio``."""
        return [
            [self.check, self.N, c.index, c.lhs, c.rhs, "" if c.ratio is None else c.ratio]
            for c in self.cases
        ]


def _report(
    check: str,
    params: dict[str, Any],
    family: dict[str, Any],
    grid: Grid,
    pairs: Sequence[tuple[float, float]],
    gates_ok: bool = True,
    notes: Sequence[str] = (),
    diagnostics: dict[str, Any] | None = None,
    ceiling: float = math.inf,
    zero_scale: float | None = None,
) -> InequalityReport:
    notes = list(notes)
    recs = []
    trivial_ok = True
    for i, (lhs, rhs) in enumerate(pairs):
        lhs, rhs = float(lhs), float(rhs)
        if rhs == 0:
            scale = zero_scale if zero_scale is not None else 1.0
            if abs(lhs) > ZERO_TOL * scale:
                trivial_ok = False
            recs.append(CaseRecord(i, lhs, rhs, None))
        else:
            recs.append(CaseRecord(i, lhs, rhs, lhs / rhs))
    ratios = [r.ratio for r in recs if r.ratio is not None]
    constant = max(ratios) if ratios else 0.0
    if not trivial_ok:
        notes.append("a case with zero right-hand side has nonzero left-hand side")
    finite = math.isfinite(constant)
    if not finite:
        notes.append("empirical constant is not finite")
    if constant > ceiling:
        notes.append(f"empirical constant {constant:.6g} exceeds the ceiling {ceiling:.6g}")
    passed = gates_ok and trivial_ok and finite and constant <= ceiling
    return InequalityReport(
        check, params, family, grid.N, tuple(recs), constant, bool(passed),
        notes=tuple(notes), diagnostics=diagnostics or {},
    )


@dataclass(frozen=True)
class RefinementResult:
    coarse: InequalityReport
    fine: InequalityReport
    ratio: float

    @property
    def ok(self) -> bool:
        lo, hi = REFINEMENT_BAND
        return self.coarse.passed and self.fine.passed and lo <= self.ratio <= hi

    def to_dict(self) -> dict[str, Any]:
        return {"ratio": self.ratio, "ok": self.ok, "coarse": self.coarse.to_dict(), "fine": self.fine.to_dict()}


def refinement_stability(
    handle: Callable[[Grid], InequalityReport], grid: Grid, factor: int = 2
) -> RefinementResult:
    """Run ``handle`` at ``grid`` and at ``grid.refine(factor)``; the ratio is
    fine constant over coarse constant (``1.0`` when both vanish)."""
    coarse = handle(grid)
    fine = handle(grid.refine(factor))
    if coarse.constant == 0:
        ratio = 1.0 if fine.constant == 0 else math.inf
    else:
        ratio = fine.constant / coarse.constant
    fine = dataclasses.replace(fine, refinement_ratio=ratio)
    return RefinementResult(coarse, fine, ratio)


# ---------------------------------------------------------------- gates


def kernel_gate(K: Kernel) -> tuple[bool, float]:
    """Empirical size constant against the declared ``A``."""
    c = verify_size(K)
    return c <= K.A * (1 + SIZE_GATE_RTOL), c


def _kernel_notes(K: Kernel) -> tuple[bool, list[str], dict[str, Any]]:
    ok, c = kernel_gate(K)
    notes = ["operator boundedness is measured here, not assumed"]
    if not ok:
        notes.append(f"kernel size constant {c:.6g} exceeds declared A = {K.A:.6g}")
    return ok, notes, {"kernel": K.to_dict(), "size_constant": c}


def _apply(K: Kernel, grid: Grid, cases) -> list[GridFunction]:
    if not cases:
        return []
    table = tabulate(K, grid) if K.translation_invariant else None
    return apply_T_batch(K, cases, table=table)


def _as_weight(w, grid: Grid) -> Weight | None:
    if w is None:
        return None
    if isinstance(w, dict):
        return weight_from_dict(w, grid)
    return w if isinstance(w, Weight) else Weight(w)


def _as_exponent(q, grid: Grid) -> ExponentFunction:
    if isinstance(q, dict):
        return exponent_from_dict(q, grid)
    if isinstance(q, ExponentFunction):
        if q.grid != grid:
            raise ValueError("exponent lives on another grid; pass a descriptor to resample")
        return q
    raise TypeError(f"cannot build an exponent from {type(q).__name__}")


# ---------------------------------------------------------------- checks


def check_endpoint_weak(
    K: Kernel,
    family: TestFamily | Cases,
    grid: Grid | None = None,
    lambdas: Sequence[float] = (),
    gammas: Sequence[float] = (1.0,),
    cz_cases: int = 5,
) -> InequalityReport:
    """Endpoint weak type: ``||T(f)||_{L^{q,inf}} / prod ||f_j||_1`` with
    ``q = n / (mn - alpha)``.

    ``lambdas`` and ``gammas`` drive an optional diagnostic sweep: the weak
    quantity ``lambda |{|T f| > lambda}|^(1/q)`` and the decomposition
    constants of each ``f_j`` at height ``(lambda gamma)^(n/(mn-alpha))``.
    """
    grid, cases, fam = _materialize(family, grid, K.m)
    m, n, alpha = K.m, K.n, K.alpha
    q = n / (m * n - alpha)
    gate, notes, diag = _kernel_notes(K)
    outs = _apply(K, grid, cases)
    pairs = []
    for fs, Tf in zip(cases, outs):
        rhs = math.prod(lp_norm(f, 1) for f in fs)
        pairs.append((weak_lq_norm(Tf, q), rhs))
    if lambdas:
        sweep = []
        for lam in lambdas:
            for gam in gammas:
                height = cz_height(m, n, alpha, lam, gam)
                weak_at = 0.0
                for Tf in outs:
                    mass = grid.cell_volume * np.count_nonzero(np.abs(Tf.values) > lam)
                    weak_at = max(weak_at, lam * mass ** (1.0 / q))
                p3 = p4 = 0.0
                used = skipped = 0
                for fs in cases[:cz_cases]:
                    for f in fs:
                        box_avg = _fsum(np.abs(f.values)) / f.values.size
                        if box_avg > height:
                            skipped += 1
                            continue
                        r = verify_cz_properties(cz_decompose(f, height), (m, n, alpha, lam, gam))
                        p3, p4 = max(p3, r.p3), max(p4, r.p4)
                        used += 1
                sweep.append(
                    {"lambda": lam, "gamma": gam, "height": height, "weak_at_lambda": weak_at,
                     "cz_p3": p3, "cz_p4": p4, "cz_used": used, "cz_skipped": skipped}
                )
        diag["lambda_sweep"] = sweep
    params = {"m": m, "n": n, "alpha": alpha, "q": q}
    return _report("endpoint-weak", params, fam, grid, pairs, gate, notes, diag)


def check_weighted(
    K: Kernel,
    v: WeightVector | dict,
    family: TestFamily | Cases,
    grid: Grid | None = None,
    strong_or_weak: str = "auto",
) -> InequalityReport:
    """``||T(f)||_{L^q(v_w^q)}`` (strong, all ``p_j > 1``) or its weak form
    (some ``p_j = 1``) against ``prod ||f_j||_{L^{p_j}(w_j^{p_j})}``, with
    ``1/q = 1/p - alpha/n``."""
    grid, cases, fam = _materialize(family, grid, K.m)
    if isinstance(v, dict):
        v = weight_vector_from_dict(v, grid)
    if v.grid != grid:
        raise ValueError("weight vector lives on another grid")
    if v.m != K.m:
        raise ValueError(f"{v.m} weights for an {K.m}-linear kernel")
    n, alpha, p = K.n, K.alpha, v.p
    inv_q = 1.0 / p - alpha / n
    if not inv_q > 0:
        raise ValueError(f"1/q = 1/p - alpha/n = {inv_q:.6g} must be positive")
    q = 1.0 / inv_q
    if v.q is not None and not math.isclose(v.q, q, rel_tol=1e-12):
        raise ValueError(f"weight vector target q = {v.q} but 1/p - alpha/n gives q = {q}")
    v = WeightVector(v.weights, v.P, q)
    has_one = any(pj == 1 for pj in v.P)
    mode = ("weak" if has_one else "strong") if strong_or_weak == "auto" else strong_or_weak
    if mode not in ("strong", "weak"):
        raise ValueError(f"strong_or_weak must be 'strong', 'weak' or 'auto', got {strong_or_weak!r}")
    if mode == "strong" and has_one:
        raise ValueError("the strong bound needs every p_j > 1")
    gate, notes, diag = _kernel_notes(K)
    if not (1.0 / K.m < p <= q):
        notes.append(f"p = {p:.6g} lies outside 1/m < p <= q")
    hyp = multi_apq_constant(v)
    coarse_v = WeightVector(tuple(coarsen(w) for w in v.weights), v.P, q)
    hyp_coarse = multi_apq_constant(coarse_v)
    weight_ok = math.isfinite(hyp) and hyp <= IMPLICATION_STABILITY * hyp_coarse
    if not weight_ok:
        notes.append("A_{P,q} constant is not refinement-stable")
    diag.update(apq_constant=hyp, apq_constant_coarse=hyp_coarse)
    _, vprod = derived_weights(v)
    target = vprod.power(q)
    outs = _apply(K, grid, cases)
    norm = weighted_lp_norm if mode == "strong" else weighted_weak_norm
    pairs = []
    for fs, Tf in zip(cases, outs):
        rhs = math.prod(
            weighted_lp_norm(f, pj, w.power(pj)) for f, w, pj in zip(fs, v.weights, v.P)
        )
        pairs.append((norm(Tf, q, target), rhs))
    params = {"m": K.m, "n": n, "alpha": alpha, "P": list(v.P), "q": q, "mode": mode,
              "weights": [w.descriptor for w in v.weights]}
    return _report("weighted", params, fam, grid, pairs, gate and weight_ok, notes, diag)


def _check_delta(delta: float, m: int, n: int, alpha: float) -> None:
    bound = n / (m * n - alpha)
    if not (0 < delta < 1 and delta < bound):
        raise ValueError(f"delta must satisfy 0 < delta < min(1, {bound:.6g}), got {delta}")


def check_sharp_pointwise(
    K: Kernel,
    family: TestFamily | Cases,
    grid: Grid | None = None,
    delta: float | None = None,
    mode: str = "full",
) -> InequalityReport:
    """``sup_x M^#_delta(T f)(x) / M_alpha(f)(x)`` over cells with positive
    right-hand side; where it vanishes the left-hand side must vanish too."""
    grid, cases, fam = _materialize(family, grid, K.m)
    m, n, alpha = K.m, K.n, K.alpha
    delta = default_sharp_delta(m, n, alpha) if delta is None else float(delta)
    _check_delta(delta, m, n, alpha)
    gate, notes, diag = _kernel_notes(K)
    outs = _apply(K, grid, cases)

    def one(item):
        fs, Tf = item
        L = sharp_maximal(Tf, delta, mode).values
        R = multilinear_frac_maximal(fs, alpha, mode).values
        scale = max(float(np.max(np.abs(Tf.values), initial=0.0)), 1.0)
        return _worst_cell(L, R, ZERO_TOL * scale)

    results = _map(one, list(zip(cases, outs)))
    pairs = [r[0] for r in results]
    zero_ok = all(r[1] for r in results)
    if not zero_ok:
        notes.append("left-hand side is nonzero where the right-hand side vanishes")
    params = {"m": m, "n": n, "alpha": alpha, "delta": delta, "mode": mode}
    return _report("sharp-pointwise", params, fam, grid, pairs, gate and zero_ok, notes, diag)


def _worst_cell(L: np.ndarray, R: np.ndarray, tol: float) -> tuple[tuple[float, float], bool]:
    """The ``(L, R)`` pair at the cell of largest ``L / R`` among cells with
    ``R > 0``, and whether ``|L| <= tol`` wherever ``R = 0``."""
    pos = R > 0
    zero_ok = not np.any(np.abs(L[~pos]) > tol)
    if not np.any(pos):
        return (float(np.max(np.abs(L), initial=0.0)), 0.0), zero_ok
    k = int(np.argmax(L[pos] / R[pos]))
    return (float(L[pos][k]), float(R[pos][k])), zero_ok


def check_T_vs_maximal(
    K: Kernel,
    family: TestFamily | Cases,
    grid: Grid | None = None,
    q: float = 2.0,
    w=None,
    strong_or_weak: str = "strong",
) -> InequalityReport:
    """``||T(f)||_{L^q(w)} / ||M_alpha(f)||_{L^q(w)}`` (or the weak norms)."""
    grid, cases, fam = _materialize(family, grid, K.m)
    m, n, alpha = K.m, K.n, K.alpha
    q0 = n / (m * n - alpha)
    if strong_or_weak == "strong" and not q > q0:
        raise ValueError(f"the strong form needs q > {q0:.6g}, got {q}")
    if strong_or_weak == "weak" and not q >= q0:
        raise ValueError(f"the weak form needs q >= {q0:.6g}, got {q}")
    if strong_or_weak not in ("strong", "weak"):
        raise ValueError(f"strong_or_weak must be 'strong' or 'weak', got {strong_or_weak!r}")
    gate, notes, diag = _kernel_notes(K)
    wt = _as_weight(w, grid)
    w_ok = True
    if wt is not None:
        ainf = a_infinity_surrogate(wt)
        w_ok = ainf is not None
        diag["a_infinity"] = None if ainf is None else {"p": ainf[0], "constant": ainf[1]}
        if not w_ok:
            notes.append("weight fails the A_infinity surrogate")
    norm = weighted_lp_norm if strong_or_weak == "strong" else weighted_weak_norm
    outs = _apply(K, grid, cases)

    def one(item):
        fs, Tf = item
        return norm(Tf, q, wt), norm(multilinear_frac_maximal(fs, alpha), q, wt)

    pairs = _map(one, list(zip(cases, outs)))
    params = {"m": m, "n": n, "alpha": alpha, "q": q, "mode": strong_or_weak,
              "weight": None if wt is None else wt.descriptor}
    return _report("T-vs-maximal", params, fam, grid, pairs, gate and w_ok, notes, diag)


def check_fefferman_stein(
    family: TestFamily | Cases,
    grid: Grid | None = None,
    delta: float = 1.0,
    p: float = 2.0,
    w=None,
    mode: str = "full",
) -> InequalityReport:
    """``int (M_delta f)^p w / int (M^#_delta f)^p w``; the weak-norm ratio is
    reported as the ``weak_constant`` diagnostic.

    Constant functions make the right-hand side vanish on a finite box, so
    families should be mean-zero (``oscillations``).
    """
    grid, cases, fam = _materialize(family, grid, 1)
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    wt = _as_weight(w, grid)
    notes: list[str] = []
    diag: dict[str, Any] = {}
    w_ok = True
    if wt is not None:
        ainf = a_infinity_surrogate(wt)
        w_ok = ainf is not None
        diag["a_infinity"] = None if ainf is None else {"p": ainf[0], "constant": ainf[1]}
        if not w_ok:
            notes.append("weight fails the A_infinity surrogate")
    wv = 1.0 if wt is None else wt.values

    def one(fs):
        (f,) = fs
        L = m_delta(f, delta, mode)
        R = sharp_maximal(f, delta, mode)
        lhs = grid.cell_volume * _fsum(L.values**p * wv)
        rhs = grid.cell_volume * _fsum(R.values**p * wv)
        wr = weighted_weak_norm(R, p, wt)
        weak = weighted_weak_norm(L, p, wt) / wr if wr > 0 else 0.0
        return (lhs, rhs), weak

    results = _map(one, cases)
    pairs = [r[0] for r in results]
    diag["weak_constant"] = max((r[1] for r in results), default=0.0)
    params = {"delta": delta, "p": p, "mode": mode, "weight": None if wt is None else wt.descriptor}
    return _report("fefferman-stein", params, fam, grid, pairs, w_ok, notes, diag)


def kolmogorov_bound(p: float, q: float) -> float:
    """Sharp constant ``(q / (q - p))^(1/p)`` of the local Kolmogorov inequality."""
    return (q / (q - p)) ** (1.0 / p)


def check_kolmogorov(
    family: TestFamily | Cases,
    grid: Grid | None = None,
    p: float = 1.0,
    q: float = 2.0,
    Q: Cube | None = None,
) -> InequalityReport:
    """``|Q|^(-1/p) ||f||_{L^p(Q)} / (|Q|^(-1/q) ||f||_{L^{q,inf}(Q)})``.

    The form with ``|Q|^(alpha/n)``, ``1/q = 1/p - alpha/n``, is the same
    ratio after multiplying through by ``|Q|^(1/p)``; it is computed
    separately and reported as the ``alpha_form_constant`` diagnostic.
    ``Q`` defaults to the central half of the box.
    """
    if not 0 < p < q:
        raise ValueError(f"need 0 < p < q, got p={p}, q={q}")
    grid, cases, fam = _materialize(family, grid, 1)
    if Q is None:
        Q = Cube(grid, (grid.N // 4,) * grid.n, grid.N // 2)
    n = grid.n
    alpha = n * (1.0 / p - 1.0 / q)
    vol = grid.cell_volume
    pairs = []
    alpha_form = 0.0
    for (f,) in cases:
        a = np.abs(f.values[Q.slices])
        lp = (vol * _fsum(a**p)) ** (1.0 / p)
        wk = _weak_sup(a, np.full(a.shape, vol), q)
        pairs.append((Q.measure ** (-1.0 / p) * lp, Q.measure ** (-1.0 / q) * wk))
        if wk > 0:
            alpha_form = max(alpha_form, lp / (Q.measure ** (alpha / n) * wk))
    bound = kolmogorov_bound(p, q)
    diag = {"alpha": alpha, "alpha_form_constant": alpha_form, "bound": bound,
            "cube": {"corner": list(Q.corner), "side": Q.side}}
    params = {"p": p, "q": q}
    return _report("kolmogorov", params, fam, grid, pairs, True, (), diag, ceiling=bound * (1 + EXACT_TOL))


def check_varexp_bound(
    K: Kernel,
    exponents: Sequence[dict | ExponentFunction],
    split: Sequence[float],
    family: TestFamily | Cases,
    grid: Grid | None = None,
) -> InequalityReport:
    """``||T(f)||_{q(.)} / prod ||f_j||_{p_j(.)}`` with
    ``1/q = sum 1/p_j - alpha/n``.

    Diagnostics carry the intermediate chain through the product bound
    ``M_alpha(f) <= prod M_{alpha_i} f_i``: ``chain_product`` is
    ``||M_alpha f||_q / prod ||M_{alpha_i} f_i||_{q_i}`` and ``chain_lemma``
    is ``prod ||M_{alpha_i} f_i||_{q_i} / prod ||f_i||_{p_i}``, with
    ``1/q_i = 1/p_i - alpha_i/n``.  Gate violations are reported, not clamped.
    """
    grid, cases, fam = _materialize(family, grid, K.m)
    m, n, alpha = K.m, K.n, K.alpha
    _check_split(split, alpha, m, n)
    ps = [_as_exponent(e, grid) for e in exponents]
    if len(ps) != m:
        raise ValueError(f"{len(ps)} exponents for an {m}-linear kernel")
    gate, notes, diag = _kernel_notes(K)
    ok = gate
    holder = [log_holder_constants(pj) for pj in ps]
    diag["log_holder"] = [h._asdict() for h in holder]
    for j, h in enumerate(holder):
        if h.C_loc > LOG_HOLDER_GATE:
            ok = False
            notes.append(f"p_{j + 1} local log-Hoelder constant {h.C_loc:.6g} exceeds {LOG_HOLDER_GATE}")
    for j, (pj, aj) in enumerate(zip(ps, split)):
        if not pj.in_class_P:
            ok = False
            notes.append(f"p_{j + 1} has p_- = {pj.q_minus:.6g} <= 1")
        if not pj.q_plus < n / aj:
            ok = False
            notes.append(f"p_{j + 1} has p_+ = {pj.q_plus:.6g} >= n/alpha_{j + 1} = {n / aj:.6g}")
    p = harmonic_exponent_sum(ps)
    if not p.in_class_P:
        ok = False
        notes.append(f"p(.) has p_- = {p.q_minus:.6g} <= 1")
    inv_q = 1.0 / p.values - alpha / n
    if not (np.all(inv_q > 0) and np.all(inv_q < 1)):
        notes.append("1/q(.) leaves (0, 1); no norms computed")
        return _report("varexp-bound", {"m": m, "n": n, "alpha": alpha, "split": list(split)},
                       fam, grid, [], False, notes, diag)
    q = ExponentFunction(grid, 1.0 / inv_q)
    inv_qi = [1.0 / pj.values - aj / n for pj, aj in zip(ps, split)]
    chain = all(np.all(v > 0) for v in inv_qi)
    qi = [ExponentFunction(grid, 1.0 / v) for v in inv_qi] if chain else []
    if not chain:
        notes.append("some 1/q_i(.) = 1/p_i(.) - alpha_i/n is not positive; chain diagnostics skipped")
    outs = _apply(K, grid, cases)
    pairs = []
    chain_product = chain_lemma = 0.0
    for fs, Tf in zip(cases, outs):
        rhs = math.prod(luxemburg_norm(f, pj) for f, pj in zip(fs, ps))
        pairs.append((luxemburg_norm(Tf, q), rhs))
        if chain and rhs > 0:
            Mf = luxemburg_norm(multilinear_frac_maximal(fs, alpha), q)
            prodM = math.prod(
                luxemburg_norm(frac_maximal(f, aj), qj) for f, aj, qj in zip(fs, split, qi)
            )
            chain_product = max(chain_product, Mf / prodM)
            chain_lemma = max(chain_lemma, prodM / rhs)
    diag.update(chain_product=chain_product if chain else None,
                chain_lemma=chain_lemma if chain else None,
                q_minus=q.q_minus, q_plus=q.q_plus)
    params = {"m": m, "n": n, "alpha": alpha, "split": list(split),
              "exponents": [pj.to_dict() for pj in ps]}
    return _report("varexp-bound", params, fam, grid, pairs, ok, notes, diag)


def _check_split(split: Sequence[float], alpha: float, m: int, n: int) -> None:
    if len(split) != m:
        raise ValueError(f"split has {len(split)} parts, need {m}")
    if any(not 0 < a < n for a in split):
        raise ValueError(f"every alpha_i must lie in (0, {n}), got {list(split)}")
    if not math.isclose(sum(split), alpha, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"split {list(split)} does not sum to alpha = {alpha}")


def check_product_domination(
    family: TestFamily | Cases,
    alpha: float,
    split: Sequence[float],
    grid: Grid | None = None,
    mode: str = "full",
) -> InequalityReport:
    """``M_alpha(f)(x) <= prod_i M_{alpha_i} f_i(x)`` at every cell.

    The per-case pair is the cell with the largest ratio; the check passes
    when that ratio is at most one (up to ``1e-12`` for rounding).
    """
    m = family.m if isinstance(family, TestFamily) else len(family[0]) if family else len(split)
    grid, cases, fam = _materialize(family, grid, m)
    n = grid.n
    _check_split(split, alpha, m, n)

    def one(fs):
        L = multilinear_frac_maximal(fs, alpha, mode).values
        R = np.ones(grid.shape)
        for f, a in zip(fs, split):
            R = R * frac_maximal(f, a, mode).values
        return _worst_cell(L, R, 0.0)

    results = _map(one, cases)
    pairs = [r[0] for r in results]
    zero_ok = all(r[1] for r in results)
    notes = [] if zero_ok else ["left-hand side is nonzero where the product vanishes"]
    params = {"m": m, "n": n, "alpha": alpha, "split": list(split), "mode": mode}
    return _report("product-domination", params, fam, grid, pairs, zero_ok, notes,
                   ceiling=1.0 + EXACT_TOL)


def tail_closed_form(n: int, alpha: float, a: float) -> float:
    """``int_{R^n} (a + |t|)^-(2n - alpha) dt = |S^{n-1}| a^(alpha - n) B(n, n - alpha)``."""
    sphere = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    return sphere * a ** (alpha - n) * beta_fn(n, n - alpha)


def check_tail_integral(n: int, alpha: float, a: float, m: int = 2) -> InequalityReport:
    """Quadrature of the bilinear tail integral against its closed form.

    The single case has ``LHS = lhs * a^(n - alpha)`` (the implied constant)
    and ``RHS`` the closed-form constant; it passes when they agree to 1e-3.
    """
    t = tail_integral_check(n, m, alpha, a)
    exact = tail_closed_form(n, alpha, a) * a ** (n - alpha)
    ok = abs(t.bound_constant - exact) <= TAIL_TOL
    notes = [] if ok else [f"implied constant {t.bound_constant:.9g} differs from {exact:.9g}"]
    grid = Grid.make(n, 0.0, 1.0, 1)
    params = {"m": m, "n": n, "alpha": alpha, "a": a}
    diag = {"lhs": t.lhs, "closed_form": exact}
    return _report("tail-integral", params, {"kind": "none", "count": 1}, grid,
                   [(t.bound_constant, exact)], ok, notes, diag)


def check_ap_constant(grid: Grid, a: float, p: float = 2.0, mode: str = "full") -> InequalityReport:
    """``A_p`` constant of the power weight ``|x|^a``, with its value one
    refinement coarser as the stability diagnostic.

    The single case is ``(A_p, 1)``; it passes when the constant is at least
    ``1 - 1e-12``.  Finiteness is not a pass criterion: outside
    ``-n < a < n(p - 1)`` the constant grows with ``N`` and that growth is the
    expected outcome, visible in a sweep over ``N`` or ``a``.
    """
    w = power_weight(a, grid)
    c = ap_constant(w, p, mode)
    coarse = ap_constant(coarsen(w), p, mode) if grid.N > 1 else c
    ok = c >= 1 - EXACT_TOL
    notes = [] if ok else [f"A_p constant {c:.6g} is below 1"]
    inside = -grid.n < a < grid.n * (p - 1) if p > 1 else -grid.n < a <= 0
    diag = {"coarse_constant": coarse, "in_class_range": inside}
    params = {"n": grid.n, "a": a, "p": p, "mode": mode}
    return _report("ap-constant", params, {"kind": "none", "count": 1}, grid,
                   [(c, 1.0)], ok, notes, diag)


# ---------------------------------------------------------------- registry

CHECK_INFO: dict[str, dict[str, str]] = {
    "endpoint-weak": {
        "statement": "T_alpha maps L^1 x ... x L^1 into weak L^{n/(mn-alpha)}: "
        "||T_alpha(f)||_{L^{n/(mn-alpha),inf}} <= C prod ||f_j||_{L^1}, for a Dini(1) modulus.",
        "parameters": "kernel, family (normalized to ||f_j||_1 = 1), optional lambdas/gammas diagnostic sweep",
        "pass": "kernel size gate holds and the empirical constant is finite; "
        "refinement ratio in [1/2, 2] when a refinement run is requested",
    },
    "weighted": {
        "statement": "For w in A_{P,q} with 1/q = 1/p - alpha/n > 0: ||T_alpha(f)||_{L^q(v_w^q)} "
        "<= C prod ||f_j||_{L^{p_j}(w_j^{p_j})} when every p_j > 1, and the L^{q,inf}(v_w^q) "
        "bound when some p_j = 1.",
        "parameters": "kernel, weight vector {weights, P}, family, strong_or_weak",
        "pass": "kernel gate, A_{P,q} constant stable under one coarsening (within 2x), finite constant",
    },
    "sharp-pointwise": {
        "statement": "For 0 < delta < min(1, n/(mn-alpha)): M^#_delta(T_alpha(f))(x) <= C M_alpha(f)(x).",
        "parameters": "kernel, family, delta (default 0.5 min(1, n/(mn-alpha))), mode",
        "pass": "finite sup ratio; left side vanishes wherever M_alpha(f) vanishes (1e-8 relative)",
    },
    "T-vs-maximal": {
        "statement": "For w in A_infinity and q > n/(mn-alpha): ||T_alpha(f)||_{L^q(w)} <= "
        "C ||M_alpha(f)||_{L^q(w)}; the weak-norm form holds for q >= n/(mn-alpha).",
        "parameters": "kernel, family, q, weight, strong_or_weak",
        "pass": "weight passes the A_infinity surrogate and the constant is finite",
    },
    "fefferman-stein": {
        "statement": "For w in A_infinity, whenever the left side is finite: "
        "int (M_delta f)^p w <= C int (M^#_delta f)^p w.",
        "parameters": "family (mean-zero), delta in (0, 1], p, weight",
        "pass": "weight passes the A_infinity surrogate and the constant is finite",
    },
    "kolmogorov": {
        "statement": "For 0 < p < q: |Q|^{-1/p} ||f||_{L^p(Q)} <= C |Q|^{-1/q} ||f||_{L^{q,inf}(Q)}, "
        "equivalently ||f||_{L^p(Q)} <= C |Q|^{alpha/n} ||f||_{L^{q,inf}(Q)} with 1/q = 1/p - alpha/n.",
        "parameters": "family, p, q, cube Q (default the central half of the box)",
        "pass": "constant at most the sharp value (q/(q-p))^{1/p}",
    },
    "varexp-bound": {
        "statement": "For log-Hoelder exponents with 1/p(.) = sum 1/p_j(.) and 0 < 1/q(.) = "
        "1/p(.) - alpha/n < 1: ||T_alpha(f)||_{L^{q(.)}} <= C prod ||f_j||_{L^{p_j(.)}}.",
        "parameters": "kernel, exponent descriptors p_j, alpha split alpha_i with p_j+ < n/alpha_i, family",
        "pass": "log-Hoelder gate (C_loc <= 2), exponent-range gates, finite constant",
    },
    "product-domination": {
        "statement": "For alpha = sum alpha_i with 0 < alpha_i < n: "
        "M_alpha(f)(x) <= prod_i M_{alpha_i} f_i(x) at every point.",
        "parameters": "family, alpha, split",
        "pass": "ratio at most 1 at every cell (1e-12 rounding allowance)",
    },
    "tail-integral": {
        "statement": "int_{|x - y_2| > a} (|x - y_1| + |x - y_2|)^{alpha - 2n} dy_2 <= C a^{alpha - n}, "
        "with C independent of a.",
        "parameters": "n, m, alpha, a",
        "pass": "lhs a^{n - alpha} matches the closed form within 1e-3",
    },
    "ap-constant": {
        "statement": "The power weight |x|^a lies in A_p exactly when -n < a < n(p - 1); "
        "A_p(w) = sup_Q (avg_Q w)(avg_Q w^{-1/(p-1)})^{p-1} >= 1.",
        "parameters": "grid, a, p",
        "pass": "constant at least 1 - 1e-12; blow-up outside the class shows as growth in N",
    },
}

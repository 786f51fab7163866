"""Regularity moduli, m-linear fractional kernels and empirical kernel checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate as _spi
from scipy import special

__all__ = [
    "Modulus",
    "power_modulus",
    "log_power_modulus",
    "table_modulus",
    "custom_modulus",
    "DiniResult",
    "dini_integral",
    "log_dini_integral",
    "Kernel",
    "riesz_kernel",
    "perturbed_riesz_kernel",
    "verify_size",
    "verify_regularity",
    "tail_integral_check",
    "modulus_from_dict",
    "kernel_from_dict",
]

DYADIC_DEPTH = 60
QUAD_NODES = 100_000
CAUCHY_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class Modulus:
    """A nondecreasing modulus of continuity ``omega: [0, inf) -> [0, inf)``."""

    kind: str
    params: dict = field(default_factory=dict)
    scale: float = 1.0
    fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("power", "logpower", "table", "custom"):
            raise ValueError(f"unknown modulus kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("modulus scale must be positive")
        t = 2.0 ** -np.arange(DYADIC_DEPTH + 1)
        w = self(t)
        if not (0 < w[0] < np.inf):
            raise ValueError(f"need 0 < omega(1) < inf, got {w[0]}")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("modulus must be finite and non-negative")
        if np.any(np.diff(w[::-1]) < -1e-15 * w[0]):
            raise ValueError("modulus is not nondecreasing on dyadic points")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            v = np.power(np.maximum(t, 0.0), self.params["eps"])
        elif self.kind == "logpower":
            tt = np.clip(t, 1e-300, 1.0)
            v = np.where(t > 0, (1.0 - np.log(tt)) ** (-self.params["beta"]), 0.0)
        elif self.kind == "table":
            v = np.interp(t, self.params["t"], self.params["w"])
        else:
            v = np.asarray(self.fn(t), dtype=float)
        return self.scale * v

    def scaled(self, c: float) -> "Modulus":
        return Modulus(self.kind, dict(self.params), self.scale * c, self.fn)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom moduli are not serializable")
        return {"type": self.kind, **self.params, "scale": self.scale}

    def _tail(self, a: float, k: int, U: float) -> float | None:
        """Exact integral of ``omega(e^{-u})^a (1+u)^k`` over ``u > U`` when known."""
        ca = self.scale**a
        if self.kind == "power":
            r = a * self.params["eps"]
            # int_U^inf e^{-r u} (1+u)^k du = e^r r^{-(k+1)} Gamma(k+1, r(1+U))
            z = r * (1 + U)
            return ca * math.exp(r) * special.gammaincc(k + 1, z) * special.gamma(k + 1) / r ** (k + 1)
        if self.kind == "logpower":
            e = k - a * self.params["beta"]
            if e >= -1:
                return math.inf
            return ca * (1 + U) ** (e + 1) / (-(e + 1))
        return None


def power_modulus(eps: float, scale: float = 1.0) -> Modulus:
    """``omega(t) = scale * t**eps``."""
    if not eps > 0:
        raise ValueError("exponent must be positive")
    return Modulus("power", {"eps": float(eps)}, scale)


def log_power_modulus(beta: float, scale: float = 1.0) -> Modulus:
    """``omega(t) = scale * (1 + log(1/t))**(-beta)`` for ``t <= 1``, constant after."""
    if not beta > 0:
        raise ValueError("exponent must be positive")
    return Modulus("logpower", {"beta": float(beta)}, scale)


def table_modulus(t: Sequence[float], w: Sequence[float], scale: float = 1.0) -> Modulus:
    t = [float(v) for v in t]
    w = [float(v) for v in w]
    if len(t) != len(w) or len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("table needs increasing abscissae and matching values")
    return Modulus("table", {"t": t, "w": w}, scale)


def custom_modulus(fn: Callable[[np.ndarray], np.ndarray], scale: float = 1.0) -> Modulus:
    return Modulus("custom", {}, scale, fn)


def modulus_from_dict(d: dict) -> Modulus:
    kind = d["type"]
    scale = float(d.get("scale", 1.0))
    if kind == "power":
        return power_modulus(d["eps"], scale)
    if kind == "logpower":
        return log_power_modulus(d["beta"], scale)
    if kind == "table":
        return table_modulus(d["t"], d["w"], scale)
    raise ValueError(f"unknown modulus type {kind!r}")


class DiniResult(NamedTuple):
    value: float
    """Quadrature value of the (log-)Dini integral, ``inf`` if declared divergent."""
    dyadic_sum: float
    """Dyadic proxy ``sum_j omega(2^-j)^a (1 + j log 2)^k`` for ``j = 0..60``."""
    tail: float
    """Contribution added beyond the quadrature cutoff."""
    converged: bool


def _dini(omega: Modulus, a: float, k: int) -> DiniResult:
    U = DYADIC_DEPTH * math.log(2.0)
    u = np.linspace(0.0, U, QUAD_NODES)
    g = omega(np.exp(-u)) ** a * (1.0 + u) ** k
    body = float(_spi.trapezoid(g, u))

    j = np.arange(DYADIC_DEPTH + 1)
    dyadic = float(np.sum(omega(2.0**-j) ** a * (1.0 + j * math.log(2.0)) ** k))

    # Cauchy test: increment over the last dyadic block of u
    last = u >= U - math.log(2.0)
    increment = float(_spi.trapezoid(g[last], u[last]))
    tail = omega._tail(a, k, U)
    if tail is None:
        tail = _extrapolated_tail(u, g)
    if increment > CAUCHY_TOL or not math.isfinite(tail):
        return DiniResult(math.inf, dyadic, math.inf, False)
    return DiniResult(float(body + tail), dyadic, float(tail), True)


def _extrapolated_tail(u: np.ndarray, g: np.ndarray) -> float:
    """Tail beyond the cutoff assuming ``g ~ C (1+u)^{-s}`` near the cutoff."""
    U = u[-1]
    i0 = np.searchsorted(u, U - math.log(2.0))
    g1, g0 = g[-1], g[i0]
    if g1 <= 0:
        return 0.0
    if g0 <= g1:
        return math.inf
    s = math.log(g0 / g1) / math.log((1 + U) / (1 + u[i0]))
    if s <= 1:
        return math.inf
    return g1 * (1 + U) / (s - 1)


def dini_integral(omega: Modulus, a: float) -> DiniResult:
    """``int_0^1 omega(t)^a dt/t`` via ``u = log(1/t)`` and the trapezoid rule."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    return _dini(omega, float(a), 0)


def log_dini_integral(omega: Modulus, a: float, k: int) -> DiniResult:
    """``int_0^1 omega(t)^a (1 + log(1/t))^k dt/t``."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    return _dini(omega, float(a), int(k))


Profile = Callable[[Sequence[np.ndarray]], np.ndarray]


@dataclass(frozen=True, eq=False)
class Kernel:
    """An m-linear fractional kernel ``K(x, y_1, ..., y_m)``.

    Translation-invariant kernels are given by a ``profile`` of the
    differences ``x - y_j`` (each an array of shape ``(..., n)``); the
    operators module exploits this to tabulate the kernel once per grid.
    """

    m: int
    n: int
    alpha: float
    A: float
    modulus: Modulus
    profile: Profile | None = field(default=None, repr=False)
    evaluate: Callable[..., np.ndarray] | None = field(default=None, repr=False)
    name: str = "custom"
    params: dict = field(default_factory=dict)
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.m < 1 or self.n not in (1, 2):
            raise ValueError("need m >= 1 and n in {1, 2}")
        if not 0 < self.alpha < self.m * self.n:
            raise ValueError(f"alpha must lie in (0, mn) = (0, {self.m * self.n}), got {self.alpha}")
        if not self.A > 0:
            raise ValueError("size constant must be positive")
        if (self.profile is None) == (self.evaluate is None):
            raise ValueError("give exactly one of profile or evaluate")

    @property
    def translation_invariant(self) -> bool:
        return self.profile is not None

    @property
    def homogeneity(self) -> float:
        """The size exponent ``mn - alpha``."""
        return self.m * self.n - self.alpha

    def base(self, x: np.ndarray, *ys: np.ndarray) -> np.ndarray:
        """Kernel values without the ``scale`` factor."""
        if len(ys) != self.m:
            raise ValueError(f"kernel takes {self.m} y-arguments, got {len(ys)}")
        if self.profile is not None:
            return self.profile([x - y for y in ys])
        return self.evaluate(x, *ys)

    def __call__(self, x, *ys) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ys = [np.asarray(y, dtype=float) for y in ys]
        return self.scale * self.base(x, *ys)

    def scaled(self, c: float) -> "Kernel":
        if not c > 0:
            raise ValueError("scale must be positive")
        return _replace(self, scale=self.scale * c, A=self.A * c)

    def __mul__(self, c: float) -> "Kernel":
        return self.scaled(c)

    __rmul__ = __mul__

    def __add__(self, other: "Kernel") -> "Kernel":
        if (self.m, self.n) != (other.m, other.n) or self.alpha != other.alpha:
            raise ValueError("can only add kernels of the same arity, dimension and order")
        if not (self.translation_invariant and other.translation_invariant):
            raise ValueError("kernel sums need translation-invariant kernels")
        p1, p2, c1, c2 = self.profile, other.profile, self.scale, other.scale

        def profile(ds):
            return c1 * p1(ds) + c2 * p2(ds)

        mod = self.modulus.scaled(1.0)
        return Kernel(self.m, self.n, self.alpha, self.A + other.A, mod, profile=profile, name="sum")

    def with_modulus(self, modulus: Modulus) -> "Kernel":
        return _replace(self, modulus=modulus)

    def to_dict(self) -> dict:
        if self.name not in _KERNEL_BUILDERS:
            raise ValueError(f"kernel {self.name!r} has no serializable descriptor")
        return {
            "type": self.name,
            "m": self.m,
            "n": self.n,
            "alpha": self.alpha,
            "scale": self.scale,
            **self.params,
        }


def _replace(k: Kernel, **kw) -> Kernel:
    d = dict(
        m=k.m, n=k.n, alpha=k.alpha, A=k.A, modulus=k.modulus, profile=k.profile,
        evaluate=k.evaluate, name=k.name, params=dict(k.params), scale=k.scale,
    )
    d.update(kw)
    return Kernel(**d)


def _norms(ds: Sequence[np.ndarray]) -> np.ndarray:
    D = np.sqrt(np.sum(ds[0] * ds[0], axis=-1))
    for d in ds[1:]:
        D = D + np.sqrt(np.sum(d * d, axis=-1))
    return D


def _riesz_profile(exponent: float) -> Profile:
    def profile(ds):
        return _norms(ds) ** exponent

    return profile


REGULARITY_SAMPLES = 20_000


def riesz_kernel(m: int, n: int, alpha: float) -> Kernel:
    """``K(x, y) = (sum_j |x - y_j|)^(alpha - mn)`` with ``A = 1``.

    The recorded modulus is ``omega(t) = c t`` where ``c`` is the empirical
    Lipschitz-type constant over all slots (fixed seed).
    """
    if not 0 < alpha < m * n:
        raise ValueError(f"alpha must lie in (0, {m * n}), got {alpha}")
    exponent = alpha - m * n
    k = Kernel(m, n, float(alpha), 1.0, power_modulus(1.0), profile=_riesz_profile(exponent), name="riesz")
    c = max(verify_regularity(k, k.modulus, slot) for slot in _slots(m))
    return k.with_modulus(power_modulus(1.0, scale=c))


def perturbed_riesz_kernel(m: int, n: int, alpha: float, shift: float) -> Kernel:
    """Riesz-type kernel whose true singularity is stronger by ``shift`` than
    its declared order; it violates the size estimate with ``A = 1``.
    Used for fault injection."""
    if not 0 < alpha < m * n:
        raise ValueError(f"alpha must lie in (0, {m * n}), got {alpha}")
    profile = _riesz_profile(alpha - m * n - shift)
    return Kernel(
        m, n, float(alpha), 1.0, power_modulus(1.0), profile=profile,
        name="perturbed_riesz", params={"shift": float(shift)},
    )


_KERNEL_BUILDERS = {
    "riesz": lambda d: riesz_kernel(int(d["m"]), int(d["n"]), float(d["alpha"])),
    "perturbed_riesz": lambda d: perturbed_riesz_kernel(
        int(d["m"]), int(d["n"]), float(d["alpha"]), float(d.get("shift", 0.5))
    ),
}


def kernel_from_dict(d: dict) -> Kernel:
    kind = d.get("type")
    if kind not in _KERNEL_BUILDERS:
        raise ValueError(f"unknown kernel type {kind!r}; known: {sorted(_KERNEL_BUILDERS)}")
    k = _KERNEL_BUILDERS[kind](d)
    scale = float(d.get("scale", 1.0))
    return k if scale == 1.0 else k.scaled(scale)


def _slots(m: int) -> list[str]:
    return ["x"] + [f"y{j}" for j in range(1, m + 1)]


def _unit_vectors(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    v = rng.standard_normal((size, n))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _sample_configuration(K: Kernel, rng: np.random.Generator, samples: int, allow_diagonal: bool):
    """Random ``x`` in [-1, 1]^n and ``y_j = x + r_j e_j`` with log-uniform ``r_j``."""
    x = rng.uniform(-1.0, 1.0, (samples, K.n))
    ys = []
    zero = np.zeros((samples, K.m), dtype=bool)
    if allow_diagonal and K.m > 1:
        # put some (never all) y_j on x
        zero = rng.random((samples, K.m)) < 0.2
        zero[np.all(zero, axis=1), 0] = False
    for j in range(K.m):
        r = 10.0 ** rng.uniform(-3.0, 3.0, samples)
        r[zero[:, j]] = 0.0
        ys.append(x + r[:, None] * _unit_vectors(rng, samples, K.n))
    return x, ys


def verify_size(K: Kernel, samples: int = 10_000, seed: int = 0) -> float:
    """Empirical size constant ``sup |K| (sum_j |x - y_j|)^(mn - alpha)``."""
    rng = np.random.default_rng(seed)
    x, ys = _sample_configuration(K, rng, samples, allow_diagonal=True)
    bound = _norms([x - y for y in ys]) ** (-K.homogeneity)
    ratio = np.abs(K.base(x, *ys)) / bound
    return K.scale * float(np.max(ratio))


def verify_regularity(
    K: Kernel, omega: Modulus, slot: str | int = "x", samples: int = REGULARITY_SAMPLES, seed: int = 0
) -> float:
    """Empirical smoothness constant for the ``x`` slot or a ``y_j`` slot.

    Perturbations respect ``|x - x'| <= max_j |x - y_j| / 2``; returns
    ``sup |K(.) - K(.')| D^(mn - alpha) / omega(|x - x'| / D)`` with ``D``
    the unperturbed ``sum_j |x - y_j|``; ``inf`` if ``omega`` vanishes where
    the kernel difference does not.
    """
    if isinstance(slot, int):
        slot = "x" if slot == 0 else f"y{slot}"
    if slot not in _slots(K.m):
        raise ValueError(f"slot must be one of {_slots(K.m)}, got {slot!r}")
    rng = np.random.default_rng(seed)
    x, ys = _sample_configuration(K, rng, samples, allow_diagonal=False)
    dist = np.stack([np.linalg.norm(x - y, axis=-1) for y in ys])
    D = _norms([x - y for y in ys])
    r = 0.5 * dist.max(axis=0) * 10.0 ** rng.uniform(-4.0, 0.0, samples)
    step = r[:, None] * _unit_vectors(rng, samples, K.n)
    if slot == "x":
        diff = K.base(x, *ys) - K.base(x + step, *ys)
    else:
        j = int(slot[1:]) - 1
        ys2 = list(ys)
        ys2[j] = ys[j] + step
        diff = K.base(x, *ys) - K.base(x, *ys2)
    diff = np.abs(diff) * K.scale
    w = omega(r / D)
    scaled = diff * D**K.homogeneity
    if np.any((w <= 0) & (scaled > 0)):
        return math.inf
    ok = w > 0
    return float(np.max(scaled[ok] / w[ok], initial=0.0))


class TailCheck(NamedTuple):
    lhs: float
    bound_constant: float


def tail_integral_check(n: int, m: int, alpha: float, a: float) -> TailCheck:
    """``int_{R^n} (a + |t|)^-(2n - alpha) dt`` and the implied constant ``lhs * a^(n - alpha)``.

    Radial quadrature on ``[0, R]`` plus the exact tail beyond ``R``.
    """
    if m != 2:
        raise ValueError("the tail bound is checked for the bilinear case m = 2")
    if not 0 < alpha < n:
        raise ValueError(f"need 0 < alpha < n for a finite tail, got alpha={alpha}, n={n}")
    if not a > 0:
        raise ValueError("a must be positive")
    s = 2 * n - alpha
    R = 50.0 * a
    body, _ = _spi.quad(lambda r: r ** (n - 1) * (a + r) ** (-s), 0.0, R, epsabs=0.0, epsrel=1e-13, limit=200)
    # r^(n-1) = sum_i C(n-1, i) (a+r)^i (-a)^(n-1-i)
    tail = 0.0
    for i in range(n):
        e = i - s + 1
        tail += math.comb(n - 1, i) * (-a) ** (n - 1 - i) * (a + R) ** e / (-e)
    sphere = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    lhs = sphere * (body + tail)
    return TailCheck(lhs, lhs * a ** (n - alpha))

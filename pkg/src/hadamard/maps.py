"""Built-in differentiable maps R^n -> R^n and diagnostics on them.

Every registry map carries an analytic Jacobian and, where one exists, a
known uniform bound M on the spectral norm of the inverse Jacobian. Maps also
expose a cancellation-free ``increment(x, d) = f(x + d) - f(x)`` so that
linearization remainders can be measured at small step sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .linalg import SingularMatrix, inverse_spectral_norm, lu_factor

REGISTRY = (
    "affine",
    "sine_perturbed",
    "coupled_sine",
    "cubic",
    "arctan_drift",
    "arctan_flat",
    "exp_spiral",
    "broken_jac",
)
# registry entries that exist only to exercise failure paths
TEST_ONLY = frozenset({"broken_jac"})

_REQUIRED = {
    "affine": ("matrix", "offset"),
    "sine_perturbed": ("k",),
    "coupled_sine": ("k",),
    "cubic": (),
    "arctan_drift": ("a",),
    "arctan_flat": (),
    "exp_spiral": (),
    "broken_jac": (),
}
_OPTIONAL = {"coupled_sine": ("seed",), "broken_jac": ("k",)}


class SingularJacobian(ArithmeticError):
    """The Jacobian is numerically singular at ``point`` (sample ``index`` if known)."""

    def __init__(self, point, index: int | None = None, cause: Exception | None = None):
        where = f" (sample {index})" if index is not None else ""
        super().__init__(f"singular Jacobian at x={np.asarray(point).tolist()}{where}")
        self.point = np.asarray(point, dtype=float)
        self.index = index
        self.__cause__ = cause


@dataclass(frozen=True)
class MapSpec:
    name: str
    dimension: int
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise ValueError(f"unknown map {self.name!r}; expected one of {', '.join(REGISTRY)}")
        if isinstance(self.dimension, bool) or not isinstance(self.dimension, int) or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        if self.name == "exp_spiral" and self.dimension != 2:
            raise ValueError("exp_spiral is defined on R^2 only")
        missing = [k for k in _REQUIRED[self.name] if k not in self.params]
        if missing:
            raise ValueError(f"map {self.name!r} requires params {missing}")
        allowed = set(_REQUIRED[self.name]) | set(_OPTIONAL.get(self.name, ()))
        extra = sorted(set(self.params) - allowed)
        if extra:
            raise ValueError(f"map {self.name!r} got unexpected params {extra}")
        n = self.dimension
        if self.name == "affine":
            if len(self.params["matrix"]) != n * n:
                raise ValueError(f"affine matrix needs {n * n} row-major entries")
            if len(self.params["offset"]) != n:
                raise ValueError(f"affine offset needs {n} entries")
        if self.name == "arctan_drift" and not float(self.params["a"]) > 0:
            raise ValueError("arctan_drift requires a > 0")

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "MapSpec":
        if not isinstance(obj, Mapping):
            raise ValueError("map spec must be a JSON object")
        try:
            return cls(obj["name"], obj["dimension"], dict(obj.get("params", {})))
        except KeyError as exc:
            raise ValueError(f"map spec is missing key {exc}") from None

    def to_dict(self) -> dict:
        return {"name": self.name, "dimension": self.dimension, "params": dict(self.params)}

    @property
    def label(self) -> str:
        """Short identifier that distinguishes parameterizations, e.g. ``sine_perturbed[k=0.5]``."""
        scalars = [(k, v) for k, v in sorted(self.params.items()) if not isinstance(v, (list, tuple))]
        if not scalars:
            return self.name
        return self.name + "[" + ";".join(f"{k}={v}" for k, v in scalars) + "]"


class MapInstance:
    """A concrete C^1 map with its analytic Jacobian."""

    def __init__(
        self,
        spec: MapSpec,
        f: Callable[[np.ndarray], np.ndarray],
        jac: Callable[[np.ndarray], np.ndarray],
        known_inverse_bound: float | None = None,
        increment: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
        label: str | None = None,
    ):
        if known_inverse_bound is not None and not known_inverse_bound > 0:
            raise ValueError("known_inverse_bound must be positive")
        self.spec = spec
        self.known_inverse_bound = known_inverse_bound
        self.label = label or spec.label
        self._f = f
        self._jac = jac
        self._increment = increment

    def __repr__(self):
        return f"MapInstance({self.label}, n={self.dimension}, M={self.known_inverse_bound})"

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"{self.label}: expected a vector of length {self.dimension}, got shape {x.shape}")
        return x

    def evaluate(self, x) -> np.ndarray:
        return self._f(self._check(x))

    def jacobian(self, x) -> np.ndarray:
        return self._jac(self._check(x))

    def increment(self, x, d) -> np.ndarray:
        """``f(x + d) - f(x)``, evaluated without cancellation when a closed form exists."""
        x, d = self._check(x), self._check(d)
        if self._increment is None:
            return self._f(x + d) - self._f(x)
        return self._increment(x, d)


# -- registry builders -------------------------------------------------------

def _darctan(x, d):
    # arctan(x + d) - arctan(x), exact branch via atan2
    return np.arctan2(d, 1.0 + x * (x + d))


def _dsin(x, d):
    return 2.0 * np.cos(x + 0.5 * d) * np.sin(0.5 * d)


def _build_affine(spec):
    n = spec.dimension
    A = np.array(spec.params["matrix"], dtype=float).reshape(n, n)
    c = np.array(spec.params["offset"], dtype=float)
    A.flags.writeable = False
    try:
        M = inverse_spectral_norm(A)
    except SingularMatrix:
        M = None
    return MapInstance(
        spec,
        lambda x: A @ x + c,
        lambda x: A.copy(),
        M,
        increment=lambda x, d: A @ d,
    )


def _gain_bound(k):
    return 1.0 / (1.0 - abs(k)) if abs(k) < 1.0 else None


def _build_sine_perturbed(spec):
    k = float(spec.params["k"])
    return MapInstance(
        spec,
        lambda x: x + k * np.sin(x),
        lambda x: np.diag(1.0 + k * np.cos(x)),
        _gain_bound(k),
        increment=lambda x, d: d + k * _dsin(x, d),
    )


def mixing_matrix(n: int, seed: int = 0) -> np.ndarray:
    """Fixed orthogonal matrix used by ``coupled_sine`` (sign-normalized QR of a seeded Gaussian)."""
    G = np.random.default_rng(seed).standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def _build_coupled_sine(spec):
    k = float(spec.params["k"])
    Q = mixing_matrix(spec.dimension, int(spec.params.get("seed", 0)))
    Q.flags.writeable = False
    return MapInstance(
        spec,
        lambda x: x + k * np.sin(Q @ x),
        lambda x: np.eye(len(x)) + k * np.cos(Q @ x)[:, None] * Q,
        # ||k diag(cos) Q|| <= k, so the Neumann series bounds the inverse
        _gain_bound(k),
        increment=lambda x, d: d + k * _dsin(Q @ x, Q @ d),
    )


def _build_cubic(spec):
    return MapInstance(
        spec,
        lambda x: x ** 3 + x,
        lambda x: np.diag(3.0 * x ** 2 + 1.0),
        1.0,
        increment=lambda x, d: d * (3.0 * x * x + 3.0 * x * d + d * d + 1.0),
    )


def _build_arctan_drift(spec):
    a = float(spec.params["a"])
    return MapInstance(
        spec,
        lambda x: x + a * np.arctan(x),
        lambda x: np.diag(1.0 + a / (1.0 + x ** 2)),
        1.0,
        increment=lambda x, d: d + a * _darctan(x, d),
    )


def _build_arctan_flat(spec):
    return MapInstance(
        spec,
        np.arctan,
        lambda x: np.diag(1.0 / (1.0 + x ** 2)),
        None,
        increment=_darctan,
    )


def _exp_spiral(x):
    r = np.exp(x[0])
    return np.array([r * np.cos(x[1]), r * np.sin(x[1])])


def _exp_spiral_jac(x):
    r = np.exp(x[0])
    c, s = np.cos(x[1]), np.sin(x[1])
    return np.array([[r * c, -r * s], [r * s, r * c]])


def _exp_spiral_increment(x, d):
    # exp(z) * (exp(delta) - 1) for z = x0 + i x1, delta = d0 + i d1
    re = np.expm1(d[0]) * np.cos(d[1]) - 2.0 * np.sin(0.5 * d[1]) ** 2
    im = np.exp(d[0]) * np.sin(d[1])
    fx = _exp_spiral(x)
    return np.array([fx[0] * re - fx[1] * im, fx[0] * im + fx[1] * re])


def _build_exp_spiral(spec):
    return MapInstance(spec, _exp_spiral, _exp_spiral_jac, None, increment=_exp_spiral_increment)


def _build_broken_jac(spec):
    k = float(spec.params.get("k", 0.5))
    # deliberately wrong derivative: sin where cos belongs
    return MapInstance(
        spec,
        lambda x: x + k * np.sin(x),
        lambda x: np.diag(1.0 + k * np.sin(x)),
        None,
    )


_BUILDERS = {
    "affine": _build_affine,
    "sine_perturbed": _build_sine_perturbed,
    "coupled_sine": _build_coupled_sine,
    "cubic": _build_cubic,
    "arctan_drift": _build_arctan_drift,
    "arctan_flat": _build_arctan_flat,
    "exp_spiral": _build_exp_spiral,
    "broken_jac": _build_broken_jac,
}


def make_map(spec: MapSpec | Mapping[str, Any] | str, dimension: int | None = None, **params) -> MapInstance:
    """Build a registry map from a MapSpec, its JSON form, or a name plus params.

    >>> make_map("cubic", 1).evaluate([2.0])
    array([10.])
    """
    if isinstance(spec, str):
        spec = MapSpec(spec, 2 if dimension is None and spec == "exp_spiral" else dimension, params)
    elif not isinstance(spec, MapSpec):
        spec = MapSpec.from_dict(spec)
    return _BUILDERS[spec.name](spec)


def affine(A, c=None) -> MapInstance:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    return make_map(MapSpec("affine", n, {"matrix": A.ravel().tolist(), "offset": c.tolist()}))


def normalized(fmap: MapInstance, b) -> MapInstance:
    """The map ``h(x) = f(b - x) - f(b)``, which sends 0 to 0."""
    b = np.array(fmap._check(b), dtype=float)
    fb = fmap.evaluate(b)
    return MapInstance(
        fmap.spec,
        lambda x: fmap.evaluate(b - x) - fb,
        lambda x: -fmap.jacobian(b - x),
        fmap.known_inverse_bound,
        increment=lambda x, d: fmap.increment(b - x, -d),
        label=f"{fmap.label}@normalized",
    )


# -- module-level operations -------------------------------------------------

def evaluate(fmap: MapInstance, x) -> np.ndarray:
    return fmap.evaluate(x)


def jacobian(fmap: MapInstance, x) -> np.ndarray:
    return fmap.jacobian(x)


def default_fd_step(x) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(x)))


def jacobian_fd(fmap: MapInstance, x, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian, one column per coordinate direction."""
    x = fmap._check(x)
    h = default_fd_step(x) if h is None else h
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (fmap.evaluate(x + e) - fmap.evaluate(x - e)) / (2.0 * h)
    return J


def check_jacobian(fmap: MapInstance, samples: Sequence, h: float | None = None) -> float:
    """Worst relative Frobenius discrepancy between analytic and FD Jacobians."""
    if len(samples) == 0:
        raise ValueError("check_jacobian needs at least one sample")
    worst = 0.0
    for x in samples:
        J = fmap.jacobian(x)
        err = np.linalg.norm(J - jacobian_fd(fmap, x, h)) / (1.0 + np.linalg.norm(J))
        worst = max(worst, float(err))
    return worst


@dataclass(frozen=True)
class LinearizationEstimate:
    t_values: list
    alpha_values: list
    sample_count: int
    radius: float

    def to_dict(self) -> dict:
        return {
            "t_values": list(self.t_values),
            "alpha_values": list(self.alpha_values),
            "sample_count": self.sample_count,
            "radius": self.radius,
        }


def probe_directions(n: int, count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Coordinate directions plus ``count`` random unit directions, all scaled to ``radius``."""
    rand = rng.standard_normal((count, n))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    return radius * np.vstack([np.eye(n), rand])


def linearization_modulus(
    fmap: MapInstance,
    K_sample: Sequence,
    radius: float,
    t_values: Sequence[float],
    directions_per_point: int = 8,
    seed: int = 42,
) -> LinearizationEstimate:
    """Estimate alpha(t) = sup ||f(x + t h) - f(x) - t f'(x) h|| / t over x in K, ||h|| <= radius."""
    if len(K_sample) == 0:
        raise ValueError("K_sample must be nonempty")
    t_values = [float(t) for t in t_values]
    if any(t <= 0 for t in t_values) or any(a < b for a, b in zip(t_values, t_values[1:])):
        raise ValueError("t_values must be positive and sorted descending")
    if not radius > 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    alphas = [0.0] * len(t_values)
    for x in K_sample:
        x = fmap._check(x)
        J = fmap.jacobian(x)
        for h in probe_directions(len(x), directions_per_point, radius, rng):
            for i, t in enumerate(t_values):
                # J @ (t h) rounds exactly like an affine increment, so affine maps report 0
                rem = fmap.increment(x, t * h) - J @ (t * h)
                alphas[i] = max(alphas[i], float(np.linalg.norm(rem)) / t)
    return LinearizationEstimate(t_values, alphas, len(K_sample), float(radius))


def estimate_inverse_bound(fmap: MapInstance, samples: Sequence) -> float:
    """Largest sampled ``||[f'(x)]^{-1}||_2``."""
    if len(samples) == 0:
        raise ValueError("estimate_inverse_bound needs at least one sample")
    worst = 0.0
    for i, x in enumerate(samples):
        try:
            worst = max(worst, inverse_spectral_norm(lu_factor(fmap.jacobian(x))))
        except SingularMatrix as exc:
            raise SingularJacobian(x, i, exc) from exc
    return worst

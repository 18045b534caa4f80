"""Ekeland-style descent driver and the damped Newton pointwise solver.

The driver repeatedly asks a proposer for a strictly better state and stops
once the merit is below tolerance. Because every accepted move buys at least
``r * distance`` of merit decrease, the total path length is bounded by
``merit(x0) / r``. The Newton proposer realizes this with the decrease test
``merit(x + t w) <= (1 - t/2) merit(x)``, which together with
``||w|| <= M merit(x)`` gives ``r = 1 / (2M)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any, Callable, NamedTuple

import numpy as np

from .linalg import SingularMatrix, lu_factor, solve_linear
from .maps import MapInstance, SingularJacobian

TRACE_HEADER = ("iter", "t", "mu_before", "mu_after", "step_norm", "cum_path", "backtracks")


class Stalled(RuntimeError):
    """No step on the backtracking schedule achieved sufficient decrease."""


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    STALLED = "Stalled"
    MAX_ITERATIONS = "MaxIterations"
    SINGULAR_JACOBIAN = "SingularJacobian"


@dataclass(frozen=True)
class DescentConfig:
    tol_residual: float = 1e-10
    t_init: float = 1.0
    backtrack_factor: float = 0.5
    t_min: float = 1e-12
    max_iterations: int = 200
    decrease_fraction: float = 0.5
    per_point_steps: bool = False

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not 0 < self.t_init <= 1:
            raise ValueError("t_init must lie in (0, 1]")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.t_min > 0:
            raise ValueError("t_min must be positive")
        if isinstance(self.max_iterations, bool) or not isinstance(self.max_iterations, int) or self.max_iterations < 0:
            raise ValueError("max_iterations must be a nonnegative integer")
        if not 0 < self.decrease_fraction < 1:
            raise ValueError("decrease_fraction must lie in (0, 1)")

    @classmethod
    def from_dict(cls, overrides: dict[str, Any] | None) -> "DescentConfig":
        overrides = dict(overrides or {})
        unknown = set(overrides) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown descent settings: {sorted(unknown)}")
        return cls(**overrides)

    def with_(self, **changes) -> "DescentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    index: int
    merit_before: float
    accepted_t: float
    step_norm: float
    merit_after: float
    backtrack_count: int

    @property
    def direction_norm(self) -> float:
        # exact whenever t is a power of two (the default schedule)
        return self.step_norm / self.accepted_t


@dataclass
class DescentTrace:
    records: list = field(default_factory=list)
    initial_merit: float = 0.0
    cumulative_path_length: float = 0.0
    converged: bool = False
    status: Status | None = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_merit(self) -> float:
        return self.records[-1].merit_after if self.records else self.initial_merit

    def rows(self):
        """Rows in trace-CSV column order, with the running path length."""
        cum = 0.0
        for r in self.records:
            cum += r.step_norm
            yield (r.index, r.accepted_t, r.merit_before, r.merit_after, r.step_norm, cum, r.backtrack_count)


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    trace: DescentTrace
    status: Status

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class Proposal(NamedTuple):
    candidate: Any
    rate: float
    t: float = 1.0
    backtracks: int = 0
    merit: float | None = None
    step_norm: float | None = None


def _euclidean(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def descent_drive(
    merit: Callable[[Any], float],
    proposer: Callable[[Any, float], Any],
    x0,
    config: DescentConfig = DescentConfig(),
    distance: Callable[[Any, Any], float] = _euclidean,
):
    """Drive ``merit`` to zero by repeated strict improvement.

    ``proposer(x, merit_x)`` returns ``(candidate, r)`` or a :class:`Proposal`
    such that ``merit(candidate) <= merit_x - r * distance(candidate, x)``; it
    raises :class:`Stalled` (or :class:`SingularJacobian`) when it cannot.
    Returns ``(final_state, trace)``; the trace carries the terminal status.
    """
    x = x0
    mu = float(merit(x0))
    trace = DescentTrace(initial_merit=mu)
    path = 0.0
    while True:
        if mu <= config.tol_residual:
            status = Status.CONVERGED
            break
        if len(trace.records) >= config.max_iterations:
            status = Status.MAX_ITERATIONS
            break
        try:
            p = proposer(x, mu)
        except Stalled:
            status = Status.STALLED
            break
        except SingularJacobian:
            status = Status.SINGULAR_JACOBIAN
            break
        if not isinstance(p, Proposal):
            p = Proposal(*p)
        mu_new = float(merit(p.candidate)) if p.merit is None else p.merit
        step = distance(p.candidate, x) if p.step_norm is None else p.step_norm
        # non-strict with rounding slack: a proposer meeting the bound with equality is accepted
        if not mu_new <= mu - p.rate * step + 1e-12 * mu:
            raise ValueError(
                f"proposer broke its contract: merit {mu_new!r} not below {mu!r} - {p.rate!r}*{step!r}"
            )
        path += step
        trace.records.append(IterationRecord(len(trace.records), mu, p.t, step, mu_new, p.backtracks))
        x, mu = p.candidate, mu_new
    trace.cumulative_path_length = path
    trace.converged = status is Status.CONVERGED
    trace.status = status
    return x, trace


def line_search(merit, base, direction, merit_base: float, config: DescentConfig = DescentConfig()):
    """Backtrack over ``t_init * beta**k`` until ``merit(base + t d) <= (1 - c t) merit_base``.

    Returns ``(t, merit_new, backtrack_count)``; raises :class:`Stalled` once
    ``t`` would drop below ``t_min``.
    """
    if not merit_base > 0:
        raise ValueError("line search needs a positive base merit")
    t = config.t_init
    backtracks = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while t >= config.t_min:
            value = float(merit(base + t * direction))
            if value <= (1.0 - config.decrease_fraction * t) * merit_base:
                return t, value, backtracks
            t *= config.backtrack_factor
            backtracks += 1
    raise Stalled(f"no sufficient decrease for t >= {config.t_min:g} (merit {merit_base:.6g})")


def newton_direction(fmap: MapInstance, x, y) -> np.ndarray:
    """``w = [f'(x)]^{-1} (y - f(x))``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(y, dtype=float) - fmap.evaluate(x)
    try:
        lu = lu_factor(fmap.jacobian(x))
    except (SingularMatrix, ValueError) as exc:
        raise SingularJacobian(x, cause=exc) from exc
    return solve_linear(lu, u)


def residual(fmap: MapInstance, x, y) -> float:
    return float(np.linalg.norm(fmap.evaluate(x) - y))


def newton_proposer(fmap: MapInstance, y, config: DescentConfig):
    y = np.asarray(y, dtype=float)

    def merit(x):
        return residual(fmap, x, y)

    def propose(x, mu):
        w = newton_direction(fmap, x, y)
        t, mu_new, backtracks = line_search(merit, x, w, mu, config)
        step = t * w
        step_norm = float(np.linalg.norm(step))
        rate = config.decrease_fraction * mu / float(np.linalg.norm(w))
        return Proposal(x + step, rate, t, backtracks, mu_new, step_norm)

    return merit, propose


def solve_pointwise(fmap: MapInstance, y, x0, config: DescentConfig = DescentConfig()) -> SolveReport:
    """Damped Newton solve of ``f(x) = y`` from ``x0``."""
    y = fmap._check(y)
    x0 = np.array(fmap._check(x0), dtype=float)
    merit, propose = newton_proposer(fmap, y, config)
    x, trace = descent_drive(merit, propose, x0, config)
    res = trace.final_merit
    return SolveReport(np.asarray(x), res, trace, trace.status)


def check_trace(trace: DescentTrace, bound: float | None, decrease_fraction: float = 0.5) -> dict:
    """Audit a trace against the sufficient-decrease, direction and path-length bounds.

    Bound checks are ``None`` when no inverse bound M is known; the path check
    only applies to converged runs.
    """
    decrease_ok = all(
        r.merit_after <= (1.0 - r.accepted_t * decrease_fraction) * r.merit_before + 1e-15
        for r in trace.records
    )
    out = {"sufficient_decrease_ok": decrease_ok, "direction_bound_ok": None, "path_bound_ok": None}
    if bound is not None:
        out["direction_bound_ok"] = all(
            r.direction_norm <= bound * r.merit_before * (1 + 1e-9) for r in trace.records
        )
        if trace.converged:
            out["path_bound_ok"] = within_path_bound(trace.cumulative_path_length, bound, trace.initial_merit)
    return out


def path_bound(bound: float, initial_merit: float) -> float:
    """The telescoping bound ``2 M mu0`` on the total distance travelled."""
    return 2.0 * bound * initial_merit


def within_path_bound(path_length: float, bound: float, initial_merit: float) -> bool:
    return path_length <= path_bound(bound, initial_merit) * (1 + 1e-9)

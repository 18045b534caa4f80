"""Right inverses over sampled compact target sets, and path-lifting certificates.

A candidate right inverse is the array ``G`` of preimage guesses, one row per
target. Descent runs on the max-residual merit with a single step length
shared by every target, exactly like a step ``g + t w`` in function space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .descent import (
    DescentConfig,
    IterationRecord,
    Proposal,
    Stalled,
    Status,
    descent_drive,
    line_search,
    newton_direction,
    solve_pointwise,
)
from .maps import MapInstance, SingularJacobian, normalized

ANCHOR_RTOL = 1e-12


class Verdict(str, enum.Enum):
    CONSISTENT = "ConsistentWithInjectivity"
    DISTINCT = "DistinctPreimagesDetected"
    INCONCLUSIVE = "Inconclusive"


class NotACollision(ValueError):
    """``certify_pair`` was handed points whose images differ."""


@dataclass(frozen=True)
class CompactSample:
    targets: np.ndarray
    anchor_index: int | None = None
    anchor_point: np.ndarray | None = None

    def __post_init__(self):
        targets = np.array(self.targets, dtype=float)
        if targets.ndim != 2 or targets.shape[0] == 0:
            raise ValueError("targets must be a nonempty list of vectors")
        targets.flags.writeable = False
        object.__setattr__(self, "targets", targets)
        if (self.anchor_index is None) != (self.anchor_point is None):
            raise ValueError("anchor_index and anchor_point must be given together")
        if self.anchor_index is not None:
            if not 0 <= self.anchor_index < len(targets):
                raise ValueError(f"anchor index {self.anchor_index} out of range")
            point = np.array(self.anchor_point, dtype=float)
            if point.shape != (targets.shape[1],):
                raise ValueError("anchor point has the wrong dimension")
            point.flags.writeable = False
            object.__setattr__(self, "anchor_point", point)

    @property
    def anchored(self) -> bool:
        return self.anchor_index is not None

    def __len__(self):
        return len(self.targets)

    def check_anchor(self, fmap: MapInstance) -> None:
        """Verify the anchor contract ``f(anchor_point) == targets[anchor_index]``."""
        if fmap.dimension != self.targets.shape[1]:
            raise ValueError(f"targets have dimension {self.targets.shape[1]}, map has {fmap.dimension}")
        if not self.anchored:
            return
        y = self.targets[self.anchor_index]
        gap = np.linalg.norm(fmap.evaluate(self.anchor_point) - y)
        if gap > ANCHOR_RTOL * (1.0 + np.linalg.norm(y)):
            raise ValueError(f"anchor point does not map onto target {self.anchor_index} (gap {gap:.3e})")

    @classmethod
    def create(cls, fmap: MapInstance, targets, anchor=None) -> "CompactSample":
        index, point = anchor if anchor is not None else (None, None)
        sample = cls(targets, index, point)
        sample.check_anchor(fmap)
        return sample


def max_residual(fmap: MapInstance, targets: np.ndarray, G: np.ndarray) -> float:
    # per-row evaluation keeps the m=1 case bitwise identical to the pointwise solver
    return max(float(np.linalg.norm(fmap.evaluate(g) - y)) for g, y in zip(G, targets))


@dataclass
class RightInverseState:
    sample: CompactSample
    g_values: np.ndarray
    merit: float

    @classmethod
    def initial(cls, fmap: MapInstance, sample: CompactSample, g_init) -> "RightInverseState":
        G = np.array(g_init, dtype=float)
        if G.shape != sample.targets.shape:
            raise ValueError(f"g_init has shape {G.shape}, expected {sample.targets.shape}")
        if sample.anchored and not np.array_equal(G[sample.anchor_index], sample.anchor_point):
            raise ValueError("g_init disagrees with the anchor point")
        return cls(sample, G, max_residual(fmap, sample.targets, G))

    def recompute_merit(self, fmap: MapInstance) -> float:
        return max_residual(fmap, self.sample.targets, self.g_values)


def _row_norm_max(V) -> float:
    # row-by-row norms match the pointwise solver's vector norms bit for bit
    return max(float(np.linalg.norm(v)) for v in V)


def sup_distance(G1, G2) -> float:
    return _row_norm_max(np.asarray(G1) - np.asarray(G2))


def _directions(fmap, sample, G):
    W = np.empty_like(G)
    for j, (g, y) in enumerate(zip(G, sample.targets)):
        if j == sample.anchor_index:
            W[j] = 0.0
            continue
        try:
            W[j] = newton_direction(fmap, g, y)
        except SingularJacobian as exc:
            raise SingularJacobian(g, j) from exc
    return W


def _pin_anchor(sample, G):
    if sample.anchored:
        G[sample.anchor_index] = sample.anchor_point


def _shared_step(fmap, sample, G, mu, config):
    W = _directions(fmap, sample, G)
    w_max = _row_norm_max(W)
    if w_max == 0.0:
        raise Stalled("every direction vanishes; the anchored target carries the residual")

    def merit(H):
        return max_residual(fmap, sample.targets, H)

    t, mu_new, backtracks = line_search(merit, G, W, mu, config)
    S = t * W
    G_new = G + S
    _pin_anchor(sample, G_new)
    step = _row_norm_max(S)
    return Proposal(G_new, config.decrease_fraction * mu / w_max, t, backtracks, mu_new, step)


def _per_point_steps(fmap, sample, G, mu, config):
    W = _directions(fmap, sample, G)
    if not np.any(W):
        raise Stalled("every direction vanishes; the anchored target carries the residual")
    G_new = G.copy()
    t_min, backtracks = config.t_init, 0
    for j, (g, y, w) in enumerate(zip(G, sample.targets, W)):
        r = float(np.linalg.norm(fmap.evaluate(g) - y))
        if j == sample.anchor_index or r <= config.tol_residual:
            continue
        t, _, b = line_search(lambda x: float(np.linalg.norm(fmap.evaluate(x) - y)), g, w, r, config)
        G_new[j] = g + t * w
        t_min, backtracks = min(t_min, t), max(backtracks, b)
    _pin_anchor(sample, G_new)
    mu_new = max_residual(fmap, sample.targets, G_new)
    if not mu_new <= (1.0 - config.decrease_fraction * t_min) * mu:
        raise Stalled("per-point steps failed the shared decrease test")
    step = sup_distance(G_new, G)
    return Proposal(G_new, config.decrease_fraction * t_min * mu / step, t_min, backtracks, mu_new, step)


def _propose(fmap, sample, config):
    step = _per_point_steps if config.per_point_steps else _shared_step
    return lambda G, mu: step(fmap, sample, G, mu, config)


def functional_step(
    fmap: MapInstance, state: RightInverseState, config: DescentConfig = DescentConfig(), index: int = 0
):
    """One descent step ``g <- g + t w`` on the whole sampled candidate.

    Returns ``(new_state, record)``. Raises SingularJacobian (with the target
    index) or Stalled.
    """
    if not state.merit > 0:
        raise ValueError("functional_step needs a positive merit")
    p = _propose(fmap, state.sample, config)(state.g_values, state.merit)
    record = IterationRecord(index, state.merit, p.t, p.step_norm, p.merit, p.backtracks)
    return RightInverseState(state.sample, p.candidate, p.merit), record


def solve_right_inverse(
    fmap: MapInstance, sample: CompactSample, g_init=None, config: DescentConfig = DescentConfig()
):
    """Descend the max-residual merit until ``f(g(y_j)) = y_j`` on every target.

    ``g_init`` defaults to zeros (with the anchor point pinned). Returns
    ``(state, trace)``; ``trace.status`` reports the outcome.
    """
    sample.check_anchor(fmap)
    if g_init is None:
        g_init = np.zeros_like(sample.targets)
        _pin_anchor(sample, g_init)
    state = RightInverseState.initial(fmap, sample, g_init)

    def merit(G):
        return max_residual(fmap, sample.targets, G)

    G, trace = descent_drive(merit, _propose(fmap, sample, config), state.g_values, config, sup_distance)
    return RightInverseState(sample, G, trace.final_merit), trace


def sample_segment_image(fmap: MapInstance, a, m: int = 50) -> CompactSample:
    """Targets ``f(t_j a)`` on the uniform grid ``t_j = j / (m - 1)``."""
    if m < 2:
        raise ValueError("segment sample needs m >= 2")
    a = fmap._check(a)
    t_grid = np.arange(m) / (m - 1)
    targets = np.array([fmap.evaluate(t * a) for t in t_grid])
    zero = np.zeros(fmap.dimension)
    if np.linalg.norm(fmap.evaluate(zero)) <= 1e-12:
        return CompactSample(targets, 0, zero)
    return CompactSample(targets)


@dataclass
class LiftReport:
    t_grid: list
    lift_errors: list
    t_bar: float
    verdict: Verdict
    lifted: np.ndarray | None = None
    a: np.ndarray | None = None
    failed_at: int | None = None
    status: Status | None = None
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        out = {"t_bar": self.t_bar, "verdict": self.verdict.value}
        if self.a is not None:
            out["a_norm"] = float(np.linalg.norm(self.a))
        if self.lift_errors:
            out["terminal_lift_error"] = self.lift_errors[-1]
        if self.failed_at is not None:
            out["failed_at"] = self.failed_at
            out["status"] = self.status.value
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _t_bar(t_grid, errors, tol_lift):
    t_bar = 0.0
    for t, e in zip(t_grid, errors):
        if e > tol_lift:
            break
        t_bar = t
    return t_bar


def lift_analysis(
    fmap: MapInstance,
    a,
    m: int = 50,
    config: DescentConfig = DescentConfig(),
    tol_lift: float = 1e-6,
) -> LiftReport:
    """Lift the segment ``[0, a]`` through its image by warm-started continuation.

    The lift is a function on the target set: a target that coincides (within
    ``tol_residual``) with an earlier one reuses that target's preimage, so a
    path whose image closes up on itself is sent back to where it started.
    Requires ``f(0) = 0``.
    """
    a = np.array(fmap._check(a), dtype=float)
    if np.linalg.norm(fmap.evaluate(np.zeros_like(a))) > 1e-12:
        raise ValueError("lift_analysis needs f(0) = 0; normalize the map first")
    sample = sample_segment_image(fmap, a, m)
    targets = sample.targets
    t_grid = [j / (m - 1) for j in range(m)]
    lifted = np.zeros_like(targets)
    errors = [0.0]
    for j in range(1, m):
        y = targets[j]
        gaps = np.linalg.norm(targets[:j] - y, axis=1)
        earlier = int(np.argmin(gaps))
        if gaps[earlier] <= config.tol_residual:
            lifted[j] = lifted[earlier]
        else:
            report = solve_pointwise(fmap, y, lifted[j - 1], config)
            if not report.converged:
                return LiftReport(
                    t_grid[:j], errors, _t_bar(t_grid, errors, tol_lift), Verdict.INCONCLUSIVE,
                    lifted[:j], a, failed_at=j, status=report.status,
                )
            lifted[j] = report.solution
        errors.append(float(np.linalg.norm(lifted[j] - t_grid[j] * a)))
    t_bar = _t_bar(t_grid, errors, tol_lift)
    if t_bar == 1.0:
        verdict = Verdict.CONSISTENT
    elif errors[-1] > 100 * tol_lift:
        verdict = Verdict.DISTINCT
    else:
        verdict = Verdict.INCONCLUSIVE
    return LiftReport(t_grid, errors, t_bar, verdict, lifted, a)


def certify_pair(
    fmap: MapInstance,
    a,
    b,
    m: int = 50,
    config: DescentConfig = DescentConfig(),
    tol_lift: float = 1e-6,
) -> LiftReport:
    """Decide whether a preimage collision ``f(a) = f(b)`` forces ``a = b``.

    Works on ``h(x) = f(b - x) - f(b)`` with ``a' = b - a``, so that
    ``h(0) = 0 = h(a')`` up to the collision residual.
    """
    a, b = fmap._check(a), fmap._check(b)
    gap = float(np.linalg.norm(fmap.evaluate(a) - fmap.evaluate(b)))
    if gap > config.tol_residual:
        raise NotACollision(f"f(a) and f(b) differ by {gap:.3e} > {config.tol_residual:g}")
    h = normalized(fmap, b)
    a_prime = b - a
    report = lift_analysis(h, a_prime, m, config, tol_lift)
    if report.verdict is Verdict.CONSISTENT and np.linalg.norm(a_prime) > tol_lift:
        report.verdict = Verdict.INCONCLUSIVE
        report.notes.append("lift reached t=1 but a and b are far apart; check the map hypotheses")
    return report


def adjacent_continuity(state: RightInverseState, bound: float | None = None, tol: float = 1e-10) -> dict:
    """Compare jumps of the sampled inverse between consecutive targets.

    A continuous inverse with Lipschitz constant M satisfies
    ``||g_i - g_{i+1}|| <= M ||y_i - y_{i+1}||``; ``4 * tol`` absorbs the
    residual slack on both ends.
    """
    dg = np.linalg.norm(np.diff(state.g_values, axis=0), axis=1)
    dy = np.linalg.norm(np.diff(state.sample.targets, axis=0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(dy > 0, dg / dy, np.where(dg > 0, np.inf, 0.0))
    out = {"max_adjacent_ratio": None, "worst_pair": None, "lipschitz_bound": bound, "lipschitz_ok": None}
    if len(ratios):
        i = int(np.argmax(ratios))
        out["max_adjacent_ratio"] = float(ratios[i])
        out["worst_pair"] = [i, i + 1]
        if bound is not None:
            out["lipschitz_ok"] = bool(np.all(dg <= bound * dy + 4 * tol))
    return out

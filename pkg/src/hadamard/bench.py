"""Benchmark corpus: registry maps crossed with seeded target grids."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .descent import DescentConfig, SolveReport, check_trace, path_bound, solve_pointwise
from .maps import MapInstance, MapSpec, make_map

BENCH_HEADER = ("map", "n", "target_id", "converged", "iters", "final_mu", "path_len", "bound_2M_mu0", "bound_ok")
TARGETS_PER_CASE = 20


@dataclass(frozen=True)
class BenchCase:
    fmap: MapInstance
    targets: np.ndarray
    x0: np.ndarray

    @property
    def compliant(self) -> bool:
        return self.fmap.known_inverse_bound is not None


@dataclass
class BenchRow:
    case: BenchCase
    target_id: int
    report: SolveReport

    @property
    def bound(self) -> float | None:
        return self.case.fmap.known_inverse_bound

    @property
    def checks(self) -> dict:
        return check_trace(self.report.trace, self.bound)

    @property
    def bound_ok(self) -> bool | None:
        if self.bound is None:
            return None
        return bool(self.report.converged and self.checks["path_bound_ok"])

    def csv_row(self) -> tuple:
        fmap, trace = self.case.fmap, self.report.trace
        bound = "" if self.bound is None else repr(path_bound(self.bound, trace.initial_merit))
        ok = "" if self.bound_ok is None else str(self.bound_ok).lower()
        return (
            fmap.label,
            fmap.dimension,
            self.target_id,
            str(self.report.converged).lower(),
            trace.iterations,
            repr(trace.final_merit),
            repr(trace.cumulative_path_length),
            bound,
            ok,
        )


def _well_conditioned(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.linspace(0.5, 2.0, n)
    return U @ np.diag(s) @ V.T


def _affine_spec(n: int) -> MapSpec:
    A = _well_conditioned(n, 1000 + n)
    return MapSpec("affine", n, {"matrix": A.ravel().tolist(), "offset": np.linspace(-1, 1, n).tolist()})


def _default_specs():
    specs = [_affine_spec(2), _affine_spec(8)]
    specs += [MapSpec("sine_perturbed", n, {"k": k}) for k in (0.25, 0.5) for n in (1, 4, 16)]
    specs += [MapSpec("coupled_sine", 8, {"k": 0.5})]
    specs += [MapSpec("cubic", n) for n in (1, 4)]
    specs += [MapSpec("arctan_drift", n, {"a": 1.0}) for n in (1, 8)]
    return specs


def _uniform_targets(rng, n, lo=-10.0, hi=10.0):
    return rng.uniform(lo, hi, (TARGETS_PER_CASE, n))


def _spiral_targets(rng):
    # images of points far out on the x0 -> -inf sheet, where ||f'(x)^{-1}|| = e^{-x0} blows up
    r = 10.0 ** rng.uniform(-8, -2, TARGETS_PER_CASE)
    phi = rng.uniform(-np.pi, np.pi, TARGETS_PER_CASE)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def corpus(name: str, seed: int = 42) -> list[BenchCase]:
    """Build a named corpus: ``default``, ``exp_spiral``, ``arctan_flat`` or ``all``."""
    if name not in CORPORA:
        raise ValueError(f"unknown corpus {name!r}; choose from {', '.join(CORPORA)}")
    if name == "all":
        return [c for part in ("default", "exp_spiral", "arctan_flat") for c in corpus(part, seed)]
    cases = []
    if name == "default":
        for i, spec in enumerate(_default_specs()):
            rng = np.random.default_rng([seed, i])
            cases.append(BenchCase(make_map(spec), _uniform_targets(rng, spec.dimension), np.zeros(spec.dimension)))
    elif name == "exp_spiral":
        rng = np.random.default_rng([seed, 100])
        cases.append(BenchCase(make_map("exp_spiral"), _spiral_targets(rng), np.zeros(2)))
    elif name == "arctan_flat":
        for i, n in enumerate((1, 4)):
            rng = np.random.default_rng([seed, 200 + i])
            cases.append(BenchCase(make_map("arctan_flat", n), _uniform_targets(rng, n, -3.0, 3.0), np.zeros(n)))
    return cases


CORPORA = ("default", "exp_spiral", "arctan_flat", "all")


def run_bench(name: str = "default", seed: int = 42, config: DescentConfig = DescentConfig(), jobs: int = 1):
    """Solve every (map, target) pair; rows come back in corpus order."""
    tasks = [(case, j) for case in corpus(name, seed) for j in range(len(case.targets))]

    def run(task):
        case, j = task
        return BenchRow(case, j, solve_pointwise(case.fmap, case.targets[j], case.x0, config))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def bench_passed(rows) -> bool:
    """True when every compliant-map run converged within the path-length bound."""
    return all(row.bound_ok for row in rows if row.case.compliant)

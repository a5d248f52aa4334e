"""Pipeline orchestration: generate -> flow -> evaluate -> report.

A pipeline executes one ExperimentConfig: builds the initial data, runs the
flow, writes snapshots / series / config echo into the output directory, and
evaluates the named invariant checks.  Check failures are results, not
exceptions; infrastructure failures raise.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigurationError
from .fields import flat_metric
from .flow import integrate
from .generators import generate_metric, provenance
from .gfbio import write_gfb, write_provenance, write_series_csv
from .weakbound import tol_wb, weak_lower_bound


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class PipelineResult:
    config: ExperimentConfig
    trajectory: object
    out_dir: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def _eval_points(cfg: ExperimentConfig, grid):
    """Evaluator points: either explicit grid indices or a seeded count."""
    pts = cfg.evaluator_params()["points"]
    if isinstance(pts, int):
        rng = np.random.default_rng(cfg.generator.get("seed", 0))
        idxs = [tuple(rng.integers(0, grid.points_per_axis, grid.dim)) for _ in range(pts)]
    else:
        idxs = [tuple(int(v) for v in p) for p in pts]
    return [(i, np.array(i) * grid.h) for i in idxs]


def check_preservation(res: PipelineResult):
    """Min scalar curvature stays above the comparison curve
    kappa0 / (1 - (2 kappa0 / n) t) minus the hybrid tolerance, within the
    curve's validity window."""
    traj = res.trajectory
    n = res.config.grid_spec().dim
    t0, kappa0 = traj.min_scalar_series[0]
    tol = tol_wb(kappa0)
    t_valid = min(res.config.stepper_config().T, n / (4.0 * abs(kappa0))) if kappa0 else None
    worst = 0.0
    for t, mn in traj.min_scalar_series:
        if t <= t0 or (t_valid is not None and t > t_valid * (1 + 1e-12)):
            continue
        denom = 1.0 - (2.0 * kappa0 / n) * t
        if denom <= 0:
            continue
        curve = kappa0 / denom
        worst = max(worst, curve - tol - mn)
    ok = worst <= 0.0
    return CheckResult(
        "preservation",
        ok,
        f"kappa0={kappa0:.4f}, worst violation {worst:.2e}",
    )


def check_universal_bound(res: PipelineResult):
    """min R(g_t) >= -n/(2t) - tol at every recorded time t >= 1e-4."""
    n = res.config.grid_spec().dim
    worst = 0.0
    for t, mn in res.trajectory.min_scalar_series:
        if t < 1e-4:
            continue
        bound = -n / (2.0 * t)
        worst = max(worst, bound - tol_wb(bound) - mn)
    return CheckResult("universal-bound", worst <= 0.0, f"worst violation {worst:.2e}")


def check_weak_bound(res: PipelineResult):
    """Weak lower-bound estimate >= kappa - tol at every evaluator point."""
    cfg = res.config
    ev = cfg.evaluator_params()
    kappa = ev["kappa"]
    if kappa is None:
        return CheckResult("weak-bound", False, "evaluator.kappa not set")
    grid = cfg.grid_spec()
    failures = []
    estimates = []
    for idx, y in _eval_points(cfg, grid):
        est = weak_lower_bound(
            res.trajectory,
            y,
            beta=ev["beta"],
            C_grid=tuple(ev["C_grid"]),
            t_grid=ev["t_grid"],
            kappa=kappa,
        )
        estimates.append(est.estimate)
        if not est.kappa_test["passed"]:
            failures.append((idx, est.estimate))
    detail = (
        f"kappa={kappa:g}, estimates in [{min(estimates):.4f}, {max(estimates):.4f}]"
        + (f", failing points {failures}" if failures else "")
    )
    return CheckResult("weak-bound", not failures, detail)


CHECKS = {
    "preservation": check_preservation,
    "universal-bound": check_universal_bound,
    "weak-bound": check_weak_bound,
}


def run_pipeline(config: ExperimentConfig, out_dir=None, verbose=False) -> PipelineResult:
    for name in config.checks:
        if name not in CHECKS:
            raise ConfigurationError(f"unknown check {name!r}")
    grid = config.grid_spec()
    gspec = config.generator_spec()
    g0 = generate_metric(gspec, grid)
    bg0 = flat_metric(grid)
    out = os.path.join(out_dir or config.outputs, config.name)
    os.makedirs(out, exist_ok=True)
    write_gfb(os.path.join(out, "initial.gfb"), g0)
    write_provenance(
        os.path.join(out, "initial.provenance.json"), provenance(gspec, grid, g0)
    )
    config.to_json(os.path.join(out, "config.json"))
    traj = integrate(g0, bg0, config.stepper_config(), solver=config.solver)
    write_series_csv(os.path.join(out, "series.csv"), traj)
    for st in traj.states:
        write_gfb(os.path.join(out, f"snapshot_{st.t:.6f}.gfb"), st.g)
    res = PipelineResult(config=config, trajectory=traj, out_dir=out)
    for name in config.checks:
        c = CHECKS[name](res)
        res.checks.append(c)
        if verbose:
            print(f"  check {c.name}: {'PASS' if c.passed else 'FAIL'} ({c.detail})")
    return res

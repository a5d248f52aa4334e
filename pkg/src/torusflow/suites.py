"""Acceptance suites: one callable per shipped experiment battery.

Each suite returns {"name", "passed", "detail"} and prints nothing; the
CLI and the test harness own the reporting.  Flow runs are memoized in a
module-level cache so suites sharing a trajectory pay for it once.
"""

import time

import numpy as np

from .diffeo import choose_anchor, integrate_chi, tracer_diameter
from .duhamel import HeatKernelSpec, duhamel_iterate
from .fields import TensorField, flat_metric
from .flow import StepperConfig, integrate
from .generators import (
    GeneratorSpec,
    bilipschitz_pullback_metric,
    conformal_metric,
    conformal_scalar_oracle,
    generate,
    lipschitz_kink_metric,
    random_smooth_metric,
    second_order_pair,
)
from .geometry import scalar_curvature
from .grid import GridSpec
from .stats import fit_loglog
from .weakbound import tol_wb, weak_lower_bound

_CACHE = {}


def _memo(key, builder):
    if key not in _CACHE:
        _CACHE[key] = builder()
    return _CACHE[key]


def clear_cache():
    _CACHE.clear()


def _dyadic(hi, k):
    return tuple(sorted(hi / 2 ** i for i in range(k)))


def _dense_dyadic(lo, hi, per_decade=16):
    """>= per_decade samples in every dyadic decade of [lo, hi]."""
    ndec = int(np.ceil(np.log2(hi / lo)))
    pieces = [hi / 2 ** np.linspace(k + 1, k, per_decade + 1)[:-1] for k in range(ndec)]
    return tuple(np.round(np.unique(np.concatenate(pieces + [[hi]])), 12))


def _run(key, g0_builder, stepper, dim=2, N=64):
    def build():
        grid = GridSpec(dim, N)
        g0 = g0_builder(grid)
        return integrate(g0, flat_metric(grid), stepper, solver="rdt")

    return _memo(key, build)


def _kink_run(N=64):
    ts = _dyadic(0.1, 10)
    cfg = StepperConfig(
        scheme="explicit-rk2", cfl_safety=0.25, T=0.1, snapshot_times=ts,
        series_stride=25, track_derivatives=True,
    )
    return _run(f"kink-n2-N{N}", lambda g: lipschitz_kink_metric(g, 0.09), cfg, N=N)


def _conformal_run():
    ts = _dyadic(0.1, 10)
    cfg = StepperConfig(
        scheme="explicit-rk2", cfl_safety=0.25, T=0.1, snapshot_times=ts,
        series_stride=50, track_derivatives=False,
    )
    return _run("conformal-n2", lambda g: conformal_metric(g, 0.015), cfg)


def _flat_run():
    ts = _dyadic(0.1, 10)
    cfg = StepperConfig(
        scheme="explicit-rk2", cfl_safety=0.25, T=0.1, snapshot_times=ts,
        series_stride=50, track_derivatives=False,
    )
    return _run("flat-n2", lambda g: flat_metric(g), cfg)


def _bilip_run():
    ts = _dense_dyadic(1e-3, 0.05) + (0.1, 0.15, 0.2, 0.25)
    cfg = StepperConfig(
        scheme="explicit-rk2", cfl_safety=0.25, T=0.25, snapshot_times=ts,
        series_stride=100, track_derivatives=False,
    )
    return _run("bilip-n2", lambda g: bilipschitz_pullback_metric(g, 0.04), cfg)


def _random_run(dim, seed):
    if dim == 2:
        cfg = StepperConfig(
            scheme="explicit-rk2", cfl_safety=0.25, T=0.25,
            snapshot_times=(0.05, 0.1, 0.15, 0.2, 0.25),
            series_stride=20, track_derivatives=False,
        )
    else:
        cfg = StepperConfig(
            scheme="explicit-euler", cfl_safety=0.5, T=0.25,
            snapshot_times=(0.05, 0.1, 0.15, 0.2, 0.25),
            series_stride=50, track_derivatives=False,
        )
    return _run(
        f"random-n{dim}-s{seed}",
        lambda g: random_smooth_metric(g, 0.08, seed),
        cfg,
        dim=dim,
    )


def _result(name, passed, detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def _preservation_violation(traj, dim, T):
    """Worst gap below the comparison curve kappa0/(1 - (2 kappa0/n) t)
    minus the hybrid tolerance, inside the curve's validity window."""
    t0, kappa0 = traj.min_scalar_series[0]
    tol = tol_wb(kappa0)
    t_valid = min(T, dim / (4.0 * abs(kappa0))) if kappa0 != 0.0 else T
    worst = 0.0
    for t, mn in traj.min_scalar_series:
        if t <= t0 or t > t_valid * (1 + 1e-12):
            continue
        curve = kappa0 / (1.0 - (2.0 * kappa0 / dim) * t)
        worst = max(worst, curve - tol - mn)
    return kappa0, worst


# --- 1: curvature oracle ------------------------------------------------------

def criterion_1():
    start = time.time()
    errs = {}
    for N in (64, 128):
        grid = GridSpec(2, N)
        R = scalar_curvature(conformal_metric(grid, 0.1))
        Ro = conformal_scalar_oracle(grid, 0.1)
        errs[N] = float(np.max(np.abs(R - Ro)) / np.max(np.abs(Ro)))
    order = float(np.log2(errs[64] / errs[128]))
    elapsed = time.time() - start
    ok = errs[128] <= 1e-3 and order >= 3.5 and elapsed <= 10.0
    return _result(
        "curvature-oracle", ok,
        f"rel err N=128 {errs[128]:.2e} (<=1e-3), order {order:.2f} (>=3.5), "
        f"{elapsed:.1f}s (<=10s)",
    )


# --- 2: preservation under the flow -------------------------------------------

def criterion_2():
    start = time.time()
    worst_overall = -np.inf
    details = []
    for dim in (2, 3):
        for seed in range(5):
            traj = _random_run(dim, seed)
            kappa0, worst = _preservation_violation(traj, dim, 0.25)
            worst_overall = max(worst_overall, worst)
            details.append(f"n={dim} s={seed} k0={kappa0:.3f} viol={worst:.1e}")
    elapsed = time.time() - start
    ok = worst_overall <= 0.0 and elapsed <= 300.0
    return _result(
        "preservation", ok,
        f"worst violation {worst_overall:.2e} over 10 runs, {elapsed:.0f}s (<=300s)",
    )


# --- 3: universal lower bound -------------------------------------------------

def criterion_3():
    runs = [
        ("kink", _kink_run(), 2),
        ("bilip", _bilip_run(), 2),
        ("conformal", _conformal_run(), 2),
        ("flat", _flat_run(), 2),
        ("random", _random_run(2, 0), 2),
    ]
    worst = -np.inf
    for label, traj, dim in runs:
        for t, mn in traj.min_scalar_series:
            if t < 1e-4:
                continue
            bound = -dim / (2.0 * t)
            worst = max(worst, bound - tol_wb(bound) - mn)
    return _result(
        "universal-bound", worst <= 0.0,
        f"worst violation {worst:.2e} across {len(runs)} shipped runs",
    )


# --- 4: solver cross-validation -----------------------------------------------

def criterion_4():
    # part A: rdt vs perturbation refinement ladder, smooth data
    ratios, gaps, xs = [], [], []
    for N in (16, 24, 32):
        grid = GridSpec(2, N)
        g0 = random_smooth_metric(grid, 0.05, 1)
        bg = flat_metric(grid)
        cfg = StepperConfig(
            scheme="explicit-rk2", cfl_safety=0.25, T=0.01,
            snapshot_times=(0.01,), series_stride=1000, track_derivatives=False,
        )
        ta = integrate(g0, bg, cfg, solver="rdt")
        tb = integrate(g0, bg, cfg, solver="perturbation")
        gap = float(np.max(np.abs(ta.state_at(0.01).g.data - tb.state_at(0.01).g.data)))
        dt = float(np.median([d for d in ta.dt_history if d > 0]))
        x = dt + grid.h ** 4
        gaps.append(gap)
        xs.append(x)
        ratios.append(gap / x)
    C_fit = float(np.sum(np.array(gaps) * np.array(xs)) / np.sum(np.array(xs) ** 2))
    spread = max(ratios) / min(ratios)
    ladder_ok = spread <= 4.0 and all(g <= 2.0 * C_fit * x for g, x in zip(gaps, xs))

    # part B: Duhamel vs perturbation stepper, amplitude-0.05 kink data
    grid = GridSpec(2, 64)
    g0 = lipschitz_kink_metric(grid, 0.05)
    bg = flat_metric(grid)
    h0 = TensorField(grid, (2, 0), g0.data - bg.data)
    spec = HeatKernelSpec(grid)
    times = (0.005, 0.01, 0.02)
    sol = duhamel_iterate(h0, times, spec)
    sol_fine = duhamel_iterate(h0, times, spec, nodes=96)

    def stepper_h(cfl, N_run=64):
        gr = GridSpec(2, N_run)
        gg = lipschitz_kink_metric(gr, 0.05)
        cfg = StepperConfig(
            scheme="explicit-rk2", cfl_safety=cfl, T=0.02, snapshot_times=times,
            series_stride=1000, track_derivatives=False,
        )
        return integrate(gg, flat_metric(gr), cfg, solver="perturbation")

    tstep = stepper_h(0.25)
    tstep_dt = stepper_h(0.125)
    tstep_hx = stepper_h(0.25, N_run=128)
    duh_ok = True
    worst_margin = 0.0
    for i, t in enumerate(times):
        gap = float(np.max(np.abs(sol.h_series[i].data - tstep.state_at(t).h.data)))
        quad = float(np.max(np.abs(sol.h_series[i].data - sol_fine.h_series[i].data)))
        step = float(np.max(np.abs(tstep.state_at(t).h.data - tstep_dt.state_at(t).h.data)))
        coarse = tstep.state_at(t).h.data
        fine = tstep_hx.state_at(t).h.data[::2, ::2]
        spat = float(np.max(np.abs(coarse - fine)))
        budget = 2.0 * (quad + step + spat)
        duh_ok &= gap <= budget
        worst_margin = max(worst_margin, gap / budget if budget > 0 else np.inf)
    ok = ladder_ok and duh_ok
    return _result(
        "solver-cross-validation", ok,
        f"ladder C={C_fit:.3g} ratio spread {spread:.2f} (<=4); "
        f"duhamel gap/budget worst {worst_margin:.2f} (<=1)",
    )


# --- 5: smoothing estimates ---------------------------------------------------

def _smoothing_constants(traj):
    c1 = c2 = 0.0
    for t, gn, hn in traj.deriv_norm_series:
        if not 1e-4 <= t <= 0.1:
            continue
        c1 = max(c1, np.sqrt(t) * gn)
        c2 = max(c2, t * hn)
    return c1, c2


def criterion_5():
    c1a, c2a = _smoothing_constants(_kink_run(64))
    c1b, c2b = _smoothing_constants(_kink_run(96))
    r1 = abs(c1a - c1b) / max(c1a, c1b)
    r2 = abs(c2a - c2b) / max(c2a, c2b)
    ok = c1a > 0 and c2a > 0 and r1 <= 0.15 and r2 <= 0.15
    return _result(
        "smoothing-estimates", ok,
        f"sqrt(t)|grad h|: {c1a:.4f} vs {c1b:.4f} ({100 * r1:.1f}%); "
        f"t|grad2 h|: {c2a:.4f} vs {c2b:.4f} ({100 * r2:.1f}%)",
    )


# --- 6: classical agreement of the weak bound ---------------------------------

def criterion_6():
    traj = _conformal_run()
    grid = GridSpec(2, 64)
    Ro = conformal_scalar_oracle(grid, 0.015)
    tg = tuple(sorted((s.t for s in traj.states if s.t > 0), reverse=True))
    rng = np.random.default_rng(1)
    worst = 0.0
    cache = {}
    for _ in range(10):
        idx = tuple(rng.integers(0, 64, 2))
        est = weak_lower_bound(traj, np.array(idx) * grid.h, t_grid=tg, _cache=cache)
        r = float(Ro[idx])
        worst = max(worst, abs(est.estimate - r) / (0.05 * (1.0 + abs(r))))
    return _result(
        "classical-agreement", worst <= 1.0,
        f"worst |estimate - R|/tol = {worst:.2f} over 10 points (<=1)",
    )


# --- 7: second-order pair scalar decay ----------------------------------------

def _pair_runs():
    def build():
        grid = GridSpec(2, 64)
        pair = second_order_pair(grid, 1.0, 0.5)
        cfg = StepperConfig(
            scheme="explicit-rk2", cfl_safety=0.25, T=0.05,
            snapshot_times=_dyadic(0.05, 8), series_stride=100,
            track_derivatives=False, eps_run=0.3,
        )
        bg = flat_metric(grid)
        return (
            pair,
            integrate(pair.first, bg, cfg, solver="rdt"),
            integrate(pair.second, bg, cfg, solver="rdt"),
        )

    return _memo("pair-runs", build)


def _control_runs():
    def build():
        grid = GridSpec(2, 64)
        cfg = StepperConfig(
            scheme="explicit-rk2", cfl_safety=0.25, T=0.05,
            snapshot_times=_dyadic(0.05, 8), series_stride=100,
            track_derivatives=False, eps_run=0.2,
        )
        bg = flat_metric(grid)
        return (
            integrate(conformal_metric(grid, 0.02), bg, cfg, solver="rdt"),
            integrate(conformal_metric(grid, 0.035), bg, cfg, solver="rdt"),
        )

    return _memo("control-runs", build)


def _ball_sup_gap(ta, tb, center, beta=0.4, C=1.0):
    grid = ta.states[0].g.grid
    d = grid.distance_flat(grid.coords(), center)
    ts, gaps = [], []
    for sa in ta.states:
        if sa.t <= 0:
            continue
        sb = tb.state_at(sa.t)
        mask = d <= C * sa.t ** beta
        if not np.any(mask):
            mask = d <= float(d.min()) + 1e-12
        gap = float(np.max(np.abs(sa.report.scalar - sb.report.scalar)[mask]))
        ts.append(sa.t)
        gaps.append(max(gap, 1e-300))
    return ts, gaps


def criterion_7():
    pair, ta, tb = _pair_runs()
    ts, gaps = _ball_sup_gap(ta, tb, pair.center)
    slope, lcb, _, _ = fit_loglog(ts, gaps)
    ca, cb = _control_runs()
    grid = ca.states[0].g.grid
    # center the control where the scalar gap actually lives: at the argmax
    # of the earliest positive-time gap field (the pair experiment is
    # likewise centered on its construction point)
    s0 = next(s for s in ca.states if s.t > 0)
    gap0 = np.abs(s0.report.scalar - cb.state_at(s0.t).report.scalar)
    center = np.array(np.unravel_index(int(np.argmax(gap0)), grid.shape)) * grid.h
    tsc, gapsc = _ball_sup_gap(ca, cb, center)
    slope_c, _, _, _ = fit_loglog(tsc, gapsc)
    ok = lcb > 0.0 and slope_c <= 0.0
    return _result(
        "scalar-decay", ok,
        f"pair slope {slope:.3f} (95% LCB {lcb:.3f} > 0); "
        f"control slope {slope_c:.3f} (<= 0)",
    )


# --- 8: torus rigidity of bi-Lipschitz-pulled-back flat -----------------------

def criterion_8():
    traj = _bilip_run()
    grid = traj.states[0].g.grid
    flat = flat_metric(grid)
    st = traj.state_at(0.05)
    max_r = float(np.max(np.abs(st.report.scalar)))
    late = [s for s in traj.states if s.t >= 0.05 - 1e-12]
    gaps = [float(np.max(np.abs(s.g.data - flat.data))) for s in late]
    decreasing = all(b <= a * (1 + 1e-9) for a, b in zip(gaps, gaps[1:]))

    anchor = choose_anchor(traj)
    samples = tuple(t for t in traj.times if 0 < t <= 0.05)
    track = _memo(
        "bilip-track", lambda: integrate_chi(traj, anchor, samples)
    )
    rng = np.random.default_rng(2)
    const = 0.0
    for _ in range(8):
        idx = tuple(rng.integers(0, grid.points_per_axis, 2))
        for t in (0.00625, 0.0125, 0.025, 0.05):
            const = max(const, tracer_diameter(track, idx, t) / np.sqrt(t))
    ok = max_r <= 0.05 and decreasing and np.isfinite(const)
    return _result(
        "torus-rigidity", ok,
        f"max|R|(t=0.05)={max_r:.2e} (<=0.05); |g_t - flat| "
        f"{gaps[0]:.4f}->{gaps[-1]:.4f} decreasing={decreasing}; "
        f"diam/sqrt(t) constant {const:.3f} (anchor t0={anchor:g})",
    )


# --- 9: continuity of bounds under mollification ------------------------------

def _mollified_experiment():
    def build():
        grid = GridSpec(2, 64)
        # amplitude kept small: the discrete min-R overshoot at times below
        # the grid resolution scale is proportional to |kappa|, while the
        # hybrid tolerance has a fixed absolute floor, so small amplitudes
        # keep the conservative liminf proxy inside tolerance
        spec = GeneratorSpec(
            family="mollified-sequence", amplitude=-0.05,
            mollify_scales=(0.4, 0.2, 0.1, 0.05),
        )
        seq = generate(spec, grid)
        cfg = StepperConfig(
            scheme="explicit-rk2", cfl_safety=0.25, T=0.1,
            snapshot_times=_dyadic(0.1, 10), series_stride=50,
            track_derivatives=False,
        )
        bg = flat_metric(grid)
        flows = [integrate(el, bg, cfg, solver="rdt") for el in seq.elements]
        base_flow = integrate(seq.base, bg, cfg, solver="rdt")
        return seq, flows, base_flow

    return _memo("mollified-exp", build)


def criterion_9():
    seq, flows, base_flow = _mollified_experiment()
    cauchy = abs(seq.kappas[-1] - seq.kappas[-2])
    worst = -np.inf
    for traj in flows:
        _, v = _preservation_violation(traj, 2, 0.1)
        worst = max(worst, v)
    kappa_lim = seq.kappas[-1]
    grid = GridSpec(2, 64)
    tg = tuple(sorted((s.t for s in base_flow.states if s.t > 0), reverse=True))
    pts = [(0, 0), (0, 32), (16, 16), (32, 8), (48, 48)]
    min_est = np.inf
    for idx in pts:
        est = weak_lower_bound(base_flow, np.array(idx) * grid.h, t_grid=tg)
        min_est = min(min_est, est.estimate)
    ok = (
        cauchy <= 0.05
        and worst <= 0.0
        and min_est >= kappa_lim - tol_wb(kappa_lim)
    )
    return _result(
        "bound-continuity", ok,
        f"kappa_i={['%.3f' % k for k in seq.kappas]} (Cauchy {cauchy:.3f}<=0.05); "
        f"per-element preservation worst {worst:.1e}; limit estimate "
        f"{min_est:.3f} >= {kappa_lim:.3f} - {tol_wb(kappa_lim):.3f}",
    )


# --- 10: beta robustness ------------------------------------------------------

def criterion_10():
    grid = GridSpec(2, 64)
    Ro = conformal_scalar_oracle(grid, 0.015)
    seq, _, base_flow = _mollified_experiment()
    experiments = [
        ("flat-k0", _flat_run(), 0.0),
        ("flat-k1", _flat_run(), 1.0),
        ("conformal", _conformal_run(), float(np.min(Ro))),
        ("mollified-base", base_flow, seq.kappas[-1]),
    ]
    rng_pts = [(0, 0), (16, 48), (32, 32), (8, 24), (56, 4)]
    verdicts = {}
    for beta in (0.3, 0.4, 0.45):
        vec = []
        for label, traj, kappa in experiments:
            tg = tuple(sorted((s.t for s in traj.states if s.t > 0), reverse=True))
            cache = {}
            ok = True
            for idx in rng_pts:
                est = weak_lower_bound(
                    traj, np.array(idx) * grid.h, beta=beta, t_grid=tg,
                    kappa=kappa, _cache=cache,
                )
                ok &= est.kappa_test["passed"]
            vec.append((label, ok))
        verdicts[beta] = tuple(vec)
    vals = list(verdicts.values())
    ok = all(v == vals[0] for v in vals)
    return _result(
        "beta-robustness", ok,
        f"verdicts {dict((b, [int(p) for _, p in v]) for b, v in verdicts.items())} "
        "identical across beta" if ok else f"verdicts differ: {verdicts}",
    )


SUITES = {
    "curvature-oracle": criterion_1,
    "preservation": criterion_2,
    "universal-bound": criterion_3,
    "solver-cross-validation": criterion_4,
    "smoothing-estimates": criterion_5,
    "classical-agreement": criterion_6,
    "scalar-decay": criterion_7,
    "torus-rigidity": criterion_8,
    "bound-continuity": criterion_9,
    "beta-robustness": criterion_10,
}
for _i, _fn in enumerate(
    (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
     criterion_6, criterion_7, criterion_8, criterion_9, criterion_10),
    start=1,
):
    SUITES[f"criterion-{_i}"] = _fn

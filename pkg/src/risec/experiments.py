"""Monte Carlo experiments over paired channel draws.

Every trial owns its random streams, keyed by (seed, trial, purpose, sizes),
so results do not depend on execution order or worker count. At a sweep
point all compared algorithms see the same ChannelSet.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dfrc, rcce, robust
from .channels import (
    Geometry,
    PathLossModel,
    SteeringParams,
    UncertaintyModel,
    LINKS,
    cascaded_channel,
    db_to_lin,
    dbm_to_watt,
    sample_channels,
)
from .config import ScenarioConfig
from .manifold import RcgOptions
from .metrics import NoisePowers, dfrc_radar_snr, dfrc_rates, rcce_radar_sinr, rcce_rates
from .results import NAN, ExperimentResult, sort_results

log = logging.getLogger(__name__)

EXPERIMENTS = ("convergence", "power", "gamma", "ris-elements", "robust-eps", "robust-power", "robust-M")
SYSTEMS = ("rcce", "dfrc-dinkelbach", "dfrc-rcg", "robust")
WORKERS_ENV = "RISEC_WORKERS"

_NOMINAL = ("rcce", "dfrc-dinkelbach", "dfrc-rcg")
_ROBUST_EXPERIMENTS = ("robust-eps", "robust-power", "robust-M")

# stream purposes
_CHANNEL, _RANDOM_Q, _ALGO, _ROBUST_CHANNEL = 0, 1, 2, 3


class ExperimentError(ValueError):
    """Unknown experiment or a system that the experiment does not compare."""


@dataclass
class Outcome:
    C_s: float
    C_B: float = NAN
    C_E: float = NAN
    gamma_A: float = NAN
    iterations: int = 0
    wall_ms: float = NAN
    feasible: bool = False
    history: list = field(default_factory=list)  # (C_s, C_B, C_E, gamma_A) per outer pass
    error: str = ""


def _failed(exc) -> Outcome:
    return Outcome(C_s=NAN, error=f"{type(exc).__name__}: {exc}")


def _infeasible(iterations, wall_ms) -> Outcome:
    # zero secrecy is the reported value when the radar constraint cannot be met
    return Outcome(C_s=0.0, iterations=iterations, wall_ms=wall_ms,
                   history=[(0.0, NAN, NAN, NAN)])


def rng_for(seed: int, trial: int, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial), *map(int, keys)]))


def algo_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(trial), _ALGO]).generate_state(1)[0])


def random_phases(seed: int, trial: int, M: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng_for(seed, trial, _RANDOM_Q, M).uniform(size=M))


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def scenario_noise(cfg: ScenarioConfig) -> NoisePowers:
    return NoisePowers(*(float(x) for x in dbm_to_watt(cfg.scenario.noise_dbm)))


def scenario_channel(cfg: ScenarioConfig, trial: int, N=None, M=None, alpha_AE=None):
    """Default-scenario channel for a trial; the draw depends only on (seed, trial, N, M, alpha_AE)."""
    s = cfg.scenario
    N = s.N if N is None else N
    M = s.M if M is None else M
    g = s.geometry
    geom = Geometry(tuple(g.alice), tuple(g.ris), tuple(g.bob), tuple(g.eve))
    exps = {k: getattr(s.path_loss_exponents, k) for k in LINKS}
    if alpha_AE is not None:
        exps["AE"] = alpha_AE
    model = PathLossModel(s.beta0_sq_db, s.d0, exps)
    steer = SteeringParams(np.deg2rad(s.theta_bar_deg), N)
    return sample_channels(geom, model, steer, rng_for(cfg.seed, trial, _CHANNEL, N, M), n_ris=M)


@dataclass
class RobustSetup:
    ch: object
    unc: UncertaintyModel
    noise: NoisePowers
    P: float
    gamma_p: float


def robust_setup(cfg: ScenarioConfig, trial: int, M=None, eps_bar=None, phi_deg=None, P_dbm=None):
    """Nominal channel with unit path gains and the bounded-error model around it."""
    s, r = cfg.scenario, cfg.robust
    N = s.N
    M = s.M if M is None else M
    eps_bar = r.eps_bar_G if eps_bar is None else eps_bar
    phi_deg = s.phi_deg if phi_deg is None else phi_deg
    P = float(dbm_to_watt(r.P_dbm if P_dbm is None else P_dbm))
    steer = SteeringParams(np.deg2rad(s.theta_bar_deg), N)
    gains = {k: 1.0 for k in LINKS} if r.unit_path_loss else None
    g = s.geometry
    geom = Geometry(tuple(g.alice), tuple(g.ris), tuple(g.bob), tuple(g.eve))
    model = PathLossModel(s.beta0_sq_db, s.d0, {k: getattr(s.path_loss_exponents, k) for k in LINKS})
    ch = sample_channels(geom, model, steer, rng_for(cfg.seed, trial, _ROBUST_CHANNEL, N, M),
                         n_ris=M, gains=gains)
    G = cascaded_channel(ch.h_IE, ch.H_AI)
    beta_AE = float(np.linalg.norm(ch.h_AE) / np.sqrt(N))
    unc = UncertaintyModel(eps_G=eps_bar * float(np.linalg.norm(G)), phi=np.deg2rad(phi_deg),
                           theta_bar=np.deg2rad(s.theta_bar_deg), n_antennas=N, beta_AE=beta_AE)
    sig = float(dbm_to_watt(r.noise_dbm))
    noise = NoisePowers(sig, sig, sig)
    return RobustSetup(ch, unc, noise, P, float(db_to_lin(r.gamma_p_db)) * sig)


# ---------------------------------------------------------------------------
# single-algorithm runners
# ---------------------------------------------------------------------------

def run_rcce(ch, noise, P, gamma, cfg: ScenarioConfig, seed: int, q0=None) -> Outcome:
    opts = rcce.RcceOptions(tol=cfg.tolerances.eps_b, max_outer=cfg.max_outer,
                            n_samples=cfg.n_samples, seed=seed,
                            optimize_q=q0 is None and ch.M > 0 and bool(np.any(ch.H_AI)), q0=q0)
    design, tr = rcce.run_rcce_bcd(ch, noise, P, gamma, opts)
    if not tr.feasible:
        return _infeasible(tr.iterations, tr.wall_ms)
    C_B, C_E, C_s = rcce_rates(design, ch, noise, P)
    hist = [(c, *p) for c, p in zip(tr.cs, tr.points)]
    return Outcome(C_s, C_B, C_E, rcce_radar_sinr(design, ch, noise, P), tr.iterations,
                   tr.wall_ms, True, hist)


def _dfrc_outcome(design, tr, ch, noise, P, gamma_A):
    if not tr.feasible:
        return _infeasible(tr.iterations, tr.wall_ms)
    C_B, C_E, C_s = dfrc_rates(design, ch, noise, P)
    hist = [(c, *p) for c, p in zip(tr.cs, tr.points)]
    return Outcome(C_s, C_B, C_E, gamma_A, tr.iterations, tr.wall_ms, True, hist)


def run_dinkelbach(ch, noise, P, gamma, cfg: ScenarioConfig, seed: int, q0=None,
                   radar="snr", tol=None) -> Outcome:
    opts = dfrc.DfrcOptions(max_outer=cfg.max_outer, tol=cfg.tolerances.eps_b if tol is None else tol,
                            n_samples=cfg.n_samples, seed=seed, radar=radar,
                            optimize_q=q0 is None and bool(np.any(ch.H_AI)), q0=q0)
    design, tr = dfrc.run_dfrc_dinkelbach(ch, noise, P, gamma, opts)
    if radar == "snr":
        gA = dfrc_radar_snr(design, ch, noise, P)
    else:
        gA = P * abs(ch.h_E(design.q) @ design.w) ** 2 / noise.sigma_E_sq
        tr.points = [(b, e, g / noise.sigma_E_sq) for b, e, g in tr.points]
    return _dfrc_outcome(design, tr, ch, noise, P, gA)


def run_rcg(ch, noise, P, gamma, cfg: ScenarioConfig, q0=None) -> Outcome:
    t = cfg.tolerances
    pp = dfrc.PenaltyParams(zeta=t.zeta, eps1=t.eps1, gamma=gamma)
    opts = dfrc.DfrcOptions(max_outer=cfg.max_outer, tol=t.eps3, rcg=RcgOptions(grad_tol=t.eps2),
                            optimize_q=q0 is None and bool(np.any(ch.H_AI)), q0=q0)
    design, tr = dfrc.run_dfrc_rcg(ch, noise, P, gamma, pp, opts)
    return _dfrc_outcome(design, tr, ch, noise, P, dfrc_radar_snr(design, ch, noise, P))


def run_robust(rs: RobustSetup, cfg: ScenarioConfig, seed: int, q0=None):
    """Returns (Outcome, design or None, problem)."""
    opts = robust.RobustOptions(max_outer=cfg.max_outer, tol=cfg.tolerances.eps_robust,
                                n_samples=cfg.n_samples, seed=seed,
                                optimize_q=q0 is None, q0=q0)
    design, tr = robust.run_robust_bcd(rs.ch, rs.unc, rs.noise, rs.P, rs.gamma_p, opts)
    pr = robust.make_problem(rs.ch, rs.unc, rs.noise, rs.P, rs.gamma_p)
    if not tr.feasible:
        return _infeasible(tr.iterations, tr.wall_ms), None, pr
    m = robust.robust_metrics(design.w, design.q, pr)
    s2 = rs.noise.sigma_E_sq
    hist = [(c, b, e, g / s2) for c, (b, e, g) in zip(tr.cs, tr.points)]
    out = Outcome(m["C_s"], m["C_B"], m["C_E"], m["illumination"] / s2, tr.iterations,
                  tr.wall_ms, True, hist)
    return out, design, pr


def quantized_outcome(base: Outcome, design, pr, bits: int, sigma_E_sq: float) -> Outcome:
    if design is None:
        return _infeasible(base.iterations, base.wall_ms)
    t0 = time.perf_counter()
    m, _, _ = robust.quantized_metrics(design.w, design.q, pr, robust.QuantizationSpec(bits))
    wall = base.wall_ms + 1e3 * (time.perf_counter() - t0)
    if not m["feasible"]:
        return _infeasible(base.iterations, wall)
    return Outcome(m["C_s"], m["C_B"], m["C_E"], m["illumination"] / sigma_E_sq,
                   base.iterations, wall, True)


def _guard(fn, *args, **kw) -> Outcome:
    try:
        return fn(*args, **kw)
    except Exception as exc:  # one failed trial must not end the run
        log.warning("trial failed: %s", exc)
        return _failed(exc)


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def _row(exp, alg, param, trial, o: Outcome) -> ExperimentResult:
    return ExperimentResult(exp, alg, float(param), int(trial), o.C_s, o.C_B, o.C_E, o.gamma_A,
                            int(o.iterations), o.wall_ms, bool(o.feasible), o.error)


def _nominal_runs(systems, ch, noise, P, gamma, cfg, seed, q0=None, suffix=""):
    out = {}
    if "rcce" in systems:
        out["rcce" + suffix] = _guard(run_rcce, ch, noise, P, gamma, cfg, seed, q0=q0)
    if "dfrc-dinkelbach" in systems:
        out["dfrc-dinkelbach" + suffix] = _guard(run_dinkelbach, ch, noise, P, gamma, cfg, seed, q0=q0)
    if "dfrc-rcg" in systems:
        out["dfrc-rcg" + suffix] = _guard(run_rcg, ch, noise, P, gamma, cfg, q0=q0)
    return out


def _task_convergence(cfg, systems, trial):
    ch = scenario_channel(cfg, trial)
    P, gamma = float(dbm_to_watt(cfg.scenario.P_dbm)), float(db_to_lin(cfg.scenario.gamma_db))
    rows = []
    for alg, o in _nominal_runs(systems, ch, scenario_noise(cfg), P, gamma, cfg, algo_seed(cfg.seed, trial)).items():
        if o.error or not o.history:
            rows.append(_row("convergence", alg, 1, trial, o))
            continue
        for i, (cs, cb, ce, ga) in enumerate(o.history, start=1):
            rows.append(ExperimentResult("convergence", alg, float(i), trial, cs, cb, ce, ga,
                                         i, o.wall_ms, o.feasible))
    return rows


def _task_power(cfg, systems, trial, P_dbm):
    ch = scenario_channel(cfg, trial)
    noise, seed = scenario_noise(cfg), algo_seed(cfg.seed, trial)
    P, gamma = float(dbm_to_watt(P_dbm)), float(db_to_lin(cfg.scenario.gamma_db))
    runs = _nominal_runs(systems, ch, noise, P, gamma, cfg, seed)
    runs.update(_nominal_runs(systems, ch.without_ris(), noise, P, gamma, cfg, seed, suffix="-noris"))
    return [_row("power", a, P_dbm, trial, o) for a, o in runs.items()]


def _task_gamma(cfg, systems, trial, N, gamma_db):
    ch = scenario_channel(cfg, trial, N=N, alpha_AE=cfg.sweeps.gamma_alpha_AE)
    P, gamma = float(dbm_to_watt(cfg.scenario.P_dbm)), float(db_to_lin(gamma_db))
    runs = _nominal_runs(systems, ch, scenario_noise(cfg), P, gamma, cfg, algo_seed(cfg.seed, trial))
    return [_row("gamma", f"{a}@N={N}", gamma_db, trial, o) for a, o in runs.items()]


def _task_ris(cfg, systems, trial, M):
    ch = scenario_channel(cfg, trial, M=M)
    noise, seed = scenario_noise(cfg), algo_seed(cfg.seed, trial)
    P, gamma = float(dbm_to_watt(cfg.scenario.P_dbm)), float(db_to_lin(cfg.scenario.gamma_db))
    runs = _nominal_runs(systems, ch, noise, P, gamma, cfg, seed)
    runs.update(_nominal_runs(systems, ch, noise, P, gamma, cfg, seed,
                              q0=random_phases(cfg.seed, trial, M), suffix="-randq"))
    return [_row("ris-elements", a, M, trial, o) for a, o in runs.items()]


def _perfect_csi(rs: RobustSetup, cfg, seed):
    # nominal channel taken as exact; same outer tolerance as the robust loop
    return _guard(run_dinkelbach, rs.ch, rs.noise, rs.P, rs.gamma_p, cfg, seed,
                  radar="illumination", tol=cfg.tolerances.eps_robust)


def _task_robust_eps(cfg, trial, eps_bar):
    rs = robust_setup(cfg, trial, eps_bar=eps_bar)
    seed = algo_seed(cfg.seed, trial)
    runs = {
        "robust": _guard(lambda: run_robust(rs, cfg, seed)[0]),
        "robust-randq": _guard(lambda: run_robust(rs, cfg, seed, q0=random_phases(cfg.seed, trial, rs.ch.M))[0]),
    }
    return [_row("robust-eps", a, eps_bar, trial, o) for a, o in runs.items()]


def _task_robust_power(cfg, trial, P_dbm):
    rs = robust_setup(cfg, trial, P_dbm=P_dbm, phi_deg=cfg.robust.phi_power_deg)
    seed = algo_seed(cfg.seed, trial)
    runs = {
        "robust": _guard(lambda: run_robust(rs, cfg, seed)[0]),
        "dinkelbach-perfect-csi": _perfect_csi(rs, cfg, seed),
    }
    return [_row("robust-power", a, P_dbm, trial, o) for a, o in runs.items()]


def _task_robust_M(cfg, trial, M):
    rs = robust_setup(cfg, trial, M=M)
    seed = algo_seed(cfg.seed, trial)
    runs = {}
    try:
        base, design, pr = run_robust(rs, cfg, seed)
    except Exception as exc:
        log.warning("trial failed: %s", exc)
        base, design = _failed(exc), None
    runs["robust"] = base
    for b in cfg.sweeps.quant_bits:
        runs[f"robust-b{b}"] = base if base.error else _guard(
            quantized_outcome, base, design, pr, b, rs.noise.sigma_E_sq)
    runs["dinkelbach-perfect-csi"] = _perfect_csi(rs, cfg, seed)
    return [_row("robust-M", a, M, trial, o) for a, o in runs.items()]


def plan(cfg: ScenarioConfig, experiment: str, systems) -> list:
    """Independent work units (experiment, systems, trial, *point)."""
    systems = tuple(systems)
    sw = cfg.sweeps
    T = range(cfg.trials)
    if experiment == "convergence":
        return [(experiment, systems, t) for t in T]
    if experiment == "power":
        return [(experiment, systems, t, p) for p in sw.power_dbm for t in T]
    if experiment == "gamma":
        return [(experiment, systems, t, n, g) for n in sw.gamma_N for g in sw.gamma_db for t in T]
    if experiment == "ris-elements":
        return [(experiment, systems, t, m) for m in sw.ris_elements for t in T]
    if experiment == "robust-eps":
        return [(experiment, systems, t, e) for e in sw.robust_eps_bar for t in T]
    if experiment == "robust-power":
        return [(experiment, systems, t, p) for p in sw.robust_power_dbm for t in T]
    if experiment == "robust-M":
        return [(experiment, systems, t, m) for m in sw.robust_M for t in T]
    raise ExperimentError(f"unknown experiment {experiment!r}")


def run_task(cfg: ScenarioConfig, task) -> list:
    exp, systems, trial, *point = task
    if exp == "convergence":
        return _task_convergence(cfg, systems, trial)
    if exp == "power":
        return _task_power(cfg, systems, trial, *point)
    if exp == "gamma":
        return _task_gamma(cfg, systems, trial, *point)
    if exp == "ris-elements":
        return _task_ris(cfg, systems, trial, *point)
    if exp == "robust-eps":
        return _task_robust_eps(cfg, trial, *point)
    if exp == "robust-power":
        return _task_robust_power(cfg, trial, *point)
    if exp == "robust-M":
        return _task_robust_M(cfg, trial, *point)
    raise ExperimentError(f"unknown experiment {exp!r}")


def resolve_systems(experiment: str, system: str) -> tuple:
    """Map a --system choice onto the algorithms an experiment compares."""
    if experiment not in EXPERIMENTS:
        raise ExperimentError(f"unknown experiment {experiment!r}")
    allowed = ("robust",) if experiment in _ROBUST_EXPERIMENTS else _NOMINAL
    if system == "all":
        return allowed
    if system not in SYSTEMS:
        raise ExperimentError(f"unknown system {system!r}")
    if system not in allowed:
        raise ExperimentError(f"experiment {experiment!r} does not run system {system!r}; "
                              f"choose from {', '.join(allowed)} or all")
    return (system,)


def worker_count() -> int:
    """Parallel trial workers: CPU count, capped by $RISEC_WORKERS when set."""
    n = os.cpu_count() or 1
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ExperimentError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
    return n


def _run_task_star(args):
    return run_task(*args)


def run_experiment(cfg: ScenarioConfig, experiment: str, system: str = "all", workers=None) -> list:
    """All rows of one experiment, sorted by (experiment, param, trial, algorithm)."""
    systems = resolve_systems(experiment, system)
    tasks = plan(cfg, experiment, systems)
    workers = worker_count() if workers is None else max(1, int(workers))
    rows = []
    if workers == 1 or len(tasks) == 1:
        for t in tasks:
            rows.extend(run_task(cfg, t))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for part in ex.map(_run_task_star, [(cfg, t) for t in tasks], chunksize=1):
                rows.extend(part)
    return sort_results(rows)


def failures(rows) -> list:
    return [r for r in rows if r.error]

"""End-to-end pipelines shared by the command line and the acceptance suite.

``run_poc``
    Rate of convergence of the particle system to its mean-field limit: for
    each ``N`` several independent particle runs are compared in ``W2^2``,
    uniformly over a time grid, with a reference law from the fixed point of
    the decoupled construction. Two further proxies are reported: the
    self-consistency distance ``W2^2(mu^N, mu^{2N})`` and the coupled distance
    ``E|X^{i,N} - Y^i|^2`` to decoupled copies driven by the same noise.
``run_two_solver``
    The particle system and the fixed point at comparable sizes, against the
    distance between two independent particle runs.
"""
from __future__ import annotations

import math
import os
import time as _time
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import SimConfig, n_steps_for, simulate_paths
from .io import write_csv, write_json
from .meanfield import fixed_point
from .metrics import poc_rate_fit, wasserstein2
from .model import get_model
from .streams import derive_seed

__all__ = [
    "PocConfig",
    "PocResult",
    "run_poc",
    "write_poc",
    "TwoSolverResult",
    "run_two_solver",
    "sup_w2",
]


def _grid_times(T, dt, stride):
    n = n_steps_for(T, dt)
    return tuple(np.arange(0, n + 1, stride) * dt)


def _run_clouds(model, domain, N, dt, T, epsilon, seed, times, workers, interaction="particle_mean", g=None):
    """Positions at ``times`` (a list of ``(N, d)`` arrays) for one run."""
    out = []
    cfg = SimConfig(dt=dt, t_end=T, epsilon=epsilon, N=N, seed=seed, interaction=interaction, frozen_g=g,
                    workers=workers, moment_powers=(), snapshot_times=times)
    res = simulate_paths(model, domain, cfg, recorder=lambda c: out.append(c.positions.copy()))
    return out, res.audit


def sup_w2(clouds_a, clouds_b, squared=False):
    """``max_t W2(a_t, b_t)`` over paired snapshot lists (1-D exact, otherwise sliced)."""
    if len(clouds_a) != len(clouds_b):
        raise ValueError("snapshot lists differ in length")
    method = "exact_1d" if clouds_a[0].shape[1] == 1 else "sliced"
    return max(wasserstein2(a, b, method=method, squared=squared) for a, b in zip(clouds_a, clouds_b))


@dataclass
class PocConfig:
    model_id: str = "ou-cubic-1d"
    T: float = 1.0
    dt: float = 1e-3
    epsilon: float = 1.0
    N_list: tuple = (64, 128, 256, 512, 1024, 2048)
    M_ref: int | None = None
    replicates: int = 8
    stride: int = 10
    tol: float = 1e-2
    max_iter: int = 20
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.N_list = tuple(int(n) for n in self.N_list)
        if len(set(self.N_list)) < 3:
            raise ValueError("N_list needs at least three distinct values")
        if self.M_ref is None:
            self.M_ref = 16 * max(self.N_list)
        if self.replicates < 2:
            raise ValueError("replicates must be >= 2")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class PocResult:
    config: PocConfig
    rows: list
    fit: object
    fit_self: object
    fit_coupled: object
    reference_history: list
    audit: dict
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def summary(self):
        lo, hi = self.fit.ci()
        return {
            "slope": self.fit.slope,
            "intercept": self.fit.intercept,
            "stderr": self.fit.stderr,
            "ci95": [lo, hi],
            "self_consistency_slope": self.fit_self.slope,
            "coupled_proxy_slope": self.fit_coupled.slope,
            "reference_M": self.config.M_ref,
            "reference_iterations": self.reference_history,
            # worker count is excluded so that outputs do not depend on it
            "config": {k: v for k, v in asdict(self.config).items() if k != "workers"},
        }


def run_poc(cfg: PocConfig, model=None, domain=None, progress=None):
    """Run the convergence-rate experiment described in the module docstring."""
    t0 = _time.perf_counter()
    model = get_model(cfg.model_id) if model is None else model
    domain = model.default_domain if domain is None else domain
    times = _grid_times(cfg.T, cfg.dt, cfg.stride)
    audits = []
    ref = fixed_point(model, domain, cfg.M_ref, cfg.dt, cfg.epsilon, cfg.tol, cfg.max_iter,
                      derive_seed(cfg.seed, "poc-reference"), t_end=cfg.T, snapshot_times=times,
                      workers=cfg.workers)
    audits.append(ref.g.audit)
    ref_clouds = [c.positions for c in ref.g.snapshots]
    rows = []
    for N in cfg.N_list:
        w2, selfd, coup = [], [], []
        for rep in range(cfg.replicates):
            s = derive_seed(cfg.seed, "poc", N, rep)
            a, au = _run_clouds(model, domain, N, cfg.dt, cfg.T, cfg.epsilon, s, times, cfg.workers)
            audits.append(au)
            w2.append(sup_w2(a, ref_clouds, squared=True))
            b, au = _run_clouds(model, domain, 2 * N, cfg.dt, cfg.T, cfg.epsilon,
                                derive_seed(cfg.seed, "poc-double", N, rep), times, cfg.workers)
            audits.append(au)
            selfd.append(sup_w2(a, b, squared=True))
            # decoupled copies on the same streams (same seed and particle ids)
            y, au = _run_clouds(model, domain, N, cfg.dt, cfg.T, cfg.epsilon, s, times, cfg.workers,
                                interaction="frozen_g", g=ref.g)
            audits.append(au)
            coup.append(max(float(np.mean(np.sum((p - q) ** 2, axis=1))) for p, q in zip(a, y)))
        row = {"N": N}
        for key, vals in (("sup_w2_squared", w2), ("self_consistency", selfd), ("coupled_proxy", coup)):
            v = np.asarray(vals)
            row[key] = float(v.mean())
            row[key + "_stderr"] = float(v.std(ddof=1) / math.sqrt(v.size))
        rows.append(row)
        if progress is not None:
            progress(row)
    fit = poc_rate_fit([(r["N"], r["sup_w2_squared"]) for r in rows])
    fit_self = poc_rate_fit([(r["N"], r["self_consistency"]) for r in rows])
    fit_coupled = poc_rate_fit([(r["N"], r["coupled_proxy"]) for r in rows])
    audit = {
        "exterior_states": sum(a.exterior_states for a in audits),
        "interior_local_time_growth": sum(a.interior_local_time_growth for a in audits),
        "states": sum(a.states for a in audits),
    }
    return PocResult(cfg, rows, fit, fit_self, fit_coupled, [h["distance"] for h in ref.history],
                     audit, _time.perf_counter() - t0)


def write_poc(result: PocResult, out_dir):
    """Write ``poc_rate.csv`` (N, sup_w2_squared, stderr), ``poc_detail.csv``
    (all proxies) and ``poc_fit.json``. Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    rate = os.path.join(out_dir, "poc_rate.csv")
    detail = os.path.join(out_dir, "poc_detail.csv")
    summary = os.path.join(out_dir, "poc_fit.json")
    write_csv(rate, ["N", "sup_w2_squared", "stderr"],
              [(r["N"], r["sup_w2_squared"], r["sup_w2_squared_stderr"]) for r in result.rows])
    keys = ["N", "sup_w2_squared", "sup_w2_squared_stderr", "self_consistency", "self_consistency_stderr",
            "coupled_proxy", "coupled_proxy_stderr"]
    write_csv(detail, keys, [[r[k] for k in keys] for r in result.rows])
    write_json(summary, result.summary())
    return [rate, detail, summary]


@dataclass
class TwoSolverResult:
    sup_w2_particle_meanfield: float
    self_distance: float
    ratio: float
    fixed_point_distances: list
    converged: bool
    audit: dict

    @property
    def passed(self):
        return self.sup_w2_particle_meanfield <= 3.0 * self.self_distance

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def run_two_solver(model_id="ou-cubic-1d", epsilon=0.1, N=4096, M=4096, tol=1e-2, dt=1e-3, T=1.0, seed=0,
                   stride=10, max_iter=20, workers=1, model=None, domain=None):
    """Particle system (size ``N``) against the fixed point (size ``M``).

    The self-distance is ``sup_t W2`` between two independent particle runs of
    size ``N``; it measures the Monte Carlo error of the comparison.
    """
    model = get_model(model_id) if model is None else model
    domain = model.default_domain if domain is None else domain
    times = _grid_times(T, dt, stride)
    a, au1 = _run_clouds(model, domain, N, dt, T, epsilon, derive_seed(seed, "two-solver", "particle", 0), times,
                         workers)
    b, au2 = _run_clouds(model, domain, N, dt, T, epsilon, derive_seed(seed, "two-solver", "particle", 1), times,
                         workers)
    fp = fixed_point(model, domain, M, dt, epsilon, tol, max_iter, derive_seed(seed, "two-solver", "meanfield"),
                     t_end=T, snapshot_times=times, workers=workers)
    ref = [c.positions for c in fp.g.snapshots]
    d_pm = sup_w2(a, ref)
    d_self = sup_w2(a, b)
    audits = [au1, au2, fp.g.audit]
    audit = {
        "exterior_states": sum(x.exterior_states for x in audits),
        "interior_local_time_growth": sum(x.interior_local_time_growth for x in audits),
    }
    ratio = d_pm / d_self if d_self > 0 else math.inf
    return TwoSolverResult(d_pm, d_self, ratio, fp.distances, fp.converged, audit)

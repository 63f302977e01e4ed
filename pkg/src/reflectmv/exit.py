"""Exit times from a subdomain around a stable point.

A scenario fixes the constraint domain ``outer`` (where the reflection acts),
an open subdomain ``inner`` around the stationary point ``x_tilde`` (the
interior of a closed convex set), a compact ``compact`` with
``x_tilde in compact`` inside ``inner``, the start point and the moment-clock
parameters ``kappa`` and ``r``.

Main entry points
-----------------
``moment_clock``
    ``xi(t) = E|X_t - x_tilde|^r`` along the particle system, the first time
    ``T_hat`` at which it drops below ``kappa^r``, and the closed-form bounds.
``exit_time_mc``
    First grid time at which each of ``N`` jointly evolving particles leaves
    ``inner``; particles still inside at ``t_cap`` are reported as censored.
``coupling_gap``
    The particle system against the diffusion with frozen interaction
    ``f(. - x_tilde)`` driven by the same increments from ``T_hat`` onwards.
``exit_cost``
    Height of the effective barrier on the boundary of ``inner``.
``kramers_fit``
    Slope of ``log mean(tau)`` against ``1/eps``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from .engine import DomainAudit, ParticleCloud, SimConfig, _publish, simulate_paths, step_reflected
from .geometry import Ball, Box
from .io import write_csv, write_json
from .model import builtin_exit_models
from .streams import TAG_DYNAMICS, gaussian_block

__all__ = [
    "ExitScenario",
    "builtin_scenarios",
    "get_scenario",
    "StabilityReport",
    "stability_probe",
    "MomentClock",
    "moment_clock",
    "ExitSample",
    "exit_time_mc",
    "censored_mean",
    "exit_dt_check",
    "CouplingGap",
    "coupling_gap",
    "eta_kappa",
    "exit_cost",
    "KramersFit",
    "fit_kramers_slope",
    "kramers_fit",
    "pre_convergence_probability",
    "write_exit_csv",
    "write_kramers_json",
]


@dataclass
class ExitScenario:
    """Everything needed to study exits from ``inner`` (see module docstring)."""

    name: str
    model: object
    outer: object
    inner: object
    x0: np.ndarray
    kappa: float = 0.5
    r: float = 2.0
    compact: object = None

    def __post_init__(self):
        d = self.model.base.dimension
        self.x0 = np.asarray(self.x0, dtype=float).reshape(d)
        if self.compact is None:
            lo, hi = self.inner.bounding_box()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("a default compact set needs a bounded inner domain")
            diam = float(np.max(hi - lo))
            self.compact = self.inner.shrink(0.1 * diam)
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.r <= 1:
            raise ValueError("r must exceed 1")

    @property
    def x_tilde(self):
        return self.model.x_tilde

    @property
    def base(self):
        return self.model.base

    @property
    def L(self):
        return self.model.L_contraction

    @property
    def dimension(self):
        return self.base.dimension

    def containment_margins(self, n=4096, seed=0):
        """Positive numbers when the nesting ``x_tilde in K in inner``,
        ``closure(inner) in outer`` holds on sampled boundary points."""
        rng = np.random.default_rng(seed)
        bd_inner = self.inner.boundary_points(n, rng)
        bd_compact = self.compact.boundary_points(n, rng)
        xt = self.x_tilde[None, :]
        return {
            "inner_in_outer": float(np.min(self.outer.depth(bd_inner))),
            "compact_in_inner": float(np.min(self.inner.depth(bd_compact))),
            "x_tilde_in_compact": float(self.compact.depth(xt)[0]),
            "x0_in_inner": float(self.inner.depth(self.x0[None, :])[0]),
        }

    def validate(self, n=4096, seed=0):
        bad = {k: v for k, v in self.containment_margins(n, seed).items() if not v > 0}
        if bad:
            raise ValueError(f"scenario {self.name!r} violates containment: {bad}")
        return True

    def frozen_field(self):
        """``g(t, x) = f(x - x_tilde)``: the interaction against a Dirac at ``x_tilde``."""
        kernel = self.base.kernel
        xt = self.x_tilde[None, :]
        return lambda t, X: kernel(np.asarray(X) - xt)


def builtin_scenarios():
    exit_models = builtin_exit_models()
    out = {}
    for name, label in (("ou-cubic-1d", "ou-cubic-1d-exit"), ("ou-1d", "ou-1d-exit")):
        out[label] = ExitScenario(
            label, exit_models[name], outer=Box([-2.0], [4.0]), inner=Box([0.0], [2.0]), x0=[1.6], kappa=0.5, r=2.0
        )
    out["quartic-2d-exit"] = ExitScenario(
        "quartic-2d-exit",
        exit_models["quartic-2d"],
        outer=Box([-3.0, -3.0], [3.0, 3.0]),
        inner=Ball([0.5, 0.5], 1.5),
        x0=[1.2, 0.9],
        kappa=0.5,
        r=2.0,
    )
    return out


def get_scenario(name):
    cat = builtin_scenarios()
    if name not in cat:
        raise KeyError(f"unknown scenario {name!r}; available: {sorted(cat)}")
    return cat[name]


# ---------------------------------------------------------------------------
# stability of the noiseless flows


@dataclass
class StabilityReport:
    vector_field: str
    n_starts: int
    escapes: list = field(default_factory=list)

    @property
    def stable(self):
        return not self.escapes


def stability_probe(scenario, vector_field="b", n_starts=64, t_max=10.0, dt=1e-3, seed=0, starts=None):
    """Integrate ``phi' = U(phi)`` from starts inside ``inner`` and record escapes.

    ``vector_field`` is ``"b"``, ``"b_plus_f_centered"`` (``b + f(. - x_tilde)``)
    or a callable ``U(X) -> (n, d)``.
    """
    base = scenario.base
    if callable(vector_field):
        U = vector_field
        label = getattr(vector_field, "__name__", "custom")
    elif vector_field == "b":
        U = lambda X: base.b(0.0, X)  # noqa: E731
        label = "b"
    elif vector_field == "b_plus_f_centered":
        g = scenario.frozen_field()
        U = lambda X: base.b(0.0, X) + g(0.0, X)  # noqa: E731
        label = "b_plus_f_centered"
    else:
        raise ValueError(f"unknown vector field {vector_field!r}")
    if starts is None:
        rng = np.random.default_rng(seed)
        pts = scenario.inner.sample(8 * n_starts, rng)
        pts = pts[scenario.inner.depth(pts) > 0][:n_starts]
    else:
        pts = np.atleast_2d(np.asarray(starts, dtype=float))
    x = pts.copy()
    alive = np.ones(len(x), dtype=bool)
    report = StabilityReport(label, len(x))
    n = int(round(t_max / dt))
    for k in range(n):
        x[alive] = x[alive] + dt * np.asarray(U(x[alive]))
        out = alive & (scenario.inner.depth(x) <= 0)
        for i in np.nonzero(out)[0]:
            report.escapes.append({"start": pts[i].tolist(), "time": (k + 1) * dt, "position": x[i].tolist()})
        alive &= ~out
        if not alive.any():
            break
    return report


# ---------------------------------------------------------------------------
# moment clock


@dataclass
class MomentClock:
    times: np.ndarray
    xi: np.ndarray
    xi_stderr: np.ndarray
    T_hat: float
    bounds: dict
    checks: dict
    epsilon: float

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values() if c.get("applicable", True))


def _first_below(times, values, level):
    idx = np.nonzero(values <= level)[0]
    return float(times[idx[0]]) if idx.size else math.inf


def moment_bounds(dist0, d, epsilon, r, L, kappa):
    """Closed-form bounds on ``sup xi`` and on ``T_hat``.

    ``T_hat_stated`` uses ``|x0 - x_tilde|`` inside the logarithm as displayed
    in the statement; ``T_hat_squared`` uses ``|x0 - x_tilde|^2``, which is what
    the differential inequality for ``xi^(2/r)`` yields.
    """
    out = {"sup_xi": max(dist0**r, (d * epsilon * (r - 1) / (2 * L)) ** (r / 2))}
    out["hypothesis_epsilon_max"] = kappa**2 * L / (d * (r - 1))
    out["hypothesis_holds"] = epsilon < out["hypothesis_epsilon_max"]
    out["T_hat_applicable"] = dist0**2 > kappa**2 / 2
    if out["T_hat_applicable"]:
        arg1 = 2 * dist0 / kappa**2 - 1
        arg2 = 2 * dist0**2 / kappa**2 - 1
        out["T_hat_stated"] = math.log(arg1) / (r * L) if arg1 > 0 else -math.inf
        out["T_hat_squared"] = math.log(arg2) / (r * L)
    else:
        out["T_hat_stated"] = out["T_hat_squared"] = 0.0
    return out


def moment_clock(scenario, epsilon, dt, paths, t_end=None, seed=0, workers=1, x0=None, interaction="particle_mean"):
    """Monte Carlo ``xi(t)``, ``T_hat`` and the bound report.

    Check (i) compares ``sup xi`` with the closed-form maximum inflated by
    ``1 + 3 * (relative standard error at the supremum)``; check (ii) compares
    ``T_hat`` with the stated logarithmic bound (the squared variant is
    reported as ``ii_squared``).
    """
    base = scenario.base
    x0 = scenario.x0 if x0 is None else np.asarray(x0, dtype=float)
    xt = scenario.x_tilde
    r, L, kappa = scenario.r, scenario.L, scenario.kappa
    dist0 = float(np.linalg.norm(x0 - xt))
    bnd = moment_bounds(dist0, base.dimension, epsilon, r, L, kappa)
    if t_end is None:
        t_end = max(1.0, 3.0 * max(bnd["T_hat_squared"], bnd["T_hat_stated"], 0.0))
    xi, se, times = [], [], []

    def rec(c):
        v = np.linalg.norm(c.positions - xt, axis=1) ** r
        times.append(c.time)
        xi.append(v.mean())
        se.append(v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else 0.0)

    n = max(1, int(round(t_end / dt)))
    cfg = SimConfig(dt=dt, t_end=t_end, epsilon=epsilon, N=paths, seed=seed, interaction=interaction,
                    frozen_g=scenario.frozen_field() if interaction == "frozen_g" else None,
                    workers=workers, moment_powers=(), snapshot_times=tuple(np.arange(n + 1) * dt))
    simulate_paths(base, scenario.outer, cfg, recorder=rec, initial=np.tile(x0, (paths, 1)))
    times, xi, se = np.asarray(times), np.asarray(xi), np.asarray(se)
    T_hat = _first_below(times, xi, kappa**r)
    k = int(np.argmax(xi))
    rel = se[k] / xi[k] if xi[k] > 0 else 0.0
    # at t = 0 the estimate equals the first entry of the max exactly; allow round-off
    sup_bound = bnd["sup_xi"] * (1 + 3 * rel) * (1 + 64 * np.finfo(float).eps)
    checks = {
        "i": {
            "sup_xi": float(xi[k]),
            "bound": sup_bound,
            "margin": sup_bound - float(xi[k]),
            "passed": bool(xi[k] <= sup_bound),
            "applicable": True,
        },
        "ii": {
            "T_hat": T_hat,
            "bound": bnd["T_hat_stated"],
            "margin": bnd["T_hat_stated"] - T_hat,
            "passed": bool(T_hat <= bnd["T_hat_stated"]) if bnd["T_hat_applicable"] else bool(T_hat == 0.0),
            "applicable": True,
        },
        "ii_squared": {
            "T_hat": T_hat,
            "bound": bnd["T_hat_squared"],
            "margin": bnd["T_hat_squared"] - T_hat,
            "passed": bool(T_hat <= bnd["T_hat_squared"]) if bnd["T_hat_applicable"] else bool(T_hat == 0.0),
            "applicable": True,
        },
    }
    if not bnd["hypothesis_holds"]:
        for c in checks.values():
            c["applicable"] = False
    return MomentClock(times, xi, se, T_hat, bnd, checks, float(epsilon))


# ---------------------------------------------------------------------------
# exit times


@dataclass
class ExitSample:
    epsilon: float
    tau: np.ndarray
    censored: np.ndarray
    t_cap: float
    T_hat: float
    audit: DomainAudit
    dt: float

    @property
    def n_exits(self):
        return int(np.count_nonzero(~self.censored))

    @property
    def censored_fraction(self):
        return float(np.mean(self.censored))

    @property
    def flagged(self):
        """More than half censored: the noise level is too small for the budget."""
        return self.censored_fraction > 0.5

    @property
    def mean_tau(self):
        return censored_mean(self.tau, self.censored)

    def stderr_tau(self):
        """Standard error of the censored exponential estimate ``mean / sqrt(exits)``."""
        return self.mean_tau / math.sqrt(max(self.n_exits, 1))

    def pre_convergence_fraction(self):
        return float(np.mean((~self.censored) & (self.tau < self.T_hat)))


def censored_mean(tau, censored):
    """Exponential maximum-likelihood mean under right censoring:
    total observed time divided by the number of exits."""
    tau = np.asarray(tau, dtype=float)
    censored = np.asarray(censored, dtype=bool)
    exits = int(np.count_nonzero(~censored))
    if exits == 0:
        return math.inf
    return float(np.sum(tau) / exits)


def exit_time_mc(scenario, epsilon, dt, paths, t_cap, seed=0, workers=1, interaction="particle_mean",
                 stop_when_all_exited=True):
    """First exit times of ``paths`` jointly evolving particles from ``inner``.

    Particles keep evolving (reflected in ``outer``) after they exit, so the law
    inside the interaction is that of the whole system. ``tau`` holds the first
    grid time outside ``inner`` or ``t_cap`` for censored particles. The moment
    clock ``T_hat`` is computed on the same run.
    """
    base = scenario.base
    xt = scenario.x_tilde
    inner = scenario.inner
    N = int(paths)
    x0 = np.tile(scenario.x0, (N, 1))
    tau = np.full(N, float(t_cap))
    done = inner.depth(x0) <= 0
    tau[done] = 0.0
    level = scenario.kappa**scenario.r
    state = {"T_hat": 0.0 if np.mean(np.linalg.norm(x0 - xt, axis=1) ** scenario.r) <= level else math.inf}

    def observe(c):
        live = np.nonzero(~done)[0]
        out = live[inner.depth(c.positions[live]) <= 0]
        if out.size:
            tau[out] = c.time
            done[out] = True
        if state["T_hat"] == math.inf:
            if np.mean(np.linalg.norm(c.positions - xt, axis=1) ** scenario.r) <= level:
                state["T_hat"] = c.time
        return stop_when_all_exited and bool(done.all()) and state["T_hat"] < math.inf

    if done.all():
        return ExitSample(float(epsilon), tau, ~done, float(t_cap), state["T_hat"], DomainAudit(), dt)
    cfg = SimConfig(dt=dt, t_end=t_cap, epsilon=epsilon, N=N, seed=seed, interaction=interaction,
                    frozen_g=scenario.frozen_field() if interaction == "frozen_g" else None,
                    workers=workers, moment_powers=())
    res = simulate_paths(base, scenario.outer, cfg, initial=x0, observer=observe)
    censored = ~done
    sample = ExitSample(float(epsilon), tau, censored, float(t_cap), state["T_hat"], res.audit, dt)
    if sample.flagged:
        warnings.warn(
            f"eps={epsilon}: {sample.censored_fraction:.0%} of paths censored at t_cap={t_cap}; "
            "noise too small for the time budget",
            RuntimeWarning,
            stacklevel=2,
        )
    return sample


def exit_dt_check(scenario, epsilon, dt, paths, t_cap, seed=0, workers=1):
    """Relative change of the mean exit time when the step is halved.

    Both runs share their Brownian paths: each coarse increment is the
    normalised sum of the two fine increments it covers, so the difference
    isolates the discretisation bias. Returns ``(mean_coarse, mean_fine, rel)``.
    """
    base = scenario.base
    N = int(paths)
    inner, outer = scenario.inner, scenario.outer
    cap = 10.0 if base.r >= 3 else None
    start = np.tile(scenario.x0, (N, 1))
    coarse = ParticleCloud.from_positions(start, seed=seed)
    fine = ParticleCloud.from_positions(start, seed=seed)
    taus = {"c": np.full(N, float(t_cap)), "f": np.full(N, float(t_cap))}
    done = {"c": inner.depth(start) <= 0, "f": inner.depth(start) <= 0}
    taus["c"][done["c"]] = taus["f"][done["f"]] = 0.0
    audit = DomainAudit()
    n = int(round(t_cap / dt))
    h = 0.5 * dt
    block, block_start = None, 0
    for k in range(n):
        off = 2 * (k - block_start)
        if block is None or off >= block.shape[0]:
            nb = 2 * min(128, n - k)
            block = gaussian_block(seed, fine.particle_ids, fine.step, nb, base.noise_dimension, TAG_DYNAMICS,
                                   workers)
            block_start, off = k, 0
        z1, z2 = block[off], block[off + 1]
        fine = step_reflected(fine, base, outer, h, epsilon, noise=z1, taming_cap=cap, audit=audit, workers=workers)
        for key, cl in (("f", fine),):
            live = np.nonzero(~done[key])[0]
            out = live[inner.depth(cl.positions[live]) <= 0]
            taus[key][out] = cl.time
            done[key][out] = True
        fine = step_reflected(fine, base, outer, h, epsilon, noise=z2, taming_cap=cap, audit=audit, workers=workers)
        coarse = step_reflected(coarse, base, outer, dt, epsilon, noise=(z1 + z2) / math.sqrt(2.0), taming_cap=cap,
                                audit=audit, workers=workers)
        for key, cl in (("f", fine), ("c", coarse)):
            live = np.nonzero(~done[key])[0]
            out = live[inner.depth(cl.positions[live]) <= 0]
            taus[key][out] = cl.time
            done[key][out] = True
        if done["c"].all() and done["f"].all():
            break
    _publish(audit)
    mc = censored_mean(taus["c"], ~done["c"])
    mf = censored_mean(taus["f"], ~done["f"])
    return mc, mf, abs(mc - mf) / mf


def pre_convergence_probability(samples):
    """``P[tau < T_hat]`` per noise level (in the order given)."""
    return [(s.epsilon, s.pre_convergence_fraction()) for s in samples]


# ---------------------------------------------------------------------------
# coupling with the frozen-interaction diffusion


@dataclass
class CouplingGap:
    epsilon: float
    kappa: float
    T_hat: float
    eta: float
    mean_sup_gap_sq: float
    stderr: float
    prob_gap_exceeds_eta: float
    coupled: int
    sup_gap_sq: np.ndarray


def coupling_gap(scenario, epsilon, dt, paths, t_cap, seed=0, kappa=None, eta=None, workers=1):
    """Sup of ``|Z - X|^2`` over ``[T_hat, T_K]`` with shared noise increments.

    ``X`` is the particle system. At ``T_hat`` (first time the empirical
    ``xi`` drops below ``kappa^r``) particles inside the compact set start a
    copy ``Z`` driven by ``b + f(. - x_tilde)`` with the same increments; each
    pair is followed until the first of them leaves the compact set (or
    ``t_cap``). Particles outside the compact set at ``T_hat`` are not coupled
    (their ``Z`` equals ``X``).
    """
    base = scenario.base
    kappa = scenario.kappa if kappa is None else float(kappa)
    xt = scenario.x_tilde
    level = kappa**scenario.r
    N = int(paths)
    domain = scenario.outer
    K = scenario.compact
    g = scenario.frozen_field()
    X = ParticleCloud.from_positions(np.tile(scenario.x0, (N, 1)), seed=seed)
    audit = DomainAudit()
    n = int(round(t_cap / dt))
    taming = base.r >= 3
    cap = 10.0 if taming else None
    Z = None
    active = None
    sup_sq = np.zeros(N)
    T_hat = math.inf
    block, block_start = None, 0
    if eta is None:
        eta = eta_kappa(scenario, kappa)
    for k in range(n):
        if np.mean(np.linalg.norm(X.positions - xt, axis=1) ** scenario.r) <= level and Z is None:
            T_hat = X.time
            active = K.contains_points(X.positions, 0.0)
            Z = X.copy()
        off = k - block_start
        if block is None or off >= block.shape[0]:
            nb = min(256, n - k)
            block = gaussian_block(seed, X.particle_ids, X.step, nb, base.noise_dimension, TAG_DYNAMICS, workers)
            block_start, off = k, 0
        noise = block[off]
        Xn = step_reflected(X, base, domain, dt, epsilon, interaction="particle_mean", noise=noise,
                            taming_cap=cap, audit=audit, workers=workers)
        if Z is not None:
            Z = step_reflected(Z, base, domain, dt, epsilon, interaction="frozen_g", frozen_g=g, noise=noise,
                               taming_cap=cap, audit=audit, workers=workers)
            gap = np.sum((Z.positions - Xn.positions) ** 2, axis=1)
            sup_sq = np.where(active, np.maximum(sup_sq, gap), sup_sq)
            leave = ~K.contains_points(Xn.positions, 0.0) | ~K.contains_points(Z.positions, 0.0)
            active &= ~leave
        X = Xn
        if Z is not None and not active.any():
            break
    _publish(audit)
    coupled = int(np.count_nonzero(sup_sq > 0)) if Z is not None else 0
    m = float(sup_sq.mean())
    se = float(sup_sq.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    prob = float(np.mean(np.sqrt(sup_sq) >= eta))
    return CouplingGap(float(epsilon), kappa, T_hat, float(eta), m, se, prob, coupled, sup_sq)


def eta_kappa(scenario, kappa=None, n_weights=64, n_x=257, n_dirs=16):
    """Heuristic ``eta(kappa)``: maximise ``(|f*nu(x) - f(x - x_tilde)| / L)^(2/3)``
    over ``x`` in the compact set and moment-matched candidate measures ``nu``
    with ``int |y - x_tilde|^r dnu <= kappa^r`` supported in the outer domain.

    Candidates: two-point laws ``(1-p) delta_{x_tilde} + p delta_{x_tilde + rho u}``
    and symmetric three-point laws ``(1-p) delta_{x_tilde} + p/2 delta_{x_tilde +- rho u}``
    with ``p rho^r = kappa^r``. The result is a lower bound of the true supremum.
    """
    kappa = scenario.kappa if kappa is None else float(kappa)
    base = scenario.base
    f = base.kernel
    d = base.dimension
    xt = scenario.x_tilde
    r = scenario.r
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
        lo, hi = scenario.compact.bounding_box()
        xs = np.linspace(lo[0], hi[0], n_x)[:, None]
    else:
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((n_dirs, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        lo, hi = scenario.compact.bounding_box()
        xs = lo + qmc.Halton(d, scramble=False).random(n_x) * (hi - lo)
        xs = xs[scenario.compact.contains_points(xs, 0.0)]
    base_f = f(xs - xt)
    best = 0.0
    for u in dirs:
        # furthest admissible atom along u inside the outer domain
        rho_max = _ray_extent(scenario.outer, xt, u)
        rho_min = kappa
        if rho_max < rho_min:
            rho_grid = np.array([rho_max])
        else:
            rho_grid = np.geomspace(rho_min, rho_max, n_weights)
        for rho in rho_grid:
            p = min(1.0, (kappa / rho) ** r)
            a = xt + rho * u
            b_ = xt - rho * u
            two = (1 - p) * f(xs - xt) + p * f(xs - a)
            cand = [two]
            if scenario.outer.contains_points(b_[None, :], 0.0)[0]:
                cand.append((1 - p) * f(xs - xt) + 0.5 * p * (f(xs - a) + f(xs - b_)))
            for c in cand:
                val = np.max(np.linalg.norm(c - base_f, axis=1))
                best = max(best, float(val))
    return (best / scenario.L) ** (2.0 / 3.0)


def _ray_extent(domain, origin, u, cap=1e3):
    """Largest ``s`` with ``origin + s u`` in the domain (bisection, capped)."""
    lo, hi = 0.0, cap
    if domain.contains_points((origin + hi * u)[None, :], 0.0)[0]:
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if domain.contains_points((origin + mid * u)[None, :], 0.0)[0]:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# exit cost


def exit_cost(scenario, convention="classical", n_boundary=4096, return_argmin=False):
    """Barrier height on the boundary of ``inner``.

    ``classical``: ``inf_z B(x_tilde) - B(z) + F(z - x_tilde)``;
    ``paper``: ``inf_z B(z) + F(z - x_tilde) - B(x_tilde)``.
    One-dimensional intervals use their endpoints; in two dimensions the
    boundary is walked at ``n_boundary`` angles and the best angle refined by a
    bounded scalar minimisation; higher dimensions use boundary samples.
    """
    base = scenario.base
    if base.B_potential is None or not base.kernel.has_potential:
        raise ValueError("exit cost needs both potentials B and F")
    xt = scenario.x_tilde[None, :]
    B_xt = float(base.B(xt)[0])
    if convention == "classical":
        def V(Z):
            return B_xt - base.B(Z) + base.F(Z - xt)
    elif convention == "paper":
        def V(Z):
            return base.B(Z) + base.F(Z - xt) - B_xt
    else:
        raise ValueError(f"unknown convention {convention!r}")
    inner = scenario.inner
    lo, hi = inner.bounding_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("exit cost needs a bounded inner domain (infimum may be unbounded below)")
    d = base.dimension
    if d == 1:
        Z = np.array([[lo[0]], [hi[0]]])
        vals = V(Z)
        k = int(np.argmin(vals))
        res = float(vals[k]), Z[k]
    elif d == 2:
        c = scenario.x_tilde
        R = 4.0 * float(np.max(hi - lo)) + 1.0

        def point(theta):
            u = np.array([math.cos(theta), math.sin(theta)])
            return inner.project_points((c + R * u)[None, :])[0]

        th = np.linspace(0.0, 2 * math.pi, n_boundary, endpoint=False)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        Z = inner.project_points(c + R * U)[0]
        vals = V(Z)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite potential on the boundary")
        k = int(np.argmin(vals))
        step = 2 * math.pi / n_boundary
        opt = minimize_scalar(lambda s: float(V(point(s))[0]), bounds=(th[k] - step, th[k] + step),
                              method="bounded", options={"xatol": 1e-12})
        if opt.fun < vals[k]:
            res = float(opt.fun), point(opt.x)[0]
        else:
            res = float(vals[k]), Z[k]
    else:
        Z = inner.boundary_points(n_boundary, np.random.default_rng(0))
        vals = V(Z)
        k = int(np.argmin(vals))
        res = float(vals[k]), Z[k]
    if not math.isfinite(res[0]):
        raise FloatingPointError("exit cost is not finite")
    return res if return_argmin else res[0]


# ---------------------------------------------------------------------------
# Kramers slope


@dataclass
class KramersFit:
    slope: float
    intercept: float
    stderr: float
    ci: tuple
    rows: list
    target_classical: float | None = None
    target_paper: float | None = None
    excluded: list = field(default_factory=list)

    def relative_error(self, target=None):
        target = self.target_classical if target is None else target
        return abs(self.slope - target) / abs(target)

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "ci95": list(self.ci),
            "target_2delta_classical": self.target_classical,
            "target_2delta_paper": self.target_paper,
            "rows": self.rows,
            "excluded_eps": self.excluded,
        }


def fit_kramers_slope(eps, mean_tau):
    """Least-squares slope and intercept of ``log mean_tau`` against ``1/eps``."""
    eps = np.asarray(eps, dtype=float)
    tau = np.asarray(mean_tau, dtype=float)
    if eps.size < 3:
        raise ValueError("need at least three noise levels")
    if np.any(tau <= 0) or np.any(eps <= 0):
        raise ValueError("noise levels and mean exit times must be positive")
    res = stats.linregress(1.0 / eps, np.log(tau))
    q = stats.t.ppf(0.975, eps.size - 2) if eps.size > 2 else math.inf
    return float(res.slope), float(res.intercept), float(res.stderr), (res.slope - q * res.stderr,
                                                                       res.slope + q * res.stderr)


def kramers_fit(scenario, eps_list, dt, paths, t_cap, seed=0, workers=1, max_censored=0.10, samples=None):
    """Run :func:`exit_time_mc` for each noise level and fit the Kramers slope.

    Levels whose censored fraction is ``max_censored`` or more are excluded with
    a warning; fewer than three usable levels raise ``ValueError``.
    ``t_cap`` may be a number or a mapping ``eps -> cap``.
    """
    if samples is None:
        samples = []
        for eps in eps_list:
            cap = t_cap[eps] if isinstance(t_cap, dict) else t_cap
            samples.append(exit_time_mc(scenario, eps, dt, paths, cap, seed=seed, workers=workers))
    rows, use_eps, use_tau, excluded = [], [], [], []
    for s in samples:
        row = {
            "epsilon": s.epsilon,
            "mean_tau": s.mean_tau,
            "stderr": s.stderr_tau(),
            "exits": s.n_exits,
            "censored_fraction": s.censored_fraction,
            "T_hat": s.T_hat,
            "pre_convergence": s.pre_convergence_fraction(),
        }
        rows.append(row)
        if s.censored_fraction >= max_censored:
            warnings.warn(f"eps={s.epsilon} excluded: {s.censored_fraction:.1%} censored", RuntimeWarning,
                          stacklevel=2)
            excluded.append(s.epsilon)
            continue
        use_eps.append(s.epsilon)
        use_tau.append(s.mean_tau)
    if len(use_eps) < 3:
        raise ValueError(f"only {len(use_eps)} usable noise levels (need 3)")
    slope, icpt, se, ci = fit_kramers_slope(use_eps, use_tau)
    try:
        tc = 2 * exit_cost(scenario, "classical")
        tp = 2 * exit_cost(scenario, "paper")
    except ValueError:
        tc = tp = None
    fit = KramersFit(slope, icpt, se, ci, rows, tc, tp, excluded)
    fit.samples = samples
    return fit


def write_exit_csv(path, samples):
    rows = []
    for s in samples:
        for i, (t, c) in enumerate(zip(s.tau, s.censored)):
            rows.append((float(s.epsilon), i, float(t), int(bool(c))))
    return write_csv(path, ["epsilon", "replicate", "tau", "censored"], rows)


def write_kramers_json(path, fit):
    return write_json(path, fit.to_dict())

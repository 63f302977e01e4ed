"""Projected Euler-Maruyama time stepping for reflected interacting particles.

One step of the scheme reads::

    raw_i  = x_i + [b(t, x_i) + I_i] dt + sqrt(eps dt) sigma(t, x_i) xi_i
    x_i'   = P_D(raw_i),   dk_i = raw_i - x_i'

where ``P_D`` is the Euclidean projection onto the domain and ``I_i`` is the
interaction term: the empirical mean ``(1/N) sum_j f(x_i - x_j)`` of the cloud
itself (``"particle_mean"``), a frozen field ``g(t, x_i)`` (``"frozen_g"``) or
nothing (``"none"``). The Gaussian increments ``xi_i`` come from counter-based
streams keyed by ``(seed, particle id, step)``, so a run is reproducible
whatever the worker count.

Every step is audited: the projected states must lie in the domain exactly and
the local time may only grow on particles whose raw point was exterior. Counts
are kept per run and in a process-wide registry (:func:`global_audit`).
"""
from __future__ import annotations

import math
import threading
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .streams import TAG_DYNAMICS, gaussian_block

__all__ = [
    "ParticleCloud",
    "SimConfig",
    "SimulationError",
    "DomainAudit",
    "SimulationResult",
    "step_reflected",
    "interaction_force",
    "simulate_paths",
    "moment_bound",
    "global_audit",
    "reset_global_audit",
    "n_steps_for",
]


class SimulationError(RuntimeError):
    """A non-finite coefficient evaluation, with its location."""

    def __init__(self, message, step=None, time=None, term=None, index=None, position=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.term = term
        self.index = index
        self.position = position


@dataclass
class ParticleCloud:
    """Positions and accumulated local time of ``N`` particles.

    ``particle_ids`` name the noise streams; ``step`` counts completed steps
    and is the stream counter of the next increment.
    """

    positions: np.ndarray
    local_time_magnitude: np.ndarray
    local_time_vector: np.ndarray
    time: float = 0.0
    step: int = 0
    seed: int = 0
    particle_ids: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(np.atleast_2d(np.asarray(self.positions, dtype=float)))
        n = self.positions.shape[0]
        if self.particle_ids is None:
            self.particle_ids = np.arange(n, dtype=np.int64)
        self.particle_ids = np.asarray(self.particle_ids, dtype=np.int64)

    @classmethod
    def from_positions(cls, positions, seed=0, time=0.0, particle_ids=None):
        x = np.atleast_2d(np.asarray(positions, dtype=float)).copy()
        return cls(x, np.zeros(x.shape[0]), np.zeros_like(x), float(time), 0, int(seed), particle_ids)

    @classmethod
    def at_point(cls, x0, n, seed=0, time=0.0):
        x0 = np.asarray(x0, dtype=float).ravel()
        return cls.from_positions(np.tile(x0, (int(n), 1)), seed=seed, time=time)

    @property
    def N(self):
        return self.positions.shape[0]

    @property
    def dimension(self):
        return self.positions.shape[1]

    def copy(self):
        return replace(
            self,
            positions=self.positions.copy(),
            local_time_magnitude=self.local_time_magnitude.copy(),
            local_time_vector=self.local_time_vector.copy(),
            particle_ids=self.particle_ids.copy(),
        )

    def mean(self):
        return self.positions.mean(axis=0)


@dataclass
class SimConfig:
    """Run parameters.

    ``interaction`` is one of ``"particle_mean"``, ``"frozen_g"`` (needs
    ``frozen_g``, a callable ``g(t, X) -> (N, d)``) or ``"none"``.
    ``taming=None`` enables the drift cap for models with ``r >= 3``.
    """

    dt: float
    t_end: float
    epsilon: float = 1.0
    N: int = 1
    seed: int = 0
    interaction: str = "particle_mean"
    frozen_g: object = None
    workers: int = 1
    taming: bool | None = None
    taming_cap: float = 10.0
    interaction_method: str = "auto"
    snapshot_times: tuple = ()
    noise_block: int = 256
    moment_powers: tuple | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError("dt must not exceed t_end")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        if self.interaction not in ("particle_mean", "frozen_g", "none"):
            raise ValueError(f"unknown interaction {self.interaction!r}")
        if self.interaction == "frozen_g" and self.frozen_g is None:
            raise ValueError("interaction 'frozen_g' needs a frozen_g field")
        if self.interaction_method not in ("auto", "pairwise", "moments"):
            raise ValueError(f"unknown interaction_method {self.interaction_method!r}")
        self.N = int(self.N)
        self.seed = int(self.seed)

    @property
    def n_steps(self):
        return n_steps_for(self.t_end, self.dt)


def n_steps_for(t_end, dt):
    """Number of uniform steps covering ``[0, t_end]`` (``t_end / dt`` rounded)."""
    return max(1, int(round(t_end / dt)))


# ---------------------------------------------------------------------------
# audit


@dataclass
class DomainAudit:
    """Counters for the two exact invariants of the projected scheme."""

    steps: int = 0
    states: int = 0
    exterior_states: int = 0
    interior_local_time_growth: int = 0
    reflected_states: int = 0

    def record(self, projected, raw_inside, k_mag, domain):
        n = projected.shape[0]
        self.steps += 1
        self.states += n
        self.exterior_states += int(n - np.count_nonzero(domain.contains_points(projected, 0.0)))
        self.interior_local_time_growth += int(np.count_nonzero(k_mag[raw_inside]))
        self.reflected_states += int(n - np.count_nonzero(raw_inside))

    def merge(self, other):
        self.steps += other.steps
        self.states += other.states
        self.exterior_states += other.exterior_states
        self.interior_local_time_growth += other.interior_local_time_growth
        self.reflected_states += other.reflected_states

    @property
    def clean(self):
        return self.exterior_states == 0 and self.interior_local_time_growth == 0

    def to_dict(self):
        return {
            "steps": self.steps,
            "states": self.states,
            "exterior_states": self.exterior_states,
            "interior_local_time_growth": self.interior_local_time_growth,
            "reflected_states": self.reflected_states,
        }


_GLOBAL = DomainAudit()
_GLOBAL_LOCK = threading.Lock()


def global_audit():
    """Copy of the process-wide audit accumulated over every simulated step."""
    with _GLOBAL_LOCK:
        return replace(_GLOBAL)


def reset_global_audit():
    global _GLOBAL
    with _GLOBAL_LOCK:
        _GLOBAL = DomainAudit()


def _publish(audit):
    with _GLOBAL_LOCK:
        _GLOBAL.merge(audit)


# ---------------------------------------------------------------------------
# one step


def interaction_force(cloud, kernel, i=None, method="auto", workers=1):
    """``(1/N) sum_j f(x_i - x_j)`` for particle ``i`` (or all particles)."""
    X = cloud.positions if isinstance(cloud, ParticleCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))
    if i is None:
        return kernel.self_convolve(X, method=method, workers=workers)
    if not 0 <= i < X.shape[0]:
        raise IndexError(f"particle index {i} out of range for N={X.shape[0]}")
    return kernel.convolve(X[i : i + 1], X, method="pairwise")[0]


def _check_finite(arr, term, step, t, X):
    if not np.all(np.isfinite(arr)):
        bad = np.nonzero(~np.all(np.isfinite(arr), axis=1))[0][0]
        raise SimulationError(
            f"non-finite {term} at step {step}, t={t:.6g}, particle {bad}, x={X[bad]}",
            step=step,
            time=t,
            term=term,
            index=int(bad),
            position=X[bad].copy(),
        )


def _interaction(cloud, model, interaction, g, method, workers):
    if interaction == "none" or (model.kernel.is_zero and interaction == "particle_mean"):
        return None
    if interaction == "particle_mean":
        return model.kernel.self_convolve(cloud.positions, method=method, workers=workers)
    return np.asarray(g(cloud.time, cloud.positions), dtype=float)


def step_reflected(
    cloud,
    model,
    domain,
    dt,
    epsilon,
    *,
    interaction="particle_mean",
    frozen_g=None,
    noise=None,
    taming_cap=None,
    audit=None,
    workers=1,
    method="auto",
    out=None,
):
    """Advance ``cloud`` by one projected Euler-Maruyama step.

    Parameters
    ----------
    cloud : ParticleCloud
        Current state (not modified unless passed again as ``out``).
    model : ModelCoefficients
    domain : ConvexDomain
    dt, epsilon : float
    interaction : {"particle_mean", "frozen_g", "none"}
    frozen_g : callable, optional
        ``g(t, X)`` used when ``interaction == "frozen_g"``.
    noise : ndarray, optional
        Standard normals of shape ``(N, d')``; drawn from the cloud's streams
        when omitted (and ignored when ``epsilon == 0``).
    taming_cap : float, optional
        Cap ``|drift| dt <= taming_cap * sqrt(dt)``.
    audit : DomainAudit, optional
    out : ParticleCloud, optional
        Cloud to write the new state into (may be ``cloud`` itself).

    Returns
    -------
    ParticleCloud
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    X = cloud.positions
    t = cloud.time
    step = cloud.step
    drift = model.b(t, X)
    _check_finite(drift, "drift b", step, t, X)
    force = _interaction(cloud, model, interaction, frozen_g, method, workers)
    if force is not None:
        _check_finite(force, "interaction", step, t, X)
        drift = drift + force
    if taming_cap is not None:
        nrm = np.linalg.norm(drift, axis=1)
        lim = taming_cap / math.sqrt(dt)
        over = nrm > lim
        if over.any():
            drift[over] *= (lim / nrm[over])[:, None]
    raw = X + drift * dt
    if epsilon > 0:
        if noise is None:
            noise = gaussian_block(cloud.seed, cloud.particle_ids, step, 1, model.noise_dimension, TAG_DYNAMICS)[0]
        kick = model.diffuse(t, X, noise)
        _check_finite(kick, "diffusion", step, t, X)
        raw = raw + math.sqrt(epsilon * dt) * kick
    inside = domain.contains_points(raw, 0.0)
    projected, k = domain.project_points(raw)
    # exact complementarity: interior raw points are not moved at all
    projected[inside] = raw[inside]
    k[inside] = 0.0
    k_mag = np.sqrt(np.sum(k * k, axis=1))
    if audit is not None:
        audit.record(projected, inside, k_mag, domain)
    if out is None:
        out = ParticleCloud(
            projected,
            cloud.local_time_magnitude + k_mag,
            cloud.local_time_vector + k,
            t + dt,
            step + 1,
            cloud.seed,
            cloud.particle_ids,
        )
    else:
        out.positions = projected
        out.local_time_magnitude = cloud.local_time_magnitude + k_mag
        out.local_time_vector = cloud.local_time_vector + k
        out.time = t + dt
        out.step = step + 1
    return out


# ---------------------------------------------------------------------------
# moments


def moment_bound(p, L, horizon, start_moment, drift_integral, g_integral, sigma_sq_integral):
    """Closed-form bound on ``sup_{[T0, T0+h]} E|X_t - x0|^p`` over a window of length ``h``.

    ``drift_integral``, ``g_integral`` are ``int |b(s, x0)| ds`` and
    ``int |g(s, x0)| ds`` over the window, ``sigma_sq_integral`` is
    ``int |sigma(s, x0)|^2 ds`` (noise scale included).
    """
    p = float(p)
    if p < 2:
        raise ValueError("the moment bound needs p >= 2")
    lead = 4.0 * start_moment
    mid = (4.0 * (p - 1.0)) ** (p - 1.0) * (drift_integral**p + g_integral**p)
    pm2 = (p - 2.0) ** ((p - 2.0) / 2.0) if p > 2 else 1.0
    noise = 2.0 * (p - 1.0) ** (p / 2.0) * pm2 * 4.0 ** (p / 2.0) * sigma_sq_integral ** (p / 2.0)
    rate = 4.0 * p * L + 2.0 * p * (p - 1.0) * L**2
    total = lead + mid + noise
    if total == 0.0:
        return 0.0
    log_bound = math.log(total) + rate * horizon
    return math.exp(log_bound) if log_bound < 700.0 else math.inf


@dataclass
class SimulationResult:
    cloud: ParticleCloud
    times: np.ndarray
    moments: dict
    moment_stderr: dict
    moment_bounds: dict
    audit: DomainAudit
    snapshots: list = field(default_factory=list)
    n_steps: int = 0
    wall_time: float = 0.0
    x_ref: np.ndarray | None = None
    stopped_early: bool = False

    def sup_moment(self, p):
        return float(np.max(self.moments[p]))

    def summary(self):
        return {
            "n_steps": self.n_steps,
            "final_time": float(self.cloud.time),
            "N": self.cloud.N,
            "sup_moments": {str(p): self.sup_moment(p) for p in self.moments},
            "moment_bounds": {str(p): float(v) for p, v in self.moment_bounds.items()},
            "audit": self.audit.to_dict(),
            "wall_time": self.wall_time,
        }


def _snap_indices(times, dt, n_steps):
    idx = sorted({min(n_steps, max(0, int(round(float(s) / dt)))) for s in times})
    return idx


def simulate_paths(model, domain, cfg, recorder=None, initial=None, observer=None, x_ref=None):
    """Run the particle system on ``[0, t_end]``.

    Parameters
    ----------
    model : ModelCoefficients
    domain : ConvexDomain
    cfg : SimConfig
    recorder : callable, optional
        ``recorder(cloud)`` called at the snapshot grid nodes (times snapped to
        the nearest step). Without a recorder snapshots are kept in memory.
    initial : ndarray or ParticleCloud, optional
        Initial positions ``(N, d)``; defaults to ``N`` copies of ``model.x0``.
    observer : callable, optional
        ``observer(cloud) -> bool`` after every step; returning ``True`` stops
        the run early.
    x_ref : ndarray, optional
        Reference point of the moment monitor (defaults to ``model.x0``).

    Returns
    -------
    SimulationResult
        Including ``E|X_t - x_ref|^p`` for ``p`` in ``{2, 2r}`` at every step
        and the closed-form bound on their supremum.
    """
    t0 = _time.perf_counter()
    if isinstance(initial, ParticleCloud):
        cloud = initial.copy()
        if cloud.seed != cfg.seed:
            cloud.seed = cfg.seed
    else:
        pos = np.tile(model.x0, (cfg.N, 1)) if initial is None else np.asarray(initial, dtype=float)
        cloud = ParticleCloud.from_positions(pos, seed=cfg.seed)
    if not np.all(domain.contains_points(cloud.positions, 0.0)):
        raise ValueError("initial positions must lie in the domain")
    dt = cfg.dt
    n_steps = cfg.n_steps
    taming = cfg.taming if cfg.taming is not None else model.r >= 3
    cap = cfg.taming_cap if taming else None
    x_ref = model.x0 if x_ref is None else np.asarray(x_ref, dtype=float)
    powers = cfg.moment_powers if cfg.moment_powers is not None else (2.0, 2.0 * model.r)
    audit = DomainAudit()
    snaps = _snap_indices(cfg.snapshot_times, dt, n_steps)
    snapshots = []

    def emit(c):
        if recorder is not None:
            recorder(c)
        else:
            snapshots.append(c.copy())

    mom = {p: np.empty(n_steps + 1) for p in powers}
    mse = {p: np.empty(n_steps + 1) for p in powers}
    times = np.arange(n_steps + 1) * dt + cloud.time
    b_int = g_int = s_int = 0.0
    x_ref_row = x_ref[None, :]
    start_dist = np.linalg.norm(cloud.positions - x_ref, axis=1)

    def moments(k, dist):
        for p in powers:
            v = dist**p
            mom[p][k] = v.mean()
            mse[p][k] = v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else 0.0

    moments(0, start_dist)
    start_moment = {p: mom[p][0] for p in powers}
    if 0 in snaps:
        emit(cloud)
    block = None
    block_start = 0
    stopped = False
    last = n_steps
    for k in range(n_steps):
        if cfg.epsilon > 0:
            off = k - block_start
            if block is None or off >= block.shape[0]:
                nb = min(cfg.noise_block, n_steps - k)
                block = gaussian_block(
                    cfg.seed, cloud.particle_ids, cloud.step, nb, model.noise_dimension, TAG_DYNAMICS, cfg.workers
                )
                block_start = k
                off = 0
            noise = block[off]
        else:
            noise = None
        t = cloud.time
        if powers:
            b_int += float(np.linalg.norm(model.b(t, x_ref_row)[0])) * dt
            if cfg.interaction == "particle_mean" and not model.kernel.is_zero:
                gx = model.kernel.convolve(x_ref_row, cloud.positions, cfg.interaction_method)
                g_int += float(np.linalg.norm(gx[0])) * dt
            elif cfg.interaction == "frozen_g":
                g_int += float(np.linalg.norm(np.asarray(cfg.frozen_g(t, x_ref_row))[0])) * dt
            s_int += cfg.epsilon * float(model.sigma_norm(t, x_ref_row)[0]) ** 2 * dt
        try:
            cloud = step_reflected(
                cloud,
                model,
                domain,
                dt,
                cfg.epsilon,
                interaction=cfg.interaction,
                frozen_g=cfg.frozen_g,
                noise=noise,
                taming_cap=cap,
                audit=audit,
                workers=cfg.workers,
                method=cfg.interaction_method,
            )
        except SimulationError as exc:
            _publish(audit)
            raise SimulationError(
                f"run aborted at step {k}: {exc}", step=k, time=exc.time, term=exc.term, index=exc.index,
                position=exc.position,
            ) from exc
        moments(k + 1, np.linalg.norm(cloud.positions - x_ref, axis=1))
        if k + 1 in snaps:
            emit(cloud)
        if observer is not None and observer(cloud):
            stopped = True
            last = k + 1
            break
    _publish(audit)
    if stopped:
        times = times[: last + 1]
        mom = {p: v[: last + 1] for p, v in mom.items()}
        mse = {p: v[: last + 1] for p, v in mse.items()}
    horizon = float(times[-1] - times[0])
    bounds = {}
    for p in powers:
        if p >= 2:
            bounds[p] = moment_bound(p, model.L, horizon, start_moment[p], b_int, g_int, s_int)
    return SimulationResult(
        cloud=cloud,
        times=times,
        moments=mom,
        moment_stderr=mse,
        moment_bounds=bounds,
        audit=audit,
        snapshots=snapshots,
        n_steps=last,
        wall_time=_time.perf_counter() - t0,
        x_ref=x_ref,
        stopped_early=stopped,
    )

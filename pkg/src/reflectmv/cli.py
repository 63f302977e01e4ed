"""Command-line experiment driver.

Usage::

    python -m reflectmv <command> --config run.yaml [--seed S] [--workers W] [--out DIR]

``command`` is one of ``validate``, ``simulate``, ``poc``, ``meanfield``,
``ldp`` and ``exit``. The YAML schema is documented in ``docs/config.md``;
unknown keys are rejected. Every run ends by writing ``manifest.json`` with
the configuration echo, the code version, the wall time and the SHA-256
digest of every artifact.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time as _time

import numpy as np
import yaml

from . import __version__
from .engine import SimConfig, global_audit, reset_global_audit, simulate_paths
from .geometry import domain_from_dict
from .io import SnapshotRecorder, sha256_file, write_csv, write_json, write_snapshots_csv
from .model import ExitModel, get_model, model_from_dict, probe_assumptions

__all__ = ["main", "ConfigError", "load_config", "run", "COMMANDS"]

log = logging.getLogger("reflectmv")

COMMANDS = ("validate", "simulate", "poc", "meanfield", "ldp", "exit")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

TOP_KEYS = {"command", "seed", "model", "domain", "output_dir", "workers", "params", "scenario"}

PARAMS = {
    "validate": {"n_probes": 10_000},
    "simulate": {"dt": 1e-3, "T": 1.0, "epsilon": 1.0, "N": 1024, "interaction": "particle_mean",
                 "snapshot_times": None, "snapshot_format": "csv", "max_snapshot_particles": None, "x0": None},
    "poc": {"dt": 1e-3, "T": 1.0, "epsilon": 1.0, "N_list": [64, 128, 256, 512, 1024, 2048], "M_ref": None,
            "replicates": 8, "stride": 10, "tol": 1e-2, "max_iter": 20},
    "meanfield": {"dt": 1e-3, "T": 1.0, "epsilon": 0.1, "M": 4096, "tol": 1e-2, "max_iter": 20, "m_store": 1024,
                  "snapshot_times": None},
    "ldp": {"dt": 1e-3, "T": 1.0, "eps_list": [0.2, 0.1, 0.05], "paths": 4096, "control": None,
            "n_list": [4, 16, 64, 256]},
    "exit": {"dt": 5e-4, "eps_list": [1.0, 0.7, 0.5, 0.4], "paths": 1024, "t_cap": 600.0, "kappa": None,
             "r": None, "x0": None, "max_censored": 0.1},
}

SCENARIO_KEYS = {"model", "x_tilde", "L", "outer", "inner", "compact", "x0", "kappa", "r", "name"}


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


def load_config(path):
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def _resolve(cfg, command, seed, workers, out):
    """Validate the raw mapping and fill defaults; raises ConfigError."""
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "command" in cfg and cfg["command"] != command:
        raise ConfigError(f"config is for command {cfg['command']!r}, invoked as {command!r}")
    seed = cfg.get("seed") if seed is None else seed
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer, got {seed!r}") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    workers = cfg.get("workers", os.cpu_count() or 1) if workers is None else workers
    if int(workers) < 1:
        raise ConfigError("workers must be >= 1")
    out = cfg.get("output_dir") if out is None else out
    if out is None:
        raise ConfigError("an output directory is required (config 'output_dir' or --out)")
    params = dict(PARAMS[command])
    given = cfg.get("params") or {}
    if not isinstance(given, dict):
        raise ConfigError("'params' must be a mapping")
    bad = set(given) - set(params)
    if bad:
        raise ConfigError(f"unknown params for {command!r}: {sorted(bad)}; allowed: {sorted(params)}")
    params.update(given)
    for key in ("dt", "T", "epsilon", "tol", "t_cap"):
        if key in params and params[key] is not None:
            try:
                v = float(params[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key} must be a number") from exc
            if key == "epsilon":
                if v < 0:
                    raise ConfigError("epsilon must be >= 0")
            elif not v > 0:
                raise ConfigError(f"{key} must be positive")
            params[key] = v
    try:
        model, domain = _build_model(cfg)
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid model/domain: {exc}") from exc
    if command == "simulate":
        try:
            x0 = model.x0 if params["x0"] is None else np.asarray(params["x0"], float).reshape(model.dimension)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"x0 must be a list of {model.dimension} numbers") from exc
        if not domain.contains_points(x0[None, :])[0]:
            raise ConfigError(f"initial point {x0.tolist()} lies outside the domain")
        params["x0"] = x0.tolist()
    return {"command": command, "seed": seed, "workers": int(workers), "out": out, "params": params,
            "model": model, "domain": domain, "raw": cfg}


def _build_model(cfg):
    spec = cfg.get("model", "ou-cubic-1d")
    if isinstance(spec, str):
        try:
            model = get_model(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    elif isinstance(spec, dict):
        model = model_from_dict(spec)
    else:
        raise ConfigError("'model' must be a catalog id or an inline mapping")
    domain = domain_from_dict(cfg["domain"]) if "domain" in cfg else model.default_domain
    if domain is None:
        raise ConfigError("no domain given and the model has no default domain")
    if domain.dimension != model.dimension:
        raise ConfigError("domain and model dimensions differ")
    return model, domain


def _build_scenario(cfg, params):
    from .exit import ExitScenario, get_scenario

    spec = cfg.get("scenario", "ou-cubic-1d-exit")
    try:
        if isinstance(spec, str):
            sc = get_scenario(spec)
        elif isinstance(spec, dict):
            bad = set(spec) - SCENARIO_KEYS
            if bad:
                raise ConfigError(f"unknown scenario keys: {sorted(bad)}")
            m = spec.get("model", "ou-cubic-1d")
            base = get_model(m) if isinstance(m, str) else model_from_dict(m)
            sc = ExitScenario(
                spec.get("name", "inline"),
                ExitModel(base, np.asarray(spec["x_tilde"], float), float(spec["L"])),
                outer=domain_from_dict(spec["outer"]),
                inner=domain_from_dict(spec["inner"]),
                x0=spec["x0"],
                kappa=float(spec.get("kappa", 0.5)),
                r=float(spec.get("r", 2.0)),
                compact=domain_from_dict(spec["compact"]) if "compact" in spec else None,
            )
        else:
            raise ConfigError("'scenario' must be a name or a mapping")
        if params.get("kappa") is not None:
            sc.kappa = float(params["kappa"])
        if params.get("r") is not None:
            sc.r = float(params["r"])
        if params.get("x0") is not None:
            sc.x0 = np.asarray(params["x0"], float).reshape(sc.dimension)
        sc.validate()
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc
    return sc


# ---------------------------------------------------------------------------
# commands; each returns the list of written artifact paths


def _cmd_validate(rc):
    rep = probe_assumptions(rc["model"], rc["domain"], n_probes=int(rc["params"]["n_probes"]), seed=rc["seed"])
    path = os.path.join(rc["out"], "assumptions.json")
    write_json(path, rep.to_dict())
    print(rep.summary())
    return [path]


def _cmd_simulate(rc):
    p = rc["params"]
    snaps = p["snapshot_times"]
    if snaps is None:
        snaps = list(np.linspace(0.0, p["T"], 11))
    cfg = SimConfig(dt=p["dt"], t_end=p["T"], epsilon=p["epsilon"], N=int(p["N"]), seed=rc["seed"],
                    interaction=p["interaction"], workers=rc["workers"], snapshot_times=tuple(snaps))
    rec = SnapshotRecorder(p["max_snapshot_particles"])
    initial = np.tile(np.asarray(p["x0"], float), (int(p["N"]), 1))
    res = simulate_paths(rc["model"], rc["domain"], cfg, recorder=rec, initial=initial)
    if p["snapshot_format"] == "csv":
        snap_path = rec.write_csv(os.path.join(rc["out"], "snapshots.csv"))
    elif p["snapshot_format"] == "binary":
        snap_path = rec.write_binary(os.path.join(rc["out"], "snapshots.bin"))
    else:
        raise ConfigError("snapshot_format must be 'csv' or 'binary'")
    mom_path = os.path.join(rc["out"], "moments.csv")
    powers = sorted(res.moments)
    header = ["t"] + [f"moment_p{p_:g}" for p_ in powers] + [f"stderr_p{p_:g}" for p_ in powers]
    rows = [[float(t)] + [float(res.moments[q][k]) for q in powers] + [float(res.moment_stderr[q][k])
                                                                        for q in powers]
            for k, t in enumerate(res.times)]
    write_csv(mom_path, header, rows)
    summary = res.summary()
    summary.pop("wall_time", None)
    sum_path = os.path.join(rc["out"], "summary.json")
    write_json(sum_path, summary)
    return [snap_path, mom_path, sum_path]


def _cmd_poc(rc):
    from .experiments import PocConfig, run_poc, write_poc

    p = rc["params"]
    cfg = PocConfig(model_id=rc["model"].name, T=p["T"], dt=p["dt"], epsilon=p["epsilon"], N_list=tuple(p["N_list"]),
                    M_ref=p["M_ref"], replicates=int(p["replicates"]), stride=int(p["stride"]), tol=p["tol"],
                    max_iter=int(p["max_iter"]), seed=rc["seed"], workers=rc["workers"])
    res = run_poc(cfg, model=rc["model"], domain=rc["domain"], progress=lambda row: log.info("poc %s", row))
    return write_poc(res, rc["out"])


def _cmd_meanfield(rc):
    from .meanfield import fixed_point

    p = rc["params"]
    model = rc["model"]
    snaps = p["snapshot_times"]
    if snaps is None:
        snaps = list(np.linspace(0.0, p["T"], 11))
    res = fixed_point(model, rc["domain"], int(p["M"]), p["dt"], p["epsilon"], p["tol"], int(p["max_iter"]),
                      rc["seed"], t_end=p["T"], m_store=int(p["m_store"]), snapshot_times=tuple(snaps),
                      workers=rc["workers"])
    hist = os.path.join(rc["out"], "fixed_point_history.csv")
    write_csv(hist, ["iteration", "distance"], [(h["iteration"], float(h["distance"])) for h in res.history])
    snap = os.path.join(rc["out"], "fixed_point_snapshots.csv")
    write_snapshots_csv(snap, res.g.snapshots)
    summ = os.path.join(rc["out"], "fixed_point.json")
    write_json(summ, {"converged": res.converged, "distances": res.distances})
    return [hist, snap, summ]


def _control_from_params(spec, model, T, dt):
    from .expressions import compile_expression
    from .ldp import ControlPath

    dp = model.noise_dimension
    if spec is None:
        return ControlPath.linear(np.ones(dp), T, dt)
    if not isinstance(spec, dict) or set(spec) - {"type", "slope", "expressions"}:
        raise ConfigError("control must be {type: linear, slope: [...]} or {type: expression, expressions: [...]}")
    kind = spec.get("type")
    try:
        if kind == "linear":
            h = ControlPath.linear(np.asarray(spec["slope"], float), T, dt)
        elif kind == "expression":
            # controls are functions of time only: no x-variables are admitted
            fns = [compile_expression(e, 0) for e in spec["expressions"]]
            dummy = np.zeros((1, 0))
            h = ControlPath.from_function(lambda t: np.array([fn(t, dummy)[0] for fn in fns]), T, dt)
        else:
            raise ConfigError(f"unknown control type {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid control: {exc}") from exc
    if h.dimension != dp:
        raise ConfigError(f"control has {h.dimension} components, the noise has {dp}")
    return h


def _cmd_ldp(rc):
    from .ldp import action, concentration_check, euler_skeleton, psi, skeleton, write_concentration_csv

    p = rc["params"]
    model, domain = rc["model"], rc["domain"]
    T, dt = p["T"], p["dt"]
    h = _control_from_params(p["control"], model, T, dt)
    ref = psi(model, domain, model.x0, dt, T)
    psi_path = ref.to_csv(os.path.join(rc["out"], "psi.csv"))
    H = skeleton(model, domain, model.x0, h, dt, psi_path=ref)
    sk_path = H.to_csv(os.path.join(rc["out"], "skeleton.csv"))
    gaps = []
    for n in p["n_list"]:
        Hn = euler_skeleton(model, domain, model.x0, h, int(n), dt, psi_path=ref)
        gaps.append((int(n), Hn.sup_distance(H)))
    gap_path = os.path.join(rc["out"], "euler_skeleton_gaps.csv")
    write_csv(gap_path, ["n", "sup_gap"], gaps)
    rows = concentration_check(model, domain, model.x0, p["eps_list"], dt, int(p["paths"]), T=T, seed=rc["seed"],
                               workers=rc["workers"])
    conc = write_concentration_csv(os.path.join(rc["out"], "concentration.csv"), rows)
    summ = os.path.join(rc["out"], "ldp.json")
    write_json(summ, {"action": action(h), "euler_gaps": gaps,
                      "concentration": [[r.epsilon, r.estimate, r.stderr] for r in rows]})
    return [psi_path, sk_path, gap_path, conc, summ]


def _cmd_exit(rc):
    from .exit import exit_time_mc, kramers_fit, write_exit_csv, write_kramers_json

    p = rc["params"]
    sc = _build_scenario(rc["raw"], p)
    samples = []
    for eps in p["eps_list"]:
        s = exit_time_mc(sc, float(eps), p["dt"], int(p["paths"]), p["t_cap"], seed=rc["seed"], workers=rc["workers"])
        log.info("exit eps=%s mean_tau=%.6g censored=%.3f", eps, s.mean_tau, s.censored_fraction)
        samples.append(s)
    tau_path = write_exit_csv(os.path.join(rc["out"], "exit_times.csv"), samples)
    fit = kramers_fit(sc, None, p["dt"], int(p["paths"]), p["t_cap"], max_censored=p["max_censored"],
                      samples=samples)
    k_path = write_kramers_json(os.path.join(rc["out"], "kramers.json"), fit)
    return [tau_path, k_path]


HANDLERS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "poc": _cmd_poc,
    "meanfield": _cmd_meanfield,
    "ldp": _cmd_ldp,
    "exit": _cmd_exit,
}


def _echo(raw, rc):
    echo = {k: v for k, v in raw.items()}
    echo.update({"command": rc["command"], "seed": rc["seed"], "params": rc["params"]})
    return echo


def run(command, config, seed=None, workers=None, out=None):
    """Run one command from a config mapping; returns the manifest dictionary.

    Raises ConfigError for invalid configurations; other exceptions are
    runtime failures.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    rc = _resolve(config, command, seed, workers, out)
    os.makedirs(rc["out"], exist_ok=True)
    reset_global_audit()
    t0 = _time.perf_counter()
    outputs = HANDLERS[command](rc)
    wall = _time.perf_counter() - t0
    manifest = {
        "config": _echo(config, rc),
        "workers": rc["workers"],
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_seconds": wall,
        "domain_audit": global_audit().to_dict(),
        "outputs": {os.path.basename(p): sha256_file(p) for p in outputs},
    }
    write_json(os.path.join(rc["out"], "manifest.json"), manifest)
    return manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="reflectmv", description="Reflected self-stabilizing diffusion experiments")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML configuration file")
    ap.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    ap.add_argument("--workers", type=int, help="worker threads (default: available cores)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config) if args.config else {}
        manifest = run(args.command, config, seed=args.seed, workers=args.workers, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any module failure as a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(manifest['outputs'])} artifacts and manifest.json")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

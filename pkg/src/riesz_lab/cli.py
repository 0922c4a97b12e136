"""``riesz-lab`` command line: run one experiment and write its reports.

Exit status: 0 success, 2 parameter/config rejection, 3 invariant violated,
4 resource limit.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import platform
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, PRESETS, ConfigError, ExperimentConfig, load_config, load_preset
from .construction import heights, sample_realization, stage_geometry, validate_params
from .errors import EmptyMaskError, InvariantViolation, ParamsError, ResourceLimitError
from .montecarlo import kb_ratio, spread_z_indices, stage_step
from .singularity import DEGENERATE, greedy_select, phi_weak_limit, degenerate_bound
from .spectral import riesz_partial
from .tower import build_tower, max_window, recursion_check

log = logging.getLogger("riesz_lab")

EXIT_OK, EXIT_REJECTED, EXIT_INVARIANT, EXIT_RESOURCE = 0, 2, 3, 4


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, ensure_ascii=False) + "\n"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _stage(cfg: ExperimentConfig, params) -> int:
    m = cfg.numeric["stage"]
    m = params.stages - 1 if m is None else int(m)
    if not 0 <= m < params.stages:
        raise ConfigError(f"stage {m} out of range 0..{params.stages - 1}")
    return m


# -- experiments: each returns (exit status, report dict, csv (header, rows) or None)

def exp_validate(cfg, params):
    rep = validate_params(params, cfg.numeric["horizon"])
    body = rep.to_json()
    body["heights"] = [str(h) for h in heights(params)]
    rows = [(k, str(t), float(t)) for k, t in enumerate(rep.finiteness_terms)]
    return EXIT_OK, body, (["k", "finiteness_term", "finiteness_term_float"], rows)


def exp_riesz_decay(cfg, params):
    validate_params(params)
    omega = sample_realization(params, cfg.numeric["seed"])
    geom = stage_geometry(params, omega)
    N = int(cfg.numeric["grid"])
    rows = []
    for k in range(1, params.stages + 1):
        root, sq = riesz_partial(geom, range(k), N)
        rows.append((k, root.mean, sq.mean, root.sup, bool(root.aliased)))
    means = [r[1] for r in rows]
    body = {
        "N": N,
        "realization": omega.to_json(),
        "series": [dict(zip(("k", "root_mean", "squared_mean", "root_sup", "aliased"), r)) for r in rows],
        "root_mean_nonincreasing": all(b <= a + 1e-12 for a, b in zip(means, means[1:])),
    }
    return EXIT_OK, body, (["k", "root_mean", "squared_mean", "root_sup", "aliased"], rows)


def exp_oracle_check(cfg, params):
    validate_params(params)
    base = int(cfg.numeric["seed"])
    results, rows = [], []
    worst = Fraction(0)
    for s in range(int(cfg.numeric["seeds"])):
        omega = sample_realization(params, base + s)
        tower = build_tower(params, omega)
        for j in range(params.stages):
            window = cfg.numeric["window"]
            window = max_window(tower, j) if window is None else min(int(window), max_window(tower, j))
            rep = recursion_check(tower, params, omega, j, window)
            worst = max(worst, rep.residual)
            results.append({"seed": base + s, **rep.to_json()})
            rows.append((base + s, j, rep.window, str(rep.residual)))
    body = {"checks": results, "max_residual": str(worst), "all_zero": worst == 0}
    status = EXIT_OK if worst == 0 else EXIT_INVARIANT
    return status, body, (["seed", "j", "window", "residual"], rows)


def exp_greedy(cfg, params):
    validate_params(params)
    num = cfg.numeric
    lim = phi_weak_limit(params, N=int(num["grid"]), eps=float(num["epsilon"]))
    if lim.case == DEGENERATE:
        raise EmptyMaskError("xi_m concentrates on a point (degenerate case): F_epsilon is empty; run the section6 experiment instead")
    kwargs = dict(phi=lim.phi, budget=int(num["budget"]), N=int(num["grid"]), threshold=float(num["threshold"]),
                  max_steps=int(num["max_steps"]), workers=int(num["workers"]))
    if num["mode"] == "fixed":
        trace = greedy_select(params, float(num["epsilon"]), omega=sample_realization(params, int(num["seed"])), **kwargs)
    elif num["mode"] == "averaged":
        trace = greedy_select(params, float(num["epsilon"]), replicas=int(num["replicas"]), seed=int(num["seed"]), **kwargs)
    else:
        raise ConfigError(f"unknown greedy mode {num['mode']!r}")
    body = trace.to_json()
    body["phi_case"] = lim.case
    body["reached_half"] = bool(trace.values) and min(trace.values) < 0.5
    rows = [(0, "", trace.initial)] + [(i, m, v) for i, (m, v) in enumerate(zip(trace.selected, trace.values), 1)]
    return EXIT_OK, body, (["step", "stage", "L"], rows)


def exp_kb_bound(cfg, params):
    validate_params(params)
    num = cfg.numeric
    m = _stage(cfg, params)
    N = int(num["grid"])
    z = spread_z_indices(params.xi[m], N, int(num["z_points"]))
    rep = kb_ratio(params, m, z, N, int(num["replicas"]), int(num["seed"]), int(num["workers"]))
    if not z:
        rep.message = "degenerate case, use the section6 experiment"
    body = {"stage": m, "p": params.p[m], "M": str(stage_step(params, m)), **rep.to_json()}
    rows = [(s.z_index, s.mean_abs_dev, s.mean_abs_dev_se, s.var_tau, s.var_tau_se, s.one_minus_phi, s.ratio) for s in rep.stats]
    return EXIT_OK, body, (["z_index", "mean_abs_dev", "se", "var_tau", "var_se", "one_minus_phi", "ratio"], rows)


def exp_phi_limit(cfg, params):
    validate_params(params)
    lim = phi_weak_limit(params, N=int(cfg.numeric["grid"]), eps=float(cfg.numeric["epsilon"]))
    rows = [(n, *[str(v) for v in vals]) for n, vals in sorted(lim.history.items())]
    return EXIT_OK, lim.to_json(), (["n", *[f"stage_{m}" for m in lim.stages]], rows)


def exp_degenerate_bound(cfg, params):
    validate_params(params)
    m = _stage(cfg, params)
    rep = degenerate_bound(params.p[m], stage_step(params, m), params.xi[m], replicas=int(cfg.numeric["replicas"]), seed=int(cfg.numeric["seed"]))
    body = {"stage": m, **rep.to_json()}
    return EXIT_OK, body, None


RUNNERS = {
    "validate": exp_validate,
    "riesz-decay": exp_riesz_decay,
    "oracle-check": exp_oracle_check,
    "greedy": exp_greedy,
    "kb-bound": exp_kb_bound,
    "phi-limit": exp_phi_limit,
    "section6": exp_degenerate_bound,
}


def run_experiment(experiment: str, cfg: ExperimentConfig) -> int:
    """Run one experiment, write manifest + report files, return the exit status."""
    if experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    out = Path(cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfg.resolved()
    manifest = {
        "experiment": experiment,
        "config": resolved,
        "config_source": cfg.source,
        "seed": cfg.numeric["seed"],
        "versions": {"riesz_lab": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    (out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")

    table = None
    try:
        params = cfg.build_params()
        status, body, table = RUNNERS[experiment](cfg, params)
    except (ParamsError, EmptyMaskError) as exc:
        status, body = EXIT_REJECTED, {"rejected": str(exc)}
    except InvariantViolation as exc:
        status, body = EXIT_INVARIANT, {"invariant_violation": str(exc)}
    except ResourceLimitError as exc:
        status, body = EXIT_RESOURCE, {"resource_error": str(exc)}
    report = {"experiment": experiment, "config": resolved, "exit_status": status, "result": body}
    stem = experiment.replace("-", "_")
    if "json" in cfg.output["formats"]:
        (out / f"{stem}.json").write_text(dumps(report), encoding="utf-8")
    if "csv" in cfg.output["formats"] and table is not None:
        _write_csv(out / f"{stem}.csv", *table)
    msg = body.get("rejected") or body.get("invariant_violation") or body.get("resource_error")
    if msg:
        log.error("%s: %s", experiment, msg)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riesz-lab", description="Generalized Ornstein rank-one transformations: spectral experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="YAML experiment config")
    src.add_argument("--preset", choices=PRESETS, help="built-in config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--grid", type=int, help="torus grid size N")
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else load_preset(args.preset)
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_REJECTED
    for key, val in (("seed", args.seed), ("grid", args.grid), ("replicas", args.replicas), ("epsilon", args.epsilon)):
        if val is not None:
            cfg.numeric[key] = val
    if args.out is not None:
        cfg.output["dir"] = str(args.out)
    try:
        return run_experiment(args.experiment, cfg)
    except OSError as exc:
        log.error("cannot write reports: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``qcorr run | preset | list-presets``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .cloud import gaussian_s_infinity, r_factor_analytic
from .config import ConfigError, JobConfig, apply_overrides, load_config, parse_config
from .correlations import HERMITIAN_RTOL, MIN_INTENSITY
from .ensemble import run_ensemble
from .errors import QcorrError, RealizationError
from .integrate import RTOL
from .presets import PRESETS, preset_config, preset_rows

log = logging.getLogger("qcorr")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_OVERLAY_MODEL = {
    "single_excitation": ("analytic_td", None),
    "product": ("analytic_eberly", None),
    "classical": ("analytic_eberly", 0.0),
}


def _fmt(x) -> str:
    return f"{x:.12g}"


def _overlay(cfg: JobConfig, spec, result, workers, sweep_index):
    """Closed-form comparison curve for one sweep point, or None."""
    if cfg.quantity == "r_factor":
        s2 = gaussian_s_infinity(spec.cloud_config.sigma, spec.geometry.theta) ** 2
        return np.array([r_factor_analytic(spec.cloud_config.n_atoms, s2)])
    if spec.model not in _OVERLAY_MODEL:
        return None
    model, q = _OVERLAY_MODEL[spec.model]
    if cfg.quantity == "g1":
        ov = replace(spec, model="analytic_td")
    else:
        # disorder statistics from the very same clouds (identical seeds)
        t = spec.t if model == "analytic_td" else math.inf
        ov = replace(spec, model=model, r_source="numeric", t=t, q_factor=q)
    return run_ensemble(ov, workers=workers, sweep_index=sweep_index).curve.values


def run_job(cfg: JobConfig, out_dir: Path, workers: int = 1) -> tuple[Path, Path]:
    """Execute a job and write ``<name>.csv`` plus the ``<name>.json`` sidecar."""
    key = cfg.sweep.parameter if cfg.sweep else None
    complex_values = cfg.quantity == "g1"
    header = ([key] if key else []) + ["tau", "value"]
    header += ["value_imag"] if complex_values else []
    header += ["stderr"]
    header += ["analytic"] if cfg.analytic_column else []

    rows, points = [], []
    for i, value in enumerate(cfg.sweep_points()):
        spec = cfg.ensemble_spec(value)
        log.info("sweep point %d/%d (%s=%s)", i + 1, len(cfg.sweep_points()), key, value)
        result = run_ensemble(spec, workers=workers, sweep_index=i)
        overlay = _overlay(cfg, spec, result, workers, i) if cfg.analytic_column else None
        curve = result.curve
        for k, tau in enumerate(curve.tau_grid):
            v = curve.values[k]
            row = ([_fmt(value)] if key else []) + [_fmt(tau), _fmt(np.real(v))]
            row += [_fmt(np.imag(v))] if complex_values else []
            row += [_fmt(curve.stderr[k])]
            if cfg.analytic_column:
                row += [_fmt(np.real(overlay[k])) if overlay is not None else "nan"]
            rows.append(row)
        points.append({
            "sweep_value": value,
            "detuning": spec.drive.detuning,
            "theta_rad": spec.geometry.theta,
            "n_realizations_used": len(result.per_realization_seeds),
            "seeds": [str(s) for s in result.per_realization_seeds],
            "extras": {k: float(v) for k, v in result.extras.items()},
        })

    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.name}.csv"
    json_path = out_dir / f"{cfg.name}.json"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    meta = {
        "software": {"name": "qcorr", "version": __version__},
        "config": cfg.model_dump(mode="json"),
        "tolerances": {
            "rk4_richardson_rtol": RTOL,
            "hermiticity_rtol": HERMITIAN_RTOL,
            "min_intensity": MIN_INTENSITY,
            "collective_rate_quadrature_abs": 1e-9,
        },
        "units": {"rates": "Gamma", "lengths": "1/k0", "tau": "1/Gamma"},
        "columns": header,
        "points": points,
    }
    json_path.write_text(json.dumps(meta, indent=2) + "\n")
    return csv_path, json_path


def _resolve_runtime(cfg: JobConfig, args) -> tuple[JobConfig, Path, int]:
    """Precedence for output dir and workers: flag > environment > document."""
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    out = os.environ.get("QCORR_OUT_DIR") or cfg.output_dir
    if getattr(args, "out", None):
        out = args.out
    workers = cfg.workers
    env_workers = os.environ.get("QCORR_WORKERS")
    if env_workers:
        try:
            workers = int(env_workers)
        except ValueError:
            raise ConfigError(f"QCORR_WORKERS={env_workers!r} is not an integer") from None
    if getattr(args, "workers", None) is not None:
        workers = args.workers
    if workers < 1:
        raise ConfigError("worker count must be >= 1")
    if updates:
        cfg = parse_config({**cfg.model_dump(mode="json"), **updates})
    return cfg, Path(out), workers


def _execute(cfg: JobConfig, args) -> int:
    cfg, out_dir, workers = _resolve_runtime(cfg, args)
    if cfg.rabi > 0.1:
        log.warning("rabi=%s is outside the weak-drive regime", cfg.rabi)
    try:
        csv_path, json_path = run_job(cfg, out_dir, workers)
    except RealizationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (QcorrError, np.linalg.LinAlgError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(csv_path)
    print(json_path)
    return EXIT_OK


def cmd_run(args) -> int:
    return _execute(load_config(args.config), args)


def cmd_preset(args) -> int:
    try:
        data = preset_config(args.name, paper_scale=args.paper_scale)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    data = apply_overrides(data, args.override or [])
    return _execute(parse_config(data), args)


def cmd_list_presets(args) -> int:
    if args.detail:
        try:
            cfg = preset_config(args.detail)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if args.json:
            print(json.dumps(cfg, indent=2))
        else:
            print(yaml.safe_dump(cfg, sort_keys=False), end="")
        return EXIT_OK
    rows = preset_rows()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    print(f"{'name':<6} {'model':<18} {'quantity':<9} {'iters':>6}  description / desk overrides")
    for r in rows:
        over = ", ".join(f"{k}: {v['desk']} (full {v['full']})" for k, v in r["desk_overrides"].items())
        desc = r["description"] + (f" [{over}]" if over else "")
        print(f"{r['name']:<6} {r['model']:<18} {r['quantity']:<9} {r['n_realizations']:>6}  {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcorr", description="Photon correlations of light scattered by cold-atom clouds."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def runtime_flags(p):
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="run a job document (YAML or JSON)")
    p_run.add_argument("config")
    runtime_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_pre = sub.add_parser("preset", help="run a figure preset")
    p_pre.add_argument("name", choices=list(PRESETS))
    p_pre.add_argument("--override", action="append", metavar="KEY=VAL",
                       help="override a configuration key (dotted for nested keys)")
    p_pre.add_argument("--paper-scale", action="store_true",
                       help="restore the full-scale iteration counts")
    runtime_flags(p_pre)
    p_pre.set_defaults(func=cmd_preset)

    p_list = sub.add_parser("list-presets", help="list the figure presets")
    p_list.add_argument("--json", action="store_true", help="machine-readable output")
    p_list.add_argument("--detail", metavar="NAME", help="show one preset in full")
    p_list.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

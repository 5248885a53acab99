"""Command line entry point.

Subcommands: simulate (single cycle, full statistics report), sweep (grid
execution from a JSON spec), figure (built-in presets), validate (invariant
suite). The CLI only orchestrates: every number written to disk comes from a
library call, and all outputs are computed before the first file is written so
failures leave no partial results.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import fields

from . import __version__, stats, sweep
from .engine import (
    CycleConfig,
    build_cycle,
    classify_regime,
    limit_cycle,
    unmeasured_thermo,
)
from .qcore import kl_divergence, rel_entropy_coherence, trace_distance


class CliError(Exception):
    pass


def _field_types():
    return {f.name: f.type for f in fields(CycleConfig)}


_INT_FIELDS = {"d", "propagator_steps"}


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise CliError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if key.startswith("base."):
        key = key[len("base."):]
    if key not in _field_types():
        raise CliError(f"unknown config field {key!r}")
    if key in _INT_FIELDS:
        return key, int(raw)
    return key, float(raw)


def load_cycle_config(path: str, overrides) -> CycleConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError("config file must hold a JSON object")
    if "base" in doc and set(doc) <= {"base"}:
        doc = doc["base"]
    bad = set(doc) - set(_field_types())
    if bad:
        raise CliError(f"unknown config fields: {sorted(bad)}")
    for key, value in (_parse_override(o) for o in overrides):
        doc[key] = value
    try:
        config = CycleConfig(**doc)
        config.validate()
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    return config


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _dist_csv(dist) -> str:
    lines = ["value,probability"]
    for v, p in zip(dist.values, dist.probs):
        lines.append(f"{_fmt(v)},{_fmt(p)}")
    return "\n".join(lines) + "\n"


def _report_dict(r: stats.SchemeReport) -> dict:
    return {
        "mean_w": r.mean_w, "var_w": r.var_w,
        "mean_qh": r.mean_qh, "var_qh": r.var_qh,
        "mean_qc": r.mean_qc, "var_qc": r.var_qc,
        "closed_form_mean_w": r.closed_form_mean_w,
        "closed_form_var_w": r.closed_form_var_w,
        "closed_form_mean_qh": r.closed_form_mean_qh,
        "closed_form_var_qh": r.closed_form_var_qh,
        "closed_form_mean_qc": r.closed_form_mean_qc,
        "closed_form_var_qc": r.closed_form_var_qc,
        "first_law_residual": r.first_law_residual,
    }


def simulate_report(config: CycleConfig):
    """Full single-cycle report: summary dict plus the six distributions."""
    ops = build_cycle(config)
    corners = limit_cycle(ops, config)
    w, qh, qc = unmeasured_thermo(corners, ops, config)
    reports, dists, regimes, distances = {}, {}, {}, {}
    for scheme in ("TPM", "DBN"):
        joint = (stats.tpm_joint if scheme == "TPM" else stats.dbn_joint)(
            corners, ops, config
        )
        dists[scheme] = stats.scheme_distributions(joint, config.merge_tol)
        reports[scheme] = stats.scheme_report(scheme, corners, ops, config)
        regimes[scheme] = classify_regime(
            *stats.closed_form_means(scheme, corners, ops, config)
        )
        avg = stats.avg_post_measurement_state(scheme, corners, ops, config)
        distances[scheme] = trace_distance(avg, corners[0])
    kl = kl_divergence(dists["DBN"][0], dists["TPM"][0])
    summary = {
        "config": {f.name: getattr(config, f.name) for f in fields(CycleConfig)},
        "W": w, "Q_h": qh, "Q_c": qc,
        "regime_unmeasured": classify_regime(w, qh, qc),
        "regime_tpm": regimes["TPM"],
        "regime_dbn": regimes["DBN"],
        "tpm": _report_dict(reports["TPM"]),
        "dbn": _report_dict(reports["DBN"]),
        "kl_dbn_tpm": None if math.isinf(kl) else kl,
        "kl_infinite": math.isinf(kl),
        "coherence_rho1": rel_entropy_coherence(corners[0], ops.H_e_end),
        "coherence_rho3": rel_entropy_coherence(corners[2], ops.H_k_end),
        "trace_distance_tpm": distances["TPM"],
        "trace_distance_dbn": distances["DBN"],
    }
    for scheme, tag in (("TPM", "tpm"), ("DBN", "dbn")):
        fr = stats.fluctuation_ratio(reports[scheme], config)
        summary[f"eta2_{tag}"] = fr.eta2
        summary[f"eta2_{tag}_defined"] = fr.defined
        summary[f"eta2_{tag}_violates_bound"] = fr.violated
    summary["fluctuation_bound"] = (1.0 - config.T_c / config.T_h) ** 2
    return summary, dists


def cmd_simulate(args) -> int:
    config = load_cycle_config(args.config, args.set or [])
    summary, dists = simulate_report(config)
    files = {"summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n"}
    for scheme, tag in (("TPM", "tpm"), ("DBN", "dbn")):
        dw, dqh, dqc = dists[scheme]
        files[f"work_dist_{tag}.csv"] = _dist_csv(dw)
        files[f"heat_h_dist_{tag}.csv"] = _dist_csv(dqh)
        files[f"heat_c_dist_{tag}.csv"] = _dist_csv(dqc)
    os.makedirs(args.out, exist_ok=True)
    for name, content in files.items():
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(content)
    from . import plots

    plots.render_work_distributions(
        dists["TPM"][0], dists["DBN"][0], os.path.join(args.out, "work_dist.png")
    )
    print(f"wrote {len(files) + 1} files to {args.out}")
    return 0


def _default_cache_dir(out_dir: str) -> str | None:
    env = os.environ.get(sweep.CACHE_ENV_VAR)
    if env:
        return env
    return os.path.join(out_dir, "cache")


def cmd_sweep(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}") from exc
    try:
        spec = sweep.spec_from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid sweep config: {exc}") from exc
    cache = _default_cache_dir(args.out)
    results = sweep.run_sweep(spec, args.parallelism, cache_dir=cache)
    csv_text = sweep.results_to_csv(spec, results)
    json_text = sweep.results_to_json(spec, results)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    with open(os.path.join(args.out, "sweep.json"), "w", encoding="utf-8") as fh:
        fh.write(json_text)
    print(f"wrote {len(results)} rows to {args.out}/sweep.csv")
    return 0


def cmd_figure(args) -> int:
    try:
        spec = sweep.figure_spec(args.name)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    cache = _default_cache_dir(args.out)
    results = sweep.run_sweep(spec, args.parallelism, cache_dir=cache)
    csv_text = sweep.results_to_csv(spec, results)
    meta = {
        "figure": args.name,
        "base": {f.name: getattr(spec.base, f.name) for f in fields(CycleConfig)},
        "axes": [
            {"params": list(ax.params), "label": ax.label, "values": list(ax.values)}
            for ax in spec.axes
        ],
        "outputs": list(spec.outputs),
    }
    os.makedirs(args.out, exist_ok=True)
    with open(
        os.path.join(args.out, f"{args.name}.csv"), "w", encoding="utf-8"
    ) as fh:
        fh.write(csv_text)
    with open(
        os.path.join(args.out, f"{args.name}.meta.json"), "w", encoding="utf-8"
    ) as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    from . import plots

    plots.render_figure(
        args.name, spec, results, os.path.join(args.out, f"{args.name}.png")
    )
    print(f"wrote {args.name}.csv, {args.name}.meta.json, {args.name}.png to {args.out}")
    return 0


def cmd_validate(args) -> int:
    from . import validate

    results = validate.run_validation(seed=args.seed, inject_fault=args.inject_fault)
    width = max(len(name) for name, _, _ in results)
    failed = 0
    for name, ok, detail in results:
        mark = "pass" if ok else "FAIL"
        print(f"{name:<{width}}  {mark}  {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otto",
        description="Finite-time coherent Otto cycle statistics under two "
        "measurement protocols",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="single-cycle report at one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter grid from a JSON spec")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("figure", help="run a built-in figure preset")
    p.add_argument("name", choices=sweep.FIGURE_NAMES)
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(fn=cmd_figure)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallelism", type=int, default=1,
                   help="accepted for interface stability; the suite is serial")
    p.add_argument("--inject-fault", action="store_true",
                   help="test hook: skip a dephasing in the closed-form "
                   "chains; the suite must then fail")
    p.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

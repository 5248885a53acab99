"""Deterministic parameter-grid execution and figure data assembly.

A sweep evaluates a set of requested scalar outputs over the cartesian grid of
one or more parameter axes. Grid points are independent and may run in a
process pool; results are always assembled in lexicographic index order so
repeated runs serialize byte-identically regardless of parallelism. A small
per-point JSON cache (keyed by a hash of the full point configuration plus the
requested outputs) lets overlapping grids reuse work.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import stats
from .engine import (
    ConvergenceError,
    CycleConfig,
    build_cycle,
    classify_regime,
    limit_cycle,
    unmeasured_thermo,
)
from .qcore import kl_divergence, rel_entropy_coherence, trace_distance

CACHE_ENV_VAR = "OTTO_CACHE_DIR"

OUTPUT_NAMES = (
    "W", "Q_h", "Q_c",
    "regime_unmeasured", "regime_tpm", "regime_dbn",
    "kl", "coherence_rho1", "coherence_rho3",
    "trace_distance_tpm", "trace_distance_dbn",
    "eta2_tpm", "eta2_dbn", "bound",
    "mean_w_tpm", "var_w_tpm", "mean_qh_tpm", "var_qh_tpm",
    "mean_qc_tpm", "var_qc_tpm",
    "mean_w_dbn", "var_w_dbn", "mean_qh_dbn", "var_qh_dbn",
    "mean_qc_dbn", "var_qc_dbn",
)

# outputs that need the full five-index joints rather than closed-form means
_JOINT_OUTPUTS = frozenset(
    ("kl", "eta2_tpm", "eta2_dbn")
    + tuple(n for n in OUTPUT_NAMES if n.startswith(("mean_", "var_")))
)

_CONFIG_FIELDS = tuple(f.name for f in fields(CycleConfig))


@dataclass(frozen=True)
class SweepAxis:
    """One grid axis; params lists the config fields driven in lockstep."""

    params: tuple[str, ...]
    values: tuple[float, ...]
    label: str

    @classmethod
    def build(cls, param: str, values, label: str | None = None) -> "SweepAxis":
        params = tuple(p.strip() for p in param.split(","))
        for p in params:
            if p not in _CONFIG_FIELDS:
                raise ValueError(f"unknown sweep parameter {p!r}")
        if label is None:
            if set(params) == {"lambda_h", "lambda_c"}:
                label = "lambda"
            else:
                label = ",".join(params)
        return cls(params, tuple(float(v) for v in values), label)


@dataclass(frozen=True)
class SweepSpec:
    base: CycleConfig
    axes: tuple[SweepAxis, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        for o in self.outputs:
            if o not in OUTPUT_NAMES:
                raise ValueError(f"unknown sweep output {o!r}")

    def grid_shape(self) -> tuple[int, ...]:
        return tuple(len(ax.values) for ax in self.axes)

    def point_config(self, index: tuple[int, ...]) -> CycleConfig:
        over = {}
        for ax, i in zip(self.axes, index):
            for p in ax.params:
                over[p] = ax.values[i]
        return self.base.with_overrides(**over)


@dataclass(frozen=True)
class SweepResult:
    index: tuple[int, ...]
    params: tuple[tuple[str, float], ...]
    values: dict
    status: str


def spec_from_dict(doc: dict) -> SweepSpec:
    """Build a SweepSpec from the parsed JSON configuration tree.

    Schema: {"base": {CycleConfig fields}, "axes": [{"param": name or
    comma-joined names, "values": [...], "label"?: str}], "outputs": [...]}.
    """
    unknown = set(doc) - {"base", "axes", "outputs"}
    if unknown:
        raise ValueError(f"unknown top-level config keys: {sorted(unknown)}")
    base_doc = dict(doc.get("base", {}))
    bad = set(base_doc) - set(_CONFIG_FIELDS)
    if bad:
        raise ValueError(f"unknown CycleConfig fields: {sorted(bad)}")
    base = CycleConfig(**base_doc)
    base.validate()
    axes = []
    for ax in doc.get("axes", []):
        extra = set(ax) - {"param", "values", "label"}
        if extra:
            raise ValueError(f"unknown axis keys: {sorted(extra)}")
        axes.append(SweepAxis.build(ax["param"], ax["values"], ax.get("label")))
    outputs = tuple(doc.get("outputs", []))
    return SweepSpec(base, tuple(axes), outputs)


def _config_dict(config: CycleConfig) -> dict:
    return {f: getattr(config, f) for f in _CONFIG_FIELDS}


def point_cache_key(config: CycleConfig, outputs: tuple[str, ...]) -> str:
    doc = {"config": _config_dict(config), "outputs": sorted(outputs)}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# Per-process memo of stroke operators; the propagators depend only on the
# driving parameters, so grid points differing in lambda or temperature reuse
# them.
_OPS_CACHE: dict = {}


def _cached_build(config: CycleConfig):
    key = (
        config.d, config.omega_h, config.omega_c, config.g,
        config.t_k, config.t_e, config.T_h, config.T_c,
        config.propagator_steps, config.propagator_tol, config.grouping_tol,
    )
    ops = _OPS_CACHE.get(key)
    if ops is None:
        ops = build_cycle(config)
        if len(_OPS_CACHE) > 256:
            _OPS_CACHE.clear()
        _OPS_CACHE[key] = ops
    return ops


def evaluate_point(config: CycleConfig, outputs: tuple[str, ...]):
    """Compute the requested outputs for one grid point.

    Returns (values, status). Failed or undefined quantities are None and the
    status records the first applicable condition (non-converged beats
    kl-infinite beats eta2-undefined).
    """
    values = {o: None for o in outputs}
    try:
        ops = _cached_build(config)
        corners = limit_cycle(ops, config)
    except ConvergenceError:
        return values, "non-converged"
    status = "ok"
    w, qh, qc = unmeasured_thermo(corners, ops, config)
    base_vals = {"W": w, "Q_h": qh, "Q_c": qc}
    for name, val in base_vals.items():
        if name in values:
            values[name] = val
    if "regime_unmeasured" in outputs:
        values["regime_unmeasured"] = classify_regime(w, qh, qc)
    if "regime_dbn" in outputs:
        values["regime_dbn"] = classify_regime(
            *stats.closed_form_means("DBN", corners, ops, config)
        )
    if "regime_tpm" in outputs:
        values["regime_tpm"] = classify_regime(
            *stats.closed_form_means("TPM", corners, ops, config)
        )
    if "coherence_rho1" in outputs:
        values["coherence_rho1"] = rel_entropy_coherence(corners[0], ops.H_e_end)
    if "coherence_rho3" in outputs:
        values["coherence_rho3"] = rel_entropy_coherence(corners[2], ops.H_k_end)
    if "trace_distance_tpm" in outputs:
        avg = stats.avg_post_measurement_state("TPM", corners, ops, config)
        values["trace_distance_tpm"] = trace_distance(avg, corners[0])
    if "trace_distance_dbn" in outputs:
        avg = stats.avg_post_measurement_state("DBN", corners, ops, config)
        values["trace_distance_dbn"] = trace_distance(avg, corners[0])
    if "bound" in outputs:
        values["bound"] = (1.0 - config.T_c / config.T_h) ** 2

    if _JOINT_OUTPUTS & set(outputs):
        reports = {}
        dists = {}
        for scheme in ("TPM", "DBN"):
            reports[scheme] = stats.scheme_report(scheme, corners, ops, config)
            joint = (stats.tpm_joint if scheme == "TPM" else stats.dbn_joint)(
                corners, ops, config
            )
            dists[scheme] = stats.scheme_distributions(joint, config.merge_tol)
        for scheme, tag in (("TPM", "tpm"), ("DBN", "dbn")):
            r = reports[scheme]
            for name, val in (
                (f"mean_w_{tag}", r.mean_w), (f"var_w_{tag}", r.var_w),
                (f"mean_qh_{tag}", r.mean_qh), (f"var_qh_{tag}", r.var_qh),
                (f"mean_qc_{tag}", r.mean_qc), (f"var_qc_{tag}", r.var_qc),
            ):
                if name in values:
                    values[name] = val
        if "kl" in outputs:
            kl = kl_divergence(dists["DBN"][0], dists["TPM"][0])
            if math.isinf(kl):
                status = "kl-infinite"
            else:
                values["kl"] = kl
        for scheme, tag in (("TPM", "tpm"), ("DBN", "dbn")):
            name = f"eta2_{tag}"
            if name in outputs:
                fr = stats.fluctuation_ratio(reports[scheme], config)
                if fr.defined:
                    values[name] = fr.eta2
                elif status == "ok":
                    status = "eta2-undefined"
    return values, status


def _evaluate_cached(args):
    config, outputs, cache_dir = args
    if cache_dir is not None:
        path = os.path.join(cache_dir, point_cache_key(config, outputs) + ".json")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            return doc["values"], doc["status"]
    values, status = evaluate_point(config, outputs)
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = path + f".tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"values": values, "status": status}, fh)
        os.replace(tmp, path)
    return values, status


def resolve_cache_dir(cache_dir: str | None) -> str | None:
    """None defers to the environment; an empty string disables caching."""
    if cache_dir == "":
        return None
    if cache_dir is not None:
        return cache_dir
    return os.environ.get(CACHE_ENV_VAR) or None


def run_sweep(
    spec: SweepSpec, parallelism: int = 1, cache_dir: str | None = None
) -> list[SweepResult]:
    """Evaluate every grid point exactly once, in lexicographic index order."""
    cache_dir = resolve_cache_dir(cache_dir)
    shape = spec.grid_shape()
    indices = [tuple(ix) for ix in np.ndindex(*shape)] if shape else [()]
    tasks = [(spec.point_config(ix), spec.outputs, cache_dir) for ix in indices]
    if parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_evaluate_cached, tasks, chunksize=8))
    else:
        outcomes = [_evaluate_cached(t) for t in tasks]
    results = []
    for ix, (values, status) in zip(indices, outcomes):
        params = []
        for ax, i in zip(spec.axes, ix):
            params.append((ax.label, ax.values[i]))
        results.append(SweepResult(ix, tuple(params), values, status))
    return results


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def results_to_csv(spec: SweepSpec, results: list[SweepResult]) -> str:
    header = [ax.label for ax in spec.axes] + list(spec.outputs) + ["status"]
    lines = [",".join(header)]
    for r in results:
        row = [_fmt(v) for _, v in r.params]
        row += [_fmt(r.values[o]) for o in spec.outputs]
        row.append(r.status)
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def results_to_json(spec: SweepSpec, results: list[SweepResult]) -> str:
    doc = {
        "axes": [ax.label for ax in spec.axes],
        "outputs": list(spec.outputs),
        "rows": [
            {
                "index": list(r.index),
                "params": {k: v for k, v in r.params},
                "values": {o: r.values[o] for o in spec.outputs},
                "status": r.status,
            }
            for r in results
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------

# three-level cycle with strong drive and a large temperature gap
_COLD_BASE = dict(
    d=3, omega_h=10.0, omega_c=0.5, T_h=14.0, T_c=0.1,
    g=9.0, lambda_h=0.5, lambda_c=0.5, propagator_tol=1e-9,
)
# near-degenerate frequencies and temperatures, weak drive
_QUASISTATIC_BASE = dict(
    d=3, omega_h=1.0, omega_c=0.85, T_h=1.2, T_c=1.0,
    g=0.06, lambda_h=0.5, lambda_c=0.5, propagator_tol=1e-9,
)

FIGURE_NAMES = (
    "fig1", "fig2", "fig3a", "fig3b", "fig4", "figS2", "figS3", "figS4", "figS5"
)


def figure_spec(name: str, lambda_points: int = 50, g_points: int = 51) -> SweepSpec:
    """Built-in sweep preset behind each named report figure."""
    lam_axis = SweepAxis.build(
        "lambda_h,lambda_c",
        np.linspace(0.02, 1.0, lambda_points),
        label="lambda",
    )
    g_axis = SweepAxis.build("g", np.linspace(0.0, 10.0, g_points))
    cold = CycleConfig(**_COLD_BASE)
    quasi = CycleConfig(**_QUASISTATIC_BASE)
    presets = {
        "fig1": (cold, (lam_axis,), ("kl", "coherence_rho1", "coherence_rho3")),
        "fig2": (cold, (lam_axis,), ("trace_distance_tpm", "trace_distance_dbn")),
        "fig3a": (cold, (lam_axis, g_axis), ("regime_unmeasured", "regime_dbn")),
        "fig3b": (cold, (lam_axis, g_axis), ("regime_tpm",)),
        "fig4": (quasi, (lam_axis,), ("eta2_tpm", "eta2_dbn", "bound")),
        "figS2": (cold, (lam_axis, g_axis), ("kl", "coherence_rho1", "coherence_rho3")),
        "figS3": (cold, (lam_axis, g_axis), ("trace_distance_tpm",)),
        "figS4": (quasi, (lam_axis, g_axis), ("eta2_tpm", "eta2_dbn", "bound")),
        "figS5": (quasi, (lam_axis, g_axis), ("coherence_rho1", "coherence_rho3")),
    }
    if name not in presets:
        raise ValueError(f"unknown figure name {name!r}")
    base, axes, outputs = presets[name]
    return SweepSpec(base, axes, outputs)


def figure_data(
    name: str,
    parallelism: int = 1,
    cache_dir: str | None = None,
    lambda_points: int = 50,
    g_points: int = 51,
) -> tuple[SweepSpec, list[SweepResult]]:
    spec = figure_spec(name, lambda_points, g_points)
    return spec, run_sweep(spec, parallelism, cache_dir)

"""Command line entry point.

Runs a sweep (or a single point) described either by a bundled preset or by
a JSON config file, writes the result as CSV, JSON, or an SVG line plot, and
optionally runs the validation suite instead.  Identical config and seed
produce byte-identical output files.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(degenerate roots, truncation leak, zero-coupling closed form, ...).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import oracle
from .errors import ConfigError, KerrCavityError
from .model import DeformationFn, ModelParams, resolve_truncation
from .observables import branch_fields
from .solver import ClosedFormEvolution
from .sweep import (PRESET_IDS, ObservableRecord, SweepResult, SweepSpec,
                    _evaluate, figure_preset, run_sweep)
from .validation import sweep_closed_vs_rwa, validation_report

FORMATS = ("csv", "json", "svg")
ENGINE_FLAGS = {"closed": "closed_form", "rwa": "oracle_rwa",
                "full": "oracle_full", "both": "both"}
OUTPUT_ENV_VAR = "KERRCAVITY_OUT"


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _want(mapping, key, kind, path, default=None, required=False):
    if key not in mapping:
        if required:
            raise ConfigError("missing required field", f"{path}.{key}")
        return default
    value = mapping[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return int(value)
    if not isinstance(value, kind if isinstance(kind, type) else tuple(kind)):
        raise ConfigError(f"expected {getattr(kind, '__name__', kind)}, got {value!r}",
                          f"{path}.{key}")
    return value


def _parse_complex(value, path):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(value[0], value[1])
    raise ConfigError(f"expected a number or [re, im], got {value!r}", path)


def _parse_deformation(value, path):
    if value is None:
        return DeformationFn.linear()
    if isinstance(value, str):
        if value in ("linear", "sqrt"):
            return DeformationFn(kind=value)
        raise ConfigError(f"unknown deformation {value!r}", path)
    if isinstance(value, dict) and "custom" in value:
        return DeformationFn.custom(value["custom"])
    raise ConfigError("expected 'linear', 'sqrt', or {'custom': [...]}", path)


def _parse_params(block) -> ModelParams:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", "params")
    gamma = block.get("gamma", [1.0, 0.0, 0.0, 0.0])
    if not isinstance(gamma, list) or len(gamma) != 4:
        raise ConfigError("expected 4 entries", "params.gamma")
    gammas = [_parse_complex(g, f"params.gamma[{i}]") for i, g in enumerate(gamma)]
    params = ModelParams(
        lam=_want(block, "lambda", float, "params", default=1.0),
        epsilon=_want(block, "epsilon", float, "params", default=0.0),
        phi=_want(block, "phi", float, "params", default=0.0),
        delta=_want(block, "delta", float, "params", default=0.0),
        beta1=_want(block, "beta1", float, "params", default=0.0),
        beta2=_want(block, "beta2", float, "params", default=0.0),
        chi1=_want(block, "chi1", float, "params", default=0.0),
        chi2=_want(block, "chi2", float, "params", default=0.0),
        chi12=_want(block, "chi12", float, "params", default=0.0),
        alpha1=_parse_complex(block.get("alpha1", 1.0), "params.alpha1"),
        alpha2=_parse_complex(block.get("alpha2", 1.0), "params.alpha2"),
        gamma1=gammas[0], gamma2=gammas[1], gamma3=gammas[2], gamma4=gammas[3],
        deformation=_parse_deformation(block.get("deformation"), "params.deformation"),
        t4_convention=_want(block, "t4_convention", str, "params", default="corrected"),
    )
    return params.validate()


@dataclass
class RunConfig:
    """Resolved run description: model, truncation, sweep or single point,
    output settings, and the seed for the randomized validation draws."""

    spec: SweepSpec = None
    point: dict = None                 # {"t": float, "observables": (...), "engine": str}
    params: ModelParams = None
    trunc: object = None
    fmt: str = "csv"
    out: str = None
    seed: int = 0
    oracle_step: float = oracle.DEFAULT_STEP
    label: str = "run"


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "")
    params = _parse_params(data.get("params", {}))
    trunc_block = data.get("truncation", {})
    if not isinstance(trunc_block, dict):
        raise ConfigError("expected an object", "truncation")
    trunc = resolve_truncation(
        params,
        tail_eps=_want(trunc_block, "tail_eps", float, "truncation", default=1e-12),
        n_max=_want(trunc_block, "n_max", int, "truncation", default=None),
    )
    has_sweep = "sweep" in data
    has_point = "point" in data
    if has_sweep == has_point:
        raise ConfigError("exactly one of 'sweep' or 'point' must be present", "")
    oracle_step = _want(data, "oracle_step", float, "", default=oracle.DEFAULT_STEP)
    cfg = RunConfig(params=params, trunc=trunc,
                    seed=_want(data, "seed", int, "", default=0),
                    oracle_step=oracle_step)
    out_block = data.get("output", {})
    if not isinstance(out_block, dict):
        raise ConfigError("expected an object", "output")
    cfg.fmt = _want(out_block, "format", str, "output", default="csv")
    cfg.out = _want(out_block, "path", str, "output", default=None)
    if cfg.fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}", "output.format")

    if has_sweep:
        block = data["sweep"]
        if not isinstance(block, dict):
            raise ConfigError("expected an object", "sweep")
        rng = _want(block, "range", list, "sweep", required=True)
        if len(rng) != 2 or not all(isinstance(v, (int, float)) for v in rng):
            raise ConfigError("expected [min, max]", "sweep.range")
        names = _want(block, "observables", list, "sweep", required=True)
        engine = _want(block, "engine", str, "sweep", default="closed_form")
        engine = ENGINE_FLAGS.get(engine, engine)
        cfg.spec = SweepSpec(
            variable=_want(block, "variable", str, "sweep", required=True),
            start=float(rng[0]), stop=float(rng[1]),
            points=_want(block, "points", int, "sweep", required=True),
            params=params, trunc=trunc, observables=tuple(names),
            engine=engine,
            fixed_time=_want(block, "fixed_time", float, "sweep", default=1.0),
            oracle_step=oracle_step,
        ).validate()
    else:
        block = data["point"]
        if not isinstance(block, dict):
            raise ConfigError("expected an object", "point")
        names = _want(block, "observables", list, "point", required=True)
        engine = _want(block, "engine", str, "point", default="closed_form")
        cfg.point = {"t": _want(block, "t", float, "point", required=True),
                     "observables": tuple(names),
                     "engine": ENGINE_FLAGS.get(engine, engine)}
    return cfg


def config_from_file(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", path)
    cfg = config_from_dict(data)
    cfg.label = os.path.splitext(os.path.basename(path))[0]
    return cfg


def config_from_preset(preset_id) -> RunConfig:
    spec = figure_preset(preset_id)
    return RunConfig(spec=spec, params=spec.params, trunc=spec.trunc,
                     label=preset_id, oracle_step=spec.oracle_step)


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------

def _fmt12(v) -> str:
    """12 significant digits; enough to round-trip regression diffs without
    pinning last-bit noise."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.11e}"


def _record_row(record: ObservableRecord, names, both: bool):
    row = [_fmt12(record.x)]
    row += [_fmt12(record.values.get(n)) for n in names]
    if both:
        ov = record.oracle_values or {}
        dv = record.deltas or {}
        row += [_fmt12(ov.get(n)) for n in names]
        row += [_fmt12(dv.get(n)) for n in names]
    row.append(record.error or "")
    return row


def write_csv(result: SweepResult, path):
    names = list(result.spec.observables)
    both = result.spec.engine == "both"
    lines = [",".join(result.columns)]
    for rec in result.records:
        lines.append(",".join(_record_row(rec, names, both)))
    payload = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)


def write_json(result: SweepResult, path):
    names = list(result.spec.observables)
    both = result.spec.engine == "both"
    doc = {
        "columns": result.columns,
        "rows": [_record_row(rec, names, both) for rec in result.records],
        "summary": result.summary,
        "metadata": result.spec.metadata,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


SVG_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_escape(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def write_svg(result: SweepResult, path):
    """Deterministic line plot: one polyline per observable, labeled axes."""
    names = list(result.spec.observables)
    width, height = 900.0, 540.0
    left, right, top, bottom = 75.0, 25.0, 30.0, 55.0
    xs = np.array([r.x for r in result.records], dtype=float)
    series = {}
    for name in names:
        series[name] = np.array([r.values.get(name, math.nan) for r in result.records])
    finite = np.concatenate([v[np.isfinite(v)] for v in series.values()]) \
        if series else np.array([0.0])
    if finite.size == 0:
        finite = np.array([0.0, 1.0])
    ymin, ymax = float(finite.min()), float(finite.max())
    if ymax - ymin < 1e-300:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    xmin, xmax = float(xs.min()), float(xs.max())
    if xmax - xmin < 1e-300:
        xmin, xmax = xmin - 0.5, xmax + 0.5

    def xpix(x):
        return left + (x - xmin) / (xmax - xmin) * (width - left - right)

    def ypix(y):
        return height - bottom - (y - ymin) / (ymax - ymin) * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<rect x="0" y="0" width="{width:g}" height="{height:g}" fill="white"/>',
        f'<rect x="{left:.2f}" y="{top:.2f}" width="{width - left - right:.2f}" '
        f'height="{height - top - bottom:.2f}" fill="none" stroke="#333333"/>',
    ]
    for tick in np.linspace(xmin, xmax, 6):
        px = xpix(tick)
        parts.append(f'<line x1="{px:.2f}" y1="{height - bottom:.2f}" x2="{px:.2f}" '
                     f'y2="{height - bottom + 6:.2f}" stroke="#333333"/>')
        parts.append(f'<text x="{px:.2f}" y="{height - bottom + 20:.2f}" '
                     f'font-size="12" text-anchor="middle">{tick:.4g}</text>')
    for tick in np.linspace(ymin, ymax, 6):
        py = ypix(tick)
        parts.append(f'<line x1="{left - 6:.2f}" y1="{py:.2f}" x2="{left:.2f}" '
                     f'y2="{py:.2f}" stroke="#333333"/>')
        parts.append(f'<text x="{left - 10:.2f}" y="{py + 4:.2f}" font-size="12" '
                     f'text-anchor="end">{tick:.4g}</text>')
    xlabel = result.columns[0]
    parts.append(f'<text x="{(left + width - right) / 2:.2f}" y="{height - 12:.2f}" '
                 f'font-size="14" text-anchor="middle">{_svg_escape(xlabel)}</text>')
    parts.append(f'<text x="18" y="{(top + height - bottom) / 2:.2f}" font-size="14" '
                 f'text-anchor="middle" transform="rotate(-90 18 '
                 f'{(top + height - bottom) / 2:.2f})">value</text>')
    for k, name in enumerate(names):
        color = SVG_PALETTE[k % len(SVG_PALETTE)]
        ys = series[name]
        segments, current = [], []
        for x, y in zip(xs, ys):
            if math.isfinite(y):
                current.append(f"{xpix(x):.2f},{ypix(y):.2f}")
            elif current:
                segments.append(current)
                current = []
        if current:
            segments.append(current)
        for seg in segments:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                         f'points="{" ".join(seg)}"/>')
        ly = top + 16 + 16 * k
        parts.append(f'<line x1="{width - right - 150:.2f}" y1="{ly - 4:.2f}" '
                     f'x2="{width - right - 125:.2f}" y2="{ly - 4:.2f}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - right - 120:.2f}" y="{ly:.2f}" font-size="12">'
                     f'{_svg_escape(name)}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


WRITERS = {"csv": write_csv, "json": write_json, "svg": write_svg}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _point_result(cfg: RunConfig) -> SweepResult:
    """Degenerate single-point 'sweep' so every writer can serve it."""
    point = cfg.point
    spec = SweepSpec(variable="time", start=point["t"], stop=point["t"] + 1.0,
                     points=2, params=cfg.params, trunc=cfg.trunc,
                     observables=point["observables"], engine=point["engine"],
                     oracle_step=cfg.oracle_step)
    t = point["t"]
    from .model import field_weights
    weights = field_weights(cfg.params, cfg.trunc)
    engines = (["closed_form", "oracle_rwa"] if point["engine"] == "both"
               else [point["engine"]])
    values = {}
    for engine in engines:
        if engine == "closed_form":
            fields = branch_fields(
                ClosedFormEvolution(cfg.params, cfg.trunc).amplitudes(t), weights)
        elif engine == "oracle_rwa":
            traj = oracle.integrate_rwa(cfg.params, cfg.trunc,
                                        np.array([0.0, t]) if t > 0 else np.array([0.0]),
                                        step=cfg.oracle_step)
            fields = branch_fields(traj.amplitude_set(-1 if t > 0 else 0), weights)
        else:
            traj = oracle.integrate_full(cfg.params, cfg.trunc,
                                         np.array([0.0, t]) if t > 0 else np.array([0.0]),
                                         step=cfg.oracle_step)
            from .observables import state_fields
            fields = state_fields(traj.state(-1 if t > 0 else 0))
        values[engine] = _evaluate(point["observables"], fields, t)
    primary = values[engines[0]]
    rec = ObservableRecord(x=t, values=primary)
    columns = ["t"] + list(point["observables"])
    if point["engine"] == "both":
        rec.oracle_values = values["oracle_rwa"]
        rec.deltas = {k: abs(primary[k] - rec.oracle_values[k]) for k in primary}
        columns += [f"{n}_oracle" for n in point["observables"]]
        columns += [f"{n}_delta" for n in point["observables"]]
    columns.append("error")
    summary = {"points": 1, "failed_points": 0}
    if rec.deltas:
        summary["max_observable_delta"] = max(rec.deltas.values())
    return SweepResult(spec=spec, records=[rec], columns=columns, summary=summary)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kerrcavity",
        description="Sweep nonclassicality observables of two two-level atoms "
                    "coupled to a two-mode field in a Kerr medium.")
    parser.add_argument("--config", help="path to a JSON run configuration")
    parser.add_argument("--preset", help=f"bundled preset id, one of {', '.join(PRESET_IDS)}")
    parser.add_argument("--format", choices=FORMATS, default=None,
                        help="output format (default csv)")
    parser.add_argument("--out", default=None, help="output path")
    parser.add_argument("--validate", action="store_true",
                        help="run the invariant suite instead of the sweep")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for the randomized validation draws")
    parser.add_argument("--engine", choices=sorted(ENGINE_FLAGS), default=None,
                        help="override the evaluation engine")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if (args.config is None) == (args.preset is None):
            raise ConfigError("exactly one of --config or --preset is required", "cli")
        cfg = (config_from_preset(args.preset) if args.preset
               else config_from_file(args.config))
        if args.engine:
            engine = ENGINE_FLAGS[args.engine]
            if cfg.spec is not None:
                cfg.spec = replace(cfg.spec, engine=engine)
            if cfg.point is not None:
                cfg.point["engine"] = engine
        if args.seed is not None:
            cfg.seed = args.seed
        if args.format:
            cfg.fmt = args.format
        out = args.out or os.environ.get(OUTPUT_ENV_VAR) or cfg.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.validate:
            extra = {}
            if cfg.spec is not None:
                delta = sweep_closed_vs_rwa(cfg.spec)
                extra["closed_vs_rwa_amplitude_delta"] = delta
            report = validation_report(cfg.params, cfg.trunc, seed=cfg.seed,
                                       engine=(cfg.spec.engine if cfg.spec
                                               else cfg.point["engine"]))
            report.update(extra)
            report["label"] = cfg.label
            payload = json.dumps(report, indent=2, sort_keys=True)
            if out:
                with open(out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(payload + "\n")
            else:
                print(payload)
            failed = [c for c in report["checks"] if c["status"] == "fail"]
            line = (f"validate {cfg.label}: {report['status']} "
                    f"({len(report['checks'])} checks, {len(failed)} failed")
            if "closed_vs_rwa_amplitude_delta" in extra:
                line += f", max closed-vs-oracle delta {extra['closed_vs_rwa_amplitude_delta']:.3e}"
            print(line + ")")
            return 0 if report["status"] == "pass" else 3

        result = run_sweep(cfg.spec) if cfg.spec is not None else _point_result(cfg)
        out = out or f"{cfg.label}.{cfg.fmt}"
        WRITERS[cfg.fmt](result, out)
        line = f"{cfg.label}: {result.summary['points']} points -> {out}"
        if "max_observable_delta" in result.summary:
            line += f" (max oracle delta {result.summary['max_observable_delta']:.3e})"
        if result.summary.get("failed_points"):
            line += f" [{result.summary['failed_points']} failed points]"
        print(line)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KerrCavityError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

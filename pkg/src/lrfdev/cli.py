"""
Command-line experiment runner.

Every subcommand reads a JSON config (``--config``), runs one pipeline stage
and writes ``<mode>-<hash12>.csv`` plus ``<mode>-<hash12>.json`` into
``--out``.  Reports embed the config hash and seed; nothing is written when
the run fails.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 numeric-domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

from . import __version__
from .config import MODES, config_hash, load_config
from .davis_gut import (DavisGutSpec, davis_gut_classify, growth_slope, mc_flatness, psi_first_exceed,
                        write_davis_gut_csv)
from .deviations import large_prediction, moderate_prediction, uniform_prediction, validity_ranges
from .errors import ConfigError, LRFError, NegativeWeight, InvalidRegime
from .field import IndexRegion, aggregates, build_weights, coefficient_field_from_dict, weight_table_bytes
from .innovations import innovation_from_dict
from .montecarlo import ESTIMATE_COLUMNS, simulate_tail
from .regression import RegressionDesign, lil_envelope, regression_weight_grid, smoother_weight_table

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class Report:
    """Tabular result plus extra binary artifacts and a summary."""

    def __init__(self, columns, rows=(), summary=None, artifacts=None, failed=False):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.summary = summary or {}
        self.artifacts = artifacts or {}
        self.failed = failed

    def csv_text(self):
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(self.columns)
        for r in self.rows:
            out.writerow([_fmt(v) for v in r])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------

def _ctx(stage, fn, *args, **kwargs):
    """Run ``fn`` and prefix numeric-domain errors with the failing stage."""
    try:
        return fn(*args, **kwargs)
    except LRFError as exc:
        exc.args = (f"[{stage}] {exc}",)
        raise
    except ValueError as exc:
        raise ConfigError(f"[{stage}] {exc}") from None


def _regions(cfg):
    if "regions" in cfg:
        return [(r.get("label") or str(i), IndexRegion(tuple(tuple(x) for x in r["rectangles"]), r.get("label", "")))
                for i, r in enumerate(cfg["regions"])]
    return [(str(n), IndexRegion.square(n)) for n in cfg["n"]]


def _field(cfg):
    return _ctx("field-core.coefficient_field", coefficient_field_from_dict, cfg["field"])


def _model(cfg):
    return _ctx("innovations.model", innovation_from_dict, cfg["innovation"])


def _weights(cfg, field, region):
    kw = {} if field.finite else {"certify": cfg["certify"]}
    return _ctx("field-core.build_weights", build_weights, field, region, cfg["epsilon"], **kw)


def _exps(cfg):
    e = cfg["exponents"]
    return sorted({v for v in e.values()} | {2.0})


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def run_coeffs(cfg, workers):
    field = _field(cfg)
    exps = _exps(cfg)
    cols = ["n", "window_cells", "sigma2", "truncation_epsilon", "rho2"]
    for t in exps:
        cols += [f"D_{t:g}", f"U_{t:g}"]
    rows, artifacts = [], {}
    for label, region in _regions(cfg):
        w = _weights(cfg, field, region)
        agg = _ctx("field-core.aggregates", aggregates, w, exps)
        row = [label, w.n_cells, w.sigma2, w.truncation_epsilon, agg.rho2]
        for t in exps:
            row += [agg.D[t], agg.U[t]]
        rows.append(row)
        if cfg["output"]["weights"]:
            artifacts[f"n{label}.lrfw"] = w
    return Report(cols, rows, artifacts=artifacts)


def _predictions(cfg, w, model, x):
    """Moderate, large and uniform predictions at sigma-unit threshold ``x``."""
    e = cfg["exponents"]
    p = e["p"]
    agg = aggregates(w, _exps(cfg))
    out = {"moderate": None, "large": None, "uniform": None}
    try:
        out["moderate"] = moderate_prediction(x, agg, p)
    except InvalidRegime:
        pass
    if getattr(model, "tail", None) is not None:
        try:
            out["large"] = large_prediction(x * w.sigma, w, model, cfg["margin"])
            if 2 < p < e["t"] and x > 0:
                out["uniform"] = uniform_prediction(x, w, agg, model, p, cfg["margin"])
        except (NegativeWeight, InvalidRegime):
            pass
    return out


def run_predict(cfg, workers):
    field, model = _field(cfg), _model(cfg)
    cols = ["n", "x", "regime", "value", "gaussian_part", "heavy_part", "moderate_ok", "large_ok"]
    rows = []
    summary = {}
    for label, region in _regions(cfg):
        w = _weights(cfg, field, region)
        agg = _ctx("field-core.aggregates", aggregates, w, _exps(cfg))
        e = cfg["exponents"]
        if "t" in e:
            try:
                vr = validity_ranges(agg, e["p"], e["t"], cfg["margin"])
                summary[label] = {"x_moderate_max": vr.x_moderate_max, "x_large_min": vr.x_large_min,
                                  "gap": vr.gap}
            except InvalidRegime as exc:
                summary[label] = {"invalid_regime": str(exc)}
        for x in cfg["thresholds"]:
            preds = _ctx("deviation-theory.predict", _predictions, cfg, w, model, x)
            for regime in ("moderate", "large", "uniform"):
                d = preds[regime]
                if d is not None:
                    rows.append([label, x, regime, d.value, d.gaussian_part, d.heavy_part,
                                 d.moderate_ok, d.large_ok])
    return Report(cols, rows, summary)


def run_simulate(cfg, workers):
    field, model = _field(cfg), _model(cfg)
    rows = []
    for i, (label, region) in enumerate(_regions(cfg)):
        w = _weights(cfg, field, region)
        ests = _ctx("mc-engine.simulate_tail", simulate_tail, w, model, cfg["thresholds"], cfg["n_samples"],
                    cfg["seed"], cfg["two_sided"], workers, key_prefix=(i,))
        for e in ests:
            rows.append([label, e.x_sigma, e.x_abs, e.p_hat, e.stderr, e.n_samples, e.seed,
                         e.two_sided, e.p_hat_inflated])
    return Report(ESTIMATE_COLUMNS, rows)


VERIFY_COLUMNS = ["n", "x", "mc", "mc_stderr", "pred_moderate", "pred_large", "pred_uniform",
                  "moderate_ok", "large_ok", "ratio", "pass"]


def run_verify(cfg, workers):
    field, model = _field(cfg), _model(cfg)
    tol = cfg["tolerances"]
    rows, failed, checked = [], False, 0
    for i, (label, region) in enumerate(_regions(cfg)):
        w = _weights(cfg, field, region)
        ests = _ctx("mc-engine.simulate_tail", simulate_tail, w, model, cfg["thresholds"], cfg["n_samples"],
                    cfg["seed"], False, workers, key_prefix=(i,))
        for est in ests:
            x = est.x_sigma
            preds = _ctx("deviation-theory.predict", _predictions, cfg, w, model, x)
            mod, lar, uni = preds["moderate"], preds["large"], preds["uniform"]
            moderate_ok = bool(mod and mod.moderate_ok)
            large_ok = bool(lar and lar.large_ok)
            if large_ok:
                ref, valid = lar.value, True
            elif uni is not None:
                ref, valid = uni.value, moderate_ok
            elif mod is not None:
                ref, valid = mod.value, moderate_ok
            else:
                ref, valid = None, False
            ratio = est.p_hat / ref if ref else None
            verdict = None
            if ratio is not None and (valid or not tol["require_validity"]):
                verdict = tol["ratio_low"] <= ratio <= tol["ratio_high"]
                checked += 1
                failed |= not verdict
            rows.append([label, x, est.p_hat, est.stderr, mod and mod.value, lar and lar.value,
                         uni and uni.value, moderate_ok, large_ok, ratio, verdict])
    return Report(VERIFY_COLUMNS, rows, {"checked_rows": checked, "all_pass": not failed}, failed=failed)


def run_regression(cfg, workers):
    field = _field(cfg)
    rc = cfg["regression"]
    p = cfg["exponents"]["p"]
    cols = ["n", "sigma2", "rho2", f"U_{p:g}", "envelope_Unp", "envelope_loglog", "loglog_condition",
            "weight_sum"]
    rows, artifacts = [], {}
    for label, region in _regions(cfg):
        design = _ctx("applications.regression_design", RegressionDesign, region, rc["kernel"],
                      rc["bandwidth"], tuple(rc["eval_point"]), rc["dim"])
        grid = _ctx("applications.regression_weights", regression_weight_grid, design)
        kw = {} if field.finite else {"certify": cfg["certify"]}
        w = _ctx("applications.smoother_weight_table", smoother_weight_table, design, field, cfg["epsilon"], **kw)
        agg = aggregates(w, [p])
        env = _ctx("applications.lil_envelope", lil_envelope, agg, p)
        n_eff = region.cardinality ** 0.5
        ll = lil_envelope(agg, p, mode="loglog", n=n_eff) if n_eff >= 3 else None
        rows.append([label, w.sigma2, agg.rho2, agg.U[p], env.value, ll and ll.value,
                     ll and ll.condition_ok, float(grid.sum())])
        if cfg["output"]["weights"]:
            artifacts[f"n{label}.lrfw"] = w
    return Report(cols, rows)


def run_davis_gut(cfg, workers):
    dg = cfg["davis_gut"]
    spec = _ctx("applications.davis_gut_spec", DavisGutSpec, dg["weight"], dg["r"], dg.get("c", 0.0),
                dg["epsilon"], dg["b"])
    cls = _ctx("applications.davis_gut_classify", davis_gut_classify, spec, dg.get("corollary"))
    slope = growth_slope(spec, psi_max=dg["psi_max"])
    summary = {"m": psi_first_exceed(spec), "converges": cls.converges, "reason": cls.reason,
               "growth_slope": slope, "growth_agrees": (slope < 0) == cls.converges}
    mc_probs = {}
    if dg["mc"]:
        ns = [n for n in dg["ns"] if n >= summary["m"]]
        kw = {} if _field(cfg).finite else {"certify": cfg["certify"]}
        res = _ctx("applications.mc_flatness", mc_flatness, spec, _field(cfg), ns, _model(cfg),
                   cfg["n_samples"], cfg["seed"], cfg["epsilon"], workers, **kw)
        mc_probs = dict(zip(ns, res.mc_prob))
        summary["flatness_slope"] = res.slope
    buf = io.StringIO()
    write_davis_gut_csv(buf, spec, dg["ns"], mc_probs)
    lines = list(csv.reader(io.StringIO(buf.getvalue())))
    return Report(lines[0], lines[1:], summary)


RUNNERS = {"coeffs": run_coeffs, "predict": run_predict, "simulate": run_simulate, "verify": run_verify,
           "regression": run_regression, "davis-gut": run_davis_gut}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _atomic_write(path, data):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(report, cfg, out_dir):
    """Write CSV, JSON and any weight tables; returns the written paths."""
    h = config_hash(cfg)
    stem = f"{cfg['mode']}-{h[:12]}"
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "config": cfg,
        "config_hash": h,
        "seed": cfg["seed"],
        "mode": cfg["mode"],
        "version": __version__,
        "columns": report.columns,
        "rows": [[_jsonable(v) for v in r] for r in report.rows],
        "summary": report.summary,
    }
    payloads = {f"{stem}.csv": report.csv_text().encode(),
                f"{stem}.json": (json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n").encode()}
    for name, w in report.artifacts.items():
        payloads[f"{stem}-{name}"] = weight_table_bytes(w)
    written = []
    for name, data in payloads.items():
        path = os.path.join(out_dir, name)
        _atomic_write(path, data)
        written.append(path)
    return written


def run(cfg, out_dir, workers=None):
    """Run one configured experiment; returns ``(exit_code, written_paths)``."""
    report = RUNNERS[cfg["mode"]](cfg, workers)
    paths = emit_report(report, cfg, out_dir)
    return (EXIT_VERIFY if report.failed else EXIT_OK), paths


def build_parser():
    parser = argparse.ArgumentParser(prog="lrfdev", description="Tail deviations of linear random fields.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} stage")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None,
                       help="Monte Carlo threads (default: $LRFDEV_WORKERS or 1); never changes results")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, mode=args.command)
        if cfg["mode"] != args.command:
            raise ConfigError(f"config mode {cfg['mode']!r} does not match subcommand {args.command!r}")
        code, paths = run(cfg, args.out, args.workers)
    except ConfigError as exc:
        print(f"lrfdev: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LRFError, ValueError, ArithmeticError) as exc:
        print(f"lrfdev: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"lrfdev: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    if code == EXIT_VERIFY:
        print("lrfdev: verification failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

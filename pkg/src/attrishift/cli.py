"""``attrishift`` command line.

Every run writes JSON/CSV outputs that embed the toolkit version, a hash of
the resolved configuration and the seed. Nothing depends on wall-clock time,
so re-running a configuration reproduces its outputs byte for byte.

Exit codes: 0 success, 2 validation error, 3 numeric failure. Errors are
printed to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .attribution import explain_dataset
from .dataset import load_csv, split_three_way, write_csv
from .detectors import (
    POWER_MU_GRID,
    baseline_suite,
    dp_inspect,
    et_inspect,
    explain_drivers,
    power_study,
    shift_detect,
)
from .errors import AttriShiftError, DomainError
from .models import ModelSpec, fit
from .synthgen import KINDS as SCENARIOS
from .synthgen import ScenarioSpec, generate
from .uncertainty import METHODS as MONITOR_METHODS
from .uncertainty import monitor_deterioration

COMMANDS = ("audit", "shift", "monitor", "power", "synth", "shap")
_NOT_CONFIG = {"out", "json_only", "command"}


# ---------------------------------------------------------------- plumbing


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def resolve_config(args: argparse.Namespace) -> dict:
    """Every setting that influences the outputs, inputs identified by content."""
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG and v is not None}
    cfg["command"] = args.command
    for key in ("input", "new"):
        if key in cfg:
            cfg[f"{key}_sha256"] = _sha256_file(cfg[key])
            cfg[key] = Path(cfg[key]).name
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


class Run:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = resolve_config(args)
        self.hash = config_hash(self.config)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def provenance(self) -> dict:
        return {"toolkit": "attrishift", "version": __version__, "config_hash": self.hash, "seed": self.args.seed}

    @property
    def comment(self) -> str:
        return f"attrishift {__version__} config_hash={self.hash} seed={self.args.seed}"

    def path(self, name: str) -> Path:
        return self.out / name

    def write_json(self, name: str, body: dict) -> dict:
        doc = {**self.provenance, "config": self.config, **body}
        text = json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
        target = self.path(name)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(target)
        return doc


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    return o


def _require_file(path: Optional[str], flag: str) -> str:
    if path is None:
        raise DomainError(f"{flag} is required")
    if not Path(path).is_file():
        raise DomainError(f"{flag}: no such file {path!r}")
    return path


# ---------------------------------------------------------------- commands


def cmd_synth(run: Run) -> dict:
    a = run.args
    params = {"kind": a.scenario, "n": a.n, "seed": a.seed}
    for key in ("gamma", "rho", "mu", "q", "case", "target_kind", "feature"):
        v = getattr(a, key, None)
        if v is not None:
            params["target" if key == "target_kind" else key] = v
    spec = ScenarioSpec(**params)
    sc = generate(spec)
    write_csv(sc.train, run.path("train.csv"), comment=run.comment)
    write_csv(sc.new, run.path("new.csv"), comment=run.comment)
    return run.write_json("manifest.json", {"scenario": spec.to_dict(), "files": ["train.csv", "new.csv"]})


def cmd_shap(run: Run) -> dict:
    a = run.args
    d = load_csv(_require_file(a.input, "--input"), target=a.target, protected=a.protected)
    m = fit(ModelSpec.parse(a.model), d)
    method = "lime" if a.method == "lime" else "shap_auto"
    e = explain_dataset(m, d, method=method, seed=a.seed)
    e.to_csv(run.path("explanations.csv"), comment=run.comment, meta=run.provenance)
    return run.write_json("shap.json", {"method": e.method, "base_value": e.base_value, "rows": e.n, "files": ["explanations.csv"]})


def _inspector(a) -> Optional[ModelSpec]:
    return ModelSpec.parse(a.inspector) if a.inspector else None


def cmd_audit(run: Run) -> dict:
    a = run.args
    if not a.protected:
        raise DomainError("--protected is required for audit")
    d = load_csv(_require_file(a.input, "--input"), target=a.target, protected=a.protected)
    d_tr, d_val, d_te = split_three_way(d, seed=a.seed)
    f = fit(ModelSpec.parse(a.model), d_tr)
    et = et_inspect(f, d_val, d_te, _inspector(a), a.seed)
    if et.inspector.is_linear and a.drivers > 0:
        et = et.with_distances(explain_drivers(et, n_bootstrap=a.drivers, seed=a.seed))
    dp = dp_inspect(f, d_val, d_te, _inspector(a), a.seed)
    return run.write_json("audit.json", {"et": et.to_dict(), "dp": dp.to_dict()})


def cmd_shift(run: Run) -> dict:
    a = run.args
    d = load_csv(_require_file(a.input, "--input"), target=a.target)
    d_new = load_csv(_require_file(a.new, "--new"), target=a.target if a.target else None)
    if d_new.feature_names != d.feature_names:
        d_new = d_new.select(d.feature_names)
    d_tr, d_val, _ = split_three_way(d, (0.5, 0.5, 0.0), seed=a.seed)
    f = fit(ModelSpec.parse(a.model), d_tr)
    report = shift_detect(f, d_val, d_new, _inspector(a), a.seed)
    board = baseline_suite(f, d_val, d_new, a.seed, _inspector(a))
    return run.write_json("shift.json", {"explanation_shift": report.to_dict(), "scoreboard": board.to_dict()})


def cmd_monitor(run: Run) -> dict:
    a = run.args
    d = load_csv(_require_file(a.input, "--input"), target=a.target)
    feature = a.feature or d.feature_names[0]
    curve = monitor_deterioration(ModelSpec.parse(a.model), d, feature, a.windows, a.method, a.seed, a.standardize)
    curve.to_csv(run.path("curve.csv"), comment=run.comment)
    return run.write_json("monitor.json", {**curve.summary(), "files": ["curve.csv"]})


def cmd_power(run: Run) -> dict:
    a = run.args
    mus = (a.mu,) if a.mu is not None else POWER_MU_GRID
    points = power_study(mus, (0.5, 0.2), a.runs, a.n_power, a.seed)
    rows = [p.to_dict() for p in points]
    lines = [f"# {run.comment}", "mu,q,runs,bm_auc_power,accuracy_power,asymptotic_auc_power"]
    lines += [f"{r['mu']!r},{r['q']!r},{r['runs']},{r['bm_auc_power']!r},{r['accuracy_power']!r},{r['asymptotic_auc_power']!r}" for r in rows]
    target = run.path("power.csv")
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(target)
    return run.write_json("power.json", {"points": rows, "files": ["power.csv"]})


HANDLERS = {"audit": cmd_audit, "shift": cmd_shift, "monitor": cmd_monitor, "power": cmd_power, "synth": cmd_synth, "shap": cmd_shap}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="attrishift", description="Explanation-based fairness auditing and shift monitoring.")
    p.add_argument("--version", action="version", version=f"attrishift {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        sp.add_argument("--seed", type=int, required=True, help="master seed (required)")
        sp.add_argument("--out", required=True, help="output directory (created if absent)")
        sp.add_argument("--json-only", action="store_true", help="print only the JSON report on stdout")
        if model:
            sp.add_argument("--input", help="CSV with a header row")
            sp.add_argument("--target", help="target column")
            sp.add_argument("--model", default="gbdt", help="model spec, e.g. 'gbdt:n_trees=50' or 'ols'")

    sp = sub.add_parser("audit", help="equal-treatment and demographic-parity inspectors")
    common(sp)
    sp.add_argument("--protected", help="binary protected column")
    sp.add_argument("--inspector", help="inspector model spec (default logistic)")
    sp.add_argument("--drivers", type=int, default=0, help="bootstrap rounds for driver distances (0 = skip)")

    sp = sub.add_parser("shift", help="explanation-shift detector and baseline scoreboard")
    common(sp)
    sp.add_argument("--new", help="CSV of new data with the same feature columns")
    sp.add_argument("--inspector", help="inspector model spec (default logistic)")

    sp = sub.add_parser("monitor", help="sorted-thirds deterioration curve")
    common(sp)
    sp.add_argument("--feature", help="column to sort by (default: first feature)")
    sp.add_argument("--windows", type=int, default=50, help="rolling window size")
    sp.add_argument("--method", choices=MONITOR_METHODS, default="doubt")
    sp.add_argument("--standardize", choices=("all", "train"), default="all")

    sp = sub.add_parser("power", help="power of the three independence tests")
    common(sp, model=False)
    sp.add_argument("--mu", type=float, help="single mean offset (default: the full grid)")
    sp.add_argument("--runs", type=int, default=200)
    sp.add_argument("--n", dest="n_power", type=int, default=200, help="rows per run")

    sp = sub.add_parser("synth", help="generate a synthetic scenario")
    common(sp, model=False)
    sp.add_argument("--scenario", choices=SCENARIOS, required=True)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--q", type=float)
    sp.add_argument("--case", choices=("indirect", "uninformative"))
    sp.add_argument("--target-kind", dest="target_kind", choices=("bernoulli", "regression"))
    sp.add_argument("--feature", type=int, choices=(1, 2, 3))

    sp = sub.add_parser("shap", help="attribution matrix of a fitted model")
    common(sp)
    sp.add_argument("--protected", help="column to drop from the features")
    sp.add_argument("--method", choices=("shap", "lime"), default="shap")
    return p


def _fail(exc: Exception, code: int, kind: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit_code": code}, sort_keys=True) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run = Run(args)
        doc = HANDLERS[args.command](run)
    except AttriShiftError as exc:
        return _fail(exc, exc.exit_code, exc.kind)
    except OSError as exc:
        return _fail(exc, 2, "io")
    if args.json_only:
        sys.stdout.write(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(f"attrishift {args.command}: wrote {run.out} (config {run.hash})\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

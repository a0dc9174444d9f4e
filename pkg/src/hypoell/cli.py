"""Command-line entry point.

Exit codes: 0 pass, 1 mathematical failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fbi_probe, fixtures, model_parametrix as mp, spectral_geometry as sg, weights as wt

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

PARAMETRIX_VARIANTS = {
    "standard": "eta + I*y",
    "wrong-sign": "eta - I*y",
    "elliptic": "1",
}
DEFAULT_PARAMETRIX_LAMBDAS = (1e2, 1e3, 1e4, 1e5)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    spec: str | None
    lambdas: tuple | None
    modes: int | None
    tol: float
    out: Path | None
    seed: int

    def __post_init__(self):
        if self.tol <= 0:
            raise UsageError("--tol must be positive")
        if self.modes is not None and self.modes <= 0:
            raise UsageError("--modes must be positive")
        if self.lambdas is not None and any(not (v > 0) for v in self.lambdas):
            raise UsageError("--lambdas must be positive")


# ---------------------------------------------------------------------------
# output helpers

def _dumps(doc) -> str:
    return json.dumps(_clean(doc), allow_nan=False, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    return str(o)


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _write(cfg: RunConfig, name: str, text: str) -> None:
    if cfg.out is None:
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / name).write_text(text, encoding="utf-8")


def _csv(header: Sequence[str], rows) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load_spec(ref: str) -> sg.OperatorSpec:
    p = Path(ref)
    if p.is_file():
        return sg.OperatorSpec.load(p)
    if ref in fixtures.FIXTURES:
        return fixtures.load_fixture(ref)
    raise UsageError(f"--spec {ref!r} is neither a file nor one of {sorted(fixtures.FIXTURES)}")


def _stem(ref: str) -> str:
    return Path(ref).stem


# ---------------------------------------------------------------------------
# subcommands

def cmd_check(cfg: RunConfig, args) -> int:
    if not cfg.spec:
        raise UsageError("check needs --spec")
    spec = _load_spec(cfg.spec)
    rep = sg.check_hypotheses(spec, tol=cfg.tol)
    table = rep.format_table()
    print(table)
    stem = _stem(cfg.spec)
    _write(cfg, f"check_{stem}.json", _dumps(rep.to_json()))
    _write(cfg, f"check_{stem}.txt", table + "\n")
    return EXIT_OK if rep.all_pass else EXIT_FAIL


def _parametrix_model(cfg: RunConfig, args) -> mp.LocalizedModel:
    if cfg.spec:
        if args.variant != "standard":
            raise UsageError("--variant applies to the built-in harmonic model; drop --spec")
        return mp.LocalizedModel.from_spec(_load_spec(cfg.spec), args.ray)
    return mp.LocalizedModel.harmonic(args.nu, args.omega, PARAMETRIX_VARIANTS[args.variant])


def cmd_parametrix(cfg: RunConfig, args) -> int:
    model = _parametrix_model(cfg, args)
    lam = cfg.lambdas or DEFAULT_PARAMETRIX_LAMBDAS
    basis = model.basis(cfg.modes, cfg.modes) if cfg.modes else model.basis()
    runs = {}
    if args.variant != "elliptic":
        runs["residual"] = mp.residual_scaling(model, lam, basis)
    runs["apriori"] = mp.apriori_scaling(model, lam, basis)
    doc = {"model": model.label, "variant": args.variant, "basis": [basis.n_modes_t, basis.n_modes_y],
           "lambdas": list(map(float, lam)), "experiments": {k: v.summary() for k, v in runs.items()}}
    rows = [(k, *r) for k, v in runs.items() for r in v.csv_rows()]
    _write(cfg, "parametrix.json", _dumps(doc))
    _write(cfg, "parametrix.csv", _csv(["experiment", "lambda", "quantity", "value"], rows))
    for k, v in runs.items():
        print(f"{k:<9} slope {v.fitted_slope:+.4f} (expected {v.expected_slope:+.2f} +/- {v.tolerance}) "
              f"r2 {v.r2:.4f}  {v.verdict}" + (f"  [{'; '.join(v.reasons)}]" if v.reasons else ""))
    return EXIT_OK if all(v.verdict == "pass" for v in runs.values()) else EXIT_FAIL


def _parse_point(text: str, ndim: int):
    try:
        xs, xis = text.split(":")
        x0 = tuple(float(v) for v in xs.split(","))
        xi0 = tuple(float(v) for v in xis.split(","))
    except ValueError:
        raise UsageError(f"bad probe point {text!r}; use 'x0:xi0' with comma-separated components") from None
    if len(x0) != ndim or len(xi0) != ndim:
        raise UsageError(f"probe point {text!r} needs {ndim} components per side")
    return (x0[0], xi0[0]) if ndim == 1 else (x0, xi0)


def cmd_probe(cfg: RunConfig, args) -> int:
    try:
        u = fbi_probe.builtin(args.function)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.points:
        points = [_parse_point(p, u.ndim) for p in args.points.split(";") if p.strip()]
    elif u.ndim == 1:
        points = list(fbi_probe.STANDARD_POINTS)
    else:
        points = [((0.0, 0.0), (0.0, 1.0))]
    lam = cfg.lambdas or fbi_probe.DEFAULT_LAMBDAS
    verdicts, rows = [], []
    for p in points:
        v = fbi_probe.wavefront_probe(u, p, lam, margin=args.margin)
        verdicts.append(v)
        rows += v.sample.csv_rows()
        s = f" s_est={v.s_est:.3f}" if v.s_est is not None else ""
        print(f"{args.function} at {p}: {v.kind}{s}")
    doc = {"function": args.function, "lambdas": list(map(float, lam)), "margin": args.margin,
           "verdicts": [_clean(v.to_json()) for v in verdicts]}
    _write(cfg, "probe.json", _dumps(doc))
    _write(cfg, "probe.csv", _csv(["x0", "xi0", "lambda", "abs_weighted", "phase"], rows))
    return EXIT_OK


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _finite(obj)


def cmd_weights(cfg: RunConfig, args) -> int:
    spec = _load_spec(cfg.spec or "heisenberg_example")
    center = None
    if args.center:
        try:
            xs, xis = args.center.split(":")
            center = ([float(v) for v in xs.split(",")], [float(v) for v in xis.split(",")])
        except ValueError:
            raise UsageError("--center expects 'x0_1,...:xi0_1,...'") from None
    field = wt.DeformationField.standard(spec.dims, center, C=args.C)
    grid = wt.default_grid(field)
    tang = wt.tangency_check(field, [spec.sigma1, spec.sigma2], tol=1e-12, seed=cfg.seed)
    doc = {"spec": spec.name, "t": args.t, "C": args.C, "center": {"x0": field.center[0], "xi0": field.center[1]},
           "tangency": tang.to_json(), "comparability": list(field.comparability)}
    try:
        w = wt.evolve_weight(field, args.t, grid)
    except wt.CausticError as exc:
        doc["error"] = str(exc)
        doc["largest_safe_t"] = exc.safe_t
        _write(cfg, "weights.json", _dumps(doc))
        print(f"caustic: {exc}", file=sys.stderr)
        return EXIT_FAIL
    gap = wt.weight_gap_report(w)
    doc["gaps"] = _clean(gap.to_json())
    doc["graph_defect"] = w.graph_defect
    _write(cfg, "weights.json", _dumps(doc))
    _write(cfg, "weights.csv", w.to_csv())
    print(f"t={args.t:g}  alpha1={gap.alpha1:.6g}  sup gap on ball={gap.sup_gap_omega4:.6g}  "
          f"min gap={gap.min_gap:.3g}  tangency max={max(tang.violations):.3g}")
    ok = gap.min_gap >= -1e-12 and tang.ok and (args.t == 0 or gap.alpha1 > 0)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_demo(cfg: RunConfig, args) -> int:
    """Run every fixture plus one of each experiment; pass when every outcome matches its expectation."""
    outcomes = []
    for name in sorted(fixtures.FIXTURES):
        rep = sg.check_hypotheses(fixtures.load_fixture(name), tol=cfg.tol)
        print(rep.format_table(), end="\n\n")
        _write(cfg, f"check_{name}.json", _dumps(rep.to_json()))
        outcomes.append((f"check {name}", rep.all_pass == (name == "heisenberg_example")))
    model = mp.LocalizedModel.harmonic(1, 1)
    lam = cfg.lambdas or DEFAULT_PARAMETRIX_LAMBDAS
    res = mp.residual_scaling(model, lam)
    apr = mp.apriori_scaling(model, lam)
    _write(cfg, "parametrix.json", _dumps({"residual": res.summary(), "apriori": apr.summary()}))
    outcomes.append(("parametrix residual", res.verdict == "pass"))
    outcomes.append(("parametrix apriori", apr.verdict == "pass"))
    probes = [("gaussian", (0.5, 1.0), "analytic"), ("abs", (0.0, 1.0), "not_decaying"),
              ("gevrey:s=2", ((0.0, 0.0), (0.0, 1.0)), "gevrey")]
    pdoc = []
    for fname, point, want in probes:
        v = fbi_probe.wavefront_probe(fbi_probe.builtin(fname), point)
        pdoc.append(dict(_clean(v.to_json()), function=fname))
        outcomes.append((f"probe {fname}", v.kind == want))
    _write(cfg, "probe.json", _dumps({"verdicts": pdoc}))
    spec = fixtures.load_fixture("heisenberg_example")
    field = wt.DeformationField.standard(spec.dims)
    gap = wt.weight_gap_report(wt.evolve_weight(field, 0.05))
    _write(cfg, "weights.json", _dumps(_clean(gap.to_json())))
    outcomes.append(("weights", gap.alpha1 > 0 and gap.min_gap >= -1e-12))
    for label, ok in outcomes:
        print(f"{'ok  ' if ok else 'FAIL'} {label}")
    return EXIT_OK if all(ok for _, ok in outcomes) else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="operator spec JSON file or fixture name")
    common.add_argument("--lambdas", type=_parse_floats, help="comma-separated lambda sweep")
    common.add_argument("--modes", type=int, help="Hermite modes per direction")
    common.add_argument("--tol", type=float, default=1e-9, help="structural tolerance (default 1e-9)")
    common.add_argument("--out", type=Path, help="directory for JSON/CSV reports")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized sampling")

    p = argparse.ArgumentParser(prog="hypoell", description="Hypoellipticity toolkit for operators with double characteristics.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("check", parents=[common], help="check hypotheses H1-H3 for a spec")

    pp = sub.add_parser("parametrix", parents=[common], help="model parametrix scaling experiments")
    pp.add_argument("--variant", choices=sorted(PARAMETRIX_VARIANTS), default="standard")
    pp.add_argument("--nu", type=int, default=1)
    pp.add_argument("--omega", type=float, default=1.0)
    pp.add_argument("--ray", type=int, default=0, help="fiber ray index when --spec is given")

    pr = sub.add_parser("probe", parents=[common], help="FBI wavefront probe of a built-in function")
    pr.add_argument("--function", default="gaussian", help="gaussian, abs, heaviside or gevrey:s=<val>")
    pr.add_argument("--points", help="';'-separated points 'x0:xi0' (components comma-separated)")
    pr.add_argument("--margin", type=float, default=4.0)

    pw = sub.add_parser("weights", parents=[common], help="Hamilton-Jacobi weight deformation")
    pw.add_argument("--t", type=float, default=0.05, help="deformation time")
    pw.add_argument("--C", type=float, default=1.0, help="transversal weight constant")
    pw.add_argument("--center", help="'x0_1,...:xi0_1,...' (default: sigma = 1)")

    sub.add_parser("demo", parents=[common], help="run all fixtures and one of each experiment")
    return p


COMMANDS = {"check": cmd_check, "parametrix": cmd_parametrix, "probe": cmd_probe,
            "weights": cmd_weights, "demo": cmd_demo}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = RunConfig(args.subcommand, args.spec, args.lambdas, args.modes, args.tol, args.out, args.seed)
        if args.subcommand == "weights" and args.t < 0:
            raise UsageError("--t must be nonnegative")
        return COMMANDS[args.subcommand](cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

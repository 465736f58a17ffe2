"""``specdim`` command line front-end.

Subcommands::

    specdim analyze-measure  --spec measure.json --q 0.5,2 --out DIR
    specdim analyze-operator --spec operator.json --q 2 --out DIR
    specdim dynamics         --spec operator.json --t-min 1 --t-max 100 --p 1,2 --out DIR
    specdim verify

Exit codes: 0 ok, 1 verification failure, 2 bad input, 3 numeric failure.
Nothing is written to ``--out`` unless the whole run succeeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import dimension as dim
from . import dynamics as dyn
from . import measure as msr
from . import operator as op
from ._parallel import ENV_THREADS, thread_count
from .errors import InvalidArgumentError, NumericError

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
VERSION = "0.1.0"

DEFAULTS = {
    "q": [2.0],
    "kind": "correlation",
    "eps_max": 0.25,
    "levels": 24,
    "ratio": 0.5,
    "window": None,
    "nodes": msr.DEFAULT_NODES,
    "t_min": None,
    "t_max": None,
    "t_points": 64,
    "t_window": None,
    "p": [],
    "atoms": 4096,
    "guarneri": False,
    "vector": None,
    "seed": 0,
    "format": "csv",
    "plot": False,
}


class BadInput(Exception):
    """Raised for anything that should map to exit code 2."""


# -- parsing ----------------------------------------------------------------------

def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _index_pair(text):
    try:
        lo, hi = text.split(":")
        return [int(lo), int(hi)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO:HI grid indices, got {text!r}") from exc


def _float_pair(text):
    try:
        lo, hi = text.split(":")
        return [float(lo), float(hi)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected T_LO:T_HI, got {text!r}") from exc


def _add_common(p):
    p.add_argument("--spec", required=True, help="JSON measure or operator spec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default=DEFAULTS["format"])
    p.add_argument("--seed", type=int, default=DEFAULTS["seed"],
                   help="recorded in the summary; all algorithms are deterministic")
    p.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    p.add_argument("--print-config", action="store_true",
                   help="print the effective configuration and exit")


def _add_grid(p):
    p.add_argument("--q", type=_float_list, default=DEFAULTS["q"], help="e.g. 0.5,2,3")
    p.add_argument("--kind", choices=dim.KINDS, default=DEFAULTS["kind"])
    p.add_argument("--eps-max", type=float, default=DEFAULTS["eps_max"])
    p.add_argument("--levels", type=int, default=DEFAULTS["levels"])
    p.add_argument("--ratio", type=float, default=DEFAULTS["ratio"])
    p.add_argument("--window", type=_index_pair, default=DEFAULTS["window"],
                   help="LO:HI grid indices (default drops coarsest 25%% and finest 12.5%%)")
    p.add_argument("--nodes", type=int, default=DEFAULTS["nodes"])


def build_parser():
    parser = argparse.ArgumentParser(prog="specdim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"specdim {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-measure", help="dimension estimates of a measure spec")
    _add_common(p)
    _add_grid(p)

    p = sub.add_parser("analyze-operator", help="spectral measure of a Jacobi matrix and its dimensions")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--vector", default=DEFAULTS["vector"],
                   help="delta:SITE (overrides the vector in the input file; default delta:1)")

    p = sub.add_parser("dynamics", help="return probability and moment growth")
    _add_common(p)
    p.add_argument("--t-min", type=float, default=DEFAULTS["t_min"])
    p.add_argument("--t-max", type=float, default=DEFAULTS["t_max"])
    p.add_argument("--t-points", type=int, default=DEFAULTS["t_points"])
    p.add_argument("--t-window", type=_float_pair, default=DEFAULTS["t_window"],
                   help="T_LO:T_HI fit window")
    p.add_argument("--p", type=_float_list, default=DEFAULTS["p"], help="moment orders, e.g. 1,2")
    p.add_argument("--vector", default=DEFAULTS["vector"])
    p.add_argument("--atoms", type=int, default=DEFAULTS["atoms"],
                   help="atoms used to discretize a non-atomic measure spec")
    p.add_argument("--guarneri", action="store_true",
                   help="also compare moment exponents with D(1/(1+p))")

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")], default=None,
                   help="comma-separated criterion numbers")
    p.add_argument("--out", default=None, help="optional path for a JSON report")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def config_from_args(args):
    keys = ["command", "spec", "out", "format", "seed", "plot"]
    if args.command in ("analyze-measure", "analyze-operator"):
        keys += ["q", "kind", "eps_max", "levels", "ratio", "window", "nodes"]
    if args.command in ("analyze-operator", "dynamics"):
        keys += ["vector"]
    if args.command == "dynamics":
        keys += ["t_min", "t_max", "t_points", "t_window", "p", "atoms", "guarneri"]
    cfg = {k: getattr(args, k) for k in keys}
    if cfg.get("window") is None and "levels" in cfg:
        try:
            cfg["window"] = list(dim.EpsilonGrid(cfg["eps_max"], cfg["levels"], cfg["ratio"])
                                 .default_window())
        except InvalidArgumentError as exc:
            raise BadInput(str(exc)) from exc
    return cfg


# -- validation and loading -------------------------------------------------------

def _schema(name):
    text = resources.files("specdim").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _validate(instance, name):
    validator = jsonschema.Draft202012Validator(_schema(name))
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  at /{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors[:10]]
        raise BadInput(f"{name} validation failed:\n" + "\n".join(lines))


def validate_config(cfg):
    _validate({k: v for k, v in cfg.items() if v is not None or k == "vector"}, "config")
    if cfg["command"] == "dynamics":
        if cfg["t_min"] is None or cfg["t_max"] is None:
            raise BadInput("dynamics needs a time grid: pass --t-min and --t-max")
    if cfg.get("q") and any(q == 1.0 for q in cfg["q"]):
        raise BadInput("q = 1 is not supported")
    if cfg["plot"]:
        try:
            import matplotlib  # noqa: F401
        except ImportError as exc:
            raise BadInput("--plot needs matplotlib (pip install artifact[plot])") from exc


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise BadInput(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise BadInput(f"malformed JSON in {path}: {exc}") from exc


def _vector(J, cfg, spec):
    text = cfg.get("vector")
    if text is None:
        return op.vector_from_spec(J, spec.get("vector", {"vector": "delta", "site": 1}))
    kind, _, site = text.partition(":")
    if kind != "delta":
        raise BadInput(f"--vector must look like delta:SITE, got {text!r}")
    try:
        return op.delta(J, int(site) if site else 1)
    except ValueError as exc:
        raise BadInput(f"bad site in --vector {text!r}") from exc


def _grid(cfg):
    return dim.EpsilonGrid(cfg["eps_max"], cfg["levels"], cfg["ratio"])


# -- output -----------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def table(header, rows, fmt):
    if fmt == "json":
        return dumps([dict(zip(header, r)) for r in rows])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class Outputs:
    """Staged files, written only once every computation has succeeded."""

    def __init__(self, out_dir, fmt):
        self.out_dir = out_dir
        self.fmt = fmt
        self.files = {}
        self.figures = []

    def add_table(self, stem, header, rows):
        self.files[f"{stem}.{self.fmt}"] = table(header, rows, self.fmt)

    def add_json(self, name, obj):
        self.files[name] = dumps(obj)

    def add_figure(self, fn, *args):
        self.figures.append((fn, args))

    def write(self):
        os.makedirs(self.out_dir, exist_ok=True)
        written = []
        for name, text in self.files.items():
            path = os.path.join(self.out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
        for fn, (obj, name, title) in self.figures:
            written.append(fn(obj, os.path.join(self.out_dir, name), title))
        return written


def _summary_base(cfg):
    return {
        "specdim_version": VERSION,
        "config": cfg,
        "environment": {ENV_THREADS: thread_count()},
        "warnings": [],
    }


def _warn(summary, text):
    summary["warnings"].append(text)
    print(f"warning: {text}", file=sys.stderr)


def _estimates(m, cfg, summary):
    grid = _grid(cfg)
    window = tuple(cfg["window"])
    ests = [dim.estimate_dimensions(m, q, grid, cfg["kind"], window, cfg["nodes"])
            for q in cfg["q"]]
    for e in ests:
        for flag in e.flags:
            _warn(summary, f"q={e.q:g}: {flag}")
    summary["estimates"] = [e.summary() for e in ests]
    return ests


# -- commands ---------------------------------------------------------------------

def cmd_analyze_measure(cfg):
    spec = load_json(cfg["spec"])
    _validate(spec, "measure")
    m = msr.from_spec(spec)
    summary = _summary_base(cfg)
    summary["measure"] = {"spec": spec, "total": float(m.total),
                          "support": list(msr.support_interval(m))}
    ests = _estimates(m, cfg, summary)
    out = Outputs(cfg["out"], cfg["format"])
    out.add_table("dimensions", ["q", "kind", "eps", "I", "local_slope", "endpoint_slope"],
                  [r for e in ests for r in e.rows()])
    out.add_json("summary.json", summary)
    if cfg["plot"]:
        from . import plotting
        out.add_figure(plotting.plot_dimension_estimate, ests, "dimensions.png", spec["type"])
    return out


def _operator_setup(cfg, spec, summary):
    _validate(spec, "operator")
    J = op.from_spec(spec)
    psi = _vector(J, cfg, spec)
    ed = op.eigendecompose(J)
    summary["operator"] = {
        "spec": spec,
        "N": J.N,
        "offset": J.offset,
        "operator_hash": J.digest(),
        "residual": ed.residual(J),
        "gram_error": ed.gram_error(),
        "mean_level_spacing": ed.level_spacing(),
    }
    return J, psi, ed


def cmd_analyze_operator(cfg):
    spec = load_json(cfg["spec"])
    summary = _summary_base(cfg)
    J, psi, ed = _operator_setup(cfg, spec, summary)
    sm = op.spectral_measure(J, psi, ed, label=spec["builder"])
    summary["spectral_measure"] = {"atoms": sm.size, "total": float(sm.total)}
    floor = _grid(cfg).floor(tuple(cfg["window"]))
    flag = op.spacing_flag(ed, floor)
    if flag:
        _warn(summary, flag)
    ests = _estimates(sm, cfg, summary)
    out = Outputs(cfg["out"], cfg["format"])
    out.add_table("spectral_measure", ["lambda", "weight"],
                  list(zip(sm.atoms.tolist(), sm.weights.tolist())))
    out.add_json("spectral_measure_spec.json", sm.to_spec())
    out.add_table("dimensions", ["q", "kind", "eps", "I", "local_slope", "endpoint_slope"],
                  [r for e in ests for r in e.rows()])
    out.add_json("summary.json", summary)
    if cfg["plot"]:
        from . import plotting
        out.add_figure(plotting.plot_spectral_measure, sm, "spectral_measure.png", spec["builder"])
        out.add_figure(plotting.plot_dimension_estimate, ests, "dimensions.png", spec["builder"])
    return out


def cmd_dynamics(cfg):
    spec = load_json(cfg["spec"])
    summary = _summary_base(cfg)
    grid = dyn.TimeGrid(cfg["t_min"], cfg["t_max"], cfg["t_points"])
    window = tuple(cfg["t_window"]) if cfg["t_window"] else None
    out = Outputs(cfg["out"], cfg["format"])
    results = []
    if isinstance(spec, dict) and "builder" in spec:
        J, psi, ed = _operator_setup(cfg, spec, summary)
        norm = float(np.linalg.norm(psi))
        if norm == 0:
            raise BadInput("vector is zero")
        psi = psi / norm
        sm = op.spectral_measure(J, psi, ed)
    else:
        if cfg["p"] or cfg["guarneri"]:
            raise BadInput("--p and --guarneri need an operator spec")
        _validate(spec, "measure")
        m = msr.from_spec(spec)
        if not isinstance(m, msr.AtomicMeasure):
            m = msr.atomic_discretization(m, cfg["atoms"])
            summary["discretized_atoms"] = cfg["atoms"]
        if abs(m.total - 1.0) > 1e-10:
            _warn(summary, f"measure total {m.total!r} rescaled to 1")
        sm = m.normalized()
        J = None
    ret = dyn.return_dynamics(sm, grid, window)
    results.append(ret)
    out.add_table("return_probability", ["t", "gamma_avg"], ret.rows())
    summary["return_probability"] = ret.summary()
    if J is not None and cfg["p"]:
        A = dyn.time_averaged_distribution(J, psi, grid.times, ed)
        summary["moments"] = []
        for p in cfg["p"]:
            res = dyn.moment_dynamics(J, psi, p, grid, window, decomposition=ed, distribution=A)
            results.append(res)
            out.add_table(f"moment_p{p:g}", ["t", "r_p"], res.rows())
            summary["moments"].append(res.summary())
        if cfg["guarneri"]:
            rep = dyn.check_guarneri(J, psi, cfg["p"], grid, window=window)
            out.add_json("guarneri.json", rep)
            summary["guarneri_violations"] = rep["violations"]
            for e in rep["entries"]:
                if e["violation"]:
                    _warn(summary, f"p={e['p']:g}: beta below D(1/(1+p)) at finite scale "
                                   f"(slack {e['slack_minus']:.3f}, {e['slack_plus']:.3f})")
    out.add_json("summary.json", summary)
    if cfg["plot"]:
        from . import plotting
        out.add_figure(plotting.plot_dynamics, results, "dynamics.png", None)
    return out


def cmd_verify(args):
    from . import acceptance
    results = acceptance.run_all(args.tolerance_scale, args.only)
    print(acceptance.format_table(results))
    failed = [r for r in results if not r.passed]
    if args.out:
        report = [{"criterion": r.criterion, "name": r.name, "passed": r.passed,
                   "detail": r.detail, "values": r.values} for r in results]
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(dumps(report))
    if failed:
        print("failed checks:", file=sys.stderr)
        for r in failed:
            print(f"  C{r.criterion} {r.name}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "analyze-measure": cmd_analyze_measure,
    "analyze-operator": cmd_analyze_operator,
    "dynamics": cmd_dynamics,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    if args.command == "verify":
        return cmd_verify(args)
    try:
        cfg = config_from_args(args)
        validate_config(cfg)
        if args.print_config:
            sys.stdout.write(dumps(cfg))
            return EXIT_OK
        out = COMMANDS[args.command](cfg)
    except (BadInput, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in out.write():
        print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

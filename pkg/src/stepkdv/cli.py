"""Command-line front end: configuration, orchestration, structured output.

Subcommands: scatter | solve | convergence | validate.  Exit codes:
0 = success, 1 = numerical failure, 2 = configuration error.  CSV output
uses fixed 17-significant-digit decimal formatting so identical run
configurations reproduce bit-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance
from . import potentials as pot
from . import scattering as sc
from .hankelop import OperatorError
from .potentials import TailExtrapolationError
from .scattering import ScatteringError
from .solver import SolverOptions, _engine, truncation_sweep, SolverError
from .symbolgen import SymbolError


class ConfigError(ValueError):
    pass


def _fmt(v):
    return f"{float(v):.16e}"


def _load_config(path):
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError:
        import yaml
        try:
            cfg = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return cfg


def _grid_from(cfg, key, flag_value):
    """Grid spec: explicit list, or {start, stop, step|num}."""
    if flag_value is not None:
        return np.asarray([float(v) for v in flag_value], dtype=float)
    spec = cfg.get(key)
    if spec is None:
        raise ConfigError(f"missing grid {key!r}")
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    if "step" in spec:
        return np.arange(spec["start"], spec["stop"] + 0.5 * spec["step"],
                         spec["step"])
    return np.linspace(spec["start"], spec["stop"], int(spec["num"]))


def _solver_options(cfg, args):
    kw = {}
    for key in ("n_nodes", "s_max", "tol", "path", "a", "h0", "x_far",
                "k_max", "ppw", "check_doubling", "spectrum", "workers"):
        if key in cfg:
            kw[key] = cfg[key]
    if args.tol is not None:
        kw["tol"] = args.tol
    if args.workers is not None:
        kw["workers"] = args.workers
    elif "workers" not in kw:
        kw["workers"] = int(os.environ.get("STEPKDV_WORKERS", "0"))
    try:
        return SolverOptions(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _potential(cfg):
    spec = cfg.get("potential")
    if spec is None:
        raise ConfigError("config needs a 'potential' section")
    try:
        return pot.from_config(spec)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"bad potential spec: {e}") from e


def _outdir(args):
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out, name, payload):
    payload = dict(payload)
    payload["version"] = __version__
    path = out / f"{name}.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True,
                               default=_json_default) + "\n")
    return path


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    raise TypeError(f"not JSON serializable: {type(v)}")


def cmd_solve(args):
    cfg = _load_config(args.config)
    q = _potential(cfg)
    xs = _grid_from(cfg, "x", None)
    ts = _grid_from(cfg, "t", args.t)
    opts = _solver_options(cfg, args)
    out = _outdir(args)
    eng = _engine(q, xs, ts, opts)
    field = eng.grid(xs, ts)
    prov = {(p["x"], p["t"]): p for p in field.provenance if "u" in p}
    csv_path = out / "solution.csv"
    with open(csv_path, "w") as f:
        f.write("x,t,u,det,min_eig\n")
        for i, t in enumerate(field.ts):
            for j, x in enumerate(field.xs):
                p = prov.get((float(x), float(t)), {})
                f.write(",".join([_fmt(x), _fmt(t), _fmt(field.u[i, j]),
                                  _fmt(p.get("det", np.nan)),
                                  _fmt(p.get("min_eig", np.nan))]) + "\n")
    _manifest(out, "solve_manifest", {
        "config": cfg, "auto_tuned": eng.meta,
        "grid": {"nx": int(xs.size), "nt": int(ts.size)},
        "outputs": {"csv": csv_path.name},
    })
    return 0


def cmd_scatter(args):
    cfg = _load_config(args.config)
    q = _potential(cfg)
    ks = _grid_from(cfg, "k", args.k)
    a = cfg.get("a")
    a = float(a) if a is not None else sc.choose_a(q)
    tol = args.tol if args.tol is not None else cfg.get("tol", sc.DEFAULT_RTOL)
    out = _outdir(args)
    sd = sc.half_line_scattering(q, a, np.abs(ks[ks != 0.0]), tol=tol)
    A = sc.analytic_part_many(q, a, ks.astype(complex), tol=tol,
                              x_far=cfg.get("x_far"))
    if q.left_tail_decaying:
        lo = q.support_hint[0]
        a_left = (float(lo) if np.isfinite(lo) else -20.0) - 8.0
        bs = sc.bound_states(q, min(a_left, a))
    else:
        bs = []
    csv_path = out / "scattering.csv"
    with open(csv_path, "w") as f:
        f.write("k,R0_re,R0_im,A_re,A_im\n")
        kmap = dict(zip(sd.k_grid, sd.R0))
        for k, Ak in zip(ks, A):
            R0 = kmap.get(abs(k), complex("nan"))
            if k < 0:
                R0 = np.conj(R0)
            f.write(",".join([_fmt(k), _fmt(R0.real), _fmt(R0.imag),
                              _fmt(Ak.real), _fmt(Ak.imag)]) + "\n")
    _manifest(out, "scatter_manifest", {
        "config": cfg, "a": a, "tol": tol,
        "bound_states": [{"kappa": k, "c": c} for k, c in bs],
        "outputs": {"csv": csv_path.name},
    })
    return 0


def cmd_convergence(args):
    cfg = _load_config(args.config)
    q = _potential(cfg)
    bs = cfg.get("bs", args.bs)
    if bs is None:
        raise ConfigError("convergence needs 'bs' (truncation points)")
    x = float(cfg.get("x", 0.0))
    t = float(cfg.get("t", 1.0))
    opts = _solver_options(cfg, args)
    out = _outdir(args)
    sweep = truncation_sweep(q, [float(b) for b in bs], x, t, opts)
    csv_path = out / "convergence.csv"
    with open(csv_path, "w") as f:
        f.write("b,u,diff\n")
        for row in sweep["rows"]:
            d = row["diff"]
            f.write(",".join([_fmt(row["b"]), _fmt(row["u"]),
                              "" if d is None else _fmt(d)]) + "\n")
    _manifest(out, "convergence_manifest", {
        "config": cfg, "x": x, "t": t,
        "monotone": sweep["monotone"], "flag": sweep["flag"],
        "extrapolated": sweep["extrapolated"],
        "outputs": {"csv": csv_path.name},
    })
    return 0 if sweep["monotone"] else 1


def cmd_validate(args):
    if args.suite not in acceptance.SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; "
                          f"choose from {sorted(acceptance.SUITES)}")
    ids = acceptance.SUITES[args.suite]
    if args.checks:
        ids = [int(c) for c in args.checks.split(",")]
        bad = [i for i in ids if i not in acceptance.SUITES["all"]]
        if bad:
            raise ConfigError(f"unknown check ids {bad}")
    out = _outdir(args)
    report = acceptance.run_all(ids, verbose=True)
    slim = {"all_passed": report["all_passed"],
            "checks": [{k: v for k, v in r.items() if k != "provenance"}
                       for r in report["checks"]]}
    _manifest(out, "validate_report", slim)
    return 0 if report["all_passed"] else 1


def build_parser():
    p = argparse.ArgumentParser(
        prog="stepkdv",
        description="KdV Cauchy solver for step-type data via Hankel-operator "
                    "Fredholm determinants")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="JSON/YAML run configuration")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--workers", type=int, default=None,
                        help="grid worker cap (default $STEPKDV_WORKERS or 0)")

    sp = sub.add_parser("solve", help="solve u(x,t) on a grid")
    common(sp)
    sp.add_argument("--t", nargs="+", default=None,
                    help="override t values from the config")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("scatter", help="scattering data and analytic part")
    common(sp)
    sp.add_argument("--k", nargs="+", default=None)
    sp.set_defaults(func=cmd_scatter)

    sp = sub.add_parser("convergence", help="truncation convergence sweep")
    common(sp)
    sp.add_argument("--bs", nargs="+", default=None)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("validate", help="run the acceptance suite")
    common(sp, config_required=False)
    sp.add_argument("--suite", default="all",
                    help=f"one of {sorted(acceptance.SUITES)}")
    sp.add_argument("--checks", default=None,
                    help="comma-separated check ids, overrides --suite")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (SolverError, ScatteringError, SymbolError, OperatorError,
            TailExtrapolationError, ValueError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

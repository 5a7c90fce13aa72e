"""Command line interface.

Subcommands:
  run          integrate one experiment; writes trace.csv and report.json
  bounds       compute the bound report only; writes bounds.json
  check        vet the structure conditions of the nonlinearity; check.json
  convergence  manufactured-solution refinement study; convergence.json
  sweep        run one experiment per parameter value; sweep.csv + per-point dirs

Exit codes for run (and per sweep point): 0 completed, 2 blow-up detected,
3 step size underflow, 4 overflow.  Configuration and usage problems exit 1.
All outputs are deterministic for a fixed config and seed: no timestamps,
no machine identifiers, floats rendered via repr round-trip.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 has no tomllib
    import tomli as tomllib

import numpy as np

from scipy.integrate import quad

from . import bounds as bounds_mod
from . import functionals, mesh
from . import nonlinearity as nl_mod
from .errors import (ConfigurationError, DegenerateDataError,
                     PreconditionError, SdwaveError)
from .exprparse import boundary_compatibility, evaluate, parse as parse_expr, sample
from .functionals import CSV_COLUMNS, concavity_check
from .integrator import SolverConfig, outcome_to_dict, run
from .verification import convergence_study

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_DT_UNDERFLOW = 3
EXIT_OVERFLOW = 4

_OUTCOME_EXIT = {
    "completed": EXIT_OK,
    "blowup_detected": EXIT_BLOWUP,
    "dt_underflow": EXIT_DT_UNDERFLOW,
    "overflow": EXIT_OVERFLOW,
}

_RESERVED_NAMES = {"x", "y", "t", "s", "pi", "sin", "cos", "exp", "log",
                   "abs", "sqrt"}

_TOP_SECTIONS = {"seed", "domain", "nonlinearity", "initial", "source",
                 "solver", "output", "bounds", "check", "sweep", "convergence"}

_SOLVER_KEYS = {"t_end", "dt0", "dt_min", "dt_max", "adapt_target",
                "blowup_threshold", "record_every"}


# ---------------------------------------------------------------- config

def load_config(path):
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"bad TOML in {path}: {exc}") from None
    unknown = set(cfg) - _TOP_SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return cfg


def _table(cfg, name):
    t = cfg.get(name)
    if t is None:
        raise ConfigurationError(f"missing [{name}] section")
    if not isinstance(t, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    return t


def domain_from_config(cfg):
    d = _table(cfg, "domain")
    if "cells" not in d:
        raise ConfigurationError("[domain] needs cells")
    return mesh.build_domain(
        int(d.get("dimension", 1)),
        d.get("lengths", 1.0),
        d["cells"],
    )


def _expr_callable(text, key):
    e = parse_expr(str(text), variables=("s",))

    def fn(s):
        with np.errstate(all="ignore"):
            out = evaluate(e, s=np.asarray(s, dtype=np.float64))
        return np.asarray(out, dtype=np.float64)

    fn.expression = str(text)
    fn.key = key
    return fn


def _custom_nonlinearity(t):
    for key in ("f", "F", "p", "alpha", "beta", "q", "k0", "k1", "l1"):
        if key not in t:
            raise ConfigurationError(f"custom nonlinearity needs [nonlinearity] {key}")
    f = _expr_callable(t["f"], "f")
    F = _expr_callable(t["F"], "F")
    if "fprime" in t:
        fprime = _expr_callable(t["fprime"], "fprime")
        fprime_note = "given"
    else:
        def fprime(s):
            s = np.asarray(s, dtype=np.float64)
            h = 1e-6 * (1.0 + np.abs(s))
            return (f(s + h) - f(s - h)) / (2.0 * h)
        fprime_note = "central difference of f"
    # F must actually be the antiderivative of f vanishing at 0
    for s0 in (-3.0, -1.0, -0.4, 0.4, 1.0, 3.0):
        val, _ = quad(lambda z: float(f(z)), 0.0, s0, limit=200)
        claimed = float(F(s0))
        if not math.isfinite(claimed) or abs(claimed - val) > 1e-6 * (1.0 + abs(val)):
            raise ConfigurationError(
                f"F is not the antiderivative of f: at s={s0} integral of f "
                f"is {val!r} but F gives {claimed!r}"
            )
    return nl_mod.from_callables(
        str(t.get("name", "custom")), f, F, fprime,
        p=float(t["p"]), alpha=float(t["alpha"]), beta=float(t["beta"]),
        q=float(t["q"]), k0=float(t["k0"]), k1=float(t["k1"]),
        l1=float(t["l1"]),
        note=f"constants from config; derivative: {fprime_note}",
    )


def nonlinearity_from_config(cfg):
    t = _table(cfg, "nonlinearity")
    kind = t.get("kind")
    if kind == "power":
        if "p" not in t:
            raise ConfigurationError("[nonlinearity] power needs p")
        return nl_mod.power(float(t["p"]))
    if kind == "logpower":
        if "p" not in t:
            raise ConfigurationError("[nonlinearity] logpower needs p")
        q = float(t["q"]) if "q" in t else None
        return nl_mod.logpower(float(t["p"]), q)
    if kind == "zero":
        return nl_mod.zero(float(t.get("p", 4.0)))
    if kind == "custom":
        return _custom_nonlinearity(t)
    raise ConfigurationError(
        f"[nonlinearity] kind must be power, logpower, zero, or custom; got {kind!r}"
    )


def initial_from_config(cfg, domain, bindings=None):
    t = _table(cfg, "initial")
    if "u0" not in t or "v0" not in t:
        raise ConfigurationError("[initial] needs u0 and v0 expressions")
    extra = tuple(bindings or ())
    names = ("x", "y") + extra
    u0e = parse_expr(str(t["u0"]), variables=names)
    v0e = parse_expr(str(t["v0"]), variables=names)
    u0 = sample(u0e, domain, bindings)
    v0 = sample(v0e, domain, bindings)
    bc = {
        "u0": boundary_compatibility(u0e, domain, bindings),
        "v0": boundary_compatibility(v0e, domain, bindings),
    }
    return u0, v0, bc


def source_from_config(cfg, bindings=None):
    t = cfg.get("source")
    if not t:
        return None
    g = t.get("g")
    if g in (None, ""):
        return None
    extra = tuple(bindings or ())
    return parse_expr(str(g), variables=("x", "y", "t") + extra)


def solver_from_config(cfg, source=None, source_bindings=None):
    t = _table(cfg, "solver")
    unknown = set(t) - _SOLVER_KEYS
    if unknown:
        raise ConfigurationError(f"unknown [solver] keys: {sorted(unknown)}")
    if "t_end" not in t:
        raise ConfigurationError("[solver] needs t_end")
    kwargs = {k: float(t[k]) for k in _SOLVER_KEYS - {"record_every"} if k in t}
    if "record_every" in t:
        kwargs["record_every"] = int(t["record_every"])
    return SolverConfig(source=source, source_bindings=source_bindings, **kwargs)


def resolve_seed(args, cfg):
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def resolve_out(args, cfg):
    if args.out:
        return Path(args.out)
    env = os.environ.get("SDWAVE_OUT")
    if env:
        return Path(env)
    out = cfg.get("output", {})
    return Path(out.get("dir", "out"))


# ---------------------------------------------------------------- output

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def write_trace_csv(trace, path):
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    cols = [trace.column(c) for c in CSV_COLUMNS]
    for i in range(len(trace)):
        buf.write(",".join(repr(float(col[i])) for col in cols) + "\n")
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------- payloads

def _criterion_payload(c):
    return {
        "satisfied": c.satisfied,
        "in_unstable_set": c.in_unstable_set,
        "margin": c.margin,
        "K0": c.K0,
        "E0": c.E0,
        "I0": c.I0,
        "lambda1": c.lambda1,
        "factor": c.factor,
    }


def _variant_payload(v):
    out = {"name": v.name, "applicable": v.applicable, "reason": v.reason}
    if v.applicable:
        out.update({"T": v.T, "lam": v.lam, "b": v.b, "eta": v.eta, "a": v.a})
    return out


def bounds_payload(u0, v0, nl, want_upper=True, want_lower=True, seed=0):
    crit = bounds_mod.criterion_high_energy(u0, v0, nl)
    out = {"criterion": _criterion_payload(crit), "upper": None, "lower": None}
    if want_upper:
        try:
            rep = bounds_mod.upper_bound(u0, v0, nl)
            out["upper"] = {
                "T_upper": rep.T_upper,
                "variant_used": rep.variant_used,
                "margin_variant": _variant_payload(rep.margin_variant),
                "negative_energy_variant": _variant_payload(rep.negative_energy_variant),
            }
        except PreconditionError as exc:
            out["upper"] = {"T_upper": None, "reason": str(exc)}
    if want_lower:
        try:
            rep = bounds_mod.lower_bound(u0, v0, nl, seed=seed)
            emb = rep.envelope.embed
            out["lower"] = {
                "T_lower": rep.T_lower,
                "M0": rep.M0,
                "C4": rep.envelope.C4,
                "C5": rep.envelope.C5,
                "q": rep.envelope.q,
                "embedding": {
                    "r": emb.r,
                    "value": emb.value,
                    "certified": emb.certified,
                    "note": emb.note,
                },
                "method": rep.method,
                "tail_bound": rep.tail_bound,
                "derivation": rep.envelope.note,
            }
        except (DegenerateDataError, ConfigurationError) as exc:
            out["lower"] = {"T_lower": None, "reason": str(exc)}
    return out


def _concavity_payload(trace, upper_payload):
    if not upper_payload or upper_payload.get("T_upper") is None:
        return {"evaluated": False, "reason": "no applicable upper bound"}
    name = upper_payload["variant_used"]
    var = upper_payload["margin_variant" if name == "margin"
                        else "negative_energy_variant"]
    t_last = trace.last("t")
    if var["T"] < t_last:
        return {"evaluated": False,
                "reason": f"run reached t={t_last!r} beyond the horizon {var['T']!r}"}
    rep = concavity_check(trace, var["lam"], var["b"], var["eta"], var["T"])
    return {
        "evaluated": True,
        "variant": name,
        "min_defect": rep.min_defect,
        "argmin_t": rep.argmin_t,
        "min_G": rep.min_G,
        "max_scale": rep.max_scale,
        "n_rows": rep.n_rows,
    }


def _monitor_payload(trace):
    tq, tm = trace.t_threshold_Q, trace.t_threshold_M
    consistent = None
    if tq is not None and tm is not None and tq > 0.0:
        consistent = bool(abs(tm - tq) <= 0.01 * tq)
    return {"t_threshold_Q": tq, "t_threshold_M": tm,
            "consistent_within_1pct": consistent}


def execute_run(cfg, out_dir, seed=0, quiet=True, bindings=None):
    """Full run pipeline; returns (exit_code, summary_dict)."""
    domain = domain_from_config(cfg)
    nl = nonlinearity_from_config(cfg)
    u0, v0, bc = initial_from_config(cfg, domain, bindings)
    source = source_from_config(cfg, bindings)
    solver = solver_from_config(cfg, source, bindings)
    if not quiet:
        for key, eps in bc.items():
            if eps > 1e-8:
                print(f"warning: {key} is {eps:.3g} on the boundary; "
                      f"Dirichlet data expects 0", file=sys.stderr)
    trace, outcome = run(solver, u0, v0, nl)

    bounds_cfg = cfg.get("bounds", {})
    breport = bounds_payload(
        u0, v0, nl,
        want_upper=bool(bounds_cfg.get("upper", True)),
        want_lower=bool(bounds_cfg.get("lower", True)),
        seed=seed,
    )
    odict = outcome_to_dict(outcome)
    sandwich = None
    t_upper = (breport.get("upper") or {}).get("T_upper")
    t_lower = (breport.get("lower") or {}).get("T_lower")
    if odict["kind"] == "blowup_detected" and t_upper is not None and t_lower is not None:
        T_est = odict["T_extrapolated"]
        sandwich = {
            "T_lower": t_lower,
            "T_extrapolated": T_est,
            "T_upper": t_upper,
            "satisfied": bool(t_lower <= T_est <= t_upper),
        }
    report = {
        "config": cfg,
        "seed": seed,
        "bindings": dict(bindings) if bindings else None,
        "boundary_compatibility": bc,
        "outcome": odict,
        "exit_code": _OUTCOME_EXIT[odict["kind"]],
        "functionals": {
            "E0": trace.E0,
            "rows": len(trace),
            "t_final": trace.last("t"),
            "final_row": trace.row(-1),
        },
        "bounds": breport,
        "sandwich": sandwich,
        "concavity": _concavity_payload(trace, breport.get("upper")),
        "blowup_monitor": _monitor_payload(trace),
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out_dir / "trace.csv")
    write_json(report, out_dir / "report.json")
    code = _OUTCOME_EXIT[odict["kind"]]
    summary = {
        "status": odict["kind"],
        "E0": trace.E0,
        "I0": trace.row(0)["I"],
        "margin": breport["criterion"]["margin"],
        "t_stop": odict.get("t_stop", odict.get("t_end")),
        "T_extrapolated": odict.get("T_extrapolated"),
        "quality": odict.get("extrapolation_quality"),
        "T_upper": t_upper,
        "T_lower": t_lower,
        "sandwich_ok": sandwich["satisfied"] if sandwich else None,
        "error": None,
    }
    if not quiet:
        print(f"outcome: {odict['kind']} at t={summary['t_stop']!r} "
              f"({len(trace)} rows)", file=sys.stderr)
    return code, summary


# ---------------------------------------------------------------- commands

def cmd_run(args):
    cfg = load_config(args.config)
    code, _ = execute_run(cfg, resolve_out(args, cfg), resolve_seed(args, cfg),
                          quiet=args.quiet)
    return code


def cmd_bounds(args):
    cfg = load_config(args.config)
    domain = domain_from_config(cfg)
    nl = nonlinearity_from_config(cfg)
    u0, v0, bc = initial_from_config(cfg, domain)
    bounds_cfg = cfg.get("bounds", {})
    payload = bounds_payload(
        u0, v0, nl,
        want_upper=bool(bounds_cfg.get("upper", True)),
        want_lower=bool(bounds_cfg.get("lower", True)),
        seed=resolve_seed(args, cfg),
    )
    payload = {"config": cfg, "boundary_compatibility": bc, **payload}
    out_dir = resolve_out(args, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(payload, out_dir / "bounds.json")
    if not args.quiet:
        up = (payload.get("upper") or {}).get("T_upper")
        lo = (payload.get("lower") or {}).get("T_lower")
        print(f"T_lower={lo!r} T_upper={up!r}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args):
    cfg = load_config(args.config)
    nl = nonlinearity_from_config(cfg)
    t = cfg.get("check", {})
    s_max = float(t.get("s_max", 100.0))
    n_samples = int(t.get("n_samples", 10000))
    reports = nl_mod.check_all(nl, s_max=s_max, n_samples=n_samples)
    payload = {
        "nonlinearity": nl.name,
        "constants": {
            "p": nl.p, "alpha": nl.alpha, "beta": nl.beta, "q": nl.q,
            "k0": nl.k0, "k1": nl.k1, "l1": nl.l1,
            "note": nl.constants_note,
        },
        "checks": [
            {
                "condition": r.condition,
                "passed": r.passed,
                "worst_residual": r.worst_residual,
                "worst_s": r.worst_s,
                "n_samples": r.n_samples,
                "s_max": r.s_max,
                "note": r.note,
            }
            for r in reports
        ],
        "all_passed": all(r.passed for r in reports),
    }
    out_dir = resolve_out(args, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(payload, out_dir / "check.json")
    if not args.quiet:
        for r in reports:
            word = "pass" if r.passed else "FAIL"
            print(f"{r.condition}: {word} (worst {r.worst_residual:.3g} "
                  f"at s={r.worst_s:.6g})", file=sys.stderr)
    return EXIT_OK if payload["all_passed"] else EXIT_CONFIG


def cmd_convergence(args):
    cfg = load_config(args.config)
    d = _table(cfg, "domain")
    nl = nonlinearity_from_config(cfg)
    t = cfg.get("convergence", {})
    result = convergence_study(
        int(d.get("dimension", 1)),
        d.get("lengths", 1.0),
        nl,
        levels=int(t.get("levels", 3)),
        cells0=t.get("cells", 32),
        dt0=float(t.get("dt", 2e-3)),
        t_end=float(t.get("t_end", 0.5)),
    )
    payload = {"config": cfg, **result}
    out_dir = resolve_out(args, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(payload, out_dir / "convergence.json")
    if not args.quiet:
        print("orders: " + ", ".join(f"{o:.3f}" for o in result["orders"]),
              file=sys.stderr)
    return EXIT_OK


def _sweep_worker(job):
    (index, config_path, out_dir, param, value, seed) = job
    base = {"index": index, "value": value}
    try:
        cfg = load_config(config_path)
        code, summary = execute_run(cfg, Path(out_dir), seed, quiet=True,
                                    bindings={param: float(value)})
        return {**base, **summary, "exit_code": code}
    except Exception as exc:  # a broken point must not sink the sweep
        return {**base, "status": "error", "error": str(exc),
                "exit_code": EXIT_CONFIG}


_SWEEP_COLUMNS = ("index", "value", "status", "exit_code", "t_stop",
                  "T_extrapolated", "quality", "E0", "I0", "margin",
                  "T_upper", "T_lower", "sandwich_ok", "error")


def cmd_sweep(args):
    cfg = load_config(args.config)
    t = _table(cfg, "sweep")
    param = t.get("parameter")
    values = t.get("values")
    if not isinstance(param, str) or not param.isidentifier():
        raise ConfigurationError(f"[sweep] parameter must be an identifier, got {param!r}")
    if param in _RESERVED_NAMES:
        raise ConfigurationError(f"[sweep] parameter {param!r} shadows a reserved name")
    if not isinstance(values, list) or not values or not all(
            isinstance(v, (int, float)) for v in values):
        raise ConfigurationError("[sweep] values must be a nonempty list of numbers")
    seed = resolve_seed(args, cfg)
    out_root = resolve_out(args, cfg)
    out_root.mkdir(parents=True, exist_ok=True)
    config_path = str(Path(args.config).resolve())
    jobs = [
        (i, config_path, str(out_root / f"point_{i:03d}"), param, float(v), seed)
        for i, v in enumerate(values)
    ]
    workers = int(t.get("workers", 0)) or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        rows = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    rows.sort(key=lambda r: r["index"])
    with open(out_root / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row.get(c)) for c in _SWEEP_COLUMNS])
    if not args.quiet:
        for row in rows:
            print(f"{param}={row['value']!r}: {row.get('status')}", file=sys.stderr)
    return EXIT_OK


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------- entry

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sdwave",
        description="Numerical laboratory for finite-time blow-up in a "
                    "strongly damped semilinear wave equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
        ("run", cmd_run, "integrate one experiment"),
        ("bounds", cmd_bounds, "compute blow-up time bounds for the data"),
        ("check", cmd_check, "verify the structure conditions of f"),
        ("convergence", cmd_convergence, "manufactured-solution refinement study"),
        ("sweep", cmd_sweep, "run the experiment across parameter values"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", default=None,
                       help="output directory (default: SDWAVE_OUT, then "
                            "[output] dir, then ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress lines on stderr")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SdwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

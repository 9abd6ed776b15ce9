"""Command-line entry point: ``quasisparse {solve,sweep,prox-table,validate}``.

Exit codes: 0 success (or converged), 1 bad input, 2 solver hit ``max_iter``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import penalty, validation
from .errors import QuasiSparseError
from .experiments import ExperimentSpec, generate_problem, relative_error, run_sweep
from .operators import load_operator
from .solvers import Algorithm, SolverConfig, Termination, solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAXITER = 2

SEED_ENV = "QUASISPARSE_SEED"

PROX_TABLE_COLUMNS = ("a", "lambda", "gamma", "prox", "t_star", "regime")


class InputError(Exception):
    pass


def _parse_levels(text):
    levels = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            levels.extend(range(int(lo), int(hi) + 1))
        else:
            levels.append(int(part))
    return levels


def _parse_floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def _settings(args):
    """Merge config file and flags; flags win."""
    merged = _load_config(getattr(args, "config", None))
    for key, value in vars(args).items():
        if key in ("config", "command", "func"):
            continue
        if value is not None:
            merged[key] = value
    if merged.get("seed") is None:
        merged["seed"] = int(os.environ.get(SEED_ENV, 0))
    return merged


def _dumps(doc):
    return json.dumps(doc, allow_nan=False)


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(path).write_text(text)


def _solver_config(s, default_r):
    return SolverConfig(
        a=float(s.get("a", 1.0)),
        sparsity_prior_r=int(s.get("r", default_r)),
        epsilon=float(s.get("epsilon", 0.01)),
        tol=float(s.get("tol", 1e-8)),
        max_iter=int(s.get("max_iter", 5000)),
        algorithm=Algorithm(str(s.get("algorithm", "ifta")).lower()),
    )


def _load_signal(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read signal file {path}: {exc}") from exc
    if isinstance(doc, list):
        doc = {"b": doc}
    if "b" not in doc:
        raise InputError("signal file needs a 'b' entry")
    return doc


def cmd_solve(args) -> int:
    s = _settings(args)
    x_true = None
    x_init = None
    if s.get("operator"):
        try:
            op = load_operator(s["operator"])
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot load operator {s['operator']}: {exc}") from exc
        if not s.get("signal"):
            raise InputError("--signal is required together with --operator")
        sig = _load_signal(s["signal"])
        b = np.asarray(sig["b"], dtype=float)
        if sig.get("x_true") is not None:
            x_true = np.asarray(sig["x_true"], dtype=float)
        if sig.get("x0_init") is not None:
            x_init = np.asarray(sig["x0_init"], dtype=float)
        default_r = s.get("r", 1)
    else:
        spec = ExperimentSpec(
            m=int(s.get("m", 30)),
            n=int(s.get("n", 100)),
            sparsity_levels=(int(s.get("sparsity", s.get("r", 3))),),
            eta=float(s.get("eta", 0.003)),
            a=float(s.get("a", 1.0)),
        )
        k = spec.sparsity_levels[0]
        op, x_true, b = generate_problem(int(s["seed"]), spec, k)
        default_r = max(k, 1)

    cfg = _solver_config(s, default_r)
    trace_fh = open(s["trace"], "w") if s.get("trace") else None
    try:
        cb = None
        if trace_fh is not None:
            cb = lambda rec, _x: trace_fh.write(_dumps(rec.to_dict()) + "\n")  # noqa: E731
        result = solve(op, b, cfg, x_init, callback=cb)
    finally:
        if trace_fh is not None:
            trace_fh.close()

    doc = result.to_dict()
    if x_true is not None:
        doc["relative_error"] = relative_error(result.solution, x_true)
    _write_text(s.get("out"), _dumps(doc) + "\n")
    return EXIT_OK if result.termination is Termination.CONVERGED else EXIT_MAXITER


def cmd_sweep(args) -> int:
    s = _settings(args)
    kwargs = {"master_seed": int(s["seed"])}
    if s.get("levels") is not None:
        kwargs["sparsity_levels"] = tuple(
            s["levels"] if isinstance(s["levels"], list) else _parse_levels(s["levels"])
        )
    if s.get("algorithms") is not None or s.get("algorithm") is not None:
        algs = s.get("algorithms") or s.get("algorithm")
        if isinstance(algs, str):
            algs = [t for t in algs.split(",") if t.strip()]
        kwargs["algorithms"] = tuple(Algorithm(str(a).strip().lower()) for a in algs)
    for key, conv in (("m", int), ("n", int), ("trials", int), ("eta", float), ("a", float),
                      ("tol", float), ("epsilon", float), ("max_iter", int), ("success_threshold", float)):
        if s.get(key) is not None:
            kwargs["trials_per_level" if key == "trials" else key] = conv(s[key])
    spec = ExperimentSpec(**kwargs)
    report = run_sweep(spec, workers=int(s.get("workers") or 1))

    fmt = s.get("format") or "csv"
    csv_text, json_text = report.to_csv(), report.to_json()
    out = s.get("out")
    if out in (None, "-"):
        _write_text(None, csv_text if fmt == "csv" else json_text)
    else:
        out = Path(out)
        primary, other = (csv_text, json_text) if fmt == "csv" else (json_text, csv_text)
        out.write_text(primary)
        out.with_suffix(".json" if fmt == "csv" else ".csv").write_text(other)
        print(report.summary_table())
    return EXIT_OK


def prox_table_rows(a_values, lam, gamma_min, gamma_max, step):
    if step <= 0 or gamma_max < gamma_min or not a_values:
        raise InputError("empty gamma range")
    count = int(round((gamma_max - gamma_min) / step)) + 1
    # rounding keeps a symmetric range exactly symmetric in binary
    gammas = np.round(gamma_min + step * np.arange(count), 12)
    rows = []
    for a in a_values:
        p = penalty.PenaltyParams(a, lam)
        tr = penalty.threshold_value(p)
        for g in gammas:
            g = float(g)
            rows.append((a, lam, g, penalty.prox_scalar(p, g), tr.threshold, tr.regime.value))
    return rows


def cmd_prox_table(args) -> int:
    s = _settings(args)
    a_values = s.get("a_values", "1,2,3,5")
    if isinstance(a_values, str):
        a_values = _parse_floats(a_values)
    rows = prox_table_rows(
        [float(a) for a in a_values],
        float(s.get("lam", 0.25)),
        float(s.get("gamma_min", -5.0)),
        float(s.get("gamma_max", 5.0)),
        float(s.get("step", 0.01)),
    )
    bad = []
    if s.get("validate"):
        for a, lam, g, prox, _, _ in rows:
            ref = validation.oracle_prox(a, lam, g)
            t = penalty.threshold_value(penalty.PenaltyParams(a, lam)).threshold
            if abs(abs(g) - t) > validation.JUMP_MARGIN and abs(prox - ref) > 1e-5:
                bad.append({"a": a, "lambda": lam, "gamma": g, "prox": prox, "oracle": ref})

    if (s.get("format") or "csv") == "json":
        text = _dumps([dict(zip(PROX_TABLE_COLUMNS, r)) for r in rows]) + "\n"
    else:
        lines = [",".join(PROX_TABLE_COLUMNS)]
        lines += [f"{a!r},{lam!r},{g!r},{p!r},{t!r},{reg}" for a, lam, g, p, t, reg in rows]
        text = "\n".join(lines) + "\n"
    _write_text(s.get("out"), text)
    if bad:
        print(_dumps({"oracle_mismatches": bad}), file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_validate(args) -> int:
    s = _settings(args)
    checks = validation.run_all(samples=int(s.get("samples", 1000)), seed=int(s["seed"]))
    report = {
        "passed": all(c.passed for c in checks),
        "sampled_triples": int(s.get("samples", 1000)),
        "checks": [c.to_dict() for c in checks],
    }
    _write_text(s.get("out"), json.dumps(report, indent=1) + "\n")
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} ({c.cases} cases)", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quasisparse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with default values for any flag")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV}, then 0)")

    def solver_flags(p):
        p.add_argument("--a", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--m", type=int)
        p.add_argument("--n", type=int)

    p = sub.add_parser("solve", help="recover one sparse signal")
    common(p)
    solver_flags(p)
    p.add_argument("--algorithm", choices=[a.value for a in Algorithm])
    p.add_argument("--r", type=int, help="sparsity prior given to the solver")
    p.add_argument("--sparsity", type=int, help="planted sparsity of a generated instance (default: --r or 3)")
    p.add_argument("--operator", help="operator JSON document")
    p.add_argument("--signal", help="JSON with 'b' (and optional 'x_true', 'x0_init')")
    p.add_argument("--format", choices=["json"])
    p.add_argument("--trace", help="write per-iteration JSON-lines trace here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="success rate vs sparsity experiment")
    common(p)
    solver_flags(p)
    p.add_argument("--algorithms", "--algorithm", dest="algorithms", help="comma list of ifta,ista,ihta")
    p.add_argument("--levels", help="sparsity levels, e.g. 1-15 or 1,3,5")
    p.add_argument("--trials", type=int)
    p.add_argument("--success-threshold", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=["csv", "json"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("prox-table", help="tabulate the thresholding function")
    common(p)
    p.add_argument("--a-values", help="comma list of a (default 1,2,3,5)")
    p.add_argument("--lam", "--lambda", dest="lam", type=float)
    p.add_argument("--gamma-min", type=float)
    p.add_argument("--gamma-max", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--validate", action="store_true", default=None,
                   help="cross-check every row against a grid-search oracle")
    p.add_argument("--format", choices=["csv", "json"])
    p.set_defaults(func=cmd_prox_table)

    p = sub.add_parser("validate", help="run the oracle property suite")
    common(p)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, QuasiSparseError, ValueError, OSError) as exc:
        print(f"quasisparse {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

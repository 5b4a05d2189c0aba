"""Command-line entry point.

Every subcommand writes one CSV and one JSON manifest into ``--out`` and exits
0 when all of its assertions hold, 2 when one fails and 1 on usage or
configuration errors.  Parameters come from flags, then from the optional
``--config`` JSON (which must carry ``"version": 1``), then from defaults.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import SWEEP_COLUMNS, SWEEP_SEED, certification_sweep
from .core import (ConfigurationError, DomainError, MeasureFamily, ResourceError, choquet_integral,
                   conjugate_expectation, rvf, upper_expectation, verify_axioms)
from .gheat import TEST_FUNCTIONS, GParams, GridConfig, gnormal_expectation, solve_g_heat
from .lab import (ExperimentRefused, RateCurve, alternating_array, block_schedule,
                  conjecture_explore, eta_lower_bound, eta_reduction_gap, eta_scale, lil_trace,
                  md_rate_curve, non_iid_experiment, sandwich_violations, x_sequence)
from .moments import MomentProfile, condition_diagnostics, default_grid, solve_zn
from .paths import VolatilityPolicy, default_policy_grid, simulate_path, worst_case_policy_search
from .tree import MAX_STATES, sequence_capacity, sum_sq_dp

CONFIG_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_ASSERT = 0, 1, 2


class UsageError(Exception):
    pass


# -- parameter specs: name -> (type, default, help) ----------------------------

def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _int_auto(text):
    return int(str(text), 0)


FAMILY = ("family", str, "rvf", "family JSON file or the preset 'rvf'")
SEED = ("seed", _int_auto, 0, "root seed")

COMMANDS: dict[str, tuple[str, list]] = {
    "axioms": ("check the sub-linear expectation axioms on random payoffs",
               [FAMILY, ("n_fns", int, 20, "number of random payoffs"), SEED]),
    "capacity": ("upper and lower capacity of {S_n >= x V_n}",
                 [FAMILY, ("n", int, 2, "sequence length"), ("x", float, 1.0, "threshold")]),
    "choquet": ("Choquet integrals next to upper/conjugate expectations",
                [FAMILY, ("payoff", str, "identity", "identity, square, abs or positive")]),
    "zn": ("truncation root z_n", [FAMILY, ("n", int, 100, "n"), ("x", float, 2.0, "x_n")]),
    "conditions": ("tail-condition diagnostics", [FAMILY]),
    "bernstein-sweep": ("certify the closed-form bounds on random families",
                        [("configs", int, 200, "number of configurations"),
                         ("seed", _int_auto, SWEEP_SEED, "root seed"),
                         ("n_max", int, 8, "largest sequence length")]),
    "gheat": ("solve the G-heat equation and dump the grid",
              [("sigma_lower", float, 1.0, "lower volatility"),
               ("sigma_upper", float, 2.0, "upper volatility"),
               ("payoff", str, "x2", "initial condition name"), ("t", float, 1.0, "final time"),
               ("level", int, 2, "refinement level, dx = 0.2/2^level"),
               ("times", _floats, [], "extra stored times")]),
    "gnormal": ("G-normal expectation of a named payoff",
                [("sigma_lower", float, 1.0, "lower volatility"),
                 ("sigma_upper", float, 2.0, "upper volatility"),
                 ("payoff", str, "x2", "payoff name"), ("level", int, 2, "refinement level")]),
    "simulate": ("simulate one controlled path",
                 [("policy", str, "const:1", "const:s, sched:s1,s2,... or sign:+|-,hi|lo"),
                  ("sigma_lower", float, 1.0, "lower volatility"),
                  ("sigma_upper", float, 2.0, "upper volatility"),
                  ("T", float, 1.0, "horizon"), ("dt", float, 0.01, "step"), SEED]),
    "policy-search": ("Monte Carlo worst-case volatility policy search",
                      [("statistic", str, "w2", "w2, -w2 or w"),
                       ("sigma_lower", float, 1.0, "lower volatility"),
                       ("sigma_upper", float, 2.0, "upper volatility"),
                       ("paths", int, 4000, "paths per policy"), ("T", float, 1.0, "horizon"),
                       ("dt", float, 0.01, "step"), SEED]),
    "md-rate": ("moderate-deviation rate curve",
                [FAMILY, ("gamma", float, 0.3, "x_n = n^gamma"), ("n", _ints, [8, 16, 24], "n list"),
                 ("budget", int, MAX_STATES, "state budget"),
                 ("bounds", str, "auto", "auto, always or never"),
                 ("mc_paths", int, 20000, "Monte Carlo paths"), SEED]),
    "lil-trace": ("self-normalized LIL traces under a fixed policy",
                  [("policy", str, "const:1", "policy spec"),
                   ("sigma_lower", float, 1.0, "lower volatility"),
                   ("sigma_upper", float, 1.0, "upper volatility"),
                   ("n_max", int, 1_000_000, "trace length"), ("seeds", int, 20, "number of seeds"),
                   ("band_lo", float, 0.8, "band for the max ratio"),
                   ("band_hi", float, 1.25, "band for the max ratio"),
                   ("radius", float, 0.15, "cluster approach radius")]),
    "non-iid": ("rate curve for an alternating-scale array",
                [FAMILY, ("scales", _floats, [1.0, 1.5], "cyclic scales"),
                 ("gamma", float, 0.3, "x_n = n^gamma"), ("n", _ints, [8, 16, 24], "n list"),
                 ("budget", int, MAX_STATES, "state budget"),
                 ("q_cap", float, 100.0, "refuse beyond this q_n"),
                 ("bounds", str, "auto", "auto, always or never"),
                 ("mc_paths", int, 20000, "Monte Carlo paths"), SEED]),
    "eta-bound": ("exact capacity of the eta event",
                  [FAMILY, ("n", int, 16, "n"), ("gamma", float, 0.3, "x_n = n^gamma"),
                   ("beta", float, 0.5, "beta in (0,1)")]),
    "conjecture-explore": ("lower-capacity analogue of the rate curve (no pass/fail)",
                           [FAMILY, ("gamma", float, 0.3, "x_n = n^gamma"),
                            ("n", _ints, [8, 16, 24], "n list"),
                            ("budget", int, MAX_STATES, "state budget")]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gexpect", description="Sub-linear expectation laboratory")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (helptext, params) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("--config", help="JSON config with a version field")
        p.add_argument("--out", help="output directory (default: current)")
        for key, typ, default, h in params:
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, type=typ, default=None, help=f"{h} (default {default!r})")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults; unknown keys are rejected."""
    params = COMMANDS[command][1]
    allowed = {k for k, *_ in params}
    cfg = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
        if raw.get("version") != CONFIG_VERSION:
            raise ConfigurationError(f"config version must be {CONFIG_VERSION}")
        if raw.get("command", command) != command:
            raise ConfigurationError(f"config is for {raw['command']!r}, not {command!r}")
        unknown = set(raw) - allowed - {"version", "command", "out"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        for key, typ, _, _ in params:
            if key in raw:
                v = raw[key]
                cfg[key] = typ(",".join(map(str, v))) if isinstance(v, list) else typ(v)
        if "out" in raw:
            cfg["out"] = str(raw["out"])
    for key, _, default, _ in params:
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
        cfg.setdefault(key, default)
    if args.out:
        cfg["out"] = args.out
    cfg.setdefault("out", ".")
    return cfg


def load_family(spec: str) -> MeasureFamily:
    if spec == "rvf":
        return rvf()
    try:
        return MeasureFamily.from_json(Path(spec).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read family file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"family file is not JSON: {exc}") from None


def parse_policy(spec: str, lo: float, hi: float) -> VolatilityPolicy:
    kind, _, rest = spec.partition(":")
    try:
        if kind == "const":
            return VolatilityPolicy("constant", lo, hi, value=float(rest))
        if kind == "sched":
            return VolatilityPolicy("schedule", lo, hi, schedule=tuple(_floats(rest)))
        if kind == "sign":
            sign, _, mode = rest.partition(",")
            return VolatilityPolicy("feedback", lo, hi, target=1 if sign == "+" else -1,
                                    high_on_match=(mode or "hi") == "hi")
    except ValueError as exc:
        raise ConfigurationError(f"bad policy {spec!r}: {exc}") from None
    raise ConfigurationError(f"unknown policy kind in {spec!r}")


PAYOFFS = {
    "x": lambda x: x,
    "x2": lambda x: x * x,
    "-x2": lambda x: -x * x,
    "sqrt1px2": lambda x: np.sqrt(1 + x * x),
    "one": lambda x: np.ones_like(x),
    **TEST_FUNCTIONS,
}

ONE_STEP = {
    "identity": lambda v: v,
    "square": lambda v: v * v,
    "abs": np.abs,
    "positive": lambda v: np.maximum(v, 0.0),
}


def _pick(table, name, what):
    if name not in table:
        raise ConfigurationError(f"unknown {what} {name!r}; choose from {sorted(table)}")
    return table[name]


# -- commands: each returns (columns, rows, assertions, extra manifest fields) ---

def cmd_axioms(c):
    fam = load_family(c["family"])
    rng = np.random.default_rng(c["seed"])
    fns = [rng.normal(size=fam.n_atoms) * rng.uniform(0.1, 3) for _ in range(c["n_fns"])]
    rep = verify_axioms(fam, fns)
    rows = [(k, v) for k, v in sorted(rep.by_axiom.items())]
    return ("axiom", "max_violation"), rows, {"axioms_hold": rep.passed}, {"checks": rep.n_checks}


def cmd_capacity(c):
    fam = load_family(c["family"])
    cap = sequence_capacity(lambda s, v2: s >= c["x"] * np.sqrt(v2), [fam] * c["n"])
    rows = [(c["n"], c["x"], cap.upper, cap.lower)]
    return ("n", "x", "upper", "lower"), rows, {"lower_le_upper": cap.lower <= cap.upper + 1e-12}, {}


def cmd_choquet(c):
    fam = load_family(c["family"])
    f = _pick(ONE_STEP, c["payoff"], "payoff")
    up, lo = choquet_integral(f, fam, "upper"), choquet_integral(f, fam, "lower")
    rows = [(c["payoff"], upper_expectation(f, fam), conjugate_expectation(f, fam), up, lo)]
    return (("payoff", "upper_expectation", "conjugate_expectation", "choquet_upper",
             "choquet_lower"), rows, {"choquet_lower_le_upper": lo <= up + 1e-12}, {})


def cmd_zn(c):
    prof = MomentProfile(load_family(c["family"]))
    tp = solve_zn(prof, c["n"], c["x"])
    res = tp.residual(prof)
    ok = tp.flagged or res <= 1e-9 * max(1.0, c["x"] ** 2 * tp.z_n ** 2)
    return (("n", "x_n", "z_n", "residual", "flagged", "reason"),
            [(tp.n, tp.x_n, tp.z_n, res, tp.flagged, tp.reason)], {"root_residual": ok}, {})


def cmd_conditions(c):
    fam = load_family(c["family"])
    rep = condition_diagnostics(MomentProfile(fam), default_grid(fam))
    failing = rep.failing()
    return rep.columns, rep.rows, {"conditions_hold": not failing}, {"failing": failing,
                                                                      "r_squared": rep.r_squared}


def cmd_bernstein_sweep(c):
    reps = certification_sweep(c["configs"], c["seed"], n_max=c["n_max"])
    bad = sum(r.status == "VIOLATION" for r in reps)
    return SWEEP_COLUMNS, [r.row() for r in reps], {"zero_violations": bad == 0}, {"violations": bad}


def cmd_gheat(c):
    p = GParams(c["sigma_lower"], c["sigma_upper"])
    sol = solve_g_heat(_pick(PAYOFFS, c["payoff"], "payoff"), c["t"], p,
                       GridConfig(level=c["level"], store_times=tuple(c["times"])))
    rows = [(float(t), float(x), float(u)) for t, layer in zip(sol.times, sol.values)
            for x, u in zip(sol.x, layer)]
    return ("t", "x", "u"), rows, {}, {"dx": sol.dx, "dt": sol.dt, "cap_radius": sol.cap_radius}


def cmd_gnormal(c):
    p = GParams(c["sigma_lower"], c["sigma_upper"])
    v = gnormal_expectation(_pick(PAYOFFS, c["payoff"], "payoff"), p, GridConfig(level=c["level"]))
    return ("payoff", "level", "value"), [(c["payoff"], c["level"], v)], {}, {}


def cmd_simulate(c):
    lo, hi = c["sigma_lower"], c["sigma_upper"]
    path = simulate_path(parse_policy(c["policy"], lo, hi), c["T"], c["dt"], c["seed"])
    t = path.times
    ok = bool(np.all(path.qv >= lo * lo * t * (1 - 1e-12)) and np.all(path.qv <= hi * hi * t * (1 + 1e-12)))
    rows = list(zip(t.tolist(), path.w.tolist(), path.qv.tolist()))
    return ("t", "W", "qv"), rows, {"qv_within_bounds": ok}, {}


STATISTICS = {
    "w2": lambda w: w[:, -1] ** 2,
    "-w2": lambda w: -w[:, -1] ** 2,
    "w": lambda w: w[:, -1],
}


def cmd_policy_search(c):
    lo, hi = c["sigma_lower"], c["sigma_upper"]
    res = worst_case_policy_search(_pick(STATISTICS, c["statistic"], "statistic"),
                                   default_policy_grid(lo, hi), c["paths"], c["seed"],
                                   T=c["T"], dt=c["dt"])
    rows = [(name, mean, se) for name, mean, se in res.table]
    extra = {"best_policy": res.best_policy.name, "estimate": res.estimate, "stderr": res.stderr,
             "lower_bound_only": True}
    return ("policy", "screening_mean", "screening_stderr"), rows, {}, extra


def _curve_out(curve: RateCurve, asserts):
    return RateCurve.columns, curve.table(), asserts, {"notes": curve.notes}


def cmd_md_rate(c):
    curve = md_rate_curve(load_family(c["family"]), c["gamma"], c["n"], c["budget"],
                          bounds=c["bounds"], mc_paths=c["mc_paths"], seed=c["seed"])
    return _curve_out(curve, {"sandwich": not sandwich_violations(curve)})


def cmd_lil_trace(c):
    pol = parse_policy(c["policy"], c["sigma_lower"], c["sigma_upper"])
    n_max = c["n_max"]
    sched = block_schedule("nk", n_max)
    tr = lil_trace(pol, n_max, range(c["seeds"]), schedule=sched, radius=c["radius"])
    rows = [(r.seed, r.max_ratio, r.min_ratio, r.final_ratio, r.coverage) for r in tr.seeds]
    asserts = {"max_ratio_in_band": tr.fraction_in_band(c["band_lo"], c["band_hi"]) >= 0.9,
               "cluster_coverage": tr.fraction_covered() >= 0.8}
    return tr.columns, rows, asserts, {"schedule": list(sched.indices),
                                       "fraction_in_band": tr.fraction_in_band(c["band_lo"], c["band_hi"]),
                                       "fraction_covered": tr.fraction_covered()}


def cmd_non_iid(c):
    fam = load_family(c["family"])
    curve = non_iid_experiment(alternating_array(fam, c["scales"]), c["gamma"], c["n"], c["budget"],
                               q_cap=c["q_cap"], bounds=c["bounds"], mc_paths=c["mc_paths"],
                               seed=c["seed"])
    return _curve_out(curve, {"sandwich": not sandwich_violations(curve)})


def cmd_eta_bound(c):
    fam = load_family(c["family"])
    n = c["n"]
    x = x_sequence(n, gamma=c["gamma"])
    dp = sum_sq_dp([fam] * n)
    r = eta_lower_bound(fam, n, x, c["beta"], dp=dp)
    gap = eta_reduction_gap([fam] * n, x, eta_scale(fam, n, x), dp=dp)
    rows = [(n, x, c["beta"], r.b, r.value, r.normalized, r.target, gap)]
    return (("n", "x_n", "beta", "b", "capacity", "normalized", "target", "reduction_gap"), rows,
            {"reduction_holds": gap >= -1e-12}, {})


def cmd_conjecture_explore(c):
    curve = conjecture_explore(load_family(c["family"]), c["gamma"], c["n"], c["budget"])
    return RateCurve.columns, curve.table(), {}, {"notes": curve.notes}


HANDLERS = {
    "axioms": cmd_axioms, "capacity": cmd_capacity, "choquet": cmd_choquet, "zn": cmd_zn,
    "conditions": cmd_conditions, "bernstein-sweep": cmd_bernstein_sweep, "gheat": cmd_gheat,
    "gnormal": cmd_gnormal, "simulate": cmd_simulate, "policy-search": cmd_policy_search,
    "md-rate": cmd_md_rate, "lil-trace": cmd_lil_trace, "non-iid": cmd_non_iid,
    "eta-bound": cmd_eta_bound, "conjecture-explore": cmd_conjecture_explore,
}


# -- report emission ----------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def emit_report(columns, rows, manifest: dict, out_dir: str, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>-<UTC timestamp>.csv`` and the matching manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    base = f"{stem}-{stamp}"
    k = 0
    while (out / f"{base}.csv").exists() or (out / f"{base}.manifest.json").exists():
        k += 1
        base = f"{stem}-{stamp}-{k}"
    csv_path = out / f"{base}.csv"
    man_path = out / f"{base}.manifest.json"
    text = csv_text(columns, rows)
    with open(csv_path, "w", newline="") as fh:
        fh.write(text)
    manifest = dict(manifest, csv=csv_path.name,
                    csv_sha256=hashlib.sha256(text.encode()).hexdigest())
    man_path.write_text(json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n")
    return csv_path, man_path


def _threads() -> int:
    raw = os.environ.get("GEXPECT_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError("GEXPECT_THREADS must be a positive integer") from None
    if n < 1:
        raise ConfigurationError("GEXPECT_THREADS must be a positive integer")
    return n


def dispatch(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("no subcommand given")
        cfg = resolve_config(args.command, args)
        threads = _threads()
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    manifest = {"command": args.command, "config": {k: v for k, v in cfg.items() if k != "out"},
                "version": CONFIG_VERSION, "tool_version": __version__, "threads": threads}
    if "seed" in cfg:
        manifest["seed_root"] = cfg["seed"]
    try:
        columns, rows, asserts, extra = HANDLERS[args.command](cfg)
        status = EXIT_OK if all(asserts.values()) else EXIT_ASSERT
    except ExperimentRefused as exc:
        columns, rows, asserts, extra = ("message",), [], {"hypotheses": False}, {"refused": str(exc)}
        status = EXIT_ASSERT
        print(f"experiment refused: {exc}", file=sys.stderr)
    except (ConfigurationError, DomainError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest.update(extra, assertions=asserts, wall_time_s=time.perf_counter() - t0)
    try:
        csv_path, _ = emit_report(columns, rows, manifest, cfg["out"], args.command)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name, ok in asserts.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(csv_path)
    return status


def main() -> None:
    sys.exit(dispatch())

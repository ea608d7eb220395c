"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse failure, 2 convex-order violation,
3 no progress or non-terminating rule, 4 failed verification or audit.
Results go to stdout or files; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import __version__
from .analysis import (
    Extremum,
    common_levels,
    compare_rules,
    duration_gap,
    extrema_cdf,
    loynes_check,
    monotonicity_audit,
    verify_embedding,
)
from .calibration import EXAMPLE_CASES, calibrate_perkins, example_case, feasible_band
from .engine import exact_stopped_law, mc_stopped_law
from .errors import ConvexOrderViolated, NoProgress, NonTerminating, ParseError, PathBudgetExceeded
from .io import Instance, csv_text, dumps, read_json, write_json
from .measures import example_pair, moment
from .rules import AzemaYor, Perkins, azema_yor_boundary, rule_from_json
from .svg import barrier_svg

EXIT_OK, EXIT_IO, EXIT_ORDER, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3, 4
RULE_NAMES = ("perkins", "ay", "hp", "root", "rost")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(doc, out) -> None:
    text = dumps(doc) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_instance(path, args) -> Instance:
    inst = Instance.from_json(read_json(path))
    overrides = {}
    if getattr(args, "tol", None) is not None:
        overrides["tolerance"] = args.tol
    if getattr(args, "mc_paths", None) is not None:
        overrides["mc_paths"] = args.mc_paths
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        doc = inst.to_json()
        doc["options"].update(overrides)
        inst = Instance.from_json(doc)
    return inst


def _load_rule(path):
    doc = read_json(path)
    if isinstance(doc, dict) and "variant" not in doc and "rule" in doc:
        doc = doc["rule"]
    return rule_from_json(doc)


def cmd_calibrate(args) -> int:
    inst = _load_instance(args.instance, args)
    result = calibrate_perkins(inst.lam, inst.mu, inst.tolerance)
    _emit(result.to_json(), args.out)
    return EXIT_OK


def _cdf_csv(law) -> str:
    cmax, cmin = extrema_cdf(law, Extremum.MAX), extrema_cdf(law, Extremum.MIN)
    rows = [(x, cmax(x), cmin(x)) for x in cmax.levels]
    return csv_text(["level", "cdf_max", "cdf_min"], rows)


def cmd_example(args) -> int:
    alpha = args.alpha
    if not 0.0 <= alpha <= 1.0:
        _err("alpha must lie in [0, 1]")
        return EXIT_IO
    lam, mu = example_pair(alpha)
    try:
        result = calibrate_perkins(lam, mu, args.tol)
    except ConvexOrderViolated:
        print(f"case: {EXAMPLE_CASES[3]}")
        return EXIT_ORDER
    case = example_case(result)
    v_cap, vh_cap = feasible_band(lam, example_pair, 0.0)
    law = result.certificate
    report = {
        "alpha": alpha,
        "case": case,
        "residual_tv": result.residual_tv,
        "expected_duration": law.expected_duration,
        "duration_gap": duration_gap(law, lam),
        "audit_violations": len(monotonicity_audit(law)),
        "feasible_band": {"v_line_only": v_cap, "v_and_h_line": vh_cap},
    }
    print(f"case: {case}")
    print(f"residual_tv: {result.residual_tv:.3e}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        write_json(os.path.join(args.out_dir, "instance.json"), Instance(lam, mu, args.tol).to_json())
        write_json(os.path.join(args.out_dir, "result.json"), result.to_json())
        write_json(os.path.join(args.out_dir, "report.json"), report)
        with open(os.path.join(args.out_dir, "barrier.svg"), "w", encoding="utf-8") as fh:
            fh.write(barrier_svg(result.rule.barrier, extra_levels=mu.locations))
        with open(os.path.join(args.out_dir, "cdf.csv"), "w", encoding="utf-8") as fh:
            fh.write(_cdf_csv(exact_stopped_law(result.rule, lam, _midpoints(mu.locations))))
        with open(os.path.join(args.out_dir, "joint.csv"), "w", encoding="utf-8") as fh:
            fh.write(law.to_csv())
    return EXIT_CHECK if report["audit_violations"] else EXIT_OK


def _midpoints(xs):
    xs = sorted(xs)
    return [0.5 * (a + b) for a, b in zip(xs, xs[1:])]


def _baseline_rules(inst: Instance, names, args):
    rules = {}
    for name in names:
        if name == "perkins":
            rules[name] = calibrate_perkins(inst.lam, inst.mu, inst.tolerance).rule
        elif name == "ay":
            if args.ay_params:
                rules[name] = _load_rule(args.ay_params)
            elif len(inst.lam) == 1 and abs(inst.lam.locations[0] - inst.mu.mean()) <= 1e-12:
                rules[name] = AzemaYor(azema_yor_boundary(inst.mu))
            else:
                _err("warning: ay needs --ay-params for a non-point start; skipped")
        else:
            path = getattr(args, f"{name}_params")
            if path:
                rules[name] = _load_rule(path)
            else:
                _err(f"warning: {name} needs --{name}-params; skipped")
    return rules


def cmd_compare(args) -> int:
    inst = _load_instance(args.instance, args)
    names = [n.strip() for n in args.rules.split(",") if n.strip()]
    bad = [n for n in names if n not in RULE_NAMES]
    if bad:
        _err(f"unknown rules: {', '.join(bad)}")
        return EXIT_IO
    rules = _baseline_rules(inst, names, args)
    cmp = compare_rules(
        rules, inst.lam, mc_paths=inst.mc_paths, seed=inst.seed, dt=inst.dt_root_rost, threads=args.threads
    )
    _emit(cmp.to_json(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load_instance(args.instance, args)
    rule = _load_rule(args.rule)
    exact = isinstance(rule, (Perkins, AzemaYor))
    if exact:
        law = exact_stopped_law(rule, inst.lam)
        tv_tol = max(inst.tolerance, 1e-9)
    else:
        # midpoints keep stops strictly inside a range visible on the recorded grid
        law = mc_stopped_law(
            rule, inst.lam, inst.mc_paths, inst.seed, dt=inst.dt_root_rost,
            extra_levels=common_levels(inst.lam, inst.mu, rule), threads=args.threads,
        )
        tv_tol = 5.0 / math.sqrt(inst.mc_paths)
    tv = verify_embedding(law, inst.mu)
    gap = duration_gap(law, inst.lam)
    gap_tol = 1e-8 if exact else 10.0 * tv_tol * max(1.0, moment(inst.mu, 2))
    audit = monotonicity_audit(law)
    checks = [
        ("tv_residual", tv, tv <= tv_tol),
        ("duration_gap", gap, abs(gap) <= gap_tol),
        ("audit_violations", len(audit), not audit),
    ]
    if isinstance(rule, Perkins) and not rule.mirrored:
        rep = loynes_check(rule.barrier, rule.barrier, inst.lam, rule.atom_stop, n_paths=10_000, seed=inst.seed)
        checks.append(("self_union_violations", rep.pathwise_violations, rep.passed()))
    for name, value, ok in checks:
        shown = f"{value:.3e}" if isinstance(value, float) else str(value)
        print(f"{name}: {shown} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all(ok for _, _, ok in checks) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perkins-sep", description="Barrier embeddings of atomic target laws.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tol_default=None):
        sp.add_argument("--tol", type=float, default=tol_default)
        sp.add_argument("--mc-paths", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1)

    c = sub.add_parser("calibrate", help="fit the barrier rule for an instance")
    c.add_argument("instance")
    c.add_argument("--out")
    common(c)
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("example", help="three-atom example with atom alpha at zero")
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--out-dir")
    e.add_argument("--tol", type=float, default=1e-10)
    e.set_defaults(func=cmd_example)

    m = sub.add_parser("compare", help="dominance and objectives across rules")
    m.add_argument("instance")
    m.add_argument("--rules", default="perkins,ay")
    m.add_argument("--out")
    for name in ("ay", "hp", "root", "rost"):
        m.add_argument(f"--{name}-params", help=f"rule JSON for {name}")
    common(m)
    m.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify", help="check a rule against an instance")
    v.add_argument("instance")
    v.add_argument("rule")
    common(v)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    except ConvexOrderViolated as exc:
        _err(f"error: {exc}")
        return EXIT_ORDER
    except (NoProgress, NonTerminating, PathBudgetExceeded) as exc:
        _err(f"error: {exc}")
        return EXIT_SOLVER
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

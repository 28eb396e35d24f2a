"""Command-line front end.

Exit codes: 0 on success, 1 on domain or config errors (including unknown
flags), 2 on numerical precondition violations.  All scalar output is
printed with ten digits after the decimal point; CSV and TSV files carry
full-precision floats so they round trip exactly.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .domain import (
    EXAMPLE_DOMAIN_NAMES,
    StarDomain,
    example_domain,
    jordan_measure,
    load_domain,
)
from .engine import (
    Exponent,
    TEST_FUNCTION_NAMES,
    cdp_constant,
    evaluate,
    named_test_function,
    reference_integral,
    theorem_bound,
)
from .errors import ConfigError, DomainError, PreconditionError
from .lemmas import checks_to_tsv, verify_lemmas
from .partition import save_rule_csv
from .report import (
    DEFAULT_MEASURE_RESOLUTION,
    DEFAULT_PROBE_RESOLUTION,
    auto_resolution,
    build_rule,
    run_convergence,
    save_report_csv,
)

FLOAT_FMT = "{:.10f}"


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_code_on_error(message))

    @staticmethod
    def exit_code_on_error(message):
        print(f"error: {message}", file=sys.stderr)
        return 1


def _resolve_domain(ref: str) -> StarDomain:
    path = Path(ref)
    if path.exists():
        return load_domain(path)
    if ref in EXAMPLE_DOMAIN_NAMES:
        return example_domain(ref)
    raise ConfigError(f"domain '{ref}' is neither a config file nor a builtin "
                      f"({', '.join(EXAMPLE_DOMAIN_NAMES)})")


def _fmt(value: float) -> str:
    return FLOAT_FMT.format(value)


def _add_rule_build_args(sub, subgrid_default):
    sub.add_argument("--domain", required=True,
                     help="domain config file or builtin name")
    sub.add_argument("-n", type=int, required=True,
                     help="requested number of nodes")
    sub.add_argument("--subgrid", type=int, default=subgrid_default,
                     help="weight subcells per axis per lattice cell")
    sub.add_argument("--probe-resolution", type=int,
                     default=DEFAULT_PROBE_RESOLUTION,
                     help="probe grid per cube for classification and scans")
    sub.add_argument("--measure-resolution", type=int,
                     default=DEFAULT_MEASURE_RESOLUTION,
                     help="grid resolution for the measure bracket")


def build_parser() -> _Parser:
    parser = _Parser(prog="starquad",
                     description="Cubature rules on star-shaped domains")
    subs = parser.add_subparsers(dest="command", required=True,
                                 parser_class=_Parser)

    m = subs.add_parser("measure", help="bracket the domain measure")
    m.add_argument("--domain", required=True)
    m.add_argument("--resolution", type=int, default=DEFAULT_MEASURE_RESOLUTION)

    r = subs.add_parser("rule", help="build a rule and write it as CSV")
    _add_rule_build_args(r, subgrid_default=8)
    r.add_argument("-o", "--output", required=True, help="rule CSV path")
    r.add_argument("--plot", action="store_true",
                   help="also render the node/weight figure (d = 2)")

    i = subs.add_parser("integrate", help="integrate a named test function")
    _add_rule_build_args(i, subgrid_default=4)
    i.add_argument("-f", "--function", default="sin-sum",
                   choices=TEST_FUNCTION_NAMES)
    i.add_argument("-p", default="inf", help="class exponent (number or inf)")
    i.add_argument("--resolution", type=int, default=0,
                   help="reference grid resolution (0 = auto)")

    c = subs.add_parser("constant", help="the asymptotic constant c(d, p)")
    c.add_argument("-d", type=int, required=True)
    c.add_argument("-p", required=True, help="class exponent (number or inf)")

    b = subs.add_parser("bound", help="asymptotic worst-case error bound")
    b.add_argument("-d", type=int, required=True)
    b.add_argument("-p", required=True)
    b.add_argument("--mes", type=float, required=True, help="domain measure")
    b.add_argument("-n", type=int, required=True)

    v = subs.add_parser("convergence", help="error study over a ladder of n")
    v.add_argument("--domain", required=True)
    v.add_argument("-p", default="inf")
    v.add_argument("--n-list", required=True,
                   help="comma-separated ascending point counts")
    v.add_argument("--subgrid", type=int, default=4)
    v.add_argument("--resolution", type=int, default=0,
                   help="reference grid resolution (0 = auto)")
    v.add_argument("--probe-resolution", type=int,
                   default=DEFAULT_PROBE_RESOLUTION)
    v.add_argument("--measure-resolution", type=int,
                   default=DEFAULT_MEASURE_RESOLUTION)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("-o", "--output", required=True, help="report CSV path")
    v.add_argument("--no-plot", action="store_true",
                   help="skip the figure next to the CSV")

    l = subs.add_parser("verify-lemmas", help="fixed-order identity checks")
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--trials-scale", type=float, default=1.0,
                   help="multiplier on the per-check trial counts")
    l.add_argument("--wregion-domain", default="cross")
    l.add_argument("--wregion-n", type=int, default=65536,
                   help="rule size for the remainder-region row (0 = skip)")
    l.add_argument("--subgrid", type=int, default=4)
    l.add_argument("-o", "--output", default="-",
                   help="TSV path ('-' for stdout)")
    return parser


def _cmd_measure(args) -> int:
    dom = _resolve_domain(args.domain)
    bracket = jordan_measure(dom, args.resolution)
    print(f"inner={_fmt(bracket.inner)}")
    print(f"outer={_fmt(bracket.outer)}")
    print(f"midpoint={_fmt(bracket.midpoint)}")
    return 0


def _cmd_rule(args) -> int:
    dom = _resolve_domain(args.domain)
    rule = build_rule(dom, args.n, args.subgrid, args.probe_resolution,
                      args.measure_resolution)
    save_rule_csv(rule, args.output)
    print(f"nodes={len(rule)}")
    print(f"h_n={_fmt(rule.h_n)}")
    print(f"sum_weights={_fmt(rule.sum_weights)}")
    print(f"wrote {args.output}")
    if args.plot:
        from .plots import rule_figure

        fig_path = str(Path(args.output).with_suffix(".png"))
        rule_figure(rule, dom, fig_path)
        print(f"wrote {fig_path}")
    return 0


def _cmd_integrate(args) -> int:
    dom = _resolve_domain(args.domain)
    exp = Exponent.parse(args.p).validate_for_dim(dom.d)
    rule = build_rule(dom, args.n, args.subgrid, args.probe_resolution,
                      args.measure_resolution)
    f = named_test_function(args.function, rule=rule, exp=exp)
    res = args.resolution or auto_resolution(dom, rule.h_n, args.subgrid)
    value = evaluate(rule, f)
    reference = reference_integral(dom, f, res)
    print(f"rule_value={_fmt(value)}")
    print(f"reference={_fmt(reference)}")
    print(f"error={_fmt(abs(reference - value))}")
    return 0


def _cmd_constant(args) -> int:
    exp = Exponent.parse(args.p).validate_for_dim(args.d)
    print(_fmt(cdp_constant(args.d, exp)))
    return 0


def _cmd_bound(args) -> int:
    exp = Exponent.parse(args.p).validate_for_dim(args.d)
    print(_fmt(theorem_bound(args.d, exp, args.mes, args.n)))
    return 0


def _cmd_convergence(args) -> int:
    dom = _resolve_domain(args.domain)
    exp = Exponent.parse(args.p).validate_for_dim(dom.d)
    n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
    report = run_convergence(
        dom, exp, n_list,
        subgrid=args.subgrid,
        resolution=args.resolution or None,
        seed=args.seed,
        probe_resolution=args.probe_resolution,
        measure_resolution=args.measure_resolution,
    )
    save_report_csv(report, args.output)
    header = "  ".join(f"{c:>13}" for c in
                       ("n", "S_size", "fooling_error", "bound", "ratio"))
    print(header)
    for r in report.rows:
        print(f"{r.n:>13d}  {r.s_size:>13d}  {r.fooling_error:>13.6e}  "
              f"{r.theorem_bound:>13.6e}  {r.ratio:>13.6f}")
    for n, msg in report.failures:
        print(f"n={n} failed: {msg}", file=sys.stderr)
    print(f"slope={report.slope:.6f}")
    print(f"wrote {args.output}")
    if not args.no_plot:
        from .plots import convergence_figure

        fig_path = str(Path(args.output).with_suffix(".png"))
        convergence_figure(report, fig_path)
        print(f"wrote {fig_path}")
    return 0


def _cmd_verify_lemmas(args) -> int:
    wregion = None
    if args.wregion_n > 0:
        dom = _resolve_domain(args.wregion_domain)
        rule = build_rule(dom, args.wregion_n, subgrid=args.subgrid)
        wregion = (dom, rule)
    rows = verify_lemmas(seed=args.seed, trials_scale=args.trials_scale,
                         wregion=wregion)
    tsv = checks_to_tsv(rows)
    if args.output == "-":
        sys.stdout.write(tsv)
    else:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(tsv)
        print(f"wrote {args.output}")
    return 0 if all(r.passed for r in rows) else 1


_COMMANDS = {
    "measure": _cmd_measure,
    "rule": _cmd_rule,
    "integrate": _cmd_integrate,
    "constant": _cmd_constant,
    "bound": _cmd_bound,
    "convergence": _cmd_convergence,
    "verify-lemmas": _cmd_verify_lemmas,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

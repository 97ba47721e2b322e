"""Command line: gen, solve, verify, bench, curve.

Exit status: 0 success, 2 when any solve did not converge, 1 on usage or
parse errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .dk import SolveConfig
from .eigen import NonConvergenceError
from .fileio import METHODS, ParseError, load_roots, store_polynomial, store_result
from .pipeline import (
    CSV_COLUMNS,
    ProblemSpec,
    default_coeff_bits,
    default_eps_rel,
    match_and_errors,
    parse_matrix,
    reference_roots,
    run_benchmark,
    solve_method,
)
from .polynomial import ReferenceRoots, limit_curve_residual
from .scalar import PrecisionContext, sci

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _writer(out):
    if out is None:
        return sys.stdout, False
    return open(out, "w", newline=""), True


def cmd_gen(args):
    spec = ProblemSpec(args.family, args.n, args.bits)
    p = spec.build()
    store_polynomial(args.out, p)
    print(f"wrote {args.family}({args.n}) at {args.bits} bits to {args.out}")
    return EXIT_OK


def _spec_from_args(args, high_bits):
    if args.input:
        return ProblemSpec("file", 0, args.coeff_bits or high_bits, args.input)
    if not args.family or not args.n:
        raise ValueError("give either --in PATH or --family and --n")
    bits = args.coeff_bits or default_coeff_bits(args.family, args.n, high_bits)
    return ProblemSpec(args.family, args.n, bits)


def cmd_solve(args):
    spec = _spec_from_args(args, args.high_bits)
    method = args.method
    order = 3 if method in ("dka3", "dk3+low") else 2
    cfg = SolveConfig(
        eps_rel=args.eps_rel or default_eps_rel(args.high_bits),
        eps_abs=args.eps_abs,
        max_iter=args.max_iter,
        order=order,
        update_mode=args.mode,
        threads=args.threads,
    )
    res = solve_method(spec, method, args.low_bits, args.high_bits, cfg)

    report = None
    if spec.family == "wilkinson":
        report = match_and_errors(res.roots, reference_roots(spec))
    if args.out:
        store_result(args.out, res, report, method)
    line = (
        f"method={method} degree={len(res.roots)} bits={args.high_bits} sweeps={res.iterations} "
        f"converged={'true' if res.converged else 'false'} wall_seconds={res.wall_seconds:.3f}"
    )
    if res.seed != "aberth" or method.endswith("+low"):
        line += f" seed={res.seed} seed_seconds={res.seed_seconds:.3f}"
    if report is not None:
        line += f" max_rel_err={sci(report.max, 6)}"
    print(line)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_verify(args):
    rf = load_roots(args.roots)
    if args.reference == "analytic":
        ctx = PrecisionContext(max(rf.bits, 64))
        ref = ReferenceRoots(tuple(ctx.complex(i) for i in range(1, rf.degree + 1)), ctx, "analytic")
    else:
        if args.poly:
            spec = ProblemSpec("file", 0, rf.bits, args.poly)
        elif args.family == "chebyshev":
            spec = ProblemSpec("chebyshev", rf.degree, rf.bits)
        else:
            raise ValueError("--reference selfsolve needs --poly PATH or --family chebyshev")
        ref = reference_roots(spec)
    report = match_and_errors(rf.roots, ref)
    fh, close = _writer(args.out)
    try:
        w = csv.writer(fh)
        w.writerow(["index", "rel_err"])
        for i, e in enumerate(report.per_root):
            w.writerow([i, sci(e, 17)])
    finally:
        if close:
            fh.close()
    print(f"max={sci(report.max, 6)} median={sci(report.median, 6)}")
    return EXIT_OK


def cmd_bench(args):
    text = Path(args.matrix).read_text()
    matrix = parse_matrix(text, args.matrix)
    if args.roots_dir:
        Path(args.roots_dir).mkdir(parents=True, exist_ok=True)
    report = run_benchmark(matrix, args.roots_dir)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in report.rows:
            w.writerow(row.csv_values())
    for row in report.rows:
        if row.error:
            print(f"row {row.family}({row.n}) {row.method}: {row.error}", file=sys.stderr)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return EXIT_OK if report.all_converged else EXIT_NOT_CONVERGED


def cmd_curve(args):
    rf = load_roots(args.roots)
    fh, close = _writer(args.out)
    try:
        w = csv.writer(fh)
        w.writerow(["index", "residual"])
        for i, z in enumerate(rf.roots):
            w.writerow([i, sci(limit_curve_residual(z), 17)])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mproots", description="Mixed-precision polynomial root finding.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a coefficient file")
    g.add_argument("--family", choices=("wilkinson", "chebyshev"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--bits", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one polynomial")
    s.add_argument("--in", dest="input")
    s.add_argument("--family", choices=("wilkinson", "chebyshev"))
    s.add_argument("--n", type=int)
    s.add_argument("--coeff-bits", type=int)
    s.add_argument("--method", choices=METHODS, default="dka2")
    s.add_argument("--low-bits", type=int, default=106)
    s.add_argument("--high-bits", type=int, default=256)
    s.add_argument("--eps-rel")
    s.add_argument("--eps-abs", default="1e-300")
    s.add_argument("--mode", choices=("jacobi", "gauss-seidel"), default="jacobi")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--max-iter", type=int, default=20000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="relative errors of a roots file")
    v.add_argument("--roots", required=True)
    v.add_argument("--reference", choices=("analytic", "selfsolve"), required=True)
    v.add_argument("--poly", help="coefficient file for --reference selfsolve")
    v.add_argument("--family", choices=("chebyshev",), help="regenerate the polynomial instead of --poly")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run a benchmark matrix")
    b.add_argument("--matrix", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--roots-dir", help="also store every row's roots file here")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("curve", help="limit-curve residual of each root")
    c.add_argument("--roots", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValueError, OSError) as exc:
        print(f"mproots: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"mproots: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``fixedsr <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .evaluation import evaluate, load_dataset, mse, score
from .expr import (ParseError, convert_notation, depth_of, format_tokens, parse_expression,
                   read_expression_lines, table_for_symbols, to_infix,
                   write_expressions)
from .grammar import EnumerationLimitExceeded, GrammarError, enumerate_all, random_rollout
from .search import ALGORITHMS, SearchConfig, run_search
from .tokens import BINARY_OPCODES, UNARY_OPCODES, TokenTable


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _split(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _table_from_args(args, num_inputs: int | None = None) -> TokenTable:
    if args.ops:
        n = args.vars if args.vars is not None else num_inputs
        if n is None:
            raise UsageError("--vars is required")
        return bench.operator_table(args.ops, n)
    unary, binary = _split(args.unary), _split(args.binary)
    for u in unary:
        if u not in UNARY_OPCODES:
            raise UsageError(f"unknown unary operator {u!r}")
    for b in binary:
        if b not in BINARY_OPCODES:
            raise UsageError(f"unknown binary operator {b!r}")
    n = args.vars if args.vars is not None else (num_inputs or 1)
    return TokenTable(unary, binary, n, not args.no_const)


def _add_table_flags(p):
    p.add_argument("--ops", choices=("hemberg", "feynman"),
                   help="named operator set (overrides --unary/--binary)")
    p.add_argument("--unary", default="", help="comma separated, e.g. sin,cos")
    p.add_argument("--binary", default="+,-,*,/", help="comma separated, e.g. +,*")
    p.add_argument("--vars", type=int, help="number of input variables")
    p.add_argument("--no-const", action="store_true", help="omit the const token")


def _read_expr(args):
    """Expression from ``--expr`` (needs --notation) or a file with a header."""
    if args.expr is not None:
        if args.notation is None:
            raise UsageError("--notation is required with --expr")
        notation, lines = args.notation, [args.expr]
    else:
        path = Path(args.file)
        if not path.exists():
            raise UsageError(f"no such file: {path}")
        notation, lines = read_expression_lines(path.read_text().splitlines(), args.notation)
        if not lines:
            raise UsageError(f"{path}: no expressions")
    return notation, lines


def _add_expr_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--expr", help="expression text, space separated")
    src.add_argument("--file", help="expression file with a '#notation:' header")
    p.add_argument("--notation", choices=("prefix", "postfix"))


def cmd_search(args) -> int:
    if args.data:
        if not Path(args.data).exists():
            raise UsageError(f"no such data file: {args.data}")
        data = load_dataset(args.data)
        table = _table_from_args(args, data.num_features)
    else:
        try:
            spec = bench.get_benchmark(args.benchmark)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        rng = np.random.default_rng(args.seed)
        data = bench.sample_dataset(spec, rng, args.samples)
        table = spec.table
    try:
        cfg = SearchConfig(
            algorithm=args.algo, notation=args.notation, depth=args.depth, n_iter=args.n_iter,
            time_budget=args.budget, max_iterations=args.max_iterations,
            sample_interval=args.sample_interval, seed=args.seed, population=args.population,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    trace = run_search(cfg, table, data)
    out = Path(args.out) if args.out else bench.default_results_dir() / (
        f"{args.algo}_{args.notation}_d{args.depth}_s{args.seed}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(trace.to_csv(out.stem))
    best = trace.best_expression
    print(f"best:       {to_infix(best, trace.best_constants) if best is not None else '-'}")
    print(f"tokens:     {format_tokens(best) if best is not None else '-'}")
    print(f"constants:  {' '.join(f'{c:.6g}' for c in trace.best_constants) or '-'}")
    print(f"mse:        {trace.best_mse:.6g}")
    print(f"iterations: {trace.iterations}")
    print(f"trace:      {out}")
    return 0


def cmd_bench(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"no such config: {path}")
    try:
        cfg = bench.parse_suite_config(path.read_text())
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    out_root = Path(args.out_dir) if args.out_dir else bench.default_results_dir()
    result = bench.run_suite(cfg, out_root, args.parallelism)
    print(f"wrote {result.out_dir / 'summary.csv'}")
    for row in result.rows:
        print(f"{row['benchmark']:>10} {row['algorithm']:>6} {row['notation']:>7} "
              f"mean {row['mean_final_mse']:.4g} std {row['std_final_mse']:.4g} runs {row['runs']}")
    if result.failures:
        print(f"{len(result.failures)} run(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_gen(args) -> int:
    table = _table_from_args(args)
    rng = np.random.default_rng(args.seed)
    seqs = [random_rollout(args.notation, args.depth, table, rng) for _ in range(args.count)]
    sys.stdout.write(write_expressions(seqs, args.notation))
    return 0


def cmd_enumerate(args) -> int:
    table = _table_from_args(args)
    try:
        seqs = list(enumerate_all(args.notation, args.depth, table, args.limit))
    except EnumerationLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(write_expressions(seqs, args.notation))
    return 0


def _parse_lines(notation, lines):
    table = table_for_symbols(lines)
    return [parse_expression(line, notation, table) for line in lines]


def cmd_depth(args) -> int:
    notation, lines = _read_expr(args)
    for seq in _parse_lines(notation, lines):
        d, complete = depth_of(seq)
        print(f"{d} {'complete' if complete else 'incomplete'}")
    return 0


def cmd_convert(args) -> int:
    notation, lines = _read_expr(args)
    seqs = []
    for seq in _parse_lines(notation, lines):
        if not depth_of(seq)[1]:
            print(f"error: incomplete expression: {format_tokens(seq)}", file=sys.stderr)
            return 1
        seqs.append(convert_notation(seq))
    target = "postfix" if notation == "prefix" else "prefix"
    sys.stdout.write(write_expressions(seqs, target))
    return 0


def cmd_eval(args) -> int:
    notation, lines = _read_expr(args)
    if not Path(args.data).exists():
        raise UsageError(f"no such data file: {args.data}")
    data = load_dataset(args.data)
    consts = np.array([float(c) for c in _split(args.consts)]) if args.consts else np.empty(0)
    for seq in _parse_lines(notation, lines):
        if not depth_of(seq)[1]:
            print(f"error: incomplete expression: {format_tokens(seq)}", file=sys.stderr)
            return 1
        if seq.num_constants != len(consts):
            raise UsageError(f"expression has {seq.num_constants} constants, got {len(consts)}")
        if seq.table.num_variables > data.num_features:
            raise UsageError("expression uses more variables than the dataset has")
        m = mse(evaluate(seq, data, consts), data.y)
        print(f"mse {m:.10g} score {score(m):.10g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fixedsr", description="Fixed-depth prefix/postfix symbolic regression.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("search", help="run one search")
    s.add_argument("--algo", choices=ALGORITHMS, required=True)
    s.add_argument("--notation", choices=("prefix", "postfix"), default="postfix")
    s.add_argument("--depth", type=int, required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV with header x1,...,xD,y")
    src.add_argument("--benchmark", help="catalog id, e.g. hemberg-1")
    s.add_argument("--budget", type=float, default=120.0, help="seconds")
    s.add_argument("--max-iterations", type=int,
                   help="iteration cap; with --time-free the run ignores the wall clock")
    s.add_argument("--time-free", action="store_true")
    s.add_argument("--n-iter", type=int, default=50_000)
    s.add_argument("--sample-interval", type=float, default=6.0)
    s.add_argument("--population", type=int, default=2000)
    s.add_argument("--samples", type=int, help="benchmark dataset size override")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="trace CSV path")
    _add_table_flags(s)
    s.set_defaults(func=cmd_search)

    b = sub.add_parser("bench", help="run a benchmark suite")
    b.add_argument("--config", required=True, help="key = value suite config")
    b.add_argument("--out-dir")
    b.add_argument("--parallelism", type=int)
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="random depth-N expressions")
    g.add_argument("--notation", choices=("prefix", "postfix"), default="postfix")
    g.add_argument("--depth", type=int, required=True)
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    _add_table_flags(g)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("enumerate", help="all depth-N expressions")
    e.add_argument("--notation", choices=("prefix", "postfix"), default="prefix")
    e.add_argument("--depth", type=int, required=True)
    e.add_argument("--limit", type=int, default=1_000_000)
    _add_table_flags(e)
    e.set_defaults(func=cmd_enumerate)

    for name, func, helptext in (("depth", cmd_depth, "print depth and completeness"),
                                 ("convert", cmd_convert, "switch notation")):
        c = sub.add_parser(name, help=helptext)
        _add_expr_flags(c)
        c.set_defaults(func=func)

    v = sub.add_parser("eval", help="MSE and score of an expression on a dataset")
    _add_expr_flags(v)
    v.add_argument("--data", required=True)
    v.add_argument("--consts", default="", help="comma separated constant values")
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if getattr(args, "time_free", False):
            if args.max_iterations is None:
                raise UsageError("--time-free needs --max-iterations")
            args.budget = None
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GrammarError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

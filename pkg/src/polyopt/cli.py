"""Command line interface: read an input file, optimize each expression,
emit code and statistics."""

from __future__ import annotations

import argparse
import os
import sys

from .core import Polynomial, count_operations
from .driver import (OptimizerSettings, optimize, scatter_csv,
                     scatter_experiment, shift_search)
from .frontend import (EmitSettings, SourceExpression, emit,
                       emit_debug_substitutions, parse, read_input_file)
from .horner import Direction, print_scheme

EXIT_USAGE = 2
EXIT_IO = 1
EXIT_INTERNAL = 3

_DIRECTIONS = {d.value: d for d in Direction}


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="polyopt",
        description="Rewrite multivariate polynomials as short "
                    "straight-line evaluation programs.")
    ap.add_argument("input", help="input file ('-' for stdin)")
    ap.add_argument("-o", "--output", help="write emitted code here "
                                           "(default stdout)")
    level = ap.add_mutually_exclusive_group()
    for n in range(4):
        level.add_argument(f"-O{n}", dest="level", action="store_const",
                           const=f"O{n}",
                           help=f"optimization level {n}")
    ap.set_defaults(level="O0")
    ap.add_argument("--horner", choices=["occurrence", "mcts"])
    ap.add_argument("--direction", choices=sorted(_DIRECTIONS))
    ap.add_argument("--mcts-constant", type=float, metavar="F")
    ap.add_argument("--mcts-num-expand", type=int, metavar="N")
    ap.add_argument("--mcts-num-keep", type=int, metavar="N")
    ap.add_argument("--mcts-num-repeat", type=int, metavar="N")
    ap.add_argument("--mcts-time-limit", type=float, metavar="S")
    ap.add_argument("--method", choices=["none", "cse", "greedy",
                                         "csegreedy"])
    ap.add_argument("--greedy-max-perc", type=float, metavar="P")
    ap.add_argument("--greedy-min-num", type=int, metavar="N")
    ap.add_argument("--greedy-time-limit", type=float, metavar="S")
    ap.add_argument("--time-limit", type=float, metavar="S")
    ap.add_argument("--stats", action="store_true")
    ap.add_argument("--scheme", metavar="LIST",
                    help="comma separated fixed Horner order")
    ap.add_argument("--print-scheme", action="store_true")
    ap.add_argument("--debug", action="store_true",
                    help="also print reversed 'id' substitution lines")
    ap.add_argument("--seed", type=int,
                    default=None, help="RNG seed (default: POLYOPT_SEED "
                                       "env var, then 0)")
    ap.add_argument("--dialect", choices=["plain", "c", "fortran"],
                    default="plain")
    ap.add_argument("--temp-name", metavar="NAME",
                    help="temporary array name; NAME_ scalars by default")
    ap.add_argument("--temp-style", choices=["scalar", "array"],
                    default="scalar")
    ap.add_argument("--line-width", type=int, default=80)
    ap.add_argument("--bracket", metavar="VAR",
                    help="optimize each expression bracketed in VAR")
    ap.add_argument("--shift-groups", metavar="SPEC",
                    help="variable groups 'x,y;z,w' for the shift "
                         "preprocessor")
    ap.add_argument("--scatter", metavar="LO:HI:log|lin:N",
                    help="cp scatter experiment, CSV on stdout")
    return ap


def _settings_from_args(args) -> OptimizerSettings:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("POLYOPT_SEED", "0"))
    return OptimizerSettings.preset(
        args.level,
        horner=args.horner,
        direction=_DIRECTIONS[args.direction] if args.direction else None,
        method=args.method,
        mcts_constant=args.mcts_constant,
        mcts_num_expand=args.mcts_num_expand,
        mcts_num_keep=args.mcts_num_keep,
        mcts_num_repeat=args.mcts_num_repeat,
        mcts_time_limit=args.mcts_time_limit,
        greedy_max_perc=args.greedy_max_perc,
        greedy_min_num=args.greedy_min_num,
        greedy_time_limit=args.greedy_time_limit,
        time_limit_seconds=args.time_limit,
        stats=args.stats or None,
        print_scheme=args.print_scheme or None,
        debug=args.debug or None,
        seed=seed,
    )


def _bracket_contents(poly, symbols, bracket_name, expr_name):
    vid = symbols.index(bracket_name)
    by_power = {}
    for exps, c in poly.terms:
        d = exps[vid]
        stripped = exps[:vid] + (0,) + exps[vid + 1:]
        by_power.setdefault(d, []).append((stripped, c))
    outputs = []
    for d in sorted(by_power):
        key = (f"{expr_name}[{bracket_name}^{d}]" if d > 1 else
               f"{expr_name}[{bracket_name}]" if d == 1 else
               f"{expr_name}[1]")
        outputs.append((key, Polynomial(poly.nvars, by_power[d],
                                        poly.denom)))
    return outputs


def _parse_scatter(spec: str):
    parts = spec.split(":")
    if len(parts) != 4:
        raise ValueError("--scatter wants LO:HI:log|lin:N")
    return (float(parts[0]), float(parts[1])), parts[2], int(parts[3])


def _comment(dialect: str, text: str) -> str:
    if dialect == "c":
        return f"/* {text} */"
    if dialect == "fortran":
        return f"* {text}"
    return f"* {text}"


def cli_run(argv=None) -> int:
    ap = build_arg_parser()
    args = ap.parse_args(argv)
    try:
        settings = _settings_from_args(args)
    except ValueError as err:
        ap.error(str(err))  # exits with code 2
    try:
        if args.input == "-":
            text = sys.stdin.read()
        else:
            with open(args.input, "r", encoding="utf-8") as fh:
                text = fh.read()
    except OSError as err:
        print(f"polyopt: {err}", file=sys.stderr)
        return EXIT_IO
    out_fh = None
    try:
        symbols, sources = read_input_file(text)
        if args.scheme:
            wanted = [s.strip() for s in args.scheme.split(",") if s.strip()]
            missing = [s for s in wanted if s not in symbols]
            if missing:
                raise ValueError(f"--scheme symbols not declared: "
                                 f"{', '.join(missing)}")
            settings = settings.with_overrides(
                scheme=[symbols.index(s) for s in wanted])
        emit_settings = EmitSettings(
            dialect=args.dialect,
            temp_style=args.temp_style,
            temp_name=args.temp_name or "",
            line_width=args.line_width,
        )
        if args.output:
            out_fh = open(args.output, "w", encoding="utf-8")
        else:
            out_fh = sys.stdout
        for source in sources:
            poly = parse(source, symbols)
            if args.scatter:
                cp_range, dist, samples = _parse_scatter(args.scatter)
                rows = scatter_experiment(poly, settings, samples, cp_range,
                                          dist, settings.seed)
                out_fh.write(scatter_csv(rows))
                continue
            if args.shift_groups is not None:
                groups = []
                for chunk in args.shift_groups.split(";"):
                    members = [s.strip() for s in chunk.split(",")
                               if s.strip()]
                    groups.append([symbols.index(s) for s in members])
                rules, poly, unshift = shift_search(poly, groups,
                                                    names=symbols)
                if rules and settings.stats:
                    ops = count_operations(unshift)
                    print(f"*** SHIFT: {len(rules)} rules, unshift "
                          f"{ops.brief()}", file=sys.stderr)
                if rules:
                    out_fh.write(_comment(args.dialect, "unshift:") + "\n")
                    out_fh.write(emit(unshift, symbols, emit_settings))
            if args.bracket:
                if args.bracket not in symbols:
                    raise ValueError(f"bracket symbol '{args.bracket}' "
                                     "not declared")
                subject = _bracket_contents(poly, symbols, args.bracket,
                                            source.name)
            else:
                subject = poly
            result = optimize(subject, settings, name=source.name)
            if settings.stats:
                print(f"*** STATS: original  {result.before.brief()}",
                      file=sys.stderr)
                print(f"*** STATS: optimized {result.after.brief()}",
                      file=sys.stderr)
            if settings.print_scheme and result.order is not None:
                out_fh.write(_comment(
                    args.dialect,
                    "scheme: " + print_scheme(result.order, symbols)) + "\n")
            out_fh.write(emit(result.program, symbols, emit_settings))
            if settings.debug:
                out_fh.write(emit_debug_substitutions(result.program,
                                                      symbols,
                                                      emit_settings))
        return 0
    except (ValueError, KeyError) as err:
        print(f"polyopt: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"polyopt: {err}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as err:
        print(f"polyopt: internal invariant violated: {err}",
              file=sys.stderr)
        return EXIT_INTERNAL
    finally:
        if out_fh is not None and out_fh is not sys.stdout:
            out_fh.close()


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()

"""polyopt: rewrite large multivariate polynomials as short straight-line
evaluation programs (Horner schemes searched by occurrence order or Monte
Carlo tree search, CSE, greedy subexpression extraction, partial
factorization, temporary recycling) and emit plain/C/Fortran code."""

from .alloc import (LiveRange, check_no_slot_conflicts, dfs_schedule,
                    live_ranges, recycle, temp_slot_range)
from .core import (Instruction, OpStats, OutputExpr, Polynomial, Program,
                   Variable, count_operations, equivalent, evaluate_mod,
                   normalize, power_cost)
from .driver import (BracketedExpression, OptimizerSettings, OptimizeResult,
                     ShiftRule, optimize, raw_program, resultant_fixture,
                     resultant_symbols, scatter_csv, scatter_experiment,
                     shift_search)
from .frontend import (EmitSettings, ParseError, SourceExpression, emit,
                       emit_debug_substitutions, parse, read_input_file)
from .horner import (Direction, HornerOrder, apply_scheme, fixed_scheme,
                     occurrence_order, print_scheme)
from .mcts import (MctsSettings, PlayoutResult, SchemeScorer, SearchNode,
                   mcts_search, playout, uct_select)
from .simplify import (GreedySettings, count_small_subexprs, cse,
                       greedy_round, merge_operators, optimize_program,
                       partial_factor, program_from_tree)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]

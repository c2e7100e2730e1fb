import random

import pytest

from polyopt import (apply_scheme, check_no_slot_conflicts, count_operations,
                     cse, dfs_schedule, equivalent, live_ranges,
                     occurrence_order, optimize_program, program_from_tree,
                     recycle, temp_slot_range)
from polyopt.core import Instruction, OutputExpr, Program

from conftest import random_polynomial

W, X, Y, Z = 0, 1, 2, 3


def eq5_right_program(order=None):
    # Z1=w^2; Z2=y+z; Z3=Z1*Z2; Z4=x+Z2; Z5=w*Z4; a=Z3+Z5
    T = lambda k: 4 + k
    ins = {
        1: Instruction(T(1), ((1, ((W, 2),)),), 0),
        2: Instruction(T(2), ((1, ((Y, 1),)), (1, ((Z, 1),))), 0),
        3: Instruction(T(3), ((1, ((T(1), 1), (T(2), 1))),), 0),
        4: Instruction(T(4), ((1, ((X, 1),)), (1, ((T(2), 1),))), 0),
        5: Instruction(T(5), ((1, ((W, 1), (T(4), 1))),), 0),
    }
    order = order or [1, 2, 3, 4, 5]
    return Program(4, [ins[k] for k in order],
                   [OutputExpr("a", ((1, ((T(3), 1),)), (1, ((T(5), 1),))),
                               0)])


class TestDfsSchedule:
    def test_eq5_listed_order(self):
        sched = dfs_schedule(eq5_right_program())
        targets = [i.target for i in sched.instructions]
        assert targets == [5, 6, 7, 8, 9]

    def test_any_topological_input_same_output(self):
        reference = dfs_schedule(eq5_right_program()).instructions
        for order in ([2, 1, 4, 3, 5], [1, 2, 4, 3, 5], [2, 4, 1, 5, 3]):
            sched = dfs_schedule(eq5_right_program(order))
            assert sched.instructions == reference

    def test_single_instruction(self):
        prog = Program(1, [Instruction(1, ((1, ((0, 2),)),), 0)],
                       [OutputExpr("F", ((1, ((1, 1),)),), 0)])
        assert dfs_schedule(prog).instructions == prog.instructions

    def test_cycle_detected(self):
        prog = Program(1, [
            Instruction(1, ((1, ((2, 1),)),), 0),
            Instruction(2, ((1, ((1, 1),)),), 0),
        ], [OutputExpr("F", ((1, ((2, 1),)),), 0)])
        with pytest.raises(ValueError):
            dfs_schedule(prog)


class TestRecycle:
    def test_eq9_two_slots(self):
        rec = recycle(dfs_schedule(eq5_right_program()))
        assert temp_slot_range(rec) == (1, 2)
        assert check_no_slot_conflicts(rec) == 2
        assert equivalent(eq5_right_program(), rec)
        # the paper's in-place shape: slot1 = slot1 * slot2 at step 3
        targets = [i.target - 4 + 1 for i in rec.instructions]
        assert targets == [1, 2, 1, 2, 2]

    def test_def_kills_operand_chain_single_slot(self):
        # Z1 = x + 1; Z2 = Z1*y; out = Z2  -> one slot reused in place
        prog = Program(2, [
            Instruction(2, ((1, ((0, 1),)),), 1),
            Instruction(3, ((1, ((2, 1), (1, 1))),), 0),
        ], [OutputExpr("out", ((1, ((3, 1),)),), 0)])
        rec = recycle(prog)
        assert temp_slot_range(rec) == (1, 1)
        assert equivalent(prog, rec)

    def test_mutually_live_values_get_distinct_slots(self):
        k = 5
        ins = [Instruction(1 + i, ((1, ((0, 1),)),), i + 1)
               for i in range(k)]
        out = OutputExpr("s", tuple((1, ((1 + i, 1),)) for i in range(k)), 0)
        rec = recycle(Program(1, ins, [out]))
        assert temp_slot_range(rec) == (1, k)
        assert check_no_slot_conflicts(rec) == k

    def test_live_ranges_output_uses_extend_to_end(self):
        prog = eq5_right_program()
        ranges = {r.temp_id: r for r in live_ranges(prog)}
        assert ranges[7].last_use == 5  # Z3 read by the output
        assert ranges[6].last_use == 3  # Z2 dies at Z4

    def test_pipeline_programs_conflict_free(self):
        rng = random.Random(47)
        for _ in range(40):
            p = random_polynomial(rng, rng.randint(2, 6),
                                  rng.randint(3, 25))
            tree = apply_scheme(p, occurrence_order(p))
            prog = optimize_program(
                program_from_tree([("F", tree)], nvars=p.nvars))
            before_temps = len(prog.instructions)
            rec = recycle(dfs_schedule(prog))
            slots = check_no_slot_conflicts(rec) if rec.instructions else 0
            assert slots <= before_temps
            assert equivalent(p, rec, trials=6)
            assert count_operations(rec).total == count_operations(prog).total

"""Final scheduling and temporary recycling.

Instructions are sorted depth-first from the outputs, live ranges are read
off first/last appearances, and a linear scan renumbers every definition to
the lowest slot free at that point.  An operand whose last use is the
current instruction frees its slot before the target is placed, so in-place
updates like ``Z1 = Z1*Z2`` come out naturally.  Slot indices are 1-based.
"""

from __future__ import annotations

import heapq
from typing import List, NamedTuple

from .core import Instruction, OutputExpr, Program


class LiveRange(NamedTuple):
    temp_id: int
    first_def: int
    last_use: int


def _rhs_temp_refs(terms, nvars):
    for _, factors in terms:
        for ref, _ in factors:
            if ref >= nvars:
                yield ref


def dfs_schedule(program: Program) -> Program:
    """Reorder instructions depth-first from the outputs.

    Each instruction appears immediately after its operands' subtrees; the
    traversal follows output order, then operand order, so any topological
    input ordering yields the same schedule.  Temp ids are unchanged.
    """
    nvars = program.nvars
    defs = {}
    for ins in program.instructions:
        if ins.target in defs:
            raise ValueError("dfs_schedule needs unique targets "
                             "(run before recycle)")
        defs[ins.target] = ins
    ordered: List[Instruction] = []
    done = set()
    in_progress = set()
    for out in program.outputs:
        stack = [(ref, False) for ref in
                 reversed(list(_rhs_temp_refs(out.terms, nvars)))]
        while stack:
            ref, expanded = stack.pop()
            if expanded:
                in_progress.discard(ref)
                done.add(ref)
                ordered.append(defs[ref])
                continue
            if ref in done:
                continue
            if ref in in_progress:
                raise ValueError("cycle in def-use graph")
            if ref not in defs:
                raise ValueError(f"use of undefined temp {ref}")
            in_progress.add(ref)
            stack.append((ref, True))
            ins = defs[ref]
            stack.extend(
                (r, False)
                for r in reversed(list(_rhs_temp_refs(ins.terms, nvars)))
                if r not in done)
    return Program(nvars, ordered, program.outputs)


def live_ranges(program: Program) -> List[LiveRange]:
    """One range per definition: instruction index of the def and of the
    last use (outputs use at index len(instructions))."""
    nvars = program.nvars
    n = len(program.instructions)
    current = {}  # target ref -> range list index
    ranges: List[LiveRange] = []

    def touch(ref, idx):
        if ref >= nvars:
            if ref not in current:
                raise ValueError(f"use of undefined temp {ref}")
            k = current[ref]
            ranges[k] = ranges[k]._replace(last_use=idx)

    for idx, ins in enumerate(program.instructions):
        for ref in _rhs_temp_refs(ins.terms, nvars):
            touch(ref, idx)
        current[ins.target] = len(ranges)
        ranges.append(LiveRange(ins.target, idx, idx))
    for out in program.outputs:
        for ref in _rhs_temp_refs(out.terms, nvars):
            touch(ref, n)
    return ranges


def recycle(program: Program) -> Program:
    """Linear-scan slot assignment; the result uses exactly as many
    temporaries as the maximum number of simultaneously live values."""
    nvars = program.nvars
    ranges = live_ranges(program)
    range_of_def = {}  # (def idx) -> LiveRange
    for r in ranges:
        range_of_def[r.first_def] = r
    current_def = {}   # original target ref -> def idx
    slot_of_def = {}
    free: List[int] = []
    top = 0
    new_instructions = []

    def remap(terms, at_idx):
        new_terms = []
        dying = set()
        for c, factors in terms:
            nf = []
            for ref, e in factors:
                if ref >= nvars:
                    d = current_def[ref]
                    slot = slot_of_def[d]
                    if range_of_def[d].last_use == at_idx:
                        dying.add(slot)
                    nf.append((nvars + slot - 1, e))
                else:
                    nf.append((ref, e))
            new_terms.append((c, tuple(nf)))
        return tuple(new_terms), dying

    for idx, ins in enumerate(program.instructions):
        new_terms, dying = remap(ins.terms, idx)
        for slot in dying:
            heapq.heappush(free, slot)
        if free:
            slot = heapq.heappop(free)
        else:
            top += 1
            slot = top
        slot_of_def[idx] = slot
        current_def[ins.target] = idx
        new_instructions.append(
            Instruction(nvars + slot - 1, new_terms, ins.const))
    new_outputs = []
    for out in program.outputs:
        new_terms, _ = remap(out.terms, len(program.instructions))
        new_outputs.append(OutputExpr(out.name, new_terms, out.const,
                                      out.denom))
    return Program(nvars, new_instructions, new_outputs)


def temp_slot_range(program: Program):
    """(lowest, highest) 1-based slot index used; (0, 0) when no temps."""
    refs = [ins.target for ins in program.instructions]
    if not refs:
        return 0, 0
    nvars = program.nvars
    return (min(refs) - nvars + 1, max(refs) - nvars + 1)


def check_no_slot_conflicts(program: Program) -> int:
    """Re-derive value live ranges on a recycled program and verify no two
    overlapping values share a slot; returns the slot count."""
    nvars = program.nvars
    ranges = live_ranges(program)
    by_slot = {}
    for r in ranges:
        by_slot.setdefault(r.temp_id, []).append(r)
    for slot_ranges in by_slot.values():
        slot_ranges.sort(key=lambda r: r.first_def)
        for a, b in zip(slot_ranges, slot_ranges[1:]):
            if b.first_def < a.last_use:
                raise AssertionError(
                    f"slot {a.temp_id - nvars + 1}: value defined at "
                    f"{a.first_def} still live at {b.first_def}")
    return len(by_slot)

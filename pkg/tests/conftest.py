"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own algorithms: closures
are computed by naive iterate-to-fixpoint set expansion, predicates by
direct arithmetic, so tests compare two genuinely different routes to the
same answer.
"""

from __future__ import annotations

import pytest

from crnkit import Crn, DiscreteState


def naive_apply_all(crn: Crn, counts: tuple[int, ...]):
    """Every one-step successor of a state (non-mute reactions only)."""
    out = []
    for rv, dv, mute in zip(crn.reactant_vectors, crn.delta_vectors, crn.mute_flags):
        if mute:
            continue
        if all(c >= r for c, r in zip(counts, rv)):
            out.append(tuple(c + d for c, d in zip(counts, dv)))
    return out


def naive_post(crn: Crn, state: DiscreteState, cap: int = 200_000) -> set[tuple[int, ...]]:
    """Fixpoint iteration: repeatedly expand the whole set until stable."""
    seen = {tuple(state.counts)}
    while True:
        fresh = set()
        for s in seen:
            for nxt in naive_apply_all(crn, s):
                if nxt not in seen:
                    fresh.add(nxt)
        if not fresh:
            return seen
        seen |= fresh
        if len(seen) > cap:
            raise RuntimeError("oracle cap exceeded")


def naive_terminals(crn: Crn, states: set[tuple[int, ...]]) -> set[tuple[int, ...]]:
    return {s for s in states if not naive_apply_all(crn, s)}


def naive_can_reach(crn: Crn, states: set[tuple[int, ...]],
                    targets: set[tuple[int, ...]]) -> set[tuple[int, ...]]:
    """Backward fixpoint: all states with a path into `targets`."""
    good = set(targets)
    while True:
        grew = False
        for s in states:
            if s in good:
                continue
            if any(nxt in good for nxt in naive_apply_all(crn, s)):
                good.add(s)
                grew = True
        if not grew:
            return good


@pytest.fixture
def worked_crn() -> Crn:
    """The four-reaction network used in the discrete walkthroughs."""
    return Crn.from_lines("3A -> 2B", "B + C -> A", "C -> B", "B -> C")


@pytest.fixture
def mod3_crd():
    from crnkit import Crd

    crn = Crn.from_lines("3X -> V", "3Y -> V", "X + Y -> V", "X + V -> X", "Y + V -> Y")
    return Crd(crn, ("X", "Y"), frozenset({"X", "Y"}), frozenset({"V"}))

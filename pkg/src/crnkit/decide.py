"""Deciders and computers over discrete networks.

A decider (`Crd`) tags a network with input species and two disjoint voter
sets; a computer (`Crc`) tags it with input and output species.  Verdicts
are computed by exact reachability over the finite forward closure of the
padded input:

* halting:   every reachable state can still reach a terminal state whose
  voters are unanimous for the winning bit;
* stable:    as above with "terminal" relaxed to "output never changes
  again along any continuation".

Infinite (truncated) closures yield an inconclusive verdict rather than a
guess.  `decide_many` evaluates a batch of inputs against one shared
closure, which is how the exhaustive correctness sweeps stay fast.

The module also compiles threshold and modular predicate atoms into
deciders and evaluates boolean combinations of atoms at the verdict level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from . import reach
from .core import Crn, CrnError, DiscreteState, Reaction

DEFAULT_BOUND = reach.DEFAULT_BOUND

Semantics = Literal["halting", "stable"]


@dataclass(frozen=True)
class Crd:
    """A decider: network, input species, 0-voters and 1-voters."""

    crn: Crn
    input_species: tuple[str, ...]
    voters0: frozenset[str]
    voters1: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "input_species", tuple(self.input_species))
        object.__setattr__(self, "voters0", frozenset(self.voters0))
        object.__setattr__(self, "voters1", frozenset(self.voters1))
        declared = set(self.crn.species_names)
        for group, label in ((self.input_species, "input"),
                             (self.voters0, "0-voter"), (self.voters1, "1-voter")):
            unknown = set(group) - declared
            if unknown:
                raise CrnError(f"{label} species not in network: {sorted(unknown)}")
        if self.voters0 & self.voters1:
            raise CrnError("voter sets must be disjoint")

    def require_total_voters(self) -> "Crd":
        """Assert that every species votes; returns self for chaining."""
        missing = set(self.crn.species_names) - self.voters0 - self.voters1
        if missing:
            raise CrnError(f"species without a vote: {sorted(missing)}")
        return self


@dataclass(frozen=True)
class Crc:
    """A computer: network with disjoint input and output species."""

    crn: Crn
    input_species: tuple[str, ...]
    output_species: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_species", tuple(self.input_species))
        object.__setattr__(self, "output_species", tuple(self.output_species))
        declared = set(self.crn.species_names)
        for group, label in ((self.input_species, "input"), (self.output_species, "output")):
            unknown = set(group) - declared
            if unknown:
                raise CrnError(f"{label} species not in network: {sorted(unknown)}")
        if set(self.input_species) & set(self.output_species):
            raise CrnError("input and output species must be disjoint")


class VerdictKind(Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    UNDECIDED = "undecided"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    witness: DiscreteState | None = None
    states_explored: int = 0
    truncated: bool = False

    @property
    def accepted(self) -> bool:
        return self.kind is VerdictKind.ACCEPT

    @property
    def rejected(self) -> bool:
        return self.kind is VerdictKind.REJECT

    def as_bit(self) -> int:
        if self.kind is VerdictKind.ACCEPT:
            return 1
        if self.kind is VerdictKind.REJECT:
            return 0
        raise CrnError(f"verdict is not definite: {self.kind.value}")

    def to_json(self, crn: Crn | None = None) -> str:
        payload: dict = {
            "kind": self.kind.value,
            "states_explored": self.states_explored,
            "truncated": self.truncated,
        }
        if self.witness is not None:
            payload["witness"] = (crn.state_to_map(self.witness) if crn
                                  else list(self.witness.counts))
        return json.dumps(payload, indent=2)


def pad_input(machine: Crd | Crc, input_counts: Mapping[str, int]) -> DiscreteState:
    """Embed an input-species count map into a full state (zeros elsewhere)."""
    extra = set(input_counts) - set(machine.input_species)
    if extra:
        raise CrnError(f"not input species: {sorted(extra)}")
    return machine.crn.state(dict(input_counts))


def output_of(crd: Crd, c: DiscreteState) -> int | None:
    """Consensus output of a state: the bit whose voters are present alone."""
    names = crd.crn.species_names
    has0 = any(cnt and names[i] in crd.voters0 for i, cnt in enumerate(c.counts))
    has1 = any(cnt and names[i] in crd.voters1 for i, cnt in enumerate(c.counts))
    if has1 and not has0:
        return 1
    if has0 and not has1:
        return 0
    return None


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

def _voter_index(crd: Crd) -> tuple[np.ndarray, np.ndarray]:
    names = crd.crn.species_names
    v0 = np.array([n in crd.voters0 for n in names], dtype=bool)
    v1 = np.array([n in crd.voters1 for n in names], dtype=bool)
    return v0, v1


def _output_array(crd: Crd, result: reach.ReachResult) -> np.ndarray:
    """Per-state consensus output: 0, 1, or -1 for undefined."""
    v0, v1 = _voter_index(crd)
    arr = result.states_array
    has0 = (arr[:, v0] > 0).any(axis=1)
    has1 = (arr[:, v1] > 0).any(axis=1)
    out = np.full(len(result), -1, dtype=np.int8)
    out[has1 & ~has0] = 1
    out[has0 & ~has1] = 0
    return out


def _halting_masks(crd: Crd, result: reach.ReachResult) -> tuple[np.ndarray, np.ndarray]:
    """pre(T_0), pre(T_1) within the closed universe."""
    out = _output_array(crd, result)
    term = result.terminal_mask()
    r0 = result.backward_mask(np.flatnonzero(term & (out == 0)))
    r1 = result.backward_mask(np.flatnonzero(term & (out == 1)))
    return r0, r1


def _stable_masks(crd: Crd, result: reach.ReachResult) -> tuple[np.ndarray, np.ndarray]:
    """Masks of output-0-stable and output-1-stable states."""
    out = _output_array(crd, result)
    s0 = ~result.backward_mask(np.flatnonzero(out != 0))
    s1 = ~result.backward_mask(np.flatnonzero(out != 1))
    return s0, s1


def _verdicts_on(crd: Crd, result: reach.ReachResult, semantics: Semantics,
                 ) -> list[Verdict]:
    n = len(result)
    if result.truncated:
        v = Verdict(VerdictKind.INCONCLUSIVE, None, n, True)
        return [v] * len(result.source_indices)
    if semantics == "halting":
        r0, r1 = _halting_masks(crd, result)
    else:
        s0, s1 = _stable_masks(crd, result)
        r0 = result.backward_mask(np.flatnonzero(s0))
        r1 = result.backward_mask(np.flatnonzero(s1))
    doom0 = result.backward_mask(np.flatnonzero(~r0))
    doom1 = result.backward_mask(np.flatnonzero(~r1))
    verdicts = []
    adj: list[list[int]] | None = None
    for src in result.source_indices:
        if not doom1[src]:
            verdicts.append(Verdict(VerdictKind.ACCEPT, None, n, False))
        elif not doom0[src]:
            verdicts.append(Verdict(VerdictKind.REJECT, None, n, False))
        else:
            if adj is None:
                adj = result.successors()
            witness = _find_witness(result, adj, src, ~r0, ~r1)
            verdicts.append(Verdict(VerdictKind.UNDECIDED, witness, n, False))
    return verdicts


def _find_witness(result, adj, src, bad0, bad1) -> DiscreteState:
    """Minimal-depth reachable state that can no longer produce some output.

    Prefers a state outside both predecessor sets; otherwise the shallowest
    state from which acceptance is unreachable.
    """
    from collections import deque

    seen = {src}
    queue = deque([src])
    fallback = None
    while queue:
        i = queue.popleft()
        if bad0[i] and bad1[i]:
            return result.state_at(i)
        if fallback is None and bad1[i]:
            fallback = i
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    if fallback is None:
        fallback = src
    return result.state_at(fallback)


def _single_verdict(crd: Crd, input_counts: Mapping[str, int], bound: int,
                    semantics: Semantics) -> Verdict:
    iota = pad_input(crd, input_counts)
    if iota.cardinality == 0:
        raise CrnError("input state must be nonzero")
    result = reach.closure(crd.crn, iota, bound)
    return _verdicts_on(crd, result, semantics)[0]


def halting_verdict(crd: Crd, input_counts: Mapping[str, int],
                    bound: int = DEFAULT_BOUND) -> Verdict:
    """Does every reachable state keep a unanimous terminal state reachable?"""
    return _single_verdict(crd, input_counts, bound, "halting")


def stable_verdict(crd: Crd, input_counts: Mapping[str, int],
                   bound: int = DEFAULT_BOUND) -> Verdict:
    """As `halting_verdict` with output-stable states in place of terminals."""
    return _single_verdict(crd, input_counts, bound, "stable")


def decide_many(crd: Crd, inputs: Sequence[Mapping[str, int]],
                bound: int = DEFAULT_BOUND, semantics: Semantics = "halting",
                ) -> list[Verdict]:
    """Verdicts for many inputs over one shared forward closure.

    Each verdict is exactly what `halting_verdict`/`stable_verdict` would
    return; the closure, terminal analysis and predecessor sets are simply
    computed once for the union of all inputs.
    """
    sources = []
    for counts in inputs:
        iota = pad_input(crd, counts)
        if iota.cardinality == 0:
            raise CrnError("input state must be nonzero")
        sources.append(iota)
    result = reach.closure(crd.crn, sources, bound)
    return _verdicts_on(crd, result, semantics)


# ---------------------------------------------------------------------------
# computers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrcOutcome:
    """Result of running a computer to stabilization."""

    output: dict[str, int] | None
    witness: DiscreteState | None = None
    states_explored: int = 0
    truncated: bool = False

    @property
    def stabilized(self) -> bool:
        return self.output is not None


def crc_output_verdict(crc: Crc, input_counts: Mapping[str, int],
                       bound: int = DEFAULT_BOUND) -> CrcOutcome:
    """The unique output the computer stabilizes to, if any.

    A state is output-stable when no continuation changes the projection to
    the output species; the input stabilizes to ``o`` when every reachable
    state can still reach an output-stable state with output ``o``.
    """
    iota = pad_input(crc, input_counts)
    result = reach.closure(crc.crn, iota, bound)
    if result.truncated:
        return CrcOutcome(None, None, len(result), True)
    gamma = [crc.crn.species_index[n] for n in crc.output_species]
    outs = result.states_array[:, gamma]
    uniq, inverse = np.unique(outs, axis=0, return_inverse=True)
    n = len(result)
    for o_id in range(len(uniq)):
        bad = inverse != o_id
        stable_o = ~result.backward_mask(np.flatnonzero(bad))
        if not stable_o.any():
            continue
        if result.backward_mask(np.flatnonzero(stable_o)).all():
            output = {name: int(v) for name, v in zip(crc.output_species, uniq[o_id])}
            return CrcOutcome(output, None, n, False)
    # witness: a state that is not output-stable and cannot reach any
    # output-stable state... fall back to the first non-stable state
    stable_any = np.zeros(n, dtype=bool)
    for o_id in range(len(uniq)):
        stable_any |= ~result.backward_mask(np.flatnonzero(inverse != o_id))
    bad_idx = np.flatnonzero(~result.backward_mask(np.flatnonzero(stable_any)))
    witness = result.state_at(int(bad_idx[0])) if len(bad_idx) else result.state_at(0)
    return CrcOutcome(None, witness, n, False)


# ---------------------------------------------------------------------------
# predicate atoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdAtom:
    """Atom ``a . x <= b`` over the input species."""

    a: tuple[int, ...]
    b: int

    def holds(self, x: Sequence[int]) -> bool:
        return sum(ai * xi for ai, xi in zip(self.a, x)) <= self.b


@dataclass(frozen=True)
class ModAtom:
    """Atom ``a . x = b  (mod m)`` over the input species."""

    a: tuple[int, ...]
    b: int
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise CrnError("modulus must be >= 2")
        object.__setattr__(self, "b", self.b % self.m)

    def holds(self, x: Sequence[int]) -> bool:
        return sum(ai * xi for ai, xi in zip(self.a, x)) % self.m == self.b


@dataclass(frozen=True)
class Not:
    child: "PredicateExpr"


@dataclass(frozen=True)
class And:
    children: tuple["PredicateExpr", ...]

    def __init__(self, *children: "PredicateExpr"):
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Or:
    children: tuple["PredicateExpr", ...]

    def __init__(self, *children: "PredicateExpr"):
        object.__setattr__(self, "children", tuple(children))


PredicateExpr = ThresholdAtom | ModAtom | Not | And | Or


def atoms_of(expr: PredicateExpr) -> set[ThresholdAtom | ModAtom]:
    if isinstance(expr, (ThresholdAtom, ModAtom)):
        return {expr}
    if isinstance(expr, Not):
        return atoms_of(expr.child)
    out: set = set()
    for child in expr.children:
        out |= atoms_of(child)
    return out


def _default_names(n: int) -> tuple[str, ...]:
    return tuple(f"X{i + 1}" for i in range(n))


def compile_mod_atom(a: Sequence[int], b: int, m: int,
                     input_species: Sequence[str] | None = None) -> Crd:
    """Decider for ``a . x = b (mod m)`` by residue pairing.

    Every input molecule converts to a token carrying its coefficient's
    residue class; tokens merge pairwise, adding residues mod m.  Molecule
    count strictly decreases with each merge, so every run halts with a
    single token whose class is the total, and that token is the sole voter
    present.  This makes each halting state's output forced and correct.
    """
    if m < 2:
        raise CrnError("modulus must be >= 2")
    b %= m
    names = tuple(input_species) if input_species is not None else _default_names(len(a))
    if len(names) != len(a):
        raise CrnError("coefficient vector and input species differ in length")
    prefix = "R"
    taken = set(names)
    while any(f"{prefix}{i}" in taken for i in range(m)):
        prefix += "_"
    token = [f"{prefix}{i}" for i in range(m)]
    reactions = []
    for name, ai in zip(names, a):
        reactions.append(Reaction.make({name: 1}, {token[ai % m]: 1}))
    for i in range(m):
        for j in range(i, m):
            lhs = {token[i]: 2} if i == j else {token[i]: 1, token[j]: 1}
            reactions.append(Reaction.make(lhs, {token[(i + j) % m]: 1}))
    crn = Crn.from_reactions(reactions)
    return Crd(crn, names, frozenset(t for i, t in enumerate(token) if i != b),
               frozenset({token[b]}))


def compile_threshold_atom(a: Sequence[int], b: int,
                           input_species: Sequence[str] | None = None) -> Crd:
    """Decider for ``a . x <= b`` by signed-token annihilation.

    Inputs convert to unit tokens (P for positive weight, N for negative)
    plus |b| budget tokens each and one leader token M.  Leaders merge
    (M + M -> M + R) and each merge refunds one budget batch via R, so after
    all merges exactly one budget remains charged; P and N annihilate to the
    inert witness W.  The surviving side fixes the answer: any leftover P
    eats W and flips the leader to "no", while N or W flip it to "yes".
    Every run can halt with voters unanimous, so halting and stabilizing
    verdicts agree with the arithmetic predicate.
    """
    names = tuple(input_species) if input_species is not None else _default_names(len(a))
    if len(names) != len(a):
        raise CrnError("coefficient vector and input species differ in length")
    suffix = ""
    taken = set(names)
    while any(s + suffix in taken for s in ("P", "N", "W", "My", "Mn", "R")):
        suffix += "_"
    P, N, W, MY, MN, R = (s + suffix for s in ("P", "N", "W", "My", "Mn", "R"))

    def budget() -> dict[str, int]:
        if b > 0:
            return {N: b}
        if b < 0:
            return {P: -b}
        return {}

    reactions = []
    for name, ai in zip(names, a):
        products: dict[str, int] = {MY: 1}
        if ai > 0:
            products[P] = products.get(P, 0) + ai
        elif ai < 0:
            products[N] = products.get(N, 0) - ai
        else:
            products[W] = 1
        for sp, cnt in budget().items():
            products[sp] = products.get(sp, 0) + cnt
        reactions.append(Reaction.make({name: 1}, products))
    refund = {R: 1} if b != 0 else {}
    for pair in ({MY: 2}, {MY: 1, MN: 1}, {MN: 2}):
        reactions.append(Reaction.make(pair, {MN: 1, **refund}))
    if b > 0:
        reactions.append(Reaction.make({R: 1}, {P: b}))
    elif b < 0:
        reactions.append(Reaction.make({R: 1}, {N: -b}))
    reactions.append(Reaction.make({P: 1, N: 1}, {W: 1}))
    reactions.append(Reaction.make({P: 1, W: 1}, {P: 1}))
    reactions.append(Reaction.make({P: 1, MY: 1}, {P: 1, MN: 1}))
    reactions.append(Reaction.make({N: 1, MN: 1}, {N: 1, MY: 1}))
    reactions.append(Reaction.make({W: 1, MN: 1}, {W: 1, MY: 1}))
    crn = Crn.from_reactions(reactions)
    return Crd(crn, names, frozenset({P, MN}), frozenset({N, W, MY}))


def compile_atom(atom: ThresholdAtom | ModAtom,
                 input_species: Sequence[str] | None = None) -> Crd:
    if isinstance(atom, ThresholdAtom):
        return compile_threshold_atom(atom.a, atom.b, input_species)
    return compile_mod_atom(atom.a, atom.b, atom.m, input_species)


def eval_predicate(expr: PredicateExpr, input_counts: Mapping[str, int] | Sequence[int],
                   bound: int = DEFAULT_BOUND, semantics: Semantics = "halting",
                   compiled: Mapping[ThresholdAtom | ModAtom, Crd] | None = None,
                   input_species: Sequence[str] | None = None) -> bool:
    """Evaluate a boolean combination of atoms via their compiled deciders.

    Every atom is decided on the input first; a non-definite verdict
    (undecided or inconclusive) raises rather than guessing.
    """
    atoms = sorted(atoms_of(expr), key=repr)
    widths = {len(atom.a) for atom in atoms}
    if len(widths) > 1:
        raise CrnError("atoms disagree on input arity")
    if not isinstance(input_counts, Mapping):
        names = tuple(input_species) if input_species else _default_names(len(input_counts))
        input_counts = dict(zip(names, input_counts))
    verdicts: dict[ThresholdAtom | ModAtom, bool] = {}
    for atom in atoms:
        crd = compiled[atom] if compiled and atom in compiled else compile_atom(
            atom, input_species)
        counts = {name: input_counts.get(name, 0) for name in crd.input_species}
        verdict = _single_verdict(crd, counts, bound, semantics)
        verdicts[atom] = bool(verdict.as_bit())

    def ev(e: PredicateExpr) -> bool:
        if isinstance(e, (ThresholdAtom, ModAtom)):
            return verdicts[e]
        if isinstance(e, Not):
            return not ev(e.child)
        if isinstance(e, And):
            return all(ev(c) for c in e.children)
        if isinstance(e, Or):
            return any(ev(c) for c in e.children)
        raise CrnError(f"unknown predicate node {e!r}")

    return ev(expr)

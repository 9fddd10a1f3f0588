"""Deterministic counter automata and their stochastic-network compilation.

The reference interpreter (`run_ca`) is the correctness oracle.  The
compiler turns each instruction into reactions over one control token:

* ``inc(q, c, q')``        ->  ``q -> c + q'``
* ``dec(q, c, q', q'')``   ->  ``q + c -> q' + D``  and  ``T_1 + q -> q'' + T_l``

plus a shared delay chain ``T_i + D -> T_{i+1} + D`` and ``T_{i+1} -> T_i``
for ``i = 1..l-1``.  The zero branch can only fire while the clock token
sits at ``T_1``; a longer chain (and the ``D`` molecules produced by every
decrement) make that rarer, trading speed for a smaller probability of
taking the zero branch while the counter is still positive.  With ``l = 1``
the chain is empty and the zero branch races unassisted.

`error_probability` measures that trade empirically against the
interpreter.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import Crn, CrnError, DiscreteState, ParseError, Reaction
from .stochastic import StochasticConfig, Trajectory, _spawn_rngs, simulate


@dataclass(frozen=True)
class Inc:
    state: str
    counter: str
    then: str


@dataclass(frozen=True)
class Dec:
    state: str
    counter: str
    then: str       # counter was positive: decrement and go here
    when_zero: str  # counter was zero: go here


Instruction = Inc | Dec


@dataclass(frozen=True)
class CounterAutomaton:
    states: tuple[str, ...]
    counters: tuple[str, ...]
    start: str
    halt: str
    program: tuple[Instruction, ...]
    input_counter: str

    def __post_init__(self):
        states = set(self.states)
        counters = set(self.counters)
        if self.start not in states or self.halt not in states:
            raise CrnError("start/halt state not declared")
        if self.input_counter not in counters:
            raise CrnError(f"input counter {self.input_counter!r} not declared")
        if states & counters:
            raise CrnError("state and counter names must be disjoint")
        by_state: dict[str, Instruction] = {}
        for ins in self.program:
            if ins.state in by_state:
                raise CrnError(f"state {ins.state!r} has two instructions")
            refs = {ins.then} | ({ins.when_zero} if isinstance(ins, Dec) else set())
            if not refs <= states or ins.state not in states:
                raise CrnError(f"instruction {ins} references undeclared states")
            if ins.counter not in counters:
                raise CrnError(f"instruction {ins} references undeclared counter")
            by_state[ins.state] = ins
        missing = states - {self.halt} - set(by_state)
        if missing:
            raise CrnError(f"states without an instruction: {sorted(missing)}")
        if self.halt in by_state:
            raise CrnError("halt state must not carry an instruction")
        object.__setattr__(self, "_by_state", by_state)

    def instruction(self, state: str) -> Instruction:
        return self._by_state[state]


@dataclass(frozen=True)
class CaRun:
    halted: bool
    steps: int
    counters: dict[str, int]


def run_ca(ca: CounterAutomaton, input_value: int, max_steps: int = 1_000_000) -> CaRun:
    """Deterministic reference execution; the oracle for the compiler."""
    if input_value < 0:
        raise CrnError("input must be nonnegative")
    counters = {c: 0 for c in ca.counters}
    counters[ca.input_counter] = input_value
    state = ca.start
    for step in range(max_steps):
        if state == ca.halt:
            return CaRun(True, step, counters)
        ins = ca.instruction(state)
        if isinstance(ins, Inc):
            counters[ins.counter] += 1
            state = ins.then
        else:
            if counters[ins.counter] > 0:
                counters[ins.counter] -= 1
                state = ins.then
            else:
                state = ins.when_zero
    return CaRun(state == ca.halt, max_steps, counters)


_STATE_LINE = re.compile(
    r"state\s+(\w+)\s*:\s*(inc|dec)\s+(\w+)\s*->\s*(\w+)(?:\s+else\s+(\w+))?\s*\Z")


def parse_ca(text: str) -> CounterAutomaton:
    """Parse the automaton text format.

    Lines: ``state q: inc c -> q'``, ``state q: dec c -> q' else q''``,
    ``#start q``, ``#halt q``, ``#input c``; ``%`` comments.
    """
    program: list[Instruction] = []
    start = halt = input_counter = None
    states: set[str] = set()
    counters: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) != 2 or parts[0] not in ("start", "halt", "input"):
                raise ParseError(f"bad directive {line!r}", line_no)
            if parts[0] == "start":
                start = parts[1]
            elif parts[0] == "halt":
                halt = parts[1]
            else:
                input_counter = parts[1]
            continue
        m = _STATE_LINE.match(line)
        if not m:
            raise ParseError(f"bad instruction line {line!r}", line_no)
        q, op, c, q1, q2 = m.groups()
        states.add(q)
        states.add(q1)
        counters.add(c)
        if op == "inc":
            if q2 is not None:
                raise ParseError("inc takes no else branch", line_no)
            program.append(Inc(q, c, q1))
        else:
            if q2 is None:
                raise ParseError("dec needs an else branch", line_no)
            states.add(q2)
            program.append(Dec(q, c, q1, q2))
    if start is None or halt is None or input_counter is None:
        raise ParseError("missing #start, #halt or #input directive")
    states |= {start, halt}
    counters.add(input_counter)
    return CounterAutomaton(tuple(sorted(states)), tuple(sorted(counters)),
                            start, halt, tuple(program), input_counter)


@dataclass(frozen=True)
class CompiledCa:
    ca: CounterAutomaton
    crn: Crn
    clock_length: int
    species_map: dict[str, str]  # automaton name -> species name

    def clock_species(self, i: int) -> str:
        return f"T_{i}"

    @property
    def delay_species(self) -> str:
        return "D"


def compile_ca(ca: CounterAutomaton, l: int = 1, rate_constant: float = 1.0) -> CompiledCa:
    """Compile to a stochastic network with an l-stage zero-branch clock."""
    if l < 1:
        raise CrnError("clock length must be >= 1")
    reserved = {f"T_{i}" for i in range(1, l + 1)} | {"D"}
    clash = reserved & (set(ca.states) | set(ca.counters))
    if clash:
        raise CrnError(f"automaton names collide with clock species: {sorted(clash)}")
    k = rate_constant
    reactions: list[Reaction] = []
    for ins in ca.program:
        if isinstance(ins, Inc):
            reactions.append(Reaction.make(
                {ins.state: 1}, {ins.counter: 1, ins.then: 1}, k))
        else:
            reactions.append(Reaction.make(
                {ins.state: 1, ins.counter: 1}, {ins.then: 1, "D": 1}, k))
            products = {ins.when_zero: 1}
            products[f"T_{l}"] = products.get(f"T_{l}", 0) + 1
            reactions.append(Reaction.make({"T_1": 1, ins.state: 1}, products, k))
    for i in range(1, l):
        reactions.append(Reaction.make({f"T_{i}": 1, "D": 1}, {f"T_{i + 1}": 1, "D": 1}, k))
        reactions.append(Reaction.make({f"T_{i + 1}": 1}, {f"T_{i}": 1}, k))
    crn = Crn.from_reactions(reactions, extra_species=reserved)
    species_map = {name: name for name in (*ca.states, *ca.counters)}
    return CompiledCa(ca, crn, l, species_map)


def initial_state(compiled: CompiledCa, input_value: int, n_d: int | None = None,
                  ) -> DiscreteState:
    """One start token, the input counter value, the clock at T_l, n_d delay
    molecules (default 10 * input + 10)."""
    if n_d is None:
        n_d = 10 * input_value + 10
    counts = {
        compiled.ca.start: 1,
        f"T_{compiled.clock_length}": 1,
        "D": n_d,
    }
    if input_value:
        counts[compiled.ca.input_counter] = input_value
    return compiled.crn.state(counts)


@dataclass(frozen=True)
class ErrorEstimate:
    error_rate: float
    ci_low: float
    ci_high: float
    n_runs: int
    n_errors: int
    n_timeouts: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def _wilson(successes: int, n: int, z: float = 1.959964) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def halted_counters(compiled: CompiledCa, trajectory: Trajectory,
                    ) -> dict[str, int] | None:
    """Counter values at the first appearance of the halt token, else None."""
    idx = compiled.crn.species_index[compiled.ca.halt]
    counter_idx = {c: compiled.crn.species_index[c] for c in compiled.ca.counters}
    def grab(state: DiscreteState) -> dict[str, int] | None:
        if state.counts[idx] >= 1:
            return {c: state.counts[i] for c, i in counter_idx.items()}
        return None
    found = grab(trajectory.initial)
    if found is not None:
        return found
    for _, _, state in trajectory.events:
        found = grab(state)
        if found is not None:
            return found
    return None


def error_probability(ca: CounterAutomaton, compiled: CompiledCa, input_value: int,
                      config: StochasticConfig, n_runs: int,
                      n_d: int | None = None,
                      oracle_max_steps: int = 1_000_000) -> ErrorEstimate:
    """Fraction of runs whose counters at first halt differ from the oracle.

    Runs that never produce the halt token within the simulation budget
    count as errors (conservative) and are also reported separately.
    """
    oracle = run_ca(ca, input_value, oracle_max_steps)
    if not oracle.halted:
        raise CrnError("the automaton does not halt on this input; no oracle")
    init = initial_state(compiled, input_value, n_d)
    halt_idx = compiled.crn.species_index[ca.halt]
    counter_idx = {c: compiled.crn.species_index[c] for c in ca.counters}
    errors = timeouts = 0
    for rng in _spawn_rngs(config.rng_seed, n_runs):
        # stop at the first appearance of the halt token; the clock machinery
        # would otherwise keep firing long after the computation is over
        traj = simulate(compiled.crn, init, config, rng=rng,
                        stop_when=lambda s: s.counts[halt_idx] >= 1)
        if traj.stop_reason != "predicate":
            timeouts += 1
            errors += 1
            continue
        got = {c: traj.final_state.counts[i] for c, i in counter_idx.items()}
        if got != oracle.counters:
            errors += 1
    low, high = _wilson(errors, n_runs)
    return ErrorEstimate(errors / n_runs, low, high, n_runs, errors, timeouts)


def doubling_automaton() -> CounterAutomaton:
    """Three-state example: drains the input, emitting two `out` per unit."""
    return parse_ca("""
        #start q0
        #halt qh
        #input x
        state q0: dec x -> q1 else qh
        state q1: inc out -> q2
        state q2: inc out -> q0
    """)

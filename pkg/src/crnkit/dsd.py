"""Domain-level strand-displacement compilation.

Each abstract species X becomes a signal strand with a history domain, an
incoming toehold ``i_X``, a recognition domain ``s_X`` and an outgoing
toehold ``o_X``.  Each abstract reaction gets two fuel complexes: a gate
(L) that collects the reactants and a translator (T) that releases the
products.  For a bimolecular reaction A + B -> products the implementation
reactions are

    (1)  A + L  <->  H + B_strand      reversible toehold exchange
    (2)  B + H   ->  O + waste         commits the firing
    (3)  O + T   ->  products + waste  releases all product signals

and for a unimolecular reaction step (1) is skipped: A + L -> O + waste.
A reaction with no products ends at a waste complex instead of a
translator.  Fuels are finite here, so co-simulation audits that they never
run out; one gate and one translator are consumed per completed firing.

No nucleotide sequences are generated: species stay at the domain level and
the implementation is itself an ordinary network that the stochastic engine
can run.  Multi-product release in one translator step and the unimolecular
encoding are conventions of this compiler, recorded in the program metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Literal, Mapping, Sequence

from . import reach, stochastic
from .core import Crn, CrnError, DiscreteState, Reaction
from .stochastic import StochasticConfig, Trajectory, _spawn_rngs, simulate


class DomainKind(Enum):
    TOEHOLD = "toehold"
    RECOGNITION = "recognition"


@dataclass(frozen=True)
class Domain:
    name: str
    kind: DomainKind
    complement: bool = False

    @property
    def star(self) -> "Domain":
        return Domain(self.name, self.kind, not self.complement)

    def __str__(self) -> str:
        return self.name + ("*" if self.complement else "")


Strand = tuple[Domain, ...]


class Role(Enum):
    SIGNAL = "signal"
    GATE_FUEL = "gate_fuel"            # L: holds the reactant-side template
    TRANSLATOR_FUEL = "translator_fuel"  # T: releases the products
    INTERMEDIATE = "intermediate"      # H: first reactant bound
    OUTPUT_STRAND = "output_strand"    # O: committed, products not yet out
    BACK_STRAND = "back_strand"        # displaced strand that can undo step 1
    WASTE = "waste"


@dataclass(frozen=True)
class DsdSpecies:
    """A species of the implementation network with its strand structure."""

    name: str
    role: Role
    strands: tuple[Strand, ...]
    pairings: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()
    abstract: str | None = None   # for signals: which abstract species
    reaction: int | None = None   # for per-reaction machinery: which one

    @property
    def strand_count(self) -> int:
        return len(self.strands)

    def to_json_obj(self) -> dict:
        return {
            "name": self.name,
            "role": self.role.value,
            "strands": [[str(d) for d in strand] for strand in self.strands],
            "pairings": [list(map(list, pair)) for pair in self.pairings],
            "abstract": self.abstract,
            "reaction": self.reaction,
        }


@dataclass
class DsdProgram:
    abstract: Crn
    implementation: Crn
    species: dict[str, DsdSpecies]
    signal_of: dict[str, str]          # abstract name -> signal species name
    fuel_counts: dict[str, int]
    reaction_groups: list[dict[str, object]]  # per abstract reaction metadata
    conventions: tuple[str, ...] = (
        "translator releases all products in one step",
        "unimolecular reactions skip the reversible exchange step",
        "history domains do not affect signal identity",
    )

    def initial_state(self, abstract_init: DiscreteState) -> DiscreteState:
        counts = {self.signal_of[name]: c for name, c in
                  self.abstract.state_to_map(abstract_init).items()}
        counts.update(self.fuel_counts)
        return self.implementation.state(counts)

    def pending_species(self) -> list[str]:
        return [name for name, sp in self.species.items()
                if sp.role in (Role.INTERMEDIATE, Role.OUTPUT_STRAND)]

    def project(self, impl_state: DiscreteState) -> tuple[DiscreteState, int]:
        """Map an implementation state back to (abstract state, pending count).

        Fuels, wastes and displaced back-strands vanish; intermediates count
        as pending in-flight firings rather than as any abstract species.
        """
        counts = {name: 0 for name in self.abstract.species_names}
        pending = 0
        for name, count in self.implementation.state_to_map(impl_state).items():
            sp = self.species[name]
            if sp.role is Role.SIGNAL and count:
                counts[sp.abstract] += count
            elif sp.role in (Role.INTERMEDIATE, Role.OUTPUT_STRAND):
                pending += count
        return self.abstract.state(counts), pending

    def to_json(self) -> str:
        return json.dumps({
            "abstract": [str(r) for r in self.abstract.reactions],
            "implementation": [str(r) for r in self.implementation.reactions],
            "species": [sp.to_json_obj() for sp in self.species.values()],
            "signal_map": self.signal_of,
            "fuel_counts": self.fuel_counts,
            "reaction_groups": self.reaction_groups,
            "conventions": list(self.conventions),
        }, indent=2)


def _signal(name: str, history: str) -> DsdSpecies:
    strand = (
        Domain(history, DomainKind.RECOGNITION),
        Domain(f"i_{name}", DomainKind.TOEHOLD),
        Domain(f"s_{name}", DomainKind.RECOGNITION),
        Domain(f"o_{name}", DomainKind.TOEHOLD),
    )
    return DsdSpecies(f"sig_{name}", Role.SIGNAL, (strand,), abstract=name)


def compile_dsd(crn: Crn, fuel_count: int = 100) -> DsdProgram:
    """Compile an abstract network into its strand-displacement implementation.

    Every reaction must be uni- or bimolecular (the gate design collects at
    most two reactants).  Fuels are seeded at ``fuel_count`` copies each.
    """
    if fuel_count < 1:
        raise CrnError("fuel_count must be >= 1")
    for rxn in crn.reactions:
        if rxn.arity not in (1, 2):
            raise CrnError(f"cannot compile reaction of order {rxn.arity}: {rxn}")

    species: dict[str, DsdSpecies] = {}
    signal_of: dict[str, str] = {}
    for sp in crn.species_names:
        sig = _signal(sp, history="h")
        species[sig.name] = sig
        signal_of[sp] = sig.name

    impl: list[Reaction] = []
    fuel_counts: dict[str, int] = {}
    groups: list[dict[str, object]] = []

    for idx, rxn in enumerate(crn.reactions):
        tag = f"r{idx + 1}"
        reactants: list[str] = []
        for name, coeff in rxn.reactants:
            reactants.extend([name] * coeff)
        products: list[str] = []
        for name, coeff in rxn.products:
            products.extend([name] * coeff)

        def dom(label: str, kind=DomainKind.RECOGNITION, comp=False) -> Domain:
            return Domain(label, kind, comp)

        group: dict[str, object] = {"reaction": str(rxn), "steps": []}
        l_name = f"L_{tag}"
        first = reactants[0]
        rx_dom = dom(f"r_{tag}")

        if len(reactants) == 2:
            second = reactants[1]
            gate_bottom: Strand = (
                dom(f"i_{first}", DomainKind.TOEHOLD, True),
                dom(f"s_{first}", comp=True),
                dom(f"o_{first}", DomainKind.TOEHOLD, True),
                dom(f"i_{second}", DomainKind.TOEHOLD, True),
                dom(f"s_{second}", comp=True),
                dom(f"o_{second}", DomainKind.TOEHOLD, True),
            )
            back = (dom(f"s_{first}"), dom(f"o_{first}", DomainKind.TOEHOLD),
                    dom(f"i_{second}", DomainKind.TOEHOLD))
            out = (dom(f"s_{second}"), dom(f"o_{second}", DomainKind.TOEHOLD),
                   rx_dom) + ((dom(f"i_{products[0]}", DomainKind.TOEHOLD),)
                              if products else ())
            h_name, b_name, o_name = f"H_{tag}", f"B_{tag}", f"O_{tag}"
            w1_name = f"W1_{tag}"
            species[l_name] = DsdSpecies(l_name, Role.GATE_FUEL,
                                         (gate_bottom, back, out), reaction=idx)
            species[h_name] = DsdSpecies(
                h_name, Role.INTERMEDIATE,
                (gate_bottom, species[signal_of[first]].strands[0], out), reaction=idx)
            species[b_name] = DsdSpecies(b_name, Role.BACK_STRAND, (back,), reaction=idx)
            species[o_name] = DsdSpecies(o_name, Role.OUTPUT_STRAND, (out,), reaction=idx)
            species[w1_name] = DsdSpecies(
                w1_name, Role.WASTE,
                (gate_bottom, species[signal_of[first]].strands[0],
                 species[signal_of[second]].strands[0]), reaction=idx)
            impl.append(Reaction.make({signal_of[first]: 1, l_name: 1},
                                      {h_name: 1, b_name: 1}))
            impl.append(Reaction.make({h_name: 1, b_name: 1},
                                      {signal_of[first]: 1, l_name: 1}))
            impl.append(Reaction.make({signal_of[second]: 1, h_name: 1},
                                      {o_name: 1, w1_name: 1}))
            group["steps"] = [f"{first}+L<->H+B (reversible)", f"{second}+H->O+W1"]
            fuel_counts[l_name] = fuel_count
            committed = {o_name: 1}
        else:
            gate_bottom = (
                dom(f"i_{first}", DomainKind.TOEHOLD, True),
                dom(f"s_{first}", comp=True),
                dom(f"o_{first}", DomainKind.TOEHOLD, True),
            )
            o_name, w1_name = f"O_{tag}", f"W1_{tag}"
            gate_strands = (gate_bottom,)
            if products:
                out = (rx_dom, dom(f"i_{products[0]}", DomainKind.TOEHOLD))
                gate_strands = (gate_bottom, out)
            species[l_name] = DsdSpecies(l_name, Role.GATE_FUEL, gate_strands,
                                         reaction=idx)
            species[w1_name] = DsdSpecies(
                w1_name, Role.WASTE,
                (gate_bottom, species[signal_of[first]].strands[0]), reaction=idx)
            fuel_counts[l_name] = fuel_count
            if products:
                species[o_name] = DsdSpecies(o_name, Role.OUTPUT_STRAND, (out,),
                                             reaction=idx)
                impl.append(Reaction.make({signal_of[first]: 1, l_name: 1},
                                          {o_name: 1, w1_name: 1}))
                group["steps"] = [f"{first}+L->O+W1"]
                committed = {o_name: 1}
            else:
                impl.append(Reaction.make({signal_of[first]: 1, l_name: 1},
                                          {w1_name: 1}))
                group["steps"] = [f"{first}+L->W1 (no products)"]
                committed = None

        if committed is not None:
            t_name, w2_name = f"T_{tag}", f"W2_{tag}"
            translator_bottom = tuple(
                d.star for d in species[next(iter(committed))].strands[0])
            product_strands = tuple(
                (rx_dom,) + species[signal_of[p]].strands[0][1:] for p in products)
            species[t_name] = DsdSpecies(
                t_name, Role.TRANSLATOR_FUEL,
                (translator_bottom,) + product_strands, reaction=idx)
            species[w2_name] = DsdSpecies(
                w2_name, Role.WASTE,
                (translator_bottom, species[next(iter(committed))].strands[0]),
                reaction=idx)
            release: dict[str, int] = {w2_name: 1}
            for p in products:
                release[signal_of[p]] = release.get(signal_of[p], 0) + 1
            impl.append(Reaction.make({**committed, t_name: 1}, release))
            group["steps"] = list(group["steps"]) + ["O+T->products+W2"]
            fuel_counts[t_name] = fuel_count
        groups.append(group)

    implementation = Crn.from_reactions(impl, extra_species=species.keys())
    return DsdProgram(crn, implementation, species, signal_of, fuel_counts, groups)


# ---------------------------------------------------------------------------
# behavioural checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FuelAudit:
    """Per-reaction fuel consumption of one trajectory."""

    gate_consumed: dict[int, int]
    translator_consumed: dict[int, int]
    completed: dict[int, int]
    pending_intermediate: dict[int, int]
    pending_output: dict[int, int]

    @property
    def balanced(self) -> bool:
        for idx in self.gate_consumed:
            want = (self.completed.get(idx, 0) + self.pending_intermediate.get(idx, 0)
                    + self.pending_output.get(idx, 0))
            if self.gate_consumed[idx] != want:
                return False
            if self.translator_consumed.get(idx, 0) != self.completed.get(idx, 0):
                return False
        return True


def fuel_audit(prog: DsdProgram, trajectory: Trajectory) -> FuelAudit:
    """Count fuels consumed along a trajectory and reconcile with firings."""
    impl = prog.implementation
    init = trajectory.initial
    final = trajectory.final_state
    gate: dict[int, int] = {}
    trans: dict[int, int] = {}
    completed: dict[int, int] = {}
    pend_h: dict[int, int] = {}
    pend_o: dict[int, int] = {}
    for name, sp in prog.species.items():
        if sp.reaction is None:
            continue
        i = impl.species_index[name]
        if sp.role is Role.GATE_FUEL:
            gate[sp.reaction] = init.counts[i] - final.counts[i]
        elif sp.role is Role.TRANSLATOR_FUEL:
            trans[sp.reaction] = init.counts[i] - final.counts[i]
        elif sp.role is Role.INTERMEDIATE:
            pend_h[sp.reaction] = pend_h.get(sp.reaction, 0) + final.counts[i]
        elif sp.role is Role.OUTPUT_STRAND:
            pend_o[sp.reaction] = pend_o.get(sp.reaction, 0) + final.counts[i]
    for idx in gate:
        w2 = f"W2_r{idx + 1}"
        if w2 in impl.species_index:
            completed[idx] = final.counts[impl.species_index[w2]]
        else:  # productless reaction: completion == W1 count
            w1 = f"W1_r{idx + 1}"
            completed[idx] = final.counts[impl.species_index[w1]]
            trans.setdefault(idx, 0)
            # gates of productless reactions complete in one step
            pend_h.setdefault(idx, 0)
    return FuelAudit(gate, trans, completed, pend_h, pend_o)


@dataclass
class CosimReport:
    n_runs: int
    fuel_exhausted_runs: int
    projection_violations: int
    final_states: dict[DiscreteState, int]       # last zero-pending projection
    runs_ending_pending: int
    abstract_terminals: frozenset[DiscreteState]
    matched_terminal_runs: int
    audits_balanced: bool

    @property
    def passed(self) -> bool:
        return (self.fuel_exhausted_runs == 0 and self.projection_violations == 0
                and self.audits_balanced
                and self.matched_terminal_runs == self.n_runs)

    def to_text(self, crn: Crn) -> str:
        lines = [
            f"co-simulation over {self.n_runs} runs:",
            f"  fuel exhausted:          {self.fuel_exhausted_runs}",
            f"  projection violations:   {self.projection_violations}",
            f"  runs ending mid-firing:  {self.runs_ending_pending}",
            f"  fuel audits balanced:    {self.audits_balanced}",
            f"  runs settling on an abstract terminal: {self.matched_terminal_runs}",
            "  final settled projections:",
        ]
        for state, n in sorted(self.final_states.items(), key=lambda kv: -kv[1]):
            lines.append(f"    {crn.format_state(state) or '0'}: {n}")
        lines.append(f"  verdict: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def cosimulate_check(prog: DsdProgram, abstract_init: DiscreteState,
                     config: StochasticConfig, n_runs: int,
                     reach_bound: int = 200_000) -> CosimReport:
    """Stochastically run the implementation and compare against the abstract
    network's exact reachability.

    Every projected state with no in-flight firing must be reachable in the
    abstract network from the initial state; a run's settled endpoint is its
    last zero-pending projection, which must be an abstract terminal state
    (the implementation itself never terminates because the reversible
    exchange step can always bounce).
    """
    closure = reach.post(prog.abstract, abstract_init, reach_bound)
    if closure.truncated:
        raise CrnError("abstract reachable space exceeds the bound; cannot check")
    abstract_states = set(closure.states)
    terminal = closure.terminal_mask()
    terminals = frozenset(DiscreteState(closure.states[i])
                          for i in range(len(closure)) if terminal[i])

    fuel_species = [name for name, sp in prog.species.items()
                    if sp.role in (Role.GATE_FUEL, Role.TRANSLATOR_FUEL)]
    fuel_idx = [prog.implementation.species_index[n] for n in fuel_species]
    init = prog.initial_state(abstract_init)

    exhausted = violations = ending_pending = matched = 0
    finals: dict[DiscreteState, int] = {}
    audits_ok = True
    for rng in _spawn_rngs(config.rng_seed, n_runs):
        traj = simulate(prog.implementation, init, config, rng=rng)
        ran_dry = any(init.counts[i] == 0 for i in fuel_idx)
        last_settled: DiscreteState | None = None
        proj, pending = prog.project(traj.initial)
        if pending == 0:
            last_settled = proj
            if tuple(proj.counts) not in abstract_states:
                violations += 1
        for _, _, state in traj.events:
            if not ran_dry and any(state.counts[i] == 0 for i in fuel_idx):
                ran_dry = True
            proj, pending = prog.project(state)
            if pending == 0:
                last_settled = proj
                if tuple(proj.counts) not in abstract_states:
                    violations += 1
        if ran_dry:
            exhausted += 1
        final_proj, final_pending = prog.project(traj.final_state)
        if final_pending:
            ending_pending += 1
        if last_settled is not None:
            finals[last_settled] = finals.get(last_settled, 0) + 1
            if last_settled in terminals:
                matched += 1
        if not fuel_audit(prog, traj).balanced:
            audits_ok = False
    return CosimReport(n_runs, exhausted, violations, finals, ending_pending,
                       terminals, matched, audits_ok)

"""Core data model: species, reactions, networks, discrete states and the
line-oriented ``.crn`` text format.

A network (`Crn`) is an ordered, immutable collection of species and
reactions.  Discrete states are count vectors indexed by the network's
(lexicographically sorted) species.  Everything in this module is a pure
function over immutable values, so objects can be shared freely across
threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

MAX_COEFFICIENT = 2**31 - 1
MAX_COUNT = 2**63 - 1

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*\Z")
_TERM_RE = re.compile(r"\s*(\d+)?\s*([A-Za-z_][A-Za-z0-9_']*)\s*\Z")
_RATE_RE = re.compile(r"\[\s*k\s*=\s*([^\]\s]+)\s*\]\s*\Z")


class CrnError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CrnError):
    """Syntax or semantic error in a ``.crn`` / state / automaton source."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class NotApplicableError(CrnError):
    """A reaction was applied to a state that does not cover its reactants."""


class CountOverflowError(CrnError):
    """A count or coefficient exceeded the supported integer range."""


def _check_name(name: str) -> str:
    if not _NAME_RE.match(name):
        raise CrnError(f"invalid species name {name!r}")
    return name


@dataclass(frozen=True, order=True)
class Species:
    """A named abstract species."""

    name: str

    def __post_init__(self):
        _check_name(self.name)

    def __str__(self) -> str:
        return self.name


def _as_multiset(side: Mapping[str, int] | Iterable[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    items = side.items() if isinstance(side, Mapping) else side
    acc: dict[str, int] = {}
    for name, coeff in items:
        _check_name(name)
        if coeff < 0:
            raise CrnError(f"negative stoichiometric coefficient for {name}")
        if coeff > MAX_COEFFICIENT:
            raise CountOverflowError(f"coefficient {coeff} for {name} exceeds {MAX_COEFFICIENT}")
        if coeff:
            acc[name] = acc.get(name, 0) + coeff
            if acc[name] > MAX_COEFFICIENT:
                raise CountOverflowError(f"coefficient for {name} exceeds {MAX_COEFFICIENT}")
    return tuple(sorted(acc.items()))


@dataclass(frozen=True)
class Reaction:
    """A single reaction: reactant multiset, product multiset, rate constant.

    Multisets are stored as sorted ``(species name, coefficient)`` tuples so
    reactions are hashable and their text rendering is deterministic.
    """

    reactants: tuple[tuple[str, int], ...]
    products: tuple[tuple[str, int], ...]
    rate_constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "reactants", _as_multiset(self.reactants))
        object.__setattr__(self, "products", _as_multiset(self.products))
        if not self.rate_constant > 0:
            raise CrnError(f"rate constant must be positive, got {self.rate_constant}")

    @classmethod
    def make(cls, reactants: Mapping[str, int], products: Mapping[str, int],
             rate_constant: float = 1.0) -> "Reaction":
        return cls(tuple(reactants.items()), tuple(products.items()), rate_constant)

    @property
    def arity(self) -> int:
        """Total reactant molecule count (order of the reaction)."""
        return sum(c for _, c in self.reactants)

    @property
    def is_mute(self) -> bool:
        return self.reactants == self.products

    @property
    def is_unimolecular(self) -> bool:
        return self.arity == 1

    @property
    def is_bimolecular(self) -> bool:
        return self.arity == 2

    def species_names(self) -> set[str]:
        return {n for n, _ in self.reactants} | {n for n, _ in self.products}

    def __str__(self) -> str:
        s = f"{format_side(self.reactants)} -> {format_side(self.products)}"
        if self.rate_constant != 1.0:
            s += f" [k={self.rate_constant!r}]"
        return s


def format_side(side: tuple[tuple[str, int], ...]) -> str:
    if not side:
        return "0"
    return " + ".join(name if c == 1 else f"{c}{name}" for name, c in side)


@dataclass(frozen=True)
class DiscreteState:
    """Vector of nonnegative molecule counts, indexed by a Crn's species."""

    counts: tuple[int, ...]

    def __post_init__(self):
        for c in self.counts:
            if c < 0:
                raise CrnError(f"negative count in state {self.counts}")
            if c > MAX_COUNT:
                raise CountOverflowError(f"count {c} exceeds {MAX_COUNT}")

    @property
    def cardinality(self) -> int:
        """Total number of molecules in the state."""
        return sum(self.counts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, i: int) -> int:
        return self.counts[i]


@dataclass(frozen=True)
class Crn:
    """A chemical reaction network: sorted species and an ordered reaction list.

    Duplicate reactions are allowed and kept distinct (their stochastic
    propensities add).  Species are always sorted by name so that matrices,
    state vectors and serialized output are deterministic.
    """

    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        species = tuple(sorted(set(self.species)))
        if len({s.name for s in species}) != len(species):
            raise CrnError("duplicate species names")
        object.__setattr__(self, "species", species)
        object.__setattr__(self, "reactions", tuple(self.reactions))
        declared = {s.name for s in species}
        for rxn in self.reactions:
            missing = rxn.species_names() - declared
            if missing:
                raise CrnError(f"reaction {rxn} uses undeclared species {sorted(missing)}")

    @classmethod
    def from_reactions(cls, reactions: Iterable[Reaction],
                       extra_species: Iterable[str] = ()) -> "Crn":
        reactions = tuple(reactions)
        names = set(extra_species)
        for rxn in reactions:
            names |= rxn.species_names()
        return cls(tuple(Species(n) for n in sorted(names)), reactions)

    @classmethod
    def from_lines(cls, *lines: str) -> "Crn":
        """Build a network from reaction lines in the ``.crn`` syntax."""
        return parse_crn("\n".join(lines)).crn

    # -- species bookkeeping -------------------------------------------------

    @cached_property
    def species_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.species)

    @cached_property
    def species_index(self) -> dict[str, int]:
        return {s.name: i for i, s in enumerate(self.species)}

    def _vector(self, side: tuple[tuple[str, int], ...]) -> tuple[int, ...]:
        v = [0] * len(self.species)
        for name, coeff in side:
            v[self.species_index[name]] = coeff
        return tuple(v)

    @cached_property
    def reactant_vectors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self._vector(r.reactants) for r in self.reactions)

    @cached_property
    def product_vectors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self._vector(r.products) for r in self.reactions)

    @cached_property
    def delta_vectors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(p - r for r, p in zip(rv, pv))
                     for rv, pv in zip(self.reactant_vectors, self.product_vectors))

    @cached_property
    def mute_flags(self) -> tuple[bool, ...]:
        return tuple(r.is_mute for r in self.reactions)

    # -- states ---------------------------------------------------------------

    @property
    def zero_state(self) -> DiscreteState:
        return DiscreteState((0,) * len(self.species))

    def state(self, counts: Mapping[str, int] | None = None, **kw: int) -> DiscreteState:
        """Build a state from a ``{species name: count}`` mapping."""
        merged = dict(counts or {})
        merged.update(kw)
        v = [0] * len(self.species)
        for name, count in merged.items():
            if name not in self.species_index:
                raise CrnError(f"unknown species {name!r}")
            v[self.species_index[name]] = count
        return DiscreteState(tuple(v))

    def state_to_map(self, state: DiscreteState, include_zero: bool = False) -> dict[str, int]:
        return {n: c for n, c in zip(self.species_names, state.counts) if c or include_zero}

    def format_state(self, state: DiscreteState) -> str:
        terms = [(n, c) for n, c in zip(self.species_names, state.counts) if c]
        return format_side(tuple(terms))

    def reaction_index(self, reaction: Reaction) -> int:
        return self.reactions.index(reaction)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.reactions)


def _resolve(crn: Crn, alpha: Reaction | int) -> int:
    return alpha if isinstance(alpha, int) else crn.reaction_index(alpha)


def applicable(crn: Crn, c: DiscreteState, alpha: Reaction | int) -> bool:
    """True iff the state covers the reaction's reactant multiset."""
    rv = crn.reactant_vectors[_resolve(crn, alpha)]
    return all(cc >= rr for cc, rr in zip(c.counts, rv))


def apply_reaction(crn: Crn, c: DiscreteState, alpha: Reaction | int) -> DiscreteState:
    """State after one occurrence of the reaction; raises if not applicable."""
    i = _resolve(crn, alpha)
    rv = crn.reactant_vectors[i]
    dv = crn.delta_vectors[i]
    if not all(cc >= rr for cc, rr in zip(c.counts, rv)):
        raise NotApplicableError(
            f"reaction {crn.reactions[i]} not applicable to {crn.format_state(c)}")
    return DiscreteState(tuple(cc + dd for cc, dd in zip(c.counts, dv)))


@dataclass(frozen=True)
class StoichMatrix:
    """Net-change matrix: rows are species, columns are reactions."""

    species_names: tuple[str, ...]
    entries: tuple[tuple[int, ...], ...]  # entries[row][col]

    def entry(self, species: str, col: int) -> int:
        return self.entries[self.species_names.index(species)][col]

    def column(self, col: int) -> tuple[int, ...]:
        return tuple(row[col] for row in self.entries)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    def as_numpy(self):
        import numpy as np

        return np.array(self.entries, dtype=np.int64).reshape(
            len(self.species_names), -1)


def stoichiometry(crn: Crn) -> StoichMatrix:
    """Species-by-reaction matrix of product-minus-reactant coefficients."""
    cols = crn.delta_vectors
    rows = tuple(tuple(cols[j][i] for j in range(len(cols)))
                 for i in range(len(crn.species)))
    return StoichMatrix(crn.species_names, rows)


def conservation_vector(crn: Crn) -> tuple[int, ...] | None:
    """A strictly positive integer weighting conserved by every reaction.

    Returns ``v`` with ``v . delta == 0`` for every reaction, or None when
    the network is not mass-conserving.  Solved exactly over the rationals
    (searching for v >= 1 with M^T v = 0), then scaled to integers.
    """
    from .exactlp import feasible_point

    n = len(crn.species)
    if n == 0:
        return None
    if not crn.reactions:
        return (1,) * n
    deltas = crn.delta_vectors
    # substitute v = 1 + w, w >= 0:  M^T w = -M^T 1
    a = [[Fraction(d[i]) for i in range(n)] for d in deltas]
    b = [-sum(row) for row in a]
    w = feasible_point(a, b)
    if w is None:
        return None
    v = [1 + wi for wi in w]
    denom = 1
    for vi in v:
        denom = denom * vi.denominator // _gcd(denom, vi.denominator)
    ints = [int(vi * denom) for vi in v]
    g = 0
    for x in ints:
        g = _gcd(g, x)
    return tuple(x // g for x in ints)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a) if a else abs(b)


def split_catalysts(crn: Crn) -> Crn:
    """Rewrite catalyst-style reactions through a fresh intermediate.

    A reaction where some species occurs on both sides is replaced by two
    reactions routed through a new species, so that every resulting reaction
    is a pure vector addition (no species is simultaneously consumed and
    produced).  Other reactions pass through unchanged.
    """
    existing = set(crn.species_names)
    out: list[Reaction] = []
    counter = 0
    for rxn in crn.reactions:
        r = dict(rxn.reactants)
        p = dict(rxn.products)
        if any(name in p for name in r):
            counter += 1
            fresh = f"Q_{counter}"
            while fresh in existing:
                fresh += "_"
            existing.add(fresh)
            out.append(Reaction.make(r, {fresh: 1}, rxn.rate_constant))
            out.append(Reaction.make({fresh: 1}, p, rxn.rate_constant))
        else:
            out.append(rxn)
    return Crn.from_reactions(out, extra_species=existing)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrnDocument:
    """A parsed ``.crn`` file: the network plus optional role directives."""

    crn: Crn
    input_species: tuple[str, ...] = ()
    voters0: tuple[str, ...] = ()
    voters1: tuple[str, ...] = ()
    output_species: tuple[str, ...] = ()
    init: DiscreteState | None = None
    volume: float | None = None


def _parse_term(term: str, line_no: int, col: int) -> tuple[str, int]:
    m = _TERM_RE.match(term)
    if not m:
        raise ParseError(f"bad term {term.strip()!r}", line_no, col)
    coeff = int(m.group(1)) if m.group(1) else 1
    if coeff == 0:
        raise ParseError("zero coefficient", line_no, col)
    if coeff > MAX_COEFFICIENT:
        raise ParseError(f"coefficient {coeff} exceeds {MAX_COEFFICIENT}", line_no, col)
    return m.group(2), coeff


def _parse_side(text: str, line_no: int, col: int) -> dict[str, int]:
    text = text.strip()
    if text == "0":
        return {}
    side: dict[str, int] = {}
    pos = col
    for term in text.split("+"):
        name, coeff = _parse_term(term, line_no, pos)
        side[name] = side.get(name, 0) + coeff
        pos += len(term) + 1
    return side


def parse_state(crn: Crn, text: str) -> DiscreteState:
    """Parse a state expression like ``2X + 3Y`` against a network."""
    side = _parse_side(text, 1, 1)
    unknown = set(side) - set(crn.species_names)
    if unknown:
        raise ParseError(f"unknown species in state: {sorted(unknown)}")
    return crn.state(side)


def parse_crn(text: str) -> CrnDocument:
    """Parse the line-oriented ``.crn`` format.

    Grammar per line (``%`` starts a comment, blank lines ignored):

    * reaction:   ``term (+ term)* -> term (+ term)* [k=<rate>]?`` where a
      term is an optional positive integer coefficient followed by a species
      name and an empty side is written ``0``;
    * directives: ``#input``, ``#vote0``, ``#vote1``, ``#output`` followed by
      species names; ``#init`` followed by a state expression; ``#volume``
      followed by a positive number.
    """
    reactions: list[Reaction] = []
    directives: dict[str, list[str]] = {"input": [], "vote0": [], "vote1": [], "output": []}
    init_expr: tuple[str, int] | None = None  # (text, line)
    volume: float | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("#"):
            parts = stripped[1:].split(None, 1)
            key = parts[0] if parts else ""
            rest = parts[1] if len(parts) > 1 else ""
            if key in directives:
                names = rest.split()
                for n in names:
                    if not _NAME_RE.match(n):
                        raise ParseError(f"bad species name {n!r} in #{key}", line_no)
                directives[key].extend(names)
            elif key == "init":
                init_expr = (rest, line_no)
            elif key == "volume":
                try:
                    volume = float(rest)
                except ValueError:
                    raise ParseError(f"bad volume {rest!r}", line_no)
                if not volume > 0:
                    raise ParseError("volume must be positive", line_no)
            else:
                raise ParseError(f"unknown directive #{key}", line_no)
            continue

        if "->" not in line:
            raise ParseError("expected '->' in reaction line", line_no, line.find(stripped) + 1)
        lhs_text, rhs_text = line.split("->", 1)
        rate = 1.0
        m = _RATE_RE.search(rhs_text)
        if m:
            try:
                rate = float(m.group(1))
            except ValueError:
                raise ParseError(f"bad rate constant {m.group(1)!r}", line_no,
                                 line.index("[") + 1)
            if not rate > 0:
                raise ParseError("nonpositive rate constant", line_no, line.index("[") + 1)
            rhs_text = rhs_text[: m.start()]
        elif "[" in rhs_text:
            raise ParseError("malformed rate annotation", line_no, line.index("[") + 1)
        try:
            lhs = _parse_side(lhs_text, line_no, 1)
            rhs = _parse_side(rhs_text, line_no, len(lhs_text) + 3)
        except ParseError:
            raise
        reactions.append(Reaction.make(lhs, rhs, rate))

    crn = Crn.from_reactions(reactions)
    declared = set(crn.species_names)
    for key, names in directives.items():
        unknown = set(names) - declared
        if unknown:
            raise ParseError(f"unknown species in #{key}: {sorted(unknown)}")

    init = None
    if init_expr is not None:
        side = _parse_side(init_expr[0], init_expr[1], 1)
        unknown = set(side) - declared
        if unknown:
            raise ParseError(f"unknown species in #init: {sorted(unknown)}", init_expr[1])
        init = crn.state(side)

    return CrnDocument(
        crn=crn,
        input_species=tuple(directives["input"]),
        voters0=tuple(directives["vote0"]),
        voters1=tuple(directives["vote1"]),
        output_species=tuple(directives["output"]),
        init=init,
        volume=volume,
    )


def render_crn(doc: CrnDocument | Crn) -> str:
    """Serialize back to the ``.crn`` text format (inverse of `parse_crn`)."""
    if isinstance(doc, Crn):
        doc = CrnDocument(crn=doc)
    lines = [str(rxn) for rxn in doc.crn.reactions]
    if doc.input_species:
        lines.append("#input " + " ".join(doc.input_species))
    if doc.voters0:
        lines.append("#vote0 " + " ".join(doc.voters0))
    if doc.voters1:
        lines.append("#vote1 " + " ".join(doc.voters1))
    if doc.output_species:
        lines.append("#output " + " ".join(doc.output_species))
    if doc.init is not None:
        lines.append("#init " + (doc.crn.format_state(doc.init) or "0"))
    if doc.volume is not None:
        lines.append(f"#volume {doc.volume!r}")
    return "\n".join(lines) + "\n"

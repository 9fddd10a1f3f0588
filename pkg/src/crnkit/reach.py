"""Exact reachability over discrete states.

`post` explores the forward closure of one or more start states with a hard
cap on the number of states, recording every non-mute transition as an edge.
Exploration is breadth-first and fully deterministic: states get indices in
discovery order, where within a BFS level successors are generated parent
first, then reaction declaration order.  Two engines produce bit-identical
results: a plain Python one and a numpy/scipy one that batches whole frontier
levels (worth it once closures reach tens of thousands of states).

Truncation is data, not an error: when the cap is hit the result is flagged
and downstream analyses must treat it as inconclusive.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .core import Crn, CrnError, DiscreteState, applicable

DEFAULT_BOUND = 1_000_000

Engine = Literal["auto", "scalar", "batch"]


@dataclass
class ReachResult:
    """Forward closure of a set of start states.

    `states` holds raw count tuples in discovery order; `edges` is an
    ``(E, 3)`` int64 array of ``(from index, reaction index, to index)``
    triples.  When `truncated` is set the closure was cut off at
    `frontier_bound` states and is incomplete.
    """

    crn: Crn
    states: tuple[tuple[int, ...], ...]
    edges: np.ndarray
    truncated: bool
    frontier_bound: int
    source_indices: tuple[int, ...]

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {s: i for i, s in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, state: DiscreteState) -> bool:
        return tuple(state.counts) in self.index

    def state_at(self, i: int) -> DiscreteState:
        return DiscreteState(self.states[i])

    def discrete_states(self) -> frozenset[DiscreteState]:
        return frozenset(DiscreteState(s) for s in self.states)

    @cached_property
    def states_array(self) -> np.ndarray:
        return np.array(self.states, dtype=np.int64).reshape(len(self.states), -1)

    # -- graph helpers --------------------------------------------------------

    def successors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.states]
        for src, _, dst in self.edges:
            adj[src].append(dst)
        return adj

    def forward_mask(self, sources: np.ndarray) -> np.ndarray:
        """Boolean mask of states reachable from any state in `sources`."""
        return _closure_mask(len(self.states), self.edges[:, 0], self.edges[:, 2], sources)

    def backward_mask(self, targets: np.ndarray) -> np.ndarray:
        """Boolean mask of states that can reach some state in `targets`."""
        return _closure_mask(len(self.states), self.edges[:, 2], self.edges[:, 0], targets)

    def terminal_mask(self) -> np.ndarray:
        """States where no non-mute reaction is applicable."""
        arr = self.states_array
        mask = np.ones(len(self.states), dtype=bool)
        for j, rv in enumerate(self.crn.reactant_vectors):
            if self.crn.mute_flags[j]:
                continue
            app = (arr >= np.asarray(rv, dtype=np.int64)).all(axis=1)
            mask &= ~app
        return mask

    # -- exports ---------------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "species": list(self.crn.species_names),
            "states": [self.crn.state_to_map(DiscreteState(s)) for s in self.states],
            "edges": [[int(a), int(r), int(b)] for a, r, b in self.edges],
            "truncated": self.truncated,
            "frontier_bound": self.frontier_bound,
            "sources": list(self.source_indices),
        }
        return json.dumps(payload, indent=2)

    def to_dot(self) -> str:
        lines = ["digraph reach {"]
        for i, s in enumerate(self.states):
            label = self.crn.format_state(DiscreteState(s)) or "0"
            shape = ""
            if i in self.source_indices:
                shape = ", shape=box"
            lines.append(f'  n{i} [label="{label}"{shape}];')
        for a, r, b in self.edges:
            lines.append(f'  n{a} -> n{b} [label="r{r}"];')
        lines.append("}")
        return "\n".join(lines)


def _closure_mask(n: int, tails: np.ndarray, heads: np.ndarray,
                  seeds: np.ndarray) -> np.ndarray:
    """Reachable set along edges (tails -> heads) from a seed mask/index set."""
    mask = np.zeros(n, dtype=bool)
    mask[seeds] = True
    if len(tails) == 0:
        return mask
    if len(tails) < 20_000:
        adj: dict[int, list[int]] = {}
        for t, h in zip(tails.tolist(), heads.tolist()):
            adj.setdefault(t, []).append(h)
        stack = list(np.flatnonzero(mask))
        while stack:
            s = stack.pop()
            for h in adj.get(s, ()):
                if not mask[h]:
                    mask[h] = True
                    stack.append(h)
        return mask
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import breadth_first_order

    # virtual source n points at every seed
    seed_idx = np.flatnonzero(mask)
    data = np.ones(len(tails) + len(seed_idx), dtype=np.int8)
    t = np.concatenate([tails, np.full(len(seed_idx), n, dtype=np.int64)])
    h = np.concatenate([heads, seed_idx])
    graph = csr_matrix((data, (t, h)), shape=(n + 1, n + 1))
    order = breadth_first_order(graph, i_start=n, directed=True, return_predecessors=False)
    out = np.zeros(n, dtype=bool)
    out[order[order != n]] = True
    return out


def _prepare_sources(crn: Crn, sources) -> list[tuple[int, ...]]:
    if isinstance(sources, DiscreteState):
        sources = [sources]
    out = []
    for s in sources:
        counts = tuple(s.counts) if isinstance(s, DiscreteState) else tuple(s)
        if len(counts) != len(crn.species):
            raise CrnError("state length does not match species count")
        out.append(counts)
    return out


def closure(crn: Crn, sources, bound: int = DEFAULT_BOUND, *,
            k_fast: int | None = None, engine: Engine = "auto") -> ReachResult:
    """BFS forward closure from one or more states (shared by post/post_kfast)."""
    if bound < 1:
        raise CrnError("bound must be >= 1")
    if k_fast is not None:
        if k_fast < 1:
            raise CrnError("k must be >= 1")
        for rxn in crn.reactions:
            if rxn.arity not in (1, 2):
                raise CrnError(
                    f"k-fast exploration requires uni- or bimolecular reactions, got {rxn}")
    src = _prepare_sources(crn, sources)
    if engine == "auto":
        engine = "batch" if len(crn.species) <= 64 and len(crn.reactions) <= 512 else "scalar"
    if engine == "batch":
        return _closure_batch(crn, src, bound, k_fast)
    return _closure_scalar(crn, src, bound, k_fast)


def post(crn: Crn, c, bound: int = DEFAULT_BOUND, *, engine: Engine = "auto") -> ReachResult:
    """All states reachable from ``c``, up to `bound` states."""
    return closure(crn, c, bound, engine=engine)


def post_kfast(crn: Crn, c, k: int, bound: int = DEFAULT_BOUND, *,
               engine: Engine = "auto") -> ReachResult:
    """Forward closure using only k-fast steps.

    An edge is admitted only when some reactant species of the firing
    reaction has count at least ``k`` in the source state.  Only defined for
    networks whose reactions are all uni- or bimolecular.
    """
    return closure(crn, c, bound, k_fast=k, engine=engine)


def is_terminal(crn: Crn, c: DiscreteState) -> bool:
    """True iff every reaction applicable to ``c`` is mute."""
    for j in range(len(crn.reactions)):
        if not crn.mute_flags[j] and applicable(crn, c, j):
            return False
    return True


def pre_within(crn: Crn, target: Iterable[DiscreteState], universe: Iterable[DiscreteState],
               ) -> frozenset[DiscreteState]:
    """States in `universe` from which some target state is reachable.

    Only paths that stay inside `universe` count; when the universe is a
    forward closure this equals the exact predecessor set restricted to it.
    """
    uni = {tuple(s.counts): i for i, s in enumerate(universe)}
    targets = []
    for t in target:
        key = tuple(t.counts)
        if key not in uni:
            raise CrnError("target state not inside universe")
        targets.append(uni[key])
    states = list(uni)
    preds: list[list[int]] = [[] for _ in states]
    deltas = crn.delta_vectors
    rvs = crn.reactant_vectors
    for i, s in enumerate(states):
        for j in range(len(crn.reactions)):
            if crn.mute_flags[j]:
                continue
            if all(cc >= rr for cc, rr in zip(s, rvs[j])):
                succ = tuple(cc + dd for cc, dd in zip(s, deltas[j]))
                if succ in uni:
                    preds[uni[succ]].append(i)
    seen = set(targets)
    stack = list(targets)
    while stack:
        t = stack.pop()
        for p in preds[t]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return frozenset(DiscreteState(states[i]) for i in seen)


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

def _admitted(counts, rv, k_fast) -> bool:
    if any(cc < rr for cc, rr in zip(counts, rv)):
        return False
    if k_fast is None:
        return True
    return any(rr > 0 and cc >= k_fast for cc, rr in zip(counts, rv))


def _closure_scalar(crn: Crn, sources, bound, k_fast) -> ReachResult:
    index: dict[tuple[int, ...], int] = {}
    states: list[tuple[int, ...]] = []
    src_idx = []
    for s in sources:
        if s not in index:
            index[s] = len(states)
            states.append(s)
        src_idx.append(index[s])
    queue = deque(range(len(states)))
    edges: list[tuple[int, int, int]] = []
    truncated = False
    rvs = crn.reactant_vectors
    deltas = crn.delta_vectors
    mutes = crn.mute_flags
    while queue:
        i = queue.popleft()
        counts = states[i]
        for j in range(len(crn.reactions)):
            if mutes[j] or not _admitted(counts, rvs[j], k_fast):
                continue
            succ = tuple(cc + dd for cc, dd in zip(counts, deltas[j]))
            at = index.get(succ)
            if at is None:
                if len(states) >= bound:
                    truncated = True
                    continue
                at = len(states)
                index[succ] = at
                states.append(succ)
                queue.append(at)
            edges.append((i, j, at))
    edge_arr = np.array(edges, dtype=np.int64).reshape(-1, 3)
    return ReachResult(crn, tuple(states), edge_arr, truncated, bound, tuple(src_idx))


def _closure_batch(crn: Crn, sources, bound, k_fast) -> ReachResult:
    nsp = len(crn.species)
    rv = np.array(crn.reactant_vectors, dtype=np.int64).reshape(-1, nsp)
    dv = np.array(crn.delta_vectors, dtype=np.int64).reshape(-1, nsp)
    mute = np.array(crn.mute_flags, dtype=bool)
    live = np.flatnonzero(~mute)

    index: dict[bytes, int] = {}
    chunks: list[np.ndarray] = []
    states: list[tuple[int, ...]] = []
    src_idx = []
    init_rows = []
    for s in sources:
        key = np.array(s, dtype=np.int64).tobytes()
        if key not in index:
            index[key] = len(states)
            states.append(s)
            init_rows.append(s)
        src_idx.append(index[key])
    frontier = np.array(init_rows, dtype=np.int64).reshape(-1, nsp)
    frontier_idx = np.arange(len(states), dtype=np.int64)
    edge_parts: list[np.ndarray] = []
    truncated = False

    while len(frontier_idx):
        new_rows: list[tuple[int, ...]] = []
        next_idx: list[int] = []
        # generate all (state, live reaction) successors for this level
        parents = np.repeat(frontier_idx, len(live))
        rxns = np.tile(live, len(frontier_idx))
        cand = frontier[:, None, :] + dv[None, live, :]
        ok = (frontier[:, None, :] >= rv[None, live, :]).all(axis=2)
        if k_fast is not None:
            fast = ((frontier[:, None, :] >= k_fast) & (rv[None, live, :] > 0)).any(axis=2)
            ok &= fast
        cand = cand.reshape(-1, nsp)
        ok = ok.reshape(-1)
        parents, rxns, cand = parents[ok], rxns[ok], cand[ok]
        if len(cand) == 0:
            break
        keys = np.ascontiguousarray(cand).view([("", np.int64)] * nsp).ravel()
        uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        lut = np.empty(len(uniq), dtype=np.int64)
        # assign indices to unique successors in first-occurrence order,
        # matching the scalar engine's discovery order exactly
        order = np.argsort(first, kind="stable")
        for pos in order:
            key = uniq[pos].tobytes()
            at = index.get(key)
            if at is None:
                if len(states) >= bound:
                    truncated = True
                    at = -1
                else:
                    at = len(states)
                    index[key] = at
                    row = tuple(int(x) for x in cand[first[pos]])
                    states.append(row)
                    new_rows.append(row)
                    next_idx.append(at)
            lut[pos] = at
        children = lut[inverse]
        keep = children >= 0
        edge_parts.append(np.stack([parents[keep], rxns[keep], children[keep]], axis=1))
        frontier = np.array(new_rows, dtype=np.int64).reshape(-1, nsp)
        frontier_idx = np.array(next_idx, dtype=np.int64)

    edges = (np.concatenate(edge_parts, axis=0) if edge_parts
             else np.empty((0, 3), dtype=np.int64))
    return ReachResult(crn, tuple(states), edges, truncated, bound, tuple(src_idx))


# ---------------------------------------------------------------------------
# speed faults
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedFaultReport:
    """Outcome of a speed-fault probe at a single (input, k) pair."""

    kind: Literal["none", "witness", "inconclusive"]
    witness: DiscreteState | None = None
    states_explored: int = 0

    @property
    def fault_free(self) -> bool:
        return self.kind == "none"


def speed_fault_witness(crd, input_counts, k: int, bound: int = DEFAULT_BOUND,
                        ) -> SpeedFaultReport:
    """Search for a reachable state with no k-fast route back to consensus.

    The decider must stably decide the given input (this is checked first);
    the report then says whether every state reachable from the padded input
    can still reach an output-stable state of the winning bit using only
    steps whose firing reaction has some reactant count >= k.
    """
    from .decide import VerdictKind, _stable_masks, pad_input, stable_verdict

    crn = crd.crn
    for rxn in crn.reactions:
        if rxn.arity not in (1, 2):
            raise CrnError("speed-fault analysis requires uni- or bimolecular reactions")
    iota = pad_input(crd, input_counts)
    result = closure(crn, iota, bound)
    if result.truncated:
        return SpeedFaultReport("inconclusive", None, len(result))
    verdict = stable_verdict(crd, input_counts, bound)
    if verdict.kind not in (VerdictKind.ACCEPT, VerdictKind.REJECT):
        raise CrnError(f"decider does not stably decide this input: {verdict.kind.value}")
    b = 1 if verdict.kind is VerdictKind.ACCEPT else 0
    stable_b = _stable_masks(crd, result)[b]

    # k-fast sub-closure shares the state space; recompute edges with the
    # admission filter, then take the backward closure of the stable states.
    fast = closure(crn, iota, bound, k_fast=k)
    fast_stable = np.zeros(len(fast), dtype=bool)
    for i, s in enumerate(fast.states):
        fast_stable[i] = stable_b[result.index[s]]
    reach_stable_fast = fast.backward_mask(np.flatnonzero(fast_stable))

    # any state of the full closure either appears in the k-fast closure with
    # a fast route, or it is a witness
    for i, s in enumerate(result.states):
        j = fast.index.get(s)
        if j is None or not reach_stable_fast[j]:
            # unreachable via fast steps from iota does not matter: the state
            # itself must have a fast route onward, so probe it directly
            probe = closure(crn, DiscreteState(s), bound, k_fast=k)
            if probe.truncated:
                return SpeedFaultReport("inconclusive", None, len(result))
            ok = False
            for t, ps in enumerate(probe.states):
                if stable_b[result.index[ps]]:
                    ok = True
                    break
            if not ok:
                return SpeedFaultReport("witness", DiscreteState(s), len(result))
    return SpeedFaultReport("none", None, len(result))

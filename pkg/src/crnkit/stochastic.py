"""Continuous-time stochastic kinetics.

Direct-method sampling of the jump chain: in state c each reaction fires at
its propensity, the waiting time is exponential in the total rate, and the
next reaction is drawn proportionally to its share.  Propensities use the
counting convention

    k / v^(arity-1) * prod_X c(X) * (c(X)-1) * ... * (c(X)-(r(X)-1))

so a unimolecular reaction is volume-independent and a bimolecular one
halves its rate when the volume doubles.

Mute reactions still fire (time passes, nothing changes) and are recorded
in trajectories.  Randomness comes from numpy's PCG64 generator seeded from
the run configuration, so trajectories are reproducible bit for bit; batch
estimators derive one child seed per run index and merge results in index
order.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Crn, CrnError, DiscreteState

RNG_ALGORITHM = "numpy-PCG64"


@dataclass(frozen=True)
class StochasticConfig:
    volume: float = 1.0
    rng_seed: int = 0
    max_time: float = math.inf
    max_steps: int = 10_000_000
    stationary_factor: float = 100.0
    density_cap: float | None = None

    def __post_init__(self):
        if not self.volume > 0:
            raise CrnError("volume must be positive")
        if self.max_steps < 1:
            raise CrnError("max_steps must be >= 1")


@dataclass
class Trajectory:
    """One sampled run: the initial state and each (time, reaction, state)."""

    crn: Crn
    initial: DiscreteState
    events: list[tuple[float, int, DiscreteState]]
    terminated: bool
    stop_reason: str  # "terminal" | "max_time" | "max_steps"
    config: StochasticConfig
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def final_state(self) -> DiscreteState:
        return self.events[-1][2] if self.events else self.initial

    @property
    def final_time(self) -> float:
        return self.events[-1][0] if self.events else 0.0

    def state_at(self, t: float) -> DiscreteState:
        """State occupied at time t (right-continuous sample path)."""
        state = self.initial
        for when, _, after in self.events:
            if when > t:
                break
            state = after
        return state

    def mute_event_count(self) -> int:
        return sum(1 for _, j, _ in self.events if self.crn.mute_flags[j])

    def to_csv(self) -> str:
        header = "time," + ",".join(self.crn.species_names)
        rows = [header, "0.0," + ",".join(str(c) for c in self.initial.counts)]
        for when, _, state in self.events:
            rows.append(f"{when!r}," + ",".join(str(c) for c in state.counts))
        return "\n".join(rows) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "species": list(self.crn.species_names),
            "initial": list(self.initial.counts),
            "events": [[t, j, list(s.counts)] for t, j, s in self.events],
            "terminated": self.terminated,
            "stop_reason": self.stop_reason,
            "rng": self.rng_algorithm,
            "seed": self.config.rng_seed,
            "volume": self.config.volume,
        }, indent=2)


def propensity(crn: Crn, c: DiscreteState, alpha, v: float) -> float:
    """Firing rate of one reaction in state c at volume v (0 if not applicable)."""
    if not v > 0:
        raise CrnError("volume must be positive")
    j = alpha if isinstance(alpha, int) else crn.reaction_index(alpha)
    rxn = crn.reactions[j]
    rv = crn.reactant_vectors[j]
    acc = rxn.rate_constant / v ** (rxn.arity - 1)
    for count, need in zip(c.counts, rv):
        for step in range(need):
            acc *= count - step
        if count < need:
            return 0.0
    return acc


def total_rate(crn: Crn, c: DiscreteState, v: float) -> float:
    """Sum of all propensities, mute reactions included."""
    return sum(propensity(crn, c, j, v) for j in range(len(crn.reactions)))


class _Sampler:
    """Propensity bookkeeping for one network, with a dependency graph so a
    firing only recomputes reactions that share species with it."""

    def __init__(self, crn: Crn, volume: float):
        self.crn = crn
        self.v = volume
        self.rv = crn.reactant_vectors
        self.deltas = crn.delta_vectors
        self.k = [r.rate_constant for r in crn.reactions]
        self.arity = [r.arity for r in crn.reactions]
        nr = len(crn.reactions)
        touched: list[set[int]] = [set() for _ in range(len(crn.species))]
        for j in range(nr):
            for i, need in enumerate(self.rv[j]):
                if need:
                    touched[i].add(j)
        self.dependents: list[list[int]] = []
        for j in range(nr):
            dep: set[int] = set()
            for i, d in enumerate(self.deltas[j]):
                if d:
                    dep |= touched[i]
            self.dependents.append(sorted(dep))

    def prop(self, counts: tuple[int, ...], j: int) -> float:
        acc = self.k[j] / self.v ** (self.arity[j] - 1)
        for count, need in zip(counts, self.rv[j]):
            if count < need:
                return 0.0
            for step in range(need):
                acc *= count - step
        return acc

    def all_props(self, counts: tuple[int, ...]) -> list[float]:
        return [self.prop(counts, j) for j in range(len(self.k))]


def simulate(crn: Crn, init: DiscreteState, config: StochasticConfig,
             stop_when: Callable[[DiscreteState], bool] | None = None,
             rng: np.random.Generator | None = None) -> Trajectory:
    """Sample one trajectory until terminal state, max_time or max_steps.

    `stop_when` optionally ends the run as soon as the predicate holds
    (checked on the initial state too); used by the hitting-time estimator.
    """
    if config.density_cap is not None and init.cardinality / config.volume > config.density_cap:
        warnings.warn(
            f"density {init.cardinality / config.volume:.3g} exceeds cap "
            f"{config.density_cap:.3g}; the well-mixed approximation may not hold",
            stacklevel=2)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    sampler = _Sampler(crn, config.volume)
    counts = tuple(init.counts)
    props = sampler.all_props(counts)
    mute_idx = [j for j, m in enumerate(crn.mute_flags) if m]
    t = 0.0
    events: list[tuple[float, int, DiscreteState]] = []
    stop_reason = "max_steps"
    terminated = False
    if stop_when is not None and stop_when(DiscreteState(counts)):
        return Trajectory(crn, init, [], False, "predicate", config)
    for _ in range(config.max_steps):
        total = sum(props)
        nonmute_total = total - sum(props[j] for j in mute_idx)
        if nonmute_total <= 0.0:
            terminated = True
            stop_reason = "terminal"
            break
        t += rng.exponential(1.0 / total)
        if t > config.max_time:
            stop_reason = "max_time"
            break
        pick = rng.random() * total
        acc = 0.0
        j = -1
        for idx, p in enumerate(props):
            acc += p
            if p > 0.0 and pick < acc:
                j = idx
                break
        if j < 0:  # guard against roundoff at the top of the cumulative scan
            j = max(idx for idx, p in enumerate(props) if p > 0.0)
        counts = tuple(cc + dd for cc, dd in zip(counts, sampler.deltas[j]))
        state = DiscreteState(counts)
        events.append((t, j, state))
        for dep in sampler.dependents[j]:
            props[dep] = sampler.prop(counts, dep)
        if stop_when is not None and stop_when(state):
            stop_reason = "predicate"
            break
    return Trajectory(crn, init, events, terminated, stop_reason, config)


def replay_check(trajectory: Trajectory) -> bool:
    """Re-apply the recorded reactions and confirm every recorded state."""
    from .core import apply_reaction

    state = trajectory.initial
    for _, j, recorded in trajectory.events:
        state = apply_reaction(trajectory.crn, state, j)
        if state != recorded:
            return False
    return True


def _spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    seqs = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in seqs]


@dataclass(frozen=True)
class TimeEstimate:
    mean: float
    stderr: float
    n_hit: int
    n_timeout: int
    hit_times: tuple[float, ...]

    def to_json(self) -> str:
        return json.dumps({"mean": self.mean, "stderr": self.stderr,
                           "n_hit": self.n_hit, "n_timeout": self.n_timeout}, indent=2)


def estimate_time_to(crn: Crn, init: DiscreteState,
                     predicate: Callable[[DiscreteState], bool],
                     config: StochasticConfig, n_runs: int) -> TimeEstimate:
    """Monte-Carlo mean time until the predicate first holds.

    Runs that end (terminal/max_time/max_steps) without hitting the
    predicate are counted separately as timeouts; if every run times out
    this raises, since the mean would be meaningless.
    """
    if n_runs < 2:
        raise CrnError("need at least two runs")
    hits: list[float] = []
    timeouts = 0
    for rng in _spawn_rngs(config.rng_seed, n_runs):
        traj = simulate(crn, init, config, stop_when=predicate, rng=rng)
        if traj.stop_reason == "predicate":
            hits.append(traj.final_time)
        else:
            timeouts += 1
    if not hits:
        raise CrnError("predicate was never reached in any run")
    mean = float(np.mean(hits))
    stderr = float(np.std(hits, ddof=1) / math.sqrt(len(hits))) if len(hits) > 1 else 0.0
    return TimeEstimate(mean, stderr, len(hits), timeouts, tuple(hits))


@dataclass(frozen=True)
class Distribution:
    """Empirical distribution over states at a sampling time."""

    frequencies: dict[DiscreteState, float]
    sample_time: float
    n_runs: int
    stationary: bool

    def probability(self, state: DiscreteState) -> float:
        return self.frequencies.get(state, 0.0)

    def to_json(self, crn: Crn) -> str:
        return json.dumps({
            "stationary": self.stationary,
            "sample_time": self.sample_time,
            "n_runs": self.n_runs,
            "frequencies": [
                {"state": crn.state_to_map(s), "frequency": f}
                for s, f in sorted(self.frequencies.items(), key=lambda kv: -kv[1])
            ],
        }, indent=2)


def empirical_distribution(crn: Crn, init: DiscreteState, t: float | str,
                           config: StochasticConfig, n_runs: int,
                           reach_bound: int = 200_000) -> Distribution:
    """Frequencies of the state occupied at time ``t`` over ``n_runs`` runs.

    ``t="stationary"`` samples at a heuristic relaxation horizon,
    ``stationary_factor * cardinality(init) / (min positive propensity at
    init)``; this requires a finite reachable space, which is verified by an
    exact closure first and refused otherwise.  The horizon is a convention
    of this toolkit, recorded in the output, not a mixing-time guarantee.
    """
    if isinstance(t, str):
        if t != "stationary":
            raise CrnError(f"bad sampling time {t!r}")
        from . import reach

        closure = reach.post(crn, init, reach_bound)
        if closure.truncated:
            raise CrnError(
                f"reachable space exceeds {reach_bound} states; "
                "stationary sampling refused")
        props = [propensity(crn, init, j, config.volume)
                 for j in range(len(crn.reactions))]
        positive = [p for p in props if p > 0]
        horizon = (config.stationary_factor * max(init.cardinality, 1) / min(positive)
                   if positive else 0.0)
        stationary = True
    else:
        horizon = float(t)
        stationary = False
    counter: dict[DiscreteState, int] = {}
    run_config = replace(config, max_time=horizon)
    for rng in _spawn_rngs(config.rng_seed, n_runs):
        traj = simulate(crn, init, run_config, rng=rng)
        state = traj.state_at(horizon)
        counter[state] = counter.get(state, 0) + 1
    freqs = {s: c / n_runs for s, c in counter.items()}
    return Distribution(freqs, horizon, n_runs, stationary)

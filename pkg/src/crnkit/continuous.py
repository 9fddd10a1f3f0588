"""Continuous-state semantics: mass-action ODEs and rate-independent
reachability.

The ODE right-hand side is the stoichiometry matrix times the mass-action
rate law.  Integration uses an adaptive explicit Runge-Kutta stepper
(Dormand-Prince via scipy) with a fixpoint detector; stiff failures are
reported, not silently absorbed.

Rate-independent reachability asks whether a target concentration vector can
be written as the source plus the stoichiometry matrix applied to
nonnegative reaction amounts, with each used reaction applicable at the
segment start (all its reactant concentrations strictly positive).  These
questions are decided exactly over the rationals with the in-house simplex,
so a returned witness satisfies its equations identically, not just to
machine precision.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .core import Crn, CrnError, stoichiometry
from .exactlp import OPTIMAL, feasible_point, solve_lp


class IntegrationError(CrnError):
    """The ODE stepper failed (typically step-size underflow on a stiff system)."""


@dataclass(frozen=True)
class ContinuousState:
    """Vector of nonnegative concentrations indexed by a Crn's species."""

    concentrations: tuple[float, ...]

    def __post_init__(self):
        if any(x < 0 for x in self.concentrations):
            raise CrnError("concentrations must be nonnegative")


def _conc_vector(crn: Crn, x) -> np.ndarray:
    if isinstance(x, ContinuousState):
        vec = np.asarray(x.concentrations, dtype=float)
    elif isinstance(x, Mapping):
        vec = np.zeros(len(crn.species))
        for name, value in x.items():
            vec[crn.species_index[name]] = value
    else:
        vec = np.asarray(list(x), dtype=float)
    if vec.shape != (len(crn.species),):
        raise CrnError("concentration vector length does not match species count")
    return vec


class OdeSystem:
    """Precomputed mass-action right-hand side for one network."""

    def __init__(self, crn: Crn):
        self.crn = crn
        self.matrix = stoichiometry(crn).as_numpy().astype(float)
        self.exponents = np.array(crn.reactant_vectors, dtype=float).reshape(
            len(crn.reactions), -1)
        self.k = np.array([r.rate_constant for r in crn.reactions])

    def rates(self, x: np.ndarray) -> np.ndarray:
        base = np.where(self.exponents > 0, x[None, :], 1.0)
        return self.k * np.prod(base ** self.exponents, axis=1)

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.matrix @ self.rates(np.maximum(x, 0.0))


def ode_rhs(crn: Crn, x) -> np.ndarray:
    """Instantaneous concentration change under mass-action kinetics."""
    return OdeSystem(crn)(0.0, _conc_vector(crn, x))


@dataclass
class ContinuousTrajectory:
    crn: Crn
    times: np.ndarray
    values: np.ndarray  # shape (len(times), n_species)
    reached_fixpoint: bool

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def final_map(self) -> dict[str, float]:
        return dict(zip(self.crn.species_names, map(float, self.values[-1])))

    def to_csv(self) -> str:
        header = "time," + ",".join(self.crn.species_names)
        rows = [header]
        for t, row in zip(self.times, self.values):
            rows.append(f"{float(t)!r}," + ",".join(repr(float(v)) for v in row))
        return "\n".join(rows) + "\n"


FIXPOINT_WINDOW = 10


def integrate(crn: Crn, x0, t_end: float, tol: float = 1e-8) -> ContinuousTrajectory:
    """Integrate the mass-action ODEs to ``t_end``.

    Stops early (flagging ``reached_fixpoint``) once the right-hand side's
    max-norm stays below ``tol`` for ten consecutive accepted steps.  Small
    negative excursions are clipped to zero; excursions beyond ``100 * tol``
    emit a warning.  A failed step raises `IntegrationError`.
    """
    from scipy.integrate import RK45

    if not t_end > 0:
        raise CrnError("t_end must be positive")
    if not tol > 0:
        raise CrnError("tol must be positive")
    system = OdeSystem(crn)
    y0 = _conc_vector(crn, x0)
    solver = RK45(system, 0.0, y0, t_bound=float(t_end), rtol=tol, atol=tol)
    times = [0.0]
    values = [np.maximum(y0, 0.0)]
    quiet = 0
    reached = bool(np.max(np.abs(system(0.0, y0)), initial=0.0) < tol)
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"ODE step failed at t={solver.t:.6g}: {message}")
        y = solver.y
        if np.min(y, initial=0.0) < -100 * tol:
            warnings.warn(
                f"negative concentration {float(np.min(y)):.3g} at t={solver.t:.6g}; "
                "clipping", stacklevel=2)
        y = np.maximum(y, 0.0)
        times.append(float(solver.t))
        values.append(y)
        if np.max(np.abs(system(solver.t, y)), initial=0.0) < tol:
            quiet += 1
            if quiet >= FIXPOINT_WINDOW:
                reached = True
                break
        else:
            quiet = 0
    return ContinuousTrajectory(crn, np.array(times), np.vstack(values), reached)


# ---------------------------------------------------------------------------
# rate-independent reachability
# ---------------------------------------------------------------------------

def _frac_vector(crn: Crn, x) -> list[Fraction]:
    if isinstance(x, Mapping):
        vec = [Fraction(0)] * len(crn.species)
        for name, value in x.items():
            vec[crn.species_index[name]] = Fraction(value)
    else:
        vec = [Fraction(v) for v in x]
    if len(vec) != len(crn.species):
        raise CrnError("state length does not match species count")
    if any(v < 0 for v in vec):
        raise CrnError("states must be nonnegative")
    return vec


@dataclass(frozen=True)
class FluxVector:
    """Nonnegative reaction amounts, exact rationals, indexed like reactions."""

    amounts: tuple[Fraction, ...]

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.amounts) if a > 0)

    def to_json_obj(self) -> dict:
        return {str(i): str(a) for i, a in enumerate(self.amounts) if a > 0}


def _continuously_applicable(c: Sequence[Fraction], rv: Sequence[int]) -> bool:
    return all(c[i] > 0 for i, need in enumerate(rv) if need > 0)


def apply_flux(crn: Crn, c, flux: FluxVector) -> list[Fraction]:
    """c plus the stoichiometry matrix applied to the flux amounts (exact)."""
    vec = _frac_vector(crn, c)
    for j, amount in enumerate(flux.amounts):
        if amount:
            for i, d in enumerate(crn.delta_vectors[j]):
                if d:
                    vec[i] += amount * d
    return vec


def straight_line_reach(crn: Crn, c, d) -> FluxVector | None:
    """One-segment reachability witness, or None.

    Finds exact ``u >= 0`` with ``c + M u = d`` such that every reaction
    with positive amount has all reactant concentrations positive in ``c``.
    """
    cv = _frac_vector(crn, c)
    dv = _frac_vector(crn, d)
    usable = [j for j in range(len(crn.reactions))
              if _continuously_applicable(cv, crn.reactant_vectors[j])]
    target = [dv[i] - cv[i] for i in range(len(cv))]
    if not usable:
        return FluxVector((Fraction(0),) * len(crn.reactions)) if not any(target) else None
    a = [[Fraction(crn.delta_vectors[j][i]) for j in usable] for i in range(len(cv))]
    u = feasible_point(a, target)
    if u is None:
        return None
    amounts = [Fraction(0)] * len(crn.reactions)
    for j, val in zip(usable, u):
        amounts[j] = val
    return FluxVector(tuple(amounts))


@dataclass(frozen=True)
class SegmentWitness:
    segments: tuple[FluxVector, ...]
    intermediates: tuple[tuple[Fraction, ...], ...]  # x_0 .. x_k

    def to_json(self) -> str:
        return json.dumps({
            "segments": [f.to_json_obj() for f in self.segments],
            "intermediates": [[str(v) for v in x] for x in self.intermediates],
        }, indent=2)


@dataclass(frozen=True)
class SegmentSearchResult:
    kind: Literal["found", "none", "inconclusive"]
    witness: SegmentWitness | None = None
    lps_solved: int = 0

    @property
    def reachable(self) -> bool:
        return self.kind == "found"


def _segment_lp(crn: Crn, cv, dv, supports: Sequence[tuple[int, ...]],
                ) -> tuple[list[FluxVector], list[list[Fraction]]] | None:
    """Feasibility of a fixed support sequence, by maximizing the slack of
    the strict applicability constraints (feasible iff the optimum is > 0)."""
    nsp = len(crn.species)
    k = len(supports)
    u_index: dict[tuple[int, int], int] = {}
    for seg, support in enumerate(supports):
        for j in support:
            u_index[(seg, j)] = len(u_index)
    nu = len(u_index)
    t_var = nu  # margin variable for strict inequalities
    cols = nu + 1

    def delta_expr(i: int, upto: int) -> dict[int, Fraction]:
        # coefficient of each u-variable in x_upto(i) - c(i)
        expr: dict[int, Fraction] = {}
        for seg in range(upto):
            for j in supports[seg]:
                coeff = crn.delta_vectors[j][i]
                if coeff:
                    var = u_index[(seg, j)]
                    expr[var] = expr.get(var, Fraction(0)) + coeff
        return expr

    rows: list[tuple[list[Fraction], int, Fraction]] = []
    n_slack = 0

    def add_row(expr: Mapping[int, Fraction], t_coeff: Fraction, b: Fraction,
                slack: int) -> None:
        nonlocal n_slack
        row = [Fraction(0)] * cols
        for var, coeff in expr.items():
            row[var] = coeff
        row[t_var] = t_coeff
        rows.append((row, slack, b))
        n_slack += abs(slack)

    # final state equality: c + sum M u_seg = d
    for i in range(nsp):
        add_row(delta_expr(i, k), Fraction(0), dv[i] - cv[i], 0)
    # intermediate nonnegativity: x_seg(i) >= 0  for seg = 1..k-1
    for seg in range(1, k):
        for i in range(nsp):
            add_row(delta_expr(i, seg), Fraction(0), -cv[i], -1)
    # strict applicability with margin t: x_{seg-1}(i) >= t for reactants of
    # the segment's support (segment 0 is checked against c directly)
    for seg in range(1, k):
        needed = {i for j in supports[seg]
                  for i, need in enumerate(crn.reactant_vectors[j]) if need > 0}
        for i in sorted(needed):
            add_row(delta_expr(i, seg), Fraction(-1), -cv[i], -1)
    # t <= 1 keeps the LP bounded
    add_row({}, Fraction(1), Fraction(1), 1)

    total_cols = cols + n_slack
    a_eq: list[list[Fraction]] = []
    b_eq: list[Fraction] = []
    slack_at = cols
    for row, slack, b in rows:
        full = row + [Fraction(0)] * n_slack
        if slack:
            full[slack_at] = Fraction(slack)  # -1 for >=, +1 for <=
            slack_at += 1
        a_eq.append(full)
        b_eq.append(b)
    objective = [Fraction(0)] * total_cols
    objective[t_var] = Fraction(1)
    status, x, value = solve_lp(objective, a_eq, b_eq, maximize=True)
    if status != OPTIMAL or value is None or value <= 0:
        return None
    fluxes = []
    for seg, support in enumerate(supports):
        amounts = [Fraction(0)] * len(crn.reactions)
        for j in support:
            amounts[j] = x[u_index[(seg, j)]]
        fluxes.append(FluxVector(tuple(amounts)))
    inters = [list(cv)]
    for flux in fluxes:
        inters.append(apply_flux(crn, inters[-1], flux))
    return fluxes, inters


def segment_reach(crn: Crn, c, d, max_segments: int = 3,
                  lp_budget: int = 20_000) -> SegmentSearchResult:
    """Search for a chain of straight-line segments from c to d.

    Iterative deepening on the segment count; for each depth every sequence
    of reaction support sets is tried as one exact LP.  Exceeding
    ``lp_budget`` LP solves reports "inconclusive" (distinct from a
    completed search that found nothing).
    """
    if max_segments < 1:
        raise CrnError("max_segments must be >= 1")
    cv = _frac_vector(crn, c)
    dv = _frac_vector(crn, d)
    if cv == dv:
        return SegmentSearchResult("found", SegmentWitness((), (tuple(cv),)), 0)

    # quick algebraic pre-check: d - c must lie in the column space of M
    if not _in_column_space(crn, [dv[i] - cv[i] for i in range(len(cv))]):
        return SegmentSearchResult("none", None, 0)

    nr = len(crn.reactions)
    first_usable = [j for j in range(nr)
                    if _continuously_applicable(cv, crn.reactant_vectors[j])]
    all_supports = [tuple(s) for size in range(1, nr + 1)
                    for s in itertools.combinations(range(nr), size)]
    first_supports = [s for s in all_supports if set(s) <= set(first_usable)]
    solved = 0
    for depth in range(1, max_segments + 1):
        pools = [first_supports] + [all_supports] * (depth - 1)
        for combo in itertools.product(*pools):
            if solved >= lp_budget:
                return SegmentSearchResult("inconclusive", None, solved)
            solved += 1
            got = _segment_lp(crn, cv, dv, combo)
            if got is not None:
                fluxes, inters = got
                return SegmentSearchResult(
                    "found",
                    SegmentWitness(tuple(fluxes), tuple(tuple(x) for x in inters)),
                    solved)
    return SegmentSearchResult("none", None, solved)


def _in_column_space(crn: Crn, target: list[Fraction]) -> bool:
    """Exact Gaussian elimination solvability of M u = target (u unrestricted)."""
    nsp = len(crn.species)
    nr = len(crn.reactions)
    rows = [[Fraction(crn.delta_vectors[j][i]) for j in range(nr)] + [target[i]]
            for i in range(nsp)]
    rank_col = 0
    for col in range(nr):
        pivot = next((r for r in range(rank_col, nsp) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank_col], rows[pivot] = rows[pivot], rows[rank_col]
        piv = rows[rank_col][col]
        rows[rank_col] = [x / piv for x in rows[rank_col]]
        for r in range(nsp):
            if r != rank_col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank_col])]
        rank_col += 1
    return all(rows[r][-1] == 0 for r in range(rank_col, nsp))


# ---------------------------------------------------------------------------
# dual-rail computation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualRailValue:
    """A signed value as a difference of two nonnegative rails."""

    plus: float
    minus: float

    def __post_init__(self):
        if self.plus < 0 or self.minus < 0:
            raise CrnError("rails must be nonnegative")

    @property
    def value(self) -> float:
        return self.plus - self.minus

    @classmethod
    def of(cls, value: float) -> "DualRailValue":
        return cls(value, 0.0) if value >= 0 else cls(0.0, -value)


@dataclass(frozen=True)
class DualRailCrc:
    """A computer whose inputs and output come in plus/minus species pairs."""

    crn: Crn
    inputs: tuple[tuple[str, str, str], ...]  # (name, plus species, minus species)
    output: tuple[str, str, str]

    def rail_species(self) -> dict[str, tuple[str, str]]:
        rails = {name: (p, m) for name, p, m in self.inputs}
        rails[self.output[0]] = (self.output[1], self.output[2])
        return rails


def dual_rail_min() -> DualRailCrc:
    """min(x, y): plus rails pair off into the output while each minus rail
    refunds the opposite plus rail and charges the output's minus rail."""
    crn = Crn.from_lines(
        "Xp + Yp -> Zp",
        "Xm -> Yp + Zm",
        "Ym -> Xp + Zm",
    )
    return DualRailCrc(crn, (("x", "Xp", "Xm"), ("y", "Yp", "Ym")), ("z", "Zp", "Zm"))


def dual_rail_max() -> DualRailCrc:
    """max(x, y): the min network with plus and minus roles swapped."""
    crn = Crn.from_lines(
        "Xm + Ym -> Zm",
        "Xp -> Ym + Zp",
        "Yp -> Xm + Zp",
    )
    return DualRailCrc(crn, (("x", "Xp", "Xm"), ("y", "Yp", "Ym")), ("z", "Zp", "Zm"))


def dual_rail_eval(gadget: DualRailCrc, inputs: Mapping[str, DualRailValue | float],
                   mode: Literal["discrete", "continuous"] = "discrete",
                   bound: int = 200_000, t_end: float = 200.0,
                   tol: float = 1e-10) -> DualRailValue:
    """Run a dual-rail computer on signed inputs and read the output rails.

    Discrete mode requires integer rails and uses the exact stabilization
    verdict; continuous mode integrates the ODEs to a fixpoint.
    """
    values: dict[str, DualRailValue] = {}
    for name, *_ in gadget.inputs:
        if name not in inputs:
            raise CrnError(f"missing input {name!r}")
        v = inputs[name]
        values[name] = v if isinstance(v, DualRailValue) else DualRailValue.of(v)

    if mode == "discrete":
        from .decide import Crc, crc_output_verdict

        counts: dict[str, int] = {}
        for name, plus, minus in gadget.inputs:
            v = values[name]
            if v.plus != int(v.plus) or v.minus != int(v.minus):
                raise CrnError("discrete mode requires integral rails")
            counts[plus] = int(v.plus)
            counts[minus] = int(v.minus)
        input_species = tuple(s for _, p, m in gadget.inputs for s in (p, m))
        crc = Crc(gadget.crn, input_species, (gadget.output[1], gadget.output[2]))
        outcome = crc_output_verdict(crc, counts, bound)
        if not outcome.stabilized:
            raise CrnError("dual-rail computation did not stabilize")
        return DualRailValue(outcome.output[gadget.output[1]],
                             outcome.output[gadget.output[2]])

    x0 = {s: 0.0 for s in gadget.crn.species_names}
    for name, plus, minus in gadget.inputs:
        x0[plus] = values[name].plus
        x0[minus] = values[name].minus
    traj = integrate(gadget.crn, x0, t_end, tol)
    final = traj.final_map()
    return DualRailValue(max(final[gadget.output[1]], 0.0),
                         max(final[gadget.output[2]], 0.0))

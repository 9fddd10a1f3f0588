import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from crnkit import (
    Crn, CrnError, DualRailValue, conservation_vector, dual_rail_eval,
    dual_rail_max, dual_rail_min, integrate, ode_rhs, segment_reach,
    straight_line_reach, stoichiometry,
)
from crnkit.continuous import apply_flux, _continuously_applicable


TWO_RXN = Crn.from_lines("A + B -> C", "2C + B -> 2A + B")


class TestOdeRhs:
    def test_displayed_system_b(self):
        rhs = ode_rhs(TWO_RXN, {"A": 1.0, "B": 2.0, "C": 0.0})
        assert rhs[TWO_RXN.species_index["B"]] == pytest.approx(-2.0)

    def test_displayed_system_a(self):
        rhs = ode_rhs(TWO_RXN, {"A": 1.0, "B": 1.0, "C": 2.0})
        assert rhs[TWO_RXN.species_index["A"]] == pytest.approx(-1.0 + 2 * 4 * 1)

    def test_zero_state_zero_rhs(self):
        assert np.allclose(ode_rhs(TWO_RXN, TWO_RXN.zero_state.counts), 0.0)

    def test_matches_finite_difference(self):
        crn = Crn.from_lines("X + Y -> Z [k=0.7]", "Z -> X [k=1.3]")
        x0 = np.array([1.5, 0.8, 0.4])
        h = 1e-6
        traj = integrate(crn, x0, h, tol=1e-12)
        fd = (traj.values[-1] - x0) / traj.times[-1]
        assert np.max(np.abs(fd - ode_rhs(crn, x0))) < 1e-4  # O(h)


class TestIntegrate:
    def test_pairing_fixpoint(self):
        crn = Crn.from_lines("X + Y -> Z")
        traj = integrate(crn, {"X": 3.0, "Y": 5.0}, 80.0, tol=1e-10)
        final = traj.final_map()
        assert final["X"] == pytest.approx(0.0, abs=1e-6)
        assert final["Y"] == pytest.approx(2.0, abs=1e-6)
        assert final["Z"] == pytest.approx(3.0, abs=1e-6)

    def test_conservation_along_trajectory(self):
        tol = 1e-9
        crn = Crn.from_lines("X + Y -> Z")
        v = np.array(conservation_vector(crn), dtype=float)
        traj = integrate(crn, {"X": 2.0, "Y": 1.0}, 30.0, tol=tol)
        weights = traj.values @ v
        assert np.max(np.abs(weights - weights[0])) <= 10 * tol

    def test_fixpoint_start_constant(self):
        crn = Crn.from_lines("X + Y -> Z")
        traj = integrate(crn, {"Z": 2.0}, 10.0, tol=1e-10)
        assert traj.reached_fixpoint
        assert np.allclose(traj.values, traj.values[0])

    def test_bad_horizon(self):
        with pytest.raises(CrnError):
            integrate(TWO_RXN, {"A": 1.0}, 0.0)


class TestStraightLine:
    def test_single_reaction(self):
        crn = Crn.from_lines("X + Y -> Z")
        u = straight_line_reach(crn, (1, 1, 0), (0, 0, 1))
        assert u is not None and u.amounts == (Fraction(1),)

    def test_missing_reactant_prunes(self):
        crn = Crn.from_lines("X + Y -> Z")
        assert straight_line_reach(crn, (0, 1, 0), (0, 0, 1)) is None

    def test_witness_is_exact(self):
        u = straight_line_reach(TWO_RXN, (1, 1, 0), (1, Fraction(1, 2), Fraction(0)))
        if u is not None:
            assert apply_flux(TWO_RXN, (1, 1, 0), u) == \
                [Fraction(1), Fraction(1, 2), Fraction(0)]

    def test_randomized_soundness(self):
        rng = random.Random(7)
        for _ in range(100):
            n_rxn = rng.randint(1, 3)
            reactions = []
            for _ in range(n_rxn):
                r = {s: rng.randint(0, 2) for s in "ABC"}
                p = {s: rng.randint(0, 2) for s in "ABC"}
                if sum(r.values()) == 0 and sum(p.values()) == 0:
                    r["A"] = 1
                from crnkit import Reaction

                reactions.append(Reaction.make(r, p))
            crn = Crn.from_reactions(reactions, extra_species=("A", "B", "C"))
            c = [Fraction(rng.randint(0, 4), 2) for _ in range(3)]
            d = [Fraction(rng.randint(0, 4), 2) for _ in range(3)]
            u = straight_line_reach(crn, c, d)
            if u is not None:
                assert apply_flux(crn, c, u) == list(d)
                for j in u.support():
                    assert _continuously_applicable(c, crn.reactant_vectors[j])


def lattice_segment_oracle(crn, c, d, max_segments, grid_step=Fraction(1, 4),
                           grid_max=4):
    """Brute-force segment reachability with amounts on a quarter grid."""
    amounts = [grid_step * i for i in range(int(grid_max / grid_step) + 1)]
    nr = len(crn.reactions)

    def applicable_vectors(state):
        for combo in itertools.product(amounts, repeat=nr):
            if all(a == 0 for a in combo):
                continue
            ok = True
            for j, a in enumerate(combo):
                if a > 0 and not _continuously_applicable(state, crn.reactant_vectors[j]):
                    ok = False
                    break
            if ok:
                yield combo

    def step(state, combo):
        out = list(state)
        for j, a in enumerate(combo):
            for i, delta in enumerate(crn.delta_vectors[j]):
                out[i] += a * delta
        return out if all(x >= 0 for x in out) else None

    frontier = {tuple(c)}
    if tuple(c) == tuple(d):
        return True
    for _ in range(max_segments):
        nxt = set()
        for state in frontier:
            for combo in applicable_vectors(state):
                new = step(state, combo)
                if new is None:
                    continue
                new = tuple(new)
                if new == tuple(d):
                    return True
                nxt.add(new)
        frontier = nxt
    return False


class TestSegment:
    def test_single_segment_collapse(self):
        crn = Crn.from_lines("X + Y -> Z")
        res = segment_reach(crn, (1, 1, 0), (0, 0, 1), 3)
        assert res.reachable and len(res.witness.segments) == 1

    def test_two_segment_example(self):
        crn = Crn.from_lines("A -> B", "A + B -> C")
        target = (Fraction(0), Fraction(0), Fraction(1, 2))
        assert segment_reach(crn, (1, 0, 0), target, 1).kind == "none"
        res = segment_reach(crn, (1, 0, 0), target, 2)
        assert res.reachable and len(res.witness.segments) == 2
        # replay lands exactly on the target
        state = [Fraction(1), Fraction(0), Fraction(0)]
        for flux in res.witness.segments:
            state = apply_flux(crn, state, flux)
        assert tuple(state) == target

    def test_conservation_mismatch_infeasible(self):
        crn = Crn.from_lines("X + Y -> Z")
        res = segment_reach(crn, (1, 1, 0), (1, 1, 1), 3)
        assert res.kind == "none" and res.lps_solved == 0

    def test_budget_inconclusive(self):
        crn = Crn.from_lines("A -> B", "B -> C", "C -> A", "A + B -> 2C")
        res = segment_reach(crn, (3, 1, 1), (1, 1, 3), max_segments=3, lp_budget=2)
        assert res.kind in ("found", "inconclusive")
        if res.kind == "inconclusive":
            assert res.lps_solved == 2

    def test_against_lattice_oracle(self):
        rng = random.Random(2024)
        from crnkit import Reaction

        checked = 0
        for _ in range(40):
            reactions = []
            for _ in range(rng.randint(1, 2)):
                r = {s: rng.randint(0, 1) for s in "ABC"}
                p = {s: rng.randint(0, 1) for s in "ABC"}
                if sum(r.values()) == 0 and sum(p.values()) == 0:
                    continue
                reactions.append(Reaction.make(r, p))
            if not reactions:
                continue
            crn = Crn.from_reactions(reactions, extra_species=("A", "B", "C"))
            c = [Fraction(rng.randint(0, 3)) for _ in range(3)]
            d = [Fraction(rng.randint(0, 3)) for _ in range(3)]
            mine = segment_reach(crn, c, d, 2)
            oracle = lattice_segment_oracle(crn, c, d, 2)
            checked += 1
            if oracle:
                assert mine.reachable, (reactions, c, d)
            if mine.kind == "none":
                assert not oracle, (reactions, c, d)
            if mine.reachable:
                state = list(c)
                for flux in mine.witness.segments:
                    state = apply_flux(crn, state, flux)
                assert state == list(d)
        assert checked >= 30


class TestDualRail:
    def test_min_single_rail_values(self):
        got = dual_rail_eval(dual_rail_min(), {"x": 3, "y": 5})
        assert got.value == 3

    def test_min_mixed_rails_raw_output(self):
        got = dual_rail_eval(dual_rail_min(),
                             {"x": DualRailValue(5, 2), "y": DualRailValue(1, 0)})
        assert (got.plus, got.minus) == (3, 2) and got.value == 1

    def test_max_flipped(self):
        assert dual_rail_eval(dual_rail_max(), {"x": 3, "y": 5}).value == 5

    def test_exhaustive_small_values(self):
        mn, mx = dual_rail_min(), dual_rail_max()
        for x in range(-3, 4):
            for y in range(-3, 4):
                gx, gy = DualRailValue.of(x), DualRailValue.of(y)
                assert dual_rail_eval(mn, {"x": gx, "y": gy}).value == min(x, y)
                assert dual_rail_eval(mx, {"x": gx, "y": gy}).value == max(x, y)

    def test_invariants_on_every_edge(self):
        # (x+ - x-) + (z+ - z-) and (y+ - y-) + (z+ - z-) constant
        from crnkit import post

        gadget = dual_rail_min()
        crn = gadget.crn
        idx = crn.species_index
        init = crn.state({"Xp": 3, "Xm": 1, "Yp": 2, "Ym": 2})
        r = post(crn, init, 100000)

        def inv(s, a, b):
            return (s[idx[a + "p"]] - s[idx[a + "m"]]
                    + s[idx["Zp"]] - s[idx["Zm"]]) if a != "Z" else None

        want_x = inv(init.counts, "X", None)
        want_y = inv(init.counts, "Y", None)
        for src, _, dst in r.edges:
            for s in (r.states[src], r.states[dst]):
                assert inv(s, "X", None) == want_x
                assert inv(s, "Y", None) == want_y

    def test_continuous_mode_matches(self):
        got = dual_rail_eval(dual_rail_min(), {"x": 1.0, "y": 3.0},
                             mode="continuous", t_end=80.0)
        assert got.value == pytest.approx(1.0, abs=1e-4)
        got = dual_rail_eval(dual_rail_max(), {"x": DualRailValue(0, 2.0),
                                               "y": DualRailValue(1.0, 0)},
                             mode="continuous", t_end=120.0)
        assert got.value == pytest.approx(1.0, abs=1e-3)

    def test_discrete_requires_integers(self):
        with pytest.raises(CrnError):
            dual_rail_eval(dual_rail_min(), {"x": 1.5, "y": 1})

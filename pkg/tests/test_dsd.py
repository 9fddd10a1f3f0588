import pytest

from crnkit import Crn, CrnError, StochasticConfig, compile_dsd, cosimulate_check, fuel_audit
from crnkit.dsd import Role
from crnkit.stochastic import simulate


AB_C = Crn.from_lines("A + B -> C")


class TestStructure:
    def test_bimolecular_cascade(self):
        prog = compile_dsd(AB_C, 50)
        texts = [str(r) for r in prog.implementation.reactions]
        assert len(texts) == 4  # forward, reverse, commit, release
        # step 1 appears with its exact reverse; steps 2 and 3 do not
        pairs = {(r.reactants, r.products) for r in prog.implementation.reactions}
        n_reversible = sum(((p, r) in pairs) for r, p in pairs)
        assert n_reversible == 2  # the forward/backward pair, counted twice

    def test_fuels_seeded(self):
        prog = compile_dsd(AB_C, 33)
        assert prog.fuel_counts == {"L_r1": 33, "T_r1": 33}

    def test_unimolecular_two_steps(self):
        prog = compile_dsd(Crn.from_lines("C -> A"), 10)
        texts = [str(r) for r in prog.implementation.reactions]
        assert len(texts) == 2
        assert any("O_r1" in t for t in texts)

    def test_zero_product_reaction(self):
        prog = compile_dsd(Crn.from_lines("A -> 0"), 10)
        assert len(prog.implementation.reactions) == 1
        assert "T_r1" not in prog.implementation.species_names

    def test_arity_gate(self):
        with pytest.raises(CrnError):
            compile_dsd(Crn.from_lines("3A -> 2B"), 10)

    def test_recognition_domains_unique(self):
        prog = compile_dsd(Crn.from_lines("A + B -> C", "C + A -> 2B"), 10)
        doms = {}
        for sp in prog.species.values():
            if sp.role is Role.SIGNAL:
                rec = [d.name for strand in sp.strands for d in strand
                       if d.name.startswith("s_")]
                doms[sp.abstract] = set(rec)
        names = list(doms)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                assert not (doms[a] & doms[b])

    def test_strand_count_conserved_per_reaction(self):
        for lines in (["A + B -> C"], ["C -> A"], ["A -> 0"], ["A + B -> C + 2D"],
                      ["A + A -> B"]):
            prog = compile_dsd(Crn.from_lines(*lines), 10)
            strands = {n: sp.strand_count for n, sp in prog.species.items()}
            for rxn in prog.implementation.reactions:
                lhs = sum(strands[n] * c for n, c in rxn.reactants)
                rhs = sum(strands[n] * c for n, c in rxn.products)
                assert lhs == rhs, (lines, str(rxn))

    def test_implementation_mass_conserving(self):
        from crnkit import conservation_vector

        prog = compile_dsd(AB_C, 10)
        assert conservation_vector(prog.implementation) is not None

    def test_multi_product_released_together(self):
        prog = compile_dsd(Crn.from_lines("A + B -> C + 2D"), 10)
        release = [r for r in prog.implementation.reactions
                   if any(n == "T_r1" for n, _ in r.reactants)]
        assert len(release) == 1
        products = dict(release[0].products)
        assert products.get("sig_C") == 1 and products.get("sig_D") == 2

    def test_json_round(self):
        prog = compile_dsd(AB_C, 10)
        text = prog.to_json()
        assert '"signal_map"' in text and '"gate_fuel"' in text


class TestProjection:
    def test_initial_projection(self):
        prog = compile_dsd(AB_C, 20)
        init = prog.initial_state(AB_C.state({"A": 3, "B": 2}))
        projected, pending = prog.project(init)
        assert AB_C.state_to_map(projected) == {"A": 3, "B": 2}
        assert pending == 0

    def test_intermediates_count_as_pending(self):
        prog = compile_dsd(AB_C, 20)
        impl = prog.implementation
        state = impl.state({"H_r1": 1, "sig_B": 2, "L_r1": 19, "T_r1": 20, "B_r1": 1})
        projected, pending = prog.project(state)
        assert pending == 1
        assert AB_C.state_to_map(projected) == {"B": 2}


class TestCosimulation:
    def test_pairing_reaction_settles_to_abstract_terminal(self):
        prog = compile_dsd(AB_C, 100)
        cfg = StochasticConfig(volume=10.0, rng_seed=42, max_time=200.0,
                               max_steps=50_000)
        report = cosimulate_check(prog, AB_C.state({"A": 3, "B": 2}), cfg, 30)
        assert report.passed
        (top,) = {s for s, n in report.final_states.items() if n == 30}
        assert AB_C.state_to_map(top) == {"A": 1, "C": 2}

    def test_inert_abstract_network(self):
        crn = Crn.from_reactions([], extra_species=("A",))
        prog = compile_dsd(crn, 5)
        cfg = StochasticConfig(rng_seed=0, max_time=10.0)
        report = cosimulate_check(prog, crn.state({"A": 2}), cfg, 5)
        assert report.passed
        assert set(report.final_states) == {crn.state({"A": 2})}

    def test_min_network_outputs(self):
        mn = Crn.from_lines("X + Y -> Z")
        prog = compile_dsd(mn, 80)
        cfg = StochasticConfig(volume=5.0, rng_seed=3, max_time=300.0,
                               max_steps=50_000)
        for x, y in [(2, 3), (3, 1), (4, 4), (0, 2)]:
            report = cosimulate_check(prog, mn.state({"X": x, "Y": y}), cfg, 10)
            assert report.passed, (x, y)
            (top,) = {s for s, n in report.final_states.items() if n == 10}
            assert mn.state_to_map(top).get("Z", 0) == min(x, y)

    def test_fuel_exhaustion_flagged(self):
        prog = compile_dsd(AB_C, 2)  # not enough for 3 firings
        cfg = StochasticConfig(volume=5.0, rng_seed=9, max_time=200.0)
        report = cosimulate_check(prog, AB_C.state({"A": 4, "B": 4}), cfg, 10)
        assert report.fuel_exhausted_runs > 0


class TestFuelAudit:
    def run_one(self, fuel=50, seed=1, **state):
        prog = compile_dsd(AB_C, fuel)
        init = prog.initial_state(AB_C.state(state))
        cfg = StochasticConfig(volume=10.0, rng_seed=seed, max_time=100.0,
                               max_steps=20_000)
        traj = simulate(prog.implementation, init, cfg)
        return prog, traj

    def test_zero_firings_zero_consumption(self):
        prog, traj = self.run_one(A=3)  # no B: only the reversible step can bounce
        audit = fuel_audit(prog, traj)
        assert audit.completed == {0: 0}
        assert audit.translator_consumed[0] == 0
        assert audit.balanced

    def test_completed_firing_consumes_one_of_each(self):
        prog, traj = self.run_one(A=1, B=1)
        audit = fuel_audit(prog, traj)
        assert audit.completed[0] == 1
        assert audit.translator_consumed[0] == 1
        assert audit.gate_consumed[0] == 1
        assert audit.balanced

    def test_pending_counts_in_gate_balance(self):
        # with no B present, a trajectory parked mid-exchange holds one H
        prog, traj = self.run_one(A=1, seed=12)
        audit = fuel_audit(prog, traj)
        pend = audit.pending_intermediate[0]
        assert audit.gate_consumed[0] == pend
        assert audit.balanced

    def test_balanced_across_seeds(self):
        for seed in range(8):
            prog, traj = self.run_one(A=3, B=2, seed=seed)
            assert fuel_audit(prog, traj).balanced

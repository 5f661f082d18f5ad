from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from symobs import casestudy as cs
from symobs.checker import (CapabilityError, check_acasr, check_acasr_sampled, check_acsr,
                            check_acsr_sampled, check_condition_7, check_condition_8,
                            check_condition_9, check_condition_10, check_on_eps_grid,
                            check_output_consistency, prune_to_valid)
from symobs.numeric import INF
from symobs.relation import EXACT, AcParams, TableRelation, identity_relation, zero_metric
from symobs.systems import TransitionSystem
from oracles import literal_check
from strategies import metrics, params, relations, systems

F = Fraction


@given(st.data())
def test_finite_checks_agree_with_literal_definitions(data):
    S1 = data.draw(systems("a", 3, 2))
    S2 = data.draw(systems("b", 3, 2))
    p = data.draw(params())
    R = data.draw(relations(S1, S2, kappa=p.kappa))
    d = data.draw(metrics(S1.inputs, S2.inputs))
    assert check_acsr(S1, S2, R, p, d).ok == literal_check(S1, S2, R, p, d, alternating=False)
    assert check_acasr(S1, S2, R, p, d).ok == literal_check(S1, S2, R, p, d, alternating=True)


@given(st.data())
def test_minimal_level_check_matches_epsilon_grid_reference(data):
    S1 = data.draw(systems("a", 3, 2))
    S2 = data.draw(systems("b", 3, 2))
    p = data.draw(params())
    R = data.draw(relations(S1, S2, kappa=p.kappa))
    grid = [p.kappa + F(k, 4) for k in range(0, 9)]
    for alternating, fn in ((False, check_acsr), (True, check_acasr)):
        if fn(S1, S2, R, p).ok:
            assert check_on_eps_grid(S1, S2, R, p, zero_metric, grid, alternating)


@given(st.data())
def test_counterexamples_replay_as_failures(data):
    S1 = data.draw(systems("a", 3, 2))
    S2 = data.draw(systems("b", 3, 2))
    R = data.draw(relations(S1, S2))
    for fn in (check_acsr, check_acasr):
        v = fn(S1, S2, R, EXACT)
        if not v.ok:
            assert v.counterexample["condition"] in ("init", "step")
            assert v.replay() is False


@given(systems("a", 4, 2, total=True))
def test_identity_relation_of_system_with_itself(S):
    R = identity_relation(S.states, S.inputs)
    assert check_acsr(S, S, R, EXACT).ok
    assert check_acasr(S, S, R, EXACT).ok


@given(st.data())
def test_pruned_relations_pass(data):
    S1 = data.draw(systems("a", 3, 2))
    S2 = data.draw(systems("b", 3, 2))
    p = data.draw(params())
    R = data.draw(relations(S1, S2, kappa=p.kappa))
    for alternating, fn in ((True, check_acasr), (False, check_acsr)):
        pruned = prune_to_valid(S1, S2, R, p, alternating=alternating)
        if pruned is not None:
            assert fn(S1, S2, pruned, p).ok


def test_finite_checker_refuses_generator_systems():
    plant = cs.build_case_plant().system
    with pytest.raises(CapabilityError):
        check_acsr(plant, cs.build_case_oabs(), cs.case_relation_o(), cs.PARAMS_O)


def test_spec_relation_is_an_asr_into_cabs():
    spec, cabs = cs.build_case_spec(), cs.build_case_cabs()
    RhatC = cs.case_relation_spec()
    v = check_acasr(spec, cabs, RhatC, EXACT, pairs=[(x, x) for x in spec.states])
    assert v.ok


def test_contraction_violation_detected_in_sampled_check():
    plant = cs.build_case_plant().system
    p = AcParams("0.05", "0.2", 0)
    v = check_acsr_sampled(cs.sampler_o(), cs.build_case_oabs(), p,
                           relation=cs.case_relation_o(), plant_system=plant)
    assert not v.ok
    assert v.method == "sampled"
    assert v.counterexample["condition"] == "step"
    assert v.replay() is False


def test_sampled_abstraction_check_on_small_window():
    cabs = cs.build_case_cabs()
    window = [x for x in cabs.states if x[0] <= F("0.02") and x[1] <= F("0.02")]
    v = check_acasr_sampled(cabs, cs.sampler_c(), cs.PARAMS_C, states=window,
                            relation=cs.case_relation_c(),
                            plant_system=cs.build_case_plant().system)
    assert v.ok and v.stats["samples"] > 0


def test_case_side_conditions_have_identity_witnesses():
    spec, cabs, oabs = cs.build_case_spec(), cs.build_case_cabs(), cs.build_case_oabs()
    R, RhatC, Rcheck = cs.build_case_relations()
    plant = cs.build_case_plant().system
    ident = {u: u for u in cs.INPUTS}
    v7 = check_condition_7(RhatC, spec, cabs, pairs=[(x, x) for x in spec.states])
    some = cabs.states[::97]
    v9 = check_condition_9(R, cabs, plant, pairs=[(x, x) for x in some], method="sampled")
    v10 = check_condition_10(Rcheck, plant, oabs, pairs=[(x, x) for x in oabs.states],
                             method="sampled")
    for v in (v7, v9, v10):
        assert v.ok and v.witness == ident
    assert check_condition_8(zero_metric, zero_metric, zero_metric,
                             cs.INPUTS, cs.INPUTS, cs.INPUTS).ok


def test_condition_8_reports_violating_triple():
    v = check_condition_8(zero_metric, lambda a, b: F(1), zero_metric, ["a"], ["b"], ["c"])
    assert not v.ok
    assert v.counterexample["u_hat"] == "a" and v.counterexample["rhs"] == 1
    assert v.replay() is False


def test_state_dependent_witness_breaks_condition_9():
    cabs = TransitionSystem(["h0", "h1"], ["h0"], ["v"], {("h0", "v"): ["h0"], ("h1", "v"): ["h1"]})
    plant = TransitionSystem(["x0", "x1"], ["x0"], ["p", "q"],
                             {("x0", "p"): ["x0"], ("x1", "q"): ["x1"]})
    R = TableRelation({("h0", "x0", "v", "p"): 0, ("h1", "x1", "v", "q"): 0})
    v = check_condition_9(R, cabs, plant)
    assert not v.ok
    assert v.counterexample["u1"] == "v"
    assert v.replay() is False


def test_output_consistency_fails_at_kappa_prime_in_case_study():
    Rcheck = cs.case_relation_o()
    xc = (F(0), F("0.2"), 0, 0)
    samples = cs.sample_states(xc, F("0.05"))
    v = check_output_consistency(cs.output, Rcheck, F("0.05"), samples, [xc], "sampled")
    assert not v.ok
    a, b = v.counterexample["x1"], v.counterexample["x2"]
    assert cs.output(a) != cs.output(b)
    assert v.replay() is False


def test_output_consistency_holds_for_singleton_and_aligned_plants():
    single = TransitionSystem(["x"], ["x"], ["u"], {("x", "u"): ["x"]})
    R = identity_relation(["x"], ["u"])
    assert check_output_consistency(lambda x: 0, R, 0, single.states, single.states).ok
    # Four plant states, two cells; each cell lies inside one output preimage.
    cells = {"x0": "c0", "x1": "c0", "x2": "c1", "x3": "c1"}
    R2 = TableRelation({(x, c, "u", "u"): F(1, 2) for x, c in cells.items()}, F(1, 2))
    out = {"x0": 0, "x1": 0, "x2": 1, "x3": 1}
    assert check_output_consistency(out.__getitem__, R2, F(1), list(cells), ["c0", "c1"]).ok


def test_unrelated_pair_has_infinite_gauge_in_checker():
    S = TransitionSystem(["a", "b"], ["a"], ["u"], {("a", "u"): ["a"], ("b", "u"): ["b"]})
    R = TableRelation({("a", "a", "u", "u"): 0})
    assert R.state_gauge("a", "b") == INF
    assert check_acsr(S, S, R, EXACT).stats["pairs"] == 1

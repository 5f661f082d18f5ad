from fractions import Fraction
from itertools import product

import pytest

from symobs import casestudy as cs
from symobs.checker import check_acasr
from symobs.lift import (CoverageError, FiniteBridge, SynthesisError, control_input,
                         dbar_C, lift_relation_R, lift_relation_RC, lift_system, synthesize,
                         theorem4_relation)
from symobs.numeric import INF
from symobs.observer import FinitePlantOracle, ObserverState
from symobs.pipeline import build_controller
from symobs.relation import EXACT, AcParams, TableRelation, identity_relation
from symobs.systems import DomainError, PlantWithOutputs, TransitionSystem
from symobs.toys import check_synthesized, random_instance, random_outputs, synthesize_toy
from oracles import brute_chain_gauge

F = Fraction


@pytest.fixture(scope="module")
def case_controller():
    return build_controller()


def _base():
    return TransitionSystem(["a", "b", "c", "d"], ["a"], ["u", "v"],
                            {("a", "u"): ["c"], ("b", "u"): ["c", "d"], ("a", "v"): ["d"],
                             ("c", "u"): ["c"], ("d", "u"): ["d"]})


def test_singleton_lift_follows_base():
    L = lift_system(_base())
    assert L.maximal_post(frozenset({"b"}), "u") == {"c", "d"}
    assert L.post(frozenset({"a"}), "u") == {frozenset({"c"})}
    assert set(L.enabled_inputs(frozenset({"a"}))) == {"u", "v"}


def test_input_disabled_on_a_member_gives_empty_post():
    L = lift_system(_base())
    assert L.post(frozenset({"a", "b"}), "v") == frozenset()
    assert L.enabled_inputs(frozenset({"a", "b"})) == ("u",)


def test_lifted_successor_count():
    L = lift_system(_base())
    X = frozenset({"a", "b"})
    assert L.maximal_post(X, "u") == {"c", "d"}
    assert len(L.post(X, "u")) == 3


def test_lift_rejects_non_states():
    L = lift_system(_base())
    with pytest.raises(DomainError):
        L.post(frozenset(), "u")
    with pytest.raises(DomainError):
        L.post(frozenset({"zz"}), "u")


def test_materialized_lift_has_all_subsets():
    S = TransitionSystem(["a", "b"], ["a"], ["u"], {("a", "u"): ["b"], ("b", "u"): ["a"]})
    M = lift_system(S).materialize()
    assert len(M) == 3
    assert M.post(frozenset({"a", "b"}), "u") == {frozenset({"a"}), frozenset({"b"}),
                                                  frozenset({"a", "b"})}


def test_lifted_identity_spec_relation_is_set_inclusion():
    states = ["p", "q", "r"]
    R = lift_relation_RC(identity_relation(states, ["u", "v"]))
    sets = [frozenset(c) for c in ({"p"}, {"q"}, {"p", "q"}, {"p", "q", "r"})]
    for XC, XH in product(sets, sets):
        related = R.gauge(XC, XH, "u", "u") == 0
        assert related == (XH <= XC)
        assert R.gauge(XC, XH, "u", "v") == INF


def test_lifted_spec_relation_on_singletons_is_base_relation():
    base = TableRelation({("c", "h", "s", "v"): F(1, 2)})
    R = lift_relation_RC(base)
    assert R.gauge(frozenset({"c"}), frozenset({"h"}), "s", "v") == F(1, 2)
    assert R.gauge(frozenset({"c"}), frozenset({"h", "g"}), "s", "v") == INF


def test_case_bridge_gauges():
    bridge = cs.CaseBridge()
    U = cs.INPUTS[0]
    p = (F("0.2"), F("0.2"), 0, 0)
    q = (F("0.3"), F("0.2"), 0, 0)
    assert bridge.set_gauge(frozenset({p}), frozenset({p}), U, U) == F("0.055")
    # midpoint plant state (0.25, 0.2) gives 0.05 + 0.05
    assert bridge.set_gauge(frozenset({q}), frozenset({p}), U, U) == F("0.1")
    assert bridge.set_gauge(frozenset({p}), frozenset({(F("0.2"), F("0.2"), 0, 1)}), U, U) == INF
    R = lift_relation_R(bridge)
    assert R.gauge(frozenset({p}), ObserverState(frozenset({(p, F("0.05"))})), U, U) == F("0.055")


def test_case_bridge_matches_sampled_chain():
    from symobs.relation import compose_gauges
    U = cs.INPUTS[0]
    xh = (F("0.21"), F("0.18"), 0, 0)
    xc = (F("0.2"), F("0.2"), 0, 0)
    middle = cs.sample_states(xc, F("0.05"))
    chained = compose_gauges(cs.case_relation_c(), cs.case_relation_o(), middle, cs.INPUTS)
    assert chained.gauge(xh, xc, U, U) == cs.CaseBridge().pair_gauge(xh, xc, U, U)


def test_finite_bridge_pair_gauge_is_brute_force_chain():
    inst = next(i for i in map(random_instance, range(10)) if i is not None)
    bridge = FiniteBridge(inst.R, inst.Rcheck, inst.plant.states, inst.plant.inputs)
    for xh, xc, uh, uc in product(inst.cabs.states, inst.oabs.states, inst.cabs.inputs,
                                  inst.oabs.inputs):
        assert bridge.pair_gauge(xh, xc, uh, uc) == brute_chain_gauge(
            inst.R, inst.Rcheck, xh, xc, uh, uc, inst.plant.states, inst.plant.inputs)


def test_trivial_one_state_synthesis():
    S = TransitionSystem(["s"], ["s"], ["u"], {("s", "u"): ["s"]})
    P = PlantWithOutputs(S, lambda x: 0, frozenset({0}))
    ident = identity_relation(["s"], ["u"])
    ctrl = synthesize(S, S, FinitePlantOracle(P, S, ident), ident, ident, ident, EXACT, EXACT,
                      FiniteBridge(ident, ident, ["s"], ["u"]), {"u": "u"}, {"u": "u"},
                      {"u": "u"})
    assert ctrl.n_states == 1
    assert check_acasr(ctrl.system, S, ctrl.relation(), EXACT).ok


def test_synthesized_toy_controllers_certify():
    ok = aborted = 0
    for seed in range(60):
        inst = random_instance(seed)
        if inst is None:
            continue
        try:
            ctrl = synthesize_toy(inst, random_outputs(seed, inst.plant))
        except SynthesisError:
            aborted += 1
            continue
        assert check_synthesized(inst, ctrl).ok, seed
        ok += 1
    assert ok >= 20


def test_coverage_failure_is_an_error():
    # The c-abstraction cannot explain the only initial observer candidate.
    S = TransitionSystem(["s"], ["s"], ["u"], {("s", "u"): ["s"]})
    P = PlantWithOutputs(S, lambda x: 0, frozenset({0}))
    ident = identity_relation(["s"], ["u"])
    far = TableRelation({("s", "s", "u", "u"): 1}, 0, ["u"], ["u"])
    with pytest.raises(CoverageError):
        synthesize(S, S, FinitePlantOracle(P, S, ident), ident, far, ident, EXACT, EXACT,
                   FiniteBridge(far, ident, ["s"], ["u"]), {"u": "u"}, {"u": "u"}, {"u": "u"})


def test_case_controller_size_and_parameters(case_controller):
    assert case_controller.params.as_tuple() == (F("0.055"), F("0.5"), F(0))
    assert case_controller.n_states == 113
    assert case_controller.stats["observer_states"] == 17


def test_case_controller_every_state_is_covered(case_controller):
    kappa = case_controller.RhatC.kappa
    for (XC, XH), XT in case_controller.system.states:
        assert XH and XT.members
        assert all(any(case_controller.RhatC.state_gauge(xs, xh) <= kappa for xs in XC)
                   for xh in XH)


def test_control_input_prefers_smallest_common_input(case_controller):
    spec = case_controller.spec
    only_low = (F("0.18"), F("0.15"), 0, 0)
    both = (F(0), F(0), 1, 0)
    assert spec.enabled_inputs(only_low) == (cs.INPUTS[0],)
    assert spec.enabled_inputs(both) == cs.INPUTS
    dummy = ObserverState(frozenset({(cs.ORIGIN, F("0.05"))}))
    state = ((frozenset({only_low, both}), frozenset()), dummy)
    assert control_input(case_controller, state) == cs.INPUTS[0]
    single = ((frozenset({both}), frozenset()), dummy)
    assert control_input(case_controller, single) == cs.INPUTS[0]
    origin = ((frozenset({cs.ORIGIN}), frozenset()), dummy)
    assert control_input(case_controller, origin) == cs.INPUTS[1]


def test_theorem4_relation_and_metrics():
    R = TableRelation({("h", "x", "v", "p"): F(1, 4)})
    Rc = TableRelation({("x", "o", "p", "w"): F(1, 2)})
    T4 = theorem4_relation(R, Rc, ["s"])
    state = ((frozenset({"c"}), frozenset({"h"})), frozenset({"o"}))
    assert T4.state_gauge(state, "x") == F(3, 4)
    assert dbar_C(lambda a, b: F(2))((("s", "v"), "w"), "p") == 2

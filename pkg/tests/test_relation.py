import json
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from symobs import casestudy as cs
from symobs.numeric import INF
from symobs.relation import (AcParams, EpsilonDomainError, GaugedRelation, TableRelation,
                             compose_gauges, identity_relation, metric_from_json,
                             relation_from_json, relation_to_json, restrict, table_metric,
                             zero_metric)
from oracles import brute_chain_gauge
from strategies import relations, systems

F = Fraction
U1, U2 = cs.INPUTS


def test_params_validation():
    with pytest.raises(ValueError):
        AcParams(0, 1, 0)
    with pytest.raises(ValueError):
        AcParams(-1, 0, 0)
    with pytest.raises(ValueError):
        AcParams(0, 0, -1)
    p = AcParams("0.005", "0.5", 0)
    assert p.bound(F("0.1")) == F("0.055")
    assert p.bound(INF) == INF
    assert p.combine(AcParams("0.05", "0.25", 1)).as_tuple() == (F("0.055"), F("0.5"), F(1))
    assert p.fixed_point() == F("0.01")


def test_case_relation_c_gauge_is_componentwise_distance():
    R = cs.case_relation_c()
    xh = (F("0.10"), F("0.10"), 0, 0)
    x = (F("0.13"), F("0.08"), 0, 0)
    assert R.gauge(xh, x, U1, U1) == F("0.03")
    assert R.gauge(xh, x, U1, U2) == INF
    assert R.member(F("0.03"), xh, x, U1, U1)
    assert not R.member(F("0.029"), xh, x, U1, U1)


def test_case_relation_o_gauge_clips_at_kappa():
    Rc = cs.case_relation_o()
    x = (F("0.12"), F("0.12"), 0, 0)
    xc = (F("0.1"), F("0.1"), 0, 0)
    assert Rc.state_gauge(x, xc) == F("0.05")


def test_channel_mismatch_is_unrelated():
    R = cs.case_relation_c()
    assert R.state_gauge((F(0), F(0), 0, 1), (F(0), F(0), 0, 0)) == INF


def test_membership_below_kappa_is_a_domain_error():
    R = cs.case_relation_o()
    with pytest.raises(EpsilonDomainError):
        R.member(F("0.01"), (F(0), F(0), 0, 0), (F(0), F(0), 0, 0), U1, U1)


def test_chained_case_gauge_is_kappa_sum():
    # x_hat = x_check at a shared grid point, plant state at that point.
    xh = (F("0.2"), F("0.2"), 0, 0)
    middle = [xh, (F("0.21"), F("0.2"), 0, 0), (F("0.25"), F("0.25"), 0, 0)]
    chained = compose_gauges(cs.case_relation_c(), cs.case_relation_o(), middle, cs.INPUTS)
    assert chained.gauge(xh, xh, U1, U1) == F("0.055")
    assert chained.kappa == F("0.055")


@given(st.data())
def test_exists_composition_matches_brute_force(data):
    A = data.draw(systems("a", 3, 2))
    B = data.draw(systems("b", 3, 2))
    C = data.draw(systems("c", 2, 2))
    R1 = data.draw(relations(A, B))
    R2 = data.draw(relations(B, C))
    chained = compose_gauges(R1, R2, B.states, B.inputs)
    for a, c, ua, uc in product(A.states, C.states, A.inputs, C.inputs):
        assert chained.gauge(a, c, ua, uc) == brute_chain_gauge(R1, R2, a, c, ua, uc,
                                                                B.states, B.inputs)


def _forall_exists_oracle(R1, R2, left_set, right_set, ua, uc, middle_states, middle_inputs):
    g1s = {R1.gauge(a, b, ua, ub) for a in left_set for b in middle_states for ub in middle_inputs}
    g2s = {R2.gauge(b, c, ub, uc) for b in middle_states for c in right_set for ub in middle_inputs}
    g1s = sorted(g for g in g1s | {R1.kappa} if g != INF)
    g2s = sorted(g for g in g2s | {R2.kappa} if g != INF)
    best = INF
    for ub, e1, e2 in product(middle_inputs, g1s, g2s):
        if all(any(R2.gauge(b, c, ub, uc) <= e2 and
                   any(R1.gauge(a, b, ua, ub) <= e1 for a in left_set)
                   for b in middle_states) for c in right_set):
            best = min(best, e1 + e2)
    return best


@given(st.data())
def test_forall_exists_composition_matches_literal_search(data):
    A = data.draw(systems("a", 3, 1))
    B = data.draw(systems("b", 3, 2))
    C = data.draw(systems("c", 3, 1))
    R1 = data.draw(relations(A, B))
    R2 = data.draw(relations(B, C))
    lifted = compose_gauges(R1, R2, B.states, B.inputs, mode="forall_exists")
    left = frozenset(data.draw(st.sets(st.sampled_from(A.states), min_size=1)))
    right = frozenset(data.draw(st.sets(st.sampled_from(C.states), min_size=1)))
    ua, uc = A.inputs[0], C.inputs[0]
    assert lifted.gauge(left, right, ua, uc) == _forall_exists_oracle(
        R1, R2, left, right, ua, uc, B.states, B.inputs)


def test_unknown_composition_mode_is_rejected():
    R = identity_relation(["a"], ["u"])
    with pytest.raises(ValueError):
        compose_gauges(R, R, ["a"], ["u"], mode="sometimes")


@given(st.data())
def test_membership_is_nested_in_epsilon(data):
    A = data.draw(systems("a", 2, 2))
    B = data.draw(systems("b", 2, 2))
    R = data.draw(relations(A, B, kappa=F(1, 4)))
    e1 = data.draw(st.sampled_from([F(1, 4), F(1, 2), F(1), F(2)]))
    e2 = data.draw(st.sampled_from([F(1, 4), F(1, 2), F(1), F(2)]))
    lo, hi = min(e1, e2), max(e1, e2)
    for x1, x2, u1, u2 in product(A.states, B.states, A.inputs, B.inputs):
        if R.member(lo, x1, x2, u1, u2):
            assert R.member(hi, x1, x2, u1, u2)
        assert R.gauge(x1, x2, u1, u2) >= R.kappa
    for x1, x2 in product(A.states, B.states):
        expected = min(R.gauge(x1, x2, u1, u2) for u1 in A.inputs for u2 in B.inputs)
        assert R.state_gauge(x1, x2) == expected


@given(st.data())
def test_relation_json_round_trip(data):
    A = data.draw(systems("a", 3, 2))
    B = data.draw(systems("b", 3, 2))
    R = data.draw(relations(A, B, kappa=F(1, 4)))
    doc = json.loads(json.dumps(relation_to_json(R, A.states, B.states)))
    back = relation_from_json(doc)
    for x1, x2, u1, u2 in product(A.states, B.states, A.inputs, B.inputs):
        assert back.gauge(x1, x2, u1, u2) == R.gauge(x1, x2, u1, u2)


def test_relation_json_rejects_gauge_below_kappa():
    doc = {"kappa": "0.5", "entries": [{"x1": "a", "x2": "b", "u1": "u", "u2": "u",
                                         "gauge": "0.25"}]}
    with pytest.raises(ValueError, match=r"\$\.entries\[0\]"):
        relation_from_json(doc)


def test_restrict_and_identity():
    R = identity_relation(["a", "b"], ["u", "v"])
    assert R.gauge("a", "a", "u", "u") == 0
    assert R.gauge("a", "b", "u", "u") == INF
    only_u = restrict(R, lambda x1, x2, u1, u2: u1 == "u")
    assert only_u.gauge("a", "a", "v", "v") == INF
    assert only_u.state_gauge("b", "b") == 0


def test_gauged_relation_clips_values_below_kappa():
    R = GaugedRelation(lambda *a: F(0), kappa=F(1, 2), left_inputs=["u"], right_inputs=["u"])
    assert R.gauge("a", "b", "u", "u") == F(1, 2)


def test_metrics():
    assert zero_metric("a", "b") == 0
    m = table_metric({("a", "b"): "0.5"}, default=1)
    assert m("a", "b") == F(1, 2)
    assert m("b", "a") == 1
    with pytest.raises(ValueError):
        table_metric({("a", "b"): -1})
    m2 = metric_from_json({"entries": [{"u1": "a", "u2": "b", "d": "0.25"}], "default": 0})
    assert m2("a", "b") == F(1, 4)
    assert metric_from_json("zero") is zero_metric


def test_table_relation_pairs_are_sorted():
    R = TableRelation({("b", "x", "u", "u"): 1, ("a", "x", "u", "u"): 0})
    assert R.pairs() == [("a", "x"), ("b", "x")]

"""Powerset lifting, lifted relations and output-feedback controller synthesis.

A lifted state is a nonempty ``frozenset`` of base states.  The lifted
transition map offers every nonempty subset of the union of the members'
successors, but only for inputs enabled on *all* members.

Synthesis never materializes the lifted systems.  It explores the
closed loop of spec, c-abstraction and runtime observer from the initial
measurements, keeping for each step the largest relevant successor subset:
the members of ``U r(xh, uh)`` that lie within the contraction bound of some
observer candidate.  Members outside that bound can never realize the lifted
gauge, so dropping them leaves the gauge unchanged while keeping the
controller's common-input requirement as weak as possible.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .compose import theorem1_relation
from .numeric import INF, sort_key, sorted_states
from .observer import (BoundMenu, ObserverState, members, nonempty_subsets, observer_init,
                       observer_outputs, observer_update, theorem2_relation)
from .relation import AcParams, GaugedRelation, Metric, compose_gauges, zero_metric
from .systems import DomainError, TransitionSystem


class SynthesisError(RuntimeError):
    """A synthesis invariant failed (no common spec input, disabled witness input)."""


class CoverageError(SynthesisError):
    """An observer candidate has no covering c-abstracted state."""


# -- lifted systems ---------------------------------------------------------------

class LiftedSystem:
    """Powerset system over a finite base system, evaluated lazily."""

    finite = False

    def __init__(self, base, name: str = ""):
        self.base = base
        self.inputs = base.inputs
        self.name = name or f"lift({getattr(base, 'name', '')})"
        self.initial = frozenset(nonempty_subsets(base.initial)) if len(base.initial) <= 12 else None

    def contains(self, xs) -> bool:
        return isinstance(xs, frozenset) and bool(xs) and all(self.base.contains(x) for x in xs)

    def maximal_post(self, xs, u) -> frozenset:
        """Union of the members' successors, or empty if ``u`` is disabled on a member."""
        if not self.contains(xs):
            raise DomainError(f"not a lifted state: {xs!r}")
        union = set()
        for x in xs:
            succ = self.base.post(x, u)
            if not succ:
                return frozenset()
            union |= succ
        return frozenset(union)

    def post(self, xs, u) -> frozenset:
        return frozenset(nonempty_subsets(self.maximal_post(xs, u)))

    def enabled_inputs(self, xs) -> tuple:
        return tuple(u for u in self.inputs if all(self.base.post(x, u) for x in xs))

    def materialize(self) -> TransitionSystem:
        """Explicit powerset system; only sensible for tiny bases."""
        states = nonempty_subsets(self.base.states)
        trans = {}
        for xs in states:
            for u in self.enabled_inputs(xs):
                trans[(xs, u)] = self.post(xs, u)
        return TransitionSystem(states, nonempty_subsets(self.base.initial), self.inputs, trans,
                                name=self.name)


def lift_system(S) -> LiftedSystem:
    return LiftedSystem(S)


# -- lifted relations ------------------------------------------------------------

def lift_relation_RC(RhatC: GaugedRelation, name: str = "bold RhatC") -> GaugedRelation:
    """Every member of the right set is covered by some member of the left set."""

    def gauge(XC, XH, uc, uh):
        worst = RhatC.kappa
        for xh in XH:
            best = min((RhatC.gauge(xc, xh, uc, uh) for xc in XC), default=INF)
            if best > worst:
                worst = best
            if worst == INF:
                break
        return worst

    return GaugedRelation(gauge, RhatC.kappa, RhatC.left_inputs, RhatC.right_inputs, name)


class FiniteBridge:
    """Chains ``R`` (c-abstraction to plant) and ``Rcheck`` (plant to o-abstraction)
    through an enumerable plant."""

    def __init__(self, R: GaugedRelation, Rcheck: GaugedRelation, plant_states: Iterable,
                 plant_inputs: Iterable):
        plant_states = list(plant_states)
        plant_inputs = list(plant_inputs)
        self.kappa = R.kappa + Rcheck.kappa
        self.pair = compose_gauges(R, Rcheck, plant_states, plant_inputs, "exists", "R;Rcheck")
        self.sets = compose_gauges(R, Rcheck, plant_states, plant_inputs, "forall_exists",
                                   "bold R")

    def pair_gauge(self, xh, xc, uh, uc):
        return self.pair.gauge(xh, xc, uh, uc)

    def pair_state_gauge(self, xh, xc):
        return self.pair.state_gauge(xh, xc)

    def set_gauge(self, XH, XC, uh, uc):
        return self.sets.gauge(frozenset(XH), frozenset(XC), uh, uc)

    def relation(self) -> GaugedRelation:
        return self.sets


def lift_relation_R(bridge, name: str = "bold R") -> GaugedRelation:
    """Lifted relation from lifted c-abstraction sets to observer states."""
    inner = bridge.relation()

    def gauge(XH, XT, uh, uc):
        return inner.gauge(frozenset(XH), members(XT), uh, uc)

    return GaugedRelation(gauge, inner.kappa, inner.left_inputs, inner.right_inputs, name)


def theorem3_relation(RhatC: GaugedRelation, bridge, name: str = "bold R_C") -> GaugedRelation:
    """Composite lifted relation from the lifted state-feedback controller to the observer."""
    return theorem1_relation(lift_relation_RC(RhatC), lift_relation_R(bridge), name)


def theorem4_relation(R: GaugedRelation, Rcheck: GaugedRelation, spec_inputs: Iterable = (),
                      name: str = "bar R_C") -> GaugedRelation:
    """``min_{xh in XH} R(xh, x, uh, u) + min_{xc in XT} Rcheck(x, xc, u, uc)``.

    Left states are ``((XC, XH), XT)`` and left inputs ``((u_spec, uh), uc)``.
    """
    Rp = theorem2_relation(Rcheck)
    spec_inputs = list(spec_inputs) or [None]
    left_inputs = [((us, uh), uc) for us in spec_inputs for uh in R.left_inputs
                   for uc in Rcheck.right_inputs]

    def gauge(state, x, inputs, u):
        (_, XH), XT = state
        (_, uh), uc = inputs
        g1 = min((R.gauge(xh, x, uh, u) for xh in XH), default=INF)
        if g1 == INF:
            return INF
        return g1 + Rp.gauge(x, XT, u, uc)

    return GaugedRelation(gauge, R.kappa + Rcheck.kappa, left_inputs, R.right_inputs, name)


def dbar_C(dbar: Metric) -> Metric:
    """Metric for the final relation: ``((u_spec, uh), uc), u -> dbar(uh, uc)``."""
    return lambda inputs, u: dbar(inputs[0][1], inputs[1])


def d_lifted_C(dbar: Metric) -> Metric:
    """Metric for the lifted composite relation: ``(u_spec, uh), uc -> dbar(uh, uc)``."""
    return lambda upair, uc: dbar(upair[1], uc)


# -- synthesis -------------------------------------------------------------------

@dataclass
class SynthesizedController:
    """Closed-loop output-feedback controller.

    ``system`` has states ``((XC, XH), XT)``: a set of spec states, a set of
    c-abstracted states and a runtime observer state.  Its single enabled input
    per state is ``((u_spec, uh), uc)``, chosen by :func:`control_input` and the
    witness maps.
    """

    system: TransitionSystem
    params: AcParams
    witness7: dict
    witness9: dict
    witness10: dict
    spec: Any
    cabs: Any
    oracle: Any
    bridge: Any
    RhatC: GaugedRelation
    R: GaugedRelation
    Rcheck: GaugedRelation
    obs_params: AcParams
    menu: BoundMenu | None
    dcheck: Metric
    dbar: Metric
    stats: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.system.states)

    @property
    def observer_states(self) -> set:
        return {xt for (_, xt) in self.system.states}

    def relation(self) -> GaugedRelation:
        return theorem4_relation(self.R, self.Rcheck, self.spec.inputs)

    def initial_state(self, y0):
        return _initial_state(self, y0)

    def step(self, state, y_next):
        return controller_successor(self, state, y_next)

    def inputs_for(self, state) -> tuple:
        """``(u_spec, uh, u, uc)`` applied from ``state``."""
        us = control_input(self, state)
        uh = self.witness7[us]
        u = self.witness9[uh]
        return us, uh, u, self.witness10[u]


def control_input(ctrl: SynthesizedController, state):
    """Smallest spec input enabled on every member of the spec-state set."""
    (XC, _), _ = state
    common = None
    for xs in XC:
        en = set(ctrl.spec.enabled_inputs(xs))
        common = en if common is None else common & en
    if not common:
        raise SynthesisError(f"no spec input is enabled on all of {sorted_states(XC)!r}")
    return sorted_states(common)[0]


def _set_gauge(ctrl, XH, XT, uh, uc):
    return ctrl.bridge.set_gauge(XH, members(XT), uh, uc)


def _state_gauge(ctrl, XH, XT):
    return min((_set_gauge(ctrl, XH, XT, uh, uc) for uh in ctrl.cabs.inputs
                for uc in ctrl.Rcheck.right_inputs), default=INF)


def _cover_spec(ctrl, pool, XH, where):
    XC = frozenset(xs for xs in pool
                   if any(ctrl.RhatC.state_gauge(xs, xh) <= ctrl.RhatC.kappa for xh in XH))
    for xh in XH:
        if not any(ctrl.RhatC.state_gauge(xs, xh) <= ctrl.RhatC.kappa for xs in XC):
            raise CoverageError(f"{where}: c-abstracted state {xh!r} has no spec state")
    return XC


def _initial_state(ctrl, y0):
    XT = observer_init(ctrl.oracle, y0, ctrl.obs_params, ctrl.menu)
    kappa = ctrl.params.kappa
    XH = frozenset(xh for xh in ctrl.cabs.initial
                   if any(ctrl.bridge.pair_state_gauge(xh, xc) <= kappa for xc in XT.members))
    if not XH or _state_gauge(ctrl, XH, XT) > kappa:
        raise CoverageError(f"initial observer state {XT} (y0={y0!r}) is not covered")
    XC = _cover_spec(ctrl, ctrl.spec.initial, XH, "initial")
    return ((XC, XH), XT)


def controller_successor(ctrl: SynthesizedController, state, y_next):
    """Closed-loop update after measuring ``y_next``."""
    (XC, XH), XT = state
    us, uh, u, uc = ctrl.inputs_for(state)
    e = _state_gauge(ctrl, XH, XT)
    if _set_gauge(ctrl, XH, XT, uh, uc) > e:
        raise SynthesisError(f"inputs {(uh, uc)!r} are not related at level {e}")
    bound = ctrl.params.bound(e, ctrl.dbar(uh, uc))
    XT2 = observer_update(XT, u, uc, y_next, ctrl.oracle, ctrl.obs_params, ctrl.dcheck, ctrl.menu)
    union = set()
    for xh in XH:
        succ = ctrl.cabs.post(xh, uh)
        if not succ:
            raise SynthesisError(f"witness input {uh!r} disabled at c-abstracted state {xh!r}")
        union |= succ
    XH2 = frozenset(xh2 for xh2 in union
                    if any(ctrl.bridge.pair_gauge(xh2, xc2, uh, uc) <= bound for xc2 in XT2.members))
    if not XH2 or _set_gauge(ctrl, XH2, XT2, uh, uc) > bound:
        raise CoverageError(f"observer state {XT2} is not covered within {bound}")
    pool = set()
    for xs in XC:
        pool |= ctrl.spec.post(xs, us)
    XC2 = _cover_spec(ctrl, pool, XH2, "step")
    return ((XC2, XH2), XT2)


def synthesize(spec, cabs, oracle, RhatC: GaugedRelation, R: GaugedRelation,
               Rcheck: GaugedRelation, params: AcParams, obs_params: AcParams, bridge,
               witness7: dict, witness9: dict, witness10: dict,
               dcheck: Metric | None = None, dbar: Metric | None = None,
               menu: BoundMenu | None = None, limit: int = 100_000) -> SynthesizedController:
    """Build the reachable closed-loop controller.

    ``params`` and ``obs_params`` are the parameters of ``R`` and ``Rcheck``;
    the controller's parameters are their combination.  The witness maps come
    from the side-condition checks.
    """
    ctrl = SynthesizedController(
        system=None, params=params.combine(obs_params), witness7=witness7, witness9=witness9,
        witness10=witness10, spec=spec, cabs=cabs, oracle=oracle, bridge=bridge, RhatC=RhatC,
        R=R, Rcheck=Rcheck, obs_params=obs_params, menu=menu, dcheck=dcheck or zero_metric,
        dbar=dbar or zero_metric)
    initial = [_initial_state(ctrl, y0) for y0 in sorted_states(oracle.initial_outputs())]
    seen = set(initial)
    queue = deque(sorted(seen, key=sort_key))
    trans = {}
    inputs = set()
    max_sizes = [0, 0, 0]
    while queue:
        st = queue.popleft()
        (XC, XH), XT = st
        max_sizes = [max(max_sizes[0], len(XC)), max(max_sizes[1], len(XH)),
                     max(max_sizes[2], len(XT))]
        us, uh, u, uc = ctrl.inputs_for(st)
        label = ((us, uh), uc)
        inputs.add(label)
        for y in observer_outputs(XT, u, uc, oracle, obs_params, ctrl.dcheck, menu):
            nxt = controller_successor(ctrl, st, y)
            trans.setdefault((st, label), set()).add(nxt)
            if nxt not in seen:
                if len(seen) >= limit:
                    raise SynthesisError(f"controller exceeds {limit} states")
                seen.add(nxt)
                queue.append(nxt)
    ctrl.system = TransitionSystem(seen, initial, inputs, trans, name="controller")
    ctrl.stats = {
        "controller_states": len(seen),
        "observer_states": len({xt for (_, xt) in seen}),
        "max_spec_set": max_sizes[0],
        "max_cabs_set": max_sizes[1],
        "max_observer_set": max_sizes[2],
    }
    return ctrl

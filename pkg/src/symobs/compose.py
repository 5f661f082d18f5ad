"""Relation-based composition ``S1 x_R S2`` and the state-feedback relation.

Only the part reachable from the composed initial set is built.  For an
approximate relation a transition from ``(x1, x2)`` under ``(u1, u2)`` needs
``gauge(x1, x2, u1, u2) <= e`` with ``e`` the pair's state gauge, and the
successor pair must satisfy ``state_gauge <= kappa + beta*e + lambda*d``.
Exact composition is the special case of an exact relation with ``EXACT``
parameters.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .numeric import INF, sorted_states
from .relation import EXACT, AcParams, GaugedRelation, Metric, zero_metric
from .systems import TransitionSystem

log = logging.getLogger(__name__)


class CompositionInvariantError(AssertionError):
    """A composed state fell outside the relation it was built from."""


@dataclass
class ComposedSystem:
    """Reachable part of a composition together with a state legend."""

    system: TransitionSystem
    relation: GaugedRelation
    params: AcParams
    warnings: list = field(default_factory=list)

    @property
    def states(self):
        return self.system.states

    def legend(self, fmt: Callable[[Any], str] = str) -> dict:
        """``{"<index>": {"left": .., "right": ..}}`` in BFS-independent canonical order."""
        return {str(i): {"left": fmt(x1), "right": fmt(x2)}
                for i, (x1, x2) in enumerate(self.system.states)}


def compose(S1, S2, R: GaugedRelation, p: AcParams = EXACT, d: Metric | None = None,
            name: str = "") -> ComposedSystem:
    """Def.-4 composition; both factors need ``initial``, ``enabled_inputs`` and ``post``."""
    d = d or zero_metric
    warnings = []
    initial = [(a, b) for a in sorted_states(S1.initial) for b in sorted_states(S2.initial)
               if R.state_gauge(a, b) <= p.kappa]
    if not initial:
        msg = "composition has no initial states (legal but vacuous)"
        log.warning(msg)
        warnings.append(msg)
    seen = set(initial)
    queue = deque(initial)
    trans = {}
    inputs = set()
    while queue:
        x1, x2 = queue.popleft()
        e = R.state_gauge(x1, x2)
        if e == INF:
            raise CompositionInvariantError(f"state {(x1, x2)!r} is not related")
        for u1 in S1.enabled_inputs(x1):
            succ1 = sorted_states(S1.post(x1, u1))
            for u2 in S2.enabled_inputs(x2):
                if R.gauge(x1, x2, u1, u2) > e:
                    continue
                bound = p.bound(e, d(u1, u2))
                succ2 = sorted_states(S2.post(x2, u2))
                succ = [(a, b) for a in succ1 for b in succ2 if R.state_gauge(a, b) <= bound]
                if not succ:
                    continue
                trans[((x1, x2), (u1, u2))] = succ
                inputs.add((u1, u2))
                for s in succ:
                    if s not in seen:
                        seen.add(s)
                        queue.append(s)
    system = TransitionSystem(seen, initial, inputs, trans, name=name or "composition")
    return ComposedSystem(system, R, p, warnings)


def theorem1_relation(RhatC: GaugedRelation, R: GaugedRelation, name: str = "R_C") -> GaugedRelation:
    """``R_C(((xc, xh), x), ((uc, uh), u)) = R(xh, x, uh, u)`` when ``(xc, xh)`` is related.

    Serves both the state-feedback relation and, with lifted arguments, the
    lifted composite relation of the output-feedback construction.
    """
    left_inputs = [(uc, uh) for uc in RhatC.left_inputs for uh in R.left_inputs]

    def gauge(pair, x, upair, u):
        xc, xh = pair
        if RhatC.state_gauge(xc, xh) == INF:
            return INF
        return R.gauge(xh, x, upair[1], u)

    def state_gauge(pair, x):
        xc, xh = pair
        if RhatC.state_gauge(xc, xh) == INF:
            return INF
        return R.state_gauge(xh, x)

    return GaugedRelation(gauge, R.kappa, left_inputs, R.right_inputs, name,
                          state_gauge_fn=state_gauge)


def d_C(d: Metric) -> Metric:
    """Metric on composed inputs: ``d_C((uc, uh), u) = d(uh, u)``."""
    return lambda upair, u: d(upair[1], u)

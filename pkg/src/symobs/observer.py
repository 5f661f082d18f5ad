"""Powerset observer over an o-abstraction.

Two flavours are provided:

* the *runtime* observer used by the controller, whose states are
  :class:`ObserverState` values (candidate abstract states each carrying a
  worst-case gauge bound) updated from measured outputs;
* the *definition-level* observer :func:`definition_observer`, a finite
  powerset system without output filtering, used to check the simulation
  statements on small instances.

Existential questions about plant states ("is there a plant state within
``b`` of this cell whose successor ...") are answered by a plant oracle: the
finite oracle enumerates, the case study supplies interval reasoning.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable

from .numeric import INF, fmt_num, sort_key, sorted_states, to_fraction
from .relation import AcParams, GaugedRelation, Metric, zero_metric
from .systems import PlantWithOutputs, TransitionSystem


class InconsistentMeasurement(RuntimeError):
    """The measured output is incompatible with every candidate."""


@dataclass(frozen=True)
class ObserverState:
    """Nonempty set of ``(abstract state, bound)`` candidates."""

    candidates: frozenset

    def __post_init__(self):
        if not self.candidates:
            raise InconsistentMeasurement("observer state would be empty")
        names = [c for c, _ in self.candidates]
        if len(set(names)) != len(names):
            raise ValueError("each abstract state may carry only one bound")

    @classmethod
    def from_dict(cls, bounds: dict) -> "ObserverState":
        return cls(frozenset(bounds.items()))

    @property
    def members(self) -> frozenset:
        return frozenset(c for c, _ in self.candidates)

    @property
    def bounds(self) -> dict:
        return dict(self.candidates)

    @property
    def max_bound(self):
        return max(b for _, b in self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(sorted(self.candidates, key=sort_key))

    def sort_key(self):
        return (len(self.candidates), tuple(sort_key(c) for c in sorted(self.candidates, key=sort_key)))

    def __str__(self) -> str:
        inner = ", ".join(f"{c}@{fmt_num(b)}" for c, b in self)
        return "{" + inner + "}"


def members(x) -> frozenset:
    """Abstract states of an observer state or of a plain candidate set."""
    if isinstance(x, ObserverState):
        return x.members
    return frozenset(x)


@dataclass(frozen=True)
class BoundMenu:
    """Finite set of admissible candidate bounds; bounds are rounded up into it.

    With ``k = kappa + lambda * dmax`` (``dmax`` bounding the input metric)
    the menu holds the partial sums ``k * (1 + beta + ... + beta^i)`` for
    ``i <= depth``, the contraction fixed point ``k / (1 - beta)`` and the cap
    ``2 * k / (1 - beta)``.  The contraction map sends ``[0, cap]`` into
    itself, so every bound stays on the menu.  Values above the cap are
    returned unchanged because rounding down would be unsound.
    """

    params: AcParams
    depth: int = 0
    dmax: Fraction = Fraction(0)

    @property
    def values(self) -> tuple:
        k = self.params.kappa + self.params.lam * to_fraction(self.dmax)
        b = self.params.beta
        vals = {k * sum(b**j for j in range(i + 1)) for i in range(self.depth + 1)}
        if b < 1 and k > 0:
            vals.add(k / (1 - b))
            vals.add(2 * k / (1 - b))
        return tuple(sorted(vals))

    @property
    def cap(self):
        return self.values[-1]

    def quantize(self, value):
        for v in self.values:
            if value <= v:
                return v
        return value


# -- plant oracles ---------------------------------------------------------------

class FinitePlantOracle:
    """Witness oracle that enumerates a finite plant.

    ``step`` answers, for a candidate ``(xc, b)`` and inputs ``(u, uc)``: which
    successors ``xc'`` of ``xc`` admit a plant state ``x`` with
    ``Rcheck(x, xc, u, uc) <= b`` and a successor ``x'`` of ``x`` within
    ``b_next`` of ``xc'``, and which outputs those ``x'`` produce.
    """

    def __init__(self, plant: PlantWithOutputs, oabs, Rcheck: GaugedRelation):
        self.plant = plant
        self.system = plant.system
        self.oabs = oabs
        self.R = Rcheck

    def initial_outputs(self) -> set:
        return {self.plant.output(x) for x in self.system.initial}

    def initial_candidates(self, y0, level) -> list:
        return [xc for xc in sorted_states(self.oabs.initial)
                if any(self.plant.output(x) == y0 and self.R.state_gauge(x, xc) <= level
                       for x in self.system.initial)]

    def step(self, xc, b, u, uc, b_next) -> list:
        out = {}
        nexts = sorted_states(self.oabs.post(xc, uc))
        for x in self.system.states:
            if self.R.gauge(x, xc, u, uc) > b:
                continue
            for x2 in self.system.post(x, u):
                y = self.plant.output(x2)
                for xc2 in nexts:
                    if self.R.state_gauge(x2, xc2) <= b_next:
                        out.setdefault(xc2, set()).add(y)
        return [(xc2, out[xc2]) for xc2 in sorted_states(out)]

    def contains_truth(self, state: ObserverState, x) -> bool:
        return any(self.R.state_gauge(x, xc) <= b for xc, b in state.candidates)


# -- runtime observer ----------------------------------------------------------

def observer_init(oracle, y0, params: AcParams, menu: BoundMenu | None = None) -> ObserverState:
    """Initial candidates compatible with the first measured output, bound ``kappa'``."""
    level = params.kappa if menu is None else menu.quantize(params.kappa)
    cands = oracle.initial_candidates(y0, params.kappa)
    if not cands:
        raise InconsistentMeasurement(f"no initial abstract state explains output {y0!r}")
    return ObserverState(frozenset((xc, level) for xc in cands))


def _next_bound(params, dcheck, b, u, uc, menu):
    value = params.bound(b, dcheck(u, uc))
    return value if menu is None else menu.quantize(value)


def observer_update(state: ObserverState, u, uc, y_next, oracle, params: AcParams,
                    dcheck: Metric | None = None, menu: BoundMenu | None = None) -> ObserverState:
    """One estimator step: propagate, contract the bounds, prune by the output."""
    dcheck = dcheck or zero_metric
    new = {}
    for xc, b in state:
        bn = _next_bound(params, dcheck, b, u, uc, menu)
        for xc2, ys in oracle.step(xc, b, u, uc, bn):
            if y_next in ys and bn < new.get(xc2, INF):
                new[xc2] = bn
    if not new:
        raise InconsistentMeasurement(f"output {y_next!r} after input {u!r} explains no candidate")
    return ObserverState.from_dict(new)


def observer_outputs(state: ObserverState, u, uc, oracle, params: AcParams,
                     dcheck: Metric | None = None, menu: BoundMenu | None = None) -> list:
    """Every output the next measurement can take."""
    dcheck = dcheck or zero_metric
    ys = set()
    for xc, b in state:
        bn = _next_bound(params, dcheck, b, u, uc, menu)
        for _, out in oracle.step(xc, b, u, uc, bn):
            ys |= out
    return sorted_states(ys)


def observer_system(oracle, oabs, params: AcParams, plant_inputs: Iterable,
                    witness: dict | None = None, dcheck: Metric | None = None,
                    menu: BoundMenu | None = None, limit: int = 100_000) -> TransitionSystem:
    """Reachable observer states over all inputs and all output sequences.

    Transitions are labelled by the o-abstraction input ``uc = witness[u]``
    (identity by default); the plant input ``u`` drives the oracle.
    """
    witness = witness or {u: u for u in plant_inputs}
    initial = [observer_init(oracle, y0, params, menu) for y0 in sorted_states(oracle.initial_outputs())]
    seen = set(initial)
    queue = deque(sorted(seen, key=sort_key))
    trans = {}
    while queue:
        st = queue.popleft()
        for u in sorted_states(plant_inputs):
            uc = witness[u]
            for y in observer_outputs(st, u, uc, oracle, params, dcheck, menu):
                nxt = observer_update(st, u, uc, y, oracle, params, dcheck, menu)
                trans.setdefault((st, uc), set()).add(nxt)
                if nxt not in seen:
                    if len(seen) >= limit:
                        raise RuntimeError(f"observer exceeds {limit} states")
                    seen.add(nxt)
                    queue.append(nxt)
    return TransitionSystem(seen, initial, oabs.inputs, trans, name="observer")


# -- definition-level observer for finite plants ----------------------------------

def nonempty_subsets(items: Iterable) -> list:
    items = sorted_states(set(items))
    return [frozenset(c) for n in range(1, len(items) + 1) for c in itertools.combinations(items, n)]


def justified_successors(plant_system, oabs, Rcheck: GaugedRelation, params: AcParams,
                         dcheck: Metric, cands: frozenset, uc) -> frozenset:
    """Abstract successors admitted by the observer transition rule (no outputs)."""
    out = set()
    for xc in cands:
        nexts = oabs.post(xc, uc)
        if not nexts:
            continue
        for x in plant_system.states:
            for u in plant_system.enabled_inputs(x):
                g = Rcheck.gauge(x, xc, u, uc)
                if g == INF:
                    continue
                bound = params.bound(g, dcheck(u, uc))
                for x2 in plant_system.post(x, u):
                    for xc2 in nexts:
                        if Rcheck.state_gauge(x2, xc2) <= bound:
                            out.add(xc2)
    return frozenset(out)


def definition_observer(plant_system, oabs, Rcheck: GaugedRelation, params: AcParams,
                        dcheck: Metric | None = None) -> TransitionSystem:
    """Full powerset observer: every nonempty subset of the justified successors."""
    dcheck = dcheck or zero_metric
    states = nonempty_subsets(oabs.states)
    initial = nonempty_subsets(oabs.initial)
    trans = {}
    for cands in states:
        for uc in oabs.inputs:
            just = justified_successors(plant_system, oabs, Rcheck, params, dcheck, cands, uc)
            if just:
                trans[(cands, uc)] = nonempty_subsets(just)
    return TransitionSystem(states, initial, oabs.inputs, trans, name="observer(def)")


def theorem2_relation(Rcheck: GaugedRelation, name: str = "R'") -> GaugedRelation:
    """``R'(x, xt, u, uc) = min over xc in xt of Rcheck(x, xc, u, uc)``."""

    def gauge(x, xt, u, uc):
        return min((Rcheck.gauge(x, xc, u, uc) for xc in members(xt)), default=INF)

    def state_gauge(x, xt):
        return min((Rcheck.state_gauge(x, xc) for xc in members(xt)), default=INF)

    return GaugedRelation(gauge, Rcheck.kappa, Rcheck.left_inputs, Rcheck.right_inputs,
                          name, state_gauge_fn=state_gauge)

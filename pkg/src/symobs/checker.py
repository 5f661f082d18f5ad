"""Verification of approximate contractive (alternating) simulation relations.

The quantifier over ``eps`` is discharged at each pair's minimal level, its
state gauge ``e``.  Both the membership ``gauge <= eps`` and the contraction
bound ``kappa + beta*eps + lambda*d`` are monotone in ``eps``, so a witness
that works at ``e`` works verbatim for every larger ``eps``, and pairs are not
related at all below ``e``.

Pairs and inputs are visited in the canonical order of
:func:`symobs.numeric.sort_key`, so the first violation found is the
lexicographically smallest one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .numeric import INF, sort_key, sorted_states, to_fraction
from .relation import AcParams, GaugedRelation, Metric, zero_metric


class CapabilityError(TypeError):
    """A check that needs state enumeration was given a generator-backed system."""


@dataclass
class CheckVerdict:
    """Outcome of a check.

    ``method`` is ``"exact"`` for exhaustive finite checks and ``"sampled"``
    when the left or right system was represented by samples.  ``witness``
    holds input witness maps for the side conditions.
    """

    ok: bool
    counterexample: dict | None = None
    method: str = "exact"
    witness: dict | None = None
    stats: dict = field(default_factory=dict)
    _replay: Callable[[], bool] | None = field(default=None, repr=False, compare=False)

    def __bool__(self) -> bool:
        return self.ok

    def replay(self) -> bool:
        """Re-run the single failing condition; ``False`` confirms the counterexample."""
        if self.ok or self._replay is None:
            return True
        return bool(self._replay())


def _require_finite(*systems) -> None:
    for s in systems:
        if not getattr(s, "finite", False):
            raise CapabilityError(f"{s!r} cannot enumerate its states; use a sampled check")


def _failure(condition: str, method: str = "exact", replay=None, **fields) -> CheckVerdict:
    cex = {"condition": condition}
    cex.update(fields)
    return CheckVerdict(False, cex, method, _replay=replay)


# -- Defs. of acSR / acASR on finite systems -------------------------------------

def init_condition_holds(S1, S2, R: GaugedRelation, x10) -> bool:
    return any(R.state_gauge(x10, x20) <= R.kappa for x20 in S2.initial)


def step_condition_holds(S1, S2, R: GaugedRelation, p: AcParams, d: Metric,
                         x1, x2, u1, alternating: bool) -> bool:
    """Step condition at the pair's minimal level ``e`` for one left input."""
    e = R.state_gauge(x1, x2)
    if e == INF:
        return True
    succ1 = S1.post(x1, u1)
    for u2 in S2.enabled_inputs(x2):
        if R.gauge(x1, x2, u1, u2) > e:
            continue
        bound = p.bound(e, d(u1, u2))
        succ2 = S2.post(x2, u2)
        if alternating:
            ok = all(any(R.state_gauge(a, b) <= bound for a in succ1) for b in succ2)
        else:
            ok = all(any(R.state_gauge(a, b) <= bound for b in succ2) for a in succ1)
        if ok:
            return True
    return False


def _check(S1, S2, R, p, d, alternating, pairs=None) -> CheckVerdict:
    _require_finite(S1, S2)
    d = d or zero_metric
    for x10 in sorted_states(S1.initial):
        if not init_condition_holds(S1, S2, R, x10):
            return _failure("init", x1=x10, eps=R.kappa,
                            replay=lambda x10=x10: init_condition_holds(S1, S2, R, x10))
    if pairs is None:
        pairs = ((x1, x2) for x1 in S1.states for x2 in S2.states)
    checked = 0
    for x1, x2 in pairs:
        e = R.state_gauge(x1, x2)
        if e == INF:
            continue
        checked += 1
        for u1 in S1.enabled_inputs(x1):
            if not step_condition_holds(S1, S2, R, p, d, x1, x2, u1, alternating):
                return _failure(
                    "step", x1=x1, x2=x2, u1=u1, eps=e,
                    replay=lambda x1=x1, x2=x2, u1=u1: step_condition_holds(
                        S1, S2, R, p, d, x1, x2, u1, alternating))
    return CheckVerdict(True, stats={"pairs": checked})


def check_acsr(S1, S2, R: GaugedRelation, p: AcParams, d: Metric | None = None,
               pairs: Iterable | None = None) -> CheckVerdict:
    """Is ``R`` a ``p``-acSR from ``S1`` to ``S2`` with ``d``?

    ``pairs`` optionally restricts the step check to a known superset of the
    finitely related pairs (it must be given in canonical order to keep the
    counterexample choice deterministic).
    """
    return _check(S1, S2, R, p, d, alternating=False, pairs=pairs)


def check_acasr(S1, S2, R: GaugedRelation, p: AcParams, d: Metric | None = None,
                pairs: Iterable | None = None) -> CheckVerdict:
    """Is ``R`` a ``p``-acASR from ``S1`` to ``S2`` with ``d``?"""
    return _check(S1, S2, R, p, d, alternating=True, pairs=pairs)


def check_on_eps_grid(S1, S2, R, p, d, eps_grid, alternating: bool) -> bool:
    """Reference check quantifying over an explicit list of ``eps`` values.

    Used by tests to confirm that checking only at the minimal level is
    complete.  Slow; toy systems only.
    """
    d = d or zero_metric
    for x10 in S1.initial:
        if not init_condition_holds(S1, S2, R, x10):
            return False
    for eps in eps_grid:
        eps = to_fraction(eps)
        if eps < R.kappa:
            continue
        for x1 in S1.states:
            for x2 in S2.states:
                if R.state_gauge(x1, x2) > eps:
                    continue
                for u1 in S1.enabled_inputs(x1):
                    found = False
                    for u2 in S2.enabled_inputs(x2):
                        if R.gauge(x1, x2, u1, u2) > eps:
                            continue
                        bound = p.bound(eps, d(u1, u2))
                        s1, s2 = S1.post(x1, u1), S2.post(x2, u2)
                        if alternating:
                            ok = all(any(R.state_gauge(a, b) <= bound for a in s1) for b in s2)
                        else:
                            ok = all(any(R.state_gauge(a, b) <= bound for b in s2) for a in s1)
                        if ok:
                            found = True
                            break
                    if not found:
                        return False
    return True


# -- sampled checks against a continuous plant ---------------------------------------

class SampledPair:
    """Interface a plant model implements so the checker can sample it.

    Plant states are held as integer arrays ``(n, dim)`` of coordinates in
    units of ``1/scale`` plus channel bits; all relation gauges are returned
    in the same integer units.  Methods:

    * ``samples(x_abs)`` -> batch of plant states near the abstract state,
    * ``state_gauge(x_abs, batch)`` -> int array (``-1`` meaning infinity),
    * ``gauge(x_abs, batch, u_abs, u)`` -> int array (``-1`` meaning infinity),
    * ``post(batch, u)`` -> list of successor batches aligned with ``batch``,
    * ``initial_batch()`` -> the plant's initial states,
    * ``inputs`` -> plant inputs, all enabled everywhere,
    * ``describe(batch, row)`` -> exact representation of one sample.
    """

    scale: int
    inputs: tuple


def _le_bound(sg: np.ndarray, e: np.ndarray, p: AcParams, dval, scale: int) -> np.ndarray:
    """Vectorized ``sg <= kappa + beta*e + lambda*d`` in integer units (``-1`` = inf)."""
    beta = p.beta
    rhs_const = (p.kappa + p.lam * to_fraction(dval)) * scale * beta.denominator
    if rhs_const.denominator != 1:
        raise ValueError("parameters are not representable at this scale")
    lhs = sg.astype(np.int64) * beta.denominator
    rhs = int(rhs_const) + beta.numerator * e.astype(np.int64)
    return (sg >= 0) & (lhs <= rhs)


def _units(value, scale: int) -> int:
    v = to_fraction(value) * scale
    if v.denominator != 1:
        raise ValueError(f"{value} is not representable at scale {scale}")
    return int(v)


def check_acasr_sampled(abs_system, plant: SampledPair, p: AcParams, d: Metric | None = None,
                        states: Iterable | None = None, relation: GaugedRelation | None = None,
                        plant_system=None) -> CheckVerdict:
    """Sampled acASR check from a finite abstraction to a continuous plant.

    Every sample is a plant state related to the abstract state; the step
    condition (ii) is evaluated exactly at the sample's own state gauge.
    Passing the exact ``relation`` and ``plant_system`` makes a failing
    verdict replayable with exact arithmetic.
    """
    d = d or zero_metric
    kappa_units = _units(p.kappa, plant.scale)
    for x0 in sorted_states(abs_system.initial):
        batch = plant.initial_batch()
        sg = plant.state_gauge(x0, batch)
        if not np.any((sg >= 0) & (sg <= kappa_units)):
            return _failure("init", "sampled", x1=x0, eps=p.kappa)
    n_samples = 0
    for xa in (sorted_states(states) if states is not None else abs_system.states):
        enabled = abs_system.enabled_inputs(xa)
        if not enabled:
            continue
        batch = plant.samples(xa)
        e = plant.state_gauge(xa, batch)
        live = e >= 0
        n_samples += int(live.sum())
        for ua in enabled:
            succ_abs = sorted_states(abs_system.post(xa, ua))
            ok = np.zeros(len(batch), dtype=bool)
            for u in plant.inputs:
                g = plant.gauge(xa, batch, ua, u)
                good = (g >= 0) & (g <= e)
                if not good.any():
                    continue
                dval = d(ua, u)
                for branch in plant.post(batch, u):
                    covered = np.zeros(len(batch), dtype=bool)
                    for xs in succ_abs:
                        covered |= _le_bound(plant.state_gauge(xs, branch), e, p, dval, plant.scale)
                    good &= covered
                ok |= good
            bad = live & ~ok
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                x2 = plant.describe(batch, row)
                replay = None
                if relation is not None and plant_system is not None:
                    replay = lambda xa=xa, x2=x2, ua=ua: step_condition_holds(
                        abs_system, plant_system, relation, p, d, xa, x2, ua, True)
                return _failure("step", "sampled", replay=replay, x1=xa, x2=x2, u1=ua,
                                eps=to_fraction(int(e[row])) / plant.scale)
    return CheckVerdict(True, method="sampled", stats={"samples": n_samples})


def check_acsr_sampled(plant: SampledPair, abs_system, p: AcParams, d: Metric | None = None,
                       states: Iterable | None = None, relation: GaugedRelation | None = None,
                       plant_system=None) -> CheckVerdict:
    """Sampled acSR check from a continuous plant to a finite abstraction."""
    d = d or zero_metric
    kappa_units = _units(p.kappa, plant.scale)
    init = plant.initial_batch()
    ok0 = np.zeros(len(init), dtype=bool)
    for x0 in abs_system.initial:
        sg = plant.state_gauge(x0, init)
        ok0 |= (sg >= 0) & (sg <= kappa_units)
    if not ok0.all():
        row = int(np.flatnonzero(~ok0)[0])
        return _failure("init", "sampled", x1=plant.describe(init, row), eps=p.kappa)
    n_samples = 0
    for xa in (sorted_states(states) if states is not None else abs_system.states):
        batch = plant.samples(xa)
        e = plant.state_gauge(xa, batch)
        live = e >= 0
        n_samples += int(live.sum())
        for u in plant.inputs:
            branches = plant.post(batch, u)
            ok = np.zeros(len(batch), dtype=bool)
            for ua in abs_system.enabled_inputs(xa):
                g = plant.gauge(xa, batch, ua, u)
                good = (g >= 0) & (g <= e)
                if not good.any():
                    continue
                succ_abs = sorted_states(abs_system.post(xa, ua))
                dval = d(u, ua)
                for branch in branches:
                    covered = np.zeros(len(batch), dtype=bool)
                    for xs in succ_abs:
                        covered |= _le_bound(plant.state_gauge(xs, branch), e, p, dval, plant.scale)
                    good &= covered
                ok |= good
            bad = live & ~ok
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                x1 = plant.describe(batch, row)
                replay = None
                if relation is not None and plant_system is not None:
                    replay = lambda x1=x1, xa=xa, u=u: step_condition_holds(
                        plant_system, abs_system, relation, p, d, x1, xa, u, False)
                return _failure("step", "sampled", replay=replay, x1=x1, x2=xa, u1=u,
                                eps=to_fraction(int(e[row])) / plant.scale)
    return CheckVerdict(True, method="sampled", stats={"samples": n_samples})


# -- side conditions (7)-(10) --------------------------------------------------------

def check_input_witness(R: GaugedRelation, left_inputs: Iterable, right_inputs: Iterable,
                        pairs: Iterable, enabled_left: Callable[[Any], Iterable],
                        method: str = "exact") -> CheckVerdict:
    """``forall u1, exists u2, forall related (x1, x2): u1 in U1(x1) => (x1, x2, u1, u2) in R``.

    The inner ``forall eps`` is discharged at each pair's state gauge.  The
    returned verdict carries the witness map ``u1 -> u2`` (smallest working
    ``u2``); on failure the counterexample names an input with no uniform
    witness and, for the smallest candidate ``u2``, the pair that rules it out.
    """
    pairs = [(x1, x2, R.state_gauge(x1, x2)) for x1, x2 in pairs]
    pairs = [(x1, x2, s) for x1, x2, s in pairs if s != INF]
    enabled = {}
    for x1, _, _ in pairs:
        if x1 not in enabled:
            enabled[x1] = frozenset(enabled_left(x1))
    right_inputs = sorted_states(right_inputs)
    witness = {}

    def works(u1, u2):
        for x1, x2, s in pairs:
            if u1 in enabled[x1] and R.gauge(x1, x2, u1, u2) > s:
                return (x1, x2, s)
        return None

    for u1 in sorted_states(left_inputs):
        blockers = {}
        for u2 in right_inputs:
            blocker = works(u1, u2)
            if blocker is None:
                witness[u1] = u2
                break
            blockers[u2] = blocker
        else:
            first = right_inputs[0] if right_inputs else None
            info = {"u1": u1}
            if first is not None:
                x1, x2, s = blockers[first]
                info.update(u2=first, x1=x1, x2=x2, eps=s)
            return _failure("witness", method,
                            replay=lambda u1=u1: any(works(u1, u2) is None for u2 in right_inputs),
                            **info)
    return CheckVerdict(True, method=method, witness=witness, stats={"pairs": len(pairs)})


def finite_pairs(S1, S2, R: GaugedRelation):
    _require_finite(S1, S2)
    return [(x1, x2) for x1 in S1.states for x2 in S2.states if R.state_gauge(x1, x2) != INF]


def check_condition_7(RhatC: GaugedRelation, spec, cabs, pairs=None) -> CheckVerdict:
    """Uniform witness from spec inputs to c-abstraction inputs."""
    pairs = finite_pairs(spec, cabs, RhatC) if pairs is None else pairs
    return check_input_witness(RhatC, spec.inputs, cabs.inputs, pairs, spec.enabled_inputs)


def check_condition_8(dbar: Metric, d: Metric, dcheck: Metric, U_hat, U, U_check) -> CheckVerdict:
    """``dbar(uh, uc) >= d(uh, u) + dcheck(u, uc)`` for all input triples."""
    for uh in sorted_states(U_hat):
        for u in sorted_states(U):
            for uc in sorted_states(U_check):
                lhs = to_fraction(dbar(uh, uc))
                rhs = to_fraction(d(uh, u)) + to_fraction(dcheck(u, uc))
                if lhs < rhs:
                    return _failure("metric", u_hat=uh, u=u, u_check=uc, lhs=lhs, rhs=rhs,
                                    replay=lambda uh=uh, u=u, uc=uc: to_fraction(dbar(uh, uc)) >=
                                    to_fraction(d(uh, u)) + to_fraction(dcheck(u, uc)))
    return CheckVerdict(True)


def check_condition_9(R: GaugedRelation, cabs, plant, pairs=None, method: str = "exact") -> CheckVerdict:
    """Uniform witness from c-abstraction inputs to plant inputs."""
    pairs = finite_pairs(cabs, plant, R) if pairs is None else pairs
    return check_input_witness(R, cabs.inputs, plant.inputs, pairs, cabs.enabled_inputs, method)


def check_condition_10(Rcheck: GaugedRelation, plant, oabs, pairs=None,
                       method: str = "exact") -> CheckVerdict:
    """Uniform witness from plant inputs to o-abstraction inputs."""
    pairs = finite_pairs(plant, oabs, Rcheck) if pairs is None else pairs
    return check_input_witness(Rcheck, plant.inputs, oabs.inputs, pairs, plant.enabled_inputs, method)


def check_output_consistency(output_map: Callable, Rcheck: GaugedRelation, eps,
                             left_states: Iterable, right_states: Iterable,
                             method: str = "exact") -> CheckVerdict:
    """No two left states related to one right state at level ``eps`` differ in output.

    ``left_states`` is the finite plant state set, or a sample of it.
    """
    eps = to_fraction(eps)
    left = sorted_states(left_states)
    for x2 in sorted_states(right_states):
        seen = None
        for x1 in left:
            if Rcheck.state_gauge(x1, x2) > eps:
                continue
            y = output_map(x1)
            if seen is None:
                seen = (x1, y)
            elif y != seen[1]:
                a, b = seen[0], x1
                return _failure("output", method, x_check=x2, x1=a, x2=b, y1=seen[1], y2=y, eps=eps,
                                replay=lambda a=a, b=b: output_map(a) == output_map(b))
    return CheckVerdict(True, method=method)


# -- greatest fixed points on finite systems -----------------------------------

def prune_to_valid(S1, S2, R: GaugedRelation, p: AcParams, d: Metric | None = None,
                   alternating: bool = True, name: str = "") -> GaugedRelation | None:
    """Largest sub-relation of ``R`` (removing whole state pairs) satisfying step (ii).

    Pairs that violate the step condition are dropped until a fixed point is
    reached.  Returns ``None`` when the initial condition fails afterwards.
    Used to generate valid random relations for the property tests.
    """
    _require_finite(S1, S2)
    d = d or zero_metric
    alive = {(x1, x2) for x1 in S1.states for x2 in S2.states if R.state_gauge(x1, x2) != INF}
    while True:
        current = _restrict_pairs(R, alive, name)
        dead = set()
        for x1, x2 in sorted(alive, key=sort_key):
            for u1 in S1.enabled_inputs(x1):
                if not step_condition_holds(S1, S2, current, p, d, x1, x2, u1, alternating):
                    dead.add((x1, x2))
                    break
        if not dead:
            break
        alive -= dead
    current = _restrict_pairs(R, alive, name)
    for x10 in S1.initial:
        if not init_condition_holds(S1, S2, current, x10):
            return None
    return current


def _restrict_pairs(R: GaugedRelation, alive: set, name: str = "") -> GaugedRelation:
    frozen = frozenset(alive)

    def gauge(x1, x2, u1, u2):
        return R.gauge(x1, x2, u1, u2) if (x1, x2) in frozen else INF

    return GaugedRelation(gauge, R.kappa, R.left_inputs, R.right_inputs, name or R.name)

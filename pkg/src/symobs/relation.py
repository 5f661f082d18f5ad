"""Epsilon-parameterized relations encoded by gauge functions.

A nested family ``R(eps)``, ``eps >= kappa``, is stored as the smallest
``eps`` at which a tuple ``(x1, x2, u1, u2)`` becomes related.  Membership is
then ``eps >= gauge(...)`` and nesting holds by construction.  Exact relations
use gauges in ``{0, inf}`` with ``kappa = 0``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

from .numeric import INF, json_num, sorted_states, to_fraction, to_gauge

Metric = Callable[[Any, Any], Fraction]


class EpsilonDomainError(ValueError):
    """An epsilon below the lower end ``kappa`` of the family's domain."""


@dataclass(frozen=True)
class AcParams:
    """``(kappa, beta, lambda)`` of an approximate contractive relation."""

    kappa: Fraction = Fraction(0)
    beta: Fraction = Fraction(0)
    lam: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("kappa", "beta", "lam"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.kappa < 0 or self.lam < 0:
            raise ValueError("kappa and lambda must be nonnegative")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")

    def bound(self, eps, d=0):
        """Contracted level ``kappa + beta*eps + lambda*d``."""
        if eps == INF:
            return INF
        return self.kappa + self.beta * eps + self.lam * to_fraction(d)

    def combine(self, other: "AcParams") -> "AcParams":
        """``(kappa + kappa', max(beta, beta'), max(lambda, lambda'))``."""
        return AcParams(self.kappa + other.kappa, max(self.beta, other.beta),
                        max(self.lam, other.lam))

    def fixed_point(self):
        """Limit of the level recursion started at ``kappa`` with zero input distance."""
        return self.kappa / (1 - self.beta)

    def as_tuple(self) -> tuple:
        return (self.kappa, self.beta, self.lam)


EXACT = AcParams()


def zero_metric(u1, u2) -> Fraction:
    return Fraction(0)


def table_metric(table: Mapping[tuple, Any], default=None) -> Metric:
    """Metric backed by a ``{(u1, u2): value}`` table."""
    values = {k: to_fraction(v) for k, v in table.items()}
    for v in values.values():
        if v < 0:
            raise ValueError("input metrics are nonnegative")

    def metric(u1, u2):
        try:
            return values[(u1, u2)]
        except KeyError:
            if default is None:
                raise
            return to_fraction(default)

    return metric


class GaugedRelation:
    """Relation family given by ``gauge(x1, x2, u1, u2) in [kappa, inf]``.

    ``left_inputs`` and ``right_inputs`` are the input sets minimized over by
    :meth:`state_gauge`; a closed form can be supplied instead through
    ``state_gauge_fn``.
    """

    def __init__(self, gauge: Callable, kappa=0, left_inputs: Iterable = (),
                 right_inputs: Iterable = (), name: str = "",
                 state_gauge_fn: Callable | None = None):
        self._gauge = gauge
        self.kappa = to_fraction(kappa)
        self.left_inputs = tuple(sorted_states(set(left_inputs)))
        self.right_inputs = tuple(sorted_states(set(right_inputs)))
        self.name = name
        self._state_gauge_fn = state_gauge_fn
        self._cache: dict = {}
        self._state_cache: dict = {}

    def __repr__(self) -> str:
        return f"<GaugedRelation {self.name or '?'} kappa={self.kappa}>"

    def gauge(self, x1, x2, u1, u2):
        key = (x1, x2, u1, u2)
        try:
            return self._cache[key]
        except KeyError:
            pass
        raw = self._gauge(x1, x2, u1, u2)
        value = INF if raw == INF else max(self.kappa, to_fraction(raw))
        self._cache[key] = value
        return value

    __call__ = gauge

    def member(self, eps, x1, x2, u1, u2) -> bool:
        eps = to_fraction(eps)
        if eps < self.kappa:
            raise EpsilonDomainError(f"eps={eps} below kappa={self.kappa}")
        return eps >= self.gauge(x1, x2, u1, u2)

    def state_gauge(self, x1, x2):
        """``min`` over input pairs; realizes ``e(x1, x2)`` and ``R_X(eps)`` membership."""
        key = (x1, x2)
        try:
            return self._state_cache[key]
        except KeyError:
            pass
        if self._state_gauge_fn is not None:
            raw = self._state_gauge_fn(x1, x2)
            value = INF if raw == INF else max(self.kappa, to_fraction(raw))
        else:
            value = INF
            for u1 in self.left_inputs:
                for u2 in self.right_inputs:
                    g = self.gauge(x1, x2, u1, u2)
                    if g < value:
                        value = g
        self._state_cache[key] = value
        return value

    def state_member(self, eps, x1, x2) -> bool:
        eps = to_fraction(eps)
        if eps < self.kappa:
            raise EpsilonDomainError(f"eps={eps} below kappa={self.kappa}")
        return eps >= self.state_gauge(x1, x2)


class TableRelation(GaugedRelation):
    """Finite relation stored as explicit entries; absent entries are ``inf``."""

    def __init__(self, entries: Mapping[tuple, Any], kappa=0, left_inputs=None,
                 right_inputs=None, name: str = ""):
        kappa = to_fraction(kappa)
        table = {}
        for key, g in entries.items():
            g = to_gauge(g)
            if g != INF:
                table[tuple(key)] = max(kappa, g)
        self.entries = table
        best: dict = {}
        for (x1, x2, _, _), g in table.items():
            if g < best.get((x1, x2), INF):
                best[(x1, x2)] = g
        self._best = best
        if left_inputs is None:
            left_inputs = {k[2] for k in table}
        if right_inputs is None:
            right_inputs = {k[3] for k in table}
        super().__init__(lambda x1, x2, u1, u2: table.get((x1, x2, u1, u2), INF), kappa,
                         left_inputs, right_inputs, name,
                         state_gauge_fn=lambda x1, x2: best.get((x1, x2), INF))

    def pairs(self):
        return sorted_states(self._best)


def identity_relation(states: Iterable, inputs: Iterable, name: str = "identity") -> TableRelation:
    """Exact relation ``{(x, x, u, u)}`` (gauge 0 on the diagonal)."""
    states = list(states)
    inputs = list(inputs)
    return TableRelation({(x, x, u, u): 0 for x in states for u in inputs}, 0,
                         inputs, inputs, name)


def restrict(relation: GaugedRelation, predicate: Callable, name: str = "") -> GaugedRelation:
    """Gauge set to ``inf`` wherever ``predicate(x1, x2, u1, u2)`` is false."""

    def gauge(x1, x2, u1, u2):
        return relation.gauge(x1, x2, u1, u2) if predicate(x1, x2, u1, u2) else INF

    return GaugedRelation(gauge, relation.kappa, relation.left_inputs,
                          relation.right_inputs, name or relation.name)


# -- composition of gauges ----------------------------------------------------

COMPOSE_MODES = ("exists", "forall_exists")


def compose_gauges(first: GaugedRelation, second: GaugedRelation,
                   middle_states: Iterable, middle_inputs: Iterable,
                   mode: str = "exists", name: str = "") -> GaugedRelation:
    """Chain ``first`` (left -> middle) and ``second`` (middle -> right).

    ``"exists"``: the composite gauge of ``(a, c, ua, uc)`` is the minimum of
    ``first(a, b, ua, ub) + second(b, c, ub, uc)`` over middle witnesses.

    ``"forall_exists"``: ``a`` and ``c`` are sets.  One middle input and one
    split ``eps1 + eps2`` must serve every ``c`` in the right set, each ``c``
    needing some ``b`` and some ``a`` in the left set with
    ``first <= eps1`` and ``second <= eps2``.  The gauge is the smallest such
    ``eps1 + eps2``; candidate ``eps1`` values are the finitely many gauges of
    ``first``, so the minimum is attained exactly.
    """
    if mode not in COMPOSE_MODES:
        raise ValueError(f"unsupported composition mode {mode!r}; use one of {COMPOSE_MODES}")
    middle_states = tuple(sorted_states(set(middle_states)))
    middle_inputs = tuple(sorted_states(set(middle_inputs)))
    kappa = first.kappa + second.kappa

    if mode == "exists":
        def gauge(a, c, ua, uc):
            best = INF
            for ub in middle_inputs:
                for b in middle_states:
                    g1 = first.gauge(a, b, ua, ub)
                    if g1 >= best:
                        continue
                    total = g1 + second.gauge(b, c, ub, uc)
                    if total < best:
                        best = total
            return best

        return GaugedRelation(gauge, kappa, first.left_inputs, second.right_inputs,
                              name or f"({first.name};{second.name})")

    def gauge_sets(left_set, right_set, ua, uc):
        best = INF
        for ub in middle_inputs:
            # For each right member: the (g1, g2) options over all (a, b).
            options = []
            for c in sorted_states(right_set):
                opts = []
                for b in middle_states:
                    g2 = second.gauge(b, c, ub, uc)
                    if g2 == INF:
                        continue
                    g1 = min((first.gauge(a, b, ua, ub) for a in left_set), default=INF)
                    if g1 != INF:
                        opts.append((g1, g2))
                if not opts:
                    options = None
                    break
                options.append(opts)
            if options is None:
                continue
            candidates = sorted({g1 for opts in options for g1, _ in opts} | {first.kappa})
            for eps1 in candidates:
                if eps1 >= best:
                    break
                eps2 = second.kappa
                for opts in options:
                    need = min((g2 for g1, g2 in opts if g1 <= eps1), default=INF)
                    if need > eps2:
                        eps2 = need
                    if eps2 == INF:
                        break
                total = eps1 + eps2
                if total < best:
                    best = total
        return best

    return GaugedRelation(gauge_sets, kappa, first.left_inputs, second.right_inputs,
                          name or f"({first.name};;{second.name})")


# -- JSON gauge tables ---------------------------------------------------------

def relation_to_json(relation: GaugedRelation, left_states: Iterable, right_states: Iterable,
                     fmt: Callable[[Any], str] = str) -> dict:
    """Enumerate the finite entries of ``relation`` over the given state sets."""
    entries = []
    for x1 in sorted_states(left_states):
        for x2 in sorted_states(right_states):
            if relation.state_gauge(x1, x2) == INF:
                continue
            for u1, u2 in itertools.product(relation.left_inputs, relation.right_inputs):
                g = relation.gauge(x1, x2, u1, u2)
                if g != INF:
                    entries.append({"x1": fmt(x1), "x2": fmt(x2), "u1": fmt(u1),
                                    "u2": fmt(u2), "gauge": json_num(g)})
    return {"kappa": json_num(relation.kappa), "entries": entries}


def relation_from_json(doc: Mapping, name: str = "") -> TableRelation:
    if not isinstance(doc, Mapping) or "entries" not in doc:
        raise ValueError("$: expected an object with 'kappa' and 'entries'")
    kappa = to_fraction(str(doc.get("kappa", 0)))
    table = {}
    for i, e in enumerate(doc["entries"]):
        try:
            key = (e["x1"], e["x2"], e["u1"], e["u2"])
            g = to_gauge(str(e["gauge"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"$.entries[{i}]: {exc}") from exc
        if g != INF and g < kappa:
            raise ValueError(f"$.entries[{i}]: gauge {g} below kappa {kappa}")
        table[key] = g
    return TableRelation(table, kappa, name=name)


def load_relation(path, name: str = "") -> TableRelation:
    with open(path, encoding="utf-8") as fh:
        return relation_from_json(json.load(fh), name=name)


def metric_from_json(doc) -> Metric:
    """``"zero"`` or ``{"entries": [{"u1":..,"u2":..,"d":..}], "default": ..}``."""
    if doc in (None, "zero"):
        return zero_metric
    table = {(e["u1"], e["u2"]): e["d"] for e in doc["entries"]}
    return table_metric(table, doc.get("default"))

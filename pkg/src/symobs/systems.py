"""Transition systems ``(X, X0, U, r)`` and plants with outputs.

Two representations share one duck-typed surface (``initial``, ``inputs``,
``post``, ``enabled_inputs``, ``contains``):

* :class:`TransitionSystem` -- finite and explicit; states can be enumerated.
* :class:`GeneratorSystem` -- successor function plus membership predicate,
  used for the continuous plant and for lazily lifted powerset systems.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping

from .numeric import sort_key, sorted_states


class DomainError(ValueError):
    """A state or input outside the system's domain was queried."""


class SystemFormatError(ValueError):
    """A JSON system description violates an invariant."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class TransitionSystem:
    """Finite transition system with an explicit transition table.

    ``trans`` maps ``(state, input)`` to an iterable of successors; missing
    keys mean the input is not enabled in that state.
    """

    finite = True

    def __init__(self, states: Iterable, initial: Iterable, inputs: Iterable,
                 trans: Mapping[tuple, Iterable], name: str = ""):
        self.states = tuple(sorted_states(set(states)))
        self._state_set = frozenset(self.states)
        self.initial = frozenset(initial)
        self.inputs = tuple(sorted_states(set(inputs)))
        self._input_set = frozenset(self.inputs)
        self.name = name
        table: dict[tuple, frozenset] = {}
        for (x, u), succ in trans.items():
            succ = frozenset(succ)
            if succ:
                table[(x, u)] = succ
        self.trans = table
        self._enabled: dict[Hashable, tuple] = {}
        for (x, u) in table:
            self._enabled.setdefault(x, [])
            self._enabled[x].append(u)
        self._enabled = {x: tuple(sorted_states(us)) for x, us in self._enabled.items()}
        self._validate()

    def _validate(self) -> None:
        bad = self.initial - self._state_set
        if bad:
            raise DomainError(f"initial states not in X: {sorted_states(bad)[:3]}")
        for (x, u), succ in self.trans.items():
            if x not in self._state_set:
                raise DomainError(f"transition source {x!r} not in X")
            if u not in self._input_set:
                raise DomainError(f"transition input {u!r} not in U")
            extra = succ - self._state_set
            if extra:
                raise DomainError(f"successors of ({x!r}, {u!r}) not in X: {sorted_states(extra)[:3]}")

    def __len__(self) -> int:
        return len(self.states)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return (f"<TransitionSystem{label}: {len(self.states)} states, "
                f"{len(self.inputs)} inputs, {len(self.trans)} transitions>")

    def contains(self, x) -> bool:
        return x in self._state_set

    def post(self, x, u) -> frozenset:
        if x not in self._state_set:
            raise DomainError(f"unknown state {x!r}")
        if u not in self._input_set:
            raise DomainError(f"unknown input {u!r}")
        return self.trans.get((x, u), frozenset())

    def enabled_inputs(self, x) -> tuple:
        if x not in self._state_set:
            raise DomainError(f"unknown state {x!r}")
        return self._enabled.get(x, ())

    def reachable(self) -> "TransitionSystem":
        """Restriction to the states reachable from the initial set."""
        seen = set(self.initial)
        queue = deque(sorted_states(self.initial))
        while queue:
            x = queue.popleft()
            for u in self.enabled_inputs(x):
                for y in sorted_states(self.trans[(x, u)]):
                    if y not in seen:
                        seen.add(y)
                        queue.append(y)
        trans = {k: v for k, v in self.trans.items() if k[0] in seen}
        return TransitionSystem(seen, self.initial, self.inputs, trans, name=self.name)

    def transitions(self):
        """Yield ``(x, u, x')`` triples in canonical order."""
        for x in self.states:
            for u in self.enabled_inputs(x):
                for y in sorted_states(self.trans[(x, u)]):
                    yield x, u, y


class GeneratorSystem:
    """Transition system given by a successor function.

    ``successors(x, u)`` must return the (finite) successor set and
    ``contains(x)`` decides membership in ``X``.  There is no state
    enumeration: algorithms that need one take a :class:`TransitionSystem`.
    """

    finite = False

    def __init__(self, initial: Iterable, inputs: Iterable,
                 successors: Callable[[Any, Any], Iterable],
                 contains: Callable[[Any], bool], name: str = ""):
        self.initial = frozenset(initial)
        self.inputs = tuple(sorted_states(set(inputs)))
        self._input_set = frozenset(self.inputs)
        self._successors = successors
        self._contains = contains
        self.name = name
        for x in self.initial:
            if not contains(x):
                raise DomainError(f"initial state {x!r} not in X")

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<GeneratorSystem{label}: {len(self.inputs)} inputs>"

    def contains(self, x) -> bool:
        return bool(self._contains(x))

    def post(self, x, u) -> frozenset:
        if not self._contains(x):
            raise DomainError(f"unknown state {x!r}")
        if u not in self._input_set:
            raise DomainError(f"unknown input {u!r}")
        return frozenset(self._successors(x, u))

    def enabled_inputs(self, x) -> tuple:
        return tuple(u for u in self.inputs if self.post(x, u))

    def explore(self, limit: int = 100_000) -> TransitionSystem:
        """Materialize the reachable part; raises if it exceeds ``limit`` states."""
        seen = set(self.initial)
        queue = deque(sorted_states(self.initial))
        trans = {}
        while queue:
            x = queue.popleft()
            for u in self.inputs:
                succ = self.post(x, u)
                if not succ:
                    continue
                trans[(x, u)] = succ
                for y in sorted_states(succ):
                    if y not in seen:
                        if len(seen) >= limit:
                            raise RuntimeError(f"reachable part exceeds {limit} states")
                        seen.add(y)
                        queue.append(y)
        return TransitionSystem(seen, self.initial, self.inputs, trans, name=self.name)


def enabled_inputs(system, x) -> tuple:
    """``U(x) = {u | r(x, u) != {}}``."""
    return system.enabled_inputs(x)


def post(system, x, u) -> frozenset:
    return system.post(x, u)


@dataclass(frozen=True)
class PlantWithOutputs:
    """A system together with its output set ``Y`` and output map ``H``.

    ``outputs`` may be ``None`` when ``Y`` is infinite (the integers in the
    case study).
    """

    system: Any
    output_map: Callable[[Any], Hashable]
    outputs: frozenset | None = None
    name: str = field(default="")

    def output(self, x):
        if not self.system.contains(x):
            raise DomainError(f"unknown state {x!r}")
        y = self.output_map(x)
        if self.outputs is not None and y not in self.outputs:
            raise DomainError(f"output {y!r} of {x!r} not in Y")
        return y


def output(plant: PlantWithOutputs, x):
    return plant.output(x)


# -- JSON ------------------------------------------------------------------

def system_to_json(system: TransitionSystem, fmt: Callable[[Any], str] = str) -> dict:
    """Serialize with string identifiers produced by ``fmt``."""
    names = {x: fmt(x) for x in system.states}
    if len(set(names.values())) != len(names):
        raise ValueError("state formatter is not injective")
    unames = {u: fmt(u) for u in system.inputs}
    trans = {}
    for x in system.states:
        for u in system.enabled_inputs(x):
            trans[f"{names[x]}|{unames[u]}"] = [names[y] for y in sorted_states(system.post(x, u))]
    return {
        "states": [names[x] for x in system.states],
        "initial": [names[x] for x in sorted_states(system.initial)],
        "inputs": [unames[u] for u in system.inputs],
        "trans": trans,
    }


def system_from_json(doc: Mapping) -> TransitionSystem:
    """Parse and validate; the first violation is reported with its JSON path."""
    if not isinstance(doc, Mapping):
        raise SystemFormatError("$", "expected an object")
    for key in ("states", "initial", "inputs", "trans"):
        if key not in doc:
            raise SystemFormatError("$", f"missing key {key!r}")
    for key in ("states", "initial", "inputs"):
        if not isinstance(doc[key], list):
            raise SystemFormatError(f"$.{key}", "expected a list")
        for i, item in enumerate(doc[key]):
            if not isinstance(item, str):
                raise SystemFormatError(f"$.{key}[{i}]", "identifiers must be strings")
    states = list(doc["states"])
    state_set = set(states)
    if len(state_set) != len(states):
        raise SystemFormatError("$.states", "duplicate state identifier")
    inputs = set(doc["inputs"])
    for i, x in enumerate(doc["initial"]):
        if x not in state_set:
            raise SystemFormatError(f"$.initial[{i}]", f"{x!r} is not a state")
    if not isinstance(doc["trans"], Mapping):
        raise SystemFormatError("$.trans", "expected an object")
    trans = {}
    for key, succ in doc["trans"].items():
        path = f"$.trans[{json.dumps(key)}]"
        if key.count("|") != 1:
            raise SystemFormatError(path, "key must look like '<state>|<input>'")
        x, u = key.split("|")
        if x not in state_set:
            raise SystemFormatError(path, f"{x!r} is not a state")
        if u not in inputs:
            raise SystemFormatError(path, f"{u!r} is not an input")
        if not isinstance(succ, list):
            raise SystemFormatError(path, "expected a list of successors")
        for i, y in enumerate(succ):
            if y not in state_set:
                raise SystemFormatError(f"{path}[{i}]", f"{y!r} is not a state")
        trans[(x, u)] = succ
    return TransitionSystem(states, doc["initial"], inputs, trans)


def load_system(path) -> TransitionSystem:
    with open(path, encoding="utf-8") as fh:
        return system_from_json(json.load(fh))


def dump_system(system: TransitionSystem, path, fmt: Callable[[Any], str] = str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_json(system, fmt), fh, indent=1, sort_keys=True)
        fh.write("\n")


__all__ = [
    "DomainError", "SystemFormatError", "TransitionSystem", "GeneratorSystem",
    "PlantWithOutputs", "enabled_inputs", "post", "output", "system_to_json",
    "system_from_json", "load_system", "dump_system", "sort_key",
]

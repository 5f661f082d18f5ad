"""Closed-loop runs of the plant, the lossy channels and a synthesized controller."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import casestudy as cs
from .numeric import fmt_num, round_half_away

HEADER = ["k", "xi1", "xi2", "xi3", "xi4", "yc", "y", "u", "uc", "drop_cp", "drop_pc",
          "n_obs", "n_ctrl", "bound"]
DECIMALS = 10


class SoundnessError(AssertionError):
    """The true plant state escaped every observer candidate."""


class SimulationError(RuntimeError):
    """The loop aborted; ``step`` and ``dump`` describe where."""

    def __init__(self, message, step, dump):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.dump = dump


@dataclass
class StepRecord:
    k: int
    x: tuple
    yc: Fraction
    y: int
    u: Fraction | None
    uc: Fraction | None
    drop_cp: int | None
    drop_pc: int | None
    n_obs: int
    n_ctrl: int
    bound: Fraction


@dataclass
class ClosedLoopTrace:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


class SeededDropouts:
    """Independent losses with probability ``rate``, suppressed right after a loss."""

    def __init__(self, seed: int, rate: float = 0.2):
        self.rng = random.Random(seed)
        self.rate = rate

    def __call__(self, k: int, bits: tuple) -> tuple:
        cp = int(self.rng.random() < self.rate)
        pc = int(self.rng.random() < self.rate)
        return (0 if bits[0] else cp, 0 if bits[1] else pc)


class ScheduledDropouts:
    """Explicit schedule: one ``(controller->plant, plant->controller)`` pair per step."""

    def __init__(self, schedule: Sequence[tuple]):
        self.schedule = [tuple(int(b) for b in row) for row in schedule]
        for i in range(1, len(self.schedule)):
            for ch in (0, 1):
                if self.schedule[i][ch] and self.schedule[i - 1][ch]:
                    raise ValueError(f"schedule line {i + 1}: consecutive losses on channel {ch}")

    def __call__(self, k: int, bits: tuple) -> tuple:
        if k >= len(self.schedule):
            return (0, 0)
        return self.schedule[k]


def read_schedule(path) -> ScheduledDropouts:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2 or any(p not in ("0", "1") for p in parts):
                raise ValueError(f"{path}:{lineno}: expected two bits")
            rows.append((int(parts[0]), int(parts[1])))
    return ScheduledDropouts(rows)


def run(ctrl, steps: int, dropouts=None, strict: bool = True) -> ClosedLoopTrace:
    """Simulate ``steps`` transitions of the case-study loop.

    Row ``k`` describes the plant state at time ``k``, the measurement, the
    candidate counts after processing it, and (except in the last row) the
    input sent and the losses that occur on the way to ``k+1``.
    """
    dropouts = dropouts or (lambda k, bits: (0, 0))
    x = cs.ORIGIN
    trace = ClosedLoopTrace()
    try:
        state = ctrl.initial_state(cs.output(x))
    except Exception as exc:
        raise SimulationError(str(exc), 0, {"x": x}) from exc
    for k in range(steps + 1):
        (XC, XH), XT = state
        if not ctrl.oracle.contains_truth(XT, x):
            err = SoundnessError(f"plant state {x} outside observer state {XT}")
            if strict:
                raise SimulationError(str(err), k, {"x": x, "observer": str(XT)}) from err
        us = uh = u = None
        cp = pc = None
        if k < steps:
            us, uh, u, _ = ctrl.inputs_for(state)
            cp, pc = dropouts(k, x[2:])
        trace.records.append(StepRecord(k, x, cs.y_c(x), cs.output(x), u, us, cp, pc,
                                        len(XT), len(XH), XT.max_bound))
        if k == steps:
            break
        x = cs.plant_step(x, u, cp, pc)
        try:
            state = ctrl.step(state, cs.output(x))
        except Exception as exc:
            raise SimulationError(str(exc), k + 1, {"x": x, "state": repr(state)}) from exc
    return trace


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return fmt_num(round_half_away(Fraction(v), Fraction(1, 10**DECIMALS)))


def trace_rows(trace: ClosedLoopTrace) -> list:
    rows = []
    for r in trace:
        rows.append([str(r.k), _fmt(r.x[0]), _fmt(r.x[1]), str(r.x[2]), str(r.x[3]), _fmt(r.yc),
                     str(r.y), _fmt(r.u), _fmt(r.uc), _fmt(r.drop_cp), _fmt(r.drop_pc),
                     str(r.n_obs), str(r.n_ctrl), _fmt(r.bound)])
    return rows


def export_csv(trace: ClosedLoopTrace, path) -> None:
    """Write the trace; numbers use ``.`` and at most ten fractional digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trace_csv(trace))


def trace_csv(trace: ClosedLoopTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows(trace_rows(trace))
    return buf.getvalue()


def read_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        return list(reader)


def check_trace_rows(rows: Iterable[dict]) -> list:
    """Re-assert trace invariants on parsed CSV rows; returns the violations."""
    rows = list(rows)
    problems = []
    for i, r in enumerate(rows):
        if int(r["n_ctrl"]) < int(r["n_obs"]):
            problems.append(f"row {i}: controller candidates below observer candidates")
        if i + 1 < len(rows):
            nxt = rows[i + 1]
            if (r["drop_cp"], r["drop_pc"]) != (nxt["xi3"], nxt["xi4"]):
                problems.append(f"row {i}: loss flags disagree with the next channel state")
            for ch in ("xi3", "xi4"):
                if r[ch] == "1" and nxt[ch] == "1":
                    problems.append(f"row {i}: consecutive losses on {ch}")
        y = int(r["y"])
        yc = Fraction(r["yc"])
        expected = 0 if r["xi4"] == "1" else int(round_half_away(yc))
        if y != expected:
            problems.append(f"row {i}: output {y} inconsistent with yc {r['yc']}")
    return problems


def in_band(yc) -> bool:
    return cs.TARGET_BAND[0] <= yc < cs.TARGET_BAND[1]


def convergence_step(trace: ClosedLoopTrace):
    """First ``k`` from which ``y_c`` stays in the target band, or ``None``."""
    first = None
    for r in trace:
        if in_band(r.yc):
            if first is None:
                first = r.k
        else:
            first = None
    return first

"""Networked control example: a second-order plant behind two lossy channels.

Plant state ``(xi1, xi2, xi3, xi4)``: the continuous part evolves by
``xi' = A xi + B u`` and the bits record whether the control packet (xi3) or
the measurement packet (xi4) of the step that led here was lost.  Losses
never happen twice in a row on the same channel.  A lost control packet means
the step used the drift ``A xi`` only; a lost measurement means the sensor
reports 0.

Abstractions share the channel structure and round the continuous part:
``Sh`` (c-abstraction) to the 0.01 grid and ``Sc`` (o-abstraction) to the
0.1 grid, both on the box ``[0, 0.4]^2``.  An abstract input whose rounded
successor would leave the box is disabled at that state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .numeric import INF, rd_int, round_half_away, sorted_states, to_fraction
from .relation import AcParams, GaugedRelation
from .systems import GeneratorSystem, PlantWithOutputs, TransitionSystem

F = Fraction
A = (F(1, 2), F(1, 4))
B = (F("3.6056"), F("3.9051"))
C = (F("2.7042"), F("2.2535"))
INPUTS = (F("0.032"), F("0.064"))
ORIGIN = (F(0), F(0), 0, 0)
BOX = (F(0), F("0.4"))

PARAMS_C = AcParams(F("0.005"), F("0.5"), F(0))
PARAMS_O = AcParams(F("0.05"), F("0.5"), F(0))

#: ``bits -> [(next_bits, input_applied)]``; next bits flag the losses of this step.
BRANCHES = {
    (0, 0): (((0, 0), True), ((0, 1), True), ((1, 0), False), ((1, 1), False)),
    (0, 1): (((0, 0), True), ((1, 0), False)),
    (1, 0): (((0, 0), True), ((0, 1), True)),
    (1, 1): (((0, 0), True),),
}

#: Sensor band reported as 1: the rounding preimage of the target output.
TARGET_BAND = (F(1, 2), F(3, 2))


@dataclass(frozen=True)
class GridSpec:
    """Grid of spacing ``2*eta`` on the box."""

    eta: Fraction

    @property
    def step(self) -> Fraction:
        return 2 * self.eta

    def points(self) -> list:
        n = int((BOX[1] - BOX[0]) / self.step)
        return [BOX[0] + i * self.step for i in range(n + 1)]

    def round(self, v: Fraction) -> Fraction:
        return round_half_away(v, self.step)


GRID_C = GridSpec(F("0.005"))
GRID_O = GridSpec(F("0.05"))


def continuous_step(xi, u, with_input: bool):
    if with_input:
        return (A[0] * xi[0] + B[0] * u, A[1] * xi[1] + B[1] * u)
    return (A[0] * xi[0], A[1] * xi[1])


def plant_successors(x, u) -> list:
    xi, bits = x[:2], x[2:]
    return [continuous_step(xi, u, w) + nb for nb, w in BRANCHES[bits]]


def plant_step(x, u, drop_cp: int, drop_pc: int):
    """Successor for a given loss pattern; losses must respect the channel rule."""
    nb = (drop_cp, drop_pc)
    for bits, w in BRANCHES[x[2:]]:
        if bits == nb:
            return continuous_step(x[:2], u, w) + nb
    raise ValueError(f"loss pattern {nb} is impossible from channel state {x[2:]}")


def y_c(x) -> Fraction:
    return C[0] * x[0] + C[1] * x[1]


def output(x) -> int:
    """Quantized measurement; zero when the measurement packet was lost."""
    return 0 if x[3] == 1 else rd_int(y_c(x))


def _is_plant_state(x) -> bool:
    return (isinstance(x, tuple) and len(x) == 4 and x[2] in (0, 1) and x[3] in (0, 1)
            and all(isinstance(v, (int, Fraction)) for v in x[:2]))


def build_case_plant() -> PlantWithOutputs:
    system = GeneratorSystem([ORIGIN], INPUTS, plant_successors, _is_plant_state, name="plant")
    return PlantWithOutputs(system, output, None, name="plant")


def _in_box(xi) -> bool:
    return all(BOX[0] <= v <= BOX[1] for v in xi)


def _abstract_system(grid: GridSpec, name: str) -> TransitionSystem:
    pts = grid.points()
    states = [(a, b) + bits for a in pts for b in pts for bits in BRANCHES]
    trans = {}
    for x in states:
        for u in INPUTS:
            succ = []
            for nb, w in BRANCHES[x[2:]]:
                xi = tuple(grid.round(v) for v in continuous_step(x[:2], u, w))
                if not _in_box(xi):
                    succ = None
                    break
                succ.append(xi + nb)
            if succ:
                trans[(x, u)] = succ
    return TransitionSystem(states, [ORIGIN], INPUTS, trans, name=name)


@lru_cache(maxsize=None)
def build_case_cabs() -> TransitionSystem:
    """c-abstraction on the 0.01 grid (6724 states)."""
    return _abstract_system(GRID_C, "cabs")


@lru_cache(maxsize=None)
def build_case_oabs() -> TransitionSystem:
    """o-abstraction on the 0.1 grid (100 states)."""
    return _abstract_system(GRID_O, "oabs")


def _no_loss_yc(cabs, x, u):
    for s in cabs.post(x, u):
        if s[2:] == (0, 0):
            return y_c(s)
    return None


def spec_inputs(cabs, x, initial: bool = False) -> list:
    """Inputs allowed by the reconstructed specification at a c-abstracted state.

    Allowed are the enabled inputs whose loss-free successor reads 1 on the
    sensor.  At the initial state, or when no input achieves that, only the
    input whose loss-free successor is closest to 1 is allowed.
    """
    enabled = cabs.enabled_inputs(x)
    ycs = {u: _no_loss_yc(cabs, x, u) for u in enabled}
    good = [u for u in enabled if TARGET_BAND[0] <= ycs[u] < TARGET_BAND[1]]
    if good and not initial:
        return good
    return [min(enabled, key=lambda u: (abs(ycs[u] - 1), u))]


@lru_cache(maxsize=None)
def build_case_spec() -> TransitionSystem:
    """Reachable sub-system of the c-abstraction under the band policy."""
    cabs = build_case_cabs()
    allowed = {ORIGIN: spec_inputs(cabs, ORIGIN, initial=True)}
    stack = [ORIGIN]
    trans = {}
    while stack:
        x = stack.pop()
        for u in allowed[x]:
            succ = cabs.post(x, u)
            trans[(x, u)] = succ
            for s in succ:
                if s not in allowed:
                    allowed[s] = spec_inputs(cabs, s)
                    stack.append(s)
    return TransitionSystem(allowed, [ORIGIN], INPUTS, trans, name="spec")


# -- relations -------------------------------------------------------------------

def dist(a, b):
    """Infinity-norm distance of the continuous parts, ``inf`` if the bits differ."""
    if a[2:] != b[2:]:
        return INF
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def _grid_relation(kappa, name):
    def state_gauge(a, b):
        dd = dist(a, b)
        return dd if dd == INF else max(kappa, dd)

    def gauge(a, b, u1, u2):
        return state_gauge(a, b) if u1 == u2 else INF

    return GaugedRelation(gauge, kappa, INPUTS, INPUTS, name, state_gauge_fn=state_gauge)


def case_relation_c() -> GaugedRelation:
    """c-abstraction to plant: same bits, same input, distance at most ``eps``."""
    return _grid_relation(PARAMS_C.kappa, "R")


def case_relation_o() -> GaugedRelation:
    """Plant to o-abstraction: same bits, same input, distance at most ``eps``."""
    return _grid_relation(PARAMS_O.kappa, "Rcheck")


def case_relation_spec() -> GaugedRelation:
    """Spec to c-abstraction: identical states and inputs."""

    def state_gauge(a, b):
        return F(0) if a == b else INF

    def gauge(a, b, u1, u2):
        return F(0) if a == b and u1 == u2 else INF

    return GaugedRelation(gauge, 0, INPUTS, INPUTS, "RhatC", state_gauge_fn=state_gauge)


def build_case_relations():
    return case_relation_c(), case_relation_spec(), case_relation_o()


# -- observer oracle and lifted bridge ------------------------------------------------

def _output_range(lo, hi, loss: int) -> set:
    if loss:
        return {0}
    return set(range(rd_int(y_c(lo)), rd_int(y_c(hi)) + 1))


class CaseIntervalOracle:
    """Plant witness queries answered by box arithmetic.

    Plant states within ``b`` of a cell form a box; the affine maps have
    nonnegative diagonal ``A`` and ``C``, so images and output ranges are
    attained at the box corners and the rounding to integers is monotone.
    """

    def __init__(self, oabs: TransitionSystem | None = None):
        self.oabs = oabs or build_case_oabs()
        self.R = case_relation_o()

    def initial_outputs(self) -> set:
        return {output(ORIGIN)}

    def initial_candidates(self, y0, level) -> list:
        if y0 != output(ORIGIN):
            return []
        return [xc for xc in sorted_states(self.oabs.initial) if self.R.state_gauge(ORIGIN, xc) <= level]

    def step(self, xc, b, u, uc, b_next) -> list:
        if u != uc or not self.oabs.post(xc, uc):
            return []
        out = {}
        lo = (xc[0] - b, xc[1] - b)
        hi = (xc[0] + b, xc[1] + b)
        for nb, w in BRANCHES[xc[2:]]:
            plo = continuous_step(lo, u, w)
            phi = continuous_step(hi, u, w)
            nxt = tuple(GRID_O.round(v) for v in continuous_step(xc[:2], uc, w)) + nb
            ilo = tuple(max(plo[i], nxt[i] - b_next) for i in range(2))
            ihi = tuple(min(phi[i], nxt[i] + b_next) for i in range(2))
            if ilo[0] > ihi[0] or ilo[1] > ihi[1]:
                continue
            out[nxt] = _output_range(ilo, ihi, nb[1])
        return [(k, out[k]) for k in sorted_states(out)]

    def contains_truth(self, state, x) -> bool:
        return any(self.R.state_gauge(x, xc) <= b for xc, b in state.candidates)


class CaseBridge:
    """Closed forms for chaining the two grid relations through the plant.

    With equal inputs and bits, a plant state between a fine cell and a coarse
    cell exists for a split ``eps1 + eps2`` exactly when
    ``eps1 + eps2 >= max(kappa + kappa', distance)`` (take the point on the
    segment), so only the sum matters and one split serves every coarse cell.
    """

    def __init__(self):
        self.kappa = PARAMS_C.kappa + PARAMS_O.kappa

    def pair_state_gauge(self, xh, xc):
        dd = dist(xh, xc)
        return dd if dd == INF else max(self.kappa, dd)

    def pair_gauge(self, xh, xc, uh, uc):
        return self.pair_state_gauge(xh, xc) if uh == uc else INF

    def set_gauge(self, XH, XC, uh, uc):
        if uh != uc:
            return INF
        worst = self.kappa
        for xc in XC:
            best = min((dist(xh, xc) for xh in XH), default=INF)
            if best > worst:
                worst = best
        return worst

    def relation(self) -> GaugedRelation:
        return GaugedRelation(lambda XH, XC, uh, uc: self.set_gauge(XH, XC, uh, uc),
                              self.kappa, INPUTS, INPUTS, "bold R")


# -- sampling adapter for the checker ----------------------------------------------

SCALE = 10**10


def _units(v) -> int:
    w = to_fraction(v) * SCALE
    if w.denominator != 1:
        raise ValueError(f"{v} is not representable at scale 1e-10")
    return int(w)


class CaseSampler:
    """Plant samples around abstract states, in integer units of ``1e-10``.

    Samples form the sub-grid of step ``step`` inside the ball of radius
    ``radius`` (the ball's corners belong to the sub-grid because the radius
    is a multiple of the step).
    """

    scale = SCALE
    inputs = INPUTS

    def __init__(self, kappa, radius, step=F("0.0025")):
        self.kappa = _units(kappa)
        self.radius = to_fraction(radius)
        self.step = to_fraction(step)
        n = self.radius / self.step
        if n.denominator != 1:
            raise ValueError("radius must be a multiple of the sub-grid step")
        offs = np.arange(-int(n), int(n) + 1, dtype=np.int64) * _units(self.step)
        self._offsets = np.array(list(itertools.product(offs, offs)), dtype=np.int64)
        self._bu = {u: np.array([_units(B[0] * u), _units(B[1] * u)], dtype=np.int64) for u in INPUTS}

    @staticmethod
    def _coords(x) -> np.ndarray:
        return np.array([_units(x[0]), _units(x[1])], dtype=np.int64)

    def initial_batch(self) -> np.ndarray:
        return np.array([[0, 0, 0, 0]], dtype=np.int64)

    def samples(self, x_abs) -> np.ndarray:
        pts = self._coords(x_abs) + self._offsets
        bits = np.tile(np.array(x_abs[2:], dtype=np.int64), (len(pts), 1))
        return np.hstack([pts, bits])

    def state_gauge(self, x_abs, batch) -> np.ndarray:
        delta = np.abs(batch[:, :2] - self._coords(x_abs)).max(axis=1)
        g = np.maximum(delta, self.kappa)
        same = (batch[:, 2] == x_abs[2]) & (batch[:, 3] == x_abs[3])
        return np.where(same, g, -1)

    def gauge(self, x_abs, batch, u_abs, u) -> np.ndarray:
        if u_abs != u:
            return np.full(len(batch), -1, dtype=np.int64)
        return self.state_gauge(x_abs, batch)

    def post(self, batch, u) -> list:
        bits = {tuple(r) for r in batch[:, 2:].tolist()}
        if len(bits) != 1:
            raise ValueError("a sample batch must share its channel bits")
        (b3, b4), = bits
        xi = batch[:, :2]
        if np.any(xi[:, 0] % 2) or np.any(xi[:, 1] % 4):
            raise ValueError("sample not exactly representable after one step")
        drift = np.stack([xi[:, 0] // 2, xi[:, 1] // 4], axis=1)
        out = []
        for nb, w in BRANCHES[(b3, b4)]:
            nxt = drift + self._bu[u] if w else drift
            nbits = np.tile(np.array(nb, dtype=np.int64), (len(batch), 1))
            out.append(np.hstack([nxt, nbits]))
        return out

    def describe(self, batch, row):
        r = batch[row]
        return (F(int(r[0]), SCALE), F(int(r[1]), SCALE), int(r[2]), int(r[3]))


def sampler_c() -> CaseSampler:
    """Samples for the c-abstraction relation: radius ``2*kappa/(1-beta)``."""
    return CaseSampler(PARAMS_C.kappa, 2 * PARAMS_C.kappa / (1 - PARAMS_C.beta))


def sampler_o() -> CaseSampler:
    return CaseSampler(PARAMS_O.kappa, 2 * PARAMS_O.kappa / (1 - PARAMS_O.beta))


def sample_states(x_abs, radius, step=F("0.0025")) -> list:
    """Exact plant states on the sub-grid around ``x_abs`` (for non-vectorized checks)."""
    n = int(to_fraction(radius) / to_fraction(step))
    return [(x_abs[0] + i * step, x_abs[1] + j * step) + tuple(x_abs[2:])
            for i in range(-n, n + 1) for j in range(-n, n + 1)]

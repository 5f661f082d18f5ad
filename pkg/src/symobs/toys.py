"""Random finite instances for the relation and synthesis statements.

An instance is a plant, a c-abstraction, a spec and an o-abstraction (all
tiny), together with relations that the checker has certified and that
satisfy the uniform input-witness conditions by construction: every
related pair uses the same state-level gauge for the designated witness
input, and the greatest-fixed-point pruning only removes whole pairs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .checker import (check_acasr, check_acsr, check_condition_7, check_condition_8,
                      check_condition_9, check_condition_10, prune_to_valid)
from .compose import compose, d_C, theorem1_relation
from .lift import (FiniteBridge, synthesize, dbar_C, d_lifted_C, lift_relation_R, lift_relation_RC,
                   lift_system, theorem3_relation, theorem4_relation)
from .observer import BoundMenu, FinitePlantOracle, definition_observer, theorem2_relation
from .relation import EXACT, AcParams, TableRelation, restrict, table_metric
from .systems import PlantWithOutputs, TransitionSystem

HALF = Fraction(1, 2)


def random_system(rng: random.Random, n_states: int, inputs, prefix: str,
                  p_enable: float = 0.75, max_succ: int = 2) -> TransitionSystem:
    states = [f"{prefix}{i}" for i in range(n_states)]
    trans = {}
    for x in states:
        for u in inputs:
            if rng.random() < p_enable:
                k = rng.randint(1, min(max_succ, n_states))
                trans[(x, u)] = rng.sample(states, k)
    initial = rng.sample(states, rng.randint(1, max(1, n_states // 2)))
    return TransitionSystem(states, initial, inputs, trans, name=prefix)


def random_params(rng: random.Random, exact: bool = False) -> AcParams:
    if exact:
        return EXACT
    return AcParams(rng.choice([0, HALF, 1]), rng.choice([0, HALF]), rng.choice([0, HALF]))


def random_metric(rng: random.Random, left, right, values=(0, HALF, 1)):
    table = {(a, b): rng.choice(values) for a in left for b in right}
    return table_metric(table), table


def random_relation(rng: random.Random, S1, S2, kappa, witness: dict, exact: bool = False,
                    p_pair: float = 0.85, name: str = "") -> TableRelation:
    """Gauge table where the witness input carries each pair's state-level gauge."""
    levels = [kappa] if exact else [kappa, kappa, kappa + HALF, kappa + 1]
    entries = {}
    for x1 in S1.states:
        for x2 in S2.states:
            if rng.random() >= p_pair:
                continue
            s = rng.choice(levels)
            for u1 in S1.inputs:
                entries[(x1, x2, u1, witness[u1])] = s
                for u2 in S2.inputs:
                    if u2 != witness[u1] and rng.random() < 0.3:
                        entries[(x1, x2, u1, u2)] = s if exact else s + rng.choice([0, HALF, 1])
    return TableRelation(entries, kappa, S1.inputs, S2.inputs, name)


@dataclass
class Instance:
    seed: int
    plant: TransitionSystem
    cabs: TransitionSystem
    spec: TransitionSystem
    oabs: TransitionSystem
    R: object
    RhatC: object
    Rcheck: object
    p: AcParams
    p_check: AcParams
    d: object
    dcheck: object
    dbar: object
    witness: dict = field(default_factory=dict)

    @property
    def p_composite(self) -> AcParams:
        return self.p.combine(self.p_check)


def witness_enabled(R, S1, S2, witness: dict) -> bool:
    """Related pairs enable the witness of every input enabled on the left."""
    for x1 in S1.states:
        for x2 in S2.states:
            if R.state_gauge(x1, x2) == float("inf"):
                continue
            for u1 in S1.enabled_inputs(x1):
                if witness[u1] not in S2.enabled_inputs(x2):
                    return False
    return True


def random_instance(seed: int, max_plant: int = 3, max_abs: int = 2,
                    attempts: int = 400, coherent: bool = False) -> Instance:
    """Draw instances until all relations and side conditions verify.

    With ``coherent`` the witness inputs must also be enabled wherever the
    left input is (a strengthening of the uniform-witness conditions).
    """
    rng = random.Random(seed)
    for _ in range(attempts):
        U = ["a", "b"][: rng.randint(1, 2)]
        Uh = ["p", "q"][: rng.randint(1, 2)]
        Us = ["s", "t"][: rng.randint(1, 2)]
        Uc = ["m", "n"][: rng.randint(1, 2)]
        # Plant and o-abstraction enable every input so that the right-hand
        # sides of the relations can always answer with the witness input.
        plant = random_system(rng, rng.randint(1, max_plant), U, "x", p_enable=1.0)
        cabs = random_system(rng, rng.randint(1, max_abs), Uh, "h")
        spec = random_system(rng, rng.randint(1, max_abs), Us, "c")
        oabs = random_system(rng, rng.randint(1, max_abs), Uc, "o", p_enable=1.0)
        w7 = {u: rng.choice(Uh) for u in Us}
        w9 = {u: rng.choice(U) for u in Uh}
        w10 = {u: rng.choice(Uc) for u in U}
        p, pc = random_params(rng), random_params(rng)
        d, _ = random_metric(rng, Uh, U)
        dcheck, _ = random_metric(rng, U, Uc)
        dbar_table = {(a, c): max(d(a, b) + dcheck(b, c) for b in U) for a in Uh for c in Uc}
        dbar = table_metric(dbar_table)
        RhatC = prune_to_valid(spec, cabs, random_relation(rng, spec, cabs, 0, w7, exact=True),
                               EXACT, None, True, "RhatC")
        R = prune_to_valid(cabs, plant, random_relation(rng, cabs, plant, p.kappa, w9), p, d,
                           True, "R")
        Rcheck = prune_to_valid(plant, oabs, random_relation(rng, plant, oabs, pc.kappa, w10), pc,
                                dcheck, False, "Rcheck")
        if RhatC is None or R is None or Rcheck is None:
            continue
        checks = [
            check_acasr(spec, cabs, RhatC, EXACT),
            check_acasr(cabs, plant, R, p, d),
            check_acsr(plant, oabs, Rcheck, pc, dcheck),
            check_condition_7(RhatC, spec, cabs),
            check_condition_8(dbar, d, dcheck, Uh, U, Uc),
            check_condition_9(R, cabs, plant),
            check_condition_10(Rcheck, plant, oabs),
        ]
        if not all(checks):
            continue
        witness = {"7": checks[3].witness, "9": checks[5].witness, "10": checks[6].witness}
        if coherent and not (witness_enabled(RhatC, spec, cabs, witness["7"])
                             and witness_enabled(R, cabs, plant, witness["9"])
                             and witness_enabled(Rcheck, plant, oabs, witness["10"])):
            continue
        return Instance(seed, plant, cabs, spec, oabs, R, RhatC, Rcheck, p, pc, d, dcheck, dbar,
                        witness)
    raise RuntimeError(f"no valid instance found for seed {seed}")


def random_outputs(seed: int, plant, n_outputs: int = 2) -> dict:
    rng = random.Random(seed * 7919 + 1)
    return {x: rng.randrange(n_outputs) for x in plant.states}


def synthesize_toy(inst: Instance, outputs: dict):
    """Runtime synthesis on a toy instance; raises ``SynthesisError`` when it aborts."""
    plant = PlantWithOutputs(inst.plant, outputs.__getitem__, frozenset(outputs.values()))
    oracle = FinitePlantOracle(plant, inst.oabs, inst.Rcheck)
    dmax = max(inst.dcheck(u, uc) for u in inst.plant.inputs for uc in inst.oabs.inputs)
    bridge = FiniteBridge(inst.R, inst.Rcheck, inst.plant.states, inst.plant.inputs)
    return synthesize(inst.spec, inst.cabs, oracle, inst.RhatC, inst.R, inst.Rcheck, inst.p,
                      inst.p_check, bridge, inst.witness["7"], inst.witness["9"],
                      inst.witness["10"], inst.dcheck, inst.dbar,
                      BoundMenu(inst.p_check, 0, dmax))


def check_synthesized(inst: Instance, ctrl) -> object:
    """Final relation of the synthesized controller, checked against the plant."""
    return check_acasr(ctrl.system, inst.plant,
                       theorem4_relation(inst.R, inst.Rcheck, inst.spec.inputs),
                       inst.p_composite, dbar_C(inst.dbar))


STATEMENTS = ("theorem1", "theorem2", "lemma1", "lemma2", "theorem3", "theorem4")


def coherent_inputs(inst: Instance, relation, name: str = ""):
    """Restrict a composite relation to inputs ``((u_spec, w7(u_spec)), w10(w9(w7(u_spec))))``."""
    w7, w9, w10 = inst.witness["7"], inst.witness["9"], inst.witness["10"]

    def ok(x1, x2, upair, uc):
        us, uh = upair
        return w7.get(us) == uh and w10.get(w9.get(uh)) == uc

    return restrict(relation, ok, name or relation.name)


def check_statements(inst: Instance, which=STATEMENTS, coherent: bool = False) -> dict:
    """Run the checker on every constructed relation; returns name -> verdict.

    With ``coherent`` the output-feedback composition only uses the inputs
    prescribed by the witness maps, as the runtime controller does.
    """
    out = {}
    pc = inst.p_composite
    if "theorem1" in which:
        SC = compose(inst.spec, inst.cabs, inst.RhatC, EXACT)
        out["theorem1"] = check_acasr(SC.system, inst.plant, theorem1_relation(inst.RhatC, inst.R),
                                      inst.p, d_C(inst.d))
    obs = None
    if set(which) & {"theorem2", "lemma2", "theorem3", "theorem4"}:
        obs = definition_observer(inst.plant, inst.oabs, inst.Rcheck, inst.p_check, inst.dcheck)
    if "theorem2" in which:
        out["theorem2"] = check_acsr(inst.plant, obs, theorem2_relation(inst.Rcheck),
                                     inst.p_check, inst.dcheck)
    lifted_spec = lift_system(inst.spec).materialize()
    lifted_cabs = lift_system(inst.cabs).materialize()
    bridge = FiniteBridge(inst.R, inst.Rcheck, inst.plant.states, inst.plant.inputs)
    if "lemma1" in which:
        out["lemma1"] = check_acasr(lifted_spec, lifted_cabs, lift_relation_RC(inst.RhatC), EXACT)
    if "lemma2" in which:
        out["lemma2"] = check_acasr(lifted_cabs, obs, lift_relation_R(bridge), pc, inst.dbar)
    if "theorem3" in which or "theorem4" in which:
        bold_SC = compose(lifted_spec, lifted_cabs, lift_relation_RC(inst.RhatC), EXACT)
        RC = theorem3_relation(inst.RhatC, bridge)
        dC = d_lifted_C(inst.dbar)
        if "theorem3" in which:
            out["theorem3"] = check_acasr(bold_SC.system, obs, RC, pc, dC)
        if "theorem4" in which:
            RC_used = coherent_inputs(inst, RC) if coherent else RC
            bar_SC = compose(bold_SC.system, obs, RC_used, pc, dC)
            out["theorem4"] = check_acasr(bar_SC.system, inst.plant,
                                          theorem4_relation(inst.R, inst.Rcheck, inst.spec.inputs),
                                          pc, dbar_C(inst.dbar))
    return out

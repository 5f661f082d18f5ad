"""End-to-end case-study pipeline: build, verify, synthesize, simulate, report."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction

from . import casestudy as cs
from .checker import (check_acasr, check_acasr_sampled, check_acsr_sampled, check_condition_7,
                      check_condition_8, check_condition_9, check_condition_10,
                      check_output_consistency)
from .lift import synthesize
from .numeric import fmt_num, json_num, sort_key, sorted_states
from .observer import BoundMenu, observer_system
from .relation import EXACT, zero_metric
from .simulate import SeededDropouts, convergence_step, export_csv, in_band, run
from .systems import system_to_json

log = logging.getLogger(__name__)

PUBLISHED_OBSERVER_STATES = 10
PUBLISHED_CONTROLLER_STATES = 27


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str, internal: bool = False):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.internal = internal


@dataclass
class ReproConfig:
    out_dir: str = "repro_out"
    steps: int = 50
    seed: int = 0
    menu_depth: int = 0
    dropout_rate: float = 0.2
    verify: bool = True


def fmt_state(x) -> str:
    """Stable text form of case-study and lifted states."""
    if isinstance(x, tuple):
        return "[" + ",".join(fmt_state(v) for v in x) + "]"
    if isinstance(x, frozenset):
        return "{" + ";".join(fmt_state(v) for v in sorted_states(x)) + "}"
    if isinstance(x, (Fraction, int)):
        return fmt_num(x)
    return str(x)


def verdict_json(v) -> dict:
    out = {"ok": v.ok, "method": v.method}
    if v.counterexample is not None:
        out["counterexample"] = {k: (fmt_state(val) if not isinstance(val, str) else val)
                                 for k, val in v.counterexample.items()}
    if v.witness is not None:
        out["witness"] = {fmt_state(k): fmt_state(val) for k, val in v.witness.items()}
    if v.stats:
        out["stats"] = v.stats
    return out


def _witness_pairs(cabs_states, radius):
    """Abstract states paired with plant states at the cell and the ball corners."""
    offs = [(0, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)]
    for x in cabs_states:
        for a, b in offs:
            yield x, (x[0] + a * radius, x[1] + b * radius) + tuple(x[2:])


def build_controller(menu_depth: int = 0):
    """Synthesize the case-study controller with identity witness maps."""
    spec, cabs, oabs = cs.build_case_spec(), cs.build_case_cabs(), cs.build_case_oabs()
    R, RhatC, Rcheck = cs.build_case_relations()
    ident = {u: u for u in cs.INPUTS}
    return synthesize(spec, cabs, cs.CaseIntervalOracle(oabs), RhatC, R, Rcheck, cs.PARAMS_C,
                      cs.PARAMS_O, cs.CaseBridge(), ident, ident, ident,
                      menu=BoundMenu(cs.PARAMS_O, menu_depth))


def verify_case() -> dict:
    """All relation and side-condition checks of the case study."""
    spec, cabs, oabs = cs.build_case_spec(), cs.build_case_cabs(), cs.build_case_oabs()
    R, RhatC, Rcheck = cs.build_case_relations()
    plant = cs.build_case_plant()
    results = {}
    results["R_acasr"] = check_acasr_sampled(cabs, cs.sampler_c(), cs.PARAMS_C, relation=R,
                                             plant_system=plant.system)
    results["Rcheck_acsr"] = check_acsr_sampled(cs.sampler_o(), oabs, cs.PARAMS_O,
                                                relation=Rcheck, plant_system=plant.system)
    results["RhatC_asr"] = check_acasr(spec, cabs, RhatC, EXACT,
                                       pairs=[(x, x) for x in spec.states])
    results["condition7"] = check_condition_7(RhatC, spec, cabs, pairs=[(x, x) for x in spec.states])
    results["condition8"] = check_condition_8(zero_metric, zero_metric, zero_metric,
                                              cs.INPUTS, cs.INPUTS, cs.INPUTS)
    cap_c = 2 * cs.PARAMS_C.kappa / (1 - cs.PARAMS_C.beta)
    cap_o = 2 * cs.PARAMS_O.kappa / (1 - cs.PARAMS_O.beta)
    results["condition9"] = check_condition_9(R, cabs, plant.system,
                                              pairs=list(_witness_pairs(cabs.states, cap_c)),
                                              method="sampled")
    results["condition10"] = check_condition_10(
        Rcheck, plant.system, oabs,
        pairs=[(x, xc) for xc, x in _witness_pairs(oabs.states, cap_o)], method="sampled")
    return results


def output_consistency_case(eps=None):
    """Output-consistency condition at level ``eps`` (default ``kappa'``), sampled."""
    oabs = cs.build_case_oabs()
    Rcheck = cs.case_relation_o()
    eps = cs.PARAMS_O.kappa if eps is None else eps
    samples = []
    for xc in oabs.states:
        samples.extend(cs.sample_states(xc, eps))
    return check_output_consistency(cs.output, Rcheck, eps, samples, oabs.states, "sampled")


def controller_bundle(ctrl, source: dict) -> dict:
    """JSON description of a synthesized controller with an indexed state legend."""
    states = ctrl.system.states
    index = {s: i for i, s in enumerate(states)}
    legend, trans = {}, {}
    for s in states:
        (XC, XH), XT = s
        legend[str(index[s])] = {
            "spec": [fmt_state(x) for x in sorted_states(XC)],
            "cabs": [fmt_state(x) for x in sorted_states(XH)],
            "observer": [[fmt_state(x), json_num(b)] for x, b in sorted(XT, key=sort_key)],
        }
        for u in ctrl.system.enabled_inputs(s):
            (us, uh), uc = u
            trans.setdefault(str(index[s]), []).append({
                "input": {"spec": fmt_state(us), "cabs": fmt_state(uh), "oabs": fmt_state(uc)},
                "next": sorted(index[t] for t in ctrl.system.post(s, u)),
            })
    return {
        "source": source,
        "params": [json_num(v) for v in ctrl.params.as_tuple()],
        "initial": sorted(index[s] for s in ctrl.system.initial),
        "witness": {name: {fmt_state(k): fmt_state(v)
                           for k, v in sorted(w.items(), key=lambda kv: sort_key(kv[0]))}
                    for name, w in (("7", ctrl.witness7), ("9", ctrl.witness9),
                                    ("10", ctrl.witness10))},
        "stats": ctrl.stats,
        "states": legend,
        "transitions": trans,
    }


def write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def repro(config: ReproConfig) -> dict:
    """Run the full pipeline and write every artifact into ``config.out_dir``."""
    os.makedirs(config.out_dir, exist_ok=True)
    report = {"published": {"observer_states": PUBLISHED_OBSERVER_STATES,
                        "controller_states": PUBLISHED_CONTROLLER_STATES,
                        "params": ["0.055", "0.5", "0"]}}
    try:
        spec, cabs, oabs = cs.build_case_spec(), cs.build_case_cabs(), cs.build_case_oabs()
    except Exception as exc:  # pragma: no cover - builders are pure
        raise StageError("build", str(exc), internal=True) from exc
    report["sizes"] = {"cabs": len(cabs), "oabs": len(oabs), "spec": len(spec)}

    if config.verify:
        results = verify_case()
        report["verification"] = {k: verdict_json(v) for k, v in results.items()}
        failed = [k for k, v in results.items() if not v.ok]
        if failed:
            write_json(os.path.join(config.out_dir, "report.json"), report)
            raise StageError("verify", f"failed checks: {', '.join(failed)}")
        oc = output_consistency_case()
        report["output_consistency_at_kappa_o"] = verdict_json(oc)

    try:
        ctrl = build_controller(config.menu_depth)
    except Exception as exc:
        raise StageError("synthesize", str(exc), internal=True) from exc
    menu = BoundMenu(cs.PARAMS_O, config.menu_depth)
    obs = observer_system(cs.CaseIntervalOracle(oabs), oabs, cs.PARAMS_O, cs.INPUTS, menu=menu)
    n_obs = ctrl.stats["observer_states"]
    n_ctrl = ctrl.stats["controller_states"]
    report["params"] = [json_num(v) for v in ctrl.params.as_tuple()]
    report["counts"] = {
        "observer_states": n_obs,
        "observer_states_open_loop": len(obs.states),
        "controller_states": n_ctrl,
        "observer_vs_published": n_obs - PUBLISHED_OBSERVER_STATES,
        "controller_vs_published": n_ctrl - PUBLISHED_CONTROLLER_STATES,
        "observer_within_2x": n_obs <= 2 * PUBLISHED_OBSERVER_STATES,
        "coverage_checked_states": n_ctrl,
        "max_candidates": {"spec": ctrl.stats["max_spec_set"], "cabs": ctrl.stats["max_cabs_set"],
                           "observer": ctrl.stats["max_observer_set"]},
    }
    write_json(os.path.join(config.out_dir, "controller.json"), controller_bundle(ctrl, {"builtin": "case", "menu_depth": config.menu_depth}))
    write_json(os.path.join(config.out_dir, "spec.json"), system_to_json(spec, fmt_state))
    write_json(os.path.join(config.out_dir, "oabs.json"), system_to_json(oabs, fmt_state))

    if config.steps > 0:
        try:
            trace = run(ctrl, config.steps, SeededDropouts(config.seed, config.dropout_rate))
        except Exception as exc:
            raise StageError("simulate", str(exc), internal=True) from exc
        export_csv(trace, os.path.join(config.out_dir, "trace.csv"))
        report["simulation"] = {
            "steps": config.steps,
            "seed": config.seed,
            "first_band_entry": next((r.k for r in trace if in_band(r.yc)), None),
            "convergence_step": convergence_step(trace),
            "max_n_obs": max(r.n_obs for r in trace),
            "max_n_ctrl": max(r.n_ctrl for r in trace),
            "ordering_violations": sum(r.n_ctrl < r.n_obs for r in trace),
            "dropouts": sum((r.drop_cp or 0) + (r.drop_pc or 0) for r in trace),
        }
    write_json(os.path.join(config.out_dir, "report.json"), report)
    with open(os.path.join(config.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_report(report))
    return report


def format_report(report: dict) -> str:
    lines = []
    c = report.get("counts", {})
    if "verification" in report:
        for k, v in report["verification"].items():
            lines.append(f"check {k}: {'ok' if v['ok'] else 'FAILED'} ({v['method']})")
    if "output_consistency_at_kappa_o" in report:
        oc = report["output_consistency_at_kappa_o"]
        lines.append("output consistency at kappa': " + ("holds" if oc["ok"] else "violated (expected)"))
    if "params" in report:
        lines.append("composite parameters: (" + ", ".join(str(v) for v in report["params"]) + ")")
    if c:
        lines.append(f"observer states: {c['observer_states']} (published {PUBLISHED_OBSERVER_STATES}, "
                     f"diff {c['observer_vs_published']:+d}; open loop {c['observer_states_open_loop']})")
        lines.append(f"controller states: {c['controller_states']} (published {PUBLISHED_CONTROLLER_STATES}, "
                     f"diff {c['controller_vs_published']:+d})")
    sim = report.get("simulation")
    if sim:
        lines.append(f"simulation: {sim['steps']} steps, seed {sim['seed']}, "
                     f"first band entry {sim['first_band_entry']}, "
                     f"settled from step {sim['convergence_step']}, "
                     f"max candidates obs/ctrl {sim['max_n_obs']}/{sim['max_n_ctrl']}")
    return "\n".join(lines) + "\n"

"""Command-line interface.

Every subcommand reads JSON/CSV inputs and writes JSON/CSV outputs. Built-in
case-study objects are addressed with ``builtin:case-<part>`` tokens, e.g.
``builtin:case-cabs`` or ``builtin:case-R``.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

from . import casestudy as cs
from .checker import (CapabilityError, check_acasr, check_acasr_sampled, check_acsr,
                      check_acsr_sampled, check_condition_7, check_condition_9,
                      check_condition_10)
from .compose import CompositionInvariantError, compose
from .lift import FiniteBridge, SynthesisError, lift_system, synthesize
from .numeric import json_num, sorted_states, to_fraction
from .observer import BoundMenu, FinitePlantOracle, observer_system
from .pipeline import (ReproConfig, StageError, build_controller, controller_bundle, fmt_state,
                       format_report, repro, verdict_json, write_json)
from .relation import AcParams, metric_from_json, relation_from_json, relation_to_json
from .simulate import (ScheduledDropouts, SeededDropouts, SimulationError, SoundnessError,
                       export_csv, read_schedule, run, trace_csv)
from .systems import PlantWithOutputs, SystemFormatError, system_from_json, system_to_json

log = logging.getLogger("symobs")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
LIFT_LIMIT = 12


class UsageError(Exception):
    pass


# -- input resolution -----------------------------------------------------------

def _builtin(token: str):
    return token[len("builtin:"):] if token.startswith("builtin:") else None


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


_SYSTEMS = {
    "case-spec": cs.build_case_spec,
    "case-cabs": cs.build_case_cabs,
    "case-oabs": cs.build_case_oabs,
}
_RELATIONS = {
    "case-R": cs.case_relation_c,
    "case-Rcheck": cs.case_relation_o,
    "case-RhatC": cs.case_relation_spec,
}


def load_system_arg(token: str):
    """A finite system from a file or a built-in token; the case plant yields ``None``."""
    name = _builtin(token)
    if name == "case-plant":
        return None
    if name is not None:
        if name not in _SYSTEMS:
            raise UsageError(f"unknown builtin system {token!r}")
        return _SYSTEMS[name]()
    try:
        return system_from_json(_read_json(token))
    except SystemFormatError as exc:
        raise UsageError(f"{token}: {exc}") from exc


def load_plant_arg(token: str):
    """Plant with outputs: a system file carrying an ``outputs`` map, or the case plant."""
    if _builtin(token) == "case-plant":
        return None
    doc = _read_json(token)
    if "outputs" not in doc:
        raise UsageError(f"{token}: plant files need an 'outputs' object")
    try:
        system = system_from_json(doc)
    except SystemFormatError as exc:
        raise UsageError(f"{token}: {exc}") from exc
    outputs = doc["outputs"]
    missing = [x for x in system.states if x not in outputs]
    if missing:
        raise UsageError(f"{token}: $.outputs lacks state {missing[0]!r}")
    return PlantWithOutputs(system, outputs.__getitem__, frozenset(outputs.values()), name=token)


def load_relation_arg(token: str):
    name = _builtin(token)
    if name is not None:
        if name not in _RELATIONS:
            raise UsageError(f"unknown builtin relation {token!r}")
        return _RELATIONS[name]()
    try:
        return relation_from_json(_read_json(token), name=token)
    except ValueError as exc:
        raise UsageError(f"{token}: {exc}") from exc


def load_metric_arg(token):
    if token in (None, "zero"):
        return metric_from_json("zero")
    try:
        return metric_from_json(_read_json(token))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{token}: malformed metric ({exc})") from exc


def params_from(args, prefix: str = "") -> AcParams:
    try:
        return AcParams(to_fraction(getattr(args, prefix + "kappa")),
                        to_fraction(getattr(args, prefix + "beta")),
                        to_fraction(getattr(args, prefix + "lam")))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def parse_triple(text: str) -> AcParams:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"expected kappa,beta,lambda but got {text!r}")
    try:
        return AcParams(*(to_fraction(p) for p in parts))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def emit(doc, out) -> None:
    if out:
        write_json(out, doc)
    else:
        json.dump(doc, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")


def indexed_json(system, prefix: str, describe) -> dict:
    """System JSON with short state names ``<prefix><i>`` plus a legend."""
    names = {x: f"{prefix}{i}" for i, x in enumerate(system.states)}

    def fmt(obj):
        return names[obj] if obj in names else fmt_state(obj)

    doc = system_to_json(system, fmt)
    doc["legend"] = {names[x]: describe(x) for x in system.states}
    return doc


# -- subcommands ------------------------------------------------------------------

def _case_sampler_for(token: str):
    name = _builtin(token)
    if name == "case-R":
        return cs.sampler_c()
    if name == "case-Rcheck":
        return cs.sampler_o()
    raise UsageError("checks against builtin:case-plant need builtin:case-R or builtin:case-Rcheck")


def cmd_check(args, alternating: bool) -> int:
    left, right = load_system_arg(args.left), load_system_arg(args.right)
    relation = load_relation_arg(args.relation)
    p, d = params_from(args), load_metric_arg(args.metric)
    plant = cs.build_case_plant().system
    if alternating:
        if left is None:
            raise UsageError("check-asr expects the abstraction on the left")
        if right is None:
            verdict = check_acasr_sampled(left, _case_sampler_for(args.relation), p, d,
                                          relation=relation, plant_system=plant)
        else:
            verdict = check_acasr(left, right, relation, p, d)
    else:
        if right is None:
            raise UsageError("check-sr expects the abstraction on the right")
        if left is None:
            verdict = check_acsr_sampled(_case_sampler_for(args.relation), right, p, d,
                                         relation=relation, plant_system=plant)
        else:
            verdict = check_acsr(left, right, relation, p, d)
    emit(verdict_json(verdict), args.out)
    return EXIT_OK if verdict.ok else EXIT_FAIL


def cmd_compose(args) -> int:
    left, right = load_system_arg(args.left), load_system_arg(args.right)
    if left is None or right is None:
        raise UsageError("compose needs finite systems")
    result = compose(left, right, load_relation_arg(args.relation), params_from(args),
                     load_metric_arg(args.metric))
    doc = indexed_json(result.system, "q", lambda s: {"left": fmt_state(s[0]),
                                                     "right": fmt_state(s[1])})
    doc["warnings"] = result.warnings
    emit(doc, args.out)
    return EXIT_OK


def cmd_observer(args) -> int:
    oabs = load_system_arg(args.oabs)
    plant = load_plant_arg(args.plant)
    Rcheck = load_relation_arg(args.relation)
    p, dcheck = params_from(args), load_metric_arg(args.metric)
    if oabs is None:
        raise UsageError("--oabs must be a finite system")
    if plant is None:
        oracle, inputs = cs.CaseIntervalOracle(oabs), cs.INPUTS
        witness = {u: u for u in inputs}
        dmax = Fraction(0)
    else:
        oracle, inputs = FinitePlantOracle(plant, oabs, Rcheck), plant.system.inputs
        verdict = check_condition_10(Rcheck, plant.system, oabs)
        if not verdict.ok:
            emit(verdict_json(verdict), args.out)
            return EXIT_FAIL
        witness = verdict.witness
        dmax = max((dcheck(u, uc) for u in inputs for uc in oabs.inputs), default=Fraction(0))
    menu = BoundMenu(p, args.menu_depth, dmax)
    obs = observer_system(oracle, oabs, p, inputs, witness, dcheck, menu)
    emit(indexed_json(obs, "o", lambda s: [[fmt_state(x), json_num(b)] for x, b in s]), args.out)
    return EXIT_OK


def cmd_lift(args) -> int:
    base = load_system_arg(args.system)
    if base is None or len(base) > LIFT_LIMIT:
        raise UsageError(f"lift materializes all subsets; use a finite system with at most "
                         f"{LIFT_LIMIT} states")
    lifted = lift_system(base).materialize()
    emit(indexed_json(lifted, "L", lambda s: [fmt_state(x) for x in sorted_states(s)]), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    tokens = (args.spec, args.cabs, args.oabs, args.plant, args.rel_c, args.rel_hat, args.rel_o)
    if all(_builtin(t) for t in tokens) and _builtin(args.plant) == "case-plant":
        ctrl = build_controller(args.menu_depth)
        source = {"builtin": "case", "menu_depth": args.menu_depth}
    else:
        spec, cabs, oabs = (load_system_arg(t) for t in (args.spec, args.cabs, args.oabs))
        plant = load_plant_arg(args.plant)
        if None in (spec, cabs, oabs) or plant is None:
            raise UsageError("synthesis from files needs finite systems and a finite plant")
        R, RhatC, Rcheck = (load_relation_arg(t) for t in (args.rel_c, args.rel_hat, args.rel_o))
        p, p_check = parse_triple(args.params_c), parse_triple(args.params_o)
        dcheck = load_metric_arg(args.metric_o)
        checks = {"7": check_condition_7(RhatC, spec, cabs),
                  "9": check_condition_9(R, cabs, plant.system),
                  "10": check_condition_10(Rcheck, plant.system, oabs)}
        bad = {k: verdict_json(v) for k, v in checks.items() if not v.ok}
        if bad:
            emit({"ok": False, "failed_conditions": bad}, args.out)
            return EXIT_FAIL
        dmax = max((dcheck(u, uc) for u in plant.system.inputs for uc in oabs.inputs),
                   default=Fraction(0))
        ctrl = synthesize(spec, cabs, FinitePlantOracle(plant, oabs, Rcheck), RhatC, R, Rcheck, p,
                          p_check, FiniteBridge(R, Rcheck, plant.system.states,
                                                plant.system.inputs),
                          checks["7"].witness, checks["9"].witness, checks["10"].witness,
                          dcheck, None, BoundMenu(p_check, args.menu_depth, dmax))
        source = {"files": list(tokens)}
    emit(controller_bundle(ctrl, source), args.out)
    return EXIT_OK


def _controller_for_simulation(token: str):
    if _builtin(token) == "case":
        return build_controller(0)
    bundle = _read_json(token)
    source = bundle.get("source", {})
    if source.get("builtin") != "case":
        raise UsageError("simulation needs a controller synthesized for the built-in case study")
    ctrl = build_controller(int(source.get("menu_depth", 0)))
    if ctrl.n_states != len(bundle.get("states", {})):
        raise UsageError(f"{token}: bundle does not match the rebuilt controller "
                         f"({len(bundle.get('states', {}))} vs {ctrl.n_states} states)")
    return ctrl


def cmd_simulate(args) -> int:
    if args.steps < 0:
        raise UsageError("--steps must be nonnegative")
    if args.dropouts:
        try:
            dropouts = read_schedule(args.dropouts)
        except (OSError, ValueError) as exc:
            raise UsageError(f"{args.dropouts}: {exc}") from exc
    else:
        dropouts = SeededDropouts(args.seed, args.rate) if args.rate > 0 else ScheduledDropouts([])
    trace = run(_controller_for_simulation(args.controller), args.steps, dropouts)
    if args.out:
        export_csv(trace, args.out)
    else:
        sys.stdout.write(trace_csv(trace))
    return EXIT_OK


def _export_plant() -> dict:
    return {
        "kind": "networked-linear",
        "A": [json_num(v) for v in cs.A],
        "B": [json_num(v) for v in cs.B],
        "C": [json_num(v) for v in cs.C],
        "inputs": [json_num(u) for u in cs.INPUTS],
        "initial": fmt_state(cs.ORIGIN),
        "box": [json_num(v) for v in cs.BOX],
        "branches": {f"{k[0]}{k[1]}": [{"next_flags": list(f), "with_input": w} for f, w in v]
                     for k, v in cs.BRANCHES.items()},
        "output": "round half away from zero of C . xi",
    }


def _export_relations() -> dict:
    spec = cs.build_case_spec()
    return {
        "R": {"kind": "grid-distance", "kappa": json_num(cs.PARAMS_C.kappa),
              "grid": json_num(cs.GRID_C.eta), "params": [json_num(v) for v in cs.PARAMS_C.as_tuple()]},
        "Rcheck": {"kind": "grid-distance", "kappa": json_num(cs.PARAMS_O.kappa),
                   "grid": json_num(cs.GRID_O.eta),
                   "params": [json_num(v) for v in cs.PARAMS_O.as_tuple()]},
        "RhatC": relation_to_json(cs.case_relation_spec(), spec.states, spec.states, fmt_state),
    }


def cmd_export(args) -> int:
    if args.builtin != "case":
        raise UsageError("only the 'case' builtin exists")
    if args.part == "plant":
        doc = _export_plant()
    elif args.part == "relations":
        doc = _export_relations()
    else:
        doc = system_to_json(_SYSTEMS["case-" + args.part](), fmt_state)
    emit(doc, args.out)
    return EXIT_OK


def cmd_repro(args) -> int:
    config = ReproConfig(out_dir=args.out, steps=args.steps, seed=args.seed,
                         menu_depth=args.menu_depth, dropout_rate=args.rate,
                         verify=not args.no_verify)
    try:
        report = repro(config)
    except StageError as exc:
        log.error("%s", exc)
        return EXIT_INTERNAL if exc.internal else EXIT_FAIL
    sys.stdout.write(format_report(report))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _add_params(p, required: bool = True) -> None:
    p.add_argument("--kappa", required=required, default="0", help="offset kappa >= 0")
    p.add_argument("--beta", required=required, default="0", help="contraction beta in [0, 1)")
    p.add_argument("--lambda", dest="lam", required=required, default="0",
                   help="input-mismatch gain lambda >= 0")
    p.add_argument("--metric", default="zero",
                   help="input metric JSON file, or 'zero' (default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symobs", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("check-sr", "check an approximate simulation relation"),
                           ("check-asr", "check an approximate alternating simulation relation")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--left", required=True, help="left system (JSON file or builtin token)")
        p.add_argument("--right", required=True, help="right system (JSON file or builtin token)")
        p.add_argument("--relation", required=True, help="relation JSON file or builtin token")
        _add_params(p)
        p.add_argument("--out", help="write the verdict here instead of stdout")

    p = sub.add_parser("compose", help="compose two systems through a relation")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--relation", required=True)
    _add_params(p, required=False)
    p.add_argument("--out")

    p = sub.add_parser("observer", help="build the reachable observer system")
    p.add_argument("--plant", required=True, help="plant JSON with 'outputs', or builtin:case-plant")
    p.add_argument("--oabs", required=True, help="o-abstraction system")
    p.add_argument("--relation", required=True, help="relation from plant to o-abstraction")
    _add_params(p)
    p.add_argument("--menu-depth", type=int, default=0, help="extra bound levels per candidate")
    p.add_argument("--out")

    p = sub.add_parser("lift", help="materialize the subset lifting of a small system")
    p.add_argument("--system", required=True)
    p.add_argument("--out")

    p = sub.add_parser("synth", help="synthesize an observer-based controller")
    for flag, helptext in (("--spec", "specification system"), ("--cabs", "c-abstraction"),
                           ("--oabs", "o-abstraction"), ("--plant", "plant with outputs"),
                           ("--rel-c", "relation from c-abstraction to plant"),
                           ("--rel-hat", "relation from spec to c-abstraction"),
                           ("--rel-o", "relation from plant to o-abstraction")):
        p.add_argument(flag, required=True, help=helptext)
    p.add_argument("--params-c", default="0,0,0", help="kappa,beta,lambda of --rel-c")
    p.add_argument("--params-o", default="0,0,0", help="kappa,beta,lambda of --rel-o")
    p.add_argument("--metric-o", default="zero", help="input metric of --rel-o")
    p.add_argument("--menu-depth", type=int, default=0)
    p.add_argument("--out", help="controller bundle JSON")

    p = sub.add_parser("simulate", help="closed-loop simulation of the case study")
    p.add_argument("--controller", required=True, help="controller bundle JSON or builtin:case")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=0.2, help="dropout probability per channel")
    p.add_argument("--dropouts", help="CSV dropout schedule (overrides --seed and --rate)")
    p.add_argument("--out", help="trace CSV path (stdout if omitted)")

    p = sub.add_parser("export", help="write a built-in object as JSON")
    p.add_argument("--builtin", required=True, help="name of the built-in example ('case')")
    p.add_argument("--part", required=True,
                   choices=["plant", "cabs", "oabs", "spec", "relations"])
    p.add_argument("--out")

    p = sub.add_parser("repro", help="run the full case-study pipeline")
    p.add_argument("--out", default="repro_out", help="output directory")
    p.add_argument("--steps", type=int, default=50, help="simulation steps; 0 skips simulation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=0.2)
    p.add_argument("--menu-depth", type=int, default=0)
    p.add_argument("--no-verify", action="store_true", help="skip relation certification")
    return parser


COMMANDS = {
    "check-sr": lambda a: cmd_check(a, alternating=False),
    "check-asr": lambda a: cmd_check(a, alternating=True),
    "compose": cmd_compose,
    "observer": cmd_observer,
    "lift": cmd_lift,
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "export": cmd_export,
    "repro": cmd_repro,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, CapabilityError) as exc:
        print(f"symobs {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SynthesisError, CompositionInvariantError, SimulationError, SoundnessError,
            StageError) as exc:
        print(f"symobs {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort guard
        log.exception("unexpected failure")
        print(f"symobs {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

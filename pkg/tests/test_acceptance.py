"""Acceptance criteria, each checked at its stated tolerance.

A summary line per criterion is printed at the end of the pytest run.
"""

import filecmp
import json
import os
import subprocess
import sys
import time
from collections import Counter
from fractions import Fraction
from pathlib import Path

import pytest

from symobs import casestudy as cs
from symobs.cli import main
from symobs.lift import SynthesisError
from symobs.pipeline import build_controller
from symobs.simulate import SeededDropouts, SimulationError, in_band, run
from symobs.toys import (STATEMENTS, check_statements, check_synthesized, random_instance,
                         random_outputs, synthesize_toy)

F = Fraction
N_INSTANCES = 300
SEEDS = range(20)
STEPS = 50
REENTRY = 5


# -- shared fixtures ----------------------------------------------------------------

@pytest.fixture(scope="module")
def repro_dirs(tmp_path_factory):
    """Two independent ``repro`` runs in separate processes with different hash seeds."""
    base = tmp_path_factory.mktemp("repro")
    procs = []
    for i in (1, 2):
        env = dict(os.environ, PYTHONHASHSEED=str(i))
        out = base / f"run{i}"
        procs.append((out, subprocess.Popen(
            [sys.executable, "-m", "symobs.cli", "repro", "--out", str(out), "--seed", "0"],
            env=env, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)))
    results = []
    for out, proc in procs:
        stdout, stderr = proc.communicate(timeout=900)
        assert proc.returncode == 0, stderr
        results.append((out, stdout))
    return results


@pytest.fixture(scope="module")
def report(repro_dirs):
    return json.loads((repro_dirs[0][0] / "report.json").read_text())


@pytest.fixture(scope="module")
def ctrl():
    return build_controller()


@pytest.fixture(scope="module")
def seeded_runs(ctrl):
    traces, violations = {}, {}
    for seed in SEEDS:
        try:
            traces[seed] = run(ctrl, STEPS, SeededDropouts(seed))
            violations[seed] = 0
        except SimulationError as exc:
            violations[seed] = 1
            traces[seed] = None
            print(f"seed {seed}: {exc}")
    return traces, violations


# -- criterion 1 ---------------------------------------------------------------------

def test_criterion_1_relation_certification(tmp_path, acceptance):
    details, ok = [], True
    for kind, left, right, rel, params in (
            ("check-asr", "builtin:case-cabs", "builtin:case-plant", "builtin:case-R",
             ("0.005", "0.5", "0")),
            ("check-sr", "builtin:case-plant", "builtin:case-oabs", "builtin:case-Rcheck",
             ("0.05", "0.5", "0"))):
        out = tmp_path / f"{kind}.json"
        t0 = time.perf_counter()
        code = main([kind, "--left", left, "--right", right, "--relation", rel,
                     "--kappa", params[0], "--beta", params[1], "--lambda", params[2],
                     "--out", str(out)])
        elapsed = time.perf_counter() - t0
        verdict = json.loads(out.read_text())
        passed = code == 0 and verdict["ok"] and verdict["method"] == "sampled" and elapsed < 60
        ok &= passed
        details.append(f"{kind} {rel.split('-')[-1]} ok={verdict['ok']} "
                       f"samples={verdict['stats']['samples']} {elapsed:.1f}s")
    acceptance(1, ok, "; ".join(details))
    assert ok


# -- criterion 2 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def statement_results():
    fails, examples = Counter(), {}
    for seed in range(N_INSTANCES):
        inst = random_instance(seed)
        for name, verdict in check_statements(inst).items():
            if not verdict.ok:
                fails[name] += 1
                examples.setdefault(name, seed)
    return fails, examples


@pytest.mark.xfail(strict=True, reason=(
    "The literal lifted statements fail on some generated instances: a lifted "
    "c-abstracted state can have members without a common input (Lemma 1), the "
    "observer admits successors justified by plant states unrelated to the lifted "
    "state (Lemma 2, Theorem 3), and the composition may pick an input that only "
    "another plant state accepts (Theorem 4).  Each counterexample replays exactly."))
def test_criterion_2_theorem_property_suite(statement_results, acceptance):
    fails, examples = statement_results
    counts = ", ".join(f"{name} {fails[name]}/{N_INSTANCES}" for name in STATEMENTS)
    seeds = ", ".join(f"{k}@seed{v}" for k, v in sorted(examples.items()))
    acceptance(2, not fails, f"failures {counts}; first counterexamples {seeds}")
    assert not fails


def test_criterion_2_parts_that_hold(statement_results):
    fails, _ = statement_results
    assert fails["theorem1"] == 0 and fails["theorem2"] == 0
    assert sum(fails.values()) > 0


def test_criterion_2_runtime_synthesized_controllers_certify():
    certified, aborted = 0, 0
    for seed in range(N_INSTANCES):
        inst = random_instance(seed)
        try:
            ctrl = synthesize_toy(inst, random_outputs(seed, inst.plant))
        except SynthesisError:
            aborted += 1
            continue
        assert check_synthesized(inst, ctrl).ok, seed
        certified += 1
    print(f"runtime-synthesized controllers: {certified} certified, {aborted} aborted")
    assert certified >= 200


# -- criteria 3 and 4 ------------------------------------------------------------

def test_criterion_3_composite_parameters(report, acceptance):
    ok = report["params"] == ["0.055", "0.5", "0"]
    acceptance(3, ok, f"repro reports ({', '.join(report['params'])}), published (0.055, 0.5, 0)")
    assert ok


def test_criterion_4_state_counts(report, ctrl, acceptance):
    c = report["counts"]
    kappa = ctrl.RhatC.kappa
    covered = all(
        XH and XT.members and all(any(ctrl.RhatC.state_gauge(xs, xh) <= kappa for xs in XC)
                                  for xh in XH)
        for (XC, XH), XT in ctrl.system.states)
    ok = c["observer_states"] <= 2 * 10 and c["controller_states"] == ctrl.n_states and covered
    acceptance(4, ok, f"observer {c['observer_states']} (published 10, limit 20), controller "
                      f"{c['controller_states']} (published 27), coverage at every state: {covered}")
    assert ok


# -- criteria 5 to 7 -------------------------------------------------------------

def _reentry_ok(trace, steps=STEPS, horizon=REENTRY):
    """Every dropout in the first ``steps`` steps is followed by a band visit.

    The trace must extend ``horizon`` steps past ``steps`` so that late dropouts
    get their full window.
    """
    records = trace.records
    assert records[-1].k >= steps + horizon
    for r in records:
        if r.k < steps and (r.drop_cp or r.drop_pc):
            window = records[r.k + 1:r.k + horizon + 1]
            if not any(in_band(s.yc) for s in window):
                return False
    return True


def _longest_excursion(trace):
    first = next(r.k for r in trace if in_band(r.yc))
    worst = cur = 0
    for r in trace.records[first:]:
        cur = 0 if in_band(r.yc) else cur + 1
        worst = max(worst, cur)
    return worst


def test_criterion_5_closed_loop_convergence(ctrl, acceptance):
    clean = run(ctrl, STEPS)
    entry = next(r.k for r in clean if in_band(r.yc))
    stays = all(in_band(r.yc) for r in clean.records[entry:])
    # the extended runs share their first STEPS steps with ``seeded_runs``
    traces = [run(ctrl, STEPS + REENTRY, SeededDropouts(seed)) for seed in SEEDS]
    reentry = all(_reentry_ok(t) for t in traces)
    worst = max(_longest_excursion(t) for t in traces)
    ok = entry <= 20 and stays and reentry
    acceptance(5, ok, f"no dropouts: band entered at k={entry} and kept={stays}; "
                      f"{len(SEEDS)} seeds x {STEPS} steps: re-entry within 5 steps={reentry}, "
                      f"longest excursion {worst} step(s)")
    assert ok


def test_criterion_6_observer_soundness(seeded_runs, acceptance):
    _, violations = seeded_runs
    total = sum(violations.values())
    acceptance(6, total == 0, f"{total} soundness violations over {len(SEEDS)} seeds")
    assert total == 0


def test_criterion_7_candidate_ordering(seeded_runs, acceptance):
    traces, _ = seeded_runs
    bad = sum(r.n_ctrl < r.n_obs for t in traces.values() if t is not None for r in t)
    steps = sum(len(t) for t in traces.values() if t is not None)
    acceptance(7, bad == 0, f"{bad} ordering violations in {steps} steps")
    assert bad == 0


# -- criterion 8 ---------------------------------------------------------------------

def _tree(path: Path):
    return sorted(p.relative_to(path).as_posix() for p in path.rglob("*") if p.is_file())


def test_criterion_8_determinism(repro_dirs, acceptance):
    (a, out_a), (b, out_b) = repro_dirs
    files = _tree(a)
    same_names = files == _tree(b)
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    ok = same_names and not mismatch and not errors and out_a == out_b and "trace.csv" in files
    acceptance(8, ok, f"{len(files)} files compared byte for byte across two processes "
                      f"with different hash seeds; mismatches: {mismatch or 'none'}")
    assert ok

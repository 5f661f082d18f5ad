"""Check every theorem statement on generated finite instances.

Prints per-statement failure counts for the literal constructions, for the
variant whose composition follows the witness maps, and for controllers
produced by runtime synthesis.

Usage: python3 scripts/theorem_properties.py [--instances N]
"""

import argparse
import time
from collections import Counter

from symobs.lift import CoverageError, SynthesisError
from symobs.toys import (STATEMENTS, check_statements, check_synthesized, random_instance,
                         random_outputs, synthesize_toy)


def literal(n: int, coherent: bool):
    fails, first = Counter(), {}
    for seed in range(n):
        inst = random_instance(seed, coherent=coherent)
        for name, v in check_statements(inst, coherent=coherent).items():
            if not v.ok:
                fails[name] += 1
                first.setdefault(name, (seed, v.counterexample))
    return fails, first


def synthesized(n: int):
    outcome = Counter()
    for seed in range(n):
        inst = random_instance(seed)
        try:
            ctrl = synthesize_toy(inst, random_outputs(seed, inst.plant))
        except CoverageError:
            outcome["coverage abort"] += 1
            continue
        except SynthesisError:
            outcome["synthesis abort"] += 1
            continue
        outcome["certified" if check_synthesized(inst, ctrl).ok else "FAILED"] += 1
    return outcome


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=300)
    n = ap.parse_args().instances
    t0 = time.perf_counter()
    for label, coherent in (("literal", False), ("witness-coherent", True)):
        fails, first = literal(n, coherent)
        print(f"[{label}] " + ", ".join(f"{s}: {fails[s]}/{n}" for s in STATEMENTS))
        for name, (seed, cex) in sorted(first.items()):
            print(f"    first {name} counterexample: seed {seed}, {cex}")
    print("[runtime synthesis] " + ", ".join(f"{k}: {v}" for k, v in sorted(synthesized(n).items())))
    print(f"elapsed {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

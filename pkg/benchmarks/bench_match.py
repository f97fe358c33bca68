"""Support-counting throughput: numba kernel vs pure-numpy fallback.

Builds a glove-sized workload (synthetic instances, 57 frames, every
length-2 candidate over all states plus random length-3 chains) and times
both backends on identical inputs. Results must agree exactly.

    python benchmarks/bench_match.py --instances 600 --channels 8 --repeats 3
"""
from __future__ import annotations

import argparse
import itertools
import time

import numpy as np

from glovespm import _accel
from glovespm._kernels import match_batch
from glovespm.core import Plant, SyntheticSpec, generate_synthetic
from glovespm.discretize import Alphabet, discretize_dataset
from glovespm.miner import Pattern, PatternMatcher, Relation, State
from glovespm.preprocess import PreprocessConfig, preprocess_dataset


def workload(n_instances, n_channels, n_classes, alphabet, seed):
    per_class = max(1, n_instances // n_classes)
    # class c: high on one channel early (slot shifts once channels run out), low on the next later on
    plants = tuple(
        (Plant(c % n_channels, "high", (2 + 5 * (c // n_channels),) * 2, (4, 8)),
         Plant((c + 1) % n_channels, "low", (30, 36), (4, 8)))
        for c in range(n_classes)
    )
    spec = SyntheticSpec(n_classes, per_class, n_channels, 57, plants, 0.3, seed)
    ds = preprocess_dataset(generate_synthetic(spec), PreprocessConfig(57))
    return discretize_dataset(ds.instances, alphabet)


def candidates(n_channels, alphabet, n_long, rng):
    states = [State(s, c) for c in range(n_channels) for s in alphabet.symbols]
    pats = [Pattern((a, b), (r,)) for a, b in itertools.product(states, states) for r in Relation]
    for _ in range(n_long):
        st = tuple(states[i] for i in rng.integers(len(states), size=3))
        pats.append(Pattern(st, tuple(Relation(int(x)) for x in rng.integers(2, size=2))))
    return pats


def time_backend(index, enc, window, backend, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = match_batch(index, *enc, window, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=600)
    ap.add_argument("--channels", type=int, default=8)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--alphabet", type=int, default=3, choices=(3, 5))
    ap.add_argument("--window", type=int, default=2)
    ap.add_argument("--long", type=int, default=2000, help="number of random length-3 patterns")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    alphabet = Alphabet(args.alphabet)
    insts = workload(args.instances, args.channels, args.classes, alphabet, args.seed)
    pats = candidates(args.channels, alphabet, args.long, np.random.default_rng(args.seed))
    matcher = PatternMatcher(insts, alphabet, args.window)
    bins, rels, lens, _ = matcher._encode(pats)
    enc = (bins, rels, lens)
    n_runs = len(matcher.index.starts)

    print(f"instances={len(insts)} channels={args.channels} runs={n_runs} patterns={len(pats)} window={args.window}")
    t_np, out_np = time_backend(matcher.index, enc, args.window, "numpy", args.repeats)
    print(f"backend=numpy seconds={t_np:.4f} patterns_per_sec={len(pats) / t_np:.0f}")
    if not _accel.USE_NUMBA:
        print("backend=numba skipped (numba missing or GLOVESPM_DISABLE_NUMBA set)")
        return 0
    t0 = time.perf_counter()
    match_batch(matcher.index, bins[:1], rels[:1], lens[:1], args.window, backend="numba")
    print(f"numba_compile_seconds={time.perf_counter() - t0:.4f}")
    t_nb, out_nb = time_backend(matcher.index, enc, args.window, "numba", args.repeats)
    print(f"backend=numba seconds={t_nb:.4f} patterns_per_sec={len(pats) / t_nb:.0f}")
    print(f"speedup={t_np / t_nb:.2f} agree={bool(np.array_equal(out_np, out_nb))}")
    return 0 if np.array_equal(out_np, out_nb) else 1


if __name__ == "__main__":
    raise SystemExit(main())

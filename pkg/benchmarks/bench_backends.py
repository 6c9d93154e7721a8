"""Time the numba and pure-numpy kernel backends on a synthetic corpus.

    python benchmarks/bench_backends.py --conversations 5000 --repeats 5
"""
import argparse
import time

import numpy as np

from dst_eval import _kernels as K
from dst_eval.metrics import classify_turns
from dst_eval.model import DEFAULT_POLICY
from dst_eval.synth import SynthConfig, generate


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--conversations", type=int, default=5000)
    parser.add_argument("--turns", type=int, nargs=2, default=(5, 15), metavar=("MIN", "MAX"))
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    convs = generate(SynthConfig(seed=args.seed, conversations=args.conversations,
                                 turns_per_conversation=tuple(args.turns), n_domains=5, n_slots=6,
                                 p_type1=0.1, p_drop=0.05, p_spurious=0.05, p_overwrite=0.1))
    t0 = time.perf_counter()
    enc = K.encode_corpus(convs, DEFAULT_POLICY.is_empty)
    t_encode = time.perf_counter() - t0
    print(f"corpus: {enc.n_conversations} conversations, {enc.n_turns} turns (encode {t_encode:.3f}s)")

    results = {}
    if K.HAVE_NUMBA:
        # first call compiles (or loads the on-disk cache)
        t0 = time.perf_counter()
        K.classify(enc, K.turn_stats(enc, "numba"), "numba")
        print(f"numba warm-up: {time.perf_counter() - t0:.3f}s")
    for backend in ("numba", "numpy") if K.HAVE_NUMBA else ("numpy",):
        stats = K.turn_stats(enc, backend)
        t_stats = best_of(lambda: K.turn_stats(enc, backend), args.repeats)
        t_cls = best_of(lambda: K.classify(enc, stats, backend), args.repeats)
        results[backend] = (stats, K.classify(enc, stats, backend))
        print(f"{backend:>6}: turn_stats {t_stats * 1e3:9.2f} ms   classify {t_cls * 1e3:8.2f} ms   "
              f"({enc.n_turns / (t_stats + t_cls):,.0f} turns/s)")

    t_sets = best_of(lambda: [classify_turns(c) for c in convs], 1)
    print(f"  sets: classify_turns {t_sets * 1e3:9.2f} ms (pure Python reference)")

    if len(results) == 2:
        a, b = results["numba"], results["numpy"]
        same = np.array_equal(a[0], b[0]) and all(np.array_equal(x, y) for x, y in zip(a[1], b[1]))
        print(f"backends agree: {same}")


if __name__ == "__main__":
    main()

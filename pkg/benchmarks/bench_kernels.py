"""Compare the two window-counting backends on a synthetic corpus.

The accelerated backend trades JIT warmup for per-call speed, so both a
cold first call and steady-state repeats are reported. Run from the
repository root:

    python3 benchmarks/bench_kernels.py --paths 2000 --vocab 600
"""

import argparse
import os
import random
import statistics
import time

import numpy as np

from pathlab._kernels import KERNEL_ENV, window_counts


def synthetic_corpus(n_paths: int, vocab: int, seed: int) -> list[np.ndarray]:
    rng = random.Random(seed)
    out = []
    for _ in range(n_paths):
        n = rng.randrange(20, 400)
        # skewed draw: low ids dominate, like common opcodes do
        ids = np.array(
            [min(int(rng.expovariate(8.0) * vocab), vocab - 1) for _ in range(n)],
            np.int64,
        )
        out.append(ids)
    return out


def run_backend(name: str, corpus, window: int, vocab: int, repeats: int):
    os.environ[KERNEL_ENV] = name
    cold_start = time.perf_counter()
    window_counts(corpus[0], window, vocab)
    cold = time.perf_counter() - cold_start

    timings = []
    for _ in range(repeats):
        started = time.perf_counter()
        for ids in corpus:
            window_counts(ids, window, vocab)
        timings.append(time.perf_counter() - started)
    return cold, timings


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=2000)
    parser.add_argument("--vocab", type=int, default=600)
    parser.add_argument("--window", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    corpus = synthetic_corpus(args.paths, args.vocab, args.seed)
    tokens = sum(len(ids) for ids in corpus)
    print(
        f"corpus: {args.paths} paths, {tokens} tokens, "
        f"vocab {args.vocab}, window {args.window}"
    )

    backends = ["numpy"]
    try:
        import numba  # noqa: F401

        backends.append("numba")
    except ImportError:
        print("numba not importable; benchmarking the portable backend only")

    results = {}
    for name in backends:
        cold, timings = run_backend(name, corpus, args.window, args.vocab, args.repeats)
        best = min(timings)
        results[name] = best
        print(
            f"{name:>6}: cold first call {cold * 1e3:8.1f} ms | "
            f"best of {args.repeats} sweeps {best * 1e3:8.1f} ms | "
            f"median {statistics.median(timings) * 1e3:8.1f} ms"
        )

    if len(results) == 2:
        ratio = results["numpy"] / results["numba"]
        faster = "numba" if ratio > 1 else "numpy"
        print(f"steady-state: {faster} is {max(ratio, 1 / ratio):.1f}x faster here")

    os.environ.pop(KERNEL_ENV, None)


if __name__ == "__main__":
    main()

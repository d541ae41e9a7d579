"""Time the recurrent scan kernels on each available backend.

Usage: python benchmarks/bench_kernels.py [--T 400] [--H 64 128] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tablegru import kernels
from tablegru.model import ModelConfig, forward, init_params
from tablegru.train import backward


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def scan_cases(T, H, rng):
    xg3 = rng.normal(size=(T, 3 * H))
    u3 = rng.normal(scale=0.3, size=(3 * H, H))
    xg4 = rng.normal(size=(T, 4 * H))
    u4 = rng.normal(scale=0.3, size=(4 * H, H))
    dhs = rng.normal(size=(T, H))
    gates3, hs3 = kernels.gru_forward(xg3, u3)
    gates4, hs4, cs4 = kernels.lstm_forward(xg4, u4)
    return {
        "gru forward": lambda: kernels.gru_forward(xg3, u3),
        "gru backward": lambda: kernels.gru_backward(dhs, gates3, hs3, u3),
        "lstm forward": lambda: kernels.lstm_forward(xg4, u4),
        "lstm backward": lambda: kernels.lstm_backward(dhs, gates4, hs4, cs4, u4),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--T", type=int, default=400, help="sequence length")
    parser.add_argument("--H", type=int, nargs="+", default=[64, 128], help="hidden sizes")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}; T={args.T}; best of {args.repeat}")
    header = f"{'case':28s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10s}"
    print(header)
    previous = kernels.BACKEND
    try:
        for H in args.H:
            results = {}
            for b in backends:
                kernels.use_backend(b)
                # cases are rebuilt per backend so cached gates come from it
                cases = scan_cases(args.T, H, np.random.default_rng(0))
                cfg = ModelConfig("column", "gru", 128, H)
                params = init_params(cfg, 0)
                image = (np.random.default_rng(1).random((128, args.T)) < 0.3).astype(float)
                labels = np.random.default_rng(2).integers(0, 2, args.T)
                cases["model forward"] = lambda: forward(image, params)
                cases["model forward+backward"] = lambda: backward(image, labels, params)
                for name, fn in cases.items():
                    fn()
                    results.setdefault(name, {})[b] = best_of(fn, args.repeat)
            for name, per in results.items():
                line = f"{name + f' H={H}':28s}" + "".join(f"{per[b] * 1e3:10.2f}ms"
                                                            for b in backends)
                if len(backends) > 1:
                    line += f"{per['python'] / per['compiled']:9.1f}x"
                print(line)
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    main()

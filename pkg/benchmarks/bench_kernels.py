"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from raceway_empc.kernels import available_backends, load_backend, pack_params
from raceway_empc.params import Config

CFG = Config()
P = pack_params(CFG.model, CFG.gas, CFG.cost)

STATE = np.array([0.8, 0.12, 24.0, 140.0, 12.0])
INPUT = np.array([250.0, 3.0, 20.0, 10.0])
WEATHER = np.array([900.0, 22.0, 19.0, 3.0, 50.0])

# one full-horizon prediction: 24 steps of 300 s, 6 blocked moves of 4 steps each
N, NC, BLK = 24, 6, 4
X0 = STATE[:4].copy()
MOVES = np.column_stack([np.full(NC, 250.0), np.full(NC, 20.0), np.full(NC, 10.0)])
DIST = np.column_stack([np.linspace(900, 200, N), np.full(N, 22.0), np.full(N, 19.0),
                        np.full(N, 3.0), np.full(N, 50.0)])


def cases(be):
    return {
        "plant_step": (lambda: be.plant_step(STATE, INPUT, WEATHER, WEATHER, WEATHER, 30.0, P), 2000),
        "predict": (lambda: be.predict(X0, MOVES, BLK, N, DIST, P, 60.0, 5), 50),
        "predict_jac": (lambda: be.predict_jac(X0, MOVES, BLK, N, DIST, P, 60.0, 5, 1e-6), 5),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = available_backends()
    timings = {}
    for name in backends:
        for case, (fn, number) in cases(load_backend(name)).items():
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            timings[name, case] = best

    print(f"{'kernel':<12}" + "".join(f"{b:>14}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for case in ("plant_step", "predict", "predict_jac"):
        row = f"{case:<12}" + "".join(f"{timings[b, case] * 1e6:>11.1f} us" for b in backends)
        if "cython" in backends and "python" in backends:
            row += f"{timings['python', case] / timings['cython', case]:>9.1f}x"
        print(row)
    if len(backends) == 1:
        print("compiled kernels not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()

"""Compiled vs pure-Python closed-loop throughput.

    python benchmarks/bench_kernels.py [--seconds 20] [--repeat 3]

Reports steps per second for each backend on a few representative loops
and the speedup of the compiled core.
"""

import argparse
import timeit

from sourceseek import Pose
from sourceseek._kernels import available_backends
from sourceseek.averaging import AveragedState, AveragingParams, integrate_averaged
from sourceseek.controller_esc import EscController, EscParams
from sourceseek.controller_ga import GaController, GaGains
from sourceseek.field import NonQuadA, Quadratic
from sourceseek.sensors import SensorArray, SensorCalibration
from sourceseek.vehicle import simulate

DT = 1e-3


def cases(t_end):
    ga = GaController(GaGains(1.0, 10.0))
    esc_p = EscParams(0.2, 10.0, 3.0, 0.5, 0.5, 1.0, 20.0)
    noisy = SensorArray(SensorCalibration(noise_std=0.05), seed=1)
    avg_p = AveragingParams.from_esc(esc_p, Quadratic())
    avg0 = AveragedState.from_heading(-7.0, 6.2, 1.57)
    n = int(round(t_end / DT))
    return {
        "ga/quadratic": (n, lambda b: simulate(Quadratic(), ga, Pose(4, 3, 0.5), DT, t_end, record_every=n, backend=b)),
        "ga/nonquad_a": (n, lambda b: simulate(NonQuadA(), ga, Pose(0.9, 0.6, 0.5), DT, t_end, record_every=n, backend=b)),
        "esc/quadratic": (n, lambda b: simulate(Quadratic(), EscController(esc_p), Pose(-7, 6, 1.57), DT, t_end,
                                                record_every=n, backend=b)),
        "ga/sensor+noise": (n, lambda b: simulate(Quadratic(), ga, Pose(4, 3, 0.5), DT, t_end, noisy, record_every=n,
                                                  backend=b)),
        "averaged": (n, lambda b: integrate_averaged(avg0, avg_p, n * 0.01, 0.01, record_every=n, backend=b)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=20.0, help="simulated time per case")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; only the fallback will be timed")
    print(f"{'case':<18}" + "".join(f"{b + ' steps/s':>22}" for b in backends) + f"{'speedup':>10}")
    for name, (steps, run) in cases(args.seconds).items():
        rates = {}
        for b in backends:
            best = min(timeit.repeat(lambda: run(b), number=1, repeat=args.repeat))
            rates[b] = steps / best
        line = f"{name:<18}" + "".join(f"{rates[b]:>22,.0f}" for b in backends)
        if "compiled" in rates:
            line += f"{rates['compiled'] / rates['python']:>9.0f}x"
        print(line)


if __name__ == "__main__":
    main()

"""Compiled kernels against the numpy fallback on the reference workload.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each row reports the best wall time per backend and the largest absolute
difference between their outputs.
"""
import argparse
import sys
import time

import numpy as np

from optophonon import MomentState, kernels
from optophonon.config import default_config
from optophonon.cli import make_rate_source, make_table
from optophonon.oracle import EffectiveGenerator, LadderRHS
from optophonon.rates import ExactRates, _kernel_arrays


def best_of(repeat, fn):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def workloads(quick):
    cfg = default_config()
    p = cfg.params
    table = make_table(cfg)
    profile = make_rate_source(cfg, table)
    exact = ExactRates(p, table)
    m, cwg, cwo, c = _kernel_arrays(p, table)
    times = np.linspace(0.0, 2.0 * np.pi, 4096)
    y0 = MomentState.reference(p.nbar).to_array()
    t_moments = np.arange(0.0, (20.0 if quick else 100.0) + 1e-9, 0.05)

    cutoff = 40 if quick else 80
    gen = EffectiveGenerator(p, profile, cutoff)
    ladder = LadderRHS(p, profile, cutoff, populations_only=True)
    blocks = ladder.to_blocks(gen.initial_state())
    full = np.ascontiguousarray(LadderRHS(p, profile, cutoff).to_blocks(gen.initial_state()))
    span = 0.5 if quick else 2.0

    def moments(impl, source):
        mode, a, b, cc, per = source.kernel_args()
        return impl.integrate_moments(y0, t_moments, p.lam, p.omega_ph, p.kappa, p.nbar,
                                      mode, a, b, cc, per, 1e-9, 10**7)[0]

    def advance(impl):
        mode, a, b, cc, per = profile.kernel_args()
        return impl.ladder_advance(blocks, 0.0, span, 1e-3, 1e-9, 1e-11, p.lam, p.omega_ph,
                                   ladder.r_down, ladder.r_up, mode, a, b, cc, per, 10**7)[0]

    return [
        ("rates_factorized (4096 t)", lambda impl: impl.rates_factorized(m, cwg, cwo, c, 1.0, times)[0]),
        (f"integrate_moments profile (t={t_moments[-1]:g})", lambda impl: moments(impl, profile)),
        (f"integrate_moments exact (t={t_moments[-1]:g})", lambda impl: moments(impl, exact)),
        (f"lindblad_ladder x100 (N={cutoff})",
         lambda impl: [impl.lindblad_ladder(full, 0.01, 0.0, p.lam, p.omega_ph, 2.0, 1.0)
                       for _ in range(100)][-1]),
        (f"ladder_advance (N={cutoff}, t={span:g})", advance),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args(argv)
    if kernels.compiled is None:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
        return 1
    print(f"{'kernel':<44}{'compiled [s]':>14}{'python [s]':>14}{'speedup':>10}{'max diff':>12}")
    for name, fn in workloads(args.quick):
        tc, oc = best_of(args.repeat, lambda: fn(kernels.compiled))
        tp, op = best_of(args.repeat, lambda: fn(kernels._fallback))
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))))
        print(f"{name:<44}{tc:>14.4f}{tp:>14.4f}{tp / tc:>10.1f}{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

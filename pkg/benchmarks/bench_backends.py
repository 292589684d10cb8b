#!/usr/bin/env python3
"""Time the projection sweep on the compiled kernels against the numpy path.

    python3 benchmarks/bench_backends.py [--p 200] [--n 250] [--cells 600]

Both backends see the same projections, so the script also reports the
largest difference between their Q matrices.
"""
import argparse
import os
import time

import numpy as np

from sharpssl.base_em import EmConfig
from sharpssl.projections import SeededRng, sample_projection_indices
from sharpssl.sharp_ssl import SharpConfig, sweep
from sharpssl.synth import build_figure2_spec, sample


def timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--cells", type=int, default=600, help="A * B projections per sweep")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = build_figure2_spec(args.p, 4.0, gamma=0.05)
    ds, _ = sample(spec, args.n, SeededRng(1))
    B = 20
    A = max(1, args.cells // B)
    idx = sample_projection_indices(0, ds.p, 3, A, B)
    bases = {
        "lda": "lda",
        "em-hier": EmConfig(T=100),
        "em-sphere-M3": EmConfig(M=3, T=100, init="sphere"),
    }
    print(f"n={ds.n} p={ds.p} cells={A * B} d=3 (best of {args.repeat})")
    print(f"{'base':<14}{'numba s':>10}{'numpy s':>10}{'speed-up':>10}{'max |dQ|':>12}")
    for name, base in bases.items():
        cfg = SharpConfig(d=3, ell=3, A=A, B=B, base=base)
        os.environ.pop("SHARPSSL_BACKEND", None)
        sweep(ds, cfg, idx[:1, :1])  # compile outside the timed region
        t_nb, (q_nb, _) = timed(lambda: sweep(ds, cfg, idx), args.repeat)
        os.environ["SHARPSSL_BACKEND"] = "numpy"
        t_np, (q_np, _) = timed(lambda: sweep(ds, cfg, idx), 1)
        os.environ.pop("SHARPSSL_BACKEND")
        diff = float(np.max(np.abs(q_nb - q_np)))
        print(f"{name:<14}{t_nb:>10.3f}{t_np:>10.3f}{t_np / t_nb:>9.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()

"""Time the compiled kernels against their numpy twins and the full RDS pipeline.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Run once with ``RTFA_DISABLE_NUMBA=1`` to time the pipeline on the fallback path.
"""

import argparse
import time

import numpy as np

from rtfa import _kernels as K
from rtfa.ramanujan import build_dictionary, ramanujan_sequence


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_cd(repeat):
    rng = np.random.default_rng(0)
    d = build_dictionary(200, 30, "unit")
    B = np.ascontiguousarray(d.b_matrix)
    y = B[:, [3, 40, 100]] @ np.array([1.0, -2.0, 0.5]) + 0.1 * rng.standard_normal(200)
    col_sq = np.einsum("ij,ij->j", B, B)
    w = np.full(B.shape[1], 2.0)

    def run(kernel):
        return lambda: kernel(B, y, np.zeros(B.shape[1]), w, col_sq, 2000, 1e-8)

    out = {"numpy": best_of(run(K._cd_lasso_numpy), repeat)}
    if K.HAVE_NUMBA:
        out["numba"] = best_of(run(K.numba.njit(cache=True)(K._cd_lasso_loops)), repeat)
    return out


def bench_corr(repeat):
    cp = ramanujan_sequence(12).astype(float)
    cq = ramanujan_sequence(18).astype(float)

    def run(kernel):
        return lambda: kernel(cp, cq, 12, 18, 36, 0)

    out = {"numpy": best_of(run(K._trunc_corr_max_numpy), repeat)}
    if K.HAVE_NUMBA:
        out["numba"] = best_of(run(K.numba.njit(cache=True)(K._trunc_corr_max_loops)), repeat)
    return out


def bench_rds(repeat):
    from rtfa.rds import RDSConfig, rds
    from rtfa.signals import anhm_scene
    from rtfa.tfr import bins_for_width, gaussian_window

    sc = anhm_scene()
    cfg = RDSConfig(p_max=60, f_max_hz=20.0, lam=0.02, hop=10)
    win = gaussian_window(sc.fs, 8.0)
    m = bins_for_width(sc.fs, 0.04)
    return {K.backend(): best_of(lambda: rds(sc.signal, win, m, cfg, sc.fs), max(1, repeat // 2))}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {K.backend()}")
    for name, fn in (("coordinate descent, N=200", bench_cd), ("truncated correlation (12, 18)", bench_corr),
                     ("rds, 20 s at 100 Hz, hop 10", bench_rds)):
        res = fn(args.repeat)
        line = "  ".join(f"{k}={v * 1e3:9.2f} ms" for k, v in res.items())
        if "numba" in res and "numpy" in res:
            line += f"  speedup={res['numpy'] / res['numba']:.1f}x"
        print(f"{name:<32}{line}")


if __name__ == "__main__":
    main()

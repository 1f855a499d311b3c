"""Benchmark the compiled kernel core against the NumPy fallback.

Run from the repository root after building the extension in place:

    python setup.py build_ext --inplace
    PYTHONPATH=src python benchmarks/bench_kernels.py

Times the two hot kernels (fused penalty reduction and batched disc
evaluation) on solver-shaped workloads, and one end-to-end Lempert solve
per backend (toggled via INVMET_FORCE_NUMPY).
"""

import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from invmet import _kernels  # noqa: E402
from invmet.domains import Ball, Polydisc  # noqa: E402


def timeit(fn, repeat=200):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    backs = _kernels.backends()
    rng = np.random.default_rng(0)
    shapes = [
        ("gradient stencil, C^1 disc solve", (31, 9, 1), 128, Polydisc([1.0])),
        ("gradient stencil, C^2 ball solve", (61, 9, 2), 128, Ball(center=[0, 0], radius=1.0)),
        ("restart batch, high degree", (121, 33, 2), 96, Ball(center=[0, 0], radius=1.0)),
    ]
    print(f"available backends: {', '.join(backs)}")
    print()
    header = f"{'workload':40s} " + " ".join(f"{name:>12s}" for name in backs) + f" {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for label, (B, K, n), M, dom in shapes:
        coeffs = 0.3 * (rng.normal(size=(B, K, n)) + 1j * rng.normal(size=(B, K, n)))
        zetas = np.exp(2j * np.pi * np.arange(M) / M)
        atoms = dom.kernel_atoms()
        times = {}
        for name, mod in backs.items():
            times[name] = timeit(lambda m=mod: m.penalty_batch(coeffs, zetas, *atoms))
        row = f"penalty_batch {label:26s} " + " ".join(f"{times[n_] * 1e6:10.1f}us" for n_ in backs)
        if "cython" in times:
            row += f" {times['numpy'] / times['cython']:8.2f}x"
        print(row)
        for name, mod in backs.items():
            times[name] = timeit(lambda m=mod: m.eval_disc_batch(coeffs, zetas))
        row = f"eval_disc_batch {label:24s} " + " ".join(f"{times[n_] * 1e6:10.1f}us" for n_ in backs)
        if "cython" in times:
            row += f" {times['numpy'] / times['cython']:8.2f}x"
        print(row)


def bench_end_to_end():
    print()
    print("end-to-end Lempert solve (ball in C^2, 3 pairs):", flush=True)
    script = (
        "import time, numpy as np;"
        "from invmet.domains import Ball, sample_pair_near;"
        "from invmet.extremal import lempert_upper, SolverConfig;"
        "from invmet import kernel_backend;"
        "D = Ball(center=[0,0], radius=1.0);"
        "cfg = SolverConfig(restarts=4, maxiter=60);"
        "pairs = [sample_pair_near(D, None, 0.05, 0.8, seed=s) for s in range(3)];"
        "[lempert_upper(D, z, w, cfg) for z, w in pairs];"
        "t0 = time.perf_counter();"
        "[lempert_upper(D, z, w, cfg) for z, w in pairs];"
        "print('  backend %-6s: %.2f s' % (kernel_backend(), time.perf_counter() - t0))"
    )
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(
        [os.path.join(os.path.dirname(__file__), "..", "src"), env.get("PYTHONPATH", "")]
    )
    for force in ("0", "1"):
        env["INVMET_FORCE_NUMPY"] = force
        subprocess.run([sys.executable, "-c", script], env=env, check=False)


if __name__ == "__main__":
    bench_kernels()
    bench_end_to_end()

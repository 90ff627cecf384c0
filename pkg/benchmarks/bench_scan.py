"""Benchmark the compiled scan kernels against the pure-NumPy fallback.

Times the forward/backward recurrent scans at several shapes and one full
training step through the temporal model with each backend.

Usage::

    python benchmarks/bench_scan.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from spotkd._kernels import BACKEND, numpy_backend

try:
    from spotkd._kernels import _scan as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_scans(repeats):
    rng = np.random.default_rng(0)
    shapes = [(16, 4, 8), (64, 8, 32), (64, 8, 64), (128, 16, 32)]
    print(f"{'shape (T,B,H)':<16} {'direction':<9} {'numpy':>12} {'cython':>12} {'speedup':>9}")
    for t_len, batch, hidden in shapes:
        xproj = np.ascontiguousarray(rng.normal(size=(t_len, batch, hidden)))
        rec_w = np.ascontiguousarray(rng.normal(size=(hidden, hidden)) * 0.3)
        dh = np.ascontiguousarray(rng.normal(size=(t_len, batch, hidden)))
        h = numpy_backend.scan_forward(xproj, rec_w)

        rows = [("forward", lambda b: b.scan_forward(xproj, rec_w)),
                ("backward", lambda b: b.scan_backward(h, rec_w, dh))]
        for name, call in rows:
            t_np = timeit(lambda: call(numpy_backend), repeats)
            if compiled is not None:
                t_cy = timeit(lambda: call(compiled), repeats)
                ratio = f"{t_np / t_cy:8.2f}x"
                cy_str = f"{t_cy * 1e6:10.1f}us"
            else:
                ratio, cy_str = "     n/a", "       n/a"
            print(f"{str((t_len, batch, hidden)):<16} {name:<9} "
                  f"{t_np * 1e6:10.1f}us {cy_str} {ratio}")


def bench_training_step(repeats):
    import os
    import subprocess
    import sys

    code = r"""
import time
import numpy as np
from spotkd.nn import EncoderArch, ModelArch, init_model, forward_batch, backward_batch, opt_step
from spotkd.losses import coarse_loss_grad, fine_loss_grad
from spotkd._kernels import BACKEND

rng = np.random.default_rng(0)
arch = ModelArch("single", (EncoderArch(12, 32, 32),), n_fine=14)
state = init_model(arch, 0)
x = rng.normal(size=(8, 64, 12))
y_c = rng.integers(0, 2, size=(8, 64))
y_f = rng.integers(0, 2, size=(8, 64, 14)).astype(float)

def step():
    fwd = forward_batch(state, x)
    _, dc = coarse_loss_grad(fwd.coarse, y_c, 5.0)
    _, df = fine_loss_grad(fwd.fine, y_f)
    grads = backward_batch(state, fwd, dcoarse=dc, dfine=df)
    opt_step(state, grads, 1e-3, weight_decay=0.01)

step()
start = time.perf_counter()
for _ in range(REPEATS):
    step()
print(f"{BACKEND}: {(time.perf_counter() - start) / REPEATS * 1e3:.3f} ms/step")
"""
    code = code.replace("REPEATS", str(repeats))
    print("\nfull training step (B=8, T=64, H=32, E=32, C=14):")
    for force in ("0", "1"):
        env = dict(os.environ, SPOTKD_PURE_PYTHON=force)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        print(" ", out.stdout.strip() or out.stderr.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()
    print(f"active backend at import: {BACKEND}")
    if compiled is None:
        print("compiled kernel unavailable; showing numpy fallback timings only")
    bench_scans(args.repeats)
    bench_training_step(args.repeats)


if __name__ == "__main__":
    main()

"""Compare the compiled assembly kernel against the NumPy fallback.

Times the raw kernel on the exact array shapes the form assembly produces,
checks both produce the same matrices, then times an end-to-end mode
assembly with each backend swapped in.

Run from the repository root:  python benchmarks/bench_assembly.py
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from zpinchstab import backend
from zpinchstab import _asm_py
from zpinchstab.equilibrium import PressureProfile, build_equilibrium
from zpinchstab.forms import ModePair, assemble_mode_forms
from zpinchstab.mesh import make_grid, plasma_space, vacuum_space

try:
    from zpinchstab import _asm_c
except ImportError:
    _asm_c = None


def kernel_inputs(n_elements: int, rng: np.random.Generator):
    """Synthetic term-list arrays with the production shapes:
    P2 basis (A=3), three fields, five quadrature points, ~14 terms."""
    T, E, Q, A, F = 14, n_elements, 5, 3, 3
    w = rng.random((E, Q)) + 0.5
    coeff = rng.standard_normal((T, E, Q))
    alpha = rng.standard_normal((T, E, Q, F))
    beta = rng.standard_normal((T, E, Q, F))
    # roughly half the (term, field) slots are structurally zero in practice
    mask = rng.random((T, 1, 1, F)) < 0.5
    alpha *= mask
    beta *= mask
    phi = rng.standard_normal((E, Q, A))
    dphi = rng.standard_normal((E, Q, A))
    return w, coeff, alpha, beta, phi, dphi


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    args = ap.parse_args()

    if _asm_c is None:
        print("compiled kernel not built; timing the fallback only")
    rng = np.random.default_rng(42)

    print(f"{'E':>6} {'python':>12} {'cython':>12} {'speedup':>9}   agreement")
    for n in args.sizes:
        inputs = kernel_inputs(n, rng)
        t_py = best_of(lambda: _asm_py.accumulate_forms(*inputs), args.repeats)
        if _asm_c is not None:
            t_cy = best_of(lambda: _asm_c.accumulate_forms(*inputs), args.repeats)
            a = _asm_py.accumulate_forms(*inputs)
            b = np.asarray(_asm_c.accumulate_forms(*inputs))
            diff = np.max(np.abs(a - b)) / np.max(np.abs(a))
            print(f"{n:>6} {t_py*1e3:>10.2f}ms {t_cy*1e3:>10.2f}ms "
                  f"{t_py/t_cy:>8.1f}x   max rel diff {diff:.2e}")
        else:
            print(f"{n:>6} {t_py*1e3:>10.2f}ms {'-':>12} {'-':>9}")

    # end-to-end: one full mode assembly per backend
    eq = build_equilibrium(PressureProfile.parabolic(1.0, 1.0), 2.0, 5.0 / 3.0, 1.0)
    grid = make_grid("plasma", 512, 1.05)
    space = plasma_space(grid, 2, 2)
    vac = vacuum_space(make_grid("vacuum", 64, 1.05, rw=2.0), 2)

    def run():
        assemble_mode_forms(eq, space, ModePair(2, 3), 0.1, 0.1, vac_space=vac)

    saved = backend.accumulate_forms
    try:
        backend.accumulate_forms = _asm_py.accumulate_forms
        t_py = best_of(run, args.repeats)
        line = f"mode assembly (512 elements): python {t_py*1e3:.1f}ms"
        if _asm_c is not None:
            backend.accumulate_forms = _asm_c.accumulate_forms
            t_cy = best_of(run, args.repeats)
            line += f", cython {t_cy*1e3:.1f}ms ({t_py/t_cy:.1f}x)"
        print(line)
    finally:
        backend.accumulate_forms = saved


if __name__ == "__main__":
    main()

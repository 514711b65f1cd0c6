"""Wall time of the compiled and pure-Python propagation backends.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import time

import numpy as np

from cavityqc import integrator
from cavityqc.protocol import Device, cnot_atom_to_cavity, cnot_cavity_to_atom
from cavityqc.protocol.calibration import _pair_layout


def cases(device):
    lay = _pair_layout(device)
    yield "atom->cavity pulse", cnot_atom_to_cavity(device, "a", "c").hamiltonian(lay)
    yield "cavity->atom pulse", cnot_cavity_to_atom(device, "a", "c").hamiltonian(lay)


def time_backend(name, h, window, repeat):
    integrator.set_backend(name)
    best = np.inf
    for _ in range(repeat):
        integrator._cached_pair_propagator.cache_clear()
        t0 = time.perf_counter()
        u = integrator.pair_propagator(h, window)
        best = min(best, time.perf_counter() - t0)
    return best, u


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    device = Device()
    backends = integrator.available_backends()
    original = integrator.get_backend()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max |dU|':>12}")
    try:
        for label, h in cases(device):
            res = {b: time_backend(b, h, device.window(), args.repeat) for b in backends}
            row = f"{label:<22}" + "".join(f"{res[b][0]:>11.3f}s" for b in backends)
            if len(backends) == 2:
                speed = res["python"][0] / res["compiled"][0]
                diff = np.max(np.abs(res["python"][1] - res["compiled"][1]))
                row += f"{speed:>9.1f}x{diff:>12.1e}"
            print(row)
    finally:
        integrator.set_backend(original)


if __name__ == "__main__":
    main()

"""Time the hot kernels with numba on and off.

Each backend runs in a fresh interpreter because the switch is read at import:

    python benchmarks/bench_kernels.py --repeat 3
"""
import argparse
import json
import os
import subprocess
import sys
import time

_WORKLOAD = r"""
import json, sys, time
import numpy as np
from aerobat_guard import _accel, aero, coupled, rom
from aerobat_guard.guard import GuardParams

repeat, steps = int(sys.argv[1]), int(sys.argv[2])
gp, ap = GuardParams(), rom.AerobatParams(band_damping=0.5)
pack = coupled.build_pack(gp, ap, aero.BladeGeometry.uniform_theta(4, semispan=ap.semispan))
gait = rom.GaitParams(amplitude=(0.3, 0.2)).as_array()
x0 = coupled.initial_state(pack, aerobat_q=rom.equilibrium(np.zeros(3), np.eye(3), ap).q)
thr = np.full(6, (gp.mass + ap.total_mass) * 9.8 / 6)
geom = aero.BladeGeometry.uniform_theta(8)

def coupled_run():
    coupled.advance(x0, 0.0, 1e-4, steps, thr, np.zeros(3), np.zeros(3), gait, pack)

def aero_run():
    aero.march(geom, 1.0, steps * 1e-4, 1e-4)

out = {"numba": _accel.USE_NUMBA}
for name, fn in (("coupled.advance", coupled_run), ("aero.march n=8", aero_run)):
    t0 = time.perf_counter(); fn(); first = time.perf_counter() - t0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    out[name] = {"first": first, "best": min(times)}
print(json.dumps(out))
"""


def run_backend(flag, repeat, steps):
    env = dict(os.environ, AEROBAT_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", _WORKLOAD, str(repeat), str(steps)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions after warm-up")
    ap.add_argument("--steps", type=int, default=2000, help="integration steps per call (dt = 1e-4)")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    jit = run_backend("1", args.repeat, args.steps)
    ref = run_backend("0", args.repeat, args.steps)
    print(f"{'kernel':<18} {'numba first':>12} {'numba best':>11} {'numpy best':>11} {'speed-up':>9}")
    for name in (k for k in jit if k != "numba"):
        j, r = jit[name], ref[name]
        print(f"{name:<18} {j['first']:12.3f} {j['best']:11.4f} {r['best']:11.4f} {r['best'] / j['best']:8.1f}x")
    if not jit["numba"]:
        print("note: numba unavailable, both columns ran the numpy path")
    print(f"({args.steps} steps per call, total wall {time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Compare the compiled and interpreted kernel backends.

Generates a few dungeon worlds, runs the same benchmark plan once with
GG_NUMBA=1 and once with GG_NUMBA=0 in fresh subprocesses, checks that
the result CSVs are byte-identical, and reports wall times. Compilation
happens inside the timed process, so the compiled column includes the
one-time jit cost; pass --repeat to amortise it.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
import tempfile
import time
from pathlib import Path

PLAN = """\
worlds = [{worlds}]
seeds = [1, 2]
algorithms = ["cadence", "dadence", "isda"]
"""


def run_cli(env_extra: dict, *args: str) -> float:
    import os
    env = dict(os.environ, **env_extra)
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "guardgrid.cli", *args],
                   check=True, env=env)
    return time.perf_counter() - t0


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=50)
    ap.add_argument("--seeds", type=int, nargs="+", default=[11, 12])
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tdir = Path(tmp)
        worlds = []
        for seed in args.seeds:
            run_cli({}, "gen", "--size", str(args.size), "--seed", str(seed),
                    "--out", str(tdir))
            worlds.append(f'"d{args.size}_{seed}.world"')
        plan = tdir / "plan.toml"
        plan.write_text(PLAN.format(worlds=", ".join(worlds)))

        results = {}
        for label, flag in (("numba", "1"), ("interpreted", "0")):
            out = tdir / f"{label}.csv"
            best = None
            for _ in range(args.repeat):
                dt = run_cli({"GG_NUMBA": flag}, "bench", "--plan", str(plan),
                             "--out", str(out))
                best = dt if best is None else min(best, dt)
            results[label] = (best, out.read_bytes())

        same = results["numba"][1] == results["interpreted"][1]
        print(f"{'backend':<12} {'seconds':>9}")
        for label, (dt, _) in results.items():
            print(f"{label:<12} {dt:>9.2f}")
        print(f"identical csv output: {same}")
        return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Wall-clock timing of the full rho_q(s) surface.

    python scripts/benchmark_surface.py --length 1000000 --workers 1 4
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

from rhoq.detrended import DetrendConfig, default_scale_grid, rho_q
from rhoq.synth import gaussian_pair


@dataclass
class BenchConfig:
    length: int = 10**6
    workers: tuple[int, ...] = (1, 4)
    repeats: int = 3
    seed: int = 0


def bench(cfg: BenchConfig) -> dict[int, float]:
    x, y = gaussian_pair(0.5, cfg.length, cfg.seed)
    grid = default_scale_grid(cfg.length)
    dcfg = DetrendConfig(2, (1.0, 2.0, 4.0))
    best, ref = {}, None
    for w in cfg.workers:
        times = []
        for _ in range(cfg.repeats):
            t = time.perf_counter()
            surf = rho_q(x, y, grid, dcfg, workers=w)
            times.append(time.perf_counter() - t)
        if ref is None:
            ref = surf.rho.tobytes()
        elif surf.rho.tobytes() != ref:
            raise SystemExit(f"workers={w} changed the surface")
        best[w] = min(times)
    print(f"T={cfg.length} scales={len(grid)} ({grid.scales[0]}..{grid.scales[-1]}) q=1,2,4")
    for w, t in best.items():
        print(f"  workers={w}: best of {cfg.repeats} = {t:.2f}s")
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--length", type=int, default=BenchConfig.length)
    p.add_argument("--workers", type=int, nargs="+", default=list(BenchConfig.workers))
    p.add_argument("--repeats", type=int, default=BenchConfig.repeats)
    a = p.parse_args(argv)
    bench(BenchConfig(a.length, tuple(a.workers), a.repeats))


if __name__ == "__main__":
    main()

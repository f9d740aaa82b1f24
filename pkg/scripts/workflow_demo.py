"""End-to-end CLI walkthrough on synthetic data.

Writes a two-regime pair (independent first half, comonotone second half),
then runs every analysis command on it. Outputs land in ``--out``.

    python scripts/workflow_demo.py --out demo_out
"""

from __future__ import annotations

import argparse
import os
from dataclasses import dataclass

from rhoq.cli import main as rhoq


@dataclass
class DemoConfig:
    out: str = "demo_out"
    days: int = 12
    seed: int = 7
    surrogates: int = 20


def run(cfg: DemoConfig) -> None:
    data = os.path.join(cfg.out, "data")
    n = cfg.days * 8640  # 10 s grid, calendar always open
    steps = [
        ["synth", "--kind", "two_regime_pair", "--length", str(n), "--split", "0.5", "--ids", "A,B",
         "--seed", str(cfg.seed), "--out", data],
        ["synth", "--kind", "garch_like", "--length", str(n), "--ids", "G", "--seed", str(cfg.seed), "--out", data],
    ]
    inputs = ["--input", f"A={data}/A.csv", "--input", f"B={data}/B.csv", "--input", f"G={data}/G.csv",
              "--calendar", "always", "--seed", str(cfg.seed)]
    steps += [
        ["pearson", *inputs, "--surrogates", str(cfg.surrogates), "--out", cfg.out],
        ["rho", *inputs, "--surrogates", str(cfg.surrogates), "--spoints", "8", "--out", cfg.out],
        ["rolling", *inputs, "--window", "5d", "--step", "1d", "--out", cfg.out],
        ["events", *inputs, "--anchor", "2022-01-09T12:30:00Z", "--before", "60s", "--after", "300s",
         "--out", cfg.out],
        ["diag", *inputs, "--out", cfg.out],
    ]
    for argv in steps:
        print("$ rhoq", " ".join(argv))
        code = rhoq(argv)
        if code:
            raise SystemExit(code)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default=DemoConfig.out)
    p.add_argument("--days", type=int, default=DemoConfig.days)
    p.add_argument("--surrogates", type=int, default=DemoConfig.surrogates)
    a = p.parse_args(argv)
    run(DemoConfig(a.out, a.days, surrogates=a.surrogates))


if __name__ == "__main__":
    main()

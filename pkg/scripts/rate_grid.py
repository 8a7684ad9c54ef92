#!/usr/bin/env python3
"""Run the bound/distance pipeline over an intensity grid and print the rate fits."""
import argparse
import json
from pathlib import Path

from stein_poisson.experiment import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).parent.parent / "configs/rate_grid.json"))
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    results = run_experiment(cfg, threads=args.threads, emit_plot_data=True)
    print(f"{'n':>6} {'t':>8} {'phi1':>9} {'phi2':>9} {'phi':>9} {'sqrt(n)phi':>11} {'W1':>9}")
    for r in results:
        print(f"{r.n:6.0f} {r.t:8.4f} {r.phi1:9.5f} {r.phi2:9.5f} {r.phi:9.5f} "
              f"{r.phi * r.n ** 0.5:11.4f} {r.w1:9.5f}")
    summary = json.loads((Path(cfg.out) / "summary.json").read_text())
    for key in ("rate_fit_phi", "rate_fit_w1"):
        fit = summary[key]
        print(f"{key}: slope {fit['slope']:+.4f} (r^2 {fit['r_squared']:.4f})")


if __name__ == "__main__":
    main()

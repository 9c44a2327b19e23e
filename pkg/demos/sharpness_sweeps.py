"""Run the standard delta sweeps and print the fitted exponents next to their targets."""

from __future__ import annotations

from fraclab.experiments import STANDARD_SWEEPS, ExperimentConfig, run_experiment


def main():
    for label, over in STANDARD_SWEEPS.items():
        rep = run_experiment(ExperimentConfig.from_dict(over))
        target = rep.metadata.get("expected_slope", rep.metadata.get("slope_bound"))
        shown = "band" if target is None else f"{target:.4f}"
        print(f"{label:18s} slope {rep.fit.slope:8.4f}  target {shown:>8}  r2 {rep.fit.r2:.4f}  "
              f"{'PASS' if rep.passed else 'FAIL'}  ({rep.runtime_s:.1f}s)")
        for d, v in zip(rep.deltas, rep.values):
            print(f"    delta={d:<7g} value={v:.6g}")


if __name__ == "__main__":
    main()

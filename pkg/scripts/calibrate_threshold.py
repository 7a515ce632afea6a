#!/usr/bin/env python3
"""
Calibrate the certificate threshold on Gaussian matrices.

Runs the 2->4 distortion certificate on seeded n x d Gaussian matrices and
prints the spread of certified bounds next to the configured threshold.
"""

import argparse
import os
import sys

import pandas as pd

sys.path.append(os.path.dirname(os.path.abspath(__file__)) + "/../src")

from certify import certify_distortion_24  # noqa: E402
from config import configure_logging, settings  # noqa: E402
from instances import gen_gaussian_null  # noqa: E402


def calibrate(n: int, d: int, seeds: int, seed: int = 0) -> pd.DataFrame:
    """Certified bounds for seeds seed, ..., seed + seeds - 1."""
    rows = []
    for s in range(seed, seed + seeds):
        certified = certify_distortion_24(gen_gaussian_null(n, d, s), seed=s)
        rows.append(
            {
                "seed": s,
                "two_to_four_upper": certified.two_to_four.upper_bound,
                "fourth_power_over_n": certified.two_to_four.upper_bound**4 / n,
                "sigma_min": certified.sigma_min,
                "distortion_upper": certified.upper,
            }
        )
    return pd.DataFrame(rows)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--n", type=int, default=4096)
    parser.add_argument("--d", type=int, default=16)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    configure_logging()

    df = calibrate(args.n, args.d, args.seeds, args.seed)
    print(df.to_string(index=False))
    worst = df["distortion_upper"].max()
    print(f"\nLargest certified distortion: {worst:.6f}")
    print(f"Configured CERTIFY_THRESHOLD: {settings.CERTIFY_THRESHOLD}")
    if worst > settings.CERTIFY_THRESHOLD:
        print("Threshold is below the Gaussian bounds; Gaussian inputs will be answered NO.")


if __name__ == "__main__":
    main()

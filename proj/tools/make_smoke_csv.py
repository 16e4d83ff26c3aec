"""Writes tests/data/smoke200.csv, the small mixed-type table used by the CSV smoke test."""

import csv
import pathlib
import random

REGIONS = ["north", "south", "east", "west"]
SECTORS = ["retail", "tech", "health"]


def main() -> None:
    rng = random.Random(2024)
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "smoke200.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["age", "income", "hours", "region", "tenure", "score", "sector", "churn"])
        for _ in range(200):
            age = rng.randint(18, 70)
            income = round(rng.gauss(52000, 12000), 2)
            hours = round(rng.uniform(5, 60), 1)
            region = rng.choice(REGIONS)
            tenure = rng.randint(0, 30)
            score = round(rng.uniform(0, 1), 3)
            sector = rng.choice(SECTORS)
            risk = (hours - 30) / 10 - (age - 40) / 15 + (1.0 if region == "west" else 0.0) + rng.gauss(0, 0.5)
            w.writerow([age, income, hours, region, tenure, score, sector, "yes" if risk > 0 else "no"])


if __name__ == "__main__":
    main()

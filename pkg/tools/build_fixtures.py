"""Append oracle fixture records to src/icflow/data/oracle_fixtures.txt.

Every value comes from icflow.oracle (meridian-curve formulas and adaptive
quadrature), which shares no code with the library's curvature path.
Existing records are left untouched.

    python tools/build_fixtures.py
"""
from pathlib import Path

from icflow import fixtures, oracle
from icflow.shapes import AxisymEllipsoid, PerturbedSphere

ROOT = Path(__file__).resolve().parents[1]
TARGET = ROOT / "src" / "icflow" / "data" / "oracle_fixtures.txt"

ELLIPSOIDS = [(1.0, 1.5), (1.0, 1.3), (1.0, 2.0)]
ELLIPSOIDS += [(1.0, b) for b in (1.2, 3.0)] + [(b, 1.0) for b in (1.2, 1.5, 2.0, 3.0)]
PERTURBED = [((2, 0.05),), ((2, 0.1),), ((2, 0.15),), ((3, 0.03),), ((3, 0.05),),
             ((3, 0.09),), ((4, 0.03),), ((4, 0.05),), ((2, 0.05), (3, 0.02))]


def main():
    records = []
    for n in (3, 4, 5):
        for a, b in ELLIPSOIDS:
            spec = AxisymEllipsoid(a, b, n=n)
            records.append(fixtures.FixtureRecord(
                fixtures.shape_label(spec), n, oracle.ellipsoid_integrals(a, b, n)))
        for modes in PERTURBED:
            spec = PerturbedSphere(1.0, modes, n=n)
            records.append(fixtures.FixtureRecord(
                fixtures.shape_label(spec), n, oracle.perturbed_integrals(1.0, modes, n)))
    added = fixtures.append_records(TARGET, records)
    print(f"appended {added} records to {TARGET}")


if __name__ == "__main__":
    main()

"""Driving the command-line tool from Python.

Equivalent shell commands::

    icflow verify --config configs/sphere.ini --out out/verify
    icflow flow   --config configs/perturbed_flow.ini --out out/flow
    icflow sweep  --config configs/ellipsoid_sweep.ini --axis shape.b=1.2,1.5,2 --out out/sweep
"""
import csv
import tempfile
from pathlib import Path

from icflow.cli import main

root = Path(__file__).resolve().parents[1] / "configs"
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    print("verify exit:", main(["verify", "--config", str(root / "sphere.ini"), "--out", str(out / "v"), "--quiet"]))
    code = main(["sweep", "--config", str(root / "ellipsoid_sweep.ini"), "--axis", "shape.b=1.2,1.5,2",
                 "--out", str(out / "s"), "--quiet"])
    print("sweep exit:", code)
    with open(out / "s" / "sweep.csv") as fh:
        for row in csv.DictReader(fh):
            if row["check"].startswith("main_1_7"):
                print(f"  b={row['value']} N={row['N']} residual={float(row['residual']):.4g}")

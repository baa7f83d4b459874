"""Regenerates the end-to-end monitoring fixtures in this directory.

ref.csv and calibration.csv share the reference generator; cur_clean.csv is a
fresh draw from it, cur_warn.csv and cur_fail.csv shift x1 by a moderate and a
large amount. The prediction column is the exact regression function, so
residuals do not depend on the inputs.
"""
import csv
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).parent


def draw(rng, n, shift):
    x1 = rng.normal(shift, 1.0, n)
    x2 = rng.normal(0.0, 1.0, n)
    seg = rng.choice(["a", "b", "c"], size=n, p=[0.5, 0.3, 0.2])
    pred = 2.0 * x1 - x2
    y = pred + rng.normal(0.0, 1.0, n)
    return x1, x2, seg, y, pred


def write(name, cols):
    with open(HERE / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "segment", "y", "pred"])
        for x1, x2, seg, y, pred in zip(*cols):
            w.writerow([f"{x1:.6f}", f"{x2:.6f}", seg, f"{y:.6f}", f"{pred:.6f}"])


rng = np.random.default_rng(20240601)
write("ref.csv", draw(rng, 1000, 0.0))
write("calibration.csv", draw(rng, 500, 0.0))
write("cur_clean.csv", draw(rng, 1000, 0.0))
write("cur_warn.csv", draw(rng, 1000, 0.4))
write("cur_fail.csv", draw(rng, 1000, 1.0))

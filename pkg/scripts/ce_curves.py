"""Certainty-equivalent curves for two risk aversions, printed as a table."""

import numpy as np

from regime_futures.hjb import ce_curve
from regime_futures.regime_chain import MeasurePair

if __name__ == "__main__":
    measures = MeasurePair.from_rates([[-0.8, 0.8], [0.6, -0.6]])
    horizons = np.linspace(0.0, 1.0, 11)
    curves = {g: ce_curve([0.1, 0.3], measures, g, 1.0, horizons) for g in (0.5, 2.0)}
    print("horizon   g=0.5 i=1   g=0.5 i=2   g=2 i=1     g=2 i=2")
    for k, h in enumerate(horizons):
        row = [curves[0.5][k, 0], curves[0.5][k, 1], curves[2.0][k, 0], curves[2.0][k, 1]]
        print(f"{h:7.2f}  " + "  ".join(f"{v:10.6f}" for v in row))

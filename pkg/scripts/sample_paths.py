"""Forced-switch sample path (2 -> 1 -> 2) for both models; prints a short digest."""

import numpy as np

from regime_futures.models import RegimeModelSpec
from regime_futures.regime_chain import MeasurePair
from regime_futures.simulate import SimConfig, run_experiment

Q = [[-2.0, 2.0], [4.0, -4.0]]
MODELS = {
    "RS-GBM": (RegimeModelSpec.rs_gbm([-0.2, 0.2], [0.2, 0.3], [0.1, 0.3],
                                      MeasurePair.from_rates(Q)), 0.0),
    "RS-XOU": (RegimeModelSpec.rs_xou([1.0, 2.0], [2.5, 2.7], [0.2, 0.3], [0.1, 0.3],
                                      MeasurePair.from_rates(Q)), 2.7),
}

if __name__ == "__main__":
    for name, (spec, x0) in MODELS.items():
        cfg = SimConfig(spec=spec, maturities=(0.6, 0.8), horizon=0.6, gamma=1.0, x0=x0, i0=2,
                        dt=0.0006, seed=20240611, forced_switches=((0.2, 1), (0.4, 2)))
        path = run_experiment(cfg).path(0)
        print(f"{name}")
        for r in path.switch_rows():
            print(f"  switch at t={path.t[r]:.2f}: spot {path.spot[r]:.4f} -> {path.spot[r + 1]:.4f}, "
                  f"F {np.round(path.futures[r], 4)} -> {np.round(path.futures[r + 1], 4)}, "
                  f"pi {np.round(path.positions[r], 2)} -> {np.round(path.positions[r + 1], 2)}")
        opposite = np.mean(path.positions[:, 0] * path.positions[:, 1] < 0)
        print(f"  opposite-sign share {opposite:.3f}, terminal wealth {path.wealth[-1]:.4f}, "
              f"F1/spot at horizon {path.futures[-1, 0] / path.spot[-1]:.6f}")

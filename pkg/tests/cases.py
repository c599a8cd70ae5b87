"""Parameter sets shared across tests."""

from regime_futures.models import RegimeModelSpec
from regime_futures.regime_chain import MeasurePair

BASE_Q = [[-2.0, 2.0], [4.0, -4.0]]
CE_Q = [[-0.8, 0.8], [0.6, -0.6]]
MATURITIES = (0.6, 0.8)
HORIZON = 0.6


def gbm_base(q_tilde=None):
    return RegimeModelSpec.rs_gbm([-0.2, 0.2], [0.2, 0.3], [0.1, 0.3],
                                  MeasurePair.from_rates(BASE_Q, q_tilde))


def xou_base(kappa=(1.0, 2.0), q_tilde=None):
    return RegimeModelSpec.rs_xou(list(kappa), [2.5, 2.7], [0.2, 0.3], [0.1, 0.3],
                                  MeasurePair.from_rates(BASE_Q, q_tilde))


def ce_measures():
    return MeasurePair.from_rates(CE_Q)

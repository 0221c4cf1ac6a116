"""Convenience wrapper running centering, node-wise fits and the corrected
estimators in one step; shared by inference, the simulation harness and the
CLI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, IndexSet, SymMatrix, center
from .longrun import h_diag_from_v
from .nodewise import LassoConfig, NodewiseFit, fit_all
from .precision import scores_for


@dataclass
class PipelineFit:
    data: Dataset
    fit: NodewiseFit
    v_hat: SymMatrix
    omega_hat: SymMatrix

    def omega_on(self, S: IndexSet) -> np.ndarray:
        """omega_hat restricted to S, in chi order."""
        return self.omega_hat.values[S.rows(), S.cols()]

    def scores(self, S: IndexSet):
        """(eta, h_diag) for the index set S."""
        eta = scores_for(self.fit, self.v_hat, S)
        return eta, h_diag_from_v(self.v_hat, S)


def fit_pipeline(data: Dataset, cfg: LassoConfig = None) -> PipelineFit:
    from .precision import estimate_omega, estimate_v

    cfg = cfg or LassoConfig()
    data = center(data)
    fit = fit_all(data, cfg)
    v = estimate_v(fit)
    return PipelineFit(data=data, fit=fit, v_hat=v, omega_hat=estimate_omega(v))

from __future__ import annotations

from sklearn.base import BaseEstimator

from .model import LakeParams


class LakeEstimator(BaseEstimator):
    """Common parameter handling for the equilibrium solvers.

    Subclasses take ``n``, ``dim``, ``M`` (1-D sediment level), the commonly
    varied constants ``rho``, ``c``, ``alpha`` and an optional ``lake``
    :class:`LakeParams` supplying the remaining ones.
    """

    def lake_params(self) -> LakeParams:
        base = self.lake if self.lake is not None else LakeParams()
        return base.replace(n=self.n, rho=self.rho, c=self.c, alpha=self.alpha)

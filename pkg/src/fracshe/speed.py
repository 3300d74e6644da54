"""Deviation scale ``lambda(eps) = eps^(-rho)``."""

from dataclasses import dataclass

import numpy as np

from .errors import SpeedInvalid


@dataclass(frozen=True)
class SpeedSpec:
    """Power-law speed; ``0 < rho < 1/2`` puts it strictly between the CLT and LDP scales."""

    rho: float

    def lam(self, eps):
        return np.asarray(eps, dtype=float) ** (-self.rho)

    def scale(self, eps):
        """``sqrt(eps) * lambda(eps)``."""
        return np.sqrt(eps) * self.lam(eps)


def validate_speed(rho):
    """Accept ``rho`` in ``]0, 1/2[``.

    Raises
    ------
    SpeedInvalid
        Naming the limit that fails: ``lambda -> inf`` needs ``rho > 0`` and
        ``sqrt(eps) lambda -> 0`` needs ``rho < 1/2``.
    """
    if isinstance(rho, SpeedSpec):
        rho = rho.rho
    rho = float(rho)
    if not np.isfinite(rho):
        raise SpeedInvalid(f"rho={rho} is not finite")
    if rho <= 0:
        raise SpeedInvalid(f"rho={rho}: lambda(eps) = eps^-rho does not tend to infinity "
                           "(central limit regime)")
    if rho >= 0.5:
        raise SpeedInvalid(f"rho={rho}: sqrt(eps)*lambda(eps) = eps^(1/2-rho) does not tend to 0 "
                           "(large deviation regime)")
    return SpeedSpec(rho)

"""Closed-form two-level models used for fitting and as test oracles.

The damped, detuned Rabi formula implemented here is the standard model for
the upper-state population of a two-level system driven at constant strength,

    P(t) = Omega0^2 / (2 Omega^2) * (1 - exp(-t/T2) * cos(Omega t)),

with the generalized Rabi frequency Omega = sqrt(Omega0^2 + (2*Delta)^2).
Delta is the detuning of the applied frequency from half the two-level
splitting, so 2*Delta is the full two-photon detuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RabiParams", "generalized_rabi", "rabi_population"]


@dataclass(frozen=True)
class RabiParams:
    """Parameters of the damped Rabi model.

    Attributes
    ----------
    omega0 : float
        Resonant Rabi frequency (rad/s), >= 0.
    delta : float
        Detuning of the drive from half the transition frequency (rad/s,
        signed; the model depends only on delta**2).
    t2 : float
        Coherence time of the population oscillation envelope (s), > 0.
    """

    omega0: float
    delta: float
    t2: float

    def __post_init__(self):
        if not np.isfinite(self.omega0) or self.omega0 < 0:
            raise ValueError(f"omega0 must be finite and >= 0, got {self.omega0}")
        if not np.isfinite(self.delta):
            raise ValueError(f"delta must be finite, got {self.delta}")
        if not np.isfinite(self.t2) or self.t2 <= 0:
            raise ValueError(f"t2 must be finite and > 0, got {self.t2}")


def generalized_rabi(params: RabiParams) -> float:
    """Generalized Rabi frequency sqrt(omega0^2 + (2*delta)^2) in rad/s."""
    return float(np.hypot(params.omega0, 2.0 * params.delta))


def rabi_population(t, params: RabiParams):
    """Upper-state population of the damped Rabi model at time(s) ``t``.

    Parameters
    ----------
    t : float or array_like
        Time(s) since the drive was switched on (s), >= 0.
    params : RabiParams

    Returns
    -------
    float or ndarray
        Population in [0, omega0^2/Omega^2]; 0 at t = 0.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    omega = generalized_rabi(params)
    if omega == 0.0:
        # No drive and no detuning: population stays in the lower state.
        out = np.zeros_like(t)
        return out if out.ndim else float(out)
    contrast = params.omega0**2 / (2.0 * omega**2)
    p = contrast * (1.0 - np.exp(-t / params.t2) * np.cos(omega * t))
    return p if p.ndim else float(p)

"""Arrival-time densities and total rates for the HOM and no-HOM protocols.

All densities are functions of the arrival-time difference ``tau``.  They are
built from normal densities of standard deviation ``1 / (2 sigma)``:

* coincidence: ``(N(tau; delta) + N(tau; -delta)) / 4 - (alpha/2) e^{-2 sigma^2 delta^2} N(tau; 0)``
* bunching:    same with ``+`` on the visibility term
* no-HOM:      ``N(tau; delta)``

The three-Gaussian form is algebraically identical to the single-exponential
form ``e^{-2 sigma^2 (delta + tau)^2} (1 + e^{8 delta sigma^2 tau} -+ ...)``
but never overflows.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError

PARAMETER_NAMES = ("delta", "alpha", "sigma", "gamma")


@dataclass(frozen=True)
class PhysicalParams:
    """Relative delay, visibility, spectral width and per-photon loss.

    ``delta`` is a time and ``sigma`` an inverse time; any consistent unit
    system works (``sigma = 1`` gives the natural units used by the CLI).
    """

    delta: float = 0.0
    alpha: float = 1.0
    sigma: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in PARAMETER_NAMES:
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"{name} must be a real number, got {value!r}") from None
            object.__setattr__(self, name, value)
        if not math.isfinite(self.delta):
            raise ParameterError(f"delta must be finite, got {self.delta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ParameterError(f"sigma must be positive and finite, got {self.sigma}")

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    def get(self, name: str) -> float:
        if name not in PARAMETER_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def rescaled(self, k: float) -> "PhysicalParams":
        """Same physics in a time unit ``k`` times smaller: delta/k, k*sigma."""
        return self.replace(delta=self.delta / k, sigma=self.sigma * k)

    @property
    def width(self) -> float:
        """Standard deviation ``1/(2 sigma)`` of the arrival-time Gaussians."""
        return 0.5 / self.sigma

    @property
    def overlap(self) -> float:
        """Visibility-weighted mode overlap ``alpha exp(-2 sigma^2 delta^2)``."""
        return self.alpha * math.exp(-2.0 * (self.sigma * self.delta) ** 2)


@dataclass(frozen=True)
class SpectrumNote:
    """Pump frequency, kept for provenance only.

    It is a global phase of the biphoton state and cancels from every
    observable, so nothing in the package reads it.
    """

    pump_frequency: Optional[float] = None


def _gauss(tau, mu, sigma):
    # normal pdf with std 1/(2 sigma)
    return math.sqrt(2.0 / math.pi) * sigma * np.exp(-2.0 * sigma * sigma * (tau - mu) ** 2)


def _pair_terms(p: PhysicalParams, tau):
    tau = np.asarray(tau, dtype=float)
    direct = 0.25 * (_gauss(tau, p.delta, p.sigma) + _gauss(tau, -p.delta, p.sigma))
    cross = 0.5 * p.overlap * _gauss(tau, 0.0, p.sigma)
    return direct, cross


def coincidence_density(p: PhysicalParams, tau):
    """Density of photons leaving different ports with arrival difference ``tau``."""
    direct, cross = _pair_terms(p, tau)
    out = np.maximum(direct - cross, 0.0)
    return out if out.ndim else float(out)


def bunching_density(p: PhysicalParams, tau):
    """Density of both photons leaving the same port with arrival difference ``tau``."""
    direct, cross = _pair_terms(p, tau)
    out = direct + cross
    return out if out.ndim else float(out)


def total_rates(p: PhysicalParams):
    """Return ``(P_c_tot, P_b_tot)``; they sum to one."""
    x = 2.0 * (p.sigma * p.delta) ** 2
    # 1 - alpha e^{-x} = (1 - alpha) - alpha expm1(-x), exact near the dip floor
    coincidence = 0.5 * ((1.0 - p.alpha) - p.alpha * math.expm1(-x))
    return coincidence, 1.0 - coincidence


def nohom_density(p: PhysicalParams, tau):
    """Density of the signed arrival difference without a beamsplitter; alpha is ignored."""
    out = _gauss(np.asarray(tau, dtype=float), p.delta, p.sigma)
    return out if out.ndim else float(out)

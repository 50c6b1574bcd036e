"""Time-binned outcome distributions for the detector configurations.

Detection times are sorted into bins of width ``T`` whose edges sit at integer
multiples of ``T``.  With the first photon uniformly placed inside its bin, an
arrival difference ``tau`` yields a bin separation ``n`` with the triangular
weight ``max(0, 1 - |tau - nT| / T)``.  For the HOM protocols only ``|n|`` is
observable; the no-HOM protocol keeps the sign.

Distributions are enumerated up to a bin count chosen so that the Gaussian
mass beyond the last edge is below ``tail_mass_tolerance``.  The remaining
mass is reported as an explicit overflow outcome, computed analytically, so
every distribution is complete to rounding.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import ndtri

from . import kernels
from .errors import ConfigError
from .model import PhysicalParams, total_rates


class Protocol(str, enum.Enum):
    HOM = "hom"
    NOHOM = "nohom"


ZERO_CLICKS = "zero_clicks"
ONE_CLICK = "one_click"
COINCIDENCE_SEP = "coincidence_sep"
BUNCH_SEP = "bunch_sep"
TWO_CLICKS_COINCIDENCE = "two_clicks_coincidence"
TWO_CLICKS_BUNCH = "two_clicks_bunch"
TWO_CLICKS = "two_clicks"
NOHOM_SEP = "nohom_sep"
OVERFLOW = "overflow"

OUTCOME_KINDS = (
    ZERO_CLICKS, ONE_CLICK, COINCIDENCE_SEP, BUNCH_SEP, TWO_CLICKS_COINCIDENCE,
    TWO_CLICKS_BUNCH, TWO_CLICKS, NOHOM_SEP, OVERFLOW,
)
INDEXED_KINDS = (COINCIDENCE_SEP, BUNCH_SEP, NOHOM_SEP)


@dataclass(frozen=True, order=True)
class Outcome:
    """One detection record: a kind plus, for timed two-click events, the bin separation."""

    kind: str
    index: Optional[int] = None

    def __post_init__(self):
        if self.kind not in OUTCOME_KINDS:
            raise ConfigError(f"unknown outcome kind {self.kind!r}")
        if self.kind in INDEXED_KINDS:
            if self.index is None:
                raise ConfigError(f"outcome {self.kind} needs a bin index")
            object.__setattr__(self, "index", int(self.index))
            if self.kind != NOHOM_SEP and self.index < 0:
                raise ConfigError(f"outcome {self.kind} needs a nonnegative bin index")
        elif self.index is not None:
            raise ConfigError(f"outcome {self.kind} takes no bin index")

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind}[{self.index}]"


@dataclass(frozen=True)
class BinningConfig:
    bin_width: float
    tail_mass_tolerance: float = 1e-12
    max_bins: Optional[int] = None

    def __post_init__(self):
        try:
            width = float(self.bin_width)
        except (TypeError, ValueError):
            raise ConfigError(f"bin_width must be a number, got {self.bin_width!r}") from None
        if not (width > 0.0 and math.isfinite(width)):
            raise ConfigError(f"bin_width must be positive and finite, got {self.bin_width}")
        object.__setattr__(self, "bin_width", width)
        if not 0.0 < self.tail_mass_tolerance < 1e-3:
            raise ConfigError("tail_mass_tolerance must lie in (0, 1e-3)")
        if self.max_bins is not None and int(self.max_bins) < 1:
            raise ConfigError("max_bins must be a positive integer")

    def bin_cap(self, p: PhysicalParams) -> int:
        if self.max_bins is not None:
            return int(self.max_bins)
        return 10 * math.ceil((abs(p.delta) + 6.0 / p.sigma) / self.bin_width) + 8

    def n_bins(self, p: PhysicalParams) -> int:
        """Largest enumerated separation: mass beyond its far edge is below tolerance."""
        z = -float(ndtri(0.5 * self.tail_mass_tolerance))
        n = math.ceil((abs(p.delta) + z * p.width) / self.bin_width)
        return int(min(max(n, 1), self.bin_cap(p)))


@dataclass(frozen=True)
class DetectorConfig:
    number_resolving: bool = False
    time_resolving: bool = False

    def label(self, protocol: Protocol = Protocol.HOM) -> str:
        if Protocol(protocol) is Protocol.NOHOM:
            return "no-HOM"
        prefix = ("NR" if self.number_resolving else "") + ("TR" if self.time_resolving else "")
        return f"{prefix}-HOM" if prefix else "HOM"


@dataclass(frozen=True)
class Measurement:
    """A complete measurement configuration: detectors, protocol and binning.

    Calling the instance with a :class:`PhysicalParams` returns the outcome
    distribution, which makes it usable as a distribution builder.
    """

    detector: DetectorConfig = field(default_factory=DetectorConfig)
    protocol: Protocol = Protocol.HOM
    binning: Optional[BinningConfig] = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.detector.time_resolving and self.binning is None:
            raise ConfigError("time-resolving detection needs a BinningConfig")

    @property
    def timed(self) -> bool:
        return self.detector.time_resolving

    @property
    def label(self) -> str:
        return self.detector.label(self.protocol)

    @property
    def bin_width(self) -> Optional[float]:
        return self.binning.bin_width if self.timed else None

    def n_bins(self, p: PhysicalParams) -> Optional[int]:
        return self.binning.n_bins(p) if self.timed else None

    def outcomes(self, n_bins: Optional[int] = None) -> Tuple[Outcome, ...]:
        nr = self.detector.number_resolving
        tail = (Outcome(ONE_CLICK), Outcome(ZERO_CLICKS))
        if self.protocol is Protocol.NOHOM:
            if not self.timed:
                return (Outcome(TWO_CLICKS),) + tail
            sep = tuple(Outcome(NOHOM_SEP, n) for n in range(-n_bins, n_bins + 1))
            return sep + tail + (Outcome(OVERFLOW),)
        if not self.timed:
            head = (Outcome(TWO_CLICKS_COINCIDENCE),)
            if nr:
                head += (Outcome(TWO_CLICKS_BUNCH),)
            return head + tail
        head = tuple(Outcome(COINCIDENCE_SEP, n) for n in range(n_bins + 1))
        if nr:
            head += tuple(Outcome(BUNCH_SEP, n) for n in range(n_bins + 1))
        return head + tail + (Outcome(OVERFLOW),)

    def probability_grid(self, p: PhysicalParams, deltas, n_bins: Optional[int] = None) -> np.ndarray:
        """Probabilities for each delay in ``deltas`` (rows), other parameters from ``p``.

        Columns follow :meth:`outcomes` for the given ``n_bins``; when omitted
        the bin count is sized for the largest ``|delta|`` in the grid.
        """
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        if self.timed and n_bins is None:
            n_bins = self.binning.n_bins(p.replace(delta=float(np.max(np.abs(deltas)))))
        a, g, sig = p.alpha, p.gamma, p.sigma
        both = (1.0 - g) ** 2
        one = 2.0 * g * (1.0 - g)
        zero = g * g
        rows = deltas.size

        def col(v):
            return np.full((rows, 1), v)

        if self.protocol is Protocol.NOHOM:
            if not self.timed:
                return np.hstack([col(both), col(one), col(zero)])
            T = self.binning.bin_width
            sep = kernels.tent_mass_grid(deltas, p.width, T, np.arange(-n_bins, n_bins + 1))
            over = kernels.tail_beyond(deltas, p.width, T, n_bins)
            return np.hstack([both * sep, col(one), col(zero), both * over[:, None]])

        x = 2.0 * (sig * deltas) ** 2
        overlap = (a * np.exp(-x))[:, None]
        p_c = 0.5 * ((1.0 - a) - a * np.expm1(-x))[:, None]
        p_b = 1.0 - p_c
        nr = self.detector.number_resolving
        if not self.timed:
            if nr:
                return np.hstack([both * p_c, both * p_b, col(one), col(zero)])
            return np.hstack([both * p_c, one * p_c + (1.0 - g * g) * p_b, col(zero)])

        T = self.binning.bin_width
        folded = kernels.folded_tent_mass_grid(deltas, p.width, T, n_bins)
        folded0 = kernels.folded_tent_mass_grid([0.0], p.width, T, n_bins)
        c = np.maximum(0.5 * (folded - overlap * folded0), 0.0)
        tail = kernels.tail_beyond(deltas, p.width, T, n_bins)[:, None]
        if nr:
            b = 0.5 * (folded + overlap * folded0)
            return np.hstack([both * c, both * b, col(one), col(zero), both * tail])
        tail0 = kernels.tail_beyond([0.0], p.width, T, n_bins)[0]
        over_c = np.maximum(0.5 * (tail - overlap * tail0), 0.0)
        return np.hstack([both * c, one * p_c + (1.0 - g * g) * p_b, col(zero), both * over_c])

    def probabilities(self, p: PhysicalParams, n_bins: Optional[int] = None) -> np.ndarray:
        if self.timed and n_bins is None:
            n_bins = self.binning.n_bins(p)
        return self.probability_grid(p, [p.delta], n_bins)[0]

    def distribution(self, p: PhysicalParams, n_bins: Optional[int] = None) -> "OutcomeDistribution":
        if self.timed and n_bins is None:
            n_bins = self.binning.n_bins(p)
        return OutcomeDistribution(self.outcomes(n_bins), self.probabilities(p, n_bins), p, self, n_bins)

    __call__ = distribution


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    outcomes: Tuple[Outcome, ...]
    probabilities: np.ndarray
    params: PhysicalParams
    measurement: Measurement
    n_bins: Optional[int] = None

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape != (len(self.outcomes),):
            raise ConfigError("one probability per outcome is required")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    def __len__(self):
        return len(self.outcomes)

    def __iter__(self):
        return iter(zip(self.outcomes, self.probabilities))

    def probability(self, outcome: Outcome) -> float:
        try:
            return float(self.probabilities[self.outcomes.index(outcome)])
        except ValueError:
            return 0.0

    def as_dict(self) -> dict:
        return dict(zip(self.outcomes, self.probabilities.tolist()))

    @property
    def total(self) -> float:
        return float(np.sum(self.probabilities))


def gaussian_linear_segment_integral(mu, s, a, b, c0, c1):
    """Integrate ``(c0 + c1 * tau)`` against ``N(tau; mu, s**2)`` over ``[a, b]``.

    Closed form in terms of the complementary error function and one
    exponential; infinite limits are accepted and arrays broadcast.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0.0)):
        raise ConfigError("segment width s must be positive")
    if np.any(np.asarray(b, dtype=float) < np.asarray(a, dtype=float)):
        raise ConfigError("segment needs b >= a")
    out = kernels.segment_integral(mu, s, a, b, c0, c1)
    return float(out) if np.ndim(out) == 0 else out


def _folded_masses(p: PhysicalParams, bc: BinningConfig, n):
    n = np.asarray(n)
    if np.any(n < 0):
        raise ConfigError("HOM bin separations are nonnegative")
    n_max = int(np.max(n)) if n.size else 0
    folded = kernels.folded_tent_mass_grid([p.delta], p.width, bc.bin_width, n_max)[0]
    folded0 = kernels.folded_tent_mass_grid([0.0], p.width, bc.bin_width, n_max)[0]
    return folded[n], folded0[n]


def binned_coincidence(p: PhysicalParams, bc: BinningConfig, n):
    """Probability that the photons leave different ports ``n`` bins apart (no loss)."""
    folded, folded0 = _folded_masses(p, bc, n)
    out = np.maximum(0.5 * (folded - p.overlap * folded0), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def binned_bunching(p: PhysicalParams, bc: BinningConfig, n):
    """Probability that the photons leave the same port ``n`` bins apart (no loss)."""
    folded, folded0 = _folded_masses(p, bc, n)
    out = 0.5 * (folded + p.overlap * folded0)
    return float(out) if np.ndim(out) == 0 else out


def binned_nohom(p: PhysicalParams, bc: BinningConfig, n):
    """Probability that the delayed photon arrives ``n`` bins after the other (signed)."""
    n_arr = np.atleast_1d(np.asarray(n, dtype=np.int64))
    out = kernels.tent_mass_grid([p.delta], p.width, bc.bin_width, n_arr)[0]
    return float(out[0]) if np.ndim(n) == 0 else out


def outcome_distribution(p: PhysicalParams, bc: Optional[BinningConfig], dc: DetectorConfig,
                         protocol=Protocol.HOM) -> OutcomeDistribution:
    """Complete discrete distribution of detection records for one configuration."""
    return Measurement(dc, Protocol(protocol), bc if dc.time_resolving else None).distribution(p)


PROTOCOL_LABELS = ("HOM", "NR-HOM", "TR-HOM", "NRTR-HOM", "no-HOM")


def measurement_for(label: str, bin_width: Optional[float] = None, **binning_kw) -> Measurement:
    """Build one of the five named protocol configurations."""
    table = {
        "HOM": (False, False, Protocol.HOM),
        "NR-HOM": (True, False, Protocol.HOM),
        "TR-HOM": (False, True, Protocol.HOM),
        "NRTR-HOM": (True, True, Protocol.HOM),
        "no-HOM": (True, True, Protocol.NOHOM),
    }
    try:
        nr, tr, protocol = table[label]
    except KeyError:
        raise ConfigError(f"unknown protocol label {label!r}; expected one of {PROTOCOL_LABELS}") from None
    binning = BinningConfig(bin_width, **binning_kw) if tr else None
    return Measurement(DetectorConfig(nr, tr), protocol, binning)

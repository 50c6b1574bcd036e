"""Seedable Monte Carlo generation of detection records.

Two independent generators are provided so each can validate the other:

* :func:`sample_outcomes` draws categorically from the analytic outcome
  distribution.
* :func:`sample_generative` follows the physical sequence: bunch or
  coincide, draw the arrival-time difference, lose photons, then bin the
  arrival times with a uniformly placed first photon.

Random streams come from Philox (a counter-based generator) keyed by
``(seed, stream_id)``, so equal keys reproduce bit-identical output and
different stream ids are independent.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import binned as B
from .binned import Measurement, Outcome, Protocol
from .errors import ConfigError, ConvergenceError
from .model import PhysicalParams, bunching_density, coincidence_density, total_rates

MAX_CONSECUTIVE_REJECTIONS = 1_000_000
_UINT64_MAX = 2 ** 64 - 1


@dataclass(frozen=True)
class RandomSeed:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= int(v) <= _UINT64_MAX:
                raise ConfigError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(seq))

    def as_dict(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id}


def _as_seed(seed) -> RandomSeed:
    if isinstance(seed, RandomSeed):
        return seed
    if seed is None:
        return RandomSeed()
    return RandomSeed(int(seed))


@dataclass(frozen=True, eq=False)
class CountsHistogram:
    """Counts per outcome over the layout ``measurement.outcomes(n_bins)``."""

    measurement: Measurement
    counts: np.ndarray
    n_bins: Optional[int] = None
    params: Optional[PhysicalParams] = None
    seed: Optional[RandomSeed] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.dtype.kind not in "iu":
            if not np.all(counts == np.round(counts)):
                raise ConfigError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ConfigError("counts must be nonnegative")
        if counts.shape != (len(self.outcomes),):
            raise ConfigError(f"expected {len(self.outcomes)} counts for this layout, got {counts.shape}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def outcomes(self) -> Tuple[Outcome, ...]:
        return self.measurement.outcomes(self.n_bins)

    @property
    def n_trials(self) -> int:
        return int(self.counts.sum())

    def count(self, outcome: Outcome) -> int:
        try:
            return int(self.counts[self.outcomes.index(outcome)])
        except ValueError:
            return 0

    def as_dict(self) -> dict:
        return {o: int(c) for o, c in zip(self.outcomes, self.counts)}

    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.n_trials, 1)

    def relayout(self, n_bins: Optional[int]) -> "CountsHistogram":
        """Same counts on a wider bin layout (only growth is allowed)."""
        if n_bins == self.n_bins:
            return self
        if self.n_bins is not None and (n_bins is None or n_bins < self.n_bins):
            raise ConfigError("a histogram layout can only be widened")
        return from_mapping(self.measurement, self.as_dict(), n_bins, self.params, self.seed, self.diagnostics)

    def merge(self, other: "CountsHistogram") -> "CountsHistogram":
        if other.measurement != self.measurement:
            raise ConfigError("cannot merge histograms from different measurements")
        n_bins = None if self.n_bins is None else max(self.n_bins, other.n_bins)
        a, b = self.relayout(n_bins), other.relayout(n_bins)
        params = self.params if self.params == other.params else None
        return CountsHistogram(self.measurement, a.counts + b.counts, n_bins, params)

    def scaled(self, k: int) -> "CountsHistogram":
        return CountsHistogram(self.measurement, self.counts * int(k), self.n_bins, self.params, self.seed)


def from_mapping(measurement: Measurement, mapping, n_bins=None, params=None, seed=None, diagnostics=None):
    """Build a histogram from ``{Outcome: count}``, sizing the layout to cover every index."""
    if measurement.timed:
        observed = [abs(o.index) for o in mapping if o.index is not None and mapping[o]]
        n_bins = max([n_bins or 1] + observed)
    else:
        n_bins = None
    layout = measurement.outcomes(n_bins)
    position = {o: i for i, o in enumerate(layout)}
    counts = np.zeros(len(layout), dtype=np.int64)
    for outcome, c in mapping.items():
        if outcome not in position:
            if c:
                raise ConfigError(f"outcome {outcome} is not admissible for {measurement.label}")
            continue
        counts[position[outcome]] += int(c)
    return CountsHistogram(measurement, counts, n_bins, params, seed, dict(diagnostics or {}))


def _draw_index(rng, probs, size):
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
    return np.minimum(idx, probs.size - 1)


def sample_outcomes(p: PhysicalParams, measurement: Measurement, n_trials: int, seed=None) -> CountsHistogram:
    """I.i.d. categorical draws from the analytic outcome distribution.

    Draws that land on the overflow outcome are re-resolved against a layout
    extended far enough that its own overflow is negligible.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be at least 1")
    seed = _as_seed(seed)
    rng = seed.generator()
    n_bins = measurement.n_bins(p)
    layout = measurement.outcomes(n_bins)
    probs = measurement.probabilities(p, n_bins)
    counts = np.bincount(_draw_index(rng, probs, n_trials), minlength=probs.size)
    mapping = dict(zip(layout, counts))
    diagnostics = {"sampler": "categorical"}
    n_over = int(mapping.get(Outcome(B.OVERFLOW), 0))
    if n_over:
        width = measurement.bin_width
        n_ext = n_bins + int(np.ceil(40.0 * p.width / width)) + 1
        ext_layout = measurement.outcomes(n_ext)
        ext_probs = measurement.probabilities(p, n_ext)
        beyond = np.array([o.kind == B.OVERFLOW or (o.index is not None and abs(o.index) > n_bins)
                           for o in ext_layout])
        idx = np.flatnonzero(beyond)
        draws = idx[_draw_index(rng, ext_probs[idx], n_over)]
        mapping[Outcome(B.OVERFLOW)] = 0
        for j, c in zip(*np.unique(draws, return_counts=True)):
            mapping[ext_layout[j]] = mapping.get(ext_layout[j], 0) + int(c)
        diagnostics["overflow_redrawn"] = n_over
        if mapping.get(Outcome(B.OVERFLOW), 0):
            n_bins = n_ext
    return from_mapping(measurement, mapping, n_bins, p, seed, diagnostics)


def _proposal_density(p, tau):
    z = np.sqrt(2.0 / np.pi) * p.sigma
    return 0.5 * z * (np.exp(-2.0 * (p.sigma * (tau - p.delta)) ** 2) + np.exp(-2.0 * (p.sigma * (tau + p.delta)) ** 2))


def _draw_tau(rng, p: PhysicalParams, bunch: np.ndarray):
    """Arrival differences given the bunch/coincide decision, by rejection.

    The proposal is the equal mixture of N(+delta) and N(-delta); since the
    bunching and coincidence densities sum to it, each is bounded by it and
    a class with total rate ``P`` is accepted at rate ``P``.  Averaged over
    classes that is one acceptance per two proposals.
    """
    n = bunch.size
    tau = np.empty(n)
    pending = np.arange(n)
    proposals = 0
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > MAX_CONSECUTIVE_REJECTIONS:
            raise ConvergenceError("rejection sampler stalled", {"pending": int(pending.size), "rounds": rounds})
        k = pending.size
        centre = np.where(rng.random(k) < 0.5, p.delta, -p.delta)
        t = centre + p.width * rng.standard_normal(k)
        envelope = _proposal_density(p, t)
        target = np.where(bunch[pending], bunching_density(p, t), coincidence_density(p, t))
        accept = rng.random(k) * envelope < target
        tau[pending[accept]] = t[accept]
        pending = pending[~accept]
        proposals += k
    return tau, proposals


_KIND_CODES = {kind: i for i, kind in enumerate(B.OUTCOME_KINDS)}


def sample_generative(p: PhysicalParams, measurement: Measurement, n_trials: int, seed=None) -> CountsHistogram:
    """Physically ordered sampler: interference, arrival times, loss, click logic, binning."""
    if n_trials < 1:
        raise ConfigError("n_trials must be at least 1")
    seed = _as_seed(seed)
    rng = seed.generator()
    n = int(n_trials)
    diagnostics = {"sampler": "generative"}

    if measurement.protocol is Protocol.NOHOM:
        bunch = np.zeros(n, dtype=bool)
        tau = p.delta + p.width * rng.standard_normal(n)
    else:
        _, p_bunch = total_rates(p)
        bunch = rng.random(n) < p_bunch
        tau, proposals = _draw_tau(rng, p, bunch)
        diagnostics["proposals"] = int(proposals)
        diagnostics["acceptance_rate"] = n / proposals

    n_lost = (rng.random((n, 2)) < p.gamma).sum(axis=1)
    sep = np.zeros(n, dtype=np.int64)
    if measurement.timed:
        # first photon uniform in its bin, second tau later
        sep = np.floor(rng.random(n) + tau / measurement.bin_width).astype(np.int64)

    nr = measurement.detector.number_resolving
    code = np.full(n, _KIND_CODES[B.ZERO_CLICKS])
    index = np.zeros(n, dtype=np.int64)
    code[n_lost == 1] = _KIND_CODES[B.ONE_CLICK]
    both = n_lost == 0
    if measurement.protocol is Protocol.NOHOM:
        if measurement.timed:
            code[both] = _KIND_CODES[B.NOHOM_SEP]
            index[both] = sep[both]
        else:
            code[both] = _KIND_CODES[B.TWO_CLICKS]
    else:
        coinc = both & ~bunch
        bun = both & bunch
        if measurement.timed:
            code[coinc] = _KIND_CODES[B.COINCIDENCE_SEP]
            index[coinc] = np.abs(sep[coinc])
        else:
            code[coinc] = _KIND_CODES[B.TWO_CLICKS_COINCIDENCE]
        if not nr:
            # a bucket detector hit by both photons clicks once
            code[bun] = _KIND_CODES[B.ONE_CLICK]
        elif measurement.timed:
            code[bun] = _KIND_CODES[B.BUNCH_SEP]
            index[bun] = np.abs(sep[bun])
        else:
            code[bun] = _KIND_CODES[B.TWO_CLICKS_BUNCH]

    offset = int(np.max(np.abs(index))) + 1 if n else 1
    keys, counts = np.unique(code * (2 * offset + 1) + (index + offset), return_counts=True)
    mapping = {}
    for key, c in zip(keys.tolist(), counts.tolist()):
        kind = B.OUTCOME_KINDS[key // (2 * offset + 1)]
        idx = key % (2 * offset + 1) - offset
        mapping[Outcome(kind, idx if kind in B.INDEXED_KINDS else None)] = c
    return from_mapping(measurement, mapping, measurement.n_bins(p), p, seed, diagnostics)


def chi_square_gof(counts: CountsHistogram, probs: np.ndarray, min_expected: float = 5.0):
    """Pearson goodness of fit against ``probs`` (same layout), pooling sparse outcomes.

    Returns ``(statistic, dof, p_value)``.
    """
    from scipy.stats import chi2

    expected = counts.n_trials * np.asarray(probs, dtype=float)
    observed = counts.counts.astype(float)
    keep = expected >= min_expected
    obs = list(observed[keep])
    exp = list(expected[keep])
    if np.any(~keep):
        obs.append(observed[~keep].sum())
        exp.append(expected[~keep].sum())
        if exp[-1] < min_expected:
            obs[-2] += obs.pop()
            exp[-2] += exp.pop()
    obs, exp = np.array(obs), np.array(exp)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    return stat, dof, float(chi2.sf(stat, dof))


def chi_square_two_sample(a: CountsHistogram, b: CountsHistogram, min_count: float = 5.0):
    """Homogeneity test between two histograms; returns ``(statistic, dof, p_value)``."""
    from scipy.stats import chi2

    n_bins = None if a.n_bins is None else max(a.n_bins, b.n_bins)
    x = a.relayout(n_bins).counts.astype(float)
    y = b.relayout(n_bins).counts.astype(float)
    na, nb = x.sum(), y.sum()
    pooled = (x + y) / (na + nb)
    keep = pooled * min(na, nb) >= min_count
    xs = np.append(x[keep], x[~keep].sum())
    ys = np.append(y[keep], y[~keep].sum())
    if xs[-1] + ys[-1] == 0:
        xs, ys = xs[:-1], ys[:-1]
    pooled = (xs + ys) / (na + nb)
    ea, eb = na * pooled, nb * pooled
    stat = float(np.sum((xs - ea) ** 2 / ea + (ys - eb) ** 2 / eb))
    dof = xs.size - 1
    return stat, dof, float(chi2.sf(stat, dof))

"""Monte-Carlo ergodic rates for alpha-duplex uplink/downlink.

A simulation run fixes the BS topology and, per trial index, draws a user
drop and the fading gains from dedicated random substreams.  Each trial is
reduced to the per-link power terms (signal, intra-mode interference,
cross-mode interference) of every tagged cell.  Rates for any overlap
``alpha`` are evaluated from those terms afterwards, so an alpha sweep uses
common random numbers by construction.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .channel import (PowerParams, PropagationParams, linear_gain, noise_power,
                      sample_fading, uplink_tx_power)
from .errors import ConfigError, EstimationError
from .geometry import Deployment, Topology, drop_partners, drop_users, parse_user_mode, select_tagged_cell
from .pulse import effective_interference, parse_pulse

# substream purposes under the master seed
TOPOLOGY, DEPLOYMENT, FADING, PARTNER, PARTNER_FADING, HEATMAP = range(6)

UE_MODES = ("fd-ue", "hd-ue-backcompat")
TAGGING = ("centroid", "all-cells")
MIN_TRIALS_FOR_CI = 30
Z95 = 1.959963984540054


def substream(seed: int, purpose: int, index: int | None = None) -> np.random.Generator:
    key = (purpose,) if index is None else (purpose, index)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class DuplexConfig:
    alpha: float = 0.0
    bandwidth: float = 1e6
    pulse_ul: str = "rect"
    pulse_dl: str = "rect"
    power: PowerParams = field(default_factory=PowerParams)
    propagation: PropagationParams = field(default_factory=PropagationParams)
    ue_mode: str = "fd-ue"
    trials: int = 1000
    seed: int = 0
    user_mode: str = "per-cell-uniform"
    tagging: str = "centroid"
    ei_tolerance: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.bandwidth > 0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if self.ue_mode not in UE_MODES:
            raise ConfigError(f"ue_mode must be one of {UE_MODES}, got {self.ue_mode!r}")
        if self.tagging not in TAGGING:
            raise ConfigError(f"tagging must be one of {TAGGING}, got {self.tagging!r}")
        if not 0 < self.ei_tolerance < 1:
            raise ConfigError(f"ei_tolerance must lie in (0, 1), got {self.ei_tolerance}")
        parse_user_mode(self.user_mode)
        self.pulses()

    def pulses(self):
        """(uplink pulse, downlink pulse) as PulseShape objects."""
        return parse_pulse(self.pulse_ul, self.bandwidth), parse_pulse(self.pulse_dl, self.bandwidth)

    def ei(self, alpha: float | None = None) -> float:
        # downlink pulse leaking into the uplink matched filter; symmetric for even spectra
        ul, dl = self.pulses()
        a = self.alpha if alpha is None else alpha
        return effective_interference(dl, ul, a, rtol=self.ei_tolerance)


@dataclass(frozen=True)
class LinkFading:
    """Per-trial power gains, one row per tagged cell and one column per cell.

    ``ul[k, j]``: user of cell j -> BS of tagged cell k.  ``bs``: BS j -> BS k.
    ``dl``: BS j -> user of cell k.  ``ue``: user of cell j -> user of cell k.
    ``partner``: partner user of cell j -> user of cell k (two-pair layout).
    """

    ul: np.ndarray
    bs: np.ndarray
    dl: np.ndarray
    ue: np.ndarray
    partner: np.ndarray | None = None

    @classmethod
    def draw(cls, rng, rows: int, cells: int, fading="rayleigh"):
        shape = (rows, cells)
        return cls(*(np.asarray(sample_fading(rng, fading, shape), dtype=float) for _ in range(4)))

    @classmethod
    def unit(cls, rows: int, cells: int):
        return cls(*(np.ones((rows, cells)) for _ in range(5)))


@dataclass
class LinkTerms:
    """Received powers (W) at the tagged receivers, before EI scaling."""

    s_ul: np.ndarray
    i_ul: np.ndarray
    c_ul: np.ndarray
    s_dl: np.ndarray
    i_dl: np.ndarray
    c_dl: np.ndarray
    c_bc: np.ndarray | None = None


def link_terms(topology: Topology, deployment: Deployment, rows, fading: LinkFading,
               config: DuplexConfig, partners=None, cross_mode=True) -> LinkTerms:
    prop, pw = config.propagation, config.power
    rows = np.asarray(rows, dtype=np.int64)
    bs = topology.bs_positions
    users = deployment.active_positions()
    active = deployment.active_mask

    d_serv = np.maximum(np.hypot(*(users - bs).T), prop.min_distance)
    p_u = np.where(active, uplink_tx_power(d_serv, pw, prop)[0], 0.0)
    p_b = np.where(active, pw.p_d, 0.0)
    g_serv = linear_gain(d_serv[rows], prop.fc)
    own = np.arange(len(rows))
    fc, dmin = prop.fc, prop.min_distance
    rx_bs = np.ascontiguousarray(bs[rows])
    rx_ue = np.ascontiguousarray(users[rows])

    s_ul = p_u[rows] * fading.ul[own, rows] * g_serv
    i_ul = kernels.faded_power_sum(rx_bs, users, p_u, fading.ul, rows, fc, dmin)
    s_dl = p_b[rows] * fading.dl[own, rows] * g_serv
    i_dl = kernels.faded_power_sum(rx_ue, bs, p_b, fading.dl, rows, fc, dmin)
    if cross_mode:
        c_ul = kernels.faded_power_sum(rx_bs, bs, p_b, fading.bs, rows, fc, dmin)
        c_dl = kernels.faded_power_sum(rx_ue, users, p_u, fading.ue, rows, fc, dmin)
    else:
        c_ul = c_dl = None

    c_bc = None
    if partners is not None and cross_mode:
        ppos, pmask = partners
        d_p = np.maximum(np.hypot(*(ppos - bs).T), prop.min_distance)
        p_p = np.where(pmask, uplink_tx_power(d_p, pw, prop)[0], 0.0)
        no_skip = np.full(len(rows), -1, dtype=np.int64)
        c_bc = kernels.faded_power_sum(rx_ue, np.ascontiguousarray(ppos), p_p, fading.partner,
                                       no_skip, fc, dmin)
    return LinkTerms(s_ul, i_ul, c_ul, s_dl, i_dl, c_dl, c_bc)


# --- SINR assembly ----------------------------------------------------------

def _sinr(signal, intra, ei, cross, si, noise):
    return signal / (intra + ei * (cross + si) + noise)


def _terms_for(topology, deployment, tagged, fading, config, partners=None):
    tagged = int(tagged)
    if not deployment.active_mask[tagged]:
        raise EstimationError(f"tagged cell {tagged} has no active user")
    return link_terms(topology, deployment, [tagged], fading, config, partners)


def sinr_uplink(topology, deployment, tagged, fading: LinkFading, ei, config: DuplexConfig) -> float:
    t = _terms_for(topology, deployment, tagged, fading, config)
    noise = noise_power(config.alpha, config.bandwidth, config.power)
    return float(_sinr(t.s_ul, t.i_ul, ei, t.c_ul, config.power.beta, noise)[0])


def sinr_downlink(topology, deployment, tagged, fading: LinkFading, ei, config: DuplexConfig) -> float:
    t = _terms_for(topology, deployment, tagged, fading, config)
    noise = noise_power(config.alpha, config.bandwidth, config.power)
    return float(_sinr(t.s_dl, t.i_dl, ei, t.c_dl, config.power.beta, noise)[0])


def sinr_downlink_backcompat(topology, deployment, partners, tagged, fading: LinkFading, ei,
                             config: DuplexConfig) -> float:
    """Downlink SINR of an HD terminal: no UE self-interference, but every
    pair-matched uplink user (own-cell partner included) leaks in via EI."""
    if not partners[1][int(tagged)]:
        raise EstimationError(f"tagged cell {tagged} has no partner user")
    t = _terms_for(topology, deployment, tagged, fading, config, partners)
    noise = noise_power(config.alpha, config.bandwidth, config.power)
    return float(_sinr(t.s_dl, t.i_dl, ei, t.c_bc, 0.0, noise)[0])


def rate_sample(sinr, alpha, bandwidth):
    return (1.0 + alpha) * bandwidth * np.log2(1.0 + np.asarray(sinr, dtype=float))


# --- Monte-Carlo driver ----------------------------------------------------

@dataclass
class TrialBatch:
    """Per-trial link terms, arrays of shape (trials, rows); NaN rows are unusable."""

    s_ul: np.ndarray
    i_ul: np.ndarray
    c_ul: np.ndarray
    s_dl: np.ndarray
    i_dl: np.ndarray
    c_dl: np.ndarray
    c_bc: np.ndarray

    @property
    def valid(self):
        return ~np.isnan(self.s_ul)

    @property
    def valid_bc(self):
        return self.valid & ~np.isnan(self.c_bc)


def draw_trial(topology, config, t, with_partners=False):
    """Deployment, tagged rows, fading and partners of trial ``t``."""
    dep = drop_users(topology, config.user_mode, substream(config.seed, DEPLOYMENT, t))
    m = topology.n_bs
    rows = (select_tagged_cell(topology, "centroid") if config.tagging == "centroid"
            else np.arange(m))
    fading = LinkFading.draw(substream(config.seed, FADING, t), len(rows), m,
                             config.propagation.fading)
    partners = None
    if with_partners:
        partners = drop_partners(topology, dep, config.user_mode, substream(config.seed, PARTNER, t))
        extra = sample_fading(substream(config.seed, PARTNER_FADING, t),
                              config.propagation.fading, (len(rows), m))
        fading = replace(fading, partner=np.asarray(extra, dtype=float))
    return dep, rows, fading, partners


def _simulate_range(topology, config, start, stop, with_partners, cross_mode):
    rows_n = 1 if config.tagging == "centroid" else topology.n_bs
    out = np.full((7, stop - start, rows_n), np.nan)
    for t in range(start, stop):
        dep, rows, fading, partners = draw_trial(topology, config, t, with_partners)
        terms = link_terms(topology, dep, rows, fading, config, partners, cross_mode)
        ok = dep.active_mask[rows]
        vals = [terms.s_ul, terms.i_ul, terms.c_ul, terms.s_dl, terms.i_dl, terms.c_dl, terms.c_bc]
        for q, v in enumerate(vals):
            if v is not None:
                out[q, t - start, ok] = v[ok]
        if partners is not None and terms.c_bc is not None:
            out[6, t - start, ~partners[1][rows]] = np.nan
    return out


def simulate(topology: Topology, config: DuplexConfig, workers: int = 1,
             with_partners: bool = False, cross_mode: bool = True) -> TrialBatch:
    """Run ``config.trials`` trials; output is independent of ``workers``."""
    n = int(config.trials)
    workers = max(1, int(workers))
    if workers == 1 or n < 2 * workers:
        data = _simulate_range(topology, config, 0, n, with_partners, cross_mode)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_simulate_range, topology, config, int(a), int(b),
                                with_partners, cross_mode)
                    for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            data = np.concatenate([f.result() for f in futs], axis=1)
    return TrialBatch(*data)


@dataclass(frozen=True)
class RateEstimate:
    mean_rate: float
    ci_halfwidth: float
    trials_used: int
    skipped: int
    samples: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def skipped_frac(self):
        total = self.trials_used + self.skipped
        return self.skipped / total if total else 0.0


def estimate(per_row_rates, valid) -> RateEstimate:
    """Average rows within a trial, then trials; skip trials with no valid row."""
    counts = valid.sum(axis=1)
    used = counts > 0
    if not used.any():
        raise EstimationError("every trial was skipped (no populated tagged cell)")
    summed = np.where(valid, per_row_rates, 0.0).sum(axis=1)
    samples = summed[used] / counts[used]
    n = len(samples)
    mean = float(np.mean(samples))
    if n >= MIN_TRIALS_FOR_CI and np.all(samples == samples[0]):
        ci = 0.0  # np.std would report rounding noise of the mean
    elif n >= MIN_TRIALS_FOR_CI:
        ci = float(Z95 * np.std(samples, ddof=1) / math.sqrt(n))
    else:
        warnings.warn(f"only {n} usable trials; confidence interval not reported", stacklevel=2)
        ci = float("nan")
    return RateEstimate(mean, ci, n, int((~used).sum()), samples)


def uplink_rates(batch: TrialBatch, alpha, ei, config: DuplexConfig, cross_mode=True):
    noise = noise_power(alpha, config.bandwidth, config.power)
    if cross_mode:
        sinr = _sinr(batch.s_ul, batch.i_ul, ei, batch.c_ul, config.power.beta, noise)
    else:
        sinr = batch.s_ul / (batch.i_ul + noise)
    return rate_sample(sinr, alpha, config.bandwidth)


def downlink_rates(batch: TrialBatch, alpha, ei, config: DuplexConfig, ue_mode=None, cross_mode=True):
    noise = noise_power(alpha, config.bandwidth, config.power)
    ue_mode = ue_mode or config.ue_mode
    if not cross_mode:
        sinr = batch.s_dl / (batch.i_dl + noise)
    elif ue_mode == "fd-ue":
        sinr = _sinr(batch.s_dl, batch.i_dl, ei, batch.c_dl, config.power.beta, noise)
    else:
        sinr = _sinr(batch.s_dl, batch.i_dl, ei, batch.c_bc, 0.0, noise)
    return rate_sample(sinr, alpha, config.bandwidth)


def ergodic_rate(config: DuplexConfig, direction: str, topology: Topology, workers: int = 1,
                 cross_mode: bool = True) -> RateEstimate:
    if direction not in ("uplink", "downlink"):
        raise ConfigError(f"direction must be 'uplink' or 'downlink', got {direction!r}")
    backcompat = config.ue_mode == "hd-ue-backcompat"
    batch = simulate(topology, config, workers, with_partners=backcompat, cross_mode=cross_mode)
    ei = config.ei() if cross_mode else 0.0
    if direction == "uplink":
        return estimate(uplink_rates(batch, config.alpha, ei, config, cross_mode), batch.valid)
    valid = batch.valid_bc if backcompat and cross_mode else batch.valid
    return estimate(downlink_rates(batch, config.alpha, ei, config, cross_mode=cross_mode), valid)


@dataclass
class RateCurve:
    alphas: np.ndarray
    ei: np.ndarray
    uplink: list
    downlink: list

    def ul_means(self):
        return np.array([r.mean_rate for r in self.uplink])

    def dl_means(self):
        return np.array([r.mean_rate for r in self.downlink])


def _check_grid(alpha_grid):
    alphas = np.asarray(alpha_grid, dtype=float).ravel()
    if alphas.size == 0:
        raise ConfigError("alpha grid is empty")
    if np.any((alphas < 0) | (alphas > 1)) or np.any(np.diff(alphas) < 0):
        raise ConfigError("alpha grid must be sorted and inside [0, 1]")
    return alphas


def curve_from_batch(batch: TrialBatch, config: DuplexConfig, alpha_grid, ue_mode=None) -> RateCurve:
    alphas = _check_grid(alpha_grid)
    ue_mode = ue_mode or config.ue_mode
    dl_valid = batch.valid_bc if ue_mode == "hd-ue-backcompat" else batch.valid
    eis, ul, dl = [], [], []
    for a in alphas:
        e = config.ei(float(a))
        eis.append(e)
        ul.append(estimate(uplink_rates(batch, a, e, config), batch.valid))
        dl.append(estimate(downlink_rates(batch, a, e, config, ue_mode), dl_valid))
    return RateCurve(alphas, np.array(eis), ul, dl)


def sweep_alpha(config: DuplexConfig, alpha_grid, topology: Topology, workers: int = 1) -> RateCurve:
    """Rates over an alpha grid with common random numbers across alpha."""
    alphas = _check_grid(alpha_grid)
    backcompat = config.ue_mode == "hd-ue-backcompat"
    batch = simulate(topology, config, workers, with_partners=backcompat)
    return curve_from_batch(batch, config, alphas)


def find_balanced_alpha(curve: RateCurve, baseline=None):
    """Grid alpha maximizing min(uplink gain, downlink gain) over the alpha=0 rates.

    ``baseline`` optionally overrides the (uplink, downlink) HD reference rates.
    Returns ``(alpha_star, ul_gain, dl_gain)``; alpha_star is 0 when no grid
    point improves both directions.
    """
    alphas = np.asarray(curve.alphas)
    ul, dl = curve.ul_means(), curve.dl_means()
    if baseline is None:
        zero = np.flatnonzero(alphas == 0.0)
        if zero.size == 0:
            raise ConfigError("curve must contain alpha = 0")
        ul0, dl0 = ul[zero[0]], dl[zero[0]]
    else:
        ul0, dl0 = baseline
    ul_gain = ul / ul0 - 1.0
    dl_gain = dl / dl0 - 1.0
    worst = np.minimum(ul_gain, dl_gain)
    k = int(np.argmax(worst))
    if worst[k] <= 0.0:
        return 0.0, 0.0, 0.0
    return float(alphas[k]), float(ul_gain[k]), float(dl_gain[k])

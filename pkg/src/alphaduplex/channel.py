"""Propagation, fading, uplink power control and receiver noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


@dataclass(frozen=True)
class PropagationParams:
    fc: float = 2.0            # GHz
    min_distance: float = 1.0  # m
    fading: str = "rayleigh"

    def __post_init__(self):
        if not self.fc > 0:
            raise ConfigError(f"fc must be positive, got {self.fc}")
        if not self.min_distance >= 1.0:
            raise ConfigError(f"min_distance must be >= 1 m, got {self.min_distance}")
        if self.fading not in ("rayleigh", "none"):
            raise ConfigError(f"fading must be 'rayleigh' or 'none', got {self.fading!r}")


@dataclass(frozen=True)
class PowerParams:
    """All powers in watts; ``n0`` in W/Hz (``None`` disables thermal noise)."""

    p_d: float = 5.0
    rho: float = float(dbm_to_watt(-70.0))
    p_u_max: float = float(dbm_to_watt(23.0))
    beta: float = 0.0
    n0: float | None = float(dbm_to_watt(-174.0))
    noise_figure: float = 9.0  # dB

    def __post_init__(self):
        for name in ("p_d", "rho", "p_u_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.beta >= 0:
            raise ConfigError(f"beta must be >= 0 W, got {self.beta}")
        if self.n0 is not None and not self.n0 > 0:
            raise ConfigError(f"n0 must be positive, got {self.n0}")
        if not self.rho < self.p_u_max:
            raise ConfigError("rho must be below p_u_max")


def path_loss_db(d, fc):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if not fc > 0:
        raise ValueError("carrier frequency must be positive")
    out = 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(fc)
    return out if out.ndim else float(out)


def linear_gain(d, fc):
    pl = path_loss_db(d, fc)
    out = 10.0 ** (-np.asarray(pl) / 10.0)
    return out if out.ndim else float(out)


def sample_fading(rng: np.random.Generator, fading: str = "rayleigh", size=None):
    """Channel power gain(s): Exp(1) under Rayleigh fading, 1 otherwise."""
    if fading == "none":
        return 1.0 if size is None else np.ones(size)
    return rng.standard_exponential(size)


def uplink_tx_power(d_serving, power: PowerParams, prop: PropagationParams):
    """Truncated channel inversion. Returns ``(power_w, truncated)``."""
    d = np.maximum(np.asarray(d_serving, dtype=float), prop.min_distance)
    required = power.rho / linear_gain(d, prop.fc)
    truncated = required > power.p_u_max
    tx = np.where(truncated, power.p_u_max, required)
    if tx.ndim == 0:
        return float(tx), bool(truncated)
    return tx, truncated


def noise_power(alpha: float, bandwidth: float, power: PowerParams) -> float:
    if power.n0 is None:
        return 0.0
    return power.n0 * 10.0 ** (power.noise_figure / 10.0) * (1.0 + alpha) * bandwidth

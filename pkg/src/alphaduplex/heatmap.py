"""Aggregate inter-cell interference rasters over the study area."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import PowerParams, PropagationParams, sample_fading, uplink_tx_power, watt_to_dbm
from .errors import ConfigError
from .geometry import Deployment, Topology, drop_users

MODES = ("downlink", "uplink", "fd")


@dataclass(frozen=True)
class InterferenceGrid:
    resolution: float
    origin: tuple
    mode: str
    values: np.ndarray  # dBm, shape (rows, cols); row 0 is the lowest y

    @property
    def linear(self):
        return 10.0 ** ((self.values - 30.0) / 10.0)

    def mean_dbm(self) -> float:
        return float(np.mean(self.values))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# mode={self.mode} origin_x={self.origin[0]!r} origin_y={self.origin[1]!r} "
                     f"resolution={self.resolution!r} rows={self.values.shape[0]} "
                     f"cols={self.values.shape[1]}\n")
            for row in self.values:
                fh.write(",".join(f"{v:.6f}" for v in row) + "\n")

    def to_pgm(self, path, lo=None, hi=None):
        """8-bit grayscale, top row = highest y; ``lo``/``hi`` fix the dBm range."""
        v = self.values
        lo = float(v.min()) if lo is None else lo
        hi = float(v.max()) if hi is None else hi
        scaled = np.clip((v - lo) / (hi - lo if hi > lo else 1.0), 0.0, 1.0)
        img = np.round(scaled[::-1] * 255).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
            fh.write(img.tobytes())


def pixel_centers(topology: Topology, resolution: float):
    if not resolution > 0:
        raise ConfigError(f"resolution must be positive, got {resolution}")
    a = topology.area
    w, h = a.size
    nx, ny = math.ceil(w / resolution - 1e-9), math.ceil(h / resolution - 1e-9)
    xs = a.x0 + (np.arange(nx) + 0.5) * resolution
    ys = a.y0 + (np.arange(ny) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()]), (ny, nx)


def _downlink_field(pix, topology, power, prop, rng=None):
    w = np.full(topology.n_bs, power.p_d)
    if rng is None:
        return kernels.power_sum(pix, topology.bs_positions, w, prop.fc, prop.min_distance)
    gains = sample_fading(rng, "rayleigh", (len(pix), topology.n_bs))
    skip = np.full(len(pix), -1, dtype=np.int64)
    return kernels.faded_power_sum(pix, topology.bs_positions, w, gains, skip, prop.fc, prop.min_distance)


def _uplink_field(pix, topology, dep: Deployment, power, prop, rng=None):
    users = dep.active_positions()
    d = np.hypot(*(users - topology.bs_positions).T)
    w = np.where(dep.active_mask, uplink_tx_power(np.maximum(d, prop.min_distance), power, prop)[0], 0.0)
    if rng is None:
        return kernels.power_sum(pix, users, w, prop.fc, prop.min_distance)
    gains = sample_fading(rng, "rayleigh", (len(pix), len(w)))
    skip = np.full(len(pix), -1, dtype=np.int64)
    return kernels.faded_power_sum(pix, users, w, gains, skip, prop.fc, prop.min_distance)


def interference_grid(topology: Topology, deployments, mode: str, resolution: float,
                      power: PowerParams, prop: PropagationParams = PropagationParams(),
                      fading_rng=None) -> InterferenceGrid:
    """Expected aggregate interference (dBm) per pixel.

    ``deployments`` is one Deployment or a sequence; the uplink field is the
    linear average over them.  Fading is averaged out unless ``fading_rng``
    is given, in which case a single Rayleigh realization is drawn per
    pixel-source pair.
    """
    if mode not in MODES:
        raise ConfigError(f"heatmap mode must be one of {MODES}, got {mode!r}")
    if isinstance(deployments, Deployment):
        deployments = [deployments]
    pix, shape = pixel_centers(topology, resolution)
    pix = np.ascontiguousarray(pix)

    total = np.zeros(len(pix))
    if mode in ("downlink", "fd"):
        total += _downlink_field(pix, topology, power, prop, fading_rng)
    if mode in ("uplink", "fd"):
        if not deployments:
            raise ConfigError("uplink raster needs at least one deployment")
        ul = np.zeros(len(pix))
        for dep in deployments:
            ul += _uplink_field(pix, topology, dep, power, prop, fading_rng)
        total += ul / len(deployments)
    a = topology.area
    return InterferenceGrid(float(resolution), (a.x0, a.y0), mode,
                            watt_to_dbm(total).reshape(shape))


def interference_maps(topology: Topology, resolution: float, power: PowerParams,
                      prop: PropagationParams = PropagationParams(), redraws: int = 100,
                      user_mode="per-cell-uniform", rng_for=None):
    """Downlink, uplink and FD rasters sharing the same ``redraws`` user drops.

    ``rng_for(r)`` returns the generator for redraw ``r``.
    """
    if redraws < 1:
        raise ConfigError("redraws must be >= 1")
    rng_for = rng_for or (lambda r: np.random.default_rng(r))
    deps = [drop_users(topology, user_mode, rng_for(r)) for r in range(redraws)]
    dl = interference_grid(topology, deps, "downlink", resolution, power, prop)
    ul = interference_grid(topology, deps, "uplink", resolution, power, prop)
    fd_lin = dl.linear + ul.linear
    fd = InterferenceGrid(dl.resolution, dl.origin, "fd", watt_to_dbm(fd_lin))
    return {"downlink": dl, "uplink": ul, "fd": fd}

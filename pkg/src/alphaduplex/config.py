"""Run configuration: key-value files, defaults, validation and typed views.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment.  A ``manifest.json`` written by a previous run is accepted as well.
Values are kept as canonical strings so that the resolved config can be
echoed and re-read without drift.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .channel import PowerParams, PropagationParams, dbm_to_watt
from .engine import DuplexConfig, substream, TOPOLOGY
from .errors import ConfigError
from .geometry import Rect, generate_topology_ppp, load_topology, parse_user_mode
from .pulse import parse_pulse

COMMANDS = ("ei", "rates", "backcompat", "heatmap")

DEFAULTS = {
    "command": "",
    "alpha_grid": "0:0.1:1",
    "trials": "20000",
    "seed": "1",
    "output_dir": "out",
    "topology": "ppp:3e-05",
    "area_m": "0,0,1000,1000",
    "bandwidth_hz": "1000000",
    "fc_ghz": "2",
    "min_distance_m": "1",
    "fading": "rayleigh",
    "p_d_w": "5",
    "rho_dbm": "-70",
    "p_u_max_dbm": "23",
    "beta_dbm": "off",
    "beta_list_dbm": "off,-40,-10",
    "noise_psd_dbm_hz": "-174",
    "noise_figure_db": "9",
    "pulse_ul": "rect",
    "pulse_dl": "rect",
    "ei_tolerance": "1e-06",
    "user_mode": "per-cell-uniform",
    "tagging": "centroid",
    "heatmap_resolution_m": "10",
    "heatmap_redraws": "100",
    "heatmap_fading": "off",
}

# not part of the reproducible record
_VOLATILE = ("output_dir",)


def _float(key, text):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if math.isnan(v):
        raise ConfigError(f"{key}: NaN is not allowed")
    return v


def _int(key, text):
    v = _float(key, text)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(v)


def _off_or_dbm(key, text):
    """dBm value, or ``off`` / ``-inf`` meaning exactly 0 W."""
    t = str(text).strip().lower()
    if t in ("off", "-inf", "none"):
        return 0.0
    return float(dbm_to_watt(_float(key, t)))


def parse_alpha_grid(text) -> np.ndarray:
    t = str(text).strip()
    if not t:
        raise ConfigError("alpha_grid: empty grid")
    if ":" in t:
        parts = t.split(":")
        if len(parts) != 3:
            raise ConfigError("alpha_grid: expected start:step:stop")
        start, step, stop = (_float("alpha_grid", p) for p in parts)
        if not step > 0:
            raise ConfigError("alpha_grid: step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        grid = np.round(start + step * np.arange(n), 12)
    else:
        grid = np.array([_float("alpha_grid", p) for p in t.split(",") if p.strip()])
    if grid.size == 0:
        raise ConfigError("alpha_grid: empty grid")
    if np.any((grid < 0) | (grid > 1)) or np.any(np.diff(grid) < 0):
        raise ConfigError("alpha_grid: values must be sorted and inside [0, 1]")
    return grid


def parse_area(text) -> Rect:
    parts = [p for p in str(text).replace("x", ",").split(",") if p.strip()]
    vals = [_float("area_m", p) for p in parts]
    if len(vals) == 2:
        vals = [0.0, 0.0, *vals]
    if len(vals) != 4:
        raise ConfigError("area_m: expected 'x0,y0,x1,y1' or 'WxH'")
    try:
        return Rect(*vals)
    except ConfigError as exc:
        raise ConfigError(f"area_m: {exc}") from None


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        doc = doc.get("config", doc)
        return {str(k): str(v) for k, v in doc.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


class RunConfig:
    """Validated, fully resolved run configuration."""

    def __init__(self, values: dict | None = None, **overrides):
        merged = dict(DEFAULTS)
        for src in (values or {}), overrides:
            for k, v in src.items():
                if k not in DEFAULTS:
                    raise ConfigError(f"unknown config key {k!r}")
                merged[k] = str(v).strip()
        self.values = merged
        self._validate()

    def __getitem__(self, key):
        return self.values[key]

    def record(self) -> dict:
        """Resolved key/value pairs that determine the outputs."""
        return {k: v for k, v in sorted(self.values.items()) if k not in _VOLATILE}

    def _validate(self):
        v = self.values
        if v["command"] and v["command"] not in COMMANDS:
            raise ConfigError(f"command: must be one of {COMMANDS}, got {v['command']!r}")
        self.alpha_grid = parse_alpha_grid(v["alpha_grid"])
        self.trials = _int("trials", v["trials"])
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        self.seed = _int("seed", v["seed"])
        if self.seed < 0:
            raise ConfigError("seed: must be >= 0")
        self.area = parse_area(v["area_m"])
        self.bandwidth = _float("bandwidth_hz", v["bandwidth_hz"])
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth_hz: must be positive")
        self.betas = [_off_or_dbm("beta_list_dbm", b) for b in v["beta_list_dbm"].split(",") if b.strip()]
        if not self.betas:
            raise ConfigError("beta_list_dbm: empty list")
        self.heatmap_resolution = _float("heatmap_resolution_m", v["heatmap_resolution_m"])
        if not self.heatmap_resolution > 0:
            raise ConfigError("heatmap_resolution_m: must be positive")
        self.heatmap_redraws = _int("heatmap_redraws", v["heatmap_redraws"])
        if self.heatmap_redraws < 1:
            raise ConfigError("heatmap_redraws: must be >= 1")
        if v["heatmap_fading"] not in ("on", "off"):
            raise ConfigError("heatmap_fading: must be 'on' or 'off'")
        kind, _, arg = v["topology"].partition(":")
        if kind == "ppp":
            if not _float("topology", arg) > 0:
                raise ConfigError("topology: PPP density must be positive")
        elif kind != "file" or not arg:
            raise ConfigError("topology: expected 'file:<path>' or 'ppp:<density>'")

        for key, fn in (("pulse_ul", parse_pulse), ("pulse_dl", parse_pulse)):
            try:
                fn(v[key], self.bandwidth)
            except ConfigError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        try:
            parse_user_mode(v["user_mode"])
        except ConfigError as exc:
            raise ConfigError(f"user_mode: {exc}") from None
        # build once so every key error surfaces before any computation
        self.duplex_config()

    def propagation(self) -> PropagationParams:
        v = self.values
        try:
            return PropagationParams(_float("fc_ghz", v["fc_ghz"]),
                                     _float("min_distance_m", v["min_distance_m"]), v["fading"])
        except ConfigError as exc:
            raise ConfigError(f"propagation: {exc}") from None

    def power(self, beta: float | None = None) -> PowerParams:
        v = self.values
        n0 = _off_or_dbm("noise_psd_dbm_hz", v["noise_psd_dbm_hz"])
        try:
            return PowerParams(
                p_d=_float("p_d_w", v["p_d_w"]),
                rho=float(dbm_to_watt(_float("rho_dbm", v["rho_dbm"]))),
                p_u_max=float(dbm_to_watt(_float("p_u_max_dbm", v["p_u_max_dbm"]))),
                beta=_off_or_dbm("beta_dbm", v["beta_dbm"]) if beta is None else beta,
                n0=n0 if n0 > 0 else None,
                noise_figure=_float("noise_figure_db", v["noise_figure_db"]),
            )
        except ConfigError as exc:
            raise ConfigError(f"power: {exc}") from None

    def duplex_config(self, **changes) -> DuplexConfig:
        v = self.values
        kw = dict(
            alpha=0.0, bandwidth=self.bandwidth, pulse_ul=v["pulse_ul"], pulse_dl=v["pulse_dl"],
            power=self.power(), propagation=self.propagation(), trials=self.trials,
            seed=self.seed, user_mode=v["user_mode"], tagging=v["tagging"],
            ei_tolerance=_float("ei_tolerance", v["ei_tolerance"]),
        )
        kw.update(changes)
        return DuplexConfig(**kw)

    def topology(self):
        kind, _, arg = self.values["topology"].partition(":")
        if kind == "file":
            return load_topology(arg, self.area)
        return generate_topology_ppp(float(arg), self.area, substream(self.seed, TOPOLOGY))

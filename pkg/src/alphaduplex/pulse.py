"""Band-limited pulse spectra and the effective-interference (EI) factor.

A pulse is stored as a template ``x(nu)`` on normalized frequency
``nu = f / B`` supported on [-1/2, 1/2].  The physical spectrum is
``X(f) = x(f / B) / sqrt(B)`` so that ``int X(f)^2 df = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .quadrature import integrate

DEFAULT_EI_TOLERANCE = 1e-6
KINDS = ("rect", "rrc", "gauss", "sinc")


def _rect(nu, _param):
    return np.ones_like(nu)


def _rrc(nu, rolloff):
    # symbol period chosen so the excess band ends exactly at nu = 1/2
    t = 1.0 + rolloff
    a = np.abs(nu) * t
    flat = (1.0 - rolloff) / 2.0
    out = np.ones_like(nu)
    if rolloff > 0.0:
        taper = a > flat
        out[taper] = np.cos(np.pi / (2.0 * rolloff) * (a[taper] - flat))
    return out


def _gauss(nu, fraction):
    s = fraction / 2.0
    return np.exp(-0.5 * (nu / s) ** 2)


def _sinc(nu, _param):
    return np.sinc(2.0 * nu)


_SHAPES = {"rect": _rect, "rrc": _rrc, "gauss": _gauss, "sinc": _sinc}


@dataclass(frozen=True)
class PulseShape:
    kind: str
    bandwidth: float
    param: float = 0.0
    scale: float = field(default=1.0, repr=False)

    @property
    def name(self) -> str:
        if self.kind in ("rrc", "gauss"):
            return f"{self.kind}:{self.param:g}"
        return self.kind

    def breakpoints(self) -> tuple[float, ...]:
        """Kinks of the normalized template (including the band edges)."""
        pts = [-0.5, 0.5]
        if self.kind == "rrc" and 0.0 < self.param < 1.0:
            flat = (1.0 - self.param) / (2.0 * (1.0 + self.param))
            pts += [-flat, flat]
        return tuple(sorted(pts))

    def template(self, nu):
        """Unit-energy template on normalized frequency (zero outside the band)."""
        nu = np.asarray(nu, dtype=float)
        inside = np.abs(nu) <= 0.5
        out = np.zeros_like(nu)
        out[inside] = self.scale * _SHAPES[self.kind](nu[inside], self.param)
        return out

    def spectrum(self, f):
        """Spectrum magnitude X(f) in 1/sqrt(Hz)."""
        return self.template(np.asarray(f, dtype=float) / self.bandwidth) / np.sqrt(self.bandwidth)

    def energy(self, rtol=1e-12) -> float:
        val, _ = integrate(lambda nu: self.template(nu) ** 2, -0.5, 0.5,
                           self.breakpoints(), rtol=rtol)
        return val


def make_pulse(kind: str, bandwidth: float, param: float | None = None) -> PulseShape:
    if not bandwidth > 0:
        raise ConfigError(f"bandwidth must be positive, got {bandwidth}")
    if kind not in _SHAPES:
        raise ConfigError(f"unknown pulse kind {kind!r}; expected one of {KINDS}")
    if kind == "rrc":
        param = 0.0 if param is None else float(param)
        if not 0.0 <= param <= 1.0:
            raise ConfigError(f"rrc rolloff must lie in [0, 1], got {param}")
    elif kind == "gauss":
        param = 0.5 if param is None else float(param)
        if not 0.0 < param <= 1.0:
            raise ConfigError(f"gauss bandwidth fraction must lie in (0, 1], got {param}")
    elif param is not None:
        raise ConfigError(f"pulse kind {kind!r} takes no parameter")
    else:
        param = 0.0

    raw = PulseShape(kind, float(bandwidth), param)
    return PulseShape(kind, float(bandwidth), param, scale=1.0 / np.sqrt(raw.energy()))


def parse_pulse(text: str, bandwidth: float) -> PulseShape:
    """Build a pulse from ``rect``, ``rrc:<rolloff>``, ``gauss:<fraction>`` or ``sinc``."""
    kind, _, arg = str(text).strip().partition(":")
    if arg:
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"bad pulse parameter in {text!r}") from None
        return make_pulse(kind, bandwidth, value)
    return make_pulse(kind, bandwidth)


def effective_interference(x: PulseShape, h: PulseShape, alpha: float,
                           rtol: float = DEFAULT_EI_TOLERANCE) -> float:
    """Matched-filter leakage of interferer ``x`` into receiver template ``h``.

    The interferer occupies the adjacent channel shifted by (1 - alpha) B, so
    only the band [B/2 - alpha B, B/2] contributes to the correlation
    ``int X(f - (1 - alpha) B) H(f) df``.  The result is clamped to [0, 1].
    """
    if x.bandwidth != h.bandwidth:
        raise ConfigError("interferer and receiver pulses must share the same bandwidth")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return 0.0

    shift = 1.0 - alpha
    lo, hi = 0.5 - alpha, 0.5
    pts = set(h.breakpoints()) | {p + shift for p in x.breakpoints()}
    val, _ = integrate(lambda nu: x.template(nu - shift) * h.template(nu),
                       lo, hi, pts, rtol=rtol)
    return float(min(max(val, 0.0), 1.0))


@dataclass(frozen=True)
class EICurve:
    alphas: np.ndarray
    values: np.ndarray
    interferer: str
    receiver: str


def ei_curve(x: PulseShape, h: PulseShape, alpha_grid, rtol=DEFAULT_EI_TOLERANCE) -> EICurve:
    alphas = np.asarray(alpha_grid, dtype=float)
    if alphas.ndim != 1 or alphas.size == 0:
        raise ConfigError("alpha grid must be a non-empty 1-D sequence")
    if np.any(np.diff(alphas) < 0):
        raise ConfigError("alpha grid must be sorted")
    values = np.array([effective_interference(x, h, a, rtol) for a in alphas])
    return EICurve(alphas, values, x.name, h.name)

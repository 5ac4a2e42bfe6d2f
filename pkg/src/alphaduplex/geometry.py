"""BS topologies, user drops and nearest-BS association."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, TopologyParseError


@dataclass(frozen=True)
class Rect:
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1000.0
    y1: float = 1000.0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigError(f"degenerate area {self}")

    @property
    def size(self):
        return self.x1 - self.x0, self.y1 - self.y0

    @property
    def measure(self):
        w, h = self.size
        return w * h

    @property
    def centroid(self):
        return np.array([(self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0])

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        return ((pts[:, 0] >= self.x0) & (pts[:, 0] <= self.x1)
                & (pts[:, 1] >= self.y0) & (pts[:, 1] <= self.y1))

    def uniform(self, rng, n):
        u = rng.random((n, 2))
        return np.column_stack([self.x0 + u[:, 0] * (self.x1 - self.x0),
                                self.y0 + u[:, 1] * (self.y1 - self.y0)])


@dataclass(frozen=True, eq=False)
class Topology:
    bs_positions: np.ndarray
    area: Rect

    def __post_init__(self):
        pos = np.ascontiguousarray(self.bs_positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ConfigError("bs_positions must have shape (n, 2)")
        if len(pos) < 2:
            raise ConfigError(f"topology needs at least 2 BSs, got {len(pos)}")
        if not np.all(self.area.contains(pos)):
            raise ConfigError("all BS positions must lie inside the area")
        if len(np.unique(pos, axis=0)) != len(pos):
            raise ConfigError("BS positions must be pairwise distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "bs_positions", pos)

    @property
    def n_bs(self):
        return len(self.bs_positions)


@dataclass(frozen=True, eq=False)
class Deployment:
    """One user drop.

    ``active_user[c]`` indexes ``user_positions`` for the user served in cell
    ``c`` on the channel pair, or is -1 when the cell is silent.
    """

    user_positions: np.ndarray
    serving_bs: np.ndarray
    active_user: np.ndarray

    @property
    def active_mask(self):
        return self.active_user >= 0

    def active_positions(self):
        """(n_bs, 2) positions of the active user per cell; silent rows are 0."""
        out = np.zeros((len(self.active_user), 2))
        m = self.active_mask
        out[m] = self.user_positions[self.active_user[m]]
        return out


def load_topology(path, area: Rect = Rect()) -> Topology:
    """Read a BS CSV with header ``id,x_m,y_m``; ``#`` lines are comments."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = next(csv.reader([text]))
            if not header_seen:
                if [f.strip() for f in fields] != ["id", "x_m", "y_m"]:
                    raise TopologyParseError(path, lineno, "expected header 'id,x_m,y_m'")
                header_seen = True
                continue
            if len(fields) != 3:
                raise TopologyParseError(path, lineno, f"expected 3 fields, got {len(fields)}")
            try:
                x, y = float(fields[1]), float(fields[2])
            except ValueError:
                raise TopologyParseError(path, lineno, f"non-numeric coordinate in {text!r}") from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise TopologyParseError(path, lineno, "non-finite coordinate")
            if not area.contains((x, y))[0]:
                raise TopologyParseError(path, lineno, f"BS ({x}, {y}) outside the study area")
            rows.append((x, y))
    if not header_seen:
        raise TopologyParseError(path, 1, "missing header 'id,x_m,y_m'")
    return Topology(np.array(rows, dtype=float).reshape(-1, 2), area)


def save_topology(topology: Topology, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x_m", "y_m"])
        for i, (x, y) in enumerate(topology.bs_positions):
            w.writerow([i, repr(float(x)), repr(float(y))])


def generate_topology_ppp(density: float, area: Rect, rng) -> Topology:
    """Poisson BS field; redrawn until at least two BSs land in the area."""
    if not density > 0:
        raise ConfigError(f"BS density must be positive, got {density}")
    rng = np.random.default_rng(rng)
    mean = density * area.measure
    while True:
        n = rng.poisson(mean)
        if n >= 2:
            return Topology(area.uniform(rng, n), area)


def associate_nearest(point, topology: Topology) -> int:
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    return int(kernels.nearest_site(pts, topology.bs_positions)[0])


def associate(points, topology: Topology) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
    return np.asarray(kernels.nearest_site(pts, topology.bs_positions), dtype=np.int64)


def _one_per_cell(topology: Topology, rng, batch: int | None = None) -> np.ndarray:
    # rejection sampling: uniform points in the area, kept by nearest-BS cell
    m = topology.n_bs
    batch = batch or 4 * m
    out = np.zeros((m, 2))
    filled = np.zeros(m, dtype=bool)
    while not filled.all():
        pts = topology.area.uniform(rng, batch)
        cells = associate(pts, topology)
        # first accepted point per cell, in draw order
        cell_ids, first = np.unique(cells, return_index=True)
        new = ~filled[cell_ids]
        out[cell_ids[new]] = pts[first[new]]
        filled[cell_ids[new]] = True
    return out


def parse_user_mode(mode):
    """``"per-cell-uniform"`` or ``"ppp:<density>"`` -> (kind, density)."""
    if isinstance(mode, tuple):
        kind, density = mode
    else:
        kind, _, arg = str(mode).partition(":")
        density = None
        if kind == "ppp":
            try:
                density = float(arg)
            except ValueError:
                raise ConfigError(f"bad user density in {mode!r}") from None
    if kind == "per-cell-uniform":
        return kind, None
    if kind == "ppp":
        if density is None or not density > 0:
            raise ConfigError(f"user PPP density must be positive, got {density}")
        return kind, float(density)
    raise ConfigError(f"unknown user mode {mode!r}")


def drop_users(topology: Topology, mode="per-cell-uniform", rng=None) -> Deployment:
    kind, density = parse_user_mode(mode)
    rng = np.random.default_rng(rng)
    m = topology.n_bs
    if kind == "per-cell-uniform":
        pos = _one_per_cell(topology, rng)
        return Deployment(pos, np.arange(m), np.arange(m))

    n = rng.poisson(density * topology.area.measure)
    pos = topology.area.uniform(rng, n)
    serving = associate(pos, topology) if n else np.zeros(0, dtype=np.int64)
    active = np.full(m, -1, dtype=np.int64)
    # one uniformly chosen active user per populated cell
    keys = rng.random(n)
    for c in range(m):
        members = np.flatnonzero(serving == c)
        if members.size:
            active[c] = members[np.argmin(keys[members])]
    return Deployment(pos, serving, active)


def drop_partners(topology: Topology, deployment: Deployment, mode="per-cell-uniform", rng=None):
    """Second user per cell for the two-pair HD-terminal layout.

    Returns ``(positions, mask)`` with one row per cell; ``mask`` is False for
    cells that cannot supply a partner distinct from the active user.
    """
    kind, _ = parse_user_mode(mode)
    rng = np.random.default_rng(rng)
    m = topology.n_bs
    if kind == "per-cell-uniform":
        return _one_per_cell(topology, rng), np.ones(m, dtype=bool)

    pos = np.zeros((m, 2))
    mask = np.zeros(m, dtype=bool)
    n = len(deployment.user_positions)
    keys = rng.random(n)
    for c in range(m):
        members = np.flatnonzero(deployment.serving_bs == c)
        members = members[members != deployment.active_user[c]]
        if members.size:
            pos[c] = deployment.user_positions[members[np.argmin(keys[members])]]
            mask[c] = True
    return pos, mask


def select_tagged_cell(topology: Topology, policy="centroid", deployment: Deployment | None = None):
    if policy == "centroid":
        return np.array([associate_nearest(topology.area.centroid, topology)])
    if policy == "all-cells":
        if deployment is None:
            raise ConfigError("all-cells tagging needs a deployment")
        return np.flatnonzero(deployment.active_mask)
    raise ConfigError(f"unknown tagging policy {policy!r}")

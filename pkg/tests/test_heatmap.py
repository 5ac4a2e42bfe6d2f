import math

import numpy as np
import pytest

from alphaduplex.channel import PowerParams, PropagationParams, dbm_to_watt
from alphaduplex.errors import ConfigError
from alphaduplex.geometry import Rect, Topology, drop_users, generate_topology_ppp
from alphaduplex.heatmap import InterferenceGrid, interference_grid, interference_maps, pixel_centers

FIG1 = PowerParams(p_d=8.0, rho=float(dbm_to_watt(-50)))


def test_link_budget_pixel():
    topo = Topology(np.array([[105.0, 5.0], [995.0, 995.0]]), Rect())
    g = interference_grid(topo, [], "downlink", 10.0, FIG1)
    pl = lambda d: 22 * math.log10(d) + 28 + 20 * math.log10(2)
    far = math.hypot(990, 990)
    # 39.031 - 78.021 dBm from the near BS, plus the far BS
    expected = 10 * math.log10(10 ** ((39.0309 - pl(100)) / 10) + 10 ** ((39.0309 - pl(far)) / 10))
    assert g.values[0, 0] == pytest.approx(expected, abs=1e-3)
    assert g.values[0, 0] == pytest.approx(-38.99, abs=0.02)


def test_grid_geometry():
    topo = generate_topology_ppp(3e-5, Rect(), 1)
    pix, shape = pixel_centers(topo, 25.0)
    assert shape == (40, 40)
    assert pix[0].tolist() == [12.5, 12.5]
    with pytest.raises(ConfigError):
        pixel_centers(topo, 0.0)
    with pytest.raises(ConfigError):
        interference_grid(topo, [], "sideways", 10.0, FIG1)


@pytest.fixture(scope="module")
def maps():
    topo = generate_topology_ppp(3e-5, Rect(), 2)
    return topo, interference_maps(topo, 20.0, FIG1, redraws=20, rng_for=lambda r: np.random.default_rng(r))


def test_fd_is_linear_sum(maps):
    topo, m = maps
    np.testing.assert_allclose(m["fd"].linear, m["downlink"].linear + m["uplink"].linear, rtol=1e-12)
    deps = [drop_users(topo, "per-cell-uniform", np.random.default_rng(r)) for r in range(20)]
    direct = interference_grid(topo, deps, "fd", 20.0, FIG1)
    np.testing.assert_allclose(direct.values, m["fd"].values, atol=1e-9)
    assert np.all(np.isfinite(m["fd"].values))


def test_uplink_quieter_than_downlink(maps):
    _, m = maps
    assert m["uplink"].mean_dbm() < m["downlink"].mean_dbm()


def test_doubling_power_adds_3db():
    topo = generate_topology_ppp(3e-5, Rect(), 3)
    a = interference_grid(topo, [], "downlink", 50.0, FIG1)
    b = interference_grid(topo, [], "downlink", 50.0, PowerParams(p_d=16.0, rho=FIG1.rho))
    np.testing.assert_allclose(b.values - a.values, 10 * math.log10(2), atol=1e-9)


def test_nearest_source_upper_bound():
    topo = Topology(np.array([[200.0, 300.0], [700.0, 650.0], [450.0, 900.0]]), Rect())
    g = interference_grid(topo, [], "downlink", 25.0, FIG1)
    pix, _ = pixel_centers(topo, 25.0)
    d = np.hypot(*(pix[:, None, :] - topo.bs_positions[None]).transpose(2, 0, 1))
    gain = lambda r: 10 ** (-(22 * np.log10(np.maximum(r, 1.0)) + 28 + 20 * np.log10(2.0)) / 10)
    brute = 10 * np.log10(8.0 * gain(d).sum(axis=1)) + 30
    bound = 10 * np.log10(3 * 8.0 * gain(d.min(axis=1))) + 30
    np.testing.assert_allclose(g.values.ravel(), brute, atol=1e-9)
    assert np.all(g.values.ravel() <= bound + 1e-12)


def test_per_realization_flag():
    topo = generate_topology_ppp(3e-5, Rect(), 3)
    dep = drop_users(topo, "per-cell-uniform", 0)
    a = interference_grid(topo, dep, "uplink", 50.0, FIG1, fading_rng=np.random.default_rng(1))
    b = interference_grid(topo, dep, "uplink", 50.0, FIG1)
    assert not np.allclose(a.values, b.values)
    # unit-mean fading: the average over many realizations approaches the expected raster
    reps = [interference_grid(topo, dep, "uplink", 50.0, FIG1, fading_rng=np.random.default_rng(s)).linear
            for s in range(200)]
    assert np.median(np.abs(np.mean(reps, axis=0) / b.linear - 1)) < 0.1


def test_writers(tmp_path):
    g = InterferenceGrid(10.0, (0.0, 0.0), "downlink", np.array([[-40.0, -30.0], [-50.0, -45.0]]))
    g.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0].startswith("# mode=downlink origin_x=0.0 origin_y=0.0 resolution=10.0")
    assert lines[1] == "-40.000000,-30.000000"
    g.to_pgm(tmp_path / "g.pgm")
    raw = (tmp_path / "g.pgm").read_bytes()
    assert raw.startswith(b"P5\n2 2\n255\n")
    # top image row is the highest-y raster row
    assert list(raw[-4:]) == [0, 64, 128, 255]

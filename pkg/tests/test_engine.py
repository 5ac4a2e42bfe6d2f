import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from alphaduplex.channel import PowerParams, PropagationParams, dbm_to_watt
from alphaduplex.engine import (DuplexConfig, LinkFading, RateCurve, RateEstimate, curve_from_batch,
                                downlink_rates, ergodic_rate, estimate, find_balanced_alpha, link_terms,
                                rate_sample, simulate, sinr_downlink, sinr_downlink_backcompat,
                                sinr_uplink, substream, sweep_alpha, TOPOLOGY, uplink_rates)
from alphaduplex.errors import ConfigError, EstimationError
from alphaduplex.geometry import Deployment, Rect, Topology, generate_topology_ppp

# Hand link budgets (plain math, outside the package) for the two-cell layout:
# UL: rho=-70 dBm vs user 2 at 400 m (-83.2453 dBm) + BS 2 at 500 m (-56.4082 dBm)
UL_ORACLE_DB = -13.600747286015519
# DL: -41.0309 dBm vs BS 2 at 400 m (-54.2762 dBm) + user 2 at 300 m (-80.4967 dBm)
DL_ORACLE_DB = 13.23496310481832


def db(x):
    return 10 * math.log10(x)


def oracle_config(**kw):
    base = dict(alpha=1.0, power=PowerParams(p_d=5.0, rho=float(dbm_to_watt(-70)), beta=0.0, n0=None),
                propagation=PropagationParams(fading="none"))
    base.update(kw)
    return DuplexConfig(**base)


def test_two_cell_uplink_oracle(two_cell):
    topo, dep = two_cell
    s = sinr_uplink(topo, dep, 0, LinkFading.unit(1, 2), 1.0, oracle_config())
    assert db(s) == pytest.approx(UL_ORACLE_DB, abs=0.01)


def test_two_cell_downlink_oracle(two_cell):
    topo, dep = two_cell
    s = sinr_downlink(topo, dep, 0, LinkFading.unit(1, 2), 1.0, oracle_config())
    assert db(s) == pytest.approx(DL_ORACLE_DB, abs=0.01)


def test_single_link_reduces_to_snr():
    topo = Topology(np.array([[0.0, 0.0], [900.0, 900.0]]), Rect())
    # second cell silent: no interferers at all
    dep = Deployment(np.array([[100.0, 0.0]]), np.array([0]), np.array([0, -1]))
    pw = PowerParams(beta=0.0)
    cfg = DuplexConfig(alpha=0.3, power=pw, propagation=PropagationParams(fading="none"))
    noise = pw.n0 * 10 ** 0.9 * 1.3 * 1e6
    s = sinr_uplink(topo, dep, 0, LinkFading.unit(1, 2), 0.7, cfg)
    assert s == pytest.approx(pw.rho / noise, rel=1e-12)
    from alphaduplex.channel import linear_gain
    s = sinr_downlink(topo, dep, 0, LinkFading.unit(1, 2), 0.0, cfg)
    assert s == pytest.approx(pw.p_d * linear_gain(100.0, 2.0) / noise, rel=1e-12)


def test_zero_ei_removes_bs_terms(two_cell):
    topo, dep = two_cell
    cfgs = [oracle_config(power=PowerParams(beta=b, n0=None)) for b in (0.0, 1e-3, 1.0)]
    vals = {sinr_uplink(topo, dep, 0, LinkFading.unit(1, 2), 0.0, c) for c in cfgs}
    assert len(vals) == 1


def test_uplink_monotone_harm(two_cell):
    topo, dep = two_cell
    fad = LinkFading.unit(1, 2)
    eis = np.linspace(0, 1, 11)
    s = [sinr_uplink(topo, dep, 0, fad, e, oracle_config()) for e in eis]
    assert np.all(np.diff(s) <= 0)
    betas = [0.0, 1e-9, 1e-6, 1e-3]
    s = [sinr_uplink(topo, dep, 0, fad, 0.5, oracle_config(power=PowerParams(beta=b, n0=None))) for b in betas]
    assert np.all(np.diff(s) <= 0)


def test_sinr_scale_invariance(two_cell):
    topo, dep = two_cell
    fad = LinkFading.unit(1, 2)
    t = link_terms(topo, dep, [0], fad, oracle_config())
    k = 7.3
    a = t.s_dl / (t.i_dl + 0.4 * t.c_dl)
    b = (k * t.s_dl) / (k * t.i_dl + 0.4 * k * t.c_dl)
    np.testing.assert_allclose(a, b, rtol=1e-14)


def test_backcompat_sinr(two_cell):
    topo, dep = two_cell
    fad = replace(LinkFading.unit(1, 2), partner=np.ones((1, 2)))
    partners = (np.array([[50.0, 0.0], [450.0, 0.0]]), np.array([True, True]))
    hd_cfg = oracle_config(power=PowerParams(beta=0.0, n0=None))
    ref = sinr_downlink(topo, dep, 0, fad, 0.0, hd_cfg)
    assert sinr_downlink_backcompat(topo, dep, partners, 0, fad, 0.0, hd_cfg) == ref
    vals = {sinr_downlink_backcompat(topo, dep, partners, 0, fad, 0.6,
                                     oracle_config(power=PowerParams(beta=b, n0=None)))
            for b in (0.0, 1e-4, 1.0)}
    assert len(vals) == 1
    # partner approaching the victim UE: SINR collapses down to the 1 m clamp
    # (partner kept 100 m from its BS so its transmit power stays fixed)
    thetas = [np.pi, 0.5, 0.1, 0.01, 1e-9]
    s = [sinr_downlink_backcompat(
            topo, dep, (np.array([[100 * np.cos(t), 100 * np.sin(t)], [450.0, 0.0]]), partners[1]),
            0, fad, 1.0, hd_cfg) for t in thetas]
    assert np.all(np.diff(s) <= 0)
    assert s[-1] < 2e-3 * ref
    with pytest.raises(EstimationError):
        sinr_downlink_backcompat(topo, dep, (partners[0], np.array([False, True])), 0, fad, 1.0, hd_cfg)


def test_rate_sample():
    assert rate_sample(0.0, 0.4, 1e6) == 0.0
    assert rate_sample(1.0, 0.0, 1e6) == 1e6
    assert rate_sample(3.0, 1.0, 1e6) == 4e6


@pytest.fixture(scope="module")
def small_topology():
    return generate_topology_ppp(3e-5, Rect(), substream(4, TOPOLOGY))


def test_deterministic_no_fading_frozen_deployment():
    topo = Topology(np.array([[200.0, 200.0], [800.0, 800.0]]), Rect())
    cfg = DuplexConfig(alpha=0.5, trials=10, propagation=PropagationParams(fading="none"),
                       user_mode="ppp:1e-9")
    # PPP user density ~0 -> every trial silent
    with pytest.raises(EstimationError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ergodic_rate(cfg, "uplink", topo)
    batch = simulate(topo, replace(cfg, user_mode="per-cell-uniform"))
    fixed = replace(batch, **{k: np.repeat(getattr(batch, k)[:1], 40, axis=0)
                              for k in ("s_ul", "i_ul", "c_ul", "s_dl", "i_dl", "c_dl", "c_bc")})
    est = estimate(uplink_rates(fixed, 0.5, 0.5, cfg), fixed.valid)
    assert est.ci_halfwidth == 0.0
    assert np.all(est.samples == est.samples[0])


def test_small_trial_count_warns(small_topology):
    cfg = DuplexConfig(trials=5, seed=2)
    with pytest.warns(UserWarning, match="confidence"):
        est = ergodic_rate(cfg, "uplink", small_topology)
    assert math.isnan(est.ci_halfwidth) and est.trials_used == 5


def test_ci_scaling(small_topology):
    cfg = DuplexConfig(trials=1600, seed=3)
    b = simulate(small_topology, cfg)
    full = estimate(downlink_rates(b, 0.0, 0.0, cfg), b.valid)
    quarter = estimate(downlink_rates(b, 0.0, 0.0, cfg)[:400], b.valid[:400])
    assert full.ci_halfwidth / quarter.ci_halfwidth == pytest.approx(0.5, rel=0.2)


def test_reaggregation(small_topology):
    cfg = DuplexConfig(alpha=0.3, trials=200, seed=5)
    b = simulate(small_topology, cfg)
    ei = cfg.ei()
    noise = 1e6 * 1.3 * cfg.power.n0 * 10 ** 0.9
    sinr = b.s_ul[:, 0] / (b.i_ul[:, 0] + ei * (b.c_ul[:, 0] + cfg.power.beta) + noise)
    est = ergodic_rate(cfg, "uplink", small_topology)
    assert est.mean_rate == pytest.approx(np.mean(rate_sample(sinr, 0.3, 1e6)), rel=1e-12)


def test_determinism_and_workers(small_topology):
    cfg = DuplexConfig(trials=120, seed=9, tagging="all-cells")
    a = sweep_alpha(cfg, [0, 0.5, 1], small_topology, workers=1)
    b = sweep_alpha(cfg, [0, 0.5, 1], small_topology, workers=3)
    for x, y in zip(a.uplink + a.downlink, b.uplink + b.downlink):
        assert np.array_equal(x.samples, y.samples)
        assert x.mean_rate == y.mean_rate


def test_hd_limit_termwise(small_topology):
    cfg = DuplexConfig(trials=50, seed=1)
    b = simulate(small_topology, cfg)
    ul0 = uplink_rates(b, 0.0, 0.0, cfg)
    huge = replace(b, c_ul=b.c_ul * 1e30, c_dl=b.c_dl * 1e30)
    np.testing.assert_array_equal(ul0, uplink_rates(huge, 0.0, 0.0, cfg))
    np.testing.assert_array_equal(downlink_rates(b, 0.0, 0.0, cfg), downlink_rates(huge, 0.0, 0.0, cfg))


def test_downlink_grows_when_cross_mode_weak(small_topology):
    # weak uplink: UL powers tiny relative to DL interference on every trial
    cfg = DuplexConfig(trials=100, seed=2, power=PowerParams(rho=float(dbm_to_watt(-120))))
    b = simulate(small_topology, cfg)
    assert np.nanmax(b.c_dl / b.i_dl) < 1e-3
    dl = sweep_alpha(cfg, np.linspace(0, 1, 6), small_topology).dl_means()
    assert np.all(np.diff(dl) > 0)


def test_all_cells_skips_silent(small_topology):
    cfg = DuplexConfig(trials=60, seed=2, tagging="all-cells", user_mode="ppp:1.5e-5")
    b = simulate(small_topology, cfg)
    assert np.any(~b.valid)
    est = ergodic_rate(cfg, "downlink", small_topology)
    assert est.trials_used + est.skipped == 60


def _curve(ul, dl, alphas=None):
    alphas = np.linspace(0, 1, len(ul)) if alphas is None else alphas
    mk = lambda v: [RateEstimate(float(x), 0.0, 1, 0) for x in v]
    return RateCurve(np.asarray(alphas), np.zeros(len(ul)), mk(ul), mk(dl))


def test_find_balanced_alpha():
    a, ug, dg = find_balanced_alpha(_curve([1.0, 1.3, 1.2, 0.5, 0.1], [1.0, 1.25, 1.5, 1.75, 2.0]))
    assert a == 0.25 and ug == pytest.approx(0.3) and dg == pytest.approx(0.25)
    assert find_balanced_alpha(_curve([1, 1.01, 1.02], [1, 1.5, 2]))[0] == 1.0
    assert find_balanced_alpha(_curve([1, 0.5, 0.1], [1, 1.5, 2])) == (0.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        find_balanced_alpha(_curve([1, 2], [1, 2], alphas=[0.5, 1.0]))


def test_config_validation():
    for kw in (dict(alpha=1.5), dict(trials=0), dict(ue_mode="x"), dict(tagging="x"),
               dict(pulse_ul="tri"), dict(user_mode="ppp:-1"), dict(bandwidth=0)):
        with pytest.raises(ConfigError):
            DuplexConfig(**kw)
    with pytest.raises(ConfigError):
        sweep_alpha(DuplexConfig(trials=2), [0.5, 0.1], None)


def test_backcompat_close_when_interference_dominates_beta():
    # dense network: DL interference well above beta = -40 dBm
    topo = generate_topology_ppp(1e-4, Rect(), substream(0, TOPOLOGY))
    cfg = DuplexConfig(trials=400, seed=0)
    b = simulate(topo, cfg, with_partners=True)
    hd = curve_from_batch(b, cfg, [0, 0.5, 1], ue_mode="hd-ue-backcompat").dl_means()
    fd = curve_from_batch(b, replace(cfg, power=PowerParams(beta=float(dbm_to_watt(-40)))), [0, 0.5, 1],
                          ue_mode="fd-ue").dl_means()
    assert np.all(np.abs(hd - fd) / fd <= 0.10)

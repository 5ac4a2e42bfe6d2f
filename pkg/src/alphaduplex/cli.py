"""``sim`` command line: ei, rates, backcompat and heatmap experiments."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import RunConfig, read_config_file
from .engine import (HEATMAP, curve_from_batch, find_balanced_alpha, simulate, substream)
from .errors import ConfigError
from .heatmap import interference_grid, interference_maps
from .geometry import drop_users, save_topology
from .channel import watt_to_dbm
from .pulse import ei_curve, parse_pulse

log = logging.getLogger("alphaduplex")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

STREAMS = {
    "topology": "SeedSequence(seed, spawn_key=(0,))",
    "deployment": "SeedSequence(seed, spawn_key=(1, trial))",
    "fading": "SeedSequence(seed, spawn_key=(2, trial))",
    "partner": "SeedSequence(seed, spawn_key=(3, trial))",
    "partner_fading": "SeedSequence(seed, spawn_key=(4, trial))",
    "heatmap": "SeedSequence(seed, spawn_key=(5, redraw))",
}


def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def _fmt(x):
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_manifest(out: Path, cfg: RunConfig, extra=None):
    doc = {
        "config": cfg.record(),
        "seed": cfg.seed,
        "backend": kernels.BACKEND,
        "version": __version__,
        "random_streams": STREAMS,
    }
    if extra:
        doc.update(extra)
    _write_json(out / "manifest.json", doc)


def cmd_ei(cfg: RunConfig, out: Path, workers: int = 1):
    x = parse_pulse(cfg["pulse_dl"], cfg.bandwidth)
    h = parse_pulse(cfg["pulse_ul"], cfg.bandwidth)
    tol = float(cfg["ei_tolerance"])
    curve = ei_curve(x, h, cfg.alpha_grid, rtol=tol)
    _write_csv(out / "ei.csv", ["alpha", "ei"], zip(curve.alphas, curve.values))
    write_manifest(out, cfg)
    return curve


def _rate_rows(curve, skipped):
    for a, e, ul, dl in zip(curve.alphas, curve.ei, curve.uplink, curve.downlink):
        yield [a, e, ul.mean_rate, ul.ci_halfwidth, dl.mean_rate, dl.ci_halfwidth, skipped]


def cmd_rates(cfg: RunConfig, out: Path, workers: int = 1):
    topo = cfg.topology()
    dcfg = cfg.duplex_config(ue_mode="fd-ue")
    batch = simulate(topo, dcfg, workers)
    curve = curve_from_batch(batch, dcfg, cfg.alpha_grid)
    skipped = curve.uplink[0].skipped_frac
    header = ["alpha", "ei", "ul_rate_bps", "ul_ci_bps", "dl_rate_bps", "dl_ci_bps", "skipped_frac"]
    rows = list(_rate_rows(curve, skipped))
    _write_csv(out / "rates.csv", header, rows)

    summary = {"rows": [dict(zip(header, map(_num, r))) for r in rows],
               "config": cfg.record(), "n_bs": topo.n_bs}
    if 0.0 in curve.alphas:
        a, ug, dg = find_balanced_alpha(curve)
        summary["balanced"] = {"alpha": a, "ul_gain": ug, "dl_gain": dg}
    _write_json(out / "rates.json", summary)
    save_topology(topo, out / "topology.csv")
    write_manifest(out, cfg)
    return curve


def cmd_backcompat(cfg: RunConfig, out: Path, workers: int = 1):
    topo = cfg.topology()
    base = cfg.duplex_config(ue_mode="hd-ue-backcompat")
    batch = simulate(topo, base, workers, with_partners=True)
    hd = curve_from_batch(batch, base, cfg.alpha_grid, ue_mode="hd-ue-backcompat")
    fd = []
    for beta in cfg.betas:
        c = cfg.duplex_config(power=cfg.power(beta=beta), ue_mode="fd-ue")
        fd.append(curve_from_batch(batch, c, cfg.alpha_grid, ue_mode="fd-ue"))

    labels = []
    for beta in cfg.betas:
        labels.append("off" if beta == 0.0 else f"{float(watt_to_dbm(beta)):g}")
    header = ["alpha", "ei", "ul_rate_bps", "hd_ue_dl_bps"] + [f"fd_ue_dl_bps_beta_{l}" for l in labels]
    rows = []
    for k, a in enumerate(hd.alphas):
        rows.append([a, hd.ei[k], hd.uplink[k].mean_rate, hd.downlink[k].mean_rate]
                    + [c.downlink[k].mean_rate for c in fd])
    _write_csv(out / "backcompat.csv", header, rows)
    _write_json(out / "backcompat.json", {
        "rows": [dict(zip(header, map(_num, r))) for r in rows],
        "config": cfg.record(), "n_bs": topo.n_bs,
        "skipped_frac": hd.downlink[0].skipped_frac,
    })
    write_manifest(out, cfg)
    return hd, fd


def cmd_heatmap(cfg: RunConfig, out: Path, workers: int = 1):
    topo = cfg.topology()
    dcfg = cfg.duplex_config()
    power, prop = dcfg.power, dcfg.propagation
    res = cfg.heatmap_resolution
    if cfg["heatmap_fading"] == "on":
        rng = substream(cfg.seed, HEATMAP, 0)
        dep = drop_users(topo, cfg["user_mode"], rng)
        grids = {m: interference_grid(topo, dep, m, res, power, prop, fading_rng=rng)
                 for m in ("downlink", "uplink", "fd")}
    else:
        grids = interference_maps(topo, res, power, prop, cfg.heatmap_redraws, cfg["user_mode"],
                                  rng_for=lambda r: substream(cfg.seed, HEATMAP, r))
    lo = min(float(g.values.min()) for g in grids.values())
    hi = max(float(g.values.max()) for g in grids.values())
    for mode, g in grids.items():
        g.to_csv(out / f"heatmap_{mode}.csv")
        g.to_pgm(out / f"heatmap_{mode}.pgm", lo, hi)
    means = {m: g.mean_dbm() for m, g in grids.items()}
    _write_json(out / "heatmap_summary.json", {
        "mean_dbm": means,
        "ul_minus_dl_db": means["uplink"] - means["downlink"],
        "n_bs": topo.n_bs, "config": cfg.record(),
    })
    save_topology(topo, out / "topology.csv")
    write_manifest(out, cfg)
    return grids


COMMAND_FUNCS = {"ei": cmd_ei, "rates": cmd_rates, "backcompat": cmd_backcompat, "heatmap": cmd_heatmap}


def build_parser():
    p = argparse.ArgumentParser(prog="sim", description="alpha-duplex cellular rate simulator")
    p.add_argument("command", choices=sorted(COMMAND_FUNCS))
    p.add_argument("--config", help="key=value config file or a previous manifest.json")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="worker processes; never changes outputs")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        values = read_config_file(args.config) if args.config else {}
        if values.get("command") and values["command"] != args.command:
            raise ConfigError(f"command: config is for {values['command']!r}, "
                              f"not {args.command!r}")
        values["command"] = args.command
        if args.seed is not None:
            values["seed"] = str(args.seed)
        if args.out:
            values["output_dir"] = args.out
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = RunConfig(values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        log.info("running %s into %s (backend=%s)", args.command, out, kernels.BACKEND)
        COMMAND_FUNCS[args.command](cfg, out, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

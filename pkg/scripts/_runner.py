"""Shared driver for the figure scripts: run configs over seeds, tabulate Pd."""
from __future__ import annotations

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from radar_e2e.cli import run_experiment
from radar_e2e.config import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
PFAS = ("0.001", "0.01", "0.1")


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--out", default="out/figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(names, args, tag: str) -> list:
    """Run every config in ``names`` at every seed; write ``<out>/<tag>.csv``.

    Rows carry the per-seed Pd at the reported false-alarm rates followed by
    a median row per system.
    """
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    out = Path(args.out) / args.scale / tag
    rows = []
    for name in names:
        cfg_path = CONFIGS / args.scale / f"{name}.ini"
        for seed in args.seeds:
            cfg = load_config(cfg_path)
            cfg.seed = seed
            man = run_experiment(cfg, out / f"{name}_s{seed}")
            rows.append([name, seed] + [man["pd_at_pfa"][p] for p in PFAS])
            print(f"{name:20s} seed {seed}: " + "  ".join(
                f"Pd@{p}={man['pd_at_pfa'][p]:.4f}" for p in PFAS), flush=True)
    for name in names:
        vals = np.array([r[2:] for r in rows if r[0] == name])
        rows.append([name, "median"] + list(np.median(vals, axis=0)))
    out.mkdir(parents=True, exist_ok=True)
    with open(out.parent / f"{tag}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "seed"] + [f"pd_at_{p}" for p in PFAS])
        w.writerows(rows)
    print(f"wrote {out.parent / f'{tag}.csv'}")
    return rows

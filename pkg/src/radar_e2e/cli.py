"""Command-line entry point.

    radar-e2e run <config> [--seed N] [--out DIR] [--strict]
    radar-e2e eval --weights <dir|theta_R.bin> [--tx-weights theta_T.bin] <config>
    radar-e2e baseline <config>

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 non-convergence (only with ``--strict``), 1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .baseline import NonConvergenceWarning, closed_form_pd, optimal_waveform
from .channel import rng_stream
from .config import ConfigError, ExperimentConfig, dumps_config, load_config, write_waveform
from .evaluation import Scores, receiver_scorer, simulate_scores, square_law_scorer
from .net import NormalizationUnderflowError, load_params, save_params, transmit
from .signal import ConditioningError, scnr
from .train import alternate_training

log = logging.getLogger("radar_e2e")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NONCONVERGED = 0, 1, 2, 3, 4
STREAM_EVAL = 10
REPORT_PFA = (1e-3, 1e-2, 1e-1)
NUMERIC_ERRORS = (ConditioningError, NormalizationUnderflowError, FloatingPointError,
                  np.linalg.LinAlgError)


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


class NonConvergenceError(RuntimeError):
    pass


def git_blob_sha1(data: bytes) -> str:
    """Content hash as computed by ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, StageError, NonConvergenceError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def write_history(path, history) -> None:
    cols = ["round", "stage", "mean_loss", "heldout_loss", "scnr"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for h in history:
            w.writerow([h["round"], h["stage"]] + [format(h[c], ".17g") for c in cols[2:]])


def write_theory_roc(path, scnr_value: float, n_points: int) -> None:
    pfa = np.logspace(-6, 0, n_points)
    pd = closed_form_pd(pfa, scnr_value)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pfa", "pd"])
        for a, b in zip(pfa, pd):
            w.writerow([format(a, ".17g"), format(b, ".17g")])


def _evaluate(cfg: ExperimentConfig, out: Path, score_fn, y) -> dict:
    env = cfg.test_env()
    scores: Scores = _stage("evaluate", simulate_scores, score_fn, y, env, cfg.eval.N_per_hyp,
                            rng_stream(cfg.seed, STREAM_EVAL))
    roc = scores.roc(cfg.eval.n_points)
    if cfg.eval.n_boot:
        from .evaluation import bootstrap_band
        roc.pd_lo, roc.pd_hi = bootstrap_band(scores, roc, cfg.eval.n_boot,
                                              rng_stream(cfg.seed, STREAM_EVAL + 1))
    roc.to_csv(out / "roc.csv")
    return {f"{p:g}": scores.pd_at_pfa(p) for p in REPORT_PFA}


def _write_manifest(out: Path, cfg: ExperimentConfig, files: list, t0: float, extra: dict) -> dict:
    manifest = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "init_waveform": dataclasses.asdict(cfg.init),
        "files": {f: {"path": str(out / f), "sha1": git_blob_sha1((out / f).read_bytes())}
                  for f in files},
        "wall_time_s": time.time() - t0,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def run_experiment(cfg: ExperimentConfig, out_dir=None, strict: bool = False) -> dict:
    """Train (or solve the baseline), evaluate on the test environment, write artifacts.

    Returns the manifest dict, also written to ``manifest.json``.
    """
    t0 = time.time()
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dumps_config(cfg))
    x = _stage("init", cfg.init_waveform)
    test_env = cfg.test_env()
    files = ["config.ini"]
    extra = {}

    if cfg.mode == "baseline":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonConvergenceWarning)
            sol = _stage("baseline", optimal_waveform, test_env, x)
        if not sol.converged:
            msg = "; ".join(str(w.message) for w in caught) or "optimal_waveform did not converge"
            if strict:
                raise NonConvergenceError(msg)
            log.warning(msg)
        y = sol.y
        s = scnr(y, test_env)
        write_theory_roc(out / "roc_theory.csv", s, cfg.eval.n_points)
        files.append("roc_theory.csv")
        extra.update(converged=sol.converged, objective=sol.objective, scnr=s,
                     theory_pd={f"{p:g}": closed_form_pd(p, s) for p in REPORT_PFA})
        score_fn = square_law_scorer(y, test_env)
    else:
        train = cfg.train
        if cfg.mode == "rx_only":
            train = dataclasses.replace(train, tx_steps=0)
        res = _stage("train", alternate_training, train, cfg.train_envs(), x, cfg.seed, cfg.M,
                     cfg.policy, cfg.tx_output_activation)
        save_params(out / "theta_T.bin", res.theta_T)
        save_params(out / "theta_R.bin", res.theta_R)
        write_history(out / "history.csv", res.history)
        files += ["theta_T.bin", "theta_R.bin", "history.csv"]
        y = transmit(res.theta_T, x)
        extra.update(rounds=res.rounds, scnr=scnr(y, test_env))
        score_fn = receiver_scorer(res.theta_R)

    write_waveform(out / "waveform.csv", y)
    extra["pd_at_pfa"] = _evaluate(cfg, out, score_fn, y)
    files += ["waveform.csv", "roc.csv"]
    return _write_manifest(out, cfg, files, t0, extra)


def eval_weights(cfg: ExperimentConfig, weights, tx_weights=None, out_dir=None) -> dict:
    """Evaluate saved networks on the configured test environment."""
    t0 = time.time()
    weights = Path(weights)
    if weights.is_dir():
        tx_weights = tx_weights or weights / "theta_T.bin"
        weights = weights / "theta_R.bin"
    theta_R = _stage("load", load_params, weights)
    x = cfg.init_waveform()
    if tx_weights is not None and Path(tx_weights).exists():
        y = transmit(_stage("load", load_params, tx_weights), x)
    else:
        y = x / np.linalg.norm(x)
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_waveform(out / "waveform.csv", y)
    extra = {"weights": str(weights), "scnr": scnr(y, cfg.test_env())}
    extra["pd_at_pfa"] = _evaluate(cfg, out, receiver_scorer(theta_R), y)
    return _write_manifest(out, cfg, ["waveform.csv", "roc.csv"], t0, extra)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radar-e2e", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config")
        sp.add_argument("--seed", type=int, help="override experiment.seed")
        sp.add_argument("--out", help="override experiment.output_dir")
        sp.add_argument("--strict", action="store_true",
                        help="treat non-convergence warnings as errors (exit 4)")

    common(sub.add_parser("run", help="train and evaluate (mode from config)"))
    sp = sub.add_parser("eval", help="evaluate saved weights")
    common(sp)
    sp.add_argument("--weights", required=True, help="run directory or receiver weight file")
    sp.add_argument("--tx-weights", help="transmitter weight file")
    common(sub.add_parser("baseline", help="optimal waveform + square-law detector"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "baseline":
            cfg.mode = "baseline"
        if args.command == "eval":
            manifest = eval_weights(cfg, args.weights, args.tx_weights, args.out)
        else:
            manifest = run_experiment(cfg, args.out, strict=args.strict)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, ConfigError):
            return EXIT_CONFIG
        return EXIT_NUMERIC if isinstance(exc.cause, NUMERIC_ERRORS) else EXIT_OTHER
    print(json.dumps({k: manifest[k] for k in ("mode", "seed", "pd_at_pfa") if k in manifest}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

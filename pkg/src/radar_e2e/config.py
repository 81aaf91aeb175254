"""Experiment configuration: INI-style ``[section]`` files of ``key = value`` lines.

Sections and keys::

    [experiment]  K, M, seed, mode (joint | rx_only | baseline), output_dir,
                  tx_output_activation
    [env] or [env.<name>] (one section per mixture component)
                  sigma_alpha_sq, clutter_power, clutter_powers, beta,
                  sigma_n_sq, rho, prior_p1, weight
    [train]       eta, eta_tx, Q_R, Q_T, rx_steps, tx_steps, outer_iters,
                  stop_tol, Q_val, sample_budget, loss_baseline
    [policy]      sigma_sq
    [init]        kind (stepped_frequency | file), path
    [eval]        N_per_hyp, n_points, beta_test, n_boot

Missing keys fall back to the defaults below (the published setup where
one exists).
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .signal import EnvModel, ParameterError
from .train import PolicyConfig, TrainConfig

MODES = ("joint", "rx_only", "baseline")
INIT_KINDS = ("stepped_frequency", "file")


class ConfigError(ValueError):
    pass


def stepped_frequency(K: int) -> np.ndarray:
    """Unit-power quadratic-phase chirp ``exp(j pi (k-1)^2 / K) / sqrt(K)``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    k = np.arange(K)
    return np.exp(1j * np.pi * k ** 2 / K) / np.sqrt(K)


def read_waveform(path) -> np.ndarray:
    """Waveform file: one chip per line as ``re,im`` (``#`` comments allowed)."""
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    if data.shape[1] != 2:
        raise ConfigError(f"{path}: expected two columns (re,im)")
    return data[:, 0] + 1j * data[:, 1]


def write_waveform(path, y) -> None:
    with open(path, "w") as fh:
        fh.write("# re,im\n")
        for c in np.asarray(y, dtype=complex):
            fh.write(f"{c.real:.17g},{c.imag:.17g}\n")


def make_init_waveform(kind: str, K: int, path=None) -> np.ndarray:
    if kind == "stepped_frequency":
        return stepped_frequency(K)
    if kind == "file":
        if path is None:
            raise ConfigError("init.path is required for kind=file")
        x = read_waveform(path)
        if x.size != K:
            raise ConfigError(f"init waveform has {x.size} chips, K={K}")
        return x
    raise ConfigError(f"unknown init waveform kind {kind!r}; valid: {', '.join(INIT_KINDS)}")


@dataclass
class EnvBlock:
    sigma_alpha_sq: float = 50.0
    clutter_power: float = 1 / 7
    clutter_powers: Optional[List[float]] = None
    beta: float = 2.0
    sigma_n_sq: float = 1.0
    rho: float = 0.4
    prior_p1: float = 0.5
    weight: float = 1.0

    def model(self, K: int, beta: Optional[float] = None) -> EnvModel:
        powers = self.clutter_powers if self.clutter_powers is not None \
            else [self.clutter_power] * (2 * K - 2)
        if len(powers) != 2 * K - 2:
            raise ConfigError(f"clutter_powers needs {2 * K - 2} entries for K={K}")
        return EnvModel(self.sigma_alpha_sq, tuple(powers), self.beta if beta is None else beta,
                        self.sigma_n_sq, self.rho, self.prior_p1)


@dataclass
class EvalConfig:
    N_per_hyp: int = 200_000
    n_points: int = 512
    beta_test: Optional[float] = None   # defaults to the first env block's beta
    n_boot: int = 0


@dataclass
class InitConfig:
    kind: str = "stepped_frequency"
    path: Optional[str] = None


@dataclass
class ExperimentConfig:
    K: int = 8
    M: int = 10
    seed: int = 0
    mode: str = "joint"
    output_dir: str = "out"
    tx_output_activation: str = "identity"
    envs: dict = field(default_factory=lambda: {"env": EnvBlock()})
    train: TrainConfig = field(default_factory=lambda: TrainConfig(eta=3.0, eta_tx=1.0,
                                                                   rx_steps=80, tx_steps=10))
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    init: InitConfig = field(default_factory=InitConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def train_envs(self) -> list:
        return [(b.model(self.K), b.weight) for b in self.envs.values()]

    def test_env(self) -> EnvModel:
        first = next(iter(self.envs.values()))
        return first.model(self.K, self.eval.beta_test)

    def init_waveform(self) -> np.ndarray:
        return make_init_waveform(self.init.kind, self.K, self.init.path)

    def validate(self) -> "ExperimentConfig":
        _check(self.K >= 1, "experiment.K", "must be >= 1")
        _check(self.M >= 1, "experiment.M", "must be >= 1")
        _check(self.mode in MODES, "experiment.mode", f"must be one of {MODES}")
        _check(self.tx_output_activation in ("identity", "tanh", "sigmoid"),
               "experiment.tx_output_activation", "unknown activation")
        _check(self.init.kind in INIT_KINDS, "init.kind", f"must be one of {INIT_KINDS}")
        _check(len(self.envs) >= 1, "env", "at least one env section required")
        total = sum(b.weight for b in self.envs.values())
        _check(abs(total - 1.0) <= 1e-9, "env.weight", f"weights sum to {total}, need 1")
        for name, b in self.envs.items():
            try:
                b.model(self.K)
            except (ParameterError, ValueError) as exc:
                raise ConfigError(f"[{name}] {exc}") from exc
        if self.eval.beta_test is not None:
            try:
                self.test_env()
            except ParameterError as exc:
                raise ConfigError(f"eval.beta_test: {exc}") from exc
        _check(self.eval.N_per_hyp >= 1, "eval.N_per_hyp", "must be >= 1")
        _check(self.eval.n_points >= 2, "eval.n_points", "must be >= 2")
        _check(self.eval.n_boot >= 0, "eval.n_boot", "must be >= 0")
        return self


def _check(cond, name, msg):
    if not cond:
        raise ConfigError(f"{name}: {msg}")


_SECTION_TYPES = {
    "experiment": None,
    "train": TrainConfig,
    "policy": PolicyConfig,
    "init": InitConfig,
    "eval": EvalConfig,
}
_EXPERIMENT_KEYS = ("K", "M", "seed", "mode", "output_dir", "tx_output_activation")


def _field_types(cls) -> dict:
    hints = {f.name: f.type for f in dataclasses.fields(cls) if f.init}
    return hints


def _parse_value(raw: str, typ: str, where: str):
    raw = raw.strip()
    optional = "Optional" in typ
    if optional and raw.lower() in ("", "none"):
        return None
    try:
        if "List[float]" in typ:
            return [_parse_value(v, "float", where) for v in raw.split(",") if v.strip()]
        if "bool" in typ:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in typ:
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if "float" in typ:
            if "/" in raw:
                num, den = raw.split("/")
                return float(num) / float(den)
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ}") from exc
    return raw


def _unknown(section, key, valid):
    raise ConfigError(f"unknown key {key!r} in [{section}]; valid keys: {', '.join(sorted(valid))}")


def loads_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = ExperimentConfig()
    env_sections = [s for s in cp.sections() if s == "env" or s.startswith("env.")]
    if env_sections:
        cfg.envs = {}
    env_types = _field_types(EnvBlock)
    for sec in cp.sections():
        items = dict(cp.items(sec))
        if sec in env_sections:
            vals = {}
            for k, v in items.items():
                if k not in env_types:
                    _unknown(sec, k, env_types)
                vals[k] = _parse_value(v, str(env_types[k]), f"{sec}.{k}")
            try:
                cfg.envs[sec] = EnvBlock(**vals)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{sec}] {exc}") from exc
            continue
        if sec not in _SECTION_TYPES:
            raise ConfigError(f"unknown section [{sec}]; valid: env, env.<name>, "
                              + ", ".join(_SECTION_TYPES))
        if sec == "experiment":
            types = {k: str(_field_types(ExperimentConfig)[k]) for k in _EXPERIMENT_KEYS}
            for k, v in items.items():
                if k not in types:
                    _unknown(sec, k, types)
                setattr(cfg, k, _parse_value(v, types[k], f"{sec}.{k}"))
            continue
        cls = _SECTION_TYPES[sec]
        types = _field_types(cls)
        current = dataclasses.asdict(getattr(cfg, sec))
        for k, v in items.items():
            if k not in types:
                _unknown(sec, k, types)
            current[k] = _parse_value(v, str(types[k]), f"{sec}.{k}")
        try:
            setattr(cfg, sec, cls(**current))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{sec}] {exc}") from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    return loads_config(Path(path).read_text())


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def dumps_config(cfg: ExperimentConfig) -> str:
    """Serialize every field; ``loads_config(dumps_config(c)) == c``."""
    out = io.StringIO()
    out.write("[experiment]\n")
    for k in _EXPERIMENT_KEYS:
        out.write(f"{k} = {_fmt(getattr(cfg, k))}\n")
    for name, block in cfg.envs.items():
        out.write(f"\n[{name}]\n")
        for k, v in dataclasses.asdict(block).items():
            out.write(f"{k} = {_fmt(v)}\n")
    for sec in ("train", "policy", "init", "eval"):
        out.write(f"\n[{sec}]\n")
        for k, v in dataclasses.asdict(getattr(cfg, sec)).items():
            out.write(f"{k} = {_fmt(v)}\n")
    return out.getvalue()

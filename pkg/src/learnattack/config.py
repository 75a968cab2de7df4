"""Experiment configuration: an INI-style file parsed with :mod:`configparser`.

Grammar (``schema_version = 1``)::

    [experiment]  schema_version, name, trials, seed
    [plant]       kind = scalar|vector|nonlinear; a; noise_var; x0_var;
                  A; noise_cov; x0_cov; dynamics; rkhs_norm_bound
    [prior]       kind = fixed|uniform; R
    [controller]  kind = linear_gain|linear_gain_matrix|nonlinear_named|zero;
                  gain; gain_of_a; K; name; privacy = none|iid_gaussian|
                  iid_gaussian_vector|example4_recursive; privacy_var;
                  privacy_cov; eta; allow_small_eta; lq_q; lq_r
    [attack]      kind = none|ls-scalar|ls-vector|gp|replay; L;
                  malicious = destabilize|zero; mu; clean_learning;
                  gp_length_scale; gp_signal_var; gp_white_var
    [detector]    delta (scalar tests); gamma (covariance test); T
    [bounds]      beta; zeta; rho; chi
    [sweep]       axis = section.key; values = v1 v2 ...

Matrices are written row by row, rows separated by ``;``.  Lists are
whitespace-separated.  Every key outside this table is rejected.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacker import Kernel, MaliciousActuation
from .controller import ControlPolicy, LQWeights, PrivacySignalSpec
from .core import ConfigError, operator_norm
from .plant import GainPrior, NonlinearPlant, ScalarPlant, VectorPlant

SCHEMA_VERSION = 1

KEYS = {
    "experiment": {"schema_version", "name", "trials", "seed"},
    "plant": {"kind", "a", "noise_var", "x0_var", "A", "noise_cov", "x0_cov", "dynamics", "rkhs_norm_bound"},
    "prior": {"kind", "R"},
    "controller": {"kind", "gain", "gain_of_a", "K", "name", "privacy", "privacy_var", "privacy_cov",
                   "eta", "allow_small_eta", "lq_q", "lq_r"},
    "attack": {"kind", "L", "malicious", "mu", "clean_learning", "gp_length_scale", "gp_signal_var",
               "gp_white_var"},
    "detector": {"delta", "gamma", "T"},
    "bounds": {"beta", "zeta", "rho", "chi"},
    "sweep": {"axis", "values"},
}

ATTACK_KINDS = ("none", "ls-scalar", "ls-vector", "gp", "replay")


def parse_matrix(text: str) -> np.ndarray:
    rows = [r.split() for r in text.strip().split(";") if r.strip()]
    try:
        m = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"cannot parse matrix {text!r}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"matrix {text!r} is not square")
    return m


def format_matrix(m: np.ndarray) -> str:
    return "; ".join(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(m))


def _new_parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    p.optionxform = str  # keys are case sensitive (A vs a)
    return p


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    trials: int
    seed: int
    plant: ScalarPlant | VectorPlant | NonlinearPlant
    prior: GainPrior
    policy: ControlPolicy
    privacy: PrivacySignalSpec
    lq: LQWeights
    attack: str
    L: int
    malicious: MaliciousActuation
    clean_learning: bool
    kernel: Kernel
    delta: float
    gamma: float
    T: int
    beta: float | None
    zeta: float
    rho: float | None
    chi: float
    sweep_axis: str | None
    sweep_values: tuple = ()
    policy_gain_multiplier: float | None = None
    raw: configparser.ConfigParser = field(default=None, repr=False)

    @property
    def plant_kind(self) -> str:
        if isinstance(self.plant, VectorPlant):
            return "vector"
        if isinstance(self.plant, NonlinearPlant):
            return "nonlinear"
        return "scalar"

    @property
    def attacked(self) -> bool:
        return self.attack != "none"

    def text(self) -> str:
        buf = io.StringIO()
        self.raw.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()[:16]

    def with_overrides(self, overrides: dict[str, str]) -> "ExperimentConfig":
        p = _new_parser()
        p.read_dict({s: dict(self.raw[s]) for s in self.raw.sections()})
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            if section not in KEYS or key not in KEYS[section]:
                raise ConfigError(f"unknown config key {dotted!r}")
            if not p.has_section(section):
                p.add_section(section)
            p[section][key] = str(value)
        return from_parser(p)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return loads_config(path.read_text())


def loads_config(text: str) -> ExperimentConfig:
    p = _new_parser()
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return from_parser(p)


def _flag(v: str) -> bool:
    v = v.lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def from_parser(p: configparser.ConfigParser) -> ExperimentConfig:
    for section in p.sections():
        if section not in KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(p[section]) - KEYS[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(extra)}")

    def get(section, key, default=None):
        if p.has_section(section) and key in p[section]:
            return p[section][key].strip()
        return default

    def num(section, key, default=None, cast=float):
        v = get(section, key)
        if v is None:
            return default
        try:
            if cast is int:
                try:
                    return int(v)
                except ValueError:
                    return int(float(v))
            return cast(v)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {v!r} is not a number") from exc

    version = num("experiment", "schema_version", None, int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version}")

    prior = GainPrior(get("prior", "kind", "fixed"), num("plant", "a", 1.0), num("prior", "R", 1.0))

    kind = get("plant", "kind", "scalar")
    x0 = get("plant", "x0_var")
    if kind == "scalar":
        plant = ScalarPlant(prior.value, num("plant", "noise_var", 1.0), None if x0 is None else float(x0))
        gain_bound = prior.R if prior.kind == "uniform" else abs(prior.value)
    elif kind == "vector":
        if get("plant", "A") is None or get("plant", "noise_cov") is None:
            raise ConfigError("vector plant needs A and noise_cov")
        x0c = get("plant", "x0_cov")
        plant = VectorPlant(parse_matrix(get("plant", "A")), parse_matrix(get("plant", "noise_cov")),
                            None if x0c is None else parse_matrix(x0c))
        if prior.kind != "fixed":
            raise ConfigError("vector plants support only a fixed gain matrix")
        gain_bound = operator_norm(plant.A)
    elif kind == "nonlinear":
        plant = NonlinearPlant(get("plant", "dynamics", "quadratic-sine"), num("plant", "noise_var", 1.0),
                               num("plant", "rkhs_norm_bound", 1.0), None if x0 is None else float(x0))
        gain_bound = 0.0
    else:
        raise ConfigError(f"unknown plant kind {kind!r}")

    ckind = get("controller", "kind", "linear_gain")
    gain_of_a = num("controller", "gain_of_a")
    if ckind == "linear_gain":
        if gain_of_a is not None:
            if prior.kind != "fixed":
                raise ConfigError("gain_of_a needs a fixed gain; use gain with a random prior")
            policy = ControlPolicy("linear_gain", gain=gain_of_a * prior.value, depends_on_gain=True)
        else:
            policy = ControlPolicy("linear_gain", gain=num("controller", "gain", 0.0))
    elif ckind == "linear_gain_matrix":
        if gain_of_a is not None:
            if kind != "vector":
                raise ConfigError("gain_of_a with a matrix policy needs a vector plant")
            policy = ControlPolicy("linear_gain_matrix", K=gain_of_a * plant.A, depends_on_gain=True)
        elif get("controller", "K") is not None:
            policy = ControlPolicy("linear_gain_matrix", K=parse_matrix(get("controller", "K")))
        else:
            raise ConfigError("linear_gain_matrix needs K or gain_of_a")
    else:
        policy = ControlPolicy(ckind, name=get("controller", "name"))

    pkind = get("controller", "privacy", "none")
    pcov = get("controller", "privacy_cov")
    privacy = PrivacySignalSpec(pkind, num("controller", "privacy_var", 0.0),
                                None if pcov is None else parse_matrix(pcov), num("controller", "eta", 3.0),
                                _flag(get("controller", "allow_small_eta", "false")))
    lq = LQWeights(num("controller", "lq_q", 1.0), num("controller", "lq_r", 1.0))

    attack = get("attack", "kind", "none")
    if attack not in ATTACK_KINDS:
        raise ConfigError(f"unknown attack kind {attack!r}; known: {ATTACK_KINDS}")
    expected = {"scalar": ("ls-scalar",), "vector": ("ls-vector",), "nonlinear": ("gp",)}[kind]
    if attack not in ("none", "replay") + expected:
        raise ConfigError(f"attack {attack!r} does not apply to a {kind} plant")
    L = num("attack", "L", 0, int)
    T = num("detector", "T", None, int)
    if T is None or T < 1:
        raise ConfigError("[detector] T must be a positive integer")
    if attack != "none" and not 1 <= L < T:
        raise ConfigError(f"need 1 <= L < T, got L={L}, T={T}")
    if attack in ("ls-scalar", "ls-vector") and L < 2:
        raise ConfigError("least-squares learning needs L >= 2")
    mrule = get("attack", "malicious", "destabilize")
    mu = num("attack", "mu")
    malicious = MaliciousActuation(mrule, mu) if mu is not None else MaliciousActuation.default_for(gain_bound)
    if mrule == "zero":
        malicious = MaliciousActuation("zero", 0.0)
    kernel = Kernel(num("attack", "gp_length_scale", 1.0), num("attack", "gp_signal_var", 1.0),
                    num("attack", "gp_white_var", 0.1))

    delta = num("detector", "delta", 0.1)
    gamma = num("detector", "gamma", 0.1)
    if not delta > 0 or not gamma > 0:
        raise ConfigError("delta and gamma must be positive")

    axis = get("sweep", "axis")
    values = tuple(get("sweep", "values", "").split())
    if axis is not None:
        section, _, key = axis.partition(".")
        if section not in KEYS or key not in KEYS[section] or section == "sweep":
            raise ConfigError(f"sweep axis {axis!r} is not a config key")
        if not values:
            raise ConfigError("sweep needs a nonempty values list")

    trials = num("experiment", "trials", 100, int)
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    seed = num("experiment", "seed", 0, int)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")

    return ExperimentConfig(
        name=get("experiment", "name", "experiment"),
        trials=trials,
        seed=seed,
        plant=plant,
        prior=prior,
        policy=policy,
        privacy=privacy,
        lq=lq,
        attack=attack,
        L=L,
        malicious=malicious,
        clean_learning=_flag(get("attack", "clean_learning", "false")),
        kernel=kernel,
        delta=delta,
        gamma=gamma,
        T=T,
        beta=num("bounds", "beta"),
        zeta=num("bounds", "zeta", 0.5),
        rho=num("bounds", "rho"),
        chi=num("bounds", "chi", num("plant", "rkhs_norm_bound", 1.0)),
        sweep_axis=axis,
        sweep_values=values,
        policy_gain_multiplier=gain_of_a,
        raw=p,
    )

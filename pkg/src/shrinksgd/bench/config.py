"""Experiment configuration: an INI file with one section per component.

Every key has a default; unknown sections or keys are rejected so typos fail
fast. :meth:`ExperimentConfig.to_ini` writes the fully resolved file that is
stored next to every set of results.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import warnings
from dataclasses import dataclass, field
from typing import Optional

from ..exceptions import ConfigError
from ..feature_space import FAMILIES, FeatureFamily, make_family
from ..shrinking_gradient import LearnerConfig, theorem_schedule
from ..synthetic_data import read_stream, realizable_stream, toy2d_stream

ALGORITHMS = ("shrinking", "exact_ogd", "dsgd")
DATA_KINDS = ("realizable", "toy2d", "file")


def _ints(text: str) -> list:
    return [int(v) for v in text.replace(",", " ").split()]


def _words(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _auto(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("auto", "") else conv(text)

    return parse


@dataclass
class ExperimentSection:
    algorithms: list = field(default_factory=lambda: ["shrinking"], metadata={"parse": _words})
    repeats: int = 1
    seed: int = 0
    out: str = "results"
    workers: int = 1


@dataclass
class FamilySection:
    name: str = "cosine-rff"
    dim: int = 2
    sigma: Optional[float] = field(default=None, metadata={"parse": _auto(float)})


@dataclass
class DataSection:
    kind: str = "realizable"
    support_size: int = 10
    target_norm: float = 1.0
    noise_sd: float = 0.1
    path: str = ""
    test_size: int = 2000


@dataclass
class LearnerSection:
    T: int = 100
    B: float = 2.0
    eta: Optional[float] = field(default=None, metadata={"parse": _auto(float)})
    m_train: Optional[int] = field(default=None, metadata={"parse": _auto(int)})
    c_eta: float = 1.0
    c_m: float = 1.0
    m_min: int = 1
    m_max: Optional[int] = field(default=None, metadata={"parse": _auto(int)})
    shrink_threshold_factor: float = 16.0
    shrink_ratio: float = 0.25
    eps0: float = 0.1
    delta: float = 0.05
    comparator: str = "auto"


@dataclass
class DSGDSection:
    eta0: float = 0.5
    gamma: float = 0.0
    schedule: str = "inverse_sqrt"
    average: bool = False


@dataclass
class SweepSection:
    horizons: list = field(default_factory=lambda: [500, 2000, 8000], metadata={"parse": _ints})


@dataclass
class CompareSection:
    sizes: list = field(
        default_factory=lambda: [64, 128, 256, 512, 1024, 2048, 4096], metadata={"parse": _ints}
    )
    test_eval: str = "estimate"


SECTIONS = {
    "experiment": ExperimentSection,
    "family": FamilySection,
    "data": DataSection,
    "learner": LearnerSection,
    "dsgd": DSGDSection,
    "sweep": SweepSection,
    "compare": CompareSection,
}


def _parse_section(cls, items: dict, name: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, text in items.items():
        f = known.get(key)
        if f is None:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        conv = f.metadata.get("parse")
        if conv is None:
            default = f.default
            conv = {bool: _bool, int: int, float: float, str: str}[type(default)]
        try:
            kwargs[key] = conv(text)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key} = {text!r}: {exc}") from None
    return cls(**kwargs)


def _bool(text: str) -> bool:
    try:
        return configparser.ConfigParser.BOOLEAN_STATES[text.strip().lower()]
    except KeyError:
        raise ValueError("expected a boolean") from None


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    family: FamilySection = field(default_factory=FamilySection)
    data: DataSection = field(default_factory=DataSection)
    learner: LearnerSection = field(default_factory=LearnerSection)
    dsgd: DSGDSection = field(default_factory=DSGDSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    compare: CompareSection = field(default_factory=CompareSection)

    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        sections = {}
        for name in parser.sections():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]")
            sections[name] = _parse_section(SECTIONS[name], dict(parser[name]), name)
        cfg = cls(**sections)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_string(text)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for name in SECTIONS:
            section = getattr(self, name)
            parser[name] = {f.name: _format(getattr(section, f.name)) for f in dataclasses.fields(section)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def validate(self) -> None:
        exp, lrn = self.experiment, self.learner
        bad = [a for a in exp.algorithms if a not in ALGORITHMS]
        if bad or not exp.algorithms:
            raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {exp.algorithms}")
        if exp.repeats < 1 or exp.workers < 1:
            raise ConfigError("repeats and workers must be >= 1")
        if self.data.kind not in DATA_KINDS:
            raise ConfigError(f"data.kind must be one of {DATA_KINDS}")
        if self.data.kind == "file" and not self.data.path:
            raise ConfigError("data.kind = file needs data.path")
        if lrn.comparator not in ("auto", "off"):
            raise ConfigError("learner.comparator must be auto or off")
        if self.compare.test_eval not in ("estimate", "exact"):
            raise ConfigError("compare.test_eval must be estimate or exact")
        if self.dsgd.schedule not in ("inverse_sqrt", "constant"):
            raise ConfigError("dsgd.schedule must be inverse_sqrt or constant")
        self.make_family()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                self.learner_config(max(lrn.T, 1), seed=0)
        except ValueError as exc:
            raise ConfigError(f"[learner] {exc}") from None

    def make_family(self) -> FeatureFamily:
        fam = self.family
        if fam.name not in FAMILIES:
            raise ConfigError(f"unknown family {fam.name!r}; expected one of {sorted(FAMILIES)}")
        hyper = {} if fam.sigma is None else {"sigma": fam.sigma}
        try:
            return make_family(fam.name, fam.dim, **hyper)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def make_stream(self, seed: int):
        data = self.data
        family = self.make_family()
        try:
            if data.kind == "realizable":
                return realizable_stream(
                    family, data.support_size, data.target_norm, data.noise_sd, family.input_dim, seed
                )
            if data.kind == "toy2d":
                if family.input_dim != 2:
                    raise ValueError("toy2d data needs family.dim = 2")
                return toy2d_stream(data.noise_sd, seed)
            return read_stream(data.path)
        except (ValueError, OSError) as exc:
            raise ConfigError(f"[data] {exc}") from None

    def schedule(self, T: int, force: bool = False):
        """``(eta, m_train)`` for horizon ``T``.

        Explicit ``eta``/``m_train`` win unless ``force``; the scheduled
        ``m_train`` is clamped to ``[m_min, m_max]``.
        """
        lrn = self.learner
        sched = theorem_schedule(lrn.B, max(T, 1), lrn.c_eta, lrn.c_m)
        eta = sched.eta if force or lrn.eta is None else lrn.eta
        if lrn.m_train is not None and not force:
            return eta, lrn.m_train
        m = max(sched.m_train, lrn.m_min)
        if lrn.m_max is not None:
            m = min(m, lrn.m_max)
        return eta, m

    def learner_config(self, T: int, seed: int, force_schedule: bool = False) -> LearnerConfig:
        lrn = self.learner
        eta, m = self.schedule(T, force_schedule)
        return LearnerConfig(
            T=T,
            B=lrn.B,
            eta=eta,
            m_train=m,
            shrink_threshold_factor=lrn.shrink_threshold_factor,
            shrink_ratio=lrn.shrink_ratio,
            seed=seed,
            c_eta=lrn.c_eta,
            c_m=lrn.c_m,
        )

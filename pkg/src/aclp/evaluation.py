"""Blanket recovery metrics and the repeated-sampling benchmark on a known network."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bayesnet import BayesNet, forward_sample, hide_latents, resolve_alias
from .mag import CapabilityError, latent_project, true_mag_mb
from .smmb import smmb
from .structlearn import ScoringContext


@dataclass
class MetricsReport:
    mnc: int
    mni: int
    mnf: int
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        if self.mnc > self.mni:
            raise ValueError("more correct members than predicted members")


def score_mb(predicted: Iterable[str], truth: Iterable[str]) -> MetricsReport:
    """Precision, recall and F1 of a predicted blanket against the true one.

    An empty prediction has precision 0; an empty truth has recall 0 unless
    nothing is missing, in which case it is 1.
    """
    pred, true = set(predicted), set(truth)
    mnc = len(pred & true)
    mni = len(pred)
    mnf = len(true - pred)
    p = mnc / mni if mni else 0.0
    r = mnc / (mnc + mnf) if mnc + mnf else (1.0 if not pred else 0.0)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return MetricsReport(mnc, mni, mnf, p, r, f1)


@dataclass
class ExperimentConfig:
    latents: tuple[str, ...] = ()
    n: int = 2500
    repeats: int = 5
    target: str = "VTUB"
    seed: int = 0
    alpha: float = 0.05  # only meaningful for CI-test baselines; kept for the record
    update: str = "blanket"

    def __post_init__(self):
        self.latents = tuple(sorted(resolve_alias(x) for x in self.latents))
        if self.n < 1 or self.repeats < 1:
            raise ValueError("n and repeats must be positive")

    @property
    def seeds(self) -> list[int]:
        # one independent child seed per repeat, derived from the base seed
        ss = np.random.SeedSequence(self.seed).spawn(self.repeats)
        return [int(s.generate_state(1)[0]) for s in ss]


@dataclass
class RepeatResult:
    repeat: int
    seed: int
    predicted: list[str] = field(default_factory=list)
    metrics: MetricsReport | None = None
    seconds: float = 0.0
    error: str | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    truth: list[str]
    repeats: list[RepeatResult]
    seconds: float

    @property
    def ok(self) -> list[RepeatResult]:
        return [r for r in self.repeats if r.metrics is not None]

    def mean(self, attr: str) -> float:
        vals = [getattr(r.metrics, attr) for r in self.ok]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def precision(self) -> float:
        return self.mean("precision")

    @property
    def recall(self) -> float:
        return self.mean("recall")

    @property
    def f1(self) -> float:
        # per-dataset F1 averaged, not the F1 of the averaged precision and recall
        return self.mean("f1")

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config) | {"seeds": self.config.seeds},
            "truth": self.truth,
            "repeats": [asdict(r) for r in self.repeats],
            "mean": {"precision": self.precision, "recall": self.recall, "f1": self.f1},
            "seconds": self.seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        lat = ",".join(self.config.latents) or "none"
        lines = [f"target {self.config.target}  latents {lat}  n={self.config.n}",
                 f"{'repeat':>6} {'seed':>11} {'P':>8} {'R':>8} {'F1':>8} {'sec':>7}"]
        for r in self.repeats:
            if r.metrics is None:
                lines.append(f"{r.repeat:>6} {r.seed:>11}  error: {r.error}")
            else:
                m = r.metrics
                lines.append(f"{r.repeat:>6} {r.seed:>11} {m.precision:8.4f} {m.recall:8.4f} {m.f1:8.4f} {r.seconds:7.1f}")
        lines.append(f"{'mean':>6} {'':>11} {self.precision:8.4f} {self.recall:8.4f} {self.f1:8.4f} {self.seconds:7.1f}")
        return "\n".join(lines)


def _one_repeat(net: BayesNet, config: ExperimentConfig, target: str, truth: set[str], i: int, seed: int) -> RepeatResult:
    t0 = time.perf_counter()
    res = RepeatResult(i, seed)
    try:
        data = hide_latents(forward_sample(net, config.n, seed), config.latents)
        mb = smmb(ScoringContext(data, update=config.update), target)
        res.predicted = sorted(mb.members)
        res.metrics = score_mb(mb.members, truth)
    except CapabilityError as exc:
        res.error = str(exc)
    res.seconds = time.perf_counter() - t0
    return res


def run_experiment(net: BayesNet, config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    target = resolve_alias(config.target)
    if target not in net.names:
        raise ValueError(f"unknown target {config.target!r}")
    if target in config.latents:
        raise ValueError("the target cannot be latent")
    t0 = time.perf_counter()
    truth = true_mag_mb(latent_project(net, config.latents), target).members
    seeds = config.seeds
    if jobs == 1:
        repeats = [_one_repeat(net, config, target, truth, i, s) for i, s in enumerate(seeds)]
    else:
        from joblib import Parallel, delayed
        repeats = Parallel(n_jobs=jobs)(delayed(_one_repeat)(net, config, target, truth, i, s)
                                        for i, s in enumerate(seeds))
    return ExperimentResult(config, sorted(truth), list(repeats), time.perf_counter() - t0)


def f1_of_means(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def summarize(results: Sequence[ExperimentResult]) -> str:
    lines = [f"{'latents':<24} {'n':>6} {'P':>8} {'R':>8} {'F1':>8}"]
    for r in results:
        lat = ",".join(r.config.latents) or "none"
        lines.append(f"{lat:<24} {r.config.n:>6} {r.precision:8.4f} {r.recall:8.4f} {r.f1:8.4f}")
    return "\n".join(lines)

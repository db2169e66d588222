"""Direct vs. Difference prompting: repeated trials, scoring and report.

Every response is embedded and compared with the scenario's reference
statement by cosine similarity; the two methods' similarity samples are
then compared with Welch's t-test. Trial indices are 0-based in memory
and 1-based in every rendered report.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .embedding import EmbeddingProvider
from .errors import ConfigError, MissingMethod, SampleTooSmall, TrialError
from .llm import METHODS, BackendSpec, TemplateRegistry, Tracer, build_prompt, complete
from .stats import cosine_similarity, welch_t_test

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class Scenario:
    name: str
    reference: str
    templates: dict[str, str] = field(default_factory=lambda: {
        "direct": "temporal.direct", "difference": "temporal.difference"})
    attachments: list[str] = field(default_factory=list)
    n_trials: int = 20
    alpha: float = 0.05
    backend: dict[str, Any] = field(default_factory=dict)
    provider: dict[str, Any] = field(default_factory=dict)
    custom_templates: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        if not self.reference.strip():
            raise ConfigError(f"scenario {self.name!r} has no reference statement")
        missing = [m for m in METHODS if m not in self.templates]
        if missing:
            raise ConfigError(f"scenario {self.name!r} lacks templates for {missing}")
        if self.n_trials < 1 or not 0 < self.alpha < 1:
            raise ConfigError(f"scenario {self.name!r}: need n_trials >= 1 and 0 < alpha < 1")

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
        try:
            return cls(
                name=cfg.get("name", path.stem),
                reference=cfg["reference"],
                templates=dict(cfg.get("methods", {"direct": "temporal.direct",
                                                   "difference": "temporal.difference"})),
                attachments=list(cfg.get("attachments", [])),
                n_trials=int(cfg.get("n_trials", 20)),
                alpha=float(cfg.get("alpha", 0.05)),
                backend=dict(cfg.get("backend", {})),
                provider=dict(cfg.get("provider", {})),
                custom_templates=dict(cfg.get("templates", {})),
                base_dir=path.parent,
            )
        except KeyError as exc:
            raise ConfigError(f"{path}: missing key {exc}") from None

    def registry(self) -> TemplateRegistry:
        return TemplateRegistry.from_mapping(self.custom_templates)

    def make_backend(self) -> BackendSpec:
        return BackendSpec.from_config(self.backend, self.base_dir)

    def make_provider(self) -> EmbeddingProvider:
        return EmbeddingProvider.from_config(self.provider, self.base_dir)


@dataclass(frozen=True)
class TrialResult:
    method: str
    trial_index: int
    response_text: str
    embedding: tuple[float, ...]
    similarity: float

    def to_dict(self, with_embedding: bool = False) -> dict:
        d = {"method": self.method, "trial": self.trial_index + 1,
             "similarity": self.similarity, "response": self.response_text}
        if with_embedding:
            d["embedding"] = list(self.embedding)
        return d


def _write_trail(trail: TextIO | None, results: Iterable[TrialResult]) -> None:
    if trail is None:
        return
    for r in results:
        trail.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    trail.flush()


def run_trials(scenario: Scenario, backend: BackendSpec | None = None,
               provider: EmbeddingProvider | None = None, n: int | None = None, *,
               trail: TextIO | None = None, tracer: Tracer | None = None,
               parallel: int = 1) -> list[TrialResult]:
    """Run ``n`` trials of each method and score every response.

    Results are appended to ``trail`` (JSON lines, raw response included)
    as they complete, so a failing trial leaves the earlier ones on record.
    A failure is re-raised as :class:`TrialError` tagged with its method
    and trial index.
    """
    backend = backend or scenario.make_backend()
    provider = provider or scenario.make_provider()
    n = scenario.n_trials if n is None else n
    registry = scenario.registry()
    ref_embedding = provider.embed(scenario.reference)

    def one(method: str, idx: int) -> TrialResult:
        try:
            prompt = build_prompt(method, {"attachments": scenario.attachments},
                                  scenario.templates[method], registry)
            text = complete(prompt, backend, idx, tracer).text
            emb = provider.embed(text)
            sim = cosine_similarity(emb, ref_embedding)
        except Exception as exc:
            raise TrialError(method, idx, exc) from exc
        return TrialResult(method, idx, text, tuple(float(x) for x in emb), sim)

    jobs = [(m, i) for m in METHODS for i in range(n)]
    results: list[TrialResult] = []
    if parallel <= 1:
        for m, i in jobs:
            r = one(m, i)
            results.append(r)
            _write_trail(trail, [r])
        return results

    order = {job: k for k, job in enumerate(jobs)}
    error: TrialError | None = None
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        futures = {job: pool.submit(one, *job) for job in jobs}
        for job, fut in futures.items():
            try:
                results.append(fut.result())
            except TrialError as exc:
                error = error or exc
    results.sort(key=lambda r: order[(r.method, r.trial_index)])
    _write_trail(trail, results)
    if error is not None:
        raise error
    return results


@dataclass(frozen=True)
class MethodSummary:
    method: str
    samples: tuple[float, ...]
    mean: float
    min: float
    max: float
    argmin: int
    argmax: int

    @classmethod
    def of(cls, method: str, samples: Sequence[float]) -> "MethodSummary":
        arr = np.asarray(samples, dtype=float)
        return cls(method, tuple(float(x) for x in samples), statistics.fmean(samples),
                   float(arr.min()), float(arr.max()), int(arr.argmin()), int(arr.argmax()))

    def to_dict(self) -> dict:
        return {"n": len(self.samples), "mean": self.mean, "min": self.min,
                "min_trial": self.argmin + 1, "max": self.max, "max_trial": self.argmax + 1,
                "samples": list(self.samples)}


@dataclass(frozen=True)
class EvalReport:
    methods: dict[str, MethodSummary]
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    alpha: float
    reject_null: bool
    scenario: str = ""

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "methods": {m: s.to_dict() for m, s in self.methods.items()},
            "t_statistic": self.t_statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject_null": self.reject_null,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "trial", "similarity"])
        for m, s in self.methods.items():
            for k, v in enumerate(s.samples):
                w.writerow([m, k + 1, repr(v)])
        return buf.getvalue()


def make_report(results: Iterable[TrialResult], alpha: float = 0.05,
                scenario: str = "") -> EvalReport:
    """Summaries per method and Welch's t-test of difference vs. direct.

    ``t`` is positive when the Difference Method scores higher.
    """
    by_method: dict[str, dict[int, float]] = {m: {} for m in METHODS}
    for r in results:
        if r.trial_index in by_method.setdefault(r.method, {}):
            raise ValueError(f"duplicate trial {r.trial_index} for {r.method}")
        by_method[r.method][r.trial_index] = r.similarity
    for m in METHODS:
        if not by_method[m]:
            raise MissingMethod(f"no results for the {m} method")
        if len(by_method[m]) < 2:
            raise SampleTooSmall(f"{m} has {len(by_method[m])} trial(s); need >= 2")
    summaries = {m: MethodSummary.of(m, [v for _, v in sorted(by_method[m].items())])
                 for m in by_method}
    test = welch_t_test(summaries["difference"].samples, summaries["direct"].samples, alpha)
    return EvalReport(summaries, test.t, test.dof, test.p, alpha, test.reject, scenario)


def load_trail(lines: Iterable[str]) -> list[TrialResult]:
    """Rebuild trial results (without embeddings) from a persisted trail."""
    out = []
    for line in lines:
        if line.strip():
            d = json.loads(line)
            out.append(TrialResult(d["method"], int(d["trial"]) - 1, d["response"], (),
                                   float(d["similarity"])))
    return out


def summary_from_mapping(data: Mapping[str, Sequence[float]]) -> list[TrialResult]:
    """Wrap plain per-method similarity lists as trial results."""
    return [TrialResult(m, k, "", (), float(v)) for m, vals in data.items()
            for k, v in enumerate(vals)]

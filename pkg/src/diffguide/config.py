"""Run configuration loaded from a TOML file.

Example::

    norm = "L2"
    history = "history.jsonl"
    n_trials = 20
    alpha = 0.05

    [thresholds]
    theta = 10.0
    eta = 3.0
    k_sigma = 3.0

    [[extractors]]
    id = "road"
    kind = "scripted_table"
    params.table = { t0 = [{ name = "gap_m", value = 30, unit = "m" }] }

    [weights.safety]
    default = 1.0
    weights = { gap_m = 2.0 }

    [backend]
    kind = "remote"
    endpoint = "https://llm.example/v1/chat/completions"
    model_name = "some-model"
    auth_env = "LLM_API_KEY"
    temperature = 0.7

    [provider]
    kind = "deterministic_hash"
    dimension = 256

Secrets are never stored in the file; ``auth_env`` names the environment
variable that holds them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .anomaly import ThresholdSpec
from .diff import UNIT_WEIGHTS, Norm, WeightProfile
from .embedding import EmbeddingProvider
from .errors import ConfigError
from .features import ExtractorRegistry, ExtractorSpec
from .llm import BackendSpec, TemplateRegistry

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class RunConfig:
    extractors: ExtractorRegistry = field(default_factory=ExtractorRegistry)
    norm: Norm = Norm.L2
    weights: dict[str, WeightProfile] = field(default_factory=lambda: {"unit": UNIT_WEIGHTS})
    thresholds: ThresholdSpec = field(default_factory=ThresholdSpec)
    backend: dict[str, Any] = field(default_factory=dict)
    provider: dict[str, Any] = field(default_factory=dict)
    templates: TemplateRegistry = field(default_factory=TemplateRegistry)
    history_path: Path | None = None
    n_trials: int = 20
    alpha: float = 0.05
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, Any], base_dir: Path | None = None) -> "RunConfig":
        base_dir = base_dir or Path.cwd()
        known = {"norm", "history", "n_trials", "alpha", "thresholds", "extractors",
                 "weights", "backend", "provider", "templates"}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            extractors = ExtractorRegistry(
                ExtractorSpec(e["id"], e["kind"], dict(e.get("params", {})))
                for e in cfg.get("extractors", []))
            weights = {"unit": UNIT_WEIGHTS}
            for wid, w in cfg.get("weights", {}).items():
                weights[wid] = WeightProfile(wid, dict(w.get("weights", {})),
                                             float(w.get("default", 1.0)))
            th = cfg.get("thresholds", {})
            thresholds = ThresholdSpec(float(th.get("theta", math.inf)),
                                       float(th.get("eta", math.inf)),
                                       float(th.get("k_sigma", 3.0)))
            history = cfg.get("history")
            conf = cls(
                extractors=extractors,
                norm=Norm.parse(cfg.get("norm", "L2")),
                weights=weights,
                thresholds=thresholds,
                backend=dict(cfg.get("backend", {})),
                provider=dict(cfg.get("provider", {})),
                templates=TemplateRegistry.from_mapping(cfg.get("templates", {})),
                history_path=(base_dir / history) if history else None,
                n_trials=int(cfg.get("n_trials", 20)),
                alpha=float(cfg.get("alpha", 0.05)),
                base_dir=base_dir,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        if conf.n_trials < 1 or not 0 < conf.alpha < 1:
            raise ConfigError("n_trials must be >= 1 and alpha in (0, 1)")
        if conf.backend:
            conf.make_backend()
        if conf.provider:
            conf.make_provider()
        return conf

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                cfg = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_mapping(cfg, path.parent)

    def weight_profile(self, weights_id: str | None) -> WeightProfile:
        if weights_id is None:
            return UNIT_WEIGHTS
        try:
            return self.weights[weights_id]
        except KeyError:
            raise ConfigError(f"unknown weight profile {weights_id!r}") from None

    def make_backend(self) -> BackendSpec:
        return BackendSpec.from_config(self.backend, self.base_dir)

    def make_provider(self) -> EmbeddingProvider:
        return EmbeddingProvider.from_config(self.provider, self.base_dir)

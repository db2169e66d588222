"""Text embedding providers used to score responses.

``deterministic_hash``
    Signed hashed bag of words, a pure function of the text. Needs no
    model weights or network.
``table``
    Exact text -> vector lookup, for replaying recorded runs.
``remote``
    Generic embeddings HTTP endpoint (``{"model", "input"}`` in,
    ``{"data": [{"embedding": [...]}]}`` out).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import AuthMissing, ConfigError, ProviderError

PROVIDER_KINDS = ("deterministic_hash", "table", "remote")
_TOKEN = re.compile(r"\w+", re.UNICODE)


@dataclass
class EmbeddingProvider:
    kind: str = "deterministic_hash"
    dimension: int = 256
    table: Mapping[str, list[float]] = field(default_factory=dict)
    endpoint: str | None = None
    model_name: str = ""
    auth_env: str | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(f"unknown embedding provider {self.kind!r}")
        if self.kind == "table":
            dims = {len(v) for v in self.table.values()}
            if len(dims) > 1:
                raise ConfigError(f"embedding table mixes dimensions {sorted(dims)}")
            if dims:
                self.dimension = dims.pop()
        if self.kind == "remote" and not (self.endpoint and self.auth_env):
            raise ConfigError("remote provider needs endpoint and auth_env")

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], base_dir: Path | None = None) -> "EmbeddingProvider":
        cfg = dict(cfg)
        table_path = cfg.pop("table_file", None)
        if table_path is not None:
            path = Path(table_path)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            cfg["table"] = json.loads(path.read_text(encoding="utf-8"))
        return cls(**cfg)

    def embed(self, text: str) -> np.ndarray:
        if self.kind == "deterministic_hash":
            return hash_embedding(text, self.dimension)
        if self.kind == "table":
            try:
                return np.asarray(self.table[text], dtype=float)
            except KeyError:
                raise ProviderError(f"no embedding recorded for text {text[:40]!r}...") from None
        return self._embed_remote(text)

    def _embed_remote(self, text: str) -> np.ndarray:
        key = os.environ.get(self.auth_env or "")
        if not key:
            raise AuthMissing(f"environment variable {self.auth_env!r} is not set")
        body = json.dumps({"model": self.model_name, "input": text}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, method="POST", headers={
            "Content-Type": "application/json", "Authorization": f"Bearer {key}"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read())
            vec = np.asarray(payload["data"][0]["embedding"], dtype=float)
        except (urllib.error.URLError, OSError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"embedding request failed: {exc}") from None
        return vec


def hash_embedding(text: str, dimension: int = 256) -> np.ndarray:
    """Signed feature hashing of lower-cased word tokens."""
    vec = np.zeros(dimension, dtype=float)
    for token in _TOKEN.findall(text.lower()):
        h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
        vec[h % dimension] += 1.0 if (h >> 63) & 1 else -1.0
    return vec

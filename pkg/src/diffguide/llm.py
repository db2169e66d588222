"""Prompt construction and chat backends.

Prompts come from named templates. A template is a list of turns whose
text is expanded with ``str.format``-style fields from the caller's
context; the first turn usually stages the attachments and asks the model
to hold its reply. Direct-method templates may never reference computed
differences.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import re
import string
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from .diff import Difference
from .errors import (
    AuthMissing,
    BackendUnreachable,
    ConfigError,
    MissingContext,
    ScriptMiss,
    UnknownTemplate,
    UnparseableSummary,
)
from .features import FeatureVector, RawRef, StateRecord

log = logging.getLogger(__name__)

METHODS = ("direct", "difference")

TEMPORAL_STAGING = ("The above are two pictures. Please do not reply now; "
                    "reply when required later. Is this OK?")
SPATIAL_STAGING = "Please do not reply now and reply only when required later. Is this OK?"
DIRECT_QUESTION = "How do you think of this picture?"
TEMPORAL_DIFFERENCE_QUESTION = ("These two images depict events that occurred sequentially. "
                                "What is the difference between the two pictures?")
SPATIAL_DIFFERENCE_QUESTION = ("Is there some difference in the carriages? "
                               "If yes, why is there a difference?")


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    attachments: tuple[RawRef, ...] = ()

    def to_dict(self) -> dict:
        return {"role": self.role, "text": self.text,
                "attachments": [a.to_dict() for a in self.attachments]}


@dataclass(frozen=True)
class TemplateTurn:
    role: str
    text: str
    attach: bool = False


@dataclass(frozen=True)
class Template:
    id: str
    method: str
    turns: tuple[TemplateTurn, ...]
    # observations (states + attachments) needed when no Difference is supplied
    min_observations: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"template {self.id!r}: unknown method {self.method!r}")
        for turn in self.turns:
            if turn.role not in ("system", "user"):
                raise ConfigError(f"template {self.id!r}: bad role {turn.role!r}")
        if self.method == "direct" and "differences" in self.fields():
            raise ConfigError(f"direct template {self.id!r} must not reference differences")

    def fields(self) -> set[str]:
        names = set()
        for turn in self.turns:
            for _, name, _, _ in string.Formatter().parse(turn.text):
                if name:
                    names.add(name.split(".")[0].split("[")[0])
        return names

    @classmethod
    def from_dict(cls, id: str, d: Mapping[str, Any]) -> "Template":
        turns = tuple(TemplateTurn(t.get("role", "user"), t["text"], bool(t.get("attach", False)))
                      for t in d["turns"])
        return cls(id, d["method"], turns, int(d.get("min_observations", 2)))


def _staged(staging: str, question: str) -> tuple[TemplateTurn, ...]:
    return (TemplateTurn("user", staging, attach=True), TemplateTurn("user", question))


DEFAULT_TEMPLATES: dict[str, Template] = {
    t.id: t for t in (
        Template("temporal.direct", "direct", _staged(TEMPORAL_STAGING, DIRECT_QUESTION)),
        Template("temporal.difference", "difference",
                 _staged(TEMPORAL_STAGING, TEMPORAL_DIFFERENCE_QUESTION)),
        Template("spatial.direct", "direct", _staged(SPATIAL_STAGING, DIRECT_QUESTION), 1),
        Template("spatial.difference", "difference",
                 _staged(SPATIAL_STAGING, SPATIAL_DIFFERENCE_QUESTION), 1),
        Template("difference.computed", "difference", (
            TemplateTurn("user", "The following differences were detected between observed "
                                 "states, one JSON object per line:\n{differences}\n"
                                 "What do these differences imply, and what should be done?"),
        ), 0),
        Template("difference.adaptive_n", "difference", (
            TemplateTurn("user", "The following differences were detected between observed "
                                 "states, one JSON object per line:\n{differences}\n"
                                 "How many of them matter for the next decision? "
                                 "Answer on one line as: n = <number>"),
        ), 0),
        Template("partition.summarize", "direct", (
            TemplateTurn("user", "Summarize how {attributes} is distributed across the regions "
                                 "of this object: {object}. Reply with one entry per region, "
                                 "separated by semicolons, in the form "
                                 "'<region> <attribute> <number>'.", attach=True),
        ), 0),
    )
}


class TemplateRegistry:
    def __init__(self, templates: Iterable[Template] = (), defaults: bool = True):
        self._templates: dict[str, Template] = dict(DEFAULT_TEMPLATES) if defaults else {}
        for t in templates:
            self._templates[t.id] = t

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Mapping[str, Any]]) -> "TemplateRegistry":
        return cls(Template.from_dict(k, v) for k, v in mapping.items())

    def get(self, template_id: str) -> Template:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(f"template {template_id!r} is not registered") from None

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._templates

    def ids(self) -> list[str]:
        return sorted(self._templates)


@dataclass(frozen=True)
class PromptSpec:
    method: str
    turns: tuple[Turn, ...]
    template_id: str

    def to_dict(self) -> dict:
        return {"method": self.method, "template_id": self.template_id,
                "turns": [t.to_dict() for t in self.turns]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), ensure_ascii=False)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def text(self) -> str:
        return "\n".join(t.text for t in self.turns)


def _as_ref(a: RawRef | bytes | str) -> RawRef:
    if isinstance(a, RawRef):
        return a
    if isinstance(a, (bytes, bytearray)):
        return RawRef.inline(bytes(a))
    return RawRef(uri=str(a))


def build_prompt(method: str, context: Mapping[str, Any] | None = None,
                 template_id: str | None = None,
                 registry: TemplateRegistry | None = None) -> PromptSpec:
    """Expand a template into a :class:`PromptSpec`.

    ``context`` may hold ``attachments`` (raw refs, bytes or URIs),
    ``states``, ``differences`` and any other template fields. The
    ``differences`` field is rendered as Difference JSON lines. Without an
    explicit ``template_id`` the ``temporal.<method>`` template is used.
    """
    registry = registry or TemplateRegistry()
    template = registry.get(template_id or f"temporal.{method}")
    if template.method != method:
        raise UnknownTemplate(f"template {template.id!r} is for the {template.method} method")
    context = dict(context or {})
    attachments = tuple(_as_ref(a) for a in context.pop("attachments", ()))
    states: Sequence[StateRecord] = context.pop("states", ())
    diffs: Sequence[Difference] = context.pop("differences", ())

    if method == "difference" and not diffs:
        observed = len(states) + len(attachments)
        if observed < max(template.min_observations, 1):
            raise MissingContext(f"difference prompt needs a Difference or "
                                 f">= {max(template.min_observations, 1)} observations")
    values = {k: str(v) for k, v in context.items()}
    if method == "difference":
        values["differences"] = "\n".join(d.to_json() for d in diffs)
    values.setdefault("states", "\n".join(s.to_json() for s in states))

    turns = []
    for tt in template.turns:
        try:
            text = tt.text.format_map(values)
        except (KeyError, IndexError) as exc:
            raise MissingContext(f"template {template.id!r} needs {exc}") from None
        turns.append(Turn(tt.role, text, attachments if tt.attach else ()))
    return PromptSpec(method, tuple(turns), template.id)


_ADAPTIVE_N = re.compile(r"\bn\s*=\s*(\d+)", re.IGNORECASE)


def parse_adaptive_n(reply: str) -> int:
    """Read ``n = <k>`` from a model reply to the adaptive-n template."""
    m = _ADAPTIVE_N.search(reply)
    if not m or int(m.group(1)) < 1:
        raise UnparseableSummary(f"no positive 'n = <number>' in reply {reply[:60]!r}")
    return int(m.group(1))


# -- backends --------------------------------------------------------------


@dataclass
class BackendSpec:
    kind: str = "mock"
    model_name: str = "mock"
    endpoint: str | None = None
    auth_env: str | None = None
    options: dict[str, Any] = field(default_factory=dict)
    # mock only: (template_id, trial) -> reply; trial None matches any trial
    script: dict[tuple[str, int | None], str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "remote" and not (self.endpoint and self.auth_env):
            raise ConfigError("remote backend needs endpoint and auth_env")
        if self.kind not in ("mock", "remote"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")

    @classmethod
    def mock(cls, entries: Iterable[Mapping[str, Any]], **kw) -> "BackendSpec":
        """Build a mock from ``{"template_id", "trial", "response"}`` entries."""
        script = {}
        for e in entries:
            trial = e.get("trial")
            script[(e["template_id"], None if trial in (None, "*") else int(trial))] = e["response"]
        return cls(kind="mock", script=script, **kw)

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], base_dir: Path | None = None) -> "BackendSpec":
        cfg = dict(cfg)
        kind = cfg.pop("kind", "mock")
        script_file = cfg.pop("script_file", None)
        entries = list(cfg.pop("script", []))
        if script_file is not None:
            path = Path(script_file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            with open(path, encoding="utf-8") as fh:
                entries.extend(json.loads(line) for line in fh if line.strip())
        options = dict(cfg.pop("options", {}))
        for key in ("temperature", "max_retries", "timeout"):
            if key in cfg:
                options[key] = cfg.pop(key)
        if kind == "mock":
            return cls.mock(entries, options=options, **cfg)
        return cls(kind=kind, options=options, **cfg)


@dataclass(frozen=True)
class Completion:
    text: str
    usage: dict
    trial: int = 0
    retries: int = 0


class Tracer:
    """Appends request/response pairs as JSON lines."""

    def __init__(self, stream: TextIO):
        self._stream = stream
        self._lock = threading.Lock()

    def record(self, prompt: PromptSpec, backend: BackendSpec, trial: int,
               completion: Completion | None, error: Exception | None = None) -> None:
        entry = {"trial": trial, "backend": backend.kind, "model": backend.model_name,
                 "request": prompt.to_dict()}
        if completion is not None:
            entry["response"] = {"text": completion.text, "usage": completion.usage,
                                 "retries": completion.retries}
        if error is not None:
            entry["error"] = str(error)
        with self._lock:
            self._stream.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
            self._stream.flush()


def complete(prompt: PromptSpec, backend: BackendSpec, trial: int = 0,
             tracer: Tracer | None = None) -> Completion:
    """Send ``prompt`` to ``backend``; ``trial`` selects the mock script entry."""
    try:
        if backend.kind == "mock":
            result = _complete_mock(prompt, backend, trial)
        else:
            result = _complete_remote(prompt, backend, trial)
    except Exception as exc:
        if tracer is not None:
            tracer.record(prompt, backend, trial, None, exc)
        raise
    if tracer is not None:
        tracer.record(prompt, backend, trial, result)
    return result


def _complete_mock(prompt: PromptSpec, backend: BackendSpec, trial: int) -> Completion:
    for key in ((prompt.template_id, trial), (prompt.template_id, None)):
        if key in backend.script:
            text = backend.script[key]
            return Completion(text, {"prompt_chars": len(prompt.text()),
                                     "completion_chars": len(text)}, trial)
    raise ScriptMiss(f"no scripted reply for template {prompt.template_id!r} trial {trial}")


def _attachment_part(ref: RawRef) -> dict:
    if ref.uri is not None:
        url = ref.uri
    else:
        url = "data:application/octet-stream;base64," + base64.b64encode(ref.data).decode("ascii")
    return {"type": "image_url", "image_url": {"url": url}}


def chat_messages(prompt: PromptSpec) -> list[dict]:
    messages = []
    for turn in prompt.turns:
        if turn.attachments:
            content = [_attachment_part(a) for a in turn.attachments]
            content.append({"type": "text", "text": turn.text})
        else:
            content = turn.text
        messages.append({"role": turn.role, "content": content})
    return messages


def _complete_remote(prompt: PromptSpec, backend: BackendSpec, trial: int) -> Completion:
    key = os.environ.get(backend.auth_env or "")
    if not key:
        raise AuthMissing(f"environment variable {backend.auth_env!r} is not set")
    opts = backend.options
    body = {"model": backend.model_name, "messages": chat_messages(prompt)}
    if "temperature" in opts:
        body["temperature"] = opts["temperature"]
    data = json.dumps(body).encode("utf-8")
    max_retries = int(opts.get("max_retries", 2))
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        req = urllib.request.Request(backend.endpoint, data=data, method="POST", headers={
            "Content-Type": "application/json", "Authorization": f"Bearer {key}"})
        try:
            with urllib.request.urlopen(req, timeout=float(opts.get("timeout", 60))) as resp:
                payload = json.loads(resp.read())
            text = payload["choices"][0]["message"]["content"]
            return Completion(text, payload.get("usage", {}), trial, attempt)
        except (urllib.error.URLError, OSError, KeyError, IndexError, ValueError) as exc:
            last_error = exc
            log.warning("backend attempt %d/%d failed: %s", attempt + 1, max_retries + 1, exc)
            if attempt < max_retries:
                time.sleep(float(opts.get("backoff", 0.5)) * 2 ** attempt)
    raise BackendUnreachable(f"{backend.endpoint}: {last_error}", retries=max_retries)


# -- LLM-summarized spatial partition ----------------------------------------


@dataclass(frozen=True)
class PartitionSchema:
    """Known attribute words in the reply and the dims they map to."""

    attributes: Mapping[str, tuple[str, str | None]]

    def pattern(self) -> re.Pattern:
        words = "|".join(re.escape(w) for w in sorted(self.attributes, key=len, reverse=True))
        return re.compile(rf"\b({words})\b\s*[:=]?\s*([-+]?\d+(?:\.\d+)?)", re.IGNORECASE)


LANE_WIDTH_SCHEMA = PartitionSchema({"width": ("lane_width", "m"),
                                     "density": ("traffic_density", None)})


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def parse_partition(reply: str, schema: PartitionSchema) -> list[StateRecord]:
    """Turn ``"segment A width 3.5; segment B width 2.8"`` into region states."""
    entries = [e.strip() for e in re.split(r"[;\n]", reply) if e.strip()]
    if not entries:
        raise UnparseableSummary("empty partition summary")
    pattern = schema.pattern()
    lookup = {k.lower(): v for k, v in schema.attributes.items()}
    states = []
    for entry in entries:
        matches = list(pattern.finditer(entry))
        region = entry[:matches[0].start()].strip(" :,-") if matches else ""
        if not matches or not region:
            raise UnparseableSummary(f"cannot parse region entry {entry!r}")
        dims = {}
        for m in matches:
            name, unit = lookup[m.group(1).lower()]
            if name in dims:
                raise UnparseableSummary(f"attribute {name!r} repeated in {entry!r}")
            dims[name] = (float(m.group(2)), unit)
        ordered = [(name, *dims[name]) for name, _ in lookup.values() if name in dims]
        states.append(StateRecord(
            id=f"region:{_slug(region)}",
            features=FeatureVector.of(*ordered),
            region_label=region,
            raw_ref=RawRef.inline(entry),
            extractor_id="llm_summary",
        ))
    return states


def summarize_partition(object_description: str, backend: BackendSpec,
                        schema: PartitionSchema = LANE_WIDTH_SCHEMA, *,
                        attachments: Sequence[RawRef | bytes | str] = (),
                        template_id: str = "partition.summarize",
                        registry: TemplateRegistry | None = None,
                        trial: int = 0, tracer: Tracer | None = None) -> list[StateRecord]:
    """Ask the model to describe per-region attributes and parse the reply."""
    attrs = ", ".join(sorted(schema.attributes))
    prompt = build_prompt("direct", {"object": object_description, "attributes": attrs,
                                     "attachments": list(attachments)}, template_id, registry)
    reply = complete(prompt, backend, trial, tracer).text
    return parse_partition(reply, schema)

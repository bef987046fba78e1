"""Run configuration loaded from TOML or JSON."""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .chat import ChatConfig
from .embedder import EmbedderConfig
from .projection import UmapParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    corpus: str | None = None
    keywords: list[str] = field(default_factory=lambda: ["Israel", "Palestine", "Gaza", "Hamas"])
    seed: int = 0
    svd_dim: int = 34
    fit_scope: str = "per-role"
    k_min: int = 2
    k_max: int = 40
    label_threshold: float = 0.20
    table_threshold: float = 0.05
    out: str = "out"
    chat: ChatConfig = field(default_factory=ChatConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    umap: UmapParams = field(default_factory=UmapParams)
    components: dict[str, list[int]] = field(default_factory=dict)
    baseline_pairs: list[list[int]] = field(default_factory=list)
    dimstudy_dims: list[int] = field(default_factory=lambda: [2, 4, 8, 16, 34, 64, 128, 256])
    dimstudy_methods: list[str] = field(default_factory=lambda: ["svd", "pca", "umap"])
    dimstudy_max_vectors: int = 2000

    def problems(self, base: Path | None = None) -> list[str]:
        problems = []
        if self.corpus is None:
            problems.append("corpus path is required")
        elif base is not None and not (base / self.corpus).exists():
            problems.append(f"corpus file not found: {base / self.corpus}")
        if base is not None and self.chat.mode == "stub" and self.chat.stub_path:
            stub = base / self.chat.stub_path
            if not stub.exists():
                problems.append(f"chat.stub_path not found: {stub}")
        if not self.keywords or any(not isinstance(k, str) or not k.strip() for k in self.keywords):
            problems.append("keywords must be a non-empty list of non-empty strings")
        if self.svd_dim < 1:
            problems.append("svd_dim must be >= 1")
        if self.fit_scope not in ("per-role", "pooled"):
            problems.append("fit_scope must be 'per-role' or 'pooled'")
        if self.k_min < 2 or self.k_max < self.k_min:
            problems.append(f"invalid k range [{self.k_min}, {self.k_max}]")
        for name in ("label_threshold", "table_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must be in [0, 1]")
        seen: dict[int, str] = {}
        for name, clusters in self.components.items():
            for c in clusters:
                if c in seen:
                    problems.append(f"cluster {c} appears in components {seen[c]!r} and {name!r}")
                seen[c] = name
        for m in self.dimstudy_methods:
            if m not in ("svd", "pca", "umap"):
                problems.append(f"unknown dimstudy method {m!r}")
        problems += self.chat.validate()
        problems += self.embedder.validate()
        problems += self.umap.validate()
        return problems

    @property
    def umap_params(self) -> UmapParams:
        return self.umap.replace(seed=self.seed)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data: dict, section: str, problems: list[str]):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        problems.append(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    defaults = cls()
    accepted = {}
    for key, value in data.items():
        if key not in names:
            continue
        default = getattr(defaults, key)
        expected = (int, float) if isinstance(default, float) else type(default)
        if isinstance(default, (int, float, str)) and (
            not isinstance(value, expected) or isinstance(value, bool) != isinstance(default, bool)
        ):
            problems.append(f"[{section}] {key}: expected {type(default).__name__}, got {value!r}")
            continue
        accepted[key] = value
    try:
        return cls(**accepted)
    except TypeError as exc:
        problems.append(f"[{section}]: {exc}")
        return cls()


def load_config(path: str | Path | None) -> tuple[RunConfig, Path]:
    """Parse a config file; relative paths inside it resolve against its directory."""
    if path is None:
        return RunConfig(), Path.cwd()
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError([f"cannot parse {path}: {exc}"]) from exc

    problems: list[str] = []
    sections = {
        "chat": (ChatConfig, "chat"),
        "embedder": (EmbedderConfig, "embedder"),
        "umap": (UmapParams, "umap"),
    }
    kwargs = {}
    for key, (cls, name) in sections.items():
        kwargs[key] = _build(cls, data.pop(key, {}), name, problems)
    kwargs["components"] = {str(k): list(v) for k, v in data.pop("components", {}).items()}
    baseline = data.pop("baseline", {})
    kwargs["baseline_pairs"] = [list(p) for p in baseline.get("cluster_pairs", [])]
    dims = data.pop("dimstudy", {})
    for key in ("dims", "methods", "max_vectors"):
        if key in dims:
            kwargs[f"dimstudy_{key}"] = dims[key]
    top = _build(RunConfig, data, "top level", problems)
    cfg = dataclasses.replace(top, **kwargs)
    problems += cfg.problems(path.parent)
    if problems:
        raise ConfigError(problems)
    return cfg, path.parent.resolve()

"""Run configuration: TOML file, flag overrides and the config hash."""

from __future__ import annotations

import os
import re
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agents.llm import AgentConfig, Backend, Role, load_prompt
from .agents.pipeline import PipelineConfig
from .agents.review import ReviewMode
from .core import DEFAULT_MAX_SUBGROUPS, canonical_hash

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_ENV_REF = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)\}$")

AGENT_KEYS = {"backend", "model_name", "temperature", "max_retries", "timeout", "base_url", "api_key_env",
              "api_key", "requests_per_minute", "backoff_base", "mock_lexicon"}


def _interpolate_credential(value):
    # environment references are honoured for credentials only
    if isinstance(value, str):
        m = _ENV_REF.match(value.strip())
        if m:
            return os.environ.get(m.group(1))
    return value


@dataclass
class RunConfig:
    """Everything that shapes a run's outputs, plus file locations.

    Paths and worker counts are excluded from the config hash: they move
    files around without changing results.
    """

    agents: dict = field(default_factory=dict)
    seed: int = 0
    max_subgroups: int = DEFAULT_MAX_SUBGROUPS
    uncertain_threshold: int = 20
    sample_size: int = 200
    tau: float = 0.1
    window: str = "1d"
    cohesion_default: float = 1.0
    workers: int = 1
    review_mode: str = "file"
    prompts_dir: str | None = None
    checkpoint: str | None = None
    input: str | None = None
    output: str | None = None

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "RunConfig":
        data: dict = {}
        if path:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        paths = data.pop("paths", {})
        agents = data.pop("agents", {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**data)
        for k in ("prompts_dir", "checkpoint", "input", "output"):
            if k in paths:
                setattr(cfg, k, paths[k])
        if path and cfg.prompts_dir and not Path(cfg.prompts_dir).is_absolute():
            cfg.prompts_dir = str(Path(path).parent / cfg.prompts_dir)
        cfg.agents = {}
        for name, settings in agents.items():
            bad = set(settings) - AGENT_KEYS
            if bad:
                raise ValueError(f"unknown keys for agent {name}: {', '.join(sorted(bad))}")
            s = dict(settings)
            if "api_key" in s:
                s["api_key"] = _interpolate_credential(s["api_key"])
            cfg.agents[name] = s
        for k, v in overrides.items():
            if v is not None:
                setattr(cfg, k, v)
        return cfg

    def agent_configs(self, backend: str | None = None) -> dict:
        """One ``AgentConfig`` per role from ``agents.default`` merged with per-role tables."""
        base = dict(self.agents.get("default", {}))
        out = {}
        for role in Role:
            s = {**base, **self.agents.get(role.value, {})}
            if backend:
                s["backend"] = backend
            prompt = load_prompt(role, self.prompts_dir)
            out[role] = AgentConfig(role=role, prompt_template=prompt, **s)
        return out

    def pipeline_config(self, backend: str | None = None, review_path: str | None = None,
                        checkpoint_path: str | None = None) -> PipelineConfig:
        return PipelineConfig(
            agents=self.agent_configs(backend),
            seed=self.seed,
            sample_size=self.sample_size,
            uncertain_threshold=self.uncertain_threshold,
            max_subgroups=self.max_subgroups,
            review_mode=ReviewMode(self.review_mode),
            review_path=review_path,
            checkpoint_path=checkpoint_path or self.checkpoint,
            workers=self.workers,
        )

    def fingerprint(self, backend: str | None = None) -> dict:
        return {
            "agents": {r.value: a.public_dict() for r, a in self.agent_configs(backend).items()},
            "seed": self.seed,
            "max_subgroups": self.max_subgroups,
            "uncertain_threshold": self.uncertain_threshold,
            "sample_size": self.sample_size,
            "tau": self.tau,
            "cohesion_default": self.cohesion_default,
        }

    def hash(self, backend: str | None = None) -> str:
        return canonical_hash(self.fingerprint(backend))

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

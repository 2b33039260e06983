"""Service configuration: flat key=value file plus CLI overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8080"
    runner_url: str = "http://localhost:11434"
    chat_model: str = "llama3.2:3b"
    embed_backend: str = "wire"  # "wire" | "mock"
    embed_model: str = "all-minilm"
    embed_dimension: int = 384
    tau_topic: float = 0.35
    tau_faq: float = 0.75
    promote_at: int = 3
    serve_cached_first: bool = True
    auto_publish: bool = False
    store_path: str = "courselens-events.jsonl"
    seed: int = 0
    student_token: str = "student-token"
    staff_token: str = "staff-token"

    def validate(self) -> "ServiceConfig":
        if self.embed_backend not in ("wire", "mock"):
            raise ConfigError(f"embed_backend: unknown backend {self.embed_backend!r}")
        if not 0 < self.tau_faq < 1:
            raise ConfigError(f"tau_faq: {self.tau_faq} outside (0, 1)")
        if not 0 <= self.tau_topic <= 1:
            raise ConfigError(f"tau_topic: {self.tau_topic} outside [0, 1]")
        if self.promote_at < 1:
            raise ConfigError(f"promote_at: {self.promote_at} must be >= 1")
        if self.embed_dimension < 1:
            raise ConfigError(f"embed_dimension: {self.embed_dimension} must be >= 1")
        if self.student_token == self.staff_token:
            raise ConfigError("staff_token: must differ from student_token")
        return self


_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def load_config(path: str | Path | None = None, **overrides) -> ServiceConfig:
    """Parse a key=value config file; unknown keys and bad values are
    startup errors naming the key."""
    values: dict = {}
    types = {f.name: f.type for f in fields(ServiceConfig)}
    defaults = ServiceConfig()
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in types:
                raise ConfigError(f"{key}: unknown configuration key")
            values[key] = _coerce(key, value.strip(), getattr(defaults, key))
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return ServiceConfig(**values).validate()


def _coerce(key: str, value: str, default):
    try:
        if isinstance(default, bool):
            if value.lower() not in _BOOLS:
                raise ValueError(value)
            return _BOOLS[value.lower()]
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc

"""Run configuration: line-oriented key=value files, flag overrides, hashing.

Flags win over config-file values; defaults fill the rest. Every output file
embeds the resulting config plus its hash, so a run can be replayed
byte-identically from its own report.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .evaluation import VARIANTS, PipelineParams

_LIST_KEYS = {"label_rates", "seeds", "variants", "seen_counts"}


@dataclass
class RunConfig:
    edges: str = ""
    features: str = ""
    labels: str = ""
    dataset_name: str = "dataset"
    label_rates: tuple[float, ...] = (0.05,)
    n_unseen: int = 2
    variants: tuple[str, ...] = VARIANTS
    rank: int = 200
    hidden: int = 200
    epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tau: int = 2
    k_min: int = 0
    k_max: int = 0
    svm_c: float = 1.0
    svm_epochs: int = 50
    svd_seed: int = 0
    seeds: tuple[int, ...] = tuple(range(10))
    seen_counts: tuple[int, ...] = ()
    out: str = "out"
    threads: int = 1

    def pipeline_params(self) -> PipelineParams:
        return PipelineParams(
            rank=self.rank,
            hidden=self.hidden,
            epochs=self.epochs,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            tau=self.tau,
            k_min=self.k_min,
            k_max=self.k_max,
            svm_c=self.svm_c,
            svm_epochs=self.svm_epochs,
            svd_seed=self.svd_seed,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        for path_field in ("edges", "features", "labels"):
            if not getattr(self, path_field):
                raise ConfigError(f"missing required dataset path: {path_field}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        for rate in self.label_rates:
            if not 0.0 < rate < 1.0:
                raise ConfigError(f"label rate {rate} outside (0, 1)")
        if self.n_unseen < 1:
            raise ConfigError(f"n_unseen must be >= 1, got {self.n_unseen}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self


def _convert(key: str, value, target_type):
    try:
        if key in _LIST_KEYS:
            if isinstance(value, str):
                parts = [p for p in value.replace(",", " ").split() if p]
            else:
                parts = list(value)
            if key == "label_rates":
                return tuple(float(p) for p in parts)
            if key == "variants":
                return tuple(str(p) for p in parts)
            return tuple(int(p) for p in parts)
        if target_type is int:
            return int(value)
        if target_type is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def parse_config_file(path: str | Path) -> dict:
    """Read ``key=value`` lines; '#' starts a comment, blanks are skipped."""
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults <- config file <- flag overrides (flags win)."""
    defaults = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    type_map = {name: type(getattr(defaults, name)) for name in known}
    merged: dict = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = _convert(key, value, type_map[key])
    return RunConfig(**merged).validate()


def config_hash(cfg: RunConfig, extra: dict | None = None) -> str:
    """sha256 of the canonical config dump (plus optional extra material)."""
    payload = {"config": cfg.to_dict()}
    if extra:
        payload["extra"] = extra
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

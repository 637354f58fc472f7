"""Flat key-value configuration shared by every pipeline stage.

A config file contains ``key = value`` lines (``#`` starts a comment).
Unknown keys are usage errors. Every run resolves defaults, file values,
and overrides in that order, and the resolved config is echoed by the
CLI and returned by every service endpoint.
"""

from __future__ import annotations

from pathlib import Path

from .errors import UsageError

# Canonical string form of every default; parsing is per-key typed.
DEFAULTS: dict[str, str] = {
    "anxiety_forum": "anxiety",
    "adhd_forum": "adhd",
    "window_seconds": "15811200",  # 183 days
    "test_fraction": "0.33",
    "split_unit": "by_user",
    "seed": "0",
    "min_count": "2",
    "max_vocab_size": "20000",
    "max_len": "128",
    "nb_alpha": "1.0",
    "lr_lambda": "0.001",
    "lr_learning_rate": "0.1",
    "lr_epochs": "500",
    "d_model": "64",
    "n_heads": "4",
    "n_layers": "2",
    "d_ff": "256",
    "dropout_p": "0.3",
    "learning_rate": "1e-05",
    "adam_beta1": "0.9",
    "adam_beta2": "0.999",
    "adam_eps": "1e-08",
    "epochs": "20",
    "batch_size": "32",
    "threshold": "0.5",
    "max_phrase_len": "3",
    "val_fraction": "0.2",
    "nb_alpha_grid": "0.1,0.5,1.0,2.0",
    "lr_lambda_grid": "0.0001,0.001,0.01,0.1,1.0",
    "synth_mode": "order",
    "synth_users_per_class": "100",
    "synth_posts_per_user": "5,15",
    "synth_doc_len": "8,20",
    "synth_vocab_pool_size": "40",
    "synth_signal_strength": "1.0",
}

_ENUM_KEYS = {
    "split_unit": ("by_user", "by_post"),
    "synth_mode": ("order", "unigram"),
}


class PipelineConfig:
    """Typed accessors over the resolved flat mapping."""

    def __init__(self, values: dict[str, str]):
        self.values = values

    def get_str(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as exc:
            raise UsageError(f"config key {key} must be an integer") from exc

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as exc:
            raise UsageError(f"config key {key} must be a number") from exc

    def get_int_pair(self, key: str) -> tuple[int, int]:
        parts = self.values[key].split(",")
        if len(parts) != 2:
            raise UsageError(f"config key {key} must be 'min,max'")
        try:
            return int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise UsageError(f"config key {key} must be 'min,max' integers") from exc

    def get_float_list(self, key: str) -> list[float]:
        try:
            return [float(v) for v in self.values[key].split(",") if v]
        except ValueError as exc:
            raise UsageError(f"config key {key} must be comma-separated numbers") from exc

    def resolved_lines(self) -> list[str]:
        return [f"{key} = {self.values[key]}" for key in sorted(self.values)]


def _validate(values: dict[str, str]) -> None:
    for key, value in values.items():
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key: {key}")
        allowed = _ENUM_KEYS.get(key)
        if allowed and value not in allowed:
            raise UsageError(
                f"config key {key} must be one of {', '.join(allowed)}, got {value!r}"
            )


def parse_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_number}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise UsageError(f"{path}:{line_number}: empty key")
            values[key] = value
    _validate(values)
    return values


def resolve_config(
    config_file: Path | None = None,
    overrides: dict[str, str] | None = None,
    seed: int | None = None,
) -> PipelineConfig:
    values = dict(DEFAULTS)
    if config_file is not None:
        if not Path(config_file).exists():
            raise UsageError(f"config file not found: {config_file}")
        values.update(parse_config_file(Path(config_file)))
    if overrides:
        _validate(overrides)
        values.update(overrides)
    if seed is not None:
        values["seed"] = str(int(seed))
    _validate(values)
    return PipelineConfig(values)

"""Named hyperparameter presets and ``key = value`` config files.

The presets are the grid-search optima reported per benchmark family;
``max_depth`` is 10 and ``n_iterations`` 10 throughout.
"""

from __future__ import annotations

from pathlib import Path

from admercs.scoring import ScoringParams
from admercs.trees import TreeParams

PRESETS: dict[str, dict[str, float]] = {
    "synth-c": dict(min_samples_leaf=0.02, min_impurity_decrease=0.001, rho=0.7, gamma_lambda=0.5, gamma_delta=0.2),
    "synth-cs": dict(min_samples_leaf=0.05, min_impurity_decrease=0.001, rho=0.9, gamma_lambda=1.0, gamma_delta=1.0),
    "synth-i": dict(min_samples_leaf=0.005, min_impurity_decrease=0.001, rho=0.9, gamma_lambda=0.5, gamma_delta=0.9),
    "campos": dict(min_samples_leaf=0.05, min_impurity_decrease=0.05, rho=0.9, gamma_lambda=0.5, gamma_delta=0.7),
    "camposhd": dict(min_samples_leaf=0.1, min_impurity_decrease=0.2, rho=0.7, gamma_lambda=1.0, gamma_delta=0.7),
    "hics": dict(min_samples_leaf=0.02, min_impurity_decrease=0.5, rho=0.9, gamma_lambda=1.0, gamma_delta=1.0),
}
DEFAULT_PRESET = "synth-c"

_INT_KEYS = {"max_depth", "n_iterations", "seed", "threads"}
_FLOAT_KEYS = {"min_samples_leaf", "min_impurity_decrease", "rho", "gamma_lambda", "gamma_delta", "tol"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | {"preset"}


class ConfigError(ValueError):
    pass


def coerce(key: str, raw) -> int | float | str:
    if key not in KNOWN_KEYS:
        raise ConfigError(f"unknown parameter {key!r}")
    if key == "preset":
        if raw not in PRESETS:
            raise ConfigError(f"unknown preset {raw!r}; choose from {sorted(PRESETS)}")
        return raw
    try:
        return int(raw) if key in _INT_KEYS else float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"parameter {key!r}: cannot parse {raw!r}") from None


def read_config(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        out[key] = coerce(key, value.strip())
    return out


def resolve(config: dict) -> dict:
    """Preset values overlaid with explicit settings, with all keys filled."""
    preset = config.get("preset", DEFAULT_PRESET)
    merged = {"max_depth": 10, "n_iterations": 10, **PRESETS[coerce("preset", preset)]}
    merged.update({k: v for k, v in config.items() if k != "preset" and v is not None})
    merged["preset"] = preset
    return merged


def build_params(config: dict) -> tuple[TreeParams, ScoringParams]:
    c = resolve(config)
    tree = TreeParams(int(c["max_depth"]), float(c["min_samples_leaf"]), float(c["min_impurity_decrease"]))
    extra = {"tol": float(c["tol"])} if "tol" in c else {}
    scoring = ScoringParams(float(c["gamma_delta"]), float(c["gamma_lambda"]), int(c["n_iterations"]),
                            float(c["rho"]), **extra)
    return tree, scoring

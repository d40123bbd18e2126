"""
core.config
~~~~~~~~~~~
Flat JSON configs and run manifests.

Config files are a single flat JSON object whose keys are those of
``core.presets.DEFAULT_RUN``; unknown keys are rejected. Precedence,
lowest to highest:

    built-in defaults  <  --config file  <  --set key=value  <  --seed/--out/--jobs

A manifest written by any command is itself a valid config file: its
``"config"`` member holds the fully resolved flat config. Values a command
recorded next to it (explain's run, fold and epsilon, curve's runs ...)
are read back by recorded_arguments and fill in flags left off a rerun.

Seeds
-----
The single ``seed`` key fans out through core.seeding.derive_seed:

    model init  derive_seed(seed, "model")   then per fold derive_seed(model_seed, fold)
    training    derive_seed(seed, "train")   then per fold derive_seed(train_seed, fold)
    attacks     derive_seed(seed, "attack")
    synth data  derive_seed(seed, "synth")
    fold split  derive_seed(seed, "folds")
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from core import presets
from core.errors import ArtifactError, ConfigError
from core.models import (
    Architecture, AttackConfig, ModelConfig, Norm, Objective, RunConfig,
    SynthConfig, TrainConfig, TrainMode,
)
from core.paths import manifest_path
from core.seeding import derive_seed

MANIFEST_VERSION = 1

_MANIFEST_KEYS = frozenset({"format_version", "command", "config", "seeds", "outputs"})


# ── Public API ────────────────────────────────────────────────────────────────

def load_config_file(path: Path) -> dict:
    """
    Read a flat config (or a manifest) from *path*.

    Raises:
        ConfigError – missing file, malformed JSON, or not a JSON object
    """
    payload = _read_config_json(path)
    if _is_manifest(payload):
        return dict(payload["config"])
    return payload


def recorded_arguments(path: Path, command: str) -> dict:
    """
    The command-line values a manifest written by *command* recorded next
    to its config (``runs``, ``fold``, ``epsilon`` ...). Empty for plain
    config files and for manifests of other commands.

    Raises:
        ConfigError – as load_config_file
    """
    payload = _read_config_json(path)
    if not _is_manifest(payload) or payload["command"] != command:
        return {}
    return {k: v for k, v in payload.items() if k not in _MANIFEST_KEYS}


def parse_override(text: str) -> tuple[str, Any]:
    """'key=value' → (key, value); value parsed as JSON, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def merge_config(*layers: Mapping[str, Any]) -> dict:
    """Defaults first, later layers win. Unknown keys are an error."""
    merged = dict(presets.DEFAULT_RUN)
    for layer in layers:
        unknown = sorted(set(layer) - set(merged))
        if unknown:
            raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")
        merged.update(layer)
    return merged


def resolve_run_config(flat: Mapping[str, Any]) -> RunConfig:
    """Build and validate a RunConfig from a flat mapping (defaults filled in)."""
    merged = merge_config(flat)
    try:
        run = _dict_to_run(merged)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid config value: {exc}") from None
    run.validate()
    return run


def run_config_to_dict(run: RunConfig) -> dict:
    return _run_to_dict(run)


def run_seeds(run: RunConfig) -> dict[str, int]:
    """The component seeds recorded in every manifest."""
    return {
        "root":   run.seed,
        "model":  run.model.seed,
        "train":  run.train.seed,
        "attack": run.train.attack.seed if run.train.attack else derive_seed(run.seed, "attack"),
        "synth":  run.synth.seed if run.synth else derive_seed(run.seed, "synth"),
        "folds":  derive_seed(run.seed, "folds"),
    }


def write_manifest(out_dir: Path, command: str, run: RunConfig | None,
                   outputs: Mapping[str, Any], extra: Mapping[str, Any] | None = None) -> Path:
    """Write <out_dir>/manifest.json with sorted keys so reruns are bitwise equal."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload: dict[str, Any] = {
        "format_version": MANIFEST_VERSION,
        "command":        command,
        "config":         run_config_to_dict(run) if run is not None else None,
        "seeds":          run_seeds(run) if run is not None else None,
        "outputs":        dict(outputs),
    }
    if extra:
        payload.update(extra)
    path = manifest_path(out_dir)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(out_dir: Path) -> dict:
    """
    Raises:
        ArtifactError – manifest missing or unreadable
    """
    path = manifest_path(out_dir)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArtifactError(f"Manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"Manifest {path} is corrupt: {exc}") from None


# ── Serialisation helpers ─────────────────────────────────────────────────────

def _read_config_json(path: Path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from None

    if not isinstance(payload, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return payload


def _is_manifest(payload: Mapping[str, Any]) -> bool:
    return "command" in payload and isinstance(payload.get("config"), dict)


def model_config_to_dict(config: ModelConfig) -> dict:
    return {
        "architecture":   config.architecture.value,
        "input_height":   config.input_height,
        "input_width":    config.input_width,
        "num_classes":    config.num_classes,
        "conv1_channels": config.conv1_channels,
        "conv2_channels": config.conv2_channels,
        "hidden_units":   config.hidden_units,
        "seed":           config.seed,
        "dtype":          config.dtype,
    }


def dict_to_model_config(d: Mapping[str, Any]) -> ModelConfig:
    return ModelConfig(
        architecture   = _enum(Architecture, d["architecture"], "architecture"),
        input_height   = int(d["input_height"]),
        input_width    = int(d["input_width"]),
        num_classes    = int(d["num_classes"]),
        conv1_channels = int(d["conv1_channels"]),
        conv2_channels = int(d["conv2_channels"]),
        hidden_units   = int(d["hidden_units"]),
        seed           = int(d["seed"]),
        dtype          = str(d["dtype"]),
    )


def _run_to_dict(run: RunConfig) -> dict:
    attack = run.train.attack or AttackConfig()
    synth = run.synth or SynthConfig()
    return {
        "model_id":               run.model_id,
        "architecture":           run.model.architecture.value,
        "input_height":           run.model.input_height,
        "input_width":            run.model.input_width,
        "num_classes":            run.model.num_classes,
        "conv1_channels":         run.model.conv1_channels,
        "conv2_channels":         run.model.conv2_channels,
        "hidden_units":           run.model.hidden_units,
        "dtype":                  run.model.dtype,
        "mode":                   run.train.mode.value,
        "epochs":                 run.train.epochs,
        "base_lr":                run.train.base_lr,
        "lr_decay_factor":        run.train.lr_decay_factor,
        "lr_decay_every":         run.train.lr_decay_every,
        "batch_size":             run.train.batch_size,
        "momentum":               run.train.momentum,
        "eval_attack_steps":      run.train.eval_attack_steps,
        "attack_norm":            attack.norm.value,
        "attack_epsilon":         attack.epsilon,
        "attack_steps":           attack.num_steps,
        "attack_step_size":       attack.step_size,
        "attack_restarts":        attack.num_restarts,
        "attack_random_start":    attack.random_start,
        "data_root":              str(run.data_root) if run.data_root else None,
        "synth_videos_per_class": synth.videos_per_class,
        "synth_frames_per_video": synth.frames_per_video,
        "synth_speckle_sigma":    synth.speckle_sigma,
        "synth_jitter":           synth.jitter,
        "folds":                  run.folds,
        "epsilons":               list(run.epsilons),
        "explain_epsilon":        run.explain_epsilon,
        "seed":                   run.seed,
        "jobs":                   run.jobs,
        "output_dir":             str(run.output_dir),
    }


def _dict_to_run(d: Mapping[str, Any]) -> RunConfig:
    seed = int(d["seed"])

    model = ModelConfig(
        architecture   = _enum(Architecture, d["architecture"], "architecture"),
        input_height   = int(d["input_height"]),
        input_width    = int(d["input_width"]),
        num_classes    = int(d["num_classes"]),
        conv1_channels = int(d["conv1_channels"]),
        conv2_channels = int(d["conv2_channels"]),
        hidden_units   = int(d["hidden_units"]),
        seed           = derive_seed(seed, "model"),
        dtype          = str(d["dtype"]),
    )
    step_size = d["attack_step_size"]
    attack = AttackConfig(
        norm         = _enum(Norm, d["attack_norm"], "attack_norm"),
        epsilon      = float(d["attack_epsilon"]),
        num_steps    = int(d["attack_steps"]),
        step_size    = None if step_size is None else float(step_size),
        num_restarts = int(d["attack_restarts"]),
        random_start = bool(d["attack_random_start"]),
        objective    = Objective.MAXIMIZE,
        seed         = derive_seed(seed, "attack"),
    )
    train = TrainConfig(
        mode              = _enum(TrainMode, d["mode"], "mode"),
        epochs            = int(d["epochs"]),
        base_lr           = float(d["base_lr"]),
        lr_decay_factor   = float(d["lr_decay_factor"]),
        lr_decay_every    = int(d["lr_decay_every"]),
        batch_size        = int(d["batch_size"]),
        momentum          = float(d["momentum"]),
        attack            = attack,
        eval_attack_steps = int(d["eval_attack_steps"]),
        seed              = derive_seed(seed, "train"),
    )

    data_root = d["data_root"]
    synth = None
    if data_root is None:
        synth = SynthConfig(
            videos_per_class = int(d["synth_videos_per_class"]),
            frames_per_video = int(d["synth_frames_per_video"]),
            image_size       = model.input_height,
            speckle_sigma    = float(d["synth_speckle_sigma"]),
            jitter           = float(d["synth_jitter"]),
            seed             = derive_seed(seed, "synth"),
        )

    explain_eps = d["explain_epsilon"]
    return RunConfig(
        model           = model,
        train           = train,
        synth           = synth,
        data_root       = Path(data_root) if data_root is not None else None,
        folds           = int(d["folds"]),
        epsilons        = tuple(float(e) for e in d["epsilons"]),
        explain_epsilon = None if explain_eps is None else float(explain_eps),
        output_dir      = Path(d["output_dir"]),
        seed            = seed,
        jobs            = int(d["jobs"]),
        model_id        = str(d["model_id"]),
    )


def _enum(kind, value, key: str):
    try:
        return kind(value)
    except ValueError:
        choices = ", ".join(m.value for m in kind)
        raise ConfigError(f"{key} must be one of {choices}; got {value!r}") from None

"""
core.models
~~~~~~~~~~~
Pure dataclasses and enums: no I/O, no numerics beyond shape checks.
These travel freely between core modules, worker processes and the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from core.errors import ConfigError, InputError


# ── Enums ─────────────────────────────────────────────────────────────────────

class Architecture(Enum):
    SMALL_CNN = "small_cnn"   # reference model: 2 conv blocks + hidden fc + head
    MLP       = "mlp"         # flatten + one ReLU hidden layer + head
    LINEAR    = "linear"      # softmax regression


class Norm(Enum):
    L2   = "L2"
    LINF = "Linf"


class Objective(Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class TrainMode(Enum):
    ERM = "ERM"
    AT  = "AT"


class Outcome(IntEnum):
    COVID     = 0
    PNEUMONIA = 1
    REGULAR   = 2

    @property
    def slug(self) -> str:
        return self.name.lower()


CLASS_NAMES: tuple[str, ...] = tuple(o.slug for o in Outcome)


class DataSource(Enum):
    DISK      = "disk"
    SYNTHETIC = "synthetic"


class Role(Enum):
    PERTINENT_NEGATIVE           = "pertinent_negative"
    PERTINENT_POSITIVE           = "pertinent_positive"
    PERTINENT_POSITIVE_OF_ERROR  = "pertinent_positive_of_error"
    MISSING_FEATURES_FOR_CORRECT = "missing_features_for_correct"


class Which(Enum):
    DELTA_MIN = "delta_min"
    DELTA_MAX = "delta_max"


class WorkerStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE    = "done"
    ERROR   = "error"


# ── Model ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ModelConfig:
    """
    Shape of the classifier. Identical configs (seed included) always
    initialise to bitwise-identical parameters.
    """
    architecture: Architecture = Architecture.SMALL_CNN
    input_height: int = 32
    input_width: int = 32
    num_classes: int = 3
    conv1_channels: int = 8
    conv2_channels: int = 16
    hidden_units: int = 32
    seed: int = 0
    dtype: str = "float64"         # "float32" allowed for speed builds

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.input_height, self.input_width)

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        # two 2x2 pools need at least 8 pixels per side
        min_side = 8 if self.architecture is Architecture.SMALL_CNN else 1
        if self.input_height < min_side or self.input_width < min_side:
            raise ConfigError(
                f"{self.architecture.value} needs input >= {min_side}x{min_side}, "
                f"got {self.input_height}x{self.input_width}"
            )
        for name in ("conv1_channels", "conv2_channels", "hidden_units"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype!r}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """
    All weights of one classifier (θ). Arrays are read-only; training
    produces new ModelParams instead of mutating.
    """
    config: ModelConfig
    weights: Mapping[str, np.ndarray]

    def __post_init__(self):
        frozen = {}
        for name, array in self.weights.items():
            array = np.array(array, dtype=self.config.dtype, copy=True)
            if not np.all(np.isfinite(array)):
                raise InputError(f"parameter {name!r} contains NaN/Inf")
            array.flags.writeable = False
            frozen[name] = array
        object.__setattr__(self, "weights", frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    @property
    def names(self) -> list[str]:
        return list(self.weights)

    @property
    def num_parameters(self) -> int:
        return int(sum(a.size for a in self.weights.values()))

    def with_weights(self, updates: Mapping[str, np.ndarray]) -> ModelParams:
        """Copy with some arrays replaced (shapes must match)."""
        merged = dict(self.weights)
        for name, array in updates.items():
            if name not in merged:
                raise InputError(f"unknown parameter {name!r}")
            if np.shape(array) != merged[name].shape:
                raise InputError(
                    f"shape mismatch for {name!r}: {np.shape(array)} != {merged[name].shape}"
                )
            merged[name] = array
        return ModelParams(self.config, merged)


@dataclass(frozen=True, eq=False)
class Prediction:
    logits: np.ndarray
    probabilities: np.ndarray
    predicted_class: int


# ── Attacks ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class AttackConfig:
    """PGD settings. step_size=None means 2.5 * epsilon / num_steps."""
    norm: Norm = Norm.L2
    epsilon: float = 1.0
    num_steps: int = 40
    step_size: float | None = None
    num_restarts: int = 1
    random_start: bool = False
    objective: Objective = Objective.MAXIMIZE
    seed: int = 0

    @property
    def alpha(self) -> float:
        if self.step_size is not None:
            return float(self.step_size)
        return 2.5 * self.epsilon / self.num_steps

    def validate(self) -> None:
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.num_steps < 1:
            raise ConfigError(f"num_steps must be >= 1, got {self.num_steps}")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError(f"step_size must be > 0, got {self.step_size}")
        if self.num_restarts < 1:
            raise ConfigError(f"num_restarts must be >= 1, got {self.num_restarts}")


@dataclass(frozen=True, eq=False)
class Perturbation:
    """
    One PGD result. ``image`` is clip(x + delta) and ``delta`` is the
    effective perturbation image - x. ``counterexample`` is the first
    evaluated candidate delta whose prediction differed from the true
    label, or None if every candidate was classified correctly.
    """
    delta: np.ndarray
    image: np.ndarray
    achieved_loss: float
    prediction_before: Prediction
    prediction_after: Prediction
    config_used: AttackConfig
    counterexample: np.ndarray | None = None


# ── Training ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TrainConfig:
    mode: TrainMode = TrainMode.ERM
    epochs: int = 51
    base_lr: float = 0.01
    lr_decay_factor: float = 10.0
    lr_decay_every: int = 15
    batch_size: int = 32
    momentum: float = 0.9
    attack: AttackConfig | None = None     # AT inner max; ERM: validation only
    eval_attack_steps: int = 40
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.base_lr > 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if not self.lr_decay_factor > 0:
            raise ConfigError(f"lr_decay_factor must be > 0, got {self.lr_decay_factor}")
        if self.lr_decay_every < 1:
            raise ConfigError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.eval_attack_steps < 1:
            raise ConfigError("eval_attack_steps must be >= 1")
        if self.mode is TrainMode.AT:
            if self.attack is None:
                raise ConfigError("mode=AT requires an attack config")
            if self.attack.objective is not Objective.MAXIMIZE:
                raise ConfigError("mode=AT requires attack objective=maximize")
        if self.attack is not None:
            self.attack.validate()

    def validation_attack(self) -> AttackConfig | None:
        """Training radius, evaluation-grade step count, default step size."""
        if self.attack is None:
            return None
        return replace(
            self.attack,
            num_steps=self.eval_attack_steps,
            step_size=None,
            objective=Objective.MAXIMIZE,
        )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    learning_rate: float
    train_loss: float
    val_clean_accuracy: float
    val_adversarial_accuracy: float | None
    checkpoint: str | None = None

    def to_dict(self) -> dict:
        return {
            "epoch":                    self.epoch,
            "learning_rate":            self.learning_rate,
            "train_loss":               self.train_loss,
            "val_clean_accuracy":       self.val_clean_accuracy,
            "val_adversarial_accuracy": self.val_adversarial_accuracy,
            "checkpoint":               self.checkpoint,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> EpochRecord:
        adv = d.get("val_adversarial_accuracy")
        return cls(
            epoch                    = int(d["epoch"]),
            learning_rate            = float(d["learning_rate"]),
            train_loss               = float(d["train_loss"]),
            val_clean_accuracy       = float(d["val_clean_accuracy"]),
            val_adversarial_accuracy = None if adv is None else float(adv),
            checkpoint               = d.get("checkpoint"),
        )


@dataclass
class TrainHistory:
    run_id: str
    mode: TrainMode
    records: list[EpochRecord] = field(default_factory=list)
    # in-memory parameter versions keyed by epoch, not persisted
    snapshots: dict[int, ModelParams] = field(default_factory=dict, repr=False, compare=False)

    def record(self, epoch: int) -> EpochRecord:
        for r in self.records:
            if r.epoch == epoch:
                return r
        raise KeyError(epoch)


@dataclass(frozen=True, eq=False)
class Checkpoint:
    params: ModelParams
    momentum: dict[str, np.ndarray] | None = None
    epoch: int | None = None


# ── Data ──────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Sample:
    image: np.ndarray          # H×W float in [0, 1]
    label: int                 # class index
    video_id: str
    frame_index: int

    @property
    def sample_id(self) -> str:
        return f"{self.video_id}_f{self.frame_index:03d}"


@dataclass(eq=False)
class Dataset:
    """
    Ordered samples. Every video_id carries exactly one label.
    """
    samples: list[Sample]
    source: DataSource = DataSource.SYNTHETIC
    class_names: tuple[str, ...] = CLASS_NAMES
    synth_hash: str | None = None

    def __post_init__(self):
        seen: dict[str, int] = {}
        for s in self.samples:
            if not 0 <= s.label < len(self.class_names):
                raise InputError(f"label {s.label} out of range for {s.sample_id}")
            prior = seen.setdefault(s.video_id, s.label)
            if prior != s.label:
                raise InputError(
                    f"video {s.video_id!r} has two labels: "
                    f"{self.class_names[prior]} and {self.class_names[s.label]}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def images(self) -> np.ndarray:
        if not self.samples:
            raise InputError("dataset is empty")
        return np.stack([s.image for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def video_ids(self) -> list[str]:
        return [s.video_id for s in self.samples]

    def video_labels(self) -> dict[str, int]:
        return {s.video_id: s.label for s in self.samples}

    def subset(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        return Dataset(
            samples=[self.samples[int(i)] for i in indices],
            source=self.source,
            class_names=self.class_names,
            synth_hash=self.synth_hash,
        )


@dataclass(frozen=True)
class SynthConfig:
    videos_per_class: int = 20
    frames_per_video: int = 8
    image_size: int = 32
    speckle_sigma: float = 0.3
    jitter: float = 0.5            # pixels of per-frame motif displacement
    seed: int = 0

    def validate(self) -> None:
        if self.videos_per_class < 1:
            raise ConfigError(f"videos_per_class must be >= 1, got {self.videos_per_class}")
        if self.frames_per_video < 1:
            raise ConfigError(f"frames_per_video must be >= 1, got {self.frames_per_video}")
        if self.image_size < 8:
            raise ConfigError(f"image_size must be >= 8, got {self.image_size}")
        if self.speckle_sigma < 0:
            raise ConfigError(f"speckle_sigma must be >= 0, got {self.speckle_sigma}")
        if self.jitter < 0:
            raise ConfigError(f"jitter must be >= 0, got {self.jitter}")


# ── Evaluation ────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class RobustnessCurve:
    """accuracy has shape (folds, len(epsilons))."""
    model_id: str
    epsilons: tuple[float, ...]
    accuracy: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    mode: TrainMode | None = None

    @property
    def num_folds(self) -> int:
        return int(self.accuracy.shape[0])


@dataclass(frozen=True)
class OutcomeRow:
    model_id: str
    outcome: str
    accuracy: float | None       # mean per-class recall across folds
    auroc: float | None          # mean one-vs-rest AUROC across folds
    folds_accuracy: int = 0      # folds that contributed to each mean
    folds_auroc: int = 0


@dataclass
class OutcomeReport:
    rows: list[OutcomeRow] = field(default_factory=list)

    @property
    def model_ids(self) -> list[str]:
        return list(dict.fromkeys(r.model_id for r in self.rows))


# ── Explanations ──────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ContrastiveExplanation:
    sample: Sample
    prediction: Prediction
    is_correct: bool
    epsilon: float
    delta_max_result: Perturbation
    delta_min_result: Perturbation
    role_of_delta_max: Role
    role_of_delta_min: Role

    def result(self, which: Which) -> Perturbation:
        return self.delta_min_result if which is Which.DELTA_MIN else self.delta_max_result

    def role(self, which: Which) -> Role:
        return self.role_of_delta_min if which is Which.DELTA_MIN else self.role_of_delta_max


# ── Run orchestration ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RunConfig:
    """
    Everything one CLI invocation needs. Component seeds are already
    fanned out from ``seed`` (see core.config.resolve_run_config).
    """
    model: ModelConfig
    train: TrainConfig
    synth: SynthConfig | None
    data_root: Path | None
    folds: int = 5
    epsilons: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 2.0)
    explain_epsilon: float | None = None
    output_dir: Path = Path("runs/default")
    seed: int = 0
    jobs: int = 1
    model_id: str = "small_cnn"

    def validate(self) -> None:
        self.model.validate()
        self.train.validate()
        if (self.synth is None) == (self.data_root is None):
            raise ConfigError("exactly one of data_root or synthetic data must be configured")
        if self.synth is not None:
            self.synth.validate()
            if self.model.input_height != self.model.input_width:
                raise ConfigError("synthetic data needs a square input size")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.explain_epsilon is not None and not self.explain_epsilon > 0:
            raise ConfigError("explain_epsilon must be > 0")
        eps = list(self.epsilons)
        if not eps or eps[0] != 0 or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"epsilons must ascend strictly from 0, got {eps}")


@dataclass(frozen=True, eq=False)
class FoldTask:
    """One fold of cross-validation, shipped to a worker process."""
    fold: int
    model_config: ModelConfig
    train_config: TrainConfig
    train_set: Dataset
    val_set: Dataset
    run_dir: Path


@dataclass
class FoldResult:
    fold: int
    status: WorkerStatus = WorkerStatus.PENDING
    best_epoch: int | None = None
    best_checkpoint: str | None = None
    val_clean_accuracy: float | None = None
    val_adversarial_accuracy: float | None = None
    history_file: str | None = None
    error_message: str = ""

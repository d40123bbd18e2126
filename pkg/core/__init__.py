from .models import (
    Architecture, AttackConfig, ContrastiveExplanation, Dataset, ModelConfig, ModelParams,
    Norm, Objective, OutcomeReport, Perturbation, RobustnessCurve, RunConfig, Sample,
    SynthConfig, TrainConfig, TrainHistory, TrainMode, Which,
)
from .errors import (
    ArtifactError, AttackError, ConfigError, DatasetError, InputError, ToolkitError, TrainingError,
)
from .network import init_model, forward, loss, grad_input, grad_params
from .attacks import project, pgd, attack_batch
from .training import lr_schedule, train, train_erm, train_adversarial, select_best
from .data import load_dataset, preprocess, group_kfold
from .synth import synth_generate
from .evaluation import (
    clean_accuracy, adversarial_accuracy, robustness_curve, auroc_ovr,
    per_outcome_report, aggregate_folds,
)
from .explanations import explain, render_triptych, explain_batch, compare_batch
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Architecture", "AttackConfig", "ContrastiveExplanation", "Dataset", "ModelConfig",
    "ModelParams", "Norm", "Objective", "OutcomeReport", "Perturbation", "RobustnessCurve",
    "RunConfig", "Sample", "SynthConfig", "TrainConfig", "TrainHistory", "TrainMode", "Which",
    "ArtifactError", "AttackError", "ConfigError", "DatasetError", "InputError",
    "ToolkitError", "TrainingError",
    "init_model", "forward", "loss", "grad_input", "grad_params",
    "project", "pgd", "attack_batch",
    "lr_schedule", "train", "train_erm", "train_adversarial", "select_best",
    "load_dataset", "preprocess", "group_kfold",
    "synth_generate",
    "clean_accuracy", "adversarial_accuracy", "robustness_curve", "auroc_ovr",
    "per_outcome_report", "aggregate_folds",
    "explain", "render_triptych", "explain_batch", "compare_batch",
    "save_checkpoint", "load_checkpoint",
]

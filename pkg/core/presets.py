# core/presets.py
"""
Reference settings. DEFAULT_RUN is the flat config every RunConfig starts
from; the full-protocol constants are kept next to the desk-scale values
they are scaled down from.
"""

# Training protocol: 51 epochs of SGD, lr 0.01 decayed x10 every 15 epochs
PROTOCOL_EPOCHS       = 51
PROTOCOL_BASE_LR      = 0.01
PROTOCOL_DECAY_FACTOR = 10.0
PROTOCOL_DECAY_EVERY  = 15
PROTOCOL_FOLDS        = 5

# PGD step counts: evaluation-grade and the cheaper AT inner loop
EVAL_ATTACK_STEPS  = 40
TRAIN_ATTACK_STEPS = 10

# AT radius for the desk-scale experiment (L2, pixel units on 32x32 frames)
REFERENCE_EPSILON = 1.0

DEFAULT_RUN: dict = {
    "model_id":               "small_cnn",
    # model
    "architecture":           "small_cnn",
    "input_height":           32,
    "input_width":            32,
    "num_classes":            3,
    "conv1_channels":         8,
    "conv2_channels":         16,
    "hidden_units":           32,
    "dtype":                  "float64",
    # training
    "mode":                   "ERM",
    "epochs":                 15,
    "base_lr":                PROTOCOL_BASE_LR,
    "lr_decay_factor":        PROTOCOL_DECAY_FACTOR,
    "lr_decay_every":         PROTOCOL_DECAY_EVERY,
    "batch_size":             32,
    "momentum":               0.9,
    "eval_attack_steps":      EVAL_ATTACK_STEPS,
    # attack (AT inner max; validation radius for ERM)
    "attack_norm":            "L2",
    "attack_epsilon":         REFERENCE_EPSILON,
    "attack_steps":           TRAIN_ATTACK_STEPS,
    "attack_step_size":       None,
    "attack_restarts":        1,
    "attack_random_start":    True,
    # data
    "data_root":              None,
    "synth_videos_per_class": 20,
    "synth_frames_per_video": 8,
    "synth_speckle_sigma":    0.3,
    "synth_jitter":           0.5,
    # protocol
    "folds":                  PROTOCOL_FOLDS,
    "epsilons":               [0.0, 0.25, 0.5, 1.0, 1.5, 2.0],
    "explain_epsilon":        None,
    "seed":                   0,
    "jobs":                   1,
    "output_dir":             "runs/default",
}

# Desk-scale ERM vs AT robustness comparison: 2 folds of the default synthetic data
REFERENCE_EXPERIMENT: dict = {
    **DEFAULT_RUN,
    "folds":  2,
    "epochs": 15,
}

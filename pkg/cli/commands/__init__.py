from .synth import cmd_synth
from .train import cmd_train
from .curve import cmd_curve
from .report import cmd_report
from .explain import cmd_explain

__all__ = ["cmd_synth", "cmd_train", "cmd_curve", "cmd_report", "cmd_explain"]

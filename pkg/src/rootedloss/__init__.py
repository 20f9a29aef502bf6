"""Rooted logistic and cross-entropy objectives with hand-written gradients.

Submodules: :mod:`losses`, :mod:`calculus`, :mod:`optim`, :mod:`models`,
:mod:`data`, :mod:`gan_toy`, :mod:`estimators` and the ``rootedloss`` CLI.
"""

__version__ = "0.1.0"

from .losses import (  # noqa: E402
    Family, LossSpec, ce_loss, evaluate_loss, focal_loss, logistic_loss, rlo_loss,
    rooted_ce_loss,
)
from .calculus import (  # noqa: E402
    assemble_hessian, condition_number, conditioning_ratio, conditioning_report, loss_grad,
    lr_hessian_coeff, rlo_hessian_coeff, rlo_hessian_under_coeff, sufficient_condition,
)
from .optim import OptimizerConfig, TrainTrace, gd_run, run, sgd_run  # noqa: E402
from .data import Dataset, kfold, load_delimited, make_spiral, one_vs_all, standardize  # noqa: E402

__all__ = [
    "Family", "LossSpec", "ce_loss", "evaluate_loss", "focal_loss", "logistic_loss", "rlo_loss",
    "rooted_ce_loss", "assemble_hessian", "condition_number", "conditioning_ratio",
    "conditioning_report", "loss_grad", "lr_hessian_coeff", "rlo_hessian_coeff",
    "rlo_hessian_under_coeff", "sufficient_condition", "OptimizerConfig", "TrainTrace",
    "gd_run", "run", "sgd_run", "Dataset", "kfold", "load_delimited", "make_spiral",
    "one_vs_all", "standardize",
]

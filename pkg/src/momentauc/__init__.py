"""Online AUC maximisation with second-order (moment-based) surrogate losses."""
from .evaluation import auc, run_experiment, stratified_kfold
from .kernel import GaussianKernel, KernelAUC, LinearKernel
from .linear import MomentAUC, PassiveAggressive, Perceptron
from .moments import ClassMoments
from .surrogate import LossKind, psi_m, psi_s

__all__ = [
    "auc", "run_experiment", "stratified_kfold", "GaussianKernel", "KernelAUC", "LinearKernel",
    "MomentAUC", "PassiveAggressive", "Perceptron", "ClassMoments", "LossKind", "psi_m", "psi_s",
]
__version__ = "0.1.0"

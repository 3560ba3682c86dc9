from .autodiff import Tensor, backward, grad, set_default_dtype
from .gradcheck import GradCheckReport, finite_diff_check
from .layers import bce_loss, gcn_layer, linear, mlp, sage_layer, sort_pooling
from .optim import ParamStore, adam_step

__all__ = [
    "Tensor", "backward", "grad", "set_default_dtype", "GradCheckReport", "finite_diff_check",
    "bce_loss", "gcn_layer", "linear", "mlp", "sage_layer", "sort_pooling", "ParamStore",
    "adam_step",
]

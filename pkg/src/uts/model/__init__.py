from .batch import Batch, make_batch, pool_matrix
from .config import ModelConfig
from .uts import UTS, ExampleTrace, JointLoss, init_params

__all__ = ["Batch", "ExampleTrace", "JointLoss", "ModelConfig", "UTS", "init_params", "make_batch", "pool_matrix"]

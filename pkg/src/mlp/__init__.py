from .constants import Activation, OutputLink
from .model import MLP, mlp_predict
from .trainer import MLPTrainer, gradient_check, train_mlp

"""Small model zoo: linear, logistic, CART and gradient-boosted trees."""
from .predictor import Predictor, fit, predict
from .spec import ModelSpec, logistic
from .tree import LEAF, Tree

__all__ = ["LEAF", "ModelSpec", "Predictor", "Tree", "fit", "logistic", "predict"]

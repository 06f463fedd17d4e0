"""Desk-scale dual-teacher adversarial robust distillation lab."""

from .autodiff import Graph, Tensor, backward, grad_check
from .attacks import AttackConfig, ascend, feature_attack, fgsm, pgd, \
    pgd_cross_entropy
from .data import Dataset, Normalization, gen_blobs, gen_two_moons, \
    load_mnist_idx
from .distill import (DistillConfig, OptimizerConfig, TrainRecord, composite_loss,
                      confidence, dynamic_weights, kl_loss, train, weight_ratio)
from .errors import (ArdlabError, ConfigError, ContractError, EstimationError,
                     FormatError, NumericError, TrainingDivergedError)
from .experiments import MetricsRow, evaluate, train_adversarial, \
    train_supervised, train_teachers
from .margins import (MarginReport, certified_radius, discrepancy,
                      ensemble_logits, margin, verify_bound)
from .models import (MlpModel, forward, forward_np, lipschitz_lower_empirical,
                     lipschitz_upper, load, predict, save, spectral_norm)
from .saliency import SaliencyMap, input_gradient_map, saliency_l2

__version__ = "0.1.0"

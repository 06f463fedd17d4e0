"""FGSM, PGD and the feature-space attack on a small trained classifier.

Trains one MLP on two moons, then walks through the attack surface: single
step vs iterated, both norm balls, restarts, and the inner maximization the
distillation loop uses to manufacture hard inputs.
"""
import numpy as np

from ardlab import AttackConfig, OptimizerConfig
from ardlab.attacks import feature_attack, fgsm, pgd
from ardlab.data import gen_two_moons
from ardlab.experiments import accuracy_pct, train_supervised
from ardlab.losses import cross_entropy_per_sample
from ardlab.models import MlpModel

train = gen_two_moons(800, 0.15, seed=11)
test = gen_two_moons(400, 0.15, seed=12)
model = train_supervised(MlpModel([2, 32, 2], seed=0), train,
                         OptimizerConfig(epochs=25, batch_size=64))
x, y = test.features, test.labels
print(f"clean accuracy        = {accuracy_pct(model, x, y):.2f}%")

# --- FGSM: one signed gradient step ------------------------------------------
for eps in (0.05, 0.1, 0.2):
    x_adv = fgsm(model, x, y, eps)
    print(f"fgsm  eps={eps:4}      -> racc {accuracy_pct(model, x_adv, y):6.2f}%"
          f"   max|delta|={np.abs(x_adv - x).max():.3f}")

# --- PGD: iterated ascent with projection ------------------------------------
for norm, eps in (("linf", 0.1), ("l2", 0.3)):
    cfg = AttackConfig(norm=norm, epsilon=eps, steps=10, restarts=5,
                       random_start=True, seed=0)
    x_adv = pgd(model, cross_entropy_per_sample, x, y, cfg)
    delta = x_adv - x
    size = np.abs(delta).max() if norm == "linf" else \
        np.linalg.norm(delta, axis=1).max()
    print(f"pgd   {norm:4} eps={eps:4} -> racc {accuracy_pct(model, x_adv, y):6.2f}%"
          f"   ||delta||={size:.4f} (ball respected)")

# --- feature-space inner maximization ----------------------------------------
# push a second model's output at x+delta away from this model's output at x;
# this is how the distillation loop generates its adversarial inputs
other = train_supervised(MlpModel([2, 32, 2], seed=1), train,
                         OptimizerConfig(epochs=25, batch_size=64, seed=1))
cfg = AttackConfig(norm="l2", epsilon=0.3, steps=10, random_start=False)
delta, p_vals = feature_attack(other, model, x[:5], cfg)
print("\nfeature attack on 5 samples:")
print("  objective values    =", p_vals.round(4))
print("  perturbation norms  =", np.linalg.norm(delta, axis=1).round(4))

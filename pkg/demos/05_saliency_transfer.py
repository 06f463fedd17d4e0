"""Attention transfer: input-gradient maps before and after distillation.

A model's map |d logit_y / d x| shows which pixels the class score listens
to. Distillation should drag the student's maps toward its teachers'. Run
demos/00_build_image_corpus.py first.
"""
import numpy as np

from ardlab import AttackConfig, DistillConfig, OptimizerConfig
from ardlab.data import load_mnist_idx
from ardlab.experiments import distill_student, train_teachers
from ardlab.models import MlpModel
from ardlab.saliency import export_maps_csv, input_gradient_map, saliency_l2

train = load_mnist_idx("data/digits/train-images-idx3-ubyte",
                       "data/digits/train-labels-idx1-ubyte", 10000)
test = load_mnist_idx("data/digits/t10k-images-idx3-ubyte",
                      "data/digits/t10k-labels-idx1-ubyte", 2000, "test")

opt = OptimizerConfig(lr=0.1, momentum=0.9, epochs=20, batch_size=128)
attack = AttackConfig(norm="linf", epsilon=0.1, steps=7, random_start=False,
                      clamp=(0.0, 1.0))
pair, _ = train_teachers(train, test, [64, 64], opt, attack, seed=0)

cfg = DistillConfig(
    attack=AttackConfig(norm="linf", epsilon=0.1, steps=5,
                        random_start=False, clamp=(0.0, 1.0)),
    optimizer=OptimizerConfig(lr=0.1, momentum=0.9, epochs=20,
                              batch_size=128))
student, _ = distill_student(pair, train, [32], cfg, seed=0)
# the comparison point: the same student before any distillation
init = MlpModel([train.dim, 32, train.n_classes], role="student", seed=2)

models = {"clean_teacher": pair.clean, "adv_teacher": pair.adv,
          "undistilled": init, "distilled": student}
n = 20
dists = {}
for tname in ("clean_teacher", "adv_teacher"):
    for sname in ("undistilled", "distilled"):
        vals = []
        for i in range(n):
            x, y = test.features[i], int(test.labels[i])
            vals.append(saliency_l2(
                input_gradient_map(models[sname], x, y),
                input_gradient_map(models[tname], x, y)))
        dists[(tname, sname)] = float(np.mean(vals))

print(f"mean map distance over {n} test images (smaller = more aligned):")
for tname in ("clean_teacher", "adv_teacher"):
    u = dists[(tname, "undistilled")]
    d = dists[(tname, "distilled")]
    print(f"  to {tname:13s}: undistilled {u:6.2f} -> distilled {d:6.2f}")

maps = [input_gradient_map(student, test.features[i],
                           int(test.labels[i]), "distilled", i)
        for i in range(5)]
export_maps_csv(maps, "saliency_maps_demo.csv")
print("\nwrote 5 flattened maps to saliency_maps_demo.csv")

"""Write the local image corpus as IDX files under data/digits/.

The lab's image experiments read MNIST-format IDX files from disk. This
script materializes a small real image corpus (8x8 grayscale digits bundled
with scikit-learn, rescaled to the 0..255 byte range) in exactly that
format, so everything downstream runs fully offline.

Run once before the digits demos or the digits CLI config:

    python demos/00_build_image_corpus.py
"""
from ardlab.data import export_digits_corpus, load_mnist_idx

paths = export_digits_corpus("data/digits", test_count=500, seed=0)
for key, path in paths.items():
    print(f"{key:13s} -> {path}")

train = load_mnist_idx(paths["train_images"], paths["train_labels"], 10000)
test = load_mnist_idx(paths["test_images"], paths["test_labels"], 2000)
print(f"\ntrain: {len(train)} samples of dim {train.dim}, "
      f"{train.n_classes} classes")
print(f"test:  {len(test)} samples, pixel range "
      f"[{test.features.min():.0f}, {test.features.max():.0f}]")

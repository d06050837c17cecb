"""End-to-end run on generated data: synthesize, train, segment, evaluate.

Creates a small synthetic dataset, trains both classifiers on one half,
evaluates on the other half, and writes posterior/segmentation images for
one test image.  Everything is seeded, so repeated runs produce identical
numbers.

Usage: python demos/02_synthetic_training_run.py [output_dir]
"""

import os
import shutil
import sys

from vesselwave import RunConfig, generate_dataset, load_model
from vesselwave.pipeline import evaluate_split, segment, train

base = sys.argv[1] if len(sys.argv) > 1 else "demos/output/synthetic_run"
shutil.rmtree(base, ignore_errors=True)

everything = os.path.join(base, "all")
stems = generate_dataset(everything, count=8, size=192, seed=2024)
print(f"generated {len(stems)} synthetic fundus-like images under {everything}")

# Split into train/test halves by copying the triples.
for split, chunk in (("train", stems[:4]), ("test", stems[4:])):
    for sub in ("images", "labels1", "masks"):
        os.makedirs(os.path.join(base, split, sub))
        for stem in chunk:
            shutil.copy(
                os.path.join(everything, sub, stem + ".png"),
                os.path.join(base, split, sub, stem + ".png"),
            )

for kind, k in (("gmm", 5), ("lmse", 1)):
    cfg = RunConfig(
        root=os.path.join(base, "train"),
        classifier=kind,
        k=k,
        samples=50_000,
        seed=2024,
    )
    model_path = os.path.join(base, f"model_{kind}.json")
    train(cfg, model_path)
    eval_cfg = RunConfig(
        root=os.path.join(base, "test"), classifier=kind, k=k, seed=2024
    )
    metrics = evaluate_split(eval_cfg, load_model(model_path), os.path.join(base, kind))
    print(f"{kind:4s}: az = {metrics['az']:.4f}  accuracy = {metrics['accuracy']:.4f}")

# Posterior and binary segmentation for one held-out image.
bundle = load_model(os.path.join(base, "model_gmm.json"))
image = os.path.join(base, "test", "images", stems[4] + ".png")
written = segment(RunConfig(seed=2024), bundle, [image], os.path.join(base, "maps"))
for pgm, png in written:
    print(f"wrote {pgm}")
    print(f"wrote {png}")
print(f"ROC curves: {os.path.join(base, 'gmm', 'roc.csv')} and "
      f"{os.path.join(base, 'lmse', 'roc.csv')}")

"""ROC mechanics: threshold sweeps, the pair-ordering view, observer points.

First walks a six-pixel example through the curve construction, checking the
area against direct pair counting, then evaluates a trained classifier on
synthetic data with an imperfect "second observer" to show the reference
point that accompanies the curve.  Plots the curve if matplotlib is
available.

Usage: python demos/03_roc_analysis.py [output_dir]
"""

import os
import shutil
import sys

import numpy as np

from vesselwave import RunConfig, generate_dataset, load_model, roc
from vesselwave.dataset import discover
from vesselwave.evaluate import observer_point, write_roc_csv
from vesselwave.pipeline import prepare_image, score_map, train

base = sys.argv[1] if len(sys.argv) > 1 else "demos/output/roc"
shutil.rmtree(base, ignore_errors=True)
os.makedirs(base)

# --- A hand-sized example -------------------------------------------------
scores = np.array([0.9, 0.8, 0.4, 0.7, 0.3, 0.1])
labels = np.array([1, 1, 1, 0, 0, 0], dtype=bool)
curve = roc([scores], [labels], [np.ones(6, bool)])
print("six-pixel example (vessel scores .9/.8/.4, non-vessel .7/.3/.1):")
for t, f, p in zip(curve.thresholds, curve.fpf, curve.tpf):
    print(f"  score > {t:>5}: FPF={f:.3f} TPF={p:.3f}")
pos, neg = scores[labels], scores[~labels]
pairs = (pos[:, None] > neg[None, :]).mean()
print(f"  az = {curve.az:.4f}, correctly ordered pairs = {pairs:.4f}")

# --- A trained classifier with an observer reference ----------------------
root = os.path.join(base, "data")
stems = generate_dataset(root, count=4, size=160, seed=77)
cfg = RunConfig(root=root, classifier="gmm", k=3, samples=30_000, seed=77)
model_path = os.path.join(base, "model.json")
train(cfg, model_path)
bundle = load_model(model_path)

# Fake second observer: the truth with a few vessel pixels dropped.
rng = np.random.default_rng(77)
scores_list, truths, fovs, observers = [], [], [], []
for item in discover(root):
    prepared = prepare_image(cfg, item, bundle.params, with_truth=True)
    scores_list.append(score_map("gmm", bundle.model, prepared.stack))
    truths.append(prepared.truth)
    fovs.append(prepared.fov)
    observer = prepared.truth & (rng.random(prepared.truth.shape) > 0.15)
    observers.append(observer)

curve = roc(scores_list, truths, fovs)
ofpf, otpf, oacc = observer_point(observers, truths, fovs)
print(f"\nclassifier: az = {curve.az:.4f} over {len(stems)} pooled images")
print(f"observer reference point: FPF={ofpf:.4f} TPF={otpf:.4f} "
      f"accuracy={oacc:.4f}")
csv_path = os.path.join(base, "roc.csv")
write_roc_csv(csv_path, curve)
print(f"curve written to {csv_path}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(curve.fpf, curve.tpf, label=f"GMM (az={curve.az:.3f})")
    ax.plot([ofpf], [otpf], "k*", markersize=12, label="second observer")
    ax.plot([0, 1], [0, 1], ":", color="gray")
    ax.set_xlabel("false positive fraction")
    ax.set_ylabel("true positive fraction")
    ax.legend(loc="lower right")
    fig.savefig(os.path.join(base, "roc.png"), dpi=120, bbox_inches="tight")
    print(f"plot written to {os.path.join(base, 'roc.png')}")
except ImportError:
    print("matplotlib not installed; skipping the plot")

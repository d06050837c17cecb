"""End-to-end orchestration: train, segment, evaluate, leave-one-out.

All runs are driven by a :class:`RunConfig`; two runs with the same config
and seed produce bitwise-identical model files and CSV outputs.
"""

import os
from dataclasses import asdict, dataclass

import numpy as np

from . import classify, evaluate, imgio
from .dataset import DatasetItem, discover, require_labels
from .errors import DatasetError, ParameterError
from .features import build_stack, normalize
from .wavelet import MorletParams

WORKING_CHANNEL = "green"

MASK_CHANNEL = "red"


@dataclass
class RunConfig:
    """Reproducible settings for a pipeline run.

    ``threshold`` may be left as None to use the classifier's natural
    operating point: posterior 0.5 for the Bayes rule, score 0 for LMSE.
    """

    root: str = None
    scales: tuple = (2.0, 3.0, 4.0, 6.0)
    epsilon: float = 8.0
    k0: tuple = (0.0, 3.0)
    angle_step: float = 10.0
    classifier: str = "gmm"
    k: int = 20
    samples: int = 1_000_000
    seed: int = 0
    threshold: float = None
    border_iters: int = 24

    def __post_init__(self):
        if self.classifier not in ("gmm", "lmse"):
            raise ParameterError(
                f"classifier must be 'gmm' or 'lmse', got {self.classifier!r}"
            )
        if not 0.0 < self.angle_step <= 180.0:
            raise ParameterError(f"angle step must be in (0, 180], got {self.angle_step}")
        self.scales = tuple(float(s) for s in self.scales)
        self.k0 = tuple(float(c) for c in self.k0)

    def morlet_params(self):
        angles = tuple(np.arange(0.0, 180.0, self.angle_step))
        return MorletParams(epsilon=self.epsilon, k0=self.k0, angles=angles)

    def decision_threshold(self):
        if self.threshold is not None:
            return self.threshold
        return 0.5 if self.classifier == "gmm" else 0.0

    def fingerprint(self):
        doc = asdict(self)
        doc["scales"] = list(self.scales)
        doc["k0"] = list(self.k0)
        return doc


@dataclass
class PreparedImage:
    """Pre-processed features for one dataset item."""

    stem: str
    stack: object
    fov: np.ndarray
    grown: np.ndarray
    truth: np.ndarray = None
    observer: np.ndarray = None


def load_fov(item, img):
    """Load the paired mask, or derive one from the bright channel."""
    if item.mask is not None:
        mask = imgio.load_mask(item.mask)
        imgio.check_mask_matches(mask, img, name=item.stem)
        return mask
    red = imgio.load_channel(item.image, MASK_CHANNEL)
    return imgio.derive_mask(red)


def prepare_image(config, item, params=None, with_truth=False, with_observer=False):
    """Run pre-processing and feature extraction for one item."""
    if params is None:
        params = config.morlet_params()
    img = imgio.load_channel(item.image, WORKING_CHANNEL)
    fov = load_fov(item, img)
    work = imgio.invert(img)
    work, grown = imgio.extend_border(work, fov, config.border_iters)
    stack = build_stack(work, grown, params, config.scales)
    stack, _ = normalize(stack, grown)
    prepared = PreparedImage(stem=item.stem, stack=stack, fov=fov, grown=grown)
    if with_truth:
        truth = imgio.load_mask(item.label1)
        imgio.check_mask_matches(truth, img, name=item.stem)
        prepared.truth = truth
    if with_observer and item.label2 is not None:
        obs = imgio.load_mask(item.label2)
        imgio.check_mask_matches(obs, img, name=item.stem)
        prepared.observer = obs
    return prepared


def fit_classifier(config, training_set):
    if config.classifier == "gmm":
        return classify.fit_gmm(training_set, config.k, seed=config.seed)
    return classify.fit_lmse(training_set)


def score_map(config_or_kind, model, stack):
    """Posterior map (GMM) or linear score map (LMSE) for a stack."""
    kind = getattr(config_or_kind, "classifier", config_or_kind)
    if kind == "gmm":
        return classify.gmm_posterior(model, stack)
    return classify.lmse_score(model, stack)


def train(config, model_path):
    """Train on a dataset root and persist the model file.

    Returns the fitted model.
    """
    items = discover(config.root)
    require_labels(items, "label1")
    params = config.morlet_params()
    triples = []
    for item in items:
        prepared = prepare_image(config, item, params, with_truth=True)
        triples.append((prepared.stack, prepared.truth, prepared.fov))
    training_set = classify.subsample(triples, config.samples, config.seed)
    model = fit_classifier(config, training_set)
    classify.save_model(
        model_path, model, config.scales, params, config=config.fingerprint()
    )
    return model


def segment(config, bundle, image_paths, out_dir):
    """Score images with a loaded model; write posterior PGM + binary PNG.

    Images are paired with ``masks/<stem>`` when they live in an
    ``images/`` directory that has a sibling ``masks/``; otherwise the FOV
    is derived by thresholding.

    Returns the list of written (pgm, png) path pairs.
    """
    os.makedirs(out_dir, exist_ok=True)
    threshold = _bundle_threshold(config, bundle)
    cfg = _bundle_config(config, bundle)
    written = []
    for path in image_paths:
        stem = os.path.splitext(os.path.basename(path))[0]
        item = _loose_item(path, stem)
        prepared = prepare_image(cfg, item, bundle.params)
        scores = score_map(bundle.kind, bundle.model, prepared.stack)
        pgm = os.path.join(out_dir, stem + "_posterior.pgm")
        if bundle.kind == "gmm":
            imgio.write_pgm16(pgm, scores, lo=0.0, hi=1.0)
        else:
            imgio.write_pgm16(pgm, scores, lo=float(scores.min()), hi=float(scores.max()))
        png = os.path.join(out_dir, stem + "_segmentation.png")
        imgio.write_binary_png(png, scores > threshold)
        written.append((pgm, png))
    return written


def _loose_item(path, stem):
    mask = None
    parent = os.path.dirname(os.path.abspath(path))
    if os.path.basename(parent) == "images":
        mask_dir = os.path.join(os.path.dirname(parent), "masks")
        for ext in imgio.SUPPORTED_EXTENSIONS:
            candidate = os.path.join(mask_dir, stem + ext)
            if os.path.isfile(candidate):
                mask = candidate
                break
    return DatasetItem(stem=stem, image=path, mask=mask)


def _bundle_config(config, bundle):
    """Feature settings must come from the model, not the CLI invocation."""
    cfg = RunConfig(
        root=config.root,
        scales=bundle.scales,
        epsilon=bundle.params.epsilon,
        k0=bundle.params.k0,
        classifier=bundle.kind,
        threshold=config.threshold,
        border_iters=config.border_iters,
        seed=config.seed,
    )
    return cfg


def _bundle_threshold(config, bundle):
    if config.threshold is not None:
        return config.threshold
    return 0.5 if bundle.kind == "gmm" else 0.0


def evaluate_split(config, bundle, out_dir):
    """Pooled ROC, accuracy and observer point over a labeled test split.

    Writes ``roc.csv`` and ``summary.csv`` under ``out_dir`` and returns the
    summary metrics as a dict.
    """
    items = discover(config.root)
    require_labels(items, "label1")
    os.makedirs(out_dir, exist_ok=True)
    cfg = _bundle_config(config, bundle)
    scores, truths, fovs, observers = [], [], [], []
    for item in items:
        prepared = prepare_image(cfg, item, bundle.params, with_truth=True, with_observer=True)
        scores.append(score_map(bundle.kind, bundle.model, prepared.stack))
        truths.append(prepared.truth)
        fovs.append(prepared.fov)
        observers.append(prepared.observer)
    curve = evaluate.roc(scores, truths, fovs)
    threshold = _bundle_threshold(config, bundle)
    segs = [s > threshold for s in scores]
    acc = evaluate.accuracy(segs, truths, fovs)
    metrics = {"az": curve.az, "accuracy": acc, "n_images": len(items)}
    if all(obs is not None for obs in observers):
        ofpf, otpf, oacc = evaluate.observer_point(observers, truths, fovs)
        metrics.update(
            {"observer_fpf": ofpf, "observer_tpf": otpf, "observer_accuracy": oacc}
        )
    evaluate.write_roc_csv(os.path.join(out_dir, "roc.csv"), curve)
    evaluate.write_summary_csv(os.path.join(out_dir, "summary.csv"), metrics)
    return metrics


def leave_one_out(config, out_dir):
    """Rotate training over N-1 images and pool held-out scores.

    Each fold subsamples its own training set with seed ``config.seed +
    fold index``, trains a fresh classifier, and scores the held-out image.
    Writes ``per_image.csv``, the pooled ``roc.csv`` and ``summary.csv``.
    """
    items = discover(config.root)
    require_labels(items, "label1")
    if len(items) < 2:
        raise DatasetError("leave-one-out needs at least 2 labeled images")
    os.makedirs(out_dir, exist_ok=True)
    params = config.morlet_params()
    prepared = [
        prepare_image(config, item, params, with_truth=True) for item in items
    ]
    threshold = config.decision_threshold()
    scores, per_image = [], []
    for fold, held_out in enumerate(prepared):
        rest = [
            (p.stack, p.truth, p.fov) for i, p in enumerate(prepared) if i != fold
        ]
        fold_config = RunConfig(**{**config.fingerprint(), "seed": config.seed + fold})
        training_set = classify.subsample(rest, config.samples, fold_config.seed)
        model = fit_classifier(fold_config, training_set)
        fold_scores = score_map(config.classifier, model, held_out.stack)
        scores.append(fold_scores)
        fold_curve = evaluate.roc([fold_scores], [held_out.truth], [held_out.fov])
        fold_acc = evaluate.accuracy(
            [fold_scores > threshold], [held_out.truth], [held_out.fov]
        )
        per_image.append((held_out.stem, fold_curve.az, fold_acc))
    truths = [p.truth for p in prepared]
    fovs = [p.fov for p in prepared]
    curve = evaluate.roc(scores, truths, fovs)
    acc = evaluate.accuracy([s > threshold for s in scores], truths, fovs)
    with open(os.path.join(out_dir, "per_image.csv"), "w", newline="") as fh:
        fh.write("stem,az,accuracy\n")
        for stem, az, fold_acc in per_image:
            fh.write(f"{stem},{az!r},{fold_acc!r}\n")
    metrics = {"az": curve.az, "accuracy": acc, "n_images": len(items)}
    evaluate.write_roc_csv(os.path.join(out_dir, "roc.csv"), curve)
    evaluate.write_summary_csv(os.path.join(out_dir, "summary.csv"), metrics)
    return metrics

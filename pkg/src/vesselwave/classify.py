"""Supervised pixel classifiers: GMM-Bayes (EM-fitted) and linear LMSE.

The Bayesian classifier models each class-conditional density as a mixture
of full-covariance Gaussians fitted with Expectation-Maximization; class
priors are the class frequencies of the training set.  The linear minimum
squared error classifier solves the augmented least-squares system with
targets +1 (vessel) and -1 (non-vessel).

Everything is deterministic for a fixed seed: subsampling, the EM
initialization, and the fits themselves.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DataError, ModelError, ParameterError, TrainingError
from .wavelet import MorletParams

MODEL_FORMAT_VERSION = 1

NORMALIZATION_TAG = "per-image-zscore-population"

# Covariance ridge: lambda = COV_RIDGE * mean(diag(cov)) added every M-step.
COV_RIDGE = 1e-6

_CHUNK = 1 << 18


@dataclass
class TrainingSet:
    """Labeled feature vectors; ``labels`` is True for vessel pixels."""

    samples: np.ndarray
    labels: np.ndarray
    seed: int

    @property
    def dim(self):
        return self.samples.shape[1]


@dataclass
class GaussianMixture:
    """One class-conditional mixture: weights (k,), means (k,d), covs (k,d,d)."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @property
    def n_components(self):
        return len(self.weights)


@dataclass
class GmmModel:
    """Two-class Bayes classifier; classes[0] is vessel, classes[1] non-vessel."""

    classes: list
    priors: np.ndarray
    log_likelihoods: tuple = None  # per-class EM history, not persisted

    @property
    def dim(self):
        return self.classes[0].means.shape[1]


@dataclass
class LmseModel:
    """Linear decision function g(v) = w . v + w0."""

    w: np.ndarray
    w0: float

    @property
    def dim(self):
        return len(self.w)


def subsample(items, n, seed):
    """Draw a training set uniformly, without replacement, across images.

    Parameters
    ----------
    items : sequence of (FeatureStack, labels, mask)
        Per-image feature stacks with boolean vessel labels and FOV masks;
        only in-FOV pixels are eligible.
    n : int
        Number of pixel samples to draw.
    seed : int
        Seed for the pixel lottery; fixed seed gives an identical set.

    Returns
    -------
    TrainingSet
    """
    if n <= 0:
        raise ParameterError(f"sample count must be positive, got {n}")
    sizes = []
    dim = None
    for stack, labels, mask in items:
        if np.shape(labels) != stack.shape or np.shape(mask) != stack.shape:
            raise DataError("labels/mask shape does not match the feature stack")
        if dim is None:
            dim = stack.n_features
        elif stack.n_features != dim:
            raise DataError("feature stacks disagree on dimension")
        sizes.append(int(np.count_nonzero(mask)))
    total = sum(sizes)
    if n > total:
        raise ParameterError(
            f"requested {n} samples but only {total} in-FOV pixels are available"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(total, size=n, replace=False))
    samples = np.empty((n, dim))
    out_labels = np.empty(n, dtype=bool)
    offset = 0
    pos = 0
    for (stack, labels, mask), size in zip(items, sizes):
        lo = np.searchsorted(chosen, offset)
        hi = np.searchsorted(chosen, offset + size)
        if hi > lo:
            local = chosen[lo:hi] - offset
            mask = np.asarray(mask, dtype=bool)
            samples[pos : pos + hi - lo] = stack.pixels(mask)[local]
            out_labels[pos : pos + hi - lo] = np.asarray(labels, dtype=bool)[mask][local]
            pos += hi - lo
        offset += size
    return TrainingSet(samples=samples, labels=out_labels, seed=seed)


def _log_joint(x, mix):
    """log(weight_j) + log N(x; mu_j, cov_j) for every sample and component."""
    n, d = x.shape
    out = np.empty((n, mix.n_components))
    log2pi = d * math.log(2.0 * math.pi)
    with np.errstate(divide="ignore"):
        log_weights = np.log(mix.weights)
    for j in range(mix.n_components):
        try:
            chol = np.linalg.cholesky(mix.covs[j])
        except np.linalg.LinAlgError:
            raise TrainingError(
                f"component {j + 1} covariance is not positive-definite"
            ) from None
        diff = (x - mix.means[j]).T
        sol = solve_triangular(chol, diff, lower=True, check_finite=False)
        quad = np.einsum("ij,ij->j", sol, sol)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        out[:, j] = log_weights[j] - 0.5 * (log2pi + logdet + quad)
    return out


def _logsumexp_rows(terms):
    peak = terms.max(axis=1)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    summed = np.exp(terms - safe[:, None]).sum(axis=1)
    with np.errstate(divide="ignore"):
        return safe + np.log(summed)


def class_log_density(x, mix):
    """log p(x | class) under a mixture, evaluated in log space, chunked."""
    out = np.empty(len(x))
    for start in range(0, len(x), _CHUNK):
        chunk = x[start : start + _CHUNK]
        out[start : start + _CHUNK] = _logsumexp_rows(_log_joint(chunk, mix))
    return out


def _em_pass(x, mix):
    """One E-step sweep: log-likelihood plus the M-step sufficient statistics."""
    n, d = x.shape
    k = mix.n_components
    ll = 0.0
    nk = np.zeros(k)
    mean_acc = np.zeros((k, d))
    scatter_acc = np.zeros((k, d, d))
    for start in range(0, n, _CHUNK):
        chunk = x[start : start + _CHUNK]
        terms = _log_joint(chunk, mix)
        lse = _logsumexp_rows(terms)
        ll += lse.sum()
        resp = np.exp(terms - lse[:, None])
        nk += resp.sum(axis=0)
        mean_acc += resp.T @ chunk
        for j in range(k):
            scatter_acc[j] += chunk.T @ (chunk * resp[:, j : j + 1])
    return ll, nk, mean_acc, scatter_acc


def _regularized(cov):
    cov = 0.5 * (cov + cov.T)
    ridge = COV_RIDGE * max(np.trace(cov) / len(cov), 0.0)
    return cov + ridge * np.eye(len(cov))


def _m_step(n, nk, mean_acc, scatter_acc, class_name):
    k, d = mean_acc.shape
    weights = nk / n
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        if nk[j] < n * 1e-12:
            raise TrainingError(
                f"component {j + 1} of class {class_name!r} collapsed "
                "(vanishing responsibility mass)"
            )
        means[j] = mean_acc[j] / nk[j]
        covs[j] = _regularized(scatter_acc[j] / nk[j] - np.outer(means[j], means[j]))
    return GaussianMixture(weights=weights, means=means, covs=covs)


def _farthest_point_centers(x, k, rng):
    first = int(rng.integers(len(x)))
    centers = [x[first]]
    d2 = ((x - x[first]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(d2))
        centers.append(x[nxt])
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return np.array(centers)


def _assign(x, centers):
    labels = np.empty(len(x), dtype=np.intp)
    c2 = (centers**2).sum(axis=1)
    for start in range(0, len(x), _CHUNK):
        chunk = x[start : start + _CHUNK]
        dist = c2 - 2.0 * (chunk @ centers.T)
        labels[start : start + _CHUNK] = np.argmin(dist, axis=1)
    return labels


def _init_mixture(x, k, rng):
    """Farthest-point seeding, 10 Lloyd iterations, then moment matching."""
    n, d = x.shape
    centers = _farthest_point_centers(x, k, rng)
    for _ in range(10):
        labels = _assign(x, centers)
        for j in range(k):
            pts = x[labels == j]
            if len(pts):
                centers[j] = pts.mean(axis=0)
    labels = _assign(x, centers)
    global_cov = _regularized(np.cov(x.T, ddof=0).reshape(d, d))
    weights = np.empty(k)
    covs = np.empty((k, d, d))
    for j in range(k):
        pts = x[labels == j]
        weights[j] = max(len(pts), 1)
        if len(pts) > d:
            covs[j] = _regularized(np.cov(pts.T, ddof=0).reshape(d, d))
        else:
            covs[j] = global_cov
    weights /= weights.sum()
    return GaussianMixture(weights=weights, means=centers, covs=covs)


def _fit_mixture(x, k, tol, max_iter, rng, class_name):
    mix = _init_mixture(x, k, rng)
    history = []
    for it in range(max_iter + 1):
        ll, nk, mean_acc, scatter_acc = _em_pass(x, mix)
        history.append(ll)
        if it > 0 and (ll - history[-2]) < tol * abs(history[-2]):
            break
        if it == max_iter:
            break
        mix = _m_step(len(x), nk, mean_acc, scatter_acc, class_name)
    return mix, np.array(history)


def fit_gmm(ts, k, tol=1e-6, max_iter=500, seed=0):
    """Fit the two-class Gaussian mixture Bayes classifier with EM.

    Parameters
    ----------
    ts : TrainingSet
        Labeled samples; both classes must be present.
    k : int
        Components per class (same for both classes).
    tol : float
        Stop when the relative log-likelihood improvement falls below this.
    max_iter : int
        Maximum number of M-steps per class.
    seed : int
        Seed for the deterministic initialization.

    Returns
    -------
    GmmModel
        Mixtures for (vessel, non-vessel), priors from class counts, and
        the per-class training log-likelihood history.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    labels = np.asarray(ts.labels, dtype=bool)
    groups = [ts.samples[labels], ts.samples[~labels]]
    names = ["vessel", "non-vessel"]
    for name, grp in zip(names, groups):
        if len(grp) == 0:
            raise DataError(f"class {name!r} has no training samples")
        if len(grp) < k * (ts.dim + 1):
            raise ParameterError(
                f"class {name!r} has {len(grp)} samples; "
                f"need at least k*(d+1) = {k * (ts.dim + 1)}"
            )
    rng = np.random.default_rng(seed)
    mixtures = []
    histories = []
    for name, grp in zip(names, groups):
        mix, hist = _fit_mixture(grp, k, tol, max_iter, rng, name)
        mixtures.append(mix)
        histories.append(hist)
    priors = np.array([len(groups[0]), len(groups[1])], dtype=np.float64)
    priors /= priors.sum()
    return GmmModel(classes=mixtures, priors=priors, log_likelihoods=tuple(histories))


def gmm_posterior(model, stack):
    """Per-pixel posterior probability of the vessel class.

    Mixture likelihoods are evaluated in log space; pixels at which both
    class densities underflow to zero fall back to the vessel prior.

    Returns
    -------
    numpy.ndarray
        Map in [0, 1] with the stack's spatial shape.
    """
    if stack.n_features != model.dim:
        raise ParameterError(
            f"stack has {stack.n_features} features, model expects {model.dim}"
        )
    x = stack.pixels()
    with np.errstate(divide="ignore"):
        log_priors = np.log(model.priors)
    log_p1 = class_log_density(x, model.classes[0]) + log_priors[0]
    log_p2 = class_log_density(x, model.classes[1]) + log_priors[1]
    with np.errstate(invalid="ignore"):
        post = np.exp(log_p1 - np.logaddexp(log_p1, log_p2))
    post[np.isnan(post)] = model.priors[0]
    return post.reshape(stack.shape)


def bayes_decide(pmap, threshold=0.5):
    """Threshold a posterior map; ties classify as non-vessel.

    At the default threshold 0.5 this is the Bayes decision rule, equal to
    comparing prior-weighted class likelihoods.
    """
    pmap = np.asarray(pmap)
    if pmap.min() < 0.0 or pmap.max() > 1.0:
        raise ParameterError("bayes_decide expects a posterior map in [0, 1]")
    return pmap > threshold


def fit_lmse(ts):
    """Fit the linear minimum squared error classifier.

    Extends every sample with a constant 1, sets targets +1 (vessel) and
    -1 (non-vessel), and solves the least-squares system with an SVD-based
    factorization rather than an explicit normal-equations inverse.
    """
    x = np.asarray(ts.samples, dtype=np.float64)
    y = np.where(np.asarray(ts.labels, dtype=bool), 1.0, -1.0)
    v = np.column_stack([x, np.ones(len(x))])
    sol, _, rank, _ = np.linalg.lstsq(v, y, rcond=None)
    if rank < v.shape[1]:
        raise TrainingError(
            "least-squares system is rank deficient; "
            "a feature may be constant or linearly dependent"
        )
    return LmseModel(w=sol[:-1], w0=float(sol[-1]))


def lmse_score(model, stack):
    """Per-pixel linear score g(v) = w . v + w0; vessel iff g(v) > 0."""
    if stack.n_features != model.dim:
        raise ParameterError(
            f"stack has {stack.n_features} features, model expects {model.dim}"
        )
    scores = stack.pixels() @ model.w + model.w0
    return scores.reshape(stack.shape)


def _model_doc(model, scales, params, config):
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "kind": "gmm" if isinstance(model, GmmModel) else "lmse",
        "dim": model.dim,
        "scales": [float(s) for s in scales],
        "epsilon": float(params.epsilon),
        "k0": [float(c) for c in params.k0],
        "angles": [float(t) for t in params.angles],
        "normalization": NORMALIZATION_TAG,
    }
    if isinstance(model, GmmModel):
        doc["priors"] = [float(p) for p in model.priors]
        doc["classes"] = [
            {
                "components": [
                    {
                        "weight": float(mix.weights[j]),
                        "mean": [float(u) for u in mix.means[j]],
                        "cov": [[float(c) for c in row] for row in mix.covs[j]],
                    }
                    for j in range(mix.n_components)
                ]
            }
            for mix in model.classes
        ]
    else:
        doc["w"] = [float(u) for u in model.w]
        doc["w0"] = float(model.w0)
    if config is not None:
        doc["config"] = config
    return doc


def save_model(path, model, scales, params, config=None):
    """Persist a classifier as versioned JSON with full float precision."""
    doc = _model_doc(model, scales, params, config)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


@dataclass
class ModelBundle:
    """A loaded classifier plus the feature configuration it was trained with."""

    model: object
    kind: str
    scales: tuple
    params: MorletParams
    config: dict = None


def load_model(path):
    """Load a model file written by :func:`save_model`.

    Raises
    ------
    ModelError
        On version or kind mismatch, or structurally invalid documents.
    """
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    version = doc.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelError(
            f"unsupported model version {version!r} in {path}; "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    kind = doc.get("kind")
    if kind not in ("gmm", "lmse"):
        raise ModelError(f"unknown classifier kind {kind!r} in {path}")
    params = MorletParams(
        epsilon=doc["epsilon"], k0=tuple(doc["k0"]), angles=tuple(doc["angles"])
    )
    if kind == "gmm":
        classes = []
        for cls in doc["classes"]:
            comps = cls["components"]
            classes.append(
                GaussianMixture(
                    weights=np.array([c["weight"] for c in comps]),
                    means=np.array([c["mean"] for c in comps]),
                    covs=np.array([c["cov"] for c in comps]),
                )
            )
        model = GmmModel(classes=classes, priors=np.array(doc["priors"]))
    else:
        model = LmseModel(w=np.array(doc["w"]), w0=float(doc["w0"]))
    if model.dim != doc["dim"]:
        raise ModelError(f"model dimension mismatch in {path}")
    return ModelBundle(
        model=model,
        kind=kind,
        scales=tuple(doc["scales"]),
        params=params,
        config=doc.get("config"),
    )

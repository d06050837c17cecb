import numpy as np
import pytest

from vesselwave.classify import (
    COV_RIDGE,
    GaussianMixture,
    GmmModel,
    LmseModel,
    TrainingSet,
    bayes_decide,
    fit_gmm,
    fit_lmse,
    gmm_posterior,
    lmse_score,
    load_model,
    save_model,
    subsample,
)
from vesselwave.errors import (
    DataError,
    ModelError,
    ParameterError,
    TrainingError,
)
from vesselwave.features import FeatureStack
from vesselwave.wavelet import MorletParams


def random_items(rng, n_images=3, dim=2, side=8):
    items = []
    for _ in range(n_images):
        planes = rng.random((dim, side, side))
        labels = rng.random((side, side)) > 0.7
        mask = rng.random((side, side)) > 0.25
        items.append((FeatureStack(planes=planes, scales=None), labels, mask))
    return items


# ---------------------------------------------------------------- subsample


def test_subsample_deterministic():
    rng = np.random.default_rng(30)
    items = random_items(rng)
    a = subsample(items, 50, seed=99)
    b = subsample(items, 50, seed=99)
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = subsample(items, 50, seed=100)
    assert not np.array_equal(a.samples, c.samples)


def test_subsample_full_set_membership():
    rng = np.random.default_rng(31)
    items = random_items(rng, n_images=2, side=5)
    total = sum(int(m.sum()) for _, _, m in items)
    ts = subsample(items, total, seed=0)
    expected = np.concatenate([s.pixels(m) for s, _, m in items])
    got = ts.samples[np.lexsort(ts.samples.T)]
    want = expected[np.lexsort(expected.T)]
    np.testing.assert_allclose(got, want)


def test_subsample_restricted_to_fov():
    rng = np.random.default_rng(32)
    items = []
    planes = np.zeros((1, 6, 6))
    planes[0, 2:4, 2:4] = 7.0
    mask = np.zeros((6, 6), dtype=bool)
    mask[2:4, 2:4] = True
    labels = np.zeros((6, 6), dtype=bool)
    items.append((FeatureStack(planes=planes, scales=None), labels, mask))
    ts = subsample(items, 4, seed=1)
    np.testing.assert_array_equal(ts.samples, np.full((4, 1), 7.0))


def test_subsample_rejects_oversized_request():
    rng = np.random.default_rng(33)
    items = random_items(rng, n_images=1, side=4)
    with pytest.raises(ParameterError):
        subsample(items, 10_000, seed=0)
    with pytest.raises(ParameterError):
        subsample(items, 0, seed=0)


def test_subsample_label_ratio_tracks_population():
    rng = np.random.default_rng(34)
    items = []
    for _ in range(4):
        planes = rng.random((2, 40, 40))
        labels = rng.random((40, 40)) < 0.127
        mask = np.ones((40, 40), dtype=bool)
        items.append((FeatureStack(planes=planes, scales=None), labels, mask))
    pop_ratio = np.mean([l[m].mean() for _, l, m in items])
    ts = subsample(items, 3000, seed=2)
    assert ts.labels.mean() == pytest.approx(pop_ratio, abs=0.02)


# ------------------------------------------------------------------ fit_gmm


def bimodal_class(rng, n_per_cluster=10_000):
    return np.concatenate(
        [
            rng.normal(-5.0, 1.0, n_per_cluster),
            rng.normal(5.0, 1.0, n_per_cluster),
        ]
    )[:, None]


def two_class_ts(rng, n=4000, dim=2, shift=2.5):
    vessel = rng.normal(shift, 1.0, size=(n // 2, dim))
    background = rng.normal(0.0, 1.0, size=(n // 2, dim))
    samples = np.vstack([vessel, background])
    labels = np.r_[np.ones(n // 2, bool), np.zeros(n // 2, bool)]
    return TrainingSet(samples=samples, labels=labels, seed=0)


def test_fit_gmm_rejects_bad_k():
    rng = np.random.default_rng(40)
    with pytest.raises(ParameterError):
        fit_gmm(two_class_ts(rng), k=0)


def test_fit_gmm_rejects_empty_class():
    ts = TrainingSet(samples=np.random.default_rng(41).random((50, 2)),
                     labels=np.ones(50, dtype=bool), seed=0)
    with pytest.raises(DataError):
        fit_gmm(ts, k=1)


def test_fit_gmm_rejects_undersized_class():
    rng = np.random.default_rng(42)
    samples = rng.random((20, 4))
    labels = np.r_[np.ones(2, bool), np.zeros(18, bool)]
    ts = TrainingSet(samples=samples, labels=labels, seed=0)
    with pytest.raises(ParameterError):
        fit_gmm(ts, k=1)  # vessel class has 2 < 1 * (4 + 1) samples


def test_fit_gmm_single_component_moment_matching():
    # With k=1 the EM fixed point is the class sample mean and the
    # population covariance plus the documented diagonal ridge.
    rng = np.random.default_rng(43)
    ts = two_class_ts(rng, n=3000, dim=3)
    model = fit_gmm(ts, k=1, seed=7)
    for cls_idx, picker in ((0, ts.labels), (1, ~ts.labels)):
        cls = ts.samples[picker]
        mix = model.classes[cls_idx]
        np.testing.assert_allclose(mix.means[0], cls.mean(axis=0), atol=1e-9)
        cov = np.cov(cls.T, ddof=0)
        expected = cov + COV_RIDGE * (np.trace(cov) / 3) * np.eye(3)
        np.testing.assert_allclose(mix.covs[0], expected, atol=1e-9)
        assert mix.weights[0] == pytest.approx(1.0)
    np.testing.assert_allclose(
        model.priors, [ts.labels.mean(), 1 - ts.labels.mean()], atol=1e-12
    )


def oracle_em_1d(x, n_iter=200, tol=1e-10):
    """From-scratch scalar two-component EM, moment-initialized at -4/+4."""
    mu = np.array([-4.0, 4.0])
    var = np.array([1.0, 1.0])
    pi = np.array([0.5, 0.5])
    prev = -np.inf
    for _ in range(n_iter):
        dens = (
            pi
            / np.sqrt(2 * np.pi * var)
            * np.exp(-0.5 * (x[:, None] - mu) ** 2 / var)
        )
        tot = dens.sum(axis=1)
        ll = np.log(tot).sum()
        resp = dens / tot[:, None]
        nk = resp.sum(axis=0)
        mu = (resp * x[:, None]).sum(axis=0) / nk
        var = (resp * (x[:, None] - mu) ** 2).sum(axis=0) / nk
        pi = nk / len(x)
        if ll - prev < tol * abs(prev):
            break
        prev = ll
    return np.sort(mu), ll


def test_fit_gmm_recovers_two_clusters():
    rng = np.random.default_rng(44)
    bimodal = bimodal_class(rng)
    other = rng.normal(0.0, 1.0, size=(2000, 1))
    samples = np.vstack([bimodal, other])
    labels = np.r_[np.ones(len(bimodal), bool), np.zeros(len(other), bool)]
    ts = TrainingSet(samples=samples, labels=labels, seed=0)
    model = fit_gmm(ts, k=2, seed=3)
    means = np.sort(model.classes[0].means.ravel())
    np.testing.assert_allclose(means, [-5.0, 5.0], atol=0.1)
    oracle_means, _ = oracle_em_1d(bimodal.ravel())
    np.testing.assert_allclose(means, oracle_means, atol=0.02)


def test_fit_gmm_loglikelihood_monotone():
    rng = np.random.default_rng(45)
    bimodal = bimodal_class(rng, n_per_cluster=2000)
    other = rng.normal(0.0, 1.0, size=(500, 1))
    samples = np.vstack([bimodal, other])
    labels = np.r_[np.ones(len(bimodal), bool), np.zeros(len(other), bool)]
    model = fit_gmm(TrainingSet(samples, labels, 0), k=3, seed=5)
    for history in model.log_likelihoods:
        assert len(history) >= 2
        diffs = np.diff(history)
        assert (diffs >= -1e-9 * np.abs(history[:-1])).all()


def test_fit_gmm_deterministic():
    rng = np.random.default_rng(46)
    ts = two_class_ts(rng, n=2000)
    a = fit_gmm(ts, k=2, seed=11)
    b = fit_gmm(ts, k=2, seed=11)
    for mix_a, mix_b in zip(a.classes, b.classes):
        np.testing.assert_array_equal(mix_a.weights, mix_b.weights)
        np.testing.assert_array_equal(mix_a.means, mix_b.means)
        np.testing.assert_array_equal(mix_a.covs, mix_b.covs)


def test_fit_gmm_collapse_names_component():
    # A class whose samples are all identical has zero covariance even
    # after the ridge, so training must fail loudly.
    samples = np.vstack([np.zeros((50, 2)), np.random.default_rng(47).random((50, 2))])
    labels = np.r_[np.ones(50, bool), np.zeros(50, bool)]
    with pytest.raises(TrainingError, match="component"):
        fit_gmm(TrainingSet(samples, labels, 0), k=2, seed=0)


# ------------------------------------------------------------ gmm_posterior


def diag_mixture(means, var=1.0):
    means = np.atleast_2d(np.asarray(means, dtype=float))
    k, d = means.shape
    return GaussianMixture(
        weights=np.full(k, 1.0 / k),
        means=means,
        covs=np.array([np.eye(d) * var] * k),
    )


def grid_stack(values):
    values = np.asarray(values, dtype=float)
    return FeatureStack(planes=values[None, :, :], scales=None)


def test_posterior_symmetry_point():
    model = GmmModel(
        classes=[diag_mixture([[1.0]]), diag_mixture([[-1.0]])],
        priors=np.array([0.5, 0.5]),
    )
    post = gmm_posterior(model, grid_stack([[0.0]]))
    assert post[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_posterior_degenerate_prior():
    model = GmmModel(
        classes=[diag_mixture([[0.0]]), diag_mixture([[3.0]])],
        priors=np.array([1.0, 0.0]),
    )
    post = gmm_posterior(model, grid_stack([[-2.0, 0.0, 5.0]]))
    np.testing.assert_allclose(post, 1.0)


def test_posterior_matches_dense_oracle():
    rng = np.random.default_rng(48)
    d, k = 3, 2
    def rand_mix():
        means = rng.normal(0, 2, size=(k, d))
        covs = []
        for _ in range(k):
            a = rng.normal(0, 1, size=(d, d))
            covs.append(a @ a.T + np.eye(d))
        w = rng.random(k)
        return GaussianMixture(weights=w / w.sum(), means=means, covs=np.array(covs))

    model = GmmModel(classes=[rand_mix(), rand_mix()], priors=np.array([0.3, 0.7]))
    planes = rng.normal(0, 2, size=(d, 4, 5))
    stack = FeatureStack(planes=planes, scales=None)
    post = gmm_posterior(model, stack)

    def dense_density(x, mix):
        total = 0.0
        for j in range(k):
            diff = x - mix.means[j]
            cov = mix.covs[j]
            norm = 1.0 / np.sqrt((2 * np.pi) ** d * np.linalg.det(cov))
            total += mix.weights[j] * norm * np.exp(
                -0.5 * diff @ np.linalg.inv(cov) @ diff
            )
        return total

    for y in range(4):
        for x in range(5):
            v = planes[:, y, x]
            p1 = dense_density(v, model.classes[0]) * model.priors[0]
            p2 = dense_density(v, model.classes[1]) * model.priors[1]
            assert post[y, x] == pytest.approx(p1 / (p1 + p2), abs=1e-9)


def test_posterior_complement_sums_to_one():
    rng = np.random.default_rng(49)
    mix1 = diag_mixture(rng.normal(0, 1, (2, 2)))
    mix2 = diag_mixture(rng.normal(1, 1, (2, 2)), var=2.0)
    model = GmmModel(classes=[mix1, mix2], priors=np.array([0.4, 0.6]))
    swapped = GmmModel(classes=[mix2, mix1], priors=np.array([0.6, 0.4]))
    stack = FeatureStack(planes=rng.normal(0, 3, (2, 6, 6)), scales=None)
    p = gmm_posterior(model, stack)
    q = gmm_posterior(swapped, stack)
    np.testing.assert_allclose(p + q, 1.0, atol=1e-12)
    assert p.min() >= 0.0 and p.max() <= 1.0


def test_posterior_underflow_falls_back_to_prior():
    # A sample so remote that both class densities are exactly zero even in
    # log space; the documented fallback is the vessel prior.
    model = GmmModel(
        classes=[diag_mixture([[0.0]], var=1e-4), diag_mixture([[0.0]], var=1e-4)],
        priors=np.array([0.3, 0.7]),
    )
    post = gmm_posterior(model, grid_stack([[1e200]]))
    assert post[0, 0] == pytest.approx(0.3)


def test_posterior_dimension_mismatch():
    model = GmmModel(
        classes=[diag_mixture([[0.0, 0.0]]), diag_mixture([[1.0, 1.0]])],
        priors=np.array([0.5, 0.5]),
    )
    with pytest.raises(ParameterError):
        gmm_posterior(model, grid_stack([[0.0]]))


# ------------------------------------------------------------- bayes_decide


def test_bayes_decide_tie_is_non_vessel():
    seg = bayes_decide(np.array([[0.5, 0.500001]]), threshold=0.5)
    np.testing.assert_array_equal(seg, [[False, True]])


def test_bayes_decide_zero_threshold():
    pmap = np.array([[0.0, 0.1, 1.0]])
    np.testing.assert_array_equal(bayes_decide(pmap, 0.0), [[False, True, True]])


def test_bayes_decide_nested_thresholds():
    rng = np.random.default_rng(50)
    pmap = rng.random((12, 12))
    previous = None
    for t in (0.1, 0.3, 0.5, 0.7, 0.9):
        seg = bayes_decide(pmap, t)
        if previous is not None:
            assert (previous | seg == previous).all()  # shrinking vessel set
        previous = seg


def test_bayes_decide_rejects_score_maps():
    with pytest.raises(ParameterError):
        bayes_decide(np.array([[-3.0, 2.0]]))


def test_bayes_decide_equals_likelihood_rule():
    rng = np.random.default_rng(51)
    mix1 = diag_mixture(rng.normal(0.5, 1, (2, 2)))
    mix2 = diag_mixture(rng.normal(-0.5, 1, (2, 2)))
    model = GmmModel(classes=[mix1, mix2], priors=np.array([0.35, 0.65]))
    stack = FeatureStack(planes=rng.normal(0, 2, (2, 8, 8)), scales=None)
    from vesselwave.classify import class_log_density

    seg = bayes_decide(gmm_posterior(model, stack))
    x = stack.pixels()
    lhs = class_log_density(x, mix1) + np.log(model.priors[0])
    rhs = class_log_density(x, mix2) + np.log(model.priors[1])
    np.testing.assert_array_equal(seg, (lhs > rhs).reshape(8, 8))


def test_gmm_k1_equals_quadratic_discriminant():
    rng = np.random.default_rng(52)
    ts = two_class_ts(rng, n=3000, dim=2, shift=1.5)
    model = fit_gmm(ts, k=1, seed=0)
    test_pts = rng.normal(0.75, 1.5, size=(2, 20, 25))
    stack = FeatureStack(planes=test_pts, scales=None)
    decisions = bayes_decide(gmm_posterior(model, stack))

    # Quadratic discriminant from plain class moments.
    x = stack.pixels()
    scores = []
    for picker in (ts.labels, ~ts.labels):
        cls = ts.samples[picker]
        mu = cls.mean(axis=0)
        cov = np.cov(cls.T, ddof=0)
        diff = x - mu
        inv = np.linalg.inv(cov)
        quad = np.einsum("nd,de,ne->n", diff, inv, diff)
        scores.append(
            np.log(len(cls) / len(ts.samples))
            - 0.5 * (np.log(np.linalg.det(cov)) + quad)
        )
    qda = (scores[0] > scores[1]).reshape(20, 25)
    np.testing.assert_array_equal(decisions, qda)


# ----------------------------------------------------------------- fit_lmse


def test_lmse_hand_case_exact():
    ts = TrainingSet(
        samples=np.array([[1.0], [-1.0]]),
        labels=np.array([True, False]),
        seed=0,
    )
    model = fit_lmse(ts)
    assert abs(model.w[0] - 1.0) < 1e-12
    assert abs(model.w0) < 1e-12


def test_lmse_duplication_invariance():
    rng = np.random.default_rng(53)
    samples = rng.normal(0, 1, size=(60, 3))
    labels = rng.random(60) > 0.5
    base = fit_lmse(TrainingSet(samples, labels, 0))
    doubled = fit_lmse(
        TrainingSet(np.vstack([samples, samples]), np.r_[labels, labels], 0)
    )
    np.testing.assert_allclose(doubled.w, base.w, atol=1e-9)
    assert doubled.w0 == pytest.approx(base.w0, abs=1e-9)


def test_lmse_matches_normal_equations_oracle():
    rng = np.random.default_rng(54)
    samples = rng.normal(0, 1, size=(200, 5))
    labels = rng.random(200) > 0.4
    model = fit_lmse(TrainingSet(samples, labels, 0))
    v = np.column_stack([samples, np.ones(200)])
    y = np.where(labels, 1.0, -1.0)
    oracle = np.linalg.solve(v.T @ v, v.T @ y)
    np.testing.assert_allclose(np.r_[model.w, model.w0], oracle, atol=1e-8)


def test_lmse_residual_orthogonality():
    rng = np.random.default_rng(55)
    samples = rng.normal(0, 2, size=(300, 4))
    labels = rng.random(300) > 0.6
    model = fit_lmse(TrainingSet(samples, labels, 0))
    v = np.column_stack([samples, np.ones(300)])
    y = np.where(labels, 1.0, -1.0)
    w = np.r_[model.w, model.w0]
    residual = v.T @ (v @ w - y)
    assert np.linalg.norm(residual) <= 1e-6 * np.linalg.norm(v.T @ y)


def test_lmse_rank_deficiency_error():
    rng = np.random.default_rng(56)
    samples = np.zeros((40, 2))
    samples[:, 0] = rng.normal(0, 1, 40)
    samples[:, 1] = 2.0 * samples[:, 0]  # linearly dependent feature
    labels = rng.random(40) > 0.5
    with pytest.raises(TrainingError, match="feature"):
        fit_lmse(TrainingSet(samples, labels, 0))


def test_lmse_target_scaling_invariance():
    rng = np.random.default_rng(57)
    samples = rng.normal(0, 1, size=(120, 3))
    labels = rng.random(120) > 0.5
    model = fit_lmse(TrainingSet(samples, labels, 0))
    v = np.column_stack([samples, np.ones(120)])
    scaled, *_ = np.linalg.lstsq(v, 3.0 * np.where(labels, 1.0, -1.0), rcond=None)
    np.testing.assert_allclose(scaled, 3.0 * np.r_[model.w, model.w0], atol=1e-9)
    stack = FeatureStack(planes=rng.normal(0, 1, (3, 5, 5)), scales=None)
    base_scores = lmse_score(model, stack)
    scaled_scores = lmse_score(LmseModel(w=scaled[:-1], w0=float(scaled[-1])), stack)
    np.testing.assert_array_equal(base_scores > 0, scaled_scores > 0)


def test_lmse_score_hand_case():
    model = LmseModel(w=np.array([1.0, -2.0]), w0=0.5)
    stack = FeatureStack(planes=np.array([[[2.0]], [[1.0]]]), scales=None)
    assert lmse_score(model, stack)[0, 0] == pytest.approx(0.5)


def test_lmse_score_zero_model():
    model = LmseModel(w=np.zeros(2), w0=0.0)
    stack = FeatureStack(planes=np.ones((2, 3, 3)), scales=None)
    scores = lmse_score(model, stack)
    np.testing.assert_array_equal(scores, np.zeros((3, 3)))
    assert not (scores > 0).any()  # hyperplane ties are non-vessel


def test_lmse_score_dimension_mismatch():
    model = LmseModel(w=np.zeros(3), w0=0.0)
    with pytest.raises(ParameterError):
        lmse_score(model, FeatureStack(planes=np.ones((2, 3, 3)), scales=None))


# ------------------------------------------------------------- persistence


def test_model_round_trip_gmm(tmp_path):
    rng = np.random.default_rng(58)
    ts = two_class_ts(rng, n=800)
    model = fit_gmm(ts, k=2, seed=9)
    path = tmp_path / "model.json"
    save_model(path, model, scales=(2, 3, 4, 6), params=MorletParams(), config={"seed": 9})
    bundle = load_model(path)
    assert bundle.kind == "gmm"
    assert bundle.scales == (2.0, 3.0, 4.0, 6.0)
    assert bundle.params.epsilon == 8.0
    assert bundle.config == {"seed": 9}
    np.testing.assert_array_equal(bundle.model.priors, model.priors)
    for got, want in zip(bundle.model.classes, model.classes):
        np.testing.assert_array_equal(got.weights, want.weights)
        np.testing.assert_array_equal(got.means, want.means)
        np.testing.assert_array_equal(got.covs, want.covs)


def test_model_round_trip_lmse(tmp_path):
    model = LmseModel(w=np.array([0.1, -0.7, 3.14159265358979]), w0=-0.25)
    path = tmp_path / "lmse.json"
    save_model(path, model, scales=(2,), params=MorletParams())
    bundle = load_model(path)
    assert bundle.kind == "lmse"
    np.testing.assert_array_equal(bundle.model.w, model.w)
    assert bundle.model.w0 == model.w0


def test_model_version_mismatch(tmp_path):
    import json

    model = LmseModel(w=np.array([1.0]), w0=0.0)
    path = tmp_path / "m.json"
    save_model(path, model, scales=(2,), params=MorletParams())
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelError, match="version"):
        load_model(path)


def test_model_kind_mismatch(tmp_path):
    import json

    model = LmseModel(w=np.array([1.0]), w0=0.0)
    path = tmp_path / "m.json"
    save_model(path, model, scales=(2,), params=MorletParams())
    doc = json.loads(path.read_text())
    doc["kind"] = "forest"
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelError, match="kind"):
        load_model(path)

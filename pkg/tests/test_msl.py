"""Learning-stage tests: basis fits, scatter oracles, alternating fit."""

import numpy as np
import pytest

import mslkit as mk
from mslkit import (
    InvalidArgumentError,
    LabeledSamples,
    MdaConfig,
    ModeBasis,
    hosvd_fit,
    howsvd_fit,
    howsvd_mda_fit,
    lda_fit,
    mda_fit,
    mode_product,
    mode_spectra,
    project,
    project_all,
    scatter_matrices,
)


def vec_samples(rows, labels, names=None):
    rows = [np.asarray(r, dtype=float) for r in rows]
    names = names or [f"c{i}" for i in range(max(labels))]
    return LabeledSamples(rows, np.asarray(labels), names)


def separated_classes(seed, n_per=12, dim=(6, 5), l_count=4, delta=4.0):
    rng = np.random.default_rng(seed)
    means = delta * rng.standard_normal((l_count,) + dim)
    samples, labels = [], []
    for c in range(l_count):
        for _ in range(n_per):
            samples.append(means[c] + rng.standard_normal(dim))
            labels.append(c + 1)
    return LabeledSamples(samples, np.asarray(labels), [f"c{i}" for i in range(l_count)])


def largest_principal_angle(a, b):
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def partial_project(x, mats, skip):
    for k, w in enumerate(mats):
        if k != skip:
            x = mode_product(x, k, w.T)
    return x


def regularized_ratio(s_b, s_w, w, gamma=1e-6):
    n = s_w.shape[0]
    reg = s_w + gamma * np.trace(s_w) / n * np.eye(n)
    den = float(np.trace(w.T @ reg @ w))
    return float(np.trace(w.T @ s_b @ w)) / den if den > 0 else np.inf


class TestHosvdFit:
    def test_rank_one_data(self):
        t = np.outer([1.0, 2.0, 3.0], [4.0, 5.0])
        s = LabeledSamples([t, t, 2 * t], np.array([1, 1, 2]), ["a", "b"])
        for energy in (0.5, 0.96, 1.0):
            basis = hosvd_fit(s, energy)
            assert basis.output_dims == (1, 1)

    def test_identity_covariance_full_energy(self):
        s = vec_samples([[1.0, 0.0], [0.0, 1.0]], [1, 2])
        basis = hosvd_fit(s, 1.0)
        np.testing.assert_allclose(basis.matrices[0], np.eye(2), atol=1e-12)

    def test_identity_covariance_half_energy(self):
        s = vec_samples([[1.0, 0.0], [0.0, 1.0]], [1, 2])
        basis = hosvd_fit(s, 0.5)
        np.testing.assert_allclose(basis.matrices[0], [[1.0], [0.0]], atol=1e-12)

    def test_orthonormal_columns(self):
        s = separated_classes(0)
        basis = hosvd_fit(s, 0.96)
        assert basis.stage == "hosvd"
        for u in basis.matrices:
            assert np.abs(u.T @ u - np.eye(u.shape[1])).max() <= 1e-8

    def test_needs_two_samples(self):
        one = vec_samples([[1.0, 0.0]], [1])
        with pytest.raises(InvalidArgumentError):
            hosvd_fit(one, 0.96)

    def test_uncentered_by_default(self):
        # all samples equal and nonzero: uncentered covariance is rank 1,
        # centered covariance would be zero and must error
        s = vec_samples([[1.0, 1.0], [1.0, 1.0]], [1, 2])
        basis = hosvd_fit(s, 1.0)
        assert basis.output_dims == (1,)
        with pytest.raises(InvalidArgumentError):
            hosvd_fit(s, 1.0, center=True)


class TestHowsvdFit:
    def test_equals_hosvd_under_identity_covariance(self):
        s = vec_samples([[1.0, 0.0], [0.0, 1.0]], [1, 2])
        np.testing.assert_allclose(
            howsvd_fit(s, 1.0).matrices[0], hosvd_fit(s, 1.0).matrices[0], atol=1e-12
        )

    def test_diag_covariance_example(self):
        # uncentered C = diag(4, 1)
        s = vec_samples([[2.0, 0.0], [0.0, 1.0]], [1, 2])
        basis = howsvd_fit(s, 1.0)
        assert basis.stage == "howsvd"
        np.testing.assert_allclose(basis.matrices[0], np.diag([0.5, 1.0]), atol=1e-12)

    def test_whitened_covariance_is_identity(self):
        s = separated_classes(3)
        basis = howsvd_fit(s, 1.0)
        stacked = mk.stack(s.samples)
        for k, w in enumerate(basis.matrices):
            unf = mk.unfold(stacked, k)
            c = unf @ unf.T
            r = w.shape[1]
            assert np.abs(w.T @ c @ w - np.eye(r)).max() <= 1e-8


class TestProject:
    def test_identity_basis(self):
        x = np.arange(6.0).reshape(2, 3)
        b = ModeBasis("hosvd", [np.eye(2), np.eye(3)])
        np.testing.assert_array_equal(project(x, b), x)

    def test_order_one_is_matvec(self):
        u = np.array([[1.0, 2.0], [0.5, -1.0]]).T
        b = ModeBasis("mda", [u])
        x = np.array([3.0, 4.0])
        np.testing.assert_allclose(project(x, b), u.T @ x, atol=1e-12)

    def test_orthonormal_preserves_norm(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((4, 5))
        qs = [np.linalg.qr(rng.standard_normal((n, n)))[0] for n in (4, 5)]
        b = ModeBasis("hosvd", qs)
        assert np.linalg.norm(project(x, b)) == pytest.approx(
            np.linalg.norm(x), rel=1e-10
        )

    def test_shape_mismatch(self):
        b = ModeBasis("hosvd", [np.eye(2), np.eye(3)])
        with pytest.raises(InvalidArgumentError):
            project(np.ones((3, 3)), b)

    def test_project_all_keeps_labels(self):
        s = separated_classes(4, n_per=3)
        basis = hosvd_fit(s, 0.9)
        out = project_all(s, basis)
        np.testing.assert_array_equal(out.labels, s.labels)
        assert out.shape == basis.output_dims


class TestScatterMatrices:
    def test_hand_example(self):
        # class means 2 and 6, overall 4:
        # S_b = 2*(2-4)^2 + 2*(6-4)^2 = 16; S_w = 1+1+1+1 = 4
        s = vec_samples([[1.0], [3.0], [5.0], [7.0]], [1, 1, 2, 2])
        s_b, s_w = scatter_matrices(s, 0)
        np.testing.assert_array_equal(s_b, [[16.0]])
        np.testing.assert_array_equal(s_w, [[4.0]])

    def test_identical_samples(self):
        s = vec_samples([[2.0, 1.0]] * 4, [1, 1, 2, 2])
        s_b, s_w = scatter_matrices(s, 0)
        np.testing.assert_array_equal(s_b, np.zeros((2, 2)))
        np.testing.assert_array_equal(s_w, np.zeros((2, 2)))

    def test_one_sample_per_class(self):
        rows = [[1.0, 0.0], [3.0, 2.0], [5.0, -2.0]]
        s = vec_samples(rows, [1, 2, 3])
        s_b, s_w = scatter_matrices(s, 0)
        np.testing.assert_array_equal(s_w, np.zeros((2, 2)))
        x = np.asarray(rows)
        d = x - x.mean(axis=0)
        np.testing.assert_allclose(s_b, d.T @ d, atol=1e-12)

    def test_single_class_zero_between(self):
        s = vec_samples([[1.0], [3.0]], [1, 1], names=["only"])
        s_b, s_w = scatter_matrices(s, 0)
        np.testing.assert_array_equal(s_b, [[0.0]])
        np.testing.assert_array_equal(s_w, [[2.0]])

    def test_matrix_mode_oracle(self):
        # brute-force Eqs over unfoldings for order-2 samples
        s = separated_classes(7, n_per=4, dim=(3, 2), l_count=2)
        for mode in (0, 1):
            s_b, s_w = scatter_matrices(s, mode)
            x = np.stack(s.samples)
            overall = x.mean(axis=0)
            eb = np.zeros_like(s_b)
            ew = np.zeros_like(s_w)
            for c in (1, 2):
                grp = x[s.labels == c]
                mu = grp.mean(axis=0)
                d = mk.unfold(mu - overall, mode)
                eb += len(grp) * d @ d.T
                for g in grp:
                    d = mk.unfold(g - mu, mode)
                    ew += d @ d.T
            np.testing.assert_allclose(s_b, eb, atol=1e-10)
            np.testing.assert_allclose(s_w, ew, atol=1e-10)

    def test_rejects_sparse_labels(self):
        s = LabeledSamples(
            [np.ones(2), np.ones(2)], np.array([1, 3]), ["a", "b", "c"]
        )
        with pytest.raises(InvalidArgumentError):
            scatter_matrices(s, 0)


class TestMdaFit:
    def test_order_one_matches_lda(self):
        rng = np.random.default_rng(11)
        rows, labels = [], []
        means = 5.0 * rng.standard_normal((3, 6))
        for c in range(3):
            for _ in range(20):
                rows.append(means[c] + rng.standard_normal(6))
                labels.append(c + 1)
        s = vec_samples(rows, labels)
        basis, report = mda_fit(s, MdaConfig(output_dims=[2]))
        ref = lda_fit(s, out_dim=2)
        assert largest_principal_angle(basis.matrices[0], ref.matrices[0]) <= 1e-6
        assert report.iterations <= 5

    def test_separated_matrix_classes_improve_ratio(self):
        rng = np.random.default_rng(13)
        base = rng.standard_normal((2, 2))
        shift = np.outer([1.0, 0.0], [1.0, 1.0])
        samples, labels = [], []
        for c, mean in enumerate((base, base + 3.0 * shift), start=1):
            for _ in range(10):
                samples.append(mean + 0.1 * rng.standard_normal((2, 2)))
                labels.append(c)
        s = LabeledSamples(samples, np.asarray(labels), ["a", "b"])
        basis, _ = mda_fit(s, MdaConfig(output_dims=[1, 2]))
        z = [partial_project(x, basis.matrices, 0) for x in s.samples]
        s_b, s_w = scatter_matrices(
            LabeledSamples(z, s.labels, s.class_names), 0
        )
        fitted = regularized_ratio(s_b, s_w, basis.matrices[0])
        start = regularized_ratio(s_b, s_w, np.eye(2)[:, :1])
        assert fitted > start

    def test_itr_max_validation(self):
        s = separated_classes(1, n_per=3)
        with pytest.raises(InvalidArgumentError):
            mda_fit(s, MdaConfig(itr_max=0))

    def test_single_pass(self):
        s = separated_classes(2, n_per=3)
        _, report = mda_fit(s, MdaConfig(itr_max=1))
        assert report.iterations == 1
        assert report.final_deltas is None

    def test_needs_two_classes(self):
        s = vec_samples([[1.0, 0.0], [0.0, 1.0]], [1, 1], names=["only"])
        with pytest.raises(InvalidArgumentError):
            mda_fit(s, MdaConfig())

    def test_explicit_dims_respected(self):
        s = separated_classes(5)
        basis, report = mda_fit(s, MdaConfig(output_dims=[3, 2]))
        assert basis.output_dims == (3, 2)
        assert report.output_dims == [3, 2]

    def test_dims_exceeding_input_rejected(self):
        s = separated_classes(6, dim=(4, 3))
        with pytest.raises(InvalidArgumentError):
            mda_fit(s, MdaConfig(output_dims=[5, 2]))

    def test_convergence_bookkeeping(self):
        s = separated_classes(8, n_per=20, dim=(5, 4), l_count=3)
        basis, report = mda_fit(s, MdaConfig())
        assert 1 <= report.iterations <= 5
        if report.converged:
            assert report.iterations >= 2
            for k, delta in enumerate(report.final_deltas):
                bound = report.output_dims[k] * report.input_dims[k] * report.epsilon
                assert delta < bound

    def test_zero_within_scatter(self):
        # noiseless classes: within scatter vanishes, fit must still succeed
        a, b = np.ones((2, 2)), np.full((2, 2), -1.0)
        s = LabeledSamples([a, a, b, b], np.array([1, 1, 2, 2]), ["p", "q"])
        basis, report = mda_fit(s, MdaConfig(output_dims=[1, 1]))
        assert basis.output_dims == (1, 1)
        assert report.objective[-1] == [np.inf, np.inf]

    def test_deterministic(self):
        s = separated_classes(9)
        b1, _ = mda_fit(s, MdaConfig())
        b2, _ = mda_fit(s, MdaConfig())
        for m1, m2 in zip(b1.matrices, b2.matrices):
            assert m1.tobytes() == m2.tobytes()

    def test_objective_beats_identity_truncation(self):
        # operating-regime instances: well-separated classes, truncating dims
        for seed in range(4):
            s = separated_classes(seed, n_per=15, dim=(6, 5), l_count=4)
            basis, report = mda_fit(s, MdaConfig(output_dims=[2, 2]))
            for k in range(2):
                z = [partial_project(x, basis.matrices, k) for x in s.samples]
                s_b, s_w = scatter_matrices(
                    LabeledSamples(z, s.labels, s.class_names), k
                )
                fitted = regularized_ratio(s_b, s_w, basis.matrices[k])
                ident = regularized_ratio(
                    s_b, s_w, np.eye(s.shape[k])[:, : basis.output_dims[k]]
                )
                assert fitted >= ident


class TestHowsvdMda:
    def test_full_energy_rotation_matches_plain_mda(self):
        rng = np.random.default_rng(15)
        q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        train = vec_samples(list(q), [1, 1, 1, 1, 2, 2, 2, 2])
        probes = q + 0.05 * rng.standard_normal((8, 8))

        stage1, stage2, _ = howsvd_mda_fit(train, energy=1.0, config=MdaConfig())
        u = stage1.matrices[0]
        assert u.shape == (8, 8)
        assert np.abs(u.T @ u - np.eye(8)).max() <= 1e-8

        gal1 = mk.Gallery.from_samples(
            project_all(project_all(train, stage1), stage2)
        )
        direct, _ = mda_fit(train, MdaConfig())
        gal2 = mk.Gallery.from_samples(project_all(train, direct))
        for p in probes:
            l1 = mk.predict(project(project(p, stage1), stage2).ravel(), gal1)[0]
            l2 = mk.predict(project(p, direct).ravel(), gal2)[0]
            assert l1 == l2

    def test_single_class_fails_at_stage_two(self):
        s = vec_samples([[1.0, 0.0], [0.0, 1.0]], [1, 1], names=["only"])
        assert hosvd_fit(s, 0.96).stage == "hosvd"
        with pytest.raises(InvalidArgumentError):
            howsvd_mda_fit(s, 0.96)


class TestLdaFit:
    def test_scalar_example(self):
        s = vec_samples([[1.0], [3.0], [5.0], [7.0]], [1, 1, 2, 2])
        basis = lda_fit(s)
        np.testing.assert_allclose(basis.matrices[0], [[1.0]], atol=1e-12)

    def test_separation_axis_recovered(self):
        # balanced +- noise keeps the sample scatters exactly diagonal, so
        # the discriminant direction is e_1 up to solver roundoff
        rows, labels = [], []
        for c, mu in enumerate((np.zeros(2), np.array([20.0, 0.0])), start=1):
            for da in (1.0, -1.0):
                for db in (0.7, -0.7):
                    rows.append(mu + [da, db])
                    labels.append(c)
        basis = lda_fit(vec_samples(rows, labels), out_dim=1)
        v = basis.matrices[0][:, 0]
        angle = np.arccos(min(1.0, abs(v[0]) / np.linalg.norm(v)))
        assert angle <= 1e-3

    def test_identical_means_rejected(self):
        s = vec_samples([[1.0, 0.0], [1.0, 0.0]], [1, 2])
        with pytest.raises(InvalidArgumentError):
            lda_fit(s)

    def test_rejects_matrix_samples(self):
        s = separated_classes(21)
        with pytest.raises(InvalidArgumentError):
            lda_fit(s)

    def test_auto_width_at_most_classes_minus_one(self):
        rng = np.random.default_rng(23)
        rows, labels = [], []
        means = 6.0 * rng.standard_normal((3, 8))
        for c in range(3):
            for _ in range(10):
                rows.append(means[c] + rng.standard_normal(8))
                labels.append(c + 1)
        basis = lda_fit(vec_samples(rows, labels))
        assert basis.output_dims[0] <= 2


class TestScaleBehavior:
    def test_power_of_two_scaling(self):
        s = separated_classes(25, n_per=10, dim=(5, 4), l_count=3)
        scaled = LabeledSamples(
            [4.0 * x for x in s.samples], s.labels, s.class_names
        )
        h1, h2 = hosvd_fit(s, 0.96), hosvd_fit(scaled, 0.96)
        for a, b in zip(h1.matrices, h2.matrices):
            np.testing.assert_array_equal(a, b)
        # eigenvalues scale by 16, so whitened columns shrink by 4
        w1, w2 = howsvd_fit(s, 0.96), howsvd_fit(scaled, 0.96)
        for a, b in zip(w1.matrices, w2.matrices):
            np.testing.assert_array_equal(a, 4.0 * b)

    def test_predictions_scale_invariant(self):
        rng = np.random.default_rng(27)
        s = separated_classes(27, n_per=10, dim=(5, 4), l_count=3)
        probes = [m + rng.standard_normal((5, 4)) for m in s.samples[:9]]

        def predictions(train, scale):
            st1, st2, _ = howsvd_mda_fit(train, 0.96, MdaConfig())
            gal = mk.Gallery.from_samples(
                project_all(project_all(train, st1), st2)
            )
            return [
                mk.predict(project(project(scale * p, st1), st2).ravel(), gal)[0]
                for p in probes
            ]

        scaled = LabeledSamples(
            [4.0 * x for x in s.samples], s.labels, s.class_names
        )
        assert predictions(s, 1.0) == predictions(scaled, 4.0)


class TestModeSpectra:
    def test_centered_flag(self):
        rows = [[1.0, 2.0], [3.0, 2.0], [5.0, 8.0]]
        s = vec_samples(rows, [1, 1, 2])
        x = np.asarray(rows)
        raw = mode_spectra(s)[0]
        np.testing.assert_allclose(
            sum(raw.values), np.trace(x.T @ x), atol=1e-10
        )
        d = x - x.mean(axis=0)
        cen = mode_spectra(s, center=True)[0]
        np.testing.assert_allclose(
            sum(cen.values), np.trace(d.T @ d), atol=1e-10
        )


class TestModeBasis:
    def test_rejects_wide_matrix(self):
        with pytest.raises(InvalidArgumentError):
            ModeBasis("hosvd", [np.ones((2, 3))])

    def test_rejects_unknown_stage(self):
        with pytest.raises(InvalidArgumentError):
            ModeBasis("pca", [np.eye(2)])


class TestLabeledSamples:
    def test_rejects_mixed_shapes(self):
        with pytest.raises(InvalidArgumentError):
            LabeledSamples([np.ones(2), np.ones(3)], np.array([1, 2]), ["a", "b"])

    def test_rejects_label_zero(self):
        with pytest.raises(InvalidArgumentError):
            LabeledSamples([np.ones(2)], np.array([0]), ["a"])

    def test_class_counts(self):
        s = vec_samples([[1.0], [2.0], [3.0]], [1, 2, 2])
        np.testing.assert_array_equal(s.class_counts, [1, 2])

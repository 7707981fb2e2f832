import numpy as np
import pytest

import qapnet


def test_sinkhorn_is_doubly_stochastic():
    rng = np.random.default_rng(0)
    x = qapnet.sinkhorn(rng.uniform(0.1, 1.0, (6, 6)))
    np.testing.assert_allclose(x.sum(axis=0), 1.0, atol=1e-6)
    np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-6)


def test_hungarian_matches_brute_force():
    score = np.array([[1.0, 5.0, 2.0], [4.0, 1.0, 1.0], [2.0, 2.0, 6.0]])
    assert qapnet.hungarian(score) == [1, 0, 2]


def test_kb_and_lawler_objectives_agree():
    rng = np.random.default_rng(1)
    f1, f2 = rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
    k = qapnet.kb_to_lawler(f1, f2)
    perm = [2, 0, 3, 1]
    assert qapnet.lawler_objective(k, perm, 4) == pytest.approx(qapnet.kb_objective(f1, f2, perm), rel=1e-12)


def test_classic_solvers_recover_noise_free_pair():
    p1, p2, truth = qapnet.synthetic_pair(qapnet.SynthConfig(num_sets=1, inliers=6, seed=3))
    k = qapnet.affinity_matrix(p1, p2, sigma2=1e-3)
    assert qapnet.hungarian(qapnet.rrwm(k, 6, 6)) == truth
    assert qapnet.hungarian(qapnet.spectral_match(k, 6, 6)) == truth


def test_synchronize_repairs_one_block():
    rng = np.random.default_rng(2)
    m, n = 4, 5
    perms = [np.eye(n)[rng.permutation(n)] for _ in range(m)]
    exact = {(i, j): perms[i].T @ perms[j] for i in range(m) for j in range(i + 1, m)}
    noisy = dict(exact)
    noisy[(0, 1)] = exact[(0, 1)][[1, 0, 2, 3, 4]]
    fixed, _ = qapnet.synchronize(noisy, m, n)
    assert qapnet.hungarian(fixed[(0, 1)]) == qapnet.hungarian(exact[(0, 1)])


def test_model_train_save_load(tmp_path):
    cfg = qapnet.SynthConfig(num_sets=2, train_per_set=10, test_per_set=5, inliers=5, sigma2=1e-2, seed=4)
    model = qapnet.Model.init("ngm", seed=0)
    losses = model.train_synthetic(cfg, epochs=2)
    assert len(losses) == 2 and all(np.isfinite(losses))
    path = tmp_path / "ngm.ckpt"
    model.save(str(path))
    loaded = qapnet.Model.load(str(path))
    assert loaded.variant == "ngm"
    p1, p2, _ = qapnet.synthetic_pair(cfg)
    np.testing.assert_array_equal(model.predict_points(p1, p2, 1e-2), loaded.predict_points(p1, p2, 1e-2))
    acc = loaded.evaluate_synthetic(cfg)
    assert 0.0 <= acc <= 1.0


def test_hypergraph_variant_predicts_from_points():
    p1, p2, _ = qapnet.synthetic_pair(qapnet.SynthConfig(num_sets=1, inliers=5, outliers=1, seed=5))
    s = qapnet.Model.init("nhgm").predict_points(p1, p2)
    assert s.shape == (5, 6)


def test_parse_qaplib_and_objective():
    a, b = qapnet.parse_qaplib("2\n0 1\n1 0\n\n0 2\n2 0\n")
    assert qapnet.qaplib_objective(a, b, [1, 0]) == 4.0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        qapnet.parse_qaplib("3\n1 2")
    with pytest.raises(ValueError):
        qapnet.SynthConfig(inliers=2)
    with pytest.raises(ValueError):
        qapnet.Model.init("nope")

import numpy as np
import pytest

from phonage.errors import DataError
from phonage.learners import dual_objective, fit_svr, rbf_kernel


def project_box_hyperplane(v, n, C):
    """Exact Euclidean projection onto {0 <= theta <= C, sum(z*theta) = 0}
    with z = +1 on the first n coordinates and -1 on the rest.

    The projection is clip(v - lam*z, 0, C) for the multiplier lam that
    zeroes g(lam) = sum(z * clip); g is piecewise linear and
    nonincreasing, so lam is found exactly by scanning breakpoints.
    """
    va, vs = v[:n], v[n:]
    bps = np.unique(np.concatenate([va - C, va, -vs, C - vs]))
    values = np.clip(va[None, :] - bps[:, None], 0.0, C).sum(axis=1) - np.clip(
        vs[None, :] + bps[:, None], 0.0, C
    ).sum(axis=1)
    if values[0] <= 0.0:
        lam = bps[0]
    elif values[-1] >= 0.0:
        lam = bps[-1]
    else:
        k = int(np.argmax(values <= 0.0))
        lo, hi = bps[k - 1], bps[k]
        glo, ghi = values[k - 1], values[k]
        lam = lo if ghi == glo else lo + glo * (hi - lo) / (glo - ghi)
    return np.clip(np.concatenate([va - lam, vs + lam]), 0.0, C)


def _kkt_gap(theta, grad, n, C):
    """Maximal-violating-pair gap; (gap x movable mass) bounds the
    objective suboptimality of a feasible point."""
    alpha, alpha_star = theta[:n], theta[n:]
    gp, gm = grad[:n], grad[n:]
    crit_p, crit_m = -gp, gm
    up = np.concatenate(
        [np.where(alpha < C, crit_p, -np.inf), np.where(alpha_star > 0, crit_m, -np.inf)]
    )
    low = np.concatenate(
        [np.where(alpha > 0, crit_p, np.inf), np.where(alpha_star < C, crit_m, np.inf)]
    )
    return float(up.max() - low.min())


def qp_oracle(K, y, C, epsilon, gap_tol=1e-11, max_iter=400_000):
    """High-precision dense solve of the epsilon-SVR dual by projected
    gradient with FISTA momentum, stopped on the KKT gap."""
    n = len(y)
    p = np.concatenate([epsilon - y, epsilon + y])
    L = 2.0 * max(np.linalg.eigvalsh(K).max(), 1e-12)
    step = 1.0 / L

    def grad(theta):
        u = K @ (theta[:n] - theta[n:])
        return np.concatenate([u, -u]) + p

    def obj(theta):
        return dual_objective(K, y, epsilon, theta)

    x = np.zeros(2 * n)
    yk = x.copy()
    t = 1.0
    prev = obj(x)
    for it in range(max_iter):
        x_new = project_box_hyperplane(yk - step * grad(yk), n, C)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        yk = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if it % 50 == 0:
            if _kkt_gap(x, grad(x), n, C) <= gap_tol:
                break
            cur = obj(x)
            if cur > prev:  # momentum overshoot: restart
                yk = x.copy()
                t = 1.0
            prev = cur
    return project_box_hyperplane(x, n, C)


def oracle_bias(K, y, C, epsilon, theta):
    """Same bias rule as the fitted model, applied to the oracle duals."""
    n = len(y)
    alpha, alpha_star = theta[:n], theta[n:]
    u = K @ (alpha - alpha_star)
    crit_p = y - u - epsilon
    crit_m = y - u + epsilon
    tol = 1e-8 * C
    free_p = (alpha > tol) & (alpha < C - tol)
    free_m = (alpha_star > tol) & (alpha_star < C - tol)
    if free_p.any() or free_m.any():
        return float(np.concatenate([crit_p[free_p], crit_m[free_m]]).mean())
    up = np.concatenate(
        [np.where(alpha < C - tol, crit_p, -np.inf), np.where(alpha_star > tol, crit_m, -np.inf)]
    )
    low = np.concatenate(
        [np.where(alpha > tol, crit_p, np.inf), np.where(alpha_star < C - tol, crit_m, np.inf)]
    )
    return float((up.max() + low.min()) / 2.0)


def _random_problem(rng):
    n = int(rng.integers(2, 9))
    d = int(rng.integers(1, 4))
    X = rng.normal(size=(n, d))
    y = rng.normal(scale=rng.uniform(0.5, 3.0), size=n)
    C = float(rng.choice([0.5, 1.0, 10.0]))
    epsilon = float(rng.choice([0.01, 0.1, 0.5]))
    gamma = float(rng.choice([1.0 / d, 0.7]))
    return X, y, C, epsilon, gamma


def test_constant_targets_flat_model():
    X = np.array([[0.0], [1.0], [2.0]])
    model = fit_svr(X, np.array([5.0, 5.0, 5.0]), C=1.0, epsilon=0.1)
    assert model.bias == 5.0
    assert model.dual_coef.size == 0
    assert np.allclose(model.predict(X), 5.0)


def test_wide_tube_flat_model():
    X = np.array([[0.0], [1.0]])
    model = fit_svr(X, np.array([-1.0, 1.0]), C=1.0, epsilon=2.0)
    assert model.bias == 0.0
    assert np.allclose(model.predict(X), 0.0)


def test_needs_two_rows():
    with pytest.raises(DataError):
        fit_svr(np.array([[1.0]]), np.array([1.0]))


def test_smo_matches_dense_qp_oracle():
    rng = np.random.default_rng(77)
    for trial in range(50):
        X, y, C, epsilon, gamma = _random_problem(rng)
        n = len(y)
        model = fit_svr(
            X, y, C=C, epsilon=epsilon, gamma=gamma, tol=1e-9, max_iter=200_000,
            keep_diagnostics=True,
        )
        assert model.converged, f"trial {trial}: SMO did not converge"
        K = rbf_kernel(X, X, gamma)

        theta = model.theta
        alpha, alpha_star = theta[:n], theta[n:]
        # box constraints hold exactly
        assert np.all(alpha >= 0.0) and np.all(alpha <= C)
        assert np.all(alpha_star >= 0.0) and np.all(alpha_star <= C)
        # equality constraint within 1e-6
        assert abs((alpha - alpha_star).sum()) <= 1e-6

        theta_oracle = qp_oracle(K, y, C, epsilon)
        f_smo = dual_objective(K, y, epsilon, theta)
        f_oracle = dual_objective(K, y, epsilon, theta_oracle)
        assert f_smo == pytest.approx(f_oracle, abs=1e-6), f"trial {trial}"

        beta_oracle = theta_oracle[:n] - theta_oracle[n:]
        b_oracle = oracle_bias(K, y, C, epsilon, theta_oracle)
        probes = np.vstack([X, rng.normal(size=(5, X.shape[1]))])
        pred_model = model.predict(probes)
        pred_oracle = rbf_kernel(probes, X, gamma) @ beta_oracle + b_oracle
        assert np.allclose(pred_model, pred_oracle, atol=1e-4), f"trial {trial}"


def test_prediction_is_direct_kernel_sum(rng):
    X = rng.normal(size=(20, 2))
    y = np.sin(X[:, 0]) + 0.2 * X[:, 1]
    model = fit_svr(X, y, C=5.0, epsilon=0.05, gamma=0.5)
    probes = rng.normal(size=(7, 2))
    direct = np.array(
        [
            sum(
                c * np.exp(-model.gamma * np.sum((sv - x) ** 2))
                for sv, c in zip(model.support_vectors, model.dual_coef)
            )
            + model.bias
            for x in probes
        ]
    )
    assert np.allclose(model.predict(probes), direct, atol=1e-10)


def test_serialization_round_trip(rng, tmp_path):
    from phonage.learners import load_model, save_model

    X = rng.normal(size=(15, 2))
    y = rng.normal(size=15)
    model = fit_svr(X, y, C=2.0, epsilon=0.1)
    path = tmp_path / "svr.json"
    save_model(model, path)
    back = load_model(path)
    probes = rng.normal(size=(6, 2))
    assert np.allclose(model.predict(probes), back.predict(probes), atol=0)


def test_version_mismatch_rejected(tmp_path, rng):
    import json

    from phonage.learners import load_model, save_model

    X = rng.normal(size=(5, 1))
    model = fit_svr(X, rng.normal(size=5), C=1.0, epsilon=0.2)
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match="version"):
        load_model(path)

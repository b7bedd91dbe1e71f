"""Epsilon-insensitive support vector regression trained by SMO.

Solves the standard dual over the 2n box-constrained coefficients
(alpha, alpha*) with the single equality constraint
sum(alpha - alpha*) = 0, using maximal-violating-pair working-set
selection: the first index is the strongest KKT violator on the "up"
side, the second the extreme point of the "down" side, which maximizes
the prediction-error gap |E_i - E_j| between the pair. Inputs are
expected to be standardized by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

DEFAULT_TOL = 1e-3


def rbf_kernel(A, B, gamma) -> np.ndarray:
    """exp(-gamma * ||a - b||^2), computed from explicit differences.

    The explicit form keeps each pairwise entry bit-identical whether it
    is computed in a batch or alone, which batch-vs-single prediction
    equivalence relies on.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    diff = A[:, None, :] - B[None, :, :]
    return np.exp(-gamma * np.einsum("ijk,ijk->ij", diff, diff))


def dual_objective(K, y, epsilon, theta) -> float:
    """Minimization-form dual value 0.5 b'Kb + eps*sum(theta) - y'b with
    b = alpha - alpha*."""
    n = y.shape[0]
    beta = theta[:n] - theta[n:]
    return float(0.5 * beta @ K @ beta + epsilon * theta.sum() - y @ beta)


@dataclass
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha - alpha* at the support vectors
    bias: float
    gamma: float
    C: float
    epsilon: float
    converged: bool
    n_iter: int
    standardizer: object | None = None
    # Full diagnostics for verification; not serialized.
    theta: np.ndarray | None = field(default=None, repr=False)
    objective: float | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1] if self.support_vectors.size else 0

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DataError(
                f"svr expects {self.support_vectors.shape[1]} features, got {X.shape[1]}"
            )
        k = rbf_kernel(X, self.support_vectors, self.gamma)
        # row-wise reduction keeps each row's sum independent of the batch
        # shape, so batch and single-row predictions agree bitwise
        return (k * self.dual_coef).sum(axis=1) + self.bias

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "C": self.C,
            "epsilon": self.epsilon,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d) -> "SvrModel":
        return cls(
            support_vectors=np.asarray(d["support_vectors"], float).reshape(
                len(d["support_vectors"]), -1
            ),
            dual_coef=np.asarray(d["dual_coef"], float),
            bias=float(d["bias"]),
            gamma=float(d["gamma"]),
            C=float(d["C"]),
            epsilon=float(d["epsilon"]),
            converged=bool(d["converged"]),
            n_iter=int(d["n_iter"]),
        )


def fit_svr(
    X,
    y,
    *,
    C=1.0,
    epsilon=0.1,
    gamma=None,
    tol=DEFAULT_TOL,
    max_iter=None,
    keep_diagnostics=False,
) -> SvrModel:
    """Train epsilon-SVR with an RBF kernel by SMO.

    ``gamma=None`` uses 1/d. Convergence is declared when the maximal
    KKT violation drops to ``tol``; hitting ``max_iter`` first returns
    the current iterate flagged ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be 2-D")
    n, d = X.shape
    if y.shape != (n,):
        raise DataError("y length must match X rows")
    if n < 2:
        raise DataError("svr needs at least two rows")
    if C <= 0 or epsilon < 0:
        raise DataError("C must be positive and epsilon non-negative")
    if gamma is None:
        gamma = 1.0 / d
    if max_iter is None:
        max_iter = max(2000, 60 * n)

    K = rbf_kernel(X, X, gamma)
    diag = np.diagonal(K)

    alpha = np.zeros(n)  # theta[:n]
    alpha_star = np.zeros(n)  # theta[n:]
    u = np.zeros(n)  # K @ (alpha - alpha*)

    it = 0
    converged = False
    while it < max_iter:
        # -zG values per block: crit_p for alpha coords, crit_m for alpha*.
        resid = y - u
        crit_p = resid - epsilon
        crit_m = resid + epsilon
        up_p = np.where(alpha < C, crit_p, -np.inf)
        up_m = np.where(alpha_star > 0, crit_m, -np.inf)
        low_p = np.where(alpha > 0, crit_p, np.inf)
        low_m = np.where(alpha_star < C, crit_m, np.inf)

        i_p = int(np.argmax(up_p))
        i_m = int(np.argmax(up_m))
        if up_p[i_p] >= up_m[i_m]:
            i, m_val, i_in_alpha = i_p, up_p[i_p], True
        else:
            i, m_val, i_in_alpha = i_m, up_m[i_m], False
        j_p = int(np.argmin(low_p))
        j_m = int(np.argmin(low_m))
        if low_p[j_p] <= low_m[j_m]:
            j, M_val, j_in_alpha = j_p, low_p[j_p], True
        else:
            j, M_val, j_in_alpha = j_m, low_m[j_m], False

        if not np.isfinite(m_val) or not np.isfinite(M_val) or m_val - M_val <= tol:
            converged = True
            break

        # Step t >= 0 along the feasible pair direction; moving the "up"
        # coordinate raises beta_i by t and the "down" one lowers beta_j.
        eta = diag[i] + diag[j] - 2.0 * K[i, j]
        t = (m_val - M_val) / max(eta, 1e-12)
        t = min(t, (C - alpha[i]) if i_in_alpha else alpha_star[i])
        t = min(t, alpha[j] if j_in_alpha else (C - alpha_star[j]))
        if t <= 0:  # numerically stuck; surface it as a warning flag
            break
        if i_in_alpha:
            alpha[i] = min(alpha[i] + t, C)
        else:
            alpha_star[i] = max(alpha_star[i] - t, 0.0)
        if j_in_alpha:
            alpha[j] = max(alpha[j] - t, 0.0)
        else:
            alpha_star[j] = min(alpha_star[j] + t, C)
        u += t * (K[i] - K[j])
        it += 1

    resid = y - u
    crit_p = resid - epsilon
    crit_m = resid + epsilon
    free_p = (alpha > 0) & (alpha < C)
    free_m = (alpha_star > 0) & (alpha_star < C)
    if free_p.any() or free_m.any():
        bias = float(
            np.concatenate([crit_p[free_p], crit_m[free_m]]).mean()
        )
    else:
        up = np.concatenate(
            [np.where(alpha < C, crit_p, -np.inf), np.where(alpha_star > 0, crit_m, -np.inf)]
        )
        low = np.concatenate(
            [np.where(alpha > 0, crit_p, np.inf), np.where(alpha_star < C, crit_m, np.inf)]
        )
        hi = up.max()
        lo = low.min()
        if not np.isfinite(hi):
            hi = lo
        if not np.isfinite(lo):
            lo = hi
        bias = float((hi + lo) / 2.0)

    beta = alpha - alpha_star
    sv = np.abs(beta) > 0
    theta = np.concatenate([alpha, alpha_star])
    model = SvrModel(
        support_vectors=X[sv].copy(),
        dual_coef=beta[sv].copy(),
        bias=bias,
        gamma=float(gamma),
        C=float(C),
        epsilon=float(epsilon),
        converged=converged,
        n_iter=it,
    )
    if keep_diagnostics:
        model.theta = theta
        model.objective = dual_objective(K, y, epsilon, theta)
    return model

"""L2-regularized logistic regression, implemented from scratch.

The pinned convention: minimize  0.5*||w||^2 + C * sum_i log(1 + exp(-y_i * (w.x_i + b)))
with labels y in {-1, +1} and an unregularized intercept. The production
solver is a limited-memory quasi-Newton method with Armijo backtracking (so
the objective decreases monotonically); an independent damped Newton (IRLS)
solver doubles as a correctness oracle. No external optimizer is involved on
either route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineError


class SingleClass(PipelineError):
    """Training data holds only one class; the model is undefined."""


class NonFinite(PipelineError):
    """Training data or solver state contains NaN or infinity."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def _check_training_data(X: np.ndarray, y01: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y01 = np.asarray(y01, dtype=float)
    if X.ndim != 2 or y01.ndim != 1 or X.shape[0] != y01.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y01.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y01))):
        raise NonFinite("training data contains non-finite values")
    classes = np.unique(y01)
    if not np.array_equal(classes, [0.0, 1.0]):
        if classes.size == 1:
            raise SingleClass("training data contains a single class")
        raise ValueError(f"labels must be 0/1, got {classes}")
    return X, y01


def lr_objective(params: np.ndarray, X: np.ndarray, y_pm: np.ndarray, C: float) -> tuple[float, np.ndarray]:
    """Objective value and analytic gradient at ``params`` = [w..., b]."""
    w = params[:-1]
    b = params[-1]
    margins = y_pm * (X @ w + b)
    value = 0.5 * float(w @ w) + C * float(np.logaddexp(0.0, -margins).sum())
    # d/dm log(1+exp(-m)) = -sigmoid(-m)
    coeff = -y_pm * sigmoid(-margins)
    grad = np.empty_like(params)
    grad[:-1] = w + C * (X.T @ coeff)
    grad[-1] = C * float(coeff.sum())
    return value, grad


@dataclass(frozen=True)
class LrFit:
    weights: np.ndarray
    intercept: float
    converged: bool
    n_iter: int
    grad_max_norm: float
    objective_history: tuple[float, ...]


def train_lr(
    X: np.ndarray,
    y01: np.ndarray,
    C: float = 3.0,
    max_iter: int = 500,
    tol: float = 1e-6,
    memory: int = 10,
) -> LrFit:
    """Fit the regularized model; converged means grad max-norm <= tol.

    Limited-memory quasi-Newton with two-loop recursion and Armijo
    backtracking from a unit step; every accepted iterate strictly decreases
    the objective.
    """
    X, y01 = _check_training_data(X, y01)
    y_pm = 2.0 * y01 - 1.0
    params = np.zeros(X.shape[1] + 1)
    value, grad = lr_objective(params, X, y_pm, C)
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    history = [value]
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        if float(np.max(np.abs(grad))) <= tol:
            n_iter -= 1
            break

        direction = -_two_loop(grad, pairs)
        descent = float(grad @ direction)
        if descent >= 0.0:  # curvature info went stale; fall back to steepest descent
            direction = -grad
            descent = -float(grad @ grad)

        step = 1.0
        accepted = False
        for _ in range(60):
            candidate = params + step * direction
            new_value, new_grad = lr_objective(candidate, X, y_pm, C)
            if np.isfinite(new_value) and new_value <= value + 1e-4 * step * descent:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

        s = candidate - params
        y_vec = new_grad - grad
        curvature = float(s @ y_vec)
        if curvature > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y_vec)):
            pairs.append((s, y_vec))
            if len(pairs) > memory:
                pairs.pop(0)
        params, value, grad = candidate, new_value, new_grad
        history.append(value)

    grad_max = float(np.max(np.abs(grad)))
    return LrFit(
        weights=params[:-1].copy(),
        intercept=float(params[-1]),
        converged=grad_max <= tol,
        n_iter=n_iter,
        grad_max_norm=grad_max,
        objective_history=tuple(history),
    )


def _two_loop(grad: np.ndarray, pairs: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Two-loop recursion: apply the implicit inverse-Hessian estimate to grad."""
    q = grad.copy()
    if not pairs:
        return q
    alphas = []
    rhos = [1.0 / float(s @ y) for s, y in pairs]
    for (s, y), rho in zip(reversed(pairs), reversed(rhos)):
        alpha = rho * float(s @ q)
        alphas.append(alpha)
        q -= alpha * y
    s_last, y_last = pairs[-1]
    q *= float(s_last @ y_last) / float(y_last @ y_last)
    for (s, y), rho, alpha in zip(pairs, rhos, reversed(alphas)):
        beta = rho * float(y @ q)
        q += (alpha - beta) * s
    return q


def irls_fit(
    X: np.ndarray,
    y01: np.ndarray,
    C: float = 3.0,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Independent damped-Newton (IRLS) solver for the same objective.

    Used as a correctness oracle for :func:`train_lr`; solves the full Newton
    system each step and halves the step while the objective fails to improve.
    """
    X, y01 = _check_training_data(X, y01)
    y_pm = 2.0 * y01 - 1.0
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    reg = np.diag([1.0] * d + [0.0])
    params = np.zeros(d + 1)
    value, grad = lr_objective(params, X, y_pm, C)
    for _ in range(max_iter):
        if float(np.max(np.abs(grad))) <= tol:
            break
        z = A @ params
        p = sigmoid(z)
        weights = np.clip(p * (1.0 - p), 1e-12, None)
        hessian = C * (A.T * weights) @ A + reg
        delta = np.linalg.solve(hessian, grad)
        step = 1.0
        for _ in range(50):
            candidate = params - step * delta
            new_value, new_grad = lr_objective(candidate, X, y_pm, C)
            if np.isfinite(new_value) and new_value <= value:
                break
            step *= 0.5
        params, value, grad = candidate, new_value, new_grad
    return params[:-1].copy(), float(params[-1])


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-column standardization parameters (population variance)."""

    means: np.ndarray
    stds: np.ndarray
    degenerate: tuple[int, ...]  # columns whose std was 0 and got forced to 1


def fit_scaler(X: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise ValueError("cannot fit a scaler on empty data")
    means = X.mean(axis=0)
    stds = X.std(axis=0)  # population variance, ddof=0
    degenerate = tuple(int(i) for i in np.flatnonzero(stds == 0.0))
    stds = np.where(stds == 0.0, 1.0, stds)
    return Scaler(means=means, stds=stds, degenerate=degenerate)


def apply_scaler(X: np.ndarray, scaler: Scaler) -> np.ndarray:
    return (np.asarray(X, dtype=float) - scaler.means) / scaler.stds

"""Kalman motion models, prediction/update and the Gaussian pairing cost.

Two linear models share one code path:

* constant acceleration, state ``(x, vx, ax, y, vy, ay)``
* constant velocity, state ``(x, vx, y, vy)`` (the baseline)

All quantities are in internal units (µm, s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Localization, TrackerConfig, accel_to_internal

LOG_2PI = math.log(2.0 * math.pi)
COST_MIN, COST_MAX = 1e-300, 1e300
MAX_CONDITION = 1e12


class DegenerateCovarianceError(ArithmeticError):
    """Innovation covariance is singular or too ill-conditioned to invert."""


class Motion(str, Enum):
    accel = "accel"
    const_vel = "const_vel"


@dataclass(frozen=True)
class KalmanState:
    s: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))


@dataclass(frozen=True, eq=False)
class MotionModel:
    motion: Motion
    dt: float
    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    sigma_a: float
    r_std: float

    @property
    def dim(self) -> int:
        return self.F.shape[0]

    @property
    def block(self) -> int:
        """Per-axis block size: 3 for constant acceleration, 2 for constant velocity."""
        return self.dim // 2

    @property
    def pos_idx(self) -> tuple[int, int]:
        return (0, self.block)

    @property
    def vel_idx(self) -> tuple[int, int]:
        return (1, self.block + 1)

    @property
    def acc_idx(self) -> tuple[int, int] | None:
        return (2, 5) if self.block == 3 else None


def _kinematic_blocks(dt: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis transition block and noise gain vector for a polynomial model."""
    if order == 3:
        F = np.array([[1.0, dt, 0.5 * dt * dt],
                      [0.0, 1.0, dt],
                      [0.0, 0.0, 1.0]])
        g = np.array([0.5 * dt * dt, dt, 1.0])
    else:
        F = np.array([[1.0, dt],
                      [0.0, 1.0]])
        g = np.array([0.5 * dt * dt, dt])
    return F, g


def make_model(dt: float, sigma_a: float, r_std: float, motion: Motion = Motion.accel) -> MotionModel:
    """Build a 2D motion model. ``sigma_a`` in µm/s², ``r_std`` in µm.

    For constant acceleration, Q = g gᵀ σ_a² with g = (dt²/2, dt, 1) per axis,
    i.e. the acceleration performs a random walk. The constant-velocity model
    drops the acceleration entry of g (discrete white-noise acceleration).
    """
    motion = Motion(motion)
    order = 3 if motion is Motion.accel else 2
    Fb, g = _kinematic_blocks(dt, order)
    Z = np.zeros_like(Fb)
    F = np.block([[Fb, Z], [Z, Fb]])
    Qb = np.outer(g, g) * sigma_a ** 2
    Q = np.block([[Qb, Z], [Z, Qb]])
    H = np.zeros((2, 2 * order))
    H[0, 0] = H[1, order] = 1.0
    R = np.eye(2) * r_std ** 2
    return MotionModel(motion, dt, F, Q, H, R, sigma_a, r_std)


def model_from_config(cfg: TrackerConfig, dt: float, motion: Motion = Motion.accel) -> MotionModel:
    return make_model(dt, accel_to_internal(cfg.sigma_a), cfg.r_std, motion)


def initial_covariance(model: MotionModel, v_max: float) -> np.ndarray:
    """Weakly informative prior for a new track; ``v_max`` in µm/s."""
    block = [model.r_std ** 2, (v_max / 3.0) ** 2, model.sigma_a ** 2][: model.block]
    return np.diag(block * 2)


def predict(state: KalmanState, model: MotionModel) -> KalmanState:
    F = model.F
    return KalmanState(F @ state.s, F @ state.P @ F.T + model.Q)


def innovation(predicted: KalmanState, model: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    """Predicted measurement mean and covariance."""
    H = model.H
    mu = H @ predicted.s
    sigma = H @ predicted.P @ H.T + model.R
    return mu, 0.5 * (sigma + sigma.T)


def _check_condition(sigma: np.ndarray) -> None:
    if not np.all(np.isfinite(sigma)) or np.linalg.cond(sigma) > MAX_CONDITION:
        raise DegenerateCovarianceError("innovation covariance is degenerate")


def log_likelihood(predicted: KalmanState, model: MotionModel, z) -> float:
    mu, sigma = innovation(predicted, model)
    _check_condition(sigma)
    d = _as_xy(z) - mu
    sign, logdet = np.linalg.slogdet(sigma)
    maha2 = float(d @ np.linalg.solve(sigma, d))
    return -LOG_2PI - 0.5 * logdet - 0.5 * maha2


def pair_cost(predicted: KalmanState, model: MotionModel, z) -> float:
    """Inverse Gaussian likelihood of observing ``z`` given the prediction."""
    return clamp_cost(math.exp(min(-log_likelihood(predicted, model, z), 700.0)))


def clamp_cost(c):
    return np.clip(c, COST_MIN, COST_MAX) if isinstance(c, np.ndarray) else min(max(c, COST_MIN), COST_MAX)


def update(predicted: KalmanState, model: MotionModel, z) -> KalmanState:
    H, R = model.H, model.R
    mu, sigma = innovation(predicted, model)
    _check_condition(sigma)
    PHt = predicted.P @ H.T
    K = np.linalg.solve(sigma, PHt.T).T
    s = predicted.s + K @ (_as_xy(z) - mu)
    A = np.eye(model.dim) - K @ H
    P = A @ predicted.P @ A.T + K @ R @ K.T
    return KalmanState(s, 0.5 * (P + P.T))


def _as_xy(z) -> np.ndarray:
    if isinstance(z, Localization):
        return np.array([z.x, z.y])
    return np.asarray(z, dtype=float).reshape(2)


# ----------------------------------------------------------- batched helpers
# The tracker evaluates every live track against every gated detection each
# frame; these vectorised forms keep that loop cheap.

def predict_many(S: np.ndarray, P: np.ndarray, model: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    F = model.F
    return S @ F.T, np.einsum("ij,njk,lk->nil", F, P, F) + model.Q


def log_likelihood_matrix(S: np.ndarray, P: np.ndarray, model: MotionModel,
                          Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log-likelihood of every detection under every predicted track.

    Returns ``(loglik (n, m), logdet (n,))``.
    """
    ix, iy = model.pos_idx
    mu = S[:, [ix, iy]]
    sxx = P[:, ix, ix] + model.R[0, 0]
    syy = P[:, iy, iy] + model.R[1, 1]
    sxy = 0.5 * (P[:, ix, iy] + P[:, iy, ix]) + model.R[0, 1]
    det = sxx * syy - sxy * sxy
    tr = sxx + syy
    disc = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy ** 2, 0.0))
    lmax, lmin = 0.5 * tr + disc, 0.5 * tr - disc
    if np.any(~np.isfinite(det)) or np.any(lmin <= 0) or np.any(lmax > MAX_CONDITION * lmin):
        raise DegenerateCovarianceError("innovation covariance is degenerate")
    dx = Z[None, :, 0] - mu[:, 0, None]
    dy = Z[None, :, 1] - mu[:, 1, None]
    maha2 = (syy[:, None] * dx * dx - 2 * sxy[:, None] * dx * dy + sxx[:, None] * dy * dy) / det[:, None]
    logdet = np.log(det)
    return -LOG_2PI - 0.5 * logdet[:, None] - 0.5 * maha2, logdet


def cost_at_mahalanobis(logdet, d: float):
    """Pairing cost of a detection at Mahalanobis distance ``d``."""
    return clamp_cost(np.exp(np.minimum(LOG_2PI + 0.5 * np.asarray(logdet) + 0.5 * d * d, 700.0)))


def update_many(S: np.ndarray, P: np.ndarray, model: MotionModel,
                Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Joseph-form measurement update of ``n`` predicted states with ``n`` detections."""
    H, R = model.H, model.R
    sigma = np.einsum("ij,njk,lk->nil", H, P, H) + R
    sigma = 0.5 * (sigma + np.swapaxes(sigma, 1, 2))
    PHt = P @ H.T
    K = np.swapaxes(np.linalg.solve(sigma, np.swapaxes(PHt, 1, 2)), 1, 2)
    innov = Z - S @ H.T
    S_new = S + np.einsum("nij,nj->ni", K, innov)
    A = np.eye(model.dim)[None] - K @ H
    P_new = A @ P @ np.swapaxes(A, 1, 2) + K @ R @ np.swapaxes(K, 1, 2)
    return S_new, 0.5 * (P_new + np.swapaxes(P_new, 1, 2))

"""Entry estimates and certified radii for arriving agents.

Every outcome initializes the arrival with zero counts and radius equal to
its certificate on all arms.  Certificates are clamped to 1 because rewards
are normalized and a larger radius carries no information.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidParameterError, InvalidWeightsError, ModelMismatchError
from .rewards import LogisticLink

MODES = ("pretrained", "linear", "nonlinear", "cluster", "zero_knowledge")


@dataclass(frozen=True, eq=False)
class TransferOutcome:
    estimates: np.ndarray
    certificate: float
    mode_used: str

    @property
    def K(self) -> int:
        return self.estimates.size

    @property
    def counts_init(self) -> np.ndarray:
        return np.zeros(self.K, dtype=np.int64)

    @property
    def radii_init(self) -> np.ndarray:
        return np.full(self.K, self.certificate)


def zero_knowledge_init(K: int) -> TransferOutcome:
    if int(K) != K or K < 1:
        raise InvalidParameterError(f"K must be a positive integer, got {K!r}")
    return TransferOutcome(np.zeros(int(K)), 1.0, "zero_knowledge")


def pretrained_init(entry_estimates, declared_radius: float) -> TransferOutcome:
    if not np.isfinite(declared_radius) or declared_radius < 0:
        raise InvalidParameterError(f"declared radius must be finite and >= 0, got {declared_radius!r}")
    # means live in [0,1], so projecting the estimates there never adds error
    est = np.clip(np.array(entry_estimates, dtype=float), 0.0, 1.0)
    return TransferOutcome(est, min(1.0, float(declared_radius)), "pretrained")


def _weights(J: int, weights) -> np.ndarray:
    if weights is None:
        return np.full(J, 1.0 / J)
    w = np.asarray(weights, dtype=float)
    if w.shape != (J,):
        raise InvalidWeightsError(f"expected {J} weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidWeightsError(f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})")
    return w


def _neighbors(neighbor_params):
    """Accept ``(thetas[J,K,d], certs[J])`` or a list of ``(theta[K,d], cert)`` pairs."""
    if isinstance(neighbor_params, tuple) and len(neighbor_params) == 2 and isinstance(neighbor_params[0], np.ndarray) \
            and neighbor_params[0].ndim == 3:
        thetas, certs = neighbor_params
        return thetas, np.asarray(certs, dtype=float)
    if len(neighbor_params) == 0:
        return None, None
    thetas = np.stack([np.asarray(th, dtype=float) for th, _ in neighbor_params])
    certs = np.array([c for _, c in neighbor_params], dtype=float)
    return thetas, certs


def _features(agent) -> np.ndarray:
    x = getattr(agent, "features", agent)
    if x is None:
        raise ModelMismatchError(f"agent {getattr(agent, 'id', '?')} has no features")
    return np.asarray(x, dtype=float)


def _pooled(neighbor_params, weights):
    thetas, certs = _neighbors(neighbor_params)
    if thetas is None or thetas.shape[0] == 0:
        return None, None
    w = _weights(thetas.shape[0], weights)
    return np.tensordot(w, thetas, axes=1), float(w @ certs)


def _no_neighbors(agent, K) -> TransferOutcome:
    K = K if K is not None else getattr(agent, "K", None)
    if K is None:
        raise InvalidParameterError("no neighbors: pass K for the zero-knowledge fallback")
    return zero_knowledge_init(K)


def linear_param_transfer(agent, neighbor_params, weights=None, K: Optional[int] = None) -> TransferOutcome:
    """Weighted average of neighbor parameters; ``mu_hat = x . theta_hat``.

    A neighbor certificate bounds ``||theta_hat_j,i - theta_i||`` on every
    arm, so with ``||x|| <= 1`` the weighted certificate bounds the mean error.
    Estimates are clipped to [0, 1], which keeps the certificate cap of 1 sound.
    Without neighbors the arrival gets zero knowledge over ``K`` arms (taken
    from the agent profile when not given).
    """
    x = _features(agent)
    theta, bound = _pooled(neighbor_params, weights)
    if theta is None:
        return _no_neighbors(agent, K)
    return TransferOutcome(np.clip(theta @ x, 0.0, 1.0), min(1.0, bound), "linear")


def nonlinear_param_transfer(agent, neighbor_params, weights=None, lipschitz=None, links=None,
                             K: Optional[int] = None) -> TransferOutcome:
    x = _features(agent)
    theta, bound = _pooled(neighbor_params, weights)
    if theta is None:
        return _no_neighbors(agent, K)
    K = theta.shape[0]
    if links is None:
        links = LogisticLink()
    if not isinstance(links, (list, tuple)):
        links = [links] * K
    L = np.array([f.lipschitz for f in links]) if lipschitz is None else np.broadcast_to(np.asarray(lipschitz, float), (K,))
    est = np.array([f(x, th) for f, th in zip(links, theta)])
    return TransferOutcome(est, min(1.0, float(L.max()) * bound), "nonlinear")


class ClusterStats:
    """Pooled arm observations per cluster, including those of departed agents."""

    def __init__(self, C: int, K: int):
        self.C, self.K = int(C), int(K)
        self.counts = np.zeros((self.C, self.K), dtype=np.int64)
        self.sums = np.zeros((self.C, self.K))

    def update(self, labels: np.ndarray, arm: int, rewards: np.ndarray) -> None:
        self.counts[:, arm] += np.bincount(labels, minlength=self.C)
        self.sums[:, arm] += np.bincount(labels, weights=rewards, minlength=self.C)

    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)

    def radius(self, sigma: float, delta: float, T: int) -> np.ndarray:
        return cluster_radius(self.counts, sigma, delta, T, self.C, self.K)


def cluster_radius(counts, sigma: float, delta: float, T: int, C: int, K: int) -> np.ndarray:
    if not 0 < delta < 1 or sigma <= 0 or T < 1:
        raise InvalidParameterError("cluster radius needs sigma > 0, delta in (0,1), T >= 1")
    n = np.maximum(1, np.asarray(counts, dtype=float))
    return sigma * np.sqrt(2.0 * math.log(2.0 * K * C * T / delta) / n)


def cluster_inherit(agent, stats: ClusterStats, sigma: float, delta: float, T: int,
                    C: Optional[int] = None, K: Optional[int] = None) -> TransferOutcome:
    c = getattr(agent, "cluster", agent)
    if c is None:
        raise ModelMismatchError(f"agent {getattr(agent, 'id', '?')} has no cluster label")
    C = stats.C if C is None else C
    K = stats.K if K is None else K
    if not 0 < delta < 1 or sigma <= 0 or T < 1:
        raise InvalidParameterError("cluster radius needs sigma > 0, delta in (0,1), T >= 1")
    n = stats.counts[c].tolist()
    if not any(n):
        return zero_knowledge_init(K)
    sums = stats.sums[c].tolist()
    scale = 2.0 * math.log(2.0 * K * C * T / delta)
    # unobserved arms fall back to estimate 0 with radius 1
    est = [min(1.0, max(0.0, s / k)) if k else 0.0 for s, k in zip(sums, n)]
    rad = max(sigma * math.sqrt(scale / k) if k else 1.0 for k in n)
    return TransferOutcome(np.array(est), min(1.0, rad), "cluster")


def pretraining_error(outcome, true_means) -> tuple:
    """(P_m, D_m) with D_m = inf when P_m = 0."""
    est = outcome.estimates if isinstance(outcome, TransferOutcome) else np.asarray(outcome, dtype=float)
    mu = np.asarray(true_means, dtype=float)
    if est.shape != mu.shape:
        raise InvalidParameterError(f"length mismatch: {est.shape} vs {mu.shape}")
    P = float(np.max(np.abs(est - mu)))
    return P, (math.inf if P == 0 else 1.0 / P)


def round_pretraining_error(P_batch: Sequence[float]) -> tuple:
    """(P_t, D_t) for one arrival batch; (0, inf) when the batch is empty."""
    P = max(P_batch, default=0.0)
    return P, (math.inf if P == 0 else 1.0 / P)


def beta_T(sigma: float, d: int, K: int, T: int, delta: float, lam: float, S: float) -> float:
    return sigma * math.sqrt(d * math.log(K * T / delta)) + math.sqrt(lam) * S


def linear_neighbor_radius(n_eff, sigma: float, d: int, K: int, T: int, delta: float,
                           lam: float = 1.0, S: float = 1.0, kappa: float = 1.0):
    """Parameter-error radius r = beta_T / sqrt(lam + kappa * N_eff)."""
    return beta_T(sigma, d, K, T, delta, lam, S) / np.sqrt(lam + kappa * np.asarray(n_eff, dtype=float))

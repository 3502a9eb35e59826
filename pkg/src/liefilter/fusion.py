"""Bayesian fusion of a concentrated Gaussian prior with one observation.

Three routes are provided:

* :func:`gaussian_update_general` evaluates the full Gaussian-filter update on
  chart coordinates by joint cubature over state and observation noise, for
  observations living either in Euclidean space or in a second group;
* :func:`fuse_euclidean` is the closed-form specialization for vector
  observations, built from numerical right Lie derivatives of the observation
  map and carrying a second-order innovation correction;
* :func:`fuse_group` is the closed-form specialization for full-state group
  observations.

Both closed forms end with an optional mean/covariance correction that moves
the chart posterior to the group-theoretic posterior; disabling it
(``modified=False``) reproduces the plain Kalman projection, which is the
baseline the experiment harness compares against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distribution import (
    ConcentratedGaussian,
    ExpectationConfig,
    expectation_nodes,
    fit_mean_covariance,
    project_psd,
    symmetrize,
)
from .errors import InnovationSingularError
from .groups import MatrixLieGroup, lie_derivative_right, lie_derivative_right_second

_COND_LIMIT = 1e12


@dataclass
class ObservationModelEuclidean:
    """Vector observation z = k(g) + r with r ~ N(0, noise_cov)."""

    func: Callable[[np.ndarray], np.ndarray]
    noise_cov: np.ndarray


@dataclass
class ObservationModelGroup:
    """Group observation g_z = k(g) exp(r) with r ~ N(0, noise_cov) on the
    target algebra; ``func=None`` means the identity map (full-state
    observation on the same group)."""

    group: MatrixLieGroup
    noise_cov: np.ndarray
    func: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass
class PosteriorCoordinates:
    """Chart-coordinate posterior together with the update intermediates."""

    m: np.ndarray                 # posterior chart mean
    cov: np.ndarray               # posterior chart covariance
    predicted: np.ndarray         # predicted observation coordinates
    innovation_cov: np.ndarray    # S
    cross_cov: np.ndarray         # C
    gain: np.ndarray              # K = C S^-1


def _solve_gain(S: np.ndarray, C: np.ndarray) -> np.ndarray:
    S = symmetrize(S)
    if np.linalg.cond(S) > _COND_LIMIT:
        raise InnovationSingularError(
            f"innovation covariance condition number exceeds {_COND_LIMIT:.0e}")
    return np.linalg.solve(S, C.T).T


def gaussian_update_general(group: MatrixLieGroup,
                            prior: ConcentratedGaussian,
                            obs: ObservationModelEuclidean | ObservationModelGroup,
                            observation,
                            cfg: ExpectationConfig | None = None
                            ) -> PosteriorCoordinates:
    """Gaussian-filter update on chart coordinates by joint cubature.

    Expectations run over the product Gaussian N(x|0, P) N(r|0, R) in
    dimension N+M; the observation map must broadcast over stacked group
    elements.
    """
    cfg = cfg or ExpectationConfig()
    P = symmetrize(np.asarray(prior.cov, float))
    R = symmetrize(np.asarray(obs.noise_cov, float))
    n, m_dim = P.shape[0], R.shape[0]
    joint = np.zeros((n + m_dim, n + m_dim))
    joint[:n, :n] = P
    joint[n:, n:] = R
    nodes = expectation_nodes(np.zeros(n + m_dim), joint, cfg)
    xs, rs = nodes[:, :n], nodes[:, n:]
    mu = np.asarray(prior.mean, float)

    if isinstance(obs, ObservationModelGroup):
        target = obs.group
        k = obs.func if obs.func is not None else (lambda g: g)
        k_mu = np.asarray(k(mu), float)
        k_mu_inv = np.linalg.inv(k_mu)
        zs = target.log(k_mu_inv @ np.asarray(k(mu @ group.exp(xs)), float)
                        @ target.exp(rs))
        innovation = target.log(k_mu_inv @ np.asarray(observation, float))
    else:
        k_mu = np.asarray(obs.func(mu), float)
        zs = np.asarray(obs.func(mu @ group.exp(xs)), float) - k_mu + rs
        innovation = np.asarray(observation, float) - k_mu

    predicted = zs.mean(axis=0)
    centered = zs - predicted
    S = np.einsum("ki,kj->ij", centered, centered) / len(zs)
    C = np.einsum("ki,kj->ij", xs, centered) / len(zs)
    K = _solve_gain(S, C)
    m = K @ (innovation - predicted)
    cov = project_psd(P - K @ S @ K.T)
    return PosteriorCoordinates(m, cov, predicted, S, C, K)


def correct_to_group(group: MatrixLieGroup, post: PosteriorCoordinates,
                     mu: np.ndarray, cfg: ExpectationConfig | None = None
                     ) -> ConcentratedGaussian:
    """Project a chart posterior to group mean and covariance."""
    return fit_mean_covariance(group, post.m, post.cov, mu, cfg)


def _modification(group: MatrixLieGroup, m: np.ndarray, cov: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form correction m' = (I - (1/12) cov_ij ad_i ad_j) m and the
    matching covariance adjustment sym((1/2) cov_ij ad_i m' e_j^T)."""
    dim = group.dim
    ad_basis = np.stack([group.ad(np.eye(dim)[i]) for i in range(dim)])
    quad = np.einsum("ij,iab,jbc->ac", cov, ad_basis, ad_basis)
    m_prime = (np.eye(dim) - quad / 12.0) @ m
    adm = np.einsum("iab,b->ia", ad_basis, m_prime)        # row i = ad_i m'
    bump = 0.5 * np.einsum("ij,ia->aj", cov, adm)
    return m_prime, cov + bump + bump.T


def fuse_euclidean(group: MatrixLieGroup, prior: ConcentratedGaussian,
                   obs: ObservationModelEuclidean, z: np.ndarray,
                   modified: bool = True, step: float = 1e-5
                   ) -> ConcentratedGaussian:
    """Closed-form update for a vector observation.

    The observation map is linearized through right Lie derivatives at the
    prior mean; the innovation carries the second-order curvature term
    (1/2) P_ij (E_i^r E_j^r k), which is kept in both the modified and the
    plain variant.  Terms quadratic in the prior covariance are dropped.
    """
    mu = np.asarray(prior.mean, float)
    P = symmetrize(np.asarray(prior.cov, float))
    R = symmetrize(np.asarray(obs.noise_cov, float))
    z = np.asarray(z, float)
    dim = group.dim

    slopes = np.stack([lie_derivative_right(group, obs.func, mu, i, step)
                       for i in range(dim)], axis=1)       # (M, N)
    S = slopes @ P @ slopes.T + R
    C = P @ slopes.T
    K = _solve_gain(S, C)

    bend = np.zeros(z.shape)
    for i in range(dim):
        for j in range(dim):
            bend = bend + P[i, j] * lie_derivative_right_second(
                group, obs.func, mu, i, j, step)
    m = K @ (z - np.asarray(obs.func(mu), float) - 0.5 * bend)
    cov = project_psd(P - K @ S @ K.T)

    if modified:
        m_prime, cov_m = _modification(group, m, cov)
    else:
        m_prime, cov_m = m, cov
    return ConcentratedGaussian(mu @ group.exp(m_prime), project_psd(cov_m))


def fuse_group(group: MatrixLieGroup, prior: ConcentratedGaussian,
               obs: ObservationModelGroup, g_z: np.ndarray,
               modified: bool = True) -> ConcentratedGaussian:
    """Closed-form update for a full-state observation on the same group."""
    mu = np.asarray(prior.mean, float)
    P = symmetrize(np.asarray(prior.cov, float))
    R = symmetrize(np.asarray(obs.noise_cov, float))
    y = group.log(np.linalg.inv(mu) @ np.asarray(g_z, float))
    gain = np.linalg.solve((P + R).T, P.T).T               # P (P+R)^-1
    m = gain @ y
    cov = project_psd(P - gain @ P)
    if modified:
        m_prime, cov_m = _modification(group, m, cov)
    else:
        m_prime, cov_m = m, cov
    return ConcentratedGaussian(mu @ group.exp(m_prime), project_psd(cov_m))


def cost_c1(group: MatrixLieGroup, truths: np.ndarray,
            estimates: np.ndarray) -> float:
    """Squared norm of the mean chart error over (truth, estimate) pairs."""
    logs = group.log(np.linalg.inv(np.asarray(truths, float))
                     @ np.asarray(estimates, float))
    return float(np.linalg.norm(logs.mean(axis=0)) ** 2)


def cost_c2(group: MatrixLieGroup, truths: np.ndarray,
            estimates: np.ndarray) -> float:
    """Mean squared chart error over (truth, estimate) pairs."""
    logs = group.log(np.linalg.inv(np.asarray(truths, float))
                     @ np.asarray(estimates, float))
    return float((logs * logs).sum(axis=-1).mean())

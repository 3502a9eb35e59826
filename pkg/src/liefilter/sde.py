"""Stochastic differential equations on a matrix Lie group.

Two equivalent formulations are supported:

* the injection form, which exponentiates an algebra-valued increment and
  multiplies it on the right of the current group element, and
* the chart (coordinate) form, an SDE on exponential coordinates around a
  fixed base point.

Coefficient transforms between the two forms and between Ito and Stratonovich
readings are provided.  Drift and diffusion callables receive ``(state, t)``
where ``state`` may carry leading batch axes; they must broadcast accordingly
(constant coefficients trivially do).

Wiener increments are generated from a counter-based Philox stream keyed by
the path seed and the step index, so each (path, step) increment is a pure
function of ``(seed, path index, step index)``.  Two samplers driven by the
same configuration therefore consume identical noise, which turns weak
equivalence checks into strong, paired ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainExitError
from .groups import MatrixLieGroup

ITO = "ito"
STRATONOVICH = "stratonovich"


@dataclass(frozen=True)
class SdeModel:
    """Injection-form SDE: g(t+dt) = g(t) exp(h dt + H dW).

    ``drift(g, t) -> (..., N)`` and ``diffusion(g, t) -> (..., N, N)``; for the
    Stratonovich reading the diffusion is evaluated at the midpoint state.
    """

    drift: Callable[[np.ndarray, float], np.ndarray]
    diffusion: Callable[[np.ndarray, float], np.ndarray]
    interpretation: str = ITO


@dataclass(frozen=True)
class ParametricSdeModel:
    """Chart-form SDE around ``base``: dx = J_r^-1 h~ dt + J_r^-1 H~ dW."""

    base: np.ndarray
    drift: Callable[[np.ndarray, float], np.ndarray]
    diffusion: Callable[[np.ndarray, float], np.ndarray]
    interpretation: str = ITO


@dataclass(frozen=True)
class PathConfig:
    total_time: float
    steps: int
    seed: int
    path_count: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")

    @property
    def dt(self) -> float:
        return self.total_time / self.steps


def wiener_halves(seed: int, step: int, path_count: int, dim: int,
                  dt: float) -> np.ndarray:
    """Two half-interval increments per path, shape (path_count, 2, dim).

    Row p is a pure function of (seed, p, step); summing over axis 1 gives the
    full-step increment, the first half alone feeds midpoint predictors.
    """
    bitgen = np.random.Philox(key=seed & (2**64 - 1), counter=[0, 0, 0, step])
    rng = np.random.Generator(bitgen)
    return rng.standard_normal((path_count, 2, dim)) * np.sqrt(dt / 2.0)


def _mv(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", mat, vec)


def sample_nonparametric_path(group: MatrixLieGroup, model: SdeModel,
                              g0: np.ndarray, cfg: PathConfig,
                              store_path: bool = True) -> np.ndarray:
    """Integrate the injection SDE by sequential right-multiplication.

    Returns ``(path_count, steps+1, n, n)`` when ``store_path`` else the final
    states ``(path_count, n, n)``.
    """
    n = group.mat_size
    dt = cfg.dt
    g = np.broadcast_to(np.asarray(g0, float), (cfg.path_count, n, n)).copy()
    if store_path:
        out = np.empty((cfg.path_count, cfg.steps + 1, n, n))
        out[:, 0] = g
    strat = model.interpretation == STRATONOVICH
    for i in range(cfg.steps):
        t = i * dt
        halves = wiener_halves(cfg.seed, i, cfg.path_count, group.dim, dt)
        dw = halves.sum(axis=1)
        h = np.asarray(model.drift(g, t), float)
        if strat:
            g_mid = g @ group.exp(h * dt / 2 + _mv(
                np.asarray(model.diffusion(g, t), float), halves[:, 0]))
            big_h = np.asarray(model.diffusion(g_mid, t + dt / 2), float)
        else:
            big_h = np.asarray(model.diffusion(g, t), float)
        g = g @ group.exp(h * dt + _mv(big_h, dw))
        if store_path:
            out[:, i + 1] = g
    return out if store_path else g


def sample_parametric_path(group: MatrixLieGroup, model: ParametricSdeModel,
                           x0: np.ndarray, cfg: PathConfig,
                           store_path: bool = True) -> np.ndarray:
    """Integrate the chart SDE; raises DomainExitError if a path leaves the
    chart domain, reporting the step index."""
    dim = group.dim
    dt = cfg.dt
    x = np.broadcast_to(np.asarray(x0, float), (cfg.path_count, dim)).copy()
    if store_path:
        out = np.empty((cfg.path_count, cfg.steps + 1, dim))
        out[:, 0] = x
    strat = model.interpretation == STRATONOVICH
    for i in range(cfg.steps):
        t = i * dt
        halves = wiener_halves(cfg.seed, i, cfg.path_count, group.dim, dt)
        dw = halves.sum(axis=1)
        jri = group.right_jacobian_inv(x)
        drift = _mv(jri, np.asarray(model.drift(x, t), float))
        if strat:
            x_mid = x + drift * dt / 2 + _mv(
                jri, _mv(np.asarray(model.diffusion(x, t), float), halves[:, 0]))
            big = np.asarray(model.diffusion(x_mid, t + dt / 2), float)
            noise = _mv(group.right_jacobian_inv(x_mid), _mv(big, dw))
        else:
            big = np.asarray(model.diffusion(x, t), float)
            noise = _mv(jri, _mv(big, dw))
        x = x + drift * dt + noise
        inside = group.in_domain(x)
        if not np.all(inside):
            raise DomainExitError(
                f"path left the chart domain at step {i + 1}", step=i + 1)
        if store_path:
            out[:, i + 1] = x
    return out if store_path else x


def ito_injection_to_parametric(group: MatrixLieGroup, model: SdeModel,
                                mu: np.ndarray) -> ParametricSdeModel:
    """Chart-form coefficients reproducing an Ito injection SDE around mu.

    The diffusion transfers verbatim; the drift gains a curvature correction
    (1/2) J_r (d J_r^-1/dx_k) H H^T J_r^-T e_k, summed over k.
    """
    if model.interpretation != ITO:
        raise ValueError("ito_injection_to_parametric requires an Ito model")
    mu = np.asarray(mu, float)

    def drift(x, t):
        x = np.asarray(x, float)
        g = mu @ group.exp(x)
        h = np.asarray(model.drift(g, t), float)
        big = np.asarray(model.diffusion(g, t), float)
        hht = big @ np.swapaxes(big, -1, -2)
        jri = group.right_jacobian_inv(x)
        corr = np.zeros(np.broadcast_shapes(x.shape, h.shape))
        for k, part in enumerate(group.right_jacobian_inv_partials(x)):
            vk = _mv(hht, jri[..., k, :])          # H H^T (J_r^-T e_k)
            corr = corr + 0.5 * _mv(part, vk)
        return h + _mv(group.right_jacobian(x), corr)

    def diffusion(x, t):
        return np.asarray(model.diffusion(mu @ group.exp(np.asarray(x, float)), t), float)

    return ParametricSdeModel(mu, drift, diffusion, ITO)


def stratonovich_to_ito(group: MatrixLieGroup, model: SdeModel,
                        step: float = 1e-5) -> SdeModel:
    """Equivalent Ito drift for a Stratonovich injection SDE.

    h = h_s + (1/2) E_i^r(H_s[k, j]) H_s[i, j] e_k with the right derivatives
    taken by central differences along the one-parameter subgroups.
    """
    if model.interpretation != STRATONOVICH:
        raise ValueError("stratonovich_to_ito requires a Stratonovich model")

    def drift(g, t):
        g = np.asarray(g, float)
        hs = np.asarray(model.drift(g, t), float)
        big = np.asarray(model.diffusion(g, t), float)
        corr = 0.0
        for i in range(group.dim):
            plus, minus = group._stencil(i, step)
            deriv = (np.asarray(model.diffusion(g @ plus, t), float)
                     - np.asarray(model.diffusion(g @ minus, t), float)) / (2 * step)
            corr = corr + 0.5 * np.einsum("...kj,...j->...k", deriv, big[..., i, :])
        return hs + corr

    return SdeModel(drift, model.diffusion, ITO)


def stratonovich_injection_to_parametric(group: MatrixLieGroup, model: SdeModel,
                                         mu: np.ndarray) -> ParametricSdeModel:
    """Chart-form coefficients for a Stratonovich injection SDE: verbatim."""
    if model.interpretation != STRATONOVICH:
        raise ValueError("stratonovich_injection_to_parametric requires a "
                         "Stratonovich model")
    mu = np.asarray(mu, float)

    def drift(x, t):
        return np.asarray(model.drift(mu @ group.exp(np.asarray(x, float)), t), float)

    def diffusion(x, t):
        return np.asarray(model.diffusion(mu @ group.exp(np.asarray(x, float)), t), float)

    return ParametricSdeModel(mu, drift, diffusion, STRATONOVICH)


def parametric_stratonovich_to_ito(group: MatrixLieGroup,
                                   model: ParametricSdeModel,
                                   step: float = 1e-6) -> ParametricSdeModel:
    """Euclidean Stratonovich-to-Ito correction applied to the chart SDE.

    Works on the effective coefficients A = J_r^-1 h~, B = J_r^-1 H~ of the
    coordinate process; single chart points only.
    """
    if model.interpretation != STRATONOVICH:
        raise ValueError("parametric_stratonovich_to_ito requires a "
                         "Stratonovich model")
    dim = group.dim

    def eff_diffusion(x, t):
        return group.right_jacobian_inv(x) @ np.asarray(model.diffusion(x, t), float)

    def drift(x, t):
        x = np.asarray(x, float)
        if x.ndim != 1:
            return np.stack([drift(row, t) for row in x.reshape(-1, dim)]
                            ).reshape(x.shape)
        a = group.right_jacobian_inv(x) @ np.asarray(model.drift(x, t), float)
        b = eff_diffusion(x, t)
        corr = np.zeros(dim)
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = step
            db = (eff_diffusion(x + e, t) - eff_diffusion(x - e, t)) / (2 * step)
            corr += 0.5 * db @ b[j, :]
        return group.right_jacobian(x) @ (a + corr)

    return ParametricSdeModel(model.base, drift, model.diffusion, ITO)

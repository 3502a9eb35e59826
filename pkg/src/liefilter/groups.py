"""Matrix Lie group descriptors and coordinate calculus.

A group is described by its algebra basis; elements are plain numpy matrices
and tangent coordinates are plain numpy vectors.  Every method broadcasts over
leading axes, so ``exp`` maps ``(..., N)`` coordinates to ``(..., n, n)``
matrices and vice versa.

Two concrete descriptors are provided:

* :class:`SO3` with closed-form Rodrigues/Jacobian expressions, and
* :class:`DiagonalGroup`, the commutative group of positive diagonal matrices
  (an exact embedding of R^N), useful as an oracle where every curvature
  correction vanishes.

Anything else can subclass :class:`MatrixLieGroup` and inherit power-series
fallbacks for the exponential, the adjoint machinery, and the four coordinate
Jacobians (truncated at 20 terms of the ``ad`` series).

All operations are pure functions of their inputs and safe to call from
concurrent threads; the only internal state is a cache of one-parameter
subgroup stencils whose entries are idempotent.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial

import numpy as np

from .errors import LieDomainError, SingularJacobianError

_SERIES_TERMS = 20
_SMALL_ANGLE = 1e-4
_LOG_SINGULARITY = np.pi - 1e-9
_DET_TOL = 1e-12


def _bernoulli_over_factorial(count: int) -> np.ndarray:
    """Coefficients b_k = B_k / k! of the inverse left Jacobian series."""
    bern = [Fraction(1)]
    for n in range(1, count):
        acc = Fraction(0)
        for k in range(n):
            acc += comb(n + 1, k) * bern[k]
        bern.append(-acc / (n + 1))
    return np.array([float(b / factorial(k)) for k, b in enumerate(bern)])


_B_COEF = _bernoulli_over_factorial(_SERIES_TERMS)          # inverse Jacobians
_J_COEF = np.array([1.0 / factorial(k + 1) for k in range(_SERIES_TERMS)])


class MatrixLieGroup:
    """Descriptor for an N-dimensional unimodular matrix Lie group.

    Parameters
    ----------
    basis : array (N, n, n)
        Linearly independent algebra basis; fixes the wedge/vee identification
        of tangent coordinates with algebra matrices.
    name : str
        Human-readable tag used in error messages.
    """

    def __init__(self, basis: np.ndarray, name: str = "matrix-group"):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise ValueError("basis must have shape (N, n, n)")
        self.basis = basis
        self.dim = basis.shape[0]
        self.mat_size = basis.shape[1]
        self.name = name
        flat = basis.reshape(self.dim, -1)
        if np.linalg.matrix_rank(flat) != self.dim:
            raise ValueError("basis matrices are linearly dependent")
        self._vee_map = np.linalg.pinv(flat)                # (n*n, N)
        # structure tensor: struct[i, :, j] = vee([E_i, E_j])
        brackets = np.einsum("iab,jbc->ijac", basis, basis)
        brackets = brackets - np.einsum("jab,ibc->ijac", basis, basis)
        veed = brackets.reshape(self.dim, self.dim, -1) @ self._vee_map  # (i, j, k)
        self._struct = np.moveaxis(veed, 2, 1)
        self._stencils: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}

    # -- wedge / vee -------------------------------------------------------
    def wedge(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("...i,ijk->...jk", np.asarray(x, float), self.basis)

    def vee(self, mat: np.ndarray) -> np.ndarray:
        mat = np.asarray(mat, float)
        flat = mat.reshape(*mat.shape[:-2], -1)
        return flat @ self._vee_map

    def identity(self) -> np.ndarray:
        return np.eye(self.mat_size)

    def in_domain(self, x: np.ndarray) -> np.ndarray:
        """Predicate for the chart domain of exponential coordinates."""
        x = np.asarray(x, float)
        return np.ones(x.shape[:-1], dtype=bool)

    # -- exponential chart -------------------------------------------------
    def exp(self, x: np.ndarray) -> np.ndarray:
        """Matrix exponential of wedge(x), scaling-and-squaring fallback."""
        X = self.wedge(x)
        norm = float(np.abs(X).sum(axis=-1).max())
        squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-300) / 0.25))))
        Y = X / (2.0 ** squarings)
        out = np.broadcast_to(np.eye(self.mat_size), Y.shape).copy()
        term = out.copy()
        for k in range(1, 24):
            term = term @ Y / k
            out = out + term
        for _ in range(squarings):
            out = out @ out
        return out

    def log(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no logarithm implementation")

    # -- adjoint machinery --------------------------------------------------
    def ad(self, x: np.ndarray) -> np.ndarray:
        """Matrix of the bracket action: ad(x) @ y == vee([wedge(x), wedge(y)])."""
        return np.einsum("...i,ikj->...kj", np.asarray(x, float), self._struct)

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        """Matrix of Ad(g): column j is vee(g E_j g^-1)."""
        g = np.asarray(g, float)
        ginv = np.linalg.inv(g)
        cols = self.vee(np.einsum("...ab,jbc,...cd->j...ad", g, self.basis, ginv))
        return np.moveaxis(cols, 0, -1)

    # -- coordinate Jacobians (ad power series fallback) --------------------
    def _ad_powers(self, x: np.ndarray) -> np.ndarray:
        A = self.ad(x)
        powers = np.empty((_SERIES_TERMS,) + A.shape)
        powers[0] = np.broadcast_to(np.eye(self.dim), A.shape)
        for k in range(1, _SERIES_TERMS):
            powers[k] = powers[k - 1] @ A
        return powers

    def left_jacobian(self, x: np.ndarray) -> np.ndarray:
        P = self._ad_powers(x)
        J = np.einsum("k,k...->...", _J_COEF, P)
        return self._checked(J)

    def right_jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.left_jacobian(-np.asarray(x, float))

    def left_jacobian_inv(self, x: np.ndarray) -> np.ndarray:
        P = self._ad_powers(x)
        J = np.einsum("k,k...->...", _B_COEF, P)
        return self._checked(J)

    def right_jacobian_inv(self, x: np.ndarray) -> np.ndarray:
        return self.left_jacobian_inv(-np.asarray(x, float))

    def left_jacobian_inv_partial(self, x: np.ndarray, k: int) -> np.ndarray:
        return self._series_inv_partial(np.asarray(x, float), k)

    def right_jacobian_inv_partial(self, x: np.ndarray, k: int) -> np.ndarray:
        # J_r^-1(x) = J_l^-1(-x), so the partial picks up one sign flip.
        return -self._series_inv_partial(-np.asarray(x, float), k)

    def right_jacobian_inv_partials(self, x: np.ndarray) -> list[np.ndarray]:
        """All dim partial derivatives of J_r^-1; hot loops use this entry
        point so subclasses can share work across components."""
        return [self.right_jacobian_inv_partial(x, k) for k in range(self.dim)]

    def _series_inv_partial(self, x: np.ndarray, k: int) -> np.ndarray:
        """Termwise derivative of the truncated inverse-left-Jacobian series."""
        A = self.ad(x)
        Ak = self.ad(np.eye(self.dim)[k])
        powers = [np.broadcast_to(np.eye(self.dim), A.shape)]
        for _ in range(_SERIES_TERMS - 1):
            powers.append(powers[-1] @ A)
        out = np.zeros(A.shape)
        for m in range(1, _SERIES_TERMS):
            deriv = sum(powers[a] @ Ak @ powers[m - 1 - a] for a in range(m))
            out = out + _B_COEF[m] * deriv
        return out

    def _checked(self, J: np.ndarray) -> np.ndarray:
        det = np.linalg.det(J)
        if np.any(np.abs(det) < _DET_TOL):
            raise SingularJacobianError(f"{self.name}: Jacobian determinant below {_DET_TOL}")
        return J

    # -- one-parameter subgroup stencils (cached) ----------------------------
    def _stencil(self, i: int, step: float) -> tuple[np.ndarray, np.ndarray]:
        key = (i, step)
        if key not in self._stencils:
            e = np.zeros(self.dim)
            e[i] = step
            self._stencils[key] = (self.exp(e), self.exp(-e))
        return self._stencils[key]


class SO3(MatrixLieGroup):
    """Rotation group of R^3 in the cross-product basis.

    Chart domain is the open ball of radius pi; closed-form Rodrigues maps and
    Jacobians are used throughout, with fourth-order Taylor branches below
    ``|x| = 1e-4`` to avoid indeterminate ratios.
    """

    def __init__(self):
        basis = np.zeros((3, 3, 3))
        basis[0] = [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
        basis[1] = [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]
        basis[2] = [[0, -1, 0], [1, 0, 0], [0, 0, 0]]
        super().__init__(basis, name="SO(3)")

    def wedge(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        K = np.zeros(x.shape[:-1] + (3, 3))
        K[..., 0, 1] = -x[..., 2]
        K[..., 0, 2] = x[..., 1]
        K[..., 1, 0] = x[..., 2]
        K[..., 1, 2] = -x[..., 0]
        K[..., 2, 0] = -x[..., 1]
        K[..., 2, 1] = x[..., 0]
        return K

    def vee(self, mat: np.ndarray) -> np.ndarray:
        mat = np.asarray(mat, float)
        return np.stack([mat[..., 2, 1], mat[..., 0, 2], mat[..., 1, 0]], axis=-1)

    def in_domain(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(x, float), axis=-1) < np.pi

    @staticmethod
    def _square_of_wedge(x: np.ndarray) -> np.ndarray:
        # cross-product identity: wedge(x)^2 = x x^T - |x|^2 I
        sq = x[..., :, None] * x[..., None, :]
        norm2 = (x * x).sum(axis=-1)
        idx = np.arange(3)
        sq[..., idx, idx] -= norm2[..., None]
        return sq

    def exp(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        theta = np.linalg.norm(x, axis=-1)
        small = theta < _SMALL_ANGLE
        safe = np.where(small, 1.0, theta)
        a = np.where(small, 1 - theta**2 / 6 + theta**4 / 120, np.sin(safe) / safe)
        b = np.where(small, 0.5 - theta**2 / 24 + theta**4 / 720,
                     (1 - np.cos(safe)) / safe**2)
        out = a[..., None, None] * self.wedge(x)
        out += b[..., None, None] * self._square_of_wedge(x)
        idx = np.arange(3)
        out[..., idx, idx] += 1.0
        return out

    def log(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, float)
        trace = np.trace(g, axis1=-2, axis2=-1)
        theta = np.arccos(np.clip((trace - 1) / 2, -1.0, 1.0))
        if np.any(theta > _LOG_SINGULARITY):
            raise LieDomainError("rotation angle within 1e-9 of pi; logarithm singular")
        w = np.stack([g[..., 2, 1] - g[..., 1, 2],
                      g[..., 0, 2] - g[..., 2, 0],
                      g[..., 1, 0] - g[..., 0, 1]], axis=-1)
        small = theta < _SMALL_ANGLE
        safe = np.where(small, 1.0, theta)
        coef = np.where(small, 0.5 * (1 + theta**2 / 6 + 7 * theta**4 / 360),
                        safe / (2 * np.sin(safe)))
        return coef[..., None] * w

    def ad(self, x: np.ndarray) -> np.ndarray:
        return self.wedge(x)

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        return np.asarray(g, float)

    @staticmethod
    def _c(theta: np.ndarray) -> np.ndarray:
        """Coefficient of K^2 in both inverse Jacobians."""
        small = theta < _SMALL_ANGLE
        safe = np.where(small, 1.0, theta)
        series = 1 / 12 + theta**2 / 720 + theta**4 / 30240
        closed = 1 / safe**2 - (1 + np.cos(safe)) / (2 * safe * np.sin(safe))
        return np.where(small, series, closed)

    @staticmethod
    def _c_prime(theta: np.ndarray) -> np.ndarray:
        small = theta < _SMALL_ANGLE
        safe = np.where(small, 1.0, theta)
        s, c = np.sin(safe), np.cos(safe)
        closed = -2 / safe**3 - (
            (-s) * (2 * safe * s) - (1 + c) * (2 * s + 2 * safe * c)
        ) / (2 * safe * s) ** 2
        return np.where(small, theta / 360 + theta**3 / 7560, closed)

    def left_jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        theta = np.linalg.norm(x, axis=-1)
        small = theta < _SMALL_ANGLE
        safe = np.where(small, 1.0, theta)
        a = np.where(small, 0.5 - theta**2 / 24 + theta**4 / 720,
                     (1 - np.cos(safe)) / safe**2)
        b = np.where(small, 1 / 6 - theta**2 / 120 + theta**4 / 5040,
                     (safe - np.sin(safe)) / safe**3)
        out = a[..., None, None] * self.wedge(x)
        out += b[..., None, None] * self._square_of_wedge(x)
        idx = np.arange(3)
        out[..., idx, idx] += 1.0
        return out

    def right_jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.left_jacobian(-np.asarray(x, float))

    def _jacobian_inv(self, x: np.ndarray, sign: float) -> np.ndarray:
        x = np.asarray(x, float)
        theta = np.linalg.norm(x, axis=-1)
        out = (sign * 0.5) * self.wedge(x)
        out += self._c(theta)[..., None, None] * self._square_of_wedge(x)
        idx = np.arange(3)
        out[..., idx, idx] += 1.0
        return out

    def left_jacobian_inv(self, x: np.ndarray) -> np.ndarray:
        return self._jacobian_inv(x, -1.0)

    def right_jacobian_inv(self, x: np.ndarray) -> np.ndarray:
        return self._jacobian_inv(x, 1.0)

    def right_jacobian_inv_partial(self, x: np.ndarray, k: int) -> np.ndarray:
        return self._inv_partials(x, first_order=0.5, components=(k,))[0]

    def left_jacobian_inv_partial(self, x: np.ndarray, k: int) -> np.ndarray:
        return self._inv_partials(x, first_order=-0.5, components=(k,))[0]

    def right_jacobian_inv_partials(self, x: np.ndarray) -> list[np.ndarray]:
        return self._inv_partials(x, first_order=0.5, components=range(3))

    def _inv_partials(self, x: np.ndarray, first_order: float,
                      components) -> list[np.ndarray]:
        x = np.asarray(x, float)
        theta = np.linalg.norm(x, axis=-1)
        K = self.wedge(x)
        sq = self._square_of_wedge(x)
        zero = theta < 1e-150
        safe = np.where(zero, 1.0, theta)
        radial = (self._c_prime(theta) * np.where(zero, 0.0, 1.0 / safe))[..., None, None]
        c = self._c(theta)[..., None, None]
        out = []
        for k in components:
            Ek = self.basis[k]
            part = radial * x[..., k, None, None] * sq
            part += c * (Ek @ K + K @ Ek)
            part += first_order * Ek
            out.append(part)
        return out


class DiagonalGroup(MatrixLieGroup):
    """R^N embedded as positive diagonal matrices under multiplication.

    The product commutes exactly, every Jacobian is the identity and every
    bracket vanishes, which makes this group a convenient flat oracle.
    """

    def __init__(self, dim: int = 3):
        basis = np.zeros((dim, dim, dim))
        for i in range(dim):
            basis[i, i, i] = 1.0
        super().__init__(basis, name=f"Diag({dim})")

    def exp(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        out = np.zeros(x.shape[:-1] + (self.dim, self.dim))
        idx = np.arange(self.dim)
        out[..., idx, idx] = np.exp(x)
        return out

    def log(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, float)
        diag = np.diagonal(g, axis1=-2, axis2=-1)
        if np.any(diag <= 0):
            raise LieDomainError("diagonal entries must be positive")
        return np.log(diag)

    def ad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        return np.zeros(x.shape[:-1] + (self.dim, self.dim))

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, float)
        return np.broadcast_to(np.eye(self.dim), g.shape[:-2] + (self.dim, self.dim)).copy()

    def _jac(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    left_jacobian = _jac
    right_jacobian = _jac
    left_jacobian_inv = _jac
    right_jacobian_inv = _jac

    def right_jacobian_inv_partial(self, x: np.ndarray, k: int) -> np.ndarray:
        x = np.asarray(x, float)
        return np.zeros(x.shape[:-1] + (self.dim, self.dim))

    left_jacobian_inv_partial = right_jacobian_inv_partial


# -- Lie directional derivatives --------------------------------------------

def lie_derivative_right(group: MatrixLieGroup, f, g: np.ndarray, i: int,
                         step: float = 1e-5):
    """Central-difference derivative of f along t -> f(g exp(t E_i)) at t=0."""
    plus, minus = group._stencil(i, step)
    return (np.asarray(f(g @ plus)) - np.asarray(f(g @ minus))) / (2 * step)


def lie_derivative_right_second(group: MatrixLieGroup, f, g: np.ndarray,
                                i: int, j: int, step: float = 1e-5):
    """Nested central-difference stencil for the iterated right derivative."""
    pi, mi = group._stencil(i, step)
    pj, mj = group._stencil(j, step)
    val = (np.asarray(f(g @ pi @ pj)) - np.asarray(f(g @ pi @ mj))
           - np.asarray(f(g @ mi @ pj)) + np.asarray(f(g @ mi @ mj)))
    return val / (4 * step * step)


# -- chart-perturbation expansion and truncated BCH ---------------------------

def expand_log_perturbation(group: MatrixLieGroup, eps: np.ndarray,
                            x: np.ndarray) -> np.ndarray:
    """Second-order expansion of log(exp(-eps) exp(x)) around eps = 0."""
    eps = np.asarray(eps, float)
    x = np.asarray(x, float)
    jinv = group.left_jacobian_inv(x)
    w = np.einsum("...ij,...j->...i", jinv, eps)
    out = x - w
    for k in range(group.dim):
        part = group.left_jacobian_inv_partial(x, k)
        out = out + 0.5 * w[..., k, None] * np.einsum("...ij,...j->...i", part, eps)
    return out


def bch_truncated(group: MatrixLieGroup, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """log(exp(x) exp(r)) truncated after the double-bracket terms."""
    x = np.asarray(x, float)
    r = np.asarray(r, float)
    adx = group.ad(x)
    adr = group.ad(r)
    mv = lambda A, v: np.einsum("...ij,...j->...i", A, v)
    return (x + r + 0.5 * mv(adx, r)
            + (mv(adx, mv(adx, r)) + mv(adr, mv(adr, x))) / 12.0)

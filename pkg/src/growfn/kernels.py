"""Covariance and precision constructions for the function priors.

Rational quadratic and squared exponential covariance matrices for the
Gaussian-process prior, and the RW2 (second-order random walk) precision
structure for the intrinsic GMRF prior, plus Cholesky helpers.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericError, ParameterError

DEFAULT_NUGGET = 1e-8


@dataclass(frozen=True)
class RQParams:
    """Rational quadratic parameters: inverse vertical scale, mean length
    scale and the scale-mixture shape controlling length-scale variation."""

    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive and finite, got {v}")

    def as_array(self):
        return np.array([self.theta1, self.theta2, self.theta3])

    @staticmethod
    def from_array(a):
        return RQParams(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class SEParams:
    """Squared exponential parameters: inverse vertical scale and length scale."""

    vscale: float
    lscale: float

    def __post_init__(self):
        if not (np.isfinite(self.vscale) and self.vscale > 0):
            raise ParameterError(f"vscale must be positive, got {self.vscale}")
        if not (np.isfinite(self.lscale) and self.lscale > 0):
            raise ParameterError(f"lscale must be positive, got {self.lscale}")


class CovMatrix:
    """Dense symmetric covariance matrix with cached Cholesky factors.

    Immutable once built; factors are cached per nugget value so repeated
    likelihood evaluations against the same matrix reuse the O(T^3) work.
    """

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ParameterError("covariance matrix must be square")
        if not np.allclose(matrix, matrix.T, atol=1e-12, rtol=0.0):
            raise NumericError("covariance matrix is not symmetric to 1e-12")
        matrix = 0.5 * (matrix + matrix.T)
        matrix.setflags(write=False)
        self.matrix = matrix
        self._chol = {}

    @property
    def shape(self):
        return self.matrix.shape

    def cholesky(self, jitter=0.0):
        """Lower Cholesky factor of matrix + jitter * I, cached."""
        key = float(jitter)
        if key not in self._chol:
            m = self.matrix if jitter == 0.0 else self.matrix + jitter * np.eye(len(self.matrix))
            try:
                self._chol[key] = np.linalg.cholesky(m)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"Cholesky factorization failed (jitter={jitter})") from exc
        return self._chol[key]


def unit_spaced(times):
    """Rescale times so the mean spacing is 1 (months are treated ordinally)."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return times - times[0] if times.size else times
    return (times - times[0]) / np.diff(times).mean()


def rq_covariance(theta, times):
    """Rational quadratic covariance: cell (j,l) is
    (1/theta1) * (1 + dt^2 / (theta2*theta3))^(-theta3)."""
    t = unit_spaced(times)
    d2 = (t[:, None] - t[None, :]) ** 2
    with np.errstate(over="raise"):
        try:
            c = (1.0 / theta.theta1) * (1.0 + d2 / (theta.theta2 * theta.theta3)) ** (-theta.theta3)
        except FloatingPointError as exc:
            raise NumericError(f"rational quadratic overflow for theta={theta}") from exc
    if not np.all(np.isfinite(c)):
        raise NumericError(f"non-finite rational quadratic covariance for theta={theta}")
    return CovMatrix(c)


def se_covariance(params, times):
    """Squared exponential covariance: (1/vscale) * exp(-dt^2 / lscale)."""
    t = unit_spaced(times)
    d2 = (t[:, None] - t[None, :]) ** 2
    c = (1.0 / params.vscale) * np.exp(-d2 / params.lscale)
    if not np.all(np.isfinite(c)):
        raise NumericError(f"non-finite squared exponential covariance for params={params}")
    return CovMatrix(c)


def add_nugget(c, tau_eps):
    """Add observation noise 1/tau_eps to the diagonal."""
    if not tau_eps > 0:
        raise ParameterError("tau_eps must be positive")
    return CovMatrix(c.matrix + (1.0 / tau_eps) * np.eye(len(c.matrix)))


def second_difference_operator(T):
    """(T-2) x T matrix whose rows are (1, -2, 1) second differences."""
    d2 = np.zeros((T - 2, T))
    for r in range(T - 2):
        d2[r, r : r + 3] = (1.0, -2.0, 1.0)
    return d2


@dataclass(frozen=True)
class PrecisionStructure:
    """RW2 precision stencil Q = D2' D2 with its (D, Omega) split.

    Q has interior rows (1, -4, 6, -4, 1), zero row sums and rank T-2;
    D is its diagonal and Omega = D - Q the (negated) off-diagonal weights.
    """

    Q: np.ndarray
    D: np.ndarray
    Omega: np.ndarray
    order: int = 2
    rank_deficiency: int = 2

    def __post_init__(self):
        for name in ("Q", "D", "Omega"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def T(self):
        return self.Q.shape[0]


def rw2_structure(T):
    """Build the second-order random walk precision structure for T points."""
    if T < 5:
        raise ParameterError(f"RW2 needs T >= 5 time points, got {T}")
    d2 = second_difference_operator(T)
    Q = d2.T @ d2
    D = np.diag(Q).copy()
    Omega = np.diag(D) - Q
    return PrecisionStructure(Q, D, Omega)


def proper_gmrf_precision(structure, kappa, rho):
    """Full-rank GMRF precision kappa * (D - rho * Omega) for |rho| < 1."""
    if not kappa > 0:
        raise ParameterError("kappa must be positive")
    if not abs(rho) < 1:
        raise ParameterError("rho must lie strictly inside (-1, 1); use rw2_structure for rho = 1")
    return kappa * (np.diag(structure.D) - rho * structure.Omega)


def rw2_quadratic_form(f):
    """f' Q f computed stably as the sum of squared second differences."""
    f = np.asarray(f, dtype=float)
    d2 = np.diff(f, n=2, axis=-1)
    return np.sum(d2 * d2, axis=-1)


def chol_logdet(L):
    """log-determinant of A from its lower Cholesky factor L."""
    return 2.0 * np.sum(np.log(np.diag(L)))


def chol_solve(L, b):
    """Solve A x = b given the lower Cholesky factor L of A."""
    return sla.cho_solve((L, True), b)

"""Hamiltonian flow for H(x, xi) = |xi|^2/2 + V(x).

One RK4 pass integrates the trajectory, the linearized (variational) flow and
the classical action together, so all three quantities carry the same
discretization order. Everything is vectorized over a leading batch axis;
the scalar entry points wrap batches of size one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFinite

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class PhasePoint:
    """A point (x, xi) in position-momentum space."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "xi", np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if self.x.shape != self.xi.shape or self.x.ndim != 1:
            raise ValueError("x and xi must be vectors of equal length")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xi))):
            raise ValueError("phase point entries must be finite")

    @property
    def dimension(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class FlowState:
    """Flow output at time t: endpoint, 2Nx2N linearization, action."""

    t: float
    point: PhasePoint
    jac: np.ndarray
    action: float


@dataclass(frozen=True)
class FlowBatch:
    """Vectorized flow output: arrays with a leading batch axis."""

    t: np.ndarray        # (B,)
    x: np.ndarray        # (B, N)
    xi: np.ndarray       # (B, N)
    jac: np.ndarray      # (B, 2N, 2N)
    action: np.ndarray   # (B,)

    def state(self, i: int) -> FlowState:
        return FlowState(
            t=float(self.t[i]),
            point=PhasePoint(self.x[i].copy(), self.xi[i].copy()),
            jac=self.jac[i].copy(),
            action=float(self.action[i]),
        )


@dataclass(frozen=True)
class PotentialModel:
    """Potential with analytic gradient and Hessian.

    Evaluators are batched: value maps (..., N) -> (...), gradient maps
    (..., N) -> (..., N) and hessian maps (..., N) -> (..., N, N). The
    Hessian must be analytic; the variational system is too sensitive for
    differenced Hessians.
    """

    dimension: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    tag: str = "custom-polynomial-bounded"

    @property
    def is_zero(self) -> bool:
        return self.tag == "zero"


def zero_potential(dimension: int = 1) -> PotentialModel:
    """V = 0 (free motion)."""

    def value(x):
        return np.zeros(np.shape(x)[:-1])

    def gradient(x):
        return np.zeros(np.shape(x))

    def hessian(x):
        return np.zeros(np.shape(x) + (dimension,))

    return PotentialModel(dimension, value, gradient, hessian, tag="zero")


def harmonic_potential(omega: float = 1.0, dimension: int = 1) -> PotentialModel:
    """V = omega^2 |x|^2 / 2."""
    w2 = float(omega) ** 2

    def value(x):
        return 0.5 * w2 * np.sum(np.asarray(x) ** 2, axis=-1)

    def gradient(x):
        return w2 * np.asarray(x)

    def hessian(x):
        shape = np.shape(x)[:-1]
        return np.broadcast_to(w2 * np.eye(dimension), shape + (dimension, dimension)).copy()

    return PotentialModel(dimension, value, gradient, hessian, tag=f"harmonic({omega})")


def cosine_potential(v0: float = 1.0, wavenumber: float = 1.0,
                     dimension: int = 1) -> PotentialModel:
    """V = v0 * sum_i cos(k x_i); bounded with bounded derivatives."""
    v0 = float(v0)
    k = float(wavenumber)

    def value(x):
        return v0 * np.sum(np.cos(k * np.asarray(x)), axis=-1)

    def gradient(x):
        return -v0 * k * np.sin(k * np.asarray(x))

    def hessian(x):
        x = np.asarray(x)
        diag = -v0 * k * k * np.cos(k * x)
        out = np.zeros(x.shape + (dimension,))
        idx = np.arange(dimension)
        out[..., idx, idx] = diag
        return out

    return PotentialModel(dimension, value, gradient, hessian,
                          tag=f"cosine({v0},{k})")


def hamiltonian(potential: PotentialModel, p: PhasePoint) -> float:
    """Total energy |xi|^2/2 + V(x) at a phase point."""
    return float(0.5 * np.dot(p.xi, p.xi) + potential.value(p.x[None, :])[0])


def _rhs(potential, x, xi, jac):
    n = potential.dimension
    dx = xi
    dxi = -potential.gradient(x)
    hess = potential.hessian(x)
    djac = np.empty_like(jac)
    djac[:, :n, :] = jac[:, n:, :]
    djac[:, n:, :] = -np.einsum("bij,bjk->bik", hess, jac[:, :n, :])
    dact = 0.5 * np.sum(xi * xi, axis=-1) - potential.value(x)
    return dx, dxi, djac, dact


def rk4_step(potential, x, xi, jac, action, dt):
    """One classical RK4 step; dt is per-element, shape (B,).

    The action rides the same stages, which reduces to Simpson weighting
    for the pure-quadrature component.
    """
    h = dt[:, None]
    hj = dt[:, None, None]

    k1x, k1xi, k1j, k1a = _rhs(potential, x, xi, jac)
    k2x, k2xi, k2j, k2a = _rhs(potential, x + 0.5 * h * k1x, xi + 0.5 * h * k1xi,
                               jac + 0.5 * hj * k1j)
    k3x, k3xi, k3j, k3a = _rhs(potential, x + 0.5 * h * k2x, xi + 0.5 * h * k2xi,
                               jac + 0.5 * hj * k2j)
    k4x, k4xi, k4j, k4a = _rhs(potential, x + h * k3x, xi + h * k3xi,
                               jac + hj * k3j)

    x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    xi = xi + (h / 6.0) * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi)
    jac = jac + (hj / 6.0) * (k1j + 2.0 * k2j + 2.0 * k3j + k4j)
    action = action + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    return x, xi, jac, action


def flow_batch(potential: PotentialModel, y, eta, t, dt: float = DEFAULT_DT) -> FlowBatch:
    """Integrate a batch of initial conditions, each to its own time.

    y, eta: (B, N) starting positions and momenta; t: scalar or (B,) target
    times (>= 0). Every element takes the same number of steps with its own
    step size t_i / n <= dt, so mixed target times vectorize cleanly.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if y.shape != eta.shape:
        raise ValueError("y and eta must have matching shapes")
    b, n = y.shape
    if n != potential.dimension:
        raise ValueError(f"expected dimension {potential.dimension}, got {n}")
    t = np.broadcast_to(np.asarray(t, dtype=float), (b,)).astype(float)
    if np.any(t < 0.0):
        raise ValueError("flow times must be >= 0")
    if dt <= 0.0:
        raise ValueError("dt must be positive")

    n_steps = int(np.max(np.ceil(t / dt))) if np.any(t > 0.0) else 0
    x = y.copy()
    xi = eta.copy()
    jac = np.broadcast_to(np.eye(2 * n), (b, 2 * n, 2 * n)).copy()
    action = np.zeros(b)
    if n_steps > 0:
        dts = t / n_steps
        for _ in range(n_steps):
            x, xi, jac, action = rk4_step(potential, x, xi, jac, action, dts)

    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))
            and np.all(np.isfinite(jac)) and np.all(np.isfinite(action))):
        raise NonFinite("flow produced non-finite values; blow-up or bad potential")
    return FlowBatch(t=t, x=x, xi=xi, jac=jac, action=action)


def flow(potential: PotentialModel, y, eta, t: float, dt: float = DEFAULT_DT) -> FlowState:
    """Flow a single initial condition (y, eta) to time t.

    Returns the endpoint, the 2Nx2N linearization and the accumulated
    action integral of |xi|^2/2 - V(x).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    return flow_batch(potential, y[None, :], eta[None, :], float(t), dt).state(0)


def potential_consistency(potential: PotentialModel, points, step: float = 1e-5):
    """Max relative mismatch of (gradient vs V) and (hessian vs gradient).

    Used by scenario validation; both numbers should be <= 1e-5 for a
    correctly wired model at generic points.
    """
    from .util import fd_gradient, fd_jacobian, max_rel_error

    points = np.atleast_2d(np.asarray(points, dtype=float))
    g_err = max_rel_error(fd_gradient(potential.value, points, step),
                          potential.gradient(points))
    h_err = max_rel_error(fd_jacobian(potential.gradient, points, step),
                          potential.hessian(points))
    return g_err, h_err

"""Geodesic flows on the punctured cotangent bundle.

Two flows are used:

* ``hamiltonian``: the flow of K^2/2, dx/dt = g^{ij} p_j, dp/dt = -d(K^2/2)/dx.
  It conserves K and is what ``integrate`` traces.
* ``spray``: dx_s/dt = p_s, dp_r/dt = -2 G_r, the flow generated by the spray
  coefficients. Horizontal derivatives of curvature fields (S, H) are taken
  along it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .errors import DomainError, StepFailure
from .metric import EvalPoint, evaluate, x_gradients
from .spray import spray_coeffs

HAMILTONIAN = "hamiltonian"
SPRAY = "spray"


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    max_steps: int = 100_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True, eq=False)
class GeodesicState:
    t: float
    x: np.ndarray
    p: np.ndarray
    K0: float
    K: float

    @property
    def drift(self):
        return abs(self.K - self.K0) / self.K0


def flow_rhs(spec, x, p):
    """Hamiltonian vector field of K^2/2 at (x, p)."""
    b = evaluate(spec, EvalPoint.make(spec, x, p))
    dK = x_gradients(spec, b).dK
    return b.gUp @ b.p, -b.K * dK


def spray_rhs(spec, x, p):
    pt = EvalPoint.make(spec, x, p)
    return pt.p.copy(), -2.0 * spray_coeffs(spec, pt)


def velocity(spec, pt, flow=HAMILTONIAN):
    if flow == HAMILTONIAN:
        return flow_rhs(spec, pt.x, pt.p)
    if flow == SPRAY:
        return spray_rhs(spec, pt.x, pt.p)
    raise ValueError(f"unknown flow {flow!r}")


def flow_derivative(spec, pt, field, flow=HAMILTONIAN):
    """Rate of change of ``field`` along the chosen flow at ``pt``.

    ``field(x, p)`` returns a scalar or array. When it also provides
    ``gradients(x, p) -> (d/dx, d/dp)`` with the derivative axis last, those
    are used; otherwise both gradients come from finite differences.
    """
    xdot, pdot = velocity(spec, pt, flow)
    if hasattr(field, "gradients"):
        dx, dp = field.gradients(pt.x, pt.p)
    else:
        dx = fd.gradient(lambda x: field(x, pt.p), pt.x)
        dp = fd.gradient(lambda p: field(pt.x, p), pt.p)
    return np.asarray(dx) @ xdot + np.asarray(dp) @ pdot


# Dormand-Prince 5(4)
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_MIN_FACTOR, _MAX_FACTOR = 0.2, 5.0


def _dp_step(f, y, h, k1):
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(yi))
    y5 = y + h * sum(b * k for b, k in zip(_B5, ks))
    err = h * sum(e * k for e, k in zip(_E, ks))
    return y5, err, ks[-1]


def integrate(spec, x0, p0, t_end, cfg=None):
    """Trace the Hamiltonian geodesic from (x0, p0) to parameter ``t_end``.

    Returns the accepted states, starting with t = 0. Negative ``t_end``
    integrates backwards.
    """
    cfg = cfg or IntegratorConfig()
    n = spec.n
    pt = EvalPoint.make(spec, x0, p0)
    K0 = evaluate(spec, pt).K
    direction = 1.0 if t_end >= 0 else -1.0
    span = abs(t_end)

    def f(y):
        xdot, pdot = flow_rhs(spec, y[:n], y[n:])
        return direction * np.concatenate([xdot, pdot])

    y = np.concatenate([pt.x, pt.p])
    states = [GeodesicState(0.0, pt.x.copy(), pt.p.copy(), K0, K0)]
    if span == 0:
        return states
    k1 = f(y)
    scale0 = cfg.atol + cfg.rtol * np.abs(y)
    d1 = np.sqrt(np.mean((k1 / scale0) ** 2))
    h = min(span, cfg.max_step, 0.01 / d1 if d1 > 1e-5 else 1e-3)
    h_floor = 1e-14 * max(1.0, span)
    s, err_prev, steps = 0.0, 1e-4, 0
    while s < span:
        if steps >= cfg.max_steps:
            raise StepFailure(f"exceeded {cfg.max_steps} steps at t={direction * s:.6g}")
        h = min(h, span - s, cfg.max_step)
        try:
            y_new, err_vec, k_last = _dp_step(f, y, h, k1)
            K_new = evaluate(spec, EvalPoint.make(spec, y_new[:n], y_new[n:])).K
        except DomainError:
            h *= 0.5
            if h < h_floor:
                raise StepFailure(f"trajectory left the metric's domain near t={direction * s:.6g}")
            continue
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = max(float(np.sqrt(np.mean((err_vec / scale) ** 2))), 1e-16)
        steps += 1
        if err <= 1.0:
            s += h
            y, k1 = y_new, k_last
            states.append(GeodesicState(direction * s, y[:n].copy(), y[n:].copy(), K0, K_new))
            factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
            err_prev = err
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** -_ALPHA)
            if h < h_floor:
                raise StepFailure(f"step size underflow near t={direction * s:.6g}")
    return states


def spray_consistency(spec, x, p):
    """d^2x/dt^2 + 2 G(x, p) along the Hamiltonian flow (a diagnostic)."""
    pt = EvalPoint.make(spec, x, p)
    xdot, pdot = flow_rhs(spec, pt.x, pt.p)
    velocity_x = fd.gradient(lambda z: flow_rhs(spec, z, pt.p)[0], pt.x)
    gUp = evaluate(spec, pt).gUp
    xddot = velocity_x @ xdot + gUp @ pdot
    return xddot + 2.0 * spray_coeffs(spec, pt)


class FundamentalField:
    """K as a field on the cotangent bundle, with exact gradients."""

    def __init__(self, spec):
        self.spec = spec

    def __call__(self, x, p):
        return evaluate(self.spec, EvalPoint.make(self.spec, x, p)).K

    def gradients(self, x, p):
        b = evaluate(self.spec, EvalPoint.make(self.spec, x, p))
        return x_gradients(self.spec, b).dK, b.a[1]


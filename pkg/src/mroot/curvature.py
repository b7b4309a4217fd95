"""Non-Riemannian curvatures built from the metric bundle and the spray jet.

Index conventions follow ``spray``: upper (momentum-derivative) indices
first, the lower spray index r last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVolume, SingularMetric
from .geodesic import SPRAY, flow_derivative
from .metric import EvalPoint, evaluate, vertical_derivatives, x_gradients
from .spray import berwald_hierarchy


def landsberg(bundle, jet):
    """L^{ijk} = -1/2 p^s G^{ijk}_s with p^s = K a^s."""
    return -0.5 * bundle.K * np.einsum("s,ijks->ijk", bundle.a[1], jet.G3)


def mean_landsberg(bundle, L):
    return np.einsum("ijk,jk->i", L, bundle.gDown)


def e_curvature(jet):
    return 0.5 * np.einsum("ijrr->ij", jet.G3)


def _volume(spec, bundle):
    grads = x_gradients(spec, bundle)
    if not grads.sigma > 0:
        raise NonPositiveVolume(f"reference volume sigma(x) = {grads.sigma:.6g} <= 0", bundle.x, bundle.p)
    return grads


def distortion(spec, bundle):
    """tau = 1/2 ln|det g^{ij}| - ln sigma(x)."""
    grads = _volume(spec, bundle)
    sign, logdet = np.linalg.slogdet(bundle.gUp)
    if sign == 0:
        raise SingularMetric("det g^{ij} = 0", bundle.x, bundle.p)
    return 0.5 * logdet - np.log(grads.sigma)


class DistortionField:
    """tau as a field, with exact x- and p-gradients.

    det g^{ij} = (m-1)^(n-1) det a^{ij}, so both gradients reduce to
    traces of a^{-1} times the derivatives of a^{ij}.
    """

    def __init__(self, spec):
        self.spec = spec

    def _bundle(self, x, p):
        return evaluate(self.spec, EvalPoint.make(self.spec, x, p))

    def __call__(self, x, p):
        return distortion(self.spec, self._bundle(x, p))

    def gradients(self, x, p):
        b = self._bundle(x, p)
        grads = _volume(self.spec, b)
        d_p = 0.5 * np.einsum("ji,ijk->k", b.a2_inv, vertical_derivatives(b)["a2"])
        d_x = 0.5 * np.einsum("ji,sij->s", b.a2_inv, grads.d_a2) - grads.d_sigma / grads.sigma
        return d_x, d_p


def s_curvature(spec, pt):
    """Rate of change of the distortion along the spray flow."""
    return float(flow_derivative(spec, pt, DistortionField(spec), flow=SPRAY))


class EField:
    """E^{ij} as a field; exact gradients come from the x-differentiated hierarchy."""

    def __init__(self, spec):
        self.spec = spec

    def _jet(self, x, p):
        pt = EvalPoint.make(self.spec, x, p)
        return berwald_hierarchy(self.spec, pt, x_derivatives=True)

    def __call__(self, x, p):
        pt = EvalPoint.make(self.spec, x, p)
        return e_curvature(berwald_hierarchy(self.spec, pt, levels=3))

    def gradients(self, x, p):
        return e_gradients(self._jet(x, p))


def e_gradients(jet):
    """(dE/dx, dE/dp), derivative axis last."""
    d_x = 0.5 * np.einsum("sijrr->ijs", jet.x_derivatives[3])
    d_p = 0.5 * np.einsum("ijkrr->ijk", jet.G4)
    return d_x, d_p


def h_from_parts(p, jet, E, dE_dx, dE_dp):
    """H^{ij} = p_s dE/dx_s - 2 G_r dE/dp_r - E^{rj} G^i_r - E^{ir} G^j_r."""
    transport = dE_dx @ p - 2.0 * dE_dp @ jet.G
    return transport - np.einsum("rj,ir->ij", E, jet.G1) - np.einsum("ir,jr->ij", E, jet.G1)


def h_curvature(spec, pt, jet=None):
    if jet is None or jet.x_derivatives is None:
        jet = berwald_hierarchy(spec, pt, x_derivatives=True)
    E = e_curvature(jet)
    dE_dx, dE_dp = e_gradients(jet)
    return h_from_parts(pt.p, jet, E, dE_dx, dE_dp)


def h_curvature_fd(spec, pt):
    """Same formula with both E-derivatives from finite differences (oracle)."""
    jet = berwald_hierarchy(spec, pt)
    E = e_curvature(jet)
    transport = flow_derivative(spec, pt, lambda x, p: EField(spec)(x, p), flow=SPRAY)
    return transport - np.einsum("rj,ir->ij", E, jet.G1) - np.einsum("ir,jr->ij", E, jet.G1)


def abs_metric(gDown):
    """|g_{ij}|: equal to g_{ij} when positive definite, otherwise V|w|V^T."""
    w, V = np.linalg.eigh(gDown)
    if np.min(np.abs(w)) == 0.0:
        raise SingularMetric("g_{ij} is singular")
    if np.all(w > 0):
        return gDown
    return (V * np.abs(w)) @ V.T


def lower_all(T, metric):
    out = np.asarray(T, dtype=float)
    for axis in range(out.ndim):
        out = np.moveaxis(np.tensordot(metric, out, axes=([1], [axis])), 0, axis)
    return out


def g_inner(T, U, gDown):
    metric = abs_metric(gDown)
    return float(np.sum(lower_all(T, metric) * np.asarray(U)))


def g_norm(T, gDown):
    return float(np.sqrt(max(g_inner(T, T, gDown), 0.0)))


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    L: np.ndarray
    J: np.ndarray
    E: np.ndarray
    S: float
    H: np.ndarray
    tau: float
    norms: dict


def curvature_report(spec, pt, bundle=None, jet=None):
    if bundle is None:
        bundle = evaluate(spec, pt)
    if jet is None or jet.x_derivatives is None:
        jet = berwald_hierarchy(spec, pt, bundle, x_derivatives=True)
    L = landsberg(bundle, jet)
    J = mean_landsberg(bundle, L)
    E = e_curvature(jet)
    S = s_curvature(spec, pt)
    H = h_curvature(spec, pt, jet)
    tau = distortion(spec, bundle)
    g = bundle.gDown
    norms = {
        "C": g_norm(bundle.C, g),
        "I": g_norm(bundle.I, g),
        "L": g_norm(L, g),
        "J": g_norm(J, g),
        "E": g_norm(E, g),
        "H": g_norm(H, g),
    }
    return CurvatureReport(L, J, E, S, H, tau, norms)

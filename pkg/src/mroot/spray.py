"""Christoffel contractions, spray coefficients and the Berwald hierarchy.

Writing A_r for the coefficient tensor contracted with m - r momenta, the
spray equation is A_2^{hr} G_r = (1/m) {0...0,h}. Differentiating it k times
in p gives, for every level k,

    sum_{S subset of I} (m-2)_{|S|} A_{2+|S|}^{hrS} G^{I minus S}_r
        = (m-1)(m-2)...(m-k+1) {I 0...0,h},

with (m-2)_s the falling factorial. Level k is a linear system with the
same matrix A_2 whose right-hand side only involves levels below k, so one
LU factorisation serves the whole hierarchy. Terms whose integer prefactor
vanishes are skipped before any tensor of order above m is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ResidualTooLarge, SingularMetric
from .metric import MetricBundle, evaluate
from .symtensor import contract, symmetrize

RESIDUAL_LIMIT = 1e-8
LEVELS = 4


def falling(a, s):
    out = 1
    for j in range(s):
        out *= a - j
    return out


def _rhs_factor(m, k):
    if k == 0:
        return 1.0 / m
    return float(falling(m - 1, k - 1))


def christoffel_from_grad(dA, m):
    """{i_1..i_m, h} from x-derivatives of the coefficient tensor.

    ``dA`` has trailing axes (s, i_1, ..., i_m) with s the derivative
    direction; any leading axes are carried through. The result has
    trailing axes (h, i_1, ..., i_m).
    """
    lead = -(m + 1)
    total = sum(np.moveaxis(dA, lead, lead + t) for t in range(m))
    gamma = (total - np.moveaxis(dA, lead, -1)) / (2.0 * (m - 1))
    return np.moveaxis(gamma, -1, lead)


def christoffel(spec, x, indices, j):
    """Single component {i_1...i_m, j} of the m-th Christoffel symbols (1-based)."""
    if len(indices) != spec.m:
        raise ValueError(f"need {spec.m} upper indices")
    gamma = christoffel_from_grad(spec.a.dense_grad(np.asarray(x, dtype=float)), spec.m)
    return float(gamma[(j - 1,) + tuple(i - 1 for i in indices)])


def _gamma_levels(gamma_h, p, m, kmax):
    return [contract(gamma_h, p, m - k) if k <= m else None for k in range(kmax + 1)]


@dataclass(frozen=True, eq=False)
class ChristoffelContraction:
    level: int
    values: np.ndarray  # axes (i_1, ..., i_k, h)


def christoffel_contracted(spec, pt, k):
    if not 0 <= k <= min(3, spec.m):
        raise ValueError(f"contraction level {k} outside [0, {min(3, spec.m)}]")
    gamma_h = christoffel_from_grad(spec.a.dense_grad(pt.x), spec.m)
    values = contract(gamma_h, pt.p, spec.m - k)
    return ChristoffelContraction(k, np.moveaxis(values, 0, -1))


def _leibniz(raw, G, k, m, smin):
    """Sum over subsets S (|S| >= smin) of the level-k left-hand side."""
    total = 0.0
    for s in range(smin, k + 1):
        c = falling(m - 2, s)
        if c == 0 or G[k - s] is None:
            continue
        term = np.tensordot(raw[2 + s], G[k - s], axes=([1], [k - s]))
        total = total + math.comb(k, s) * c * symmetrize(term, range(1, k + 1))
    return total


@dataclass(frozen=True, eq=False)
class SprayJet:
    """Spray coefficients and their momentum derivatives at one point.

    ``levels[k]`` has axes (i_1, ..., i_k, r): the k-th p-derivative of G_r.
    ``x_derivatives[k]`` (when requested) prepends the x-direction axis.
    """

    levels: tuple
    residuals: tuple
    contraction_residual: float
    factorizations: int = 1
    x_derivatives: tuple | None = field(default=None)

    @property
    def G(self):
        return self.levels[0]

    @property
    def G1(self):
        return self.levels[1]

    @property
    def G2(self):
        return self.levels[2]

    @property
    def G3(self):
        return self.levels[3]

    @property
    def G4(self):
        return self.levels[4]


class _LevelSolver:
    """LU factorisation of A_2^{hr}, shared by every level."""

    def __init__(self, M, bundle):
        self.M = M
        self.n = M.shape[0]
        self.factorizations = 0
        self.solves = 0
        try:
            self.lu = scipy.linalg.lu_factor(M, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularMetric(f"spray matrix not factorisable: {exc}", bundle.x, bundle.p)
        self.factorizations += 1
        self.normM = np.linalg.norm(M)

    def solve(self, rhs):
        """Solve M X = rhs for rhs with axes (h, I...); returns (X with axes (I..., r), residual)."""
        k = rhs.ndim - 1
        b = rhs.reshape(self.n, -1)
        X = scipy.linalg.lu_solve(self.lu, b)
        self.solves += 1
        denom = max(np.linalg.norm(b), self.normM * np.linalg.norm(X))
        residual = float(np.linalg.norm(self.M @ X - b) / denom) if denom > 0 else 0.0
        X = X.reshape((self.n,) * (k + 1))
        return np.moveaxis(X, 0, -1), residual


def _solve_levels(solver, raw, gamma, m, kmax):
    G, residuals = [], []
    for k in range(kmax + 1):
        f = _rhs_factor(m, k)
        rhs = f * gamma[k] if f != 0 else np.zeros((solver.n,) * (k + 1))
        rhs = rhs - _leibniz(raw, G + [None], k, m, 1) if k else rhs
        Gk, res = solver.solve(rhs)
        G.append(Gk)
        residuals.append(res)
    return G, residuals


def _x_derivative_levels(solver, spec, bundle, G, kmax):
    m, n, p = spec.m, spec.n, bundle.p
    dA = spec.a.dense_grad(bundle.x)
    d2A = spec.a.dense_hess(bundle.x)
    d_raw_all = [contract(dA, p, m - r) for r in range(m + 1)]
    d_gamma_all = christoffel_from_grad(d2A, m)
    out = [np.zeros((n,) + G[k].shape) for k in range(kmax + 1)]
    for s in range(n):
        d_raw = [d_raw_all[r][s] for r in range(m + 1)]
        d_gamma = _gamma_levels(d_gamma_all[s], p, m, kmax)
        dG = []
        for k in range(kmax + 1):
            f = _rhs_factor(m, k)
            rhs = f * d_gamma[k] if f != 0 else np.zeros((n,) * (k + 1))
            rhs = rhs - _leibniz(d_raw, G, k, m, 0)
            if k:
                rhs = rhs - _leibniz(bundle.raw, dG + [None], k, m, 1)
            dGk, _ = solver.solve(rhs)
            dG.append(dGk)
            out[k][s] = dGk
    return tuple(out)


def contraction_residual(bundle, G, gamma3):
    """Residual of the p_h-contracted level-3 relation in normalised a-tensor form."""
    m, K = bundle.m, bundle.K
    a = bundle.a
    G0, G1, G2, G3 = G[:4]
    terms = [K ** (m - 2) * np.einsum("r,ijkr->ijk", bundle.p_up, G3)]
    if m - 2:
        terms.append(K ** (m - 2) * (m - 2) * 3 * symmetrize(np.einsum("ir,jkr->ijk", a[2], G2)))
    if (m - 2) * (m - 3):
        c = (m - 2) * (m - 3) * K ** (m - 4)
        terms.append(c * K * 3 * symmetrize(np.einsum("ijr,kr->ijk", a[3], G1)))
        if m - 4:
            terms.append(c * (m - 4) * np.einsum("ijkr,r->ijk", a[4], G0))
    lhs = sum(terms)
    if (m - 1) * (m - 2):
        rhs = (m - 1) * (m - 2) * np.tensordot(bundle.p, gamma3, axes=([0], [0]))
    else:
        rhs = np.zeros_like(lhs)
    scale = max([np.linalg.norm(t) for t in terms] + [np.linalg.norm(rhs)])
    return float(np.linalg.norm(lhs - rhs) / scale) if scale > 0 else 0.0


def berwald_hierarchy(spec, pt, bundle=None, x_derivatives=False, levels=LEVELS):
    """Solve for G_r and its p-derivatives up to ``levels`` with one factorisation."""
    if bundle is None:
        bundle = evaluate(spec, pt)
    m = spec.m
    M = bundle.raw[2]
    solver = _LevelSolver(M, bundle)
    gamma_h = christoffel_from_grad(spec.a.dense_grad(bundle.x), m)
    gamma = _gamma_levels(gamma_h, bundle.p, m, levels)
    G, residuals = _solve_levels(solver, bundle.raw, gamma, m, levels)
    for k, res in enumerate(residuals):
        if res > RESIDUAL_LIMIT:
            raise ResidualTooLarge(f"level {k} relative residual {res:.3e} exceeds {RESIDUAL_LIMIT:g}")
    r5 = contraction_residual(bundle, G, gamma[3]) if levels >= 3 else 0.0
    if r5 > RESIDUAL_LIMIT:
        raise ResidualTooLarge(f"p-contracted level-3 residual {r5:.3e} exceeds {RESIDUAL_LIMIT:g}")
    dG = _x_derivative_levels(solver, spec, bundle, G, levels) if x_derivatives else None
    return SprayJet(tuple(G), tuple(residuals), r5, solver.factorizations, dG)


def spray_coeffs(spec, pt, bundle=None):
    if bundle is None:
        bundle = evaluate(spec, pt)
    solver = _LevelSolver(bundle.raw[2], bundle)
    gamma0 = contract(christoffel_from_grad(spec.a.dense_grad(bundle.x), spec.m), bundle.p, spec.m)
    G, residual = solver.solve(gamma0 / spec.m)
    if residual > RESIDUAL_LIMIT:
        raise ResidualTooLarge(f"spray solve relative residual {residual:.3e}")
    return G

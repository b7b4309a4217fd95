"""Fundamental function and metric-level tensors of an m-th root metric.

For K^m = a^{i_1...i_m}(x) p_{i_1}...p_{i_m} the engine works with the raw
momentum contractions A_r = a^{i_1..i_r 0..0} (m - r slots contracted with
p) and the normalised tensors a_r = A_r / K^(m-r).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveRadicand, OrderOutOfRange, SingularMetric
from .symtensor import PolyField, SymCoeffTensor, SymValueTensor, contract

COND_LIMIT = 1e12


@dataclass(frozen=True)
class MetricSpec:
    n: int
    m: int
    a: SymCoeffTensor
    sigma: PolyField | None = None
    name: str | None = None

    def __post_init__(self):
        if self.n < 2 or self.m < 2:
            raise ValueError("need n >= 2 and m >= 2")
        if (self.a.n, self.a.m) != (self.n, self.m):
            raise ValueError("coefficient tensor shape does not match (n, m)")
        if self.sigma is not None and self.sigma.monomials:
            if any(len(e) != self.n for e, _ in self.sigma.monomials):
                raise ValueError("sigma exponent vectors must have length n")

    @property
    def volume(self):
        return self.sigma if self.sigma is not None else PolyField.constant(1.0, self.n)

    def scaled(self, factor):
        """Same metric with every coefficient multiplied by ``factor``."""
        entries = {k: v.scale(factor) for k, v in self.a.entries.items()}
        return MetricSpec(self.n, self.m, SymCoeffTensor(self.n, self.m, entries), self.sigma, self.name)


def warn_if_low_degree(spec):
    if spec.m < 3:
        warnings.warn(
            f"m={spec.m}: the metric is Riemannian; isotropy classification is vacuous",
            stacklevel=3,
        )


@dataclass(frozen=True, eq=False)
class EvalPoint:
    x: np.ndarray
    p: np.ndarray

    @classmethod
    def make(cls, spec, x, p):
        x = np.asarray(x, dtype=float).reshape(-1)
        p = np.asarray(p, dtype=float).reshape(-1)
        if x.shape != (spec.n,) or p.shape != (spec.n,):
            raise ValueError(f"x and p must have {spec.n} components")
        if not np.any(p):
            raise NonPositiveRadicand("momentum p = 0 is outside T*M_0", x, p)
        radicand = contract(spec.a.dense(x), p, spec.m)
        if not radicand > 0:
            raise NonPositiveRadicand(f"radicand {radicand:.6g} <= 0", x, p)
        return cls(x, p)


@dataclass(frozen=True, eq=False)
class MetricBundle:
    """All metric-level quantities at one point (x, p)."""

    x: np.ndarray
    p: np.ndarray
    n: int
    m: int
    K: float
    A: np.ndarray
    raw: tuple  # raw[r] = A_r, order r, r = 0..m
    a: dict  # a[r] = A_r / K^(m-r), r = 1..m
    gUp: np.ndarray
    gDown: np.ndarray
    a2_inv: np.ndarray
    h: np.ndarray
    C: np.ndarray
    I: np.ndarray

    @property
    def l(self):
        return self.a[1]

    @property
    def p_up(self):
        """p^s = g^{sj} p_j."""
        return self.gUp @ self.p


def raw_contractions(A, p):
    """[A_0, A_1, ..., A_m] with A_r of order r."""
    out = [A]
    for _ in range(A.ndim):
        out.append(out[-1] @ p)
    return tuple(reversed(out))


def reducibility_combination(a1, a2, a3):
    """a^{ijk} - a^{ij}a^k - a^{jk}a^i - a^{ki}a^j + 2 a^i a^j a^k."""
    return (
        a3
        - np.einsum("ij,k->ijk", a2, a1)
        - np.einsum("jk,i->ijk", a2, a1)
        - np.einsum("ki,j->ijk", a2, a1)
        + 2.0 * np.einsum("i,j,k->ijk", a1, a1, a1)
    )


def evaluate(spec, pt):
    n, m = spec.n, spec.m
    x, p = pt.x, pt.p
    A = spec.a.dense(x)
    raw = raw_contractions(A, p)
    R = float(raw[0])
    if not R > 0:
        raise NonPositiveRadicand(f"radicand {R:.6g} <= 0", x, p)
    K = R ** (1.0 / m)
    a = {r: raw[r] / K ** (m - r) for r in range(1, m + 1)}
    a1, a2 = a[1], a[2]
    if np.linalg.cond(a2) > COND_LIMIT:
        raise SingularMetric("a^{ij} is singular (condition number above 1e12)", x, p)
    a2_inv = np.linalg.inv(a2)
    gUp = (m - 1) * a2 - (m - 2) * np.outer(a1, a1)
    a_low = p / K
    gDown = a2_inv / (m - 1) + (m - 2) / (m - 1) * np.outer(a_low, a_low)
    h = (m - 1) * (a2 - np.outer(a1, a1))
    if m == 2:
        C = np.zeros((n, n, n))
    else:
        C = -(m - 1) * (m - 2) / (2.0 * K) * reducibility_combination(a1, a2, a[3])
    I = np.einsum("ijk,jk->i", C, gDown)
    return MetricBundle(x, p, n, m, K, A, raw, a, gUp, gDown, a2_inv, h, C, I)


def fundamental(spec, pt):
    R = float(contract(spec.a.dense(pt.x), pt.p, spec.m))
    if not R > 0:
        raise NonPositiveRadicand(f"radicand {R:.6g} <= 0", pt.x, pt.p)
    return R ** (1.0 / spec.m)


def a_tensor(spec, pt, r):
    if not 1 <= r <= spec.m:
        raise OrderOutOfRange(f"a-tensor order {r} outside [1, {spec.m}]")
    K = fundamental(spec, pt)
    arr = contract(spec.a.dense(pt.x), pt.p, spec.m - r) / K ** (spec.m - r)
    return SymValueTensor.from_dense(arr)


def metric_pair(spec, pt):
    b = evaluate(spec, pt)
    return b.gUp, b.gDown


def angular(spec, pt):
    return SymValueTensor.from_dense(evaluate(spec, pt).h)


def cartan_torsion(spec, pt):
    return SymValueTensor.from_dense(evaluate(spec, pt).C)


def mean_cartan(spec, pt):
    return evaluate(spec, pt).I


def vertical_derivatives(bundle):
    """Closed-form momentum derivatives of a^{ij}, a^i and a^i a^j.

    The derivative index is the last axis: ``out["a2"][i, j, k]`` is the
    p_k-derivative of a^{ij}.
    """
    m, K, n = bundle.m, bundle.K, bundle.n
    a1, a2 = bundle.a[1], bundle.a[2]
    if m == 2:
        d_a2 = np.zeros((n, n, n))
    else:
        d_a2 = (m - 2) / K * (bundle.a[3] - np.einsum("ij,k->ijk", a2, a1))
    d_a1 = (m - 1) / K * (a2 - np.outer(a1, a1))
    d_a1a1 = (m - 1) / K * (
        np.einsum("ik,j->ijk", a2, a1)
        + np.einsum("jk,i->ijk", a2, a1)
        - 2.0 * np.einsum("i,j,k->ijk", a1, a1, a1)
    )
    return {"a2": d_a2, "a1": d_a1, "a1a1": d_a1a1}


@dataclass(frozen=True, eq=False)
class XGradients:
    """Exact x-derivatives at a point; the derivative axis s comes first."""

    dR: np.ndarray
    dK: np.ndarray
    d_a2: np.ndarray
    d_sigma: np.ndarray
    sigma: float


def x_gradients(spec, bundle):
    m, K, p = spec.m, bundle.K, bundle.p
    dA = spec.a.dense_grad(bundle.x)
    dR = contract(dA, p, m)
    dK = dR / (m * K ** (m - 1))
    d_raw2 = contract(dA, p, m - 2)
    d_a2 = d_raw2 / K ** (m - 2) - (m - 2) * np.einsum("ij,s->sij", bundle.raw[2], dK) / K ** (m - 1)
    sigma, d_sigma = spec.volume(bundle.x), spec.volume.grad(bundle.x)
    return XGradients(dR, dK, d_a2, d_sigma, sigma)

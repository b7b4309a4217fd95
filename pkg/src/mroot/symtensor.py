"""Fully symmetric tensors with polynomial or real entries.

Multi-indices in the public API are 1-based, matching the index notation
of metric files. Dense numpy arrays used by the numerical engine are
0-based with one axis per index.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ArityExceeded, DuplicateOrbit, IndexOutOfRange

MAX_DIM = 8
MAX_ORDER = 6


def canonicalize(idx, n):
    """Return the non-decreasing representative of a 1-based multi-index."""
    idx = tuple(int(i) for i in idx)
    for i in idx:
        if not 1 <= i <= n:
            raise IndexOutOfRange(f"index {i} outside [1, {n}] in {idx}")
    return tuple(sorted(idx))


def orbit_size(idx):
    """Number of distinct orderings of a multi-index (multinomial coefficient)."""
    counts = {}
    for i in idx:
        counts[i] = counts.get(i, 0) + 1
    size = math.factorial(len(idx))
    for c in counts.values():
        size //= math.factorial(c)
    return size


def contract(arr, p, k):
    """Contract the last ``k`` axes of a dense array with ``p``."""
    if k > arr.ndim:
        raise ArityExceeded(f"cannot contract {k} slots of an order-{arr.ndim} tensor")
    for _ in range(k):
        arr = arr @ p
    return arr


def symmetrize(arr, axes=None):
    """Average ``arr`` over all permutations of the given axes."""
    if axes is None:
        axes = tuple(range(arr.ndim))
    axes = tuple(axes)
    if len(axes) < 2:
        return arr
    out = np.zeros_like(arr)
    base = list(range(arr.ndim))
    perms = list(itertools.permutations(axes))
    for perm in perms:
        order = base.copy()
        for src, dst in zip(axes, perm):
            order[src] = dst
        out = out + np.transpose(arr, order)
    return out / len(perms)


@dataclass(frozen=True)
class PolyField:
    """Sparse polynomial in the position coordinates x_1..x_n."""

    monomials: tuple = ()

    @classmethod
    def from_terms(cls, terms, n=None):
        acc = {}
        for exps, coef in terms:
            exps = tuple(int(e) for e in exps)
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            if n is not None and len(exps) != n:
                raise ValueError(f"exponent vector {exps} has length {len(exps)}, expected {n}")
            acc[exps] = acc.get(exps, 0.0) + float(coef)
        return cls(tuple(sorted((e, c) for e, c in acc.items() if c != 0.0)))

    @classmethod
    def constant(cls, value, n):
        return cls.from_terms([((0,) * n, value)])

    @property
    def is_zero(self):
        return not self.monomials

    @property
    def is_constant(self):
        return all(not any(e) for e, _ in self.monomials)

    @cached_property
    def _arrays(self):
        if not self.monomials:
            return np.zeros((0, 0), dtype=int), np.zeros(0)
        exps = np.array([e for e, _ in self.monomials], dtype=int)
        coefs = np.array([c for _, c in self.monomials])
        return exps, coefs

    def __call__(self, x):
        exps, coefs = self._arrays
        if not len(coefs):
            return 0.0
        x = np.asarray(x, dtype=float)
        return float(coefs @ np.prod(x ** exps, axis=1))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        exps, coefs = self._arrays
        out = np.zeros(len(x))
        if not len(coefs):
            return out
        for k in range(len(x)):
            lowered = exps.copy()
            lowered[:, k] = np.maximum(lowered[:, k] - 1, 0)
            out[k] = (coefs * exps[:, k]) @ np.prod(x ** lowered, axis=1)
        return out

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        n = len(x)
        exps, coefs = self._arrays
        out = np.zeros((n, n))
        if not len(coefs):
            return out
        for a in range(n):
            for b in range(a, n):
                lowered = exps.copy()
                lowered[:, a] -= 1
                lowered[:, b] -= 1
                if a == b:
                    factor = exps[:, a] * (exps[:, a] - 1)
                else:
                    factor = exps[:, a] * exps[:, b]
                lowered = np.maximum(lowered, 0)
                out[a, b] = out[b, a] = (coefs * factor) @ np.prod(x ** lowered, axis=1)
        return out

    def __add__(self, other):
        return PolyField.from_terms(list(self.monomials) + list(other.monomials))

    def scale(self, factor):
        return PolyField.from_terms([(e, factor * c) for e, c in self.monomials])


def poly_eval_grad(f, x):
    """Exact value and x-gradient of a polynomial field."""
    return f(x), f.grad(x)


@dataclass(frozen=True)
class SymCoeffTensor:
    """Symmetric order-m tensor whose entries are polynomials in x.

    ``entries`` maps canonical 1-based multi-indices to the common value of
    every component in that permutation orbit.
    """

    n: int
    m: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 2 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension n={self.n} outside [2, {MAX_DIM}]")
        if not 2 <= self.m <= MAX_ORDER:
            raise ValueError(f"order m={self.m} outside [2, {MAX_ORDER}]")

    def __eq__(self, other):
        if not isinstance(other, SymCoeffTensor):
            return NotImplemented
        return (self.n, self.m, self._nonzero) == (other.n, other.m, other._nonzero)

    def __hash__(self):
        return hash((self.n, self.m, tuple(sorted(self._nonzero.items()))))

    @cached_property
    def _nonzero(self):
        return {k: v for k, v in self.entries.items() if not v.is_zero}

    def lookup(self, idx):
        key = canonicalize(idx, self.n)
        if len(key) != self.m:
            raise IndexOutOfRange(f"multi-index {idx} has length {len(key)}, expected {self.m}")
        return self.entries.get(key, PolyField())

    @property
    def is_constant(self):
        return all(f.is_constant for f in self.entries.values())

    @cached_property
    def _orbits(self):
        orbits = []
        for key, poly in sorted(self._nonzero.items()):
            perms = np.array(sorted(set(itertools.permutations(k - 1 for k in key))))
            orbits.append((poly, tuple(perms.T)))
        return orbits

    def dense(self, x):
        out = np.zeros((self.n,) * self.m)
        for poly, where in self._orbits:
            out[where] = poly(x)
        return out

    def dense_grad(self, x):
        """Array of shape (n,)*(m+1); axis 0 is the derivative direction."""
        out = np.zeros((self.n,) * (self.m + 1))
        for poly, where in self._orbits:
            out[(slice(None),) + where] = poly.grad(x)[:, None]
        return out

    def dense_hess(self, x):
        out = np.zeros((self.n,) * (self.m + 2))
        for poly, where in self._orbits:
            out[(slice(None), slice(None)) + where] = poly.hess(x)[:, :, None]
        return out


def build_from_representatives(n, m, entries):
    """Build a symmetric coefficient tensor from one entry per orbit.

    ``entries`` is an iterable of (1-based multi-index, PolyField). The value
    given is the symmetric component itself, not the orbit sum.
    """
    table = {}
    for idx, poly in entries:
        if len(idx) != m:
            raise IndexOutOfRange(f"multi-index {tuple(idx)} has length {len(idx)}, expected {m}")
        key = canonicalize(idx, n)
        if key in table:
            raise DuplicateOrbit(f"orbit of {key} given more than once")
        table[key] = poly
    return SymCoeffTensor(n, m, table)


def _canonical_list(n, r):
    return list(itertools.combinations_with_replacement(range(n), r))


@dataclass(frozen=True, eq=False)
class SymValueTensor:
    """Point value of a symmetric tensor in packed canonical storage."""

    n: int
    order: int
    values: np.ndarray

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 0:
            return cls(1, 0, arr.reshape(1))
        n = arr.shape[0]
        keys = _canonical_list(n, arr.ndim)
        return cls(n, arr.ndim, np.array([arr[k] for k in keys]))

    def dense(self):
        if self.order == 0:
            return np.array(self.values[0])
        out = np.zeros((self.n,) * self.order)
        for value, key in zip(self.values, _canonical_list(self.n, self.order)):
            for perm in set(itertools.permutations(key)):
                out[perm] = value
        return out

    @property
    def scalar(self):
        if self.order != 0:
            raise ArityExceeded("not an order-0 tensor")
        return float(self.values[0])

    def __getitem__(self, idx):
        if isinstance(idx, int):
            idx = (idx,)
        key = tuple(k - 1 for k in canonicalize(idx, self.n))
        if len(key) != self.order:
            raise IndexOutOfRange(f"multi-index {idx} has length {len(key)}, expected {self.order}")
        return float(self.values[_canonical_list(self.n, self.order).index(key)])


def contract_momenta(tensor, p, k, x=None):
    """Contract ``k`` slots of a symmetric tensor with the momentum ``p``."""
    p = np.asarray(p, dtype=float)
    if isinstance(tensor, SymCoeffTensor):
        if x is None:
            raise ValueError("position x is required to evaluate a coefficient tensor")
        if k > tensor.m:
            raise ArityExceeded(f"cannot contract {k} slots of an order-{tensor.m} tensor")
        arr = tensor.dense(x)
    else:
        if k > tensor.order:
            raise ArityExceeded(f"cannot contract {k} slots of an order-{tensor.order} tensor")
        arr = tensor.dense()
    return SymValueTensor.from_dense(contract(arr, p, k))

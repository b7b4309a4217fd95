"""Central finite differences with one Richardson extrapolation.

Used only as an independent oracle against the closed-form paths.
"""

import numpy as np

STEP = 1e-5
STEP_SECOND = 1e-3


def step_for(z, rel=STEP):
    return rel * max(1.0, float(np.linalg.norm(z)))


def gradient(f, z, h=None):
    """Derivative of ``f`` at ``z``; the derivative axis is appended last."""
    z = np.asarray(z, dtype=float)
    if h is None:
        h = step_for(z)

    def central(step):
        cols = []
        for k in range(len(z)):
            e = np.zeros_like(z)
            e[k] = step
            cols.append((np.asarray(f(z + e)) - np.asarray(f(z - e))) / (2.0 * step))
        return np.stack(cols, axis=-1)

    coarse = central(h)
    fine = central(h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def hessian(f, z, h=None):
    z = np.asarray(z, dtype=float)
    if h is None:
        h = step_for(z, STEP_SECOND)
    return gradient(lambda w: gradient(f, w, h), z, h)


def rel_error(approx, reference, scale=0.0):
    """max|approx - reference| / max(max|reference|, scale); 0 when both vanish."""
    diff = float(np.max(np.abs(np.asarray(approx) - np.asarray(reference)), initial=0.0))
    denom = max(float(np.max(np.abs(reference), initial=0.0)), scale)
    if denom == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / denom


def complex_step_gradient(f, z, h=1e-30):
    """Im f(z + i h e_k) / h: first derivatives free of subtractive cancellation.

    ``f`` must be holomorphic and accept complex input.
    """
    z = np.asarray(z, dtype=float)
    cols = []
    for k in range(len(z)):
        w = z.astype(complex)
        w[k] += 1j * h
        cols.append(np.imag(f(w)) / h)
    return np.stack(cols, axis=-1)

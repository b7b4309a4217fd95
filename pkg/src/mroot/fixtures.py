"""Built-in metrics used by tests and by ``mroot check``."""

from .metric import MetricSpec
from .symtensor import PolyField, build_from_representatives


def _poly(*terms):
    return PolyField.from_terms(terms)


def _const(n, c):
    return PolyField.constant(c, n)


def euc4():
    """(p1^2 + p2^2)^2 written as a quartic: Euclidean in disguise."""
    a = build_from_representatives(
        2, 4, [((1, 1, 1, 1), _const(2, 1.0)), ((2, 2, 2, 2), _const(2, 1.0)), ((1, 1, 2, 2), _const(2, 1 / 3))]
    )
    return MetricSpec(2, 4, a, name="M_EUC4")


def cub():
    """K^3 = p1^3 + p2^3."""
    a = build_from_representatives(2, 3, [((1, 1, 1), _const(2, 1.0)), ((2, 2, 2), _const(2, 1.0))])
    return MetricSpec(2, 3, a, name="M_CUB")


def x_cubic():
    """K^3 = (1 + x1) p1^3 + p2^3, a Berwald metric with closed-form spray."""
    a = build_from_representatives(
        2, 3, [((1, 1, 1), _poly(((0, 0), 1.0), ((1, 0), 1.0))), ((2, 2, 2), _const(2, 1.0))]
    )
    return MetricSpec(2, 3, a, name="M_X")


def berwald_moor():
    """K^3 = 6 p1 p2 p3."""
    a = build_from_representatives(3, 3, [((1, 2, 3), _const(3, 1.0))])
    return MetricSpec(3, 3, a, name="M_BM")


def riemann2():
    """m = 2 control: a^{ij} = delta."""
    a = build_from_representatives(2, 2, [((1, 1), _const(2, 1.0)), ((2, 2), _const(2, 1.0))])
    return MetricSpec(2, 2, a, name="M_RIEM2")


def gen4():
    """Position-dependent quartic with no special structure."""
    a = build_from_representatives(
        2,
        4,
        [
            ((1, 1, 1, 1), _poly(((0, 0), 1.0), ((0, 1), 0.5))),
            ((1, 1, 1, 2), _poly(((1, 1), 0.1))),
            ((1, 1, 2, 2), _poly(((0, 0), 1 / 3), ((1, 0), 0.1))),
            ((1, 2, 2, 2), _const(2, 0.05)),
            ((2, 2, 2, 2), _poly(((0, 0), 1.0), ((2, 0), 1.0))),
        ],
    )
    return MetricSpec(2, 4, a, name="M_GEN4")


FIXTURES = {
    "M_EUC4": (euc4, (0.0, 0.0)),
    "M_CUB": (cub, (0.0, 0.0)),
    "M_X": (x_cubic, (0.0, 0.0)),
    "M_BM": (berwald_moor, (0.0, 0.0, 0.0)),
    "M_RIEM2": (riemann2, (0.0, 0.0)),
    "M_GEN4": (gen4, (0.3, 0.2)),
}


def fixture(name):
    build, _ = FIXTURES[name]
    return build()


def default_x(name):
    return FIXTURES[name][1]

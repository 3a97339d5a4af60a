"""Constraint manifolds: data model, named registry, and evaluation ops.

A manifold is the zero set ``M = {z in R^n : f(z) = 0}`` of a smooth map
``f: R^n -> R^m`` with ``1 <= m < n``. Most built-in entries are *graph
lifts*: each constraint has the form ``f_i(z) = g_i(z_1..z_d) - z_{d+i}``
for a scalar graph function ``g_i`` over the first ``d`` coordinates, so
the manifold is globally parametrized by its base coordinates and the
constraint Jacobian has full row rank everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError
from .expressions import compile_expression

__all__ = [
    "Convexity",
    "GraphFn",
    "GraphLift",
    "Constraint",
    "ManifoldSpec",
    "eval_f",
    "eval_jacobian",
    "eval_hessians",
    "spec_from_graphs",
    "spec_from_config",
    "load_manifold_config",
    "registry_get",
    "registry_names",
]

_EPS = float(np.finfo(float).eps)
# Central-difference steps: cube root of eps for first derivatives,
# quartic root for second derivatives (optimal truncation/round-off).
_GRAD_STEP = _EPS ** (1.0 / 3.0)
_HESS_STEP = _EPS ** 0.25


class Convexity(Enum):
    """Declared shape of a constraint's level regions.

    ``CONVEX_SUBLEVEL`` asserts ``{z : f_i(z) <= 0}`` is convex,
    ``CONVEX_SUPERLEVEL`` asserts ``{z : f_i(z) >= 0}`` is convex, and
    ``UNKNOWN`` makes no claim (and enables no guarantee checks).
    """

    CONVEX_SUBLEVEL = "convex-sublevel"
    CONVEX_SUPERLEVEL = "convex-superlevel"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class GraphFn:
    """Scalar graph function over base coordinates, with optional derivatives.

    ``value(*coords)`` must evaluate elementwise so arrays broadcast through;
    ``gradient`` returns the ``d`` partials, ``hessian`` a ``(d, d)`` array.
    Missing derivatives fall back to central finite differences.
    """

    value: Callable
    gradient: Callable | None = None
    hessian: Callable | None = None


@dataclass(frozen=True)
class GraphLift:
    """Collection of graph functions lifting R^d points onto the manifold."""

    base_dim: int
    graphs: tuple[GraphFn, ...]

    def __post_init__(self):
        if self.base_dim < 1:
            raise ValueError("base_dim must be >= 1")
        if not self.graphs:
            raise ValueError("at least one graph function is required")

    @property
    def ambient_dim(self) -> int:
        return self.base_dim + len(self.graphs)

    def lift(self, base: np.ndarray) -> np.ndarray:
        """Map base coordinates to ambient points satisfying every constraint.

        Accepts a single point of shape ``(base_dim,)`` or a stack of shape
        ``(T, base_dim)``. Graph values are evaluated per point with the same
        scalar code path the constraint evaluation uses, so lifted points
        satisfy ``f(z) = 0`` exactly in floating point.
        """
        base = np.asarray(base, dtype=float)
        single = base.ndim == 1
        rows = base[None, :] if single else base
        if rows.ndim != 2 or rows.shape[1] != self.base_dim:
            raise ValueError(f"expected base points of dimension {self.base_dim}")
        out = np.empty((rows.shape[0], self.ambient_dim))
        out[:, : self.base_dim] = rows
        for t in range(rows.shape[0]):
            coords = tuple(rows[t])
            for i, g in enumerate(self.graphs):
                out[t, self.base_dim + i] = g.value(*coords)
        return out[0] if single else out


@dataclass(frozen=True)
class Constraint:
    """One scalar constraint ``f_i`` over ambient coordinates.

    ``gradient`` and ``hessian`` are optional; evaluation ops substitute
    central finite differences when they are absent.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class ManifoldSpec:
    """Immutable description of a constraint manifold.

    Attributes:
        name: Display name used in CLI output and error messages.
        ambient_dim: Dimension ``n`` of the embedding space.
        constraints: The ``m`` scalar constraints, ``1 <= m < n``.
        convexity: Per-constraint :class:`Convexity` declarations.
        graph_lift: The generating :class:`GraphLift` when the manifold is a
            graph lift, else ``None``. Required by the data generator.
    """

    name: str
    ambient_dim: int
    constraints: tuple[Constraint, ...]
    convexity: tuple[Convexity, ...]
    graph_lift: GraphLift | None = field(default=None, compare=False)

    def __post_init__(self):
        m = len(self.constraints)
        if m < 1:
            raise ValueError("at least one constraint is required")
        if not (1 <= m < self.ambient_dim):
            raise ValueError(
                f"codimension must satisfy 1 <= m < n, got m={m}, n={self.ambient_dim}"
            )
        if len(self.convexity) != m:
            raise ValueError("convexity must declare one tag per constraint")

    @property
    def codim(self) -> int:
        return len(self.constraints)


# ---------------------------------------------------------------------------
# Evaluation operations


def _check_point(spec: ManifoldSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (spec.ambient_dim,):
        raise ValueError(
            f"point has shape {z.shape}, expected ({spec.ambient_dim},) for manifold "
            f"{spec.name!r}"
        )
    return z


def _fd_gradient(fn: Callable, z: np.ndarray) -> np.ndarray:
    n = z.size
    grad = np.empty(n)
    for j in range(n):
        h = _GRAD_STEP * max(1.0, abs(z[j]))
        zp = z.copy()
        zm = z.copy()
        zp[j] += h
        zm[j] -= h
        grad[j] = (fn(zp) - fn(zm)) / (2.0 * h)
    return grad


def _fd_hessian(fn: Callable, z: np.ndarray) -> np.ndarray:
    n = z.size
    steps = np.array([_HESS_STEP * max(1.0, abs(z[j])) for j in range(n)])
    hess = np.empty((n, n))
    f0 = fn(z)
    for j in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[j] += steps[j]
        zm[j] -= steps[j]
        hess[j, j] = (fn(zp) - 2.0 * f0 + fn(zm)) / steps[j] ** 2
    for j in range(n):
        for k in range(j + 1, n):
            zpp = z.copy()
            zpm = z.copy()
            zmp = z.copy()
            zmm = z.copy()
            zpp[j] += steps[j]
            zpp[k] += steps[k]
            zpm[j] += steps[j]
            zpm[k] -= steps[k]
            zmp[j] -= steps[j]
            zmp[k] += steps[k]
            zmm[j] -= steps[j]
            zmm[k] -= steps[k]
            value = (fn(zpp) - fn(zpm) - fn(zmp) + fn(zmm)) / (4.0 * steps[j] * steps[k])
            hess[j, k] = value
            hess[k, j] = value
    return hess


def eval_f(spec: ManifoldSpec, z) -> np.ndarray:
    """Evaluate the constraint vector ``f(z)``, shape ``(m,)``."""
    z = _check_point(spec, z)
    out = np.array([float(c.value(z)) for c in spec.constraints])
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"constraint value is not finite at z={z!r}")
    return out


def eval_jacobian(spec: ManifoldSpec, z) -> np.ndarray:
    """Evaluate the constraint Jacobian ``J(z)``, shape ``(m, n)``.

    Uses analytic gradients when the constraint provides them, otherwise
    central finite differences with per-coordinate steps
    ``h_j = eps^(1/3) * max(1, |z_j|)``.
    """
    z = _check_point(spec, z)
    n = spec.ambient_dim
    rows = np.empty((spec.codim, n))
    for i, c in enumerate(spec.constraints):
        row = np.asarray(c.gradient(z), dtype=float) if c.gradient is not None else _fd_gradient(c.value, z)
        if row.shape != (n,):
            raise EvaluationError(
                f"gradient of constraint {i} has shape {row.shape}, expected ({n},)"
            )
        rows[i] = row
    if not np.all(np.isfinite(rows)):
        raise EvaluationError(f"constraint Jacobian is not finite at z={z!r}")
    return rows


def eval_hessians(spec: ManifoldSpec, z) -> np.ndarray:
    """Evaluate all constraint Hessians, shape ``(m, n, n)``.

    Each Hessian must be symmetric to within ``1e-10`` relative Frobenius
    norm; the returned matrices are exactly symmetrized.
    """
    z = _check_point(spec, z)
    n = spec.ambient_dim
    out = np.empty((spec.codim, n, n))
    for i, c in enumerate(spec.constraints):
        hess = np.asarray(c.hessian(z), dtype=float) if c.hessian is not None else _fd_hessian(c.value, z)
        if hess.shape != (n, n):
            raise EvaluationError(
                f"hessian of constraint {i} has shape {hess.shape}, expected ({n}, {n})"
            )
        if not np.all(np.isfinite(hess)):
            raise EvaluationError(f"constraint Hessian is not finite at z={z!r}")
        asym = np.linalg.norm(hess - hess.T)
        if asym > 1e-10 * max(1.0, np.linalg.norm(hess)):
            raise EvaluationError(
                f"hessian of constraint {i} is asymmetric (relative residual {asym:.3e})"
            )
        out[i] = 0.5 * (hess + hess.T)
    return out


# ---------------------------------------------------------------------------
# Spec builders


def _lifted_constraint(lift: GraphLift, i: int) -> Constraint:
    d = lift.base_dim
    n = lift.ambient_dim
    g = lift.graphs[i]

    def value(z, _g=g, _d=d, _i=i):
        return _g.value(*z[:_d]) - z[_d + _i]

    gradient = None
    if g.gradient is not None:

        def gradient(z, _g=g, _d=d, _n=n, _i=i):
            out = np.zeros(_n)
            out[:_d] = _g.gradient(*z[:_d])
            out[_d + _i] = -1.0
            return out

    hessian = None
    if g.hessian is not None:

        def hessian(z, _g=g, _d=d, _n=n):
            out = np.zeros((_n, _n))
            out[:_d, :_d] = _g.hessian(*z[:_d])
            return out

    return Constraint(value=value, gradient=gradient, hessian=hessian)


def spec_from_graphs(
    name: str,
    graphs: Sequence[GraphFn],
    convexity: Sequence[Convexity] | Convexity,
    base_dim: int = 2,
) -> ManifoldSpec:
    """Assemble a :class:`ManifoldSpec` from graph functions over R^base_dim."""
    lift = GraphLift(base_dim=base_dim, graphs=tuple(graphs))
    if isinstance(convexity, Convexity):
        tags = (convexity,) * len(lift.graphs)
    else:
        tags = tuple(convexity)
    constraints = tuple(_lifted_constraint(lift, i) for i in range(len(lift.graphs)))
    return ManifoldSpec(
        name=name,
        ambient_dim=lift.ambient_dim,
        constraints=constraints,
        convexity=tags,
        graph_lift=lift,
    )


# ---------------------------------------------------------------------------
# Built-in registry

# smoothing constant making the absolute-value surface C^2; kept wide enough
# that central differences resolve the curvature near the kink
_SMOOTH = 1e-2


def _abs_term(x):
    return np.sqrt(x * x + _SMOOTH)


def _ackley_value(a, b):
    r = np.sqrt(0.5 * (a * a + b * b))
    return (
        -20.0 * np.exp(-0.2 * r)
        - np.exp(0.5 * (np.cos(2.0 * np.pi * a) + np.cos(2.0 * np.pi * b)))
        + math.e
        + 20.0
    )


def _ackley_gradient(a, b):
    r = np.sqrt(0.5 * (a * a + b * b))
    u = np.exp(-0.2 * r)
    v = np.exp(0.5 * (np.cos(2.0 * np.pi * a) + np.cos(2.0 * np.pi * b)))
    two_pi = 2.0 * np.pi
    da = 2.0 * u * a / r + np.pi * v * np.sin(two_pi * a)
    db = 2.0 * u * b / r + np.pi * v * np.sin(two_pi * b)
    return (da, db)


def _ackley_hessian(a, b):
    r = np.sqrt(0.5 * (a * a + b * b))
    u = np.exp(-0.2 * r)
    v = np.exp(0.5 * (np.cos(2.0 * np.pi * a) + np.cos(2.0 * np.pi * b)))
    two_pi = 2.0 * np.pi
    sa, ca = np.sin(two_pi * a), np.cos(two_pi * a)
    sb, cb = np.sin(two_pi * b), np.cos(two_pi * b)
    haa = 2.0 * u * (-0.1 * a * a / r**2 + 1.0 / r - a * a / (2.0 * r**3)) + np.pi * v * (
        two_pi * ca - np.pi * sa * sa
    )
    hbb = 2.0 * u * (-0.1 * b * b / r**2 + 1.0 / r - b * b / (2.0 * r**3)) + np.pi * v * (
        two_pi * cb - np.pi * sb * sb
    )
    hab = 2.0 * u * a * b * (-0.1 / r**2 - 0.5 / r**3) - np.pi**2 * v * sa * sb
    return np.array([[haa, hab], [hab, hbb]])


def _build_registry() -> dict[str, ManifoldSpec]:
    sub = Convexity.CONVEX_SUBLEVEL
    unk = Convexity.UNKNOWN

    paraboloid = GraphFn(
        value=lambda a, b: a * a + b * b,
        gradient=lambda a, b: (2.0 * a, 2.0 * b),
        hessian=lambda a, b: np.array([[2.0, 0.0], [0.0, 2.0]]),
    )
    quartic = GraphFn(
        value=lambda a, b: a**4 + b**4,
        gradient=lambda a, b: (4.0 * a**3, 4.0 * b**3),
        hessian=lambda a, b: np.diag([12.0 * a * a, 12.0 * b * b]),
    )
    mixed_quadratic = GraphFn(
        value=lambda a, b: a * a + a * b + b * b,
        gradient=lambda a, b: (2.0 * a + b, a + 2.0 * b),
        hessian=lambda a, b: np.array([[2.0, 1.0], [1.0, 2.0]]),
    )
    exponential = GraphFn(
        value=lambda a, b: np.exp(a) + np.exp(b),
        gradient=lambda a, b: (np.exp(a), np.exp(b)),
        hessian=lambda a, b: np.diag([np.exp(a), np.exp(b)]),
    )
    smooth_abs = GraphFn(
        value=lambda a, b: _abs_term(a) + _abs_term(b),
        gradient=lambda a, b: (a / _abs_term(a), b / _abs_term(b)),
        hessian=lambda a, b: np.diag([_SMOOTH / _abs_term(a) ** 3, _SMOOTH / _abs_term(b) ** 3]),
    )
    himmelblau = GraphFn(
        value=lambda a, b: (a * a + b - 11.0) ** 2 + (a + b * b - 7.0) ** 2,
        gradient=lambda a, b: (
            4.0 * a * (a * a + b - 11.0) + 2.0 * (a + b * b - 7.0),
            2.0 * (a * a + b - 11.0) + 4.0 * b * (a + b * b - 7.0),
        ),
        hessian=lambda a, b: np.array(
            [
                [4.0 * (a * a + b - 11.0) + 8.0 * a * a + 2.0, 4.0 * a + 4.0 * b],
                [4.0 * a + 4.0 * b, 4.0 * (a + b * b - 7.0) + 8.0 * b * b + 2.0],
            ]
        ),
    )
    ackley = GraphFn(value=_ackley_value, gradient=_ackley_gradient, hessian=_ackley_hessian)
    rastring = GraphFn(
        value=lambda a, b: 20.0
        + a * a
        - 10.0 * np.cos(2.0 * np.pi * a)
        + b * b
        - 10.0 * np.cos(2.0 * np.pi * b),
        gradient=lambda a, b: (
            2.0 * a + 20.0 * np.pi * np.sin(2.0 * np.pi * a),
            2.0 * b + 20.0 * np.pi * np.sin(2.0 * np.pi * b),
        ),
        hessian=lambda a, b: np.diag(
            [
                2.0 + 40.0 * np.pi**2 * np.cos(2.0 * np.pi * a),
                2.0 + 40.0 * np.pi**2 * np.cos(2.0 * np.pi * b),
            ]
        ),
    )
    rosenbrock = GraphFn(
        value=lambda a, b: (1.0 - a) ** 2 + 100.0 * (b - a * a) ** 2,
        gradient=lambda a, b: (
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ),
        hessian=lambda a, b: np.array(
            [
                [2.0 - 400.0 * (b - a * a) + 800.0 * a * a, -400.0 * a],
                [-400.0 * a, 200.0],
            ]
        ),
    )
    shifted_quad = GraphFn(
        value=lambda a, b: (a - 1.0) ** 2 + b * b,
        gradient=lambda a, b: (2.0 * (a - 1.0), 2.0 * b),
        hessian=lambda a, b: np.array([[2.0, 0.0], [0.0, 2.0]]),
    )
    quad_of_quad = GraphFn(
        value=lambda a, b: (a * a + b * b) ** 2,
        gradient=lambda a, b: (
            4.0 * (a * a + b * b) * a,
            4.0 * (a * a + b * b) * b,
        ),
        hessian=lambda a, b: np.array(
            [
                [12.0 * a * a + 4.0 * b * b, 8.0 * a * b],
                [8.0 * a * b, 4.0 * a * a + 12.0 * b * b],
            ]
        ),
    )
    shifted_quartic = GraphFn(
        value=lambda a, b: (a - 1.0) ** 4 + (b - 1.0) ** 4,
        gradient=lambda a, b: (4.0 * (a - 1.0) ** 3, 4.0 * (b - 1.0) ** 3),
        hessian=lambda a, b: np.diag([12.0 * (a - 1.0) ** 2, 12.0 * (b - 1.0) ** 2]),
    )
    # Bowl plus a sine ripple; the ripple Hessian never outweighs the bowl,
    # so sublevel sets stay convex.
    bowl_sin = GraphFn(
        value=lambda a, b: a * a + b * b + 0.5 * np.sin(a + b),
        gradient=lambda a, b: (
            2.0 * a + 0.5 * np.cos(a + b),
            2.0 * b + 0.5 * np.cos(a + b),
        ),
        hessian=lambda a, b: np.array(
            [
                [2.0 - 0.5 * np.sin(a + b), -0.5 * np.sin(a + b)],
                [-0.5 * np.sin(a + b), 2.0 - 0.5 * np.sin(a + b)],
            ]
        ),
    )
    cosh_sum = GraphFn(
        value=lambda a, b: np.cosh(a) + np.cosh(b),
        gradient=lambda a, b: (np.sinh(a), np.sinh(b)),
        hessian=lambda a, b: np.diag([np.cosh(a), np.cosh(b)]),
    )
    ring = GraphFn(
        value=lambda a, b: (a * a + b * b - 1.0) ** 2,
        gradient=lambda a, b: (
            4.0 * (a * a + b * b - 1.0) * a,
            4.0 * (a * a + b * b - 1.0) * b,
        ),
        hessian=lambda a, b: np.array(
            [
                [4.0 * (a * a + b * b - 1.0) + 8.0 * a * a, 8.0 * a * b],
                [8.0 * a * b, 4.0 * (a * a + b * b - 1.0) + 8.0 * b * b],
            ]
        ),
    )
    trig = GraphFn(
        value=lambda a, b: np.sin(2.0 * a) + np.cos(2.0 * b),
        gradient=lambda a, b: (2.0 * np.cos(2.0 * a), -2.0 * np.sin(2.0 * b)),
        hessian=lambda a, b: np.diag([-4.0 * np.sin(2.0 * a), -4.0 * np.cos(2.0 * b)]),
    )
    saddle = GraphFn(
        value=lambda a, b: a * a - b * b,
        gradient=lambda a, b: (2.0 * a, -2.0 * b),
        hessian=lambda a, b: np.array([[2.0, 0.0], [0.0, -2.0]]),
    )
    monkey = GraphFn(
        value=lambda a, b: a**3 - 3.0 * a * b * b,
        gradient=lambda a, b: (3.0 * a * a - 3.0 * b * b, -6.0 * a * b),
        hessian=lambda a, b: np.array([[6.0 * a, -6.0 * b], [-6.0 * b, -6.0 * a]]),
    )
    line_1d = GraphFn(
        value=lambda a: a,
        gradient=lambda a: (1.0,),
        hessian=lambda a: np.array([[0.0]]),
    )
    square_1d = GraphFn(
        value=lambda a: a * a,
        gradient=lambda a: (2.0 * a,),
        hessian=lambda a: np.array([[2.0]]),
    )

    specs = [
        # Hypersurfaces over a planar base.
        spec_from_graphs("paraboloid", [paraboloid], sub),
        spec_from_graphs("quartic", [quartic], sub),
        spec_from_graphs("mixed-quadratic", [mixed_quadratic], sub),
        spec_from_graphs("exponential", [exponential], sub),
        spec_from_graphs("abs", [smooth_abs], sub),
        spec_from_graphs("himmelblau", [himmelblau], unk),
        spec_from_graphs("ackley", [ackley], unk),
        spec_from_graphs("rastring", [rastring], unk),
        spec_from_graphs("rosenbrock", [rosenbrock], unk),
        # Codimension-2 systems over a planar base.
        spec_from_graphs("quad-quad", [paraboloid, shifted_quad], sub),
        spec_from_graphs("quad-qq", [paraboloid, quad_of_quad], sub),
        spec_from_graphs("e2-s2", [exponential, paraboloid], sub),
        spec_from_graphs("4d-4d", [quartic, shifted_quartic], sub),
        spec_from_graphs("bowl-sin", [paraboloid, bowl_sin], sub),
        spec_from_graphs("exp-cosh", [exponential, cosh_sum], unk),
        spec_from_graphs("ring-trig", [ring, trig], unk),
        spec_from_graphs("saddle-poly", [saddle, monkey], unk),
        # Low-dimensional worked examples over a scalar base.
        spec_from_graphs("parabola", [square_1d], sub, base_dim=1),
        spec_from_graphs("line-parabola", [line_1d, square_1d], sub, base_dim=1),
    ]
    return {spec.name: spec for spec in specs}


_REGISTRY = _build_registry()
_ALIASES = {"rastrigin": "rastring"}


def registry_names() -> list[str]:
    """Canonical names of the built-in manifolds, sorted."""
    return sorted(_REGISTRY)


def registry_get(name: str) -> ManifoldSpec:
    """Look up a built-in manifold by name.

    Lookup is case-insensitive and tolerates omitted hyphens, so
    ``"MixedQuadratic"`` resolves to ``"mixed-quadratic"``.

    Raises:
        LookupError: If the name is unknown; the message lists all
            available names.
    """
    if not isinstance(name, str):
        raise LookupError("manifold name must be a string")
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key in _REGISTRY:
        return _REGISTRY[key]
    squashed = key.replace("-", "").replace("_", "")
    for canonical in _REGISTRY:
        if canonical.replace("-", "") == squashed:
            return _REGISTRY[canonical]
    raise LookupError(
        f"unknown manifold {name!r}; available: {', '.join(registry_names())}"
    )


# ---------------------------------------------------------------------------
# Declarative configs

_TAG_VALUES = {c.value: c for c in Convexity}


def _parse_tags(raw, count: int) -> tuple[Convexity, ...]:
    if raw is None:
        return (Convexity.UNKNOWN,) * count
    if isinstance(raw, str):
        raw = [raw] * count
    tags = []
    for item in raw:
        if item not in _TAG_VALUES:
            raise ValueError(
                f"convexity tag must be one of {sorted(_TAG_VALUES)}, got {item!r}"
            )
        tags.append(_TAG_VALUES[item])
    if len(tags) != count:
        raise ValueError(f"expected {count} convexity tags, got {len(tags)}")
    return tuple(tags)


def spec_from_config(config: dict) -> ManifoldSpec:
    """Build a manifold from a declarative config dictionary.

    Two layouts are accepted. Graph form::

        {"name": "my-surface", "base_dim": 2,
         "graphs": ["a^2 + b^2", "exp(a) + cosh(b)"],
         "convexity": ["convex-sublevel", "unknown"]}

    expressions use base variables ``a`` (and ``b`` when ``base_dim`` is 2).
    Ambient form::

        {"name": "w-curve", "ambient_dim": 2, "constraints": ["z1^4 - 3*z1^2 + z2^2"]}

    expressions use ambient variables ``z1 .. zn``. Derivatives of
    expression-built constraints come from finite differences.
    """
    if not isinstance(config, dict):
        raise ValueError("manifold config must be a mapping")
    name = config.get("name")
    if not isinstance(name, str) or not name:
        raise ValueError("config field 'name' must be a non-empty string")
    has_graphs = "graphs" in config
    has_constraints = "constraints" in config
    if has_graphs == has_constraints:
        raise ValueError("config must contain exactly one of 'graphs' or 'constraints'")

    if has_graphs:
        base_dim = config.get("base_dim", 2)
        if base_dim not in (1, 2):
            raise ValueError("config field 'base_dim' must be 1 or 2")
        variables = ("a", "b")[:base_dim]
        exprs = config["graphs"]
        if not isinstance(exprs, list) or not exprs:
            raise ValueError("config field 'graphs' must be a non-empty list of expressions")
        graphs = [GraphFn(value=compile_expression(text, variables)) for text in exprs]
        tags = _parse_tags(config.get("convexity"), len(graphs))
        return spec_from_graphs(name, graphs, tags, base_dim=base_dim)

    ambient_dim = config.get("ambient_dim")
    if not isinstance(ambient_dim, int) or ambient_dim < 2:
        raise ValueError("config field 'ambient_dim' must be an integer >= 2")
    exprs = config["constraints"]
    if not isinstance(exprs, list) or not exprs:
        raise ValueError("config field 'constraints' must be a non-empty list of expressions")
    variables = tuple(f"z{j + 1}" for j in range(ambient_dim))
    compiled = [compile_expression(text, variables) for text in exprs]
    constraints = tuple(
        Constraint(value=(lambda fn: lambda z: fn(*z))(fn)) for fn in compiled
    )
    tags = _parse_tags(config.get("convexity"), len(constraints))
    return ManifoldSpec(
        name=name, ambient_dim=ambient_dim, constraints=constraints, convexity=tags
    )


def load_manifold_config(path) -> ManifoldSpec:
    """Load a JSON manifold config file; see :func:`spec_from_config`."""
    with open(path, "r", encoding="utf-8") as handle:
        return spec_from_config(json.load(handle))

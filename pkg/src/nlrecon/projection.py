"""Weighted orthogonal projection onto constraint manifolds.

Solves ``min_z ||z - z_hat||_W  s.t.  f(z) = 0`` through its first-order
conditions: with multipliers ``lam``, the residual

    F(z, lam) = [ 2 W (z - z_hat) + J(z)^T lam ;  f(z) ]

is driven to zero by a damped Newton iteration started from
``(z_hat, 0)``. Optional Gaussian restarts perturb the start point and the
best converged solution by weighted distance is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, ProjectionError, SingularKKTError
from .manifolds import (
    Constraint,
    Convexity,
    ManifoldSpec,
    eval_f,
    eval_hessians,
    eval_jacobian,
)

__all__ = [
    "SolverOptions",
    "ProjectionResult",
    "project",
    "batch_project",
    "GraphMap",
    "FaseResult",
    "fase_reconcile",
]

NEWTON_FULL = "full"
NEWTON_AS_PRINTED = "as-printed"

_ARMIJO = 1e-4
_BACKTRACK = 0.5


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs for :func:`project`.

    Attributes:
        tol_f: Feasibility tolerance on ``max_i |f_i(z)|``.
        tol_g: Stationarity tolerance on the max-norm of the Lagrangian
            gradient ``2 W (z - z_hat) + J^T lam``.
        max_iters: Cap on accepted Newton steps per attempt.
        restarts: Total solve attempts. The first starts at ``z_hat``;
            attempt ``r >= 1`` starts from a Gaussian perturbation with
            scale ``perturbation * (1 + ||z_hat||)``.
        perturbation: Restart perturbation scale factor.
        min_step: Smallest backtracking step before an attempt is abandoned.
        newton_mode: ``"full"`` includes the multiplier-weighted constraint
            Hessians in the Newton matrix; ``"as-printed"`` keeps only the
            ``[[2W, J^T], [J, 0]]`` blocks. Both coincide on affine
            constraints.
        seed: Base seed for restart perturbations; combined with the point
            index and restart counter so batches are order-independent.
    """

    tol_f: float = 1e-10
    tol_g: float = 1e-8
    max_iters: int = 100
    restarts: int = 1
    perturbation: float = 0.1
    min_step: float = 1e-10
    newton_mode: str = NEWTON_FULL
    seed: int = 0

    def __post_init__(self):
        if self.tol_f <= 0 or self.tol_g <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.perturbation < 0:
            raise ValueError("perturbation must be nonnegative")
        if not (0 < self.min_step < 1):
            raise ValueError("min_step must lie in (0, 1)")
        if self.newton_mode not in (NEWTON_FULL, NEWTON_AS_PRINTED):
            raise ValueError(f"newton_mode must be {NEWTON_FULL!r} or {NEWTON_AS_PRINTED!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of one projection.

    Attributes:
        z_tilde: Reconciled point.
        lam: KKT multipliers (one per constraint).
        delta_pi: Projection displacement ``z_tilde - z_hat``.
        iterations: Accepted Newton steps of the winning attempt.
        converged: Whether both residual tolerances were met.
        feas_residual: ``max_i |f_i(z_tilde)|``.
        stat_residual: Max-norm of the Lagrangian gradient at the solution.
        distance: ``||z_tilde - z_hat||_W``.
        identity_weight: True when the projection used ``W = I``.
        restart: Index of the attempt that produced this result.
    """

    z_tilde: np.ndarray
    lam: np.ndarray
    delta_pi: np.ndarray
    iterations: int
    converged: bool
    feas_residual: float
    stat_residual: float
    distance: float
    identity_weight: bool = True
    restart: int = 0

    def to_dict(self) -> dict:
        return {
            "z_tilde": [float(v) for v in self.z_tilde],
            "lambda": [float(v) for v in self.lam],
            "delta_pi": [float(v) for v in self.delta_pi],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "feas_residual": float(self.feas_residual),
            "stat_residual": float(self.stat_residual),
            "distance": float(self.distance),
        }


def _residual_parts(spec, z_hat, z, lam, w2):
    fz = eval_f(spec, z)
    jac = eval_jacobian(spec, z)
    if w2 is None:
        grad = 2.0 * (z - z_hat) + jac.T @ lam
    else:
        grad = w2 @ (z - z_hat) + jac.T @ lam
    return fz, jac, grad


def _weighted_distance(delta, weight):
    if weight is None:
        return float(np.linalg.norm(delta))
    return float(np.sqrt(max(delta @ weight @ delta, 0.0)))


def _attempt(spec, z_hat, z0, weight, w2, opts):
    """One damped Newton run. Returns (result, failure_reason)."""
    n = spec.ambient_dim
    m = spec.codim
    z = z0.astype(float).copy()
    lam = np.zeros(m)
    full_mode = opts.newton_mode == NEWTON_FULL

    def snapshot(steps, converged, feas, stat):
        delta = z - z_hat
        return ProjectionResult(
            z_tilde=z.copy(),
            lam=lam.copy(),
            delta_pi=delta,
            iterations=steps,
            converged=converged,
            feas_residual=feas,
            stat_residual=stat,
            distance=_weighted_distance(delta, weight),
            identity_weight=weight is None,
        )

    try:
        fz, jac, grad = _residual_parts(spec, z_hat, z, lam, w2)
    except EvaluationError as exc:
        return None, f"evaluation failed at start point: {exc}"

    steps = 0
    best = None
    best_merit = np.inf
    kkt = np.zeros((n + m, n + m))
    while True:
        feas = float(np.max(np.abs(fz)))
        stat = float(np.max(np.abs(grad)))
        merit = float(np.sqrt(grad @ grad + fz @ fz))
        if merit < best_merit:
            best_merit = merit
            best = snapshot(steps, False, feas, stat)
        if feas <= opts.tol_f and stat <= opts.tol_g:
            return snapshot(steps, True, feas, stat), None
        if steps >= opts.max_iters:
            return best, "iteration limit reached"

        kkt[:, :] = 0.0
        if w2 is None:
            kkt[:n, :n] = 2.0 * np.eye(n)
        else:
            kkt[:n, :n] = w2
        if full_mode and np.any(lam != 0.0):
            hessians = eval_hessians(spec, z)
            for i in range(m):
                kkt[:n, :n] += lam[i] * hessians[i]
        kkt[:n, n:] = jac.T
        kkt[n:, :n] = jac
        rhs = np.concatenate((-grad, -fz))
        try:
            step = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return best, "singular KKT system"
        if not np.all(np.isfinite(step)):
            return best, "singular KKT system"

        dz, dlam = step[:n], step[n:]
        alpha = 1.0
        accepted = False
        while alpha >= opts.min_step:
            z_try = z + alpha * dz
            lam_try = lam + alpha * dlam
            try:
                fz_t, jac_t, grad_t = _residual_parts(spec, z_hat, z_try, lam_try, w2)
            except EvaluationError:
                alpha *= _BACKTRACK
                continue
            merit_t = float(np.sqrt(grad_t @ grad_t + fz_t @ fz_t))
            if np.isfinite(merit_t) and merit_t <= (1.0 - _ARMIJO * alpha) * merit:
                z, lam = z_try, lam_try
                fz, jac, grad = fz_t, jac_t, grad_t
                accepted = True
                break
            alpha *= _BACKTRACK
        if not accepted:
            return best, "line search stalled"
        steps += 1


def _validate_weight(weight, n):
    if weight is None:
        return None, None
    w = np.asarray(weight, dtype=float)
    if w.shape != (n, n):
        raise ValueError(f"weight matrix has shape {w.shape}, expected ({n}, {n})")
    if np.linalg.norm(w - w.T) > 1e-10 * max(1.0, np.linalg.norm(w)):
        raise ValueError("weight matrix must be symmetric")
    try:
        np.linalg.cholesky(w)
    except np.linalg.LinAlgError as exc:
        raise ValueError("weight matrix must be symmetric positive definite") from exc
    return w, 2.0 * w


def project(
    spec: ManifoldSpec,
    z_hat,
    weight=None,
    opts: SolverOptions | None = None,
    *,
    point_index: int = 0,
) -> ProjectionResult:
    """Project ``z_hat`` onto the manifold in the ``W``-weighted norm.

    Args:
        spec: Target manifold.
        z_hat: Point to project, shape ``(n,)``.
        weight: Symmetric positive definite ``(n, n)`` weight matrix, or
            ``None`` for the identity.
        opts: Solver options; defaults to ``SolverOptions()``.
        point_index: Stream index mixed into the restart RNG so batch and
            sequential runs of the same points agree element by element.

    Returns:
        The converged :class:`ProjectionResult` with smallest weighted
        distance among all converged attempts.

    Raises:
        ValueError: On malformed inputs (dimension mismatch, bad weight).
        SingularKKTError: If every attempt died on a singular KKT system.
        ProjectionError: If no attempt converged; ``exc.result`` carries the
            best iterate found.
    """
    opts = opts or SolverOptions()
    z_hat = np.asarray(z_hat, dtype=float)
    n = spec.ambient_dim
    if z_hat.shape != (n,):
        raise ValueError(f"point has shape {z_hat.shape}, expected ({n},)")
    if not np.all(np.isfinite(z_hat)):
        raise ValueError("point to project must be finite")
    weight, w2 = _validate_weight(weight, n)

    best = None
    fallback = None
    reasons = []
    scale = opts.perturbation * (1.0 + float(np.linalg.norm(z_hat)))
    for attempt in range(opts.restarts):
        if attempt == 0:
            z0 = z_hat
        else:
            rng = np.random.default_rng([opts.seed, point_index, attempt])
            z0 = z_hat + scale * rng.standard_normal(n)
        result, reason = _attempt(spec, z_hat, z0, weight, w2, opts)
        if result is not None:
            result = replace(result, restart=attempt)
        if reason is None:
            if best is None or result.distance < best.distance:
                best = result
        else:
            reasons.append(reason)
            if result is not None and (
                fallback is None
                or result.feas_residual + result.stat_residual
                < fallback.feas_residual + fallback.stat_residual
            ):
                fallback = result
    if best is not None:
        return best
    detail = "; ".join(sorted(set(reasons))) or "no attempts ran"
    if reasons and all(r == "singular KKT system" for r in reasons):
        raise SingularKKTError(
            f"projection failed on {spec.name!r}: {detail}", result=fallback
        )
    raise ProjectionError(
        f"projection did not converge on {spec.name!r} "
        f"({opts.restarts} attempt(s)): {detail}",
        result=fallback,
    )


def batch_project(
    spec: ManifoldSpec,
    points,
    weight=None,
    opts: SolverOptions | None = None,
) -> list[ProjectionResult]:
    """Project a stack of points, recording per-point failures in place.

    Nonconvergence never aborts the batch: a failed point yields its best
    iterate with ``converged=False`` (or a zero-step result if the solver
    produced nothing). Results are index-aligned with the input and equal to
    sequential :func:`project` calls with matching ``point_index``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != spec.ambient_dim:
        raise ValueError(
            f"expected points of shape (k, {spec.ambient_dim}), got {points.shape}"
        )
    results = []
    for idx in range(points.shape[0]):
        try:
            results.append(project(spec, points[idx], weight, opts, point_index=idx))
        except ProjectionError as exc:
            result = exc.result
            if result is None:
                z = points[idx]
                result = ProjectionResult(
                    z_tilde=z.copy(),
                    lam=np.zeros(spec.codim),
                    delta_pi=np.zeros(spec.ambient_dim),
                    iterations=0,
                    converged=False,
                    feas_residual=np.inf,
                    stat_residual=np.inf,
                    distance=0.0,
                    identity_weight=weight is None,
                )
            results.append(result)
    return results


# ---------------------------------------------------------------------------
# Sensor-fusion style state estimation as a projection


@dataclass(frozen=True)
class GraphMap:
    """Differentiable map ``h: R^p -> R^q`` tying observations to states.

    ``value(x)`` returns shape ``(q,)``; ``jacobian(x)`` shape ``(q, p)`` and
    ``hessians(x)`` shape ``(q, p, p)`` are optional (finite differences are
    used when absent).
    """

    in_dim: int
    out_dim: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    hessians: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class FaseResult:
    """Reconciled state estimate: updated state, fitted observations, solve."""

    x: np.ndarray
    y: np.ndarray
    projection: ProjectionResult


def _fase_constraint(h: GraphMap, i: int) -> Constraint:
    p, q = h.in_dim, h.out_dim

    def value(z, _i=i):
        return float(np.asarray(h.value(z[:p]))[_i]) - float(z[p + _i])

    gradient = None
    if h.jacobian is not None:

        def gradient(z, _i=i):
            out = np.zeros(p + q)
            out[:p] = np.asarray(h.jacobian(z[:p]))[_i]
            out[p + _i] = -1.0
            return out

    hessian = None
    if h.hessians is not None:

        def hessian(z, _i=i):
            out = np.zeros((p + q, p + q))
            out[:p, :p] = np.asarray(h.hessians(z[:p]))[_i]
            return out

    return Constraint(value=value, gradient=gradient, hessian=hessian)


def fase_reconcile(
    h: GraphMap,
    x_hat,
    y_hat,
    state_weight,
    obs_weight,
    opts: SolverOptions | None = None,
) -> FaseResult:
    """Fuse a state prior with observations tied through ``y = h(x)``.

    Minimizes ``(x - x_hat)^T M (x - x_hat) + (y - y_hat)^T R (y - y_hat)``
    subject to ``y = h(x)``, by projecting the stacked vector
    ``(x_hat, y_hat)`` onto the graph of ``h`` under the block-diagonal
    weight ``blockdiag(M, R)``. For affine ``h`` this reproduces the
    generalized least-squares update in closed form.

    Args:
        h: The observation map with dimensions ``p`` and ``q``.
        x_hat: Prior state estimate, shape ``(p,)``.
        y_hat: Observed vector, shape ``(q,)``.
        state_weight: SPD ``(p, p)`` prior precision ``M``.
        obs_weight: SPD ``(q, q)`` observation precision ``R``.
        opts: Solver options forwarded to :func:`project`.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    p, q = h.in_dim, h.out_dim
    if x_hat.shape != (p,):
        raise ValueError(f"state estimate has shape {x_hat.shape}, expected ({p},)")
    if y_hat.shape != (q,):
        raise ValueError(f"observation has shape {y_hat.shape}, expected ({q},)")
    state_weight = np.asarray(state_weight, dtype=float)
    obs_weight = np.asarray(obs_weight, dtype=float)
    if state_weight.shape != (p, p) or obs_weight.shape != (q, q):
        raise ValueError("weight blocks must be (p, p) and (q, q)")

    spec = ManifoldSpec(
        name="state-observation-graph",
        ambient_dim=p + q,
        constraints=tuple(_fase_constraint(h, i) for i in range(q)),
        convexity=(Convexity.UNKNOWN,) * q,
    )
    weight = np.zeros((p + q, p + q))
    weight[:p, :p] = state_weight
    weight[p:, p:] = obs_weight
    result = project(spec, np.concatenate((x_hat, y_hat)), weight, opts)
    return FaseResult(
        x=result.z_tilde[:p].copy(), y=result.z_tilde[p:].copy(), projection=result
    )

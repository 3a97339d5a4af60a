"""Differential geometry of constraint manifolds.

Tangent spaces are computed as the orthogonal complement of the constraint
gradients via a complete QR factorization. Curvature is summarized by the
restriction of each constraint Hessian to the tangent space and, for unit
tangent directions, by normal-curvature coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePointError, SingularConstraintError
from .manifolds import ManifoldSpec, eval_f, eval_hessians, eval_jacobian

__all__ = [
    "CurvatureReport",
    "tangent_basis",
    "restricted_hessian",
    "second_fundamental_form",
    "normal_correction",
    "curvature_report",
]

_RANK_RTOL = 1e-10


def tangent_basis(jacobian: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``ker J``, returned as columns of an ``(n, n-m)`` array.

    Args:
        jacobian: Constraint Jacobian of shape ``(m, n)`` with ``m < n``.

    Returns:
        Matrix ``E`` with orthonormal columns satisfying ``J @ E = 0``.

    Raises:
        SingularConstraintError: If ``J`` has numerical row rank below ``m``
            (threshold ``1e-10 * ||J||``).
    """
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    m, n = jac.shape
    if m >= n:
        raise ValueError(f"need m < n for a nontrivial tangent space, got shape {jac.shape}")
    q, r = np.linalg.qr(jac.T, mode="complete")
    diag = np.abs(np.diag(r[:m, :m]))
    threshold = _RANK_RTOL * np.linalg.norm(jac)
    if np.any(diag <= threshold):
        raise SingularConstraintError(
            f"constraint Jacobian is rank deficient (min pivot {diag.min():.3e}, "
            f"threshold {threshold:.3e})"
        )
    return q[:, m:]


def restricted_hessian(hessian: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, float]:
    """Restrict a constraint Hessian to the tangent space.

    Returns the ``(n-m, n-m)`` matrix ``E^T H E`` together with its smallest
    eigenvalue, computed by a full symmetric eigendecomposition.
    """
    hess = np.asarray(hessian, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if hess.shape[0] != hess.shape[1] or hess.shape[0] != basis.shape[0]:
        raise ValueError(
            f"incompatible shapes: hessian {hess.shape}, basis {basis.shape}"
        )
    restricted = basis.T @ hess @ basis
    restricted = 0.5 * (restricted + restricted.T)
    lam_min = float(np.linalg.eigvalsh(restricted)[0])
    return restricted, lam_min


@dataclass(frozen=True)
class CurvatureReport:
    """Curvature summary of a manifold at one point.

    Attributes:
        point: The evaluation point.
        basis: Orthonormal tangent basis, shape ``(n, n-m)``.
        restricted: Per-constraint restricted Hessians, shape ``(m, n-m, n-m)``.
        lambda_min: Smallest eigenvalue of each restricted Hessian.
        gradient_norms: Euclidean norm of each constraint gradient.
    """

    point: np.ndarray
    basis: np.ndarray
    restricted: np.ndarray
    lambda_min: np.ndarray
    gradient_norms: np.ndarray


def curvature_report(spec: ManifoldSpec, z) -> CurvatureReport:
    """Compute tangent basis and restricted-Hessian spectra of ``spec`` at ``z``."""
    z = np.asarray(z, dtype=float)
    jac = eval_jacobian(spec, z)
    basis = tangent_basis(jac)
    hessians = eval_hessians(spec, z)
    m = spec.codim
    k = spec.ambient_dim - m
    restricted = np.empty((m, k, k))
    lam = np.empty(m)
    for i in range(m):
        restricted[i], lam[i] = restricted_hessian(hessians[i], basis)
    return CurvatureReport(
        point=z,
        basis=basis,
        restricted=restricted,
        lambda_min=lam,
        gradient_norms=np.linalg.norm(jac, axis=1),
    )


_ON_MANIFOLD_TOL = 1e-8
_TANGENT_TOL = 1e-6
_GRADIENT_FLOOR = 1e-12


def _check_surface_point(spec: ManifoldSpec, z, t):
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    residual = np.max(np.abs(eval_f(spec, z)))
    if residual > _ON_MANIFOLD_TOL:
        raise ValueError(
            f"point is off the constraint set (residual {residual:.3e} > {_ON_MANIFOLD_TOL})"
        )
    jac = eval_jacobian(spec, z)
    tangency = np.max(np.abs(jac @ t))
    if tangency > _TANGENT_TOL * max(1.0, float(np.linalg.norm(t))):
        raise ValueError(
            f"direction is not tangent (|J t| = {tangency:.3e} exceeds tolerance)"
        )
    return z, t, jac


def second_fundamental_form(
    spec: ManifoldSpec, z, t, normalized: bool = True
) -> np.ndarray:
    """Normal-curvature coefficients of tangent direction ``t`` at ``z``.

    For each constraint the raw coefficient is the quadratic form
    ``t^T H_i(z) t``; with ``normalized=True`` (default) each is divided by
    the gradient norm ``||grad f_i(z)||``, which for a hypersurface is the
    classical curvature of the surface toward the unit normal. The companion
    :func:`normal_correction` turns these quadratic forms into the
    second-order offset that keeps ``z + t`` on the manifold.

    Raises:
        ValueError: If ``z`` is off the manifold or ``t`` is not tangent.
        DegeneratePointError: If a constraint gradient vanishes while
            ``normalized=True``.
    """
    z, t, jac = _check_surface_point(spec, z, t)
    hessians = eval_hessians(spec, z)
    raw = np.array([float(t @ hessians[i] @ t) for i in range(spec.codim)])
    if not normalized:
        return raw
    norms = np.linalg.norm(jac, axis=1)
    if np.any(norms <= _GRADIENT_FLOOR):
        raise DegeneratePointError(
            f"constraint gradient vanishes at z={z!r}; normal direction undefined"
        )
    return raw / norms


def normal_correction(spec: ManifoldSpec, z, t) -> np.ndarray:
    """Second-order normal offset for moving along tangent ``t`` from ``z``.

    Returns the vector ``c`` such that ``z + t + c`` satisfies the
    constraints up to third order in ``||t||``: writing ``h_i = t^T H_i t``,
    the offset solves ``J J^T w = -h`` and returns ``c = 0.5 * J^T w``.
    """
    z, t, jac = _check_surface_point(spec, z, t)
    hessians = eval_hessians(spec, z)
    h = np.array([float(t @ hessians[i] @ t) for i in range(spec.codim)])
    gram = jac @ jac.T
    try:
        w = np.linalg.solve(gram, -h)
    except np.linalg.LinAlgError as exc:
        raise SingularConstraintError(
            "constraint gradients are linearly dependent; normal offset undefined"
        ) from exc
    return 0.5 * (jac.T @ w)

"""Error-reduction guarantees for reconciled forecasts.

Three sufficient conditions certify, before the truth is known, that
projecting a forecast onto the constraint set cannot increase its error
against any ground truth on the set:

* ``theorem1_check``: hypersurface curvature keeps one sign on the tangent
  space and opposes the side the forecast fell on.
* ``corollary1_check``: the displacement is (anti)parallel to the constraint
  gradient with the orientation matching a declared convex level region.
* ``theorem2b_check``: the displacement is a nonnegative combination of
  constraint gradients pointing into the declared convex region.

When no condition applies, ``theorem3_estimate`` scores the probability of
improvement against a predictive sample, with exact binomial confidence
bounds for equally weighted atoms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as _beta_dist

from .errors import ApplicabilityError, DegeneratePointError, SolverQualityError
from .geometry import curvature_report, tangent_basis
from .manifolds import Convexity, ManifoldSpec, eval_f, eval_jacobian
from .projection import ProjectionResult

__all__ = [
    "GUARANTEED_REDUCTION",
    "NOT_APPLICABLE",
    "GuaranteeVerdict",
    "theorem1_check",
    "corollary1_check",
    "theorem2b_check",
    "halfspace_test",
    "clopper_pearson",
    "ReductionEstimate",
    "theorem3_estimate",
]

GUARANTEED_REDUCTION = "guaranteed_reduction"
NOT_APPLICABLE = "not_applicable"

_ATOM_FEAS_TOL = 1e-6
_WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class GuaranteeVerdict:
    """Outcome of a guarantee check.

    Attributes:
        verdict: ``GUARANTEED_REDUCTION`` or ``NOT_APPLICABLE``.
        theorem: Which condition ran: ``"T1"``, ``"C1"``, or ``"T2b"``.
        diagnostics: Numeric evidence behind the verdict.
        failed_clause: Human-readable reason when not guaranteed.
    """

    verdict: str
    theorem: str
    diagnostics: dict
    failed_clause: str | None = None

    @property
    def guaranteed(self) -> bool:
        return self.verdict == GUARANTEED_REDUCTION

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "theorem": self.theorem,
            "diagnostics": self.diagnostics,
            "failed_clause": self.failed_clause,
        }


def _require_solution(proj: ProjectionResult, theorem: str):
    if not proj.converged:
        raise ApplicabilityError(f"{theorem} requires a converged projection")
    if not proj.identity_weight:
        raise ApplicabilityError(f"{theorem} applies to unweighted (identity W) projections")


def theorem1_check(
    spec: ManifoldSpec,
    z_hat,
    proj: ProjectionResult,
    *,
    tol_lambda: float = 1e-8,
    tol_on_manifold: float = 1e-10,
) -> GuaranteeVerdict:
    """Curvature-sign condition for hypersurfaces.

    Certifies reduction when ``sign(f(z_hat)) * lambda_min > tol_lambda``,
    where ``lambda_min`` is the smallest eigenvalue of the constraint Hessian
    restricted to the tangent space at the reconciled point. A forecast
    already on the surface (``|f(z_hat)| <= tol_on_manifold``) makes the
    projection a no-op and the condition vacuous, so it reports
    ``NOT_APPLICABLE``.
    """
    if spec.codim != 1:
        raise ApplicabilityError("T1 applies to hypersurfaces (exactly one constraint)")
    _require_solution(proj, "T1")
    f_hat = float(eval_f(spec, z_hat)[0])
    if abs(f_hat) <= tol_on_manifold:
        return GuaranteeVerdict(
            verdict=NOT_APPLICABLE,
            theorem="T1",
            diagnostics={"f_hat": f_hat, "lambda_min": None, "condition": None},
            failed_clause="forecast already satisfies the constraint",
        )
    report = curvature_report(spec, proj.z_tilde)
    lam_min = float(report.lambda_min[0])
    condition = float(np.sign(f_hat) * lam_min)
    diagnostics = {"f_hat": f_hat, "lambda_min": lam_min, "condition": condition}
    if condition > tol_lambda:
        return GuaranteeVerdict(GUARANTEED_REDUCTION, "T1", diagnostics)
    return GuaranteeVerdict(
        NOT_APPLICABLE,
        "T1",
        diagnostics,
        failed_clause="tangent curvature does not oppose the forecast side with strict margin",
    )


def corollary1_check(
    spec: ManifoldSpec,
    proj: ProjectionResult,
    *,
    tol_mu: float = 1e-8,
) -> GuaranteeVerdict:
    """Gradient-alignment condition for hypersurfaces with convex level regions.

    Writes the displacement as ``delta_pi = mu * grad f(z_tilde)`` and
    certifies reduction when ``mu < -tol_mu`` for a convex sublevel region
    (``mu > tol_mu`` for a convex superlevel region).

    Raises:
        SolverQualityError: If ``delta_pi`` is not parallel to the gradient
            within ``max(1e-6, 10 * stat_residual)``, i.e. the solver output
            is too loose to trust the multiplier.
    """
    if spec.codim != 1:
        raise ApplicabilityError("C1 applies to hypersurfaces (exactly one constraint)")
    _require_solution(proj, "C1")
    tag = spec.convexity[0]
    if tag is Convexity.UNKNOWN:
        raise ApplicabilityError("C1 requires a declared convexity class")
    grad = eval_jacobian(spec, proj.z_tilde)[0]
    sq_norm = float(grad @ grad)
    if sq_norm <= 1e-24:
        raise DegeneratePointError("constraint gradient vanishes at the reconciled point")
    mu = float(proj.delta_pi @ grad / sq_norm)
    residual = float(np.max(np.abs(proj.delta_pi - mu * grad)))
    allowed = max(1e-6, 10.0 * proj.stat_residual)
    if residual > allowed:
        raise SolverQualityError(
            f"displacement deviates from the gradient line by {residual:.3e} "
            f"(allowed {allowed:.3e}); solver output too loose"
        )
    diagnostics = {"mu": mu, "parallel_residual": residual, "convexity": tag.value}
    if tag is Convexity.CONVEX_SUBLEVEL:
        guaranteed = mu < -tol_mu
    else:
        guaranteed = mu > tol_mu
    if guaranteed:
        return GuaranteeVerdict(GUARANTEED_REDUCTION, "C1", diagnostics)
    if abs(mu) <= tol_mu:
        clause = "projection displacement is zero within tolerance"
    else:
        clause = "multiplier sign does not match the declared convex region"
    return GuaranteeVerdict(NOT_APPLICABLE, "C1", diagnostics, failed_clause=clause)


def theorem2b_check(
    spec: ManifoldSpec,
    proj: ProjectionResult,
    *,
    tol_residual: float = 1e-6,
    tol_mu: float = 1e-8,
) -> GuaranteeVerdict:
    """Gradient-cone condition for intersections of convex level regions.

    For constraints sharing one convexity class, certifies reduction when the
    displacement is a nonnegative combination of constraint gradients with
    the class-appropriate sign: ``delta_pi = -J^T mu`` (sublevel) or
    ``delta_pi = +J^T mu`` (superlevel) with ``mu >= 0``. Weights are read
    off the KKT multipliers (``mu = lam/2`` up to sign) and re-solved by
    least squares when that identity is loose. A forecast already on the
    manifold passes degenerately with ``mu = 0``.
    """
    _require_solution(proj, "T2b")
    tags = set(spec.convexity)
    if len(tags) > 1:
        raise ApplicabilityError("T2b requires all constraints to share one convexity class")
    tag = tags.pop()
    if tag is Convexity.UNKNOWN:
        raise ApplicabilityError("T2b requires a declared convexity class")
    jac = eval_jacobian(spec, proj.z_tilde)
    tangent_basis(jac)  # raises SingularConstraintError on rank deficiency
    sign = -1.0 if tag is Convexity.CONVEX_SUBLEVEL else 1.0
    mu = sign * -0.5 * proj.lam  # stationarity: delta_pi = -J^T lam / 2 = sign * J^T mu
    tol_r = tol_residual * max(1.0, float(np.linalg.norm(proj.delta_pi)))
    residual = float(np.linalg.norm(proj.delta_pi - sign * (jac.T @ mu)))
    used_fallback = False
    if residual > tol_r:
        mu, *_ = np.linalg.lstsq(jac.T, sign * proj.delta_pi, rcond=None)
        residual = float(np.linalg.norm(proj.delta_pi - sign * (jac.T @ mu)))
        used_fallback = True
    mu_floor = -tol_mu * max(1.0, float(np.max(np.abs(mu))) if mu.size else 0.0)
    nonnegative = bool(np.min(mu) >= mu_floor) if mu.size else True
    diagnostics = {
        "mu": [float(v) for v in mu],
        "residual": residual,
        "used_fallback": used_fallback,
        "convexity": tag.value,
    }
    if residual <= tol_r and nonnegative:
        return GuaranteeVerdict(GUARANTEED_REDUCTION, "T2b", diagnostics)
    if residual > tol_r:
        clause = "displacement is not a signed combination of constraint gradients"
    else:
        clause = "a combination weight is negative"
    return GuaranteeVerdict(NOT_APPLICABLE, "T2b", diagnostics, failed_clause=clause)


def halfspace_test(delta_pi, delta_tilde):
    """Exact half-space test ``delta_pi . delta_tilde >= -||delta_pi||^2 / 2``.

    ``delta_tilde`` may be a single vector or a stack of rows; the result is
    a bool (or bool array) with no tolerance applied. The inequality holds
    if and only if replacing the original forecast with the reconciled one
    does not increase the error against the point ``z_tilde + delta_tilde``.
    """
    delta_pi = np.asarray(delta_pi, dtype=float)
    delta_tilde = np.asarray(delta_tilde, dtype=float)
    threshold = -0.5 * float(delta_pi @ delta_pi)
    dots = delta_tilde @ delta_pi
    if dots.ndim == 0:
        return bool(dots >= threshold)
    return dots >= threshold


def clopper_pearson(k: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """Exact two-sided binomial confidence bounds for ``k`` successes of ``n``.

    Edge cases use the closed forms ``upper = 1 - (alpha/2)^(1/n)`` at
    ``k = 0`` and ``lower = (alpha/2)^(1/n)`` at ``k = n``; interior cases
    invert the beta distribution.
    """
    if not isinstance(k, (int, np.integer)) or not isinstance(n, (int, np.integer)):
        raise ValueError("k and n must be integers")
    if n < 1 or not (0 <= k <= n):
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    half = alpha / 2.0
    if k == 0:
        lower = 0.0
    elif k == n:
        lower = half ** (1.0 / n)
    else:
        lower = float(_beta_dist.ppf(half, k, n - k + 1))
    if k == n:
        upper = 1.0
    elif k == 0:
        upper = 1.0 - half ** (1.0 / n)
    else:
        upper = float(_beta_dist.ppf(1.0 - half, k + 1, n - k))
    return lower, upper


@dataclass(frozen=True)
class ReductionEstimate:
    """Estimated probability that reconciliation does not increase the error.

    Attributes:
        e: Weighted fraction of atoms passing the half-space test.
        lower: Exact binomial lower confidence bound (``None`` for weighted
            atoms, where the binomial model does not apply).
        upper: Matching upper bound, or ``None``.
        atoms: Number of predictive atoms scored.
        successes: Count of atoms passing the half-space test.
        alpha: Two-sided confidence level of the bounds.
        weighted: True when non-uniform weights were supplied.
    """

    e: float
    lower: float | None
    upper: float | None
    atoms: int
    successes: int
    alpha: float
    weighted: bool

    def __post_init__(self):
        if not (-1e-12 <= self.e <= 1.0 + 1e-12):
            raise ValueError(f"estimate out of range: {self.e}")
        if self.lower is not None and self.upper is not None:
            if not (self.lower <= self.e + 1e-12 and self.e <= self.upper + 1e-12):
                raise ValueError("confidence bounds must bracket the estimate")

    def to_dict(self) -> dict:
        return {
            "e": float(self.e),
            "lower": None if self.lower is None else float(self.lower),
            "upper": None if self.upper is None else float(self.upper),
            "atoms": int(self.atoms),
            "successes": int(self.successes),
            "alpha": float(self.alpha),
            "weighted": bool(self.weighted),
        }


def theorem3_estimate(
    spec: ManifoldSpec,
    proj: ProjectionResult,
    atoms,
    weights=None,
    alpha: float = 0.05,
) -> ReductionEstimate:
    """Probability that reconciling does not hurt, under a predictive sample.

    Each atom is a point on the manifold representing one draw of the truth;
    the estimate is the (weighted) fraction lying in the closed half space
    where the reconciled forecast is at least as accurate as the original.

    Args:
        spec: Manifold the atoms must lie on (``max |f| <= 1e-6`` each).
        proj: Converged projection of the point forecast.
        atoms: Array of shape ``(S, n)`` with ``S >= 1``, already reconciled.
        weights: Optional nonnegative weights summing to 1 within ``1e-9``;
            ``None`` means uniform.
        alpha: Level for the exact binomial bounds (uniform weights only).
    """
    if not proj.converged:
        raise ApplicabilityError("estimator requires a converged projection")
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.shape[1] != spec.ambient_dim:
        raise ValueError(
            f"atoms must have shape (S, {spec.ambient_dim}), got {atoms.shape}"
        )
    count = atoms.shape[0]
    if count < 1:
        raise ValueError("at least one atom is required")
    for idx in range(count):
        residual = float(np.max(np.abs(eval_f(spec, atoms[idx]))))
        if residual > _ATOM_FEAS_TOL:
            raise ValueError(
                f"atom {idx} is off the constraint set (residual {residual:.3e})"
            )
    if weights is None:
        uniform = True
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (count,):
            raise ValueError(f"weights must have shape ({count},), got {weights.shape}")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        weights = weights / total
        uniform = bool(np.all(np.abs(weights - 1.0 / count) <= 1e-12))

    passes = halfspace_test(proj.delta_pi, atoms - proj.z_tilde)
    successes = int(np.count_nonzero(passes))
    if uniform:
        lower, upper = clopper_pearson(successes, count, alpha)
        return ReductionEstimate(
            e=successes / count,
            lower=lower,
            upper=upper,
            atoms=count,
            successes=successes,
            alpha=alpha,
            weighted=False,
        )
    return ReductionEstimate(
        e=float(weights @ passes),
        lower=None,
        upper=None,
        atoms=count,
        successes=successes,
        alpha=alpha,
        weighted=True,
    )

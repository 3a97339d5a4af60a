"""Randomized studies of reconciliation behavior on synthetic data.

The data-generating process runs independent AR(1) chains in the base
coordinates of a graph-lift manifold and lifts them, so every observation
satisfies the constraints exactly. Studies fit a forecaster on a shuffled
split of one-step pairs, bootstrap a predictive sample per test point,
project everything, run the guarantee checks and the probabilistic
estimator, and aggregate calibration, coverage, and decision-strategy
metrics into delimited reports.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ApplicabilityError,
    ProjectionError,
    SingularConstraintError,
    SolverQualityError,
)
from .forecasting import FORECASTERS, bootstrap_predictive, fit_forecaster
from .guarantees import (
    corollary1_check,
    theorem1_check,
    theorem2b_check,
    theorem3_estimate,
)
from .manifolds import Convexity, ManifoldSpec, registry_get
from .projection import ProjectionResult, SolverOptions, batch_project, project

__all__ = [
    "DgpConfig",
    "generate_dataset",
    "ApplicabilityRow",
    "applicability_study",
    "calibration_curve",
    "binary_coverage",
    "StrategyOutcome",
    "apply_strategy",
    "frechet_mean_euclidean",
    "StudyRecord",
    "StudyConfig",
    "study_config_from_dict",
    "StudyReport",
    "run_study",
    "write_study_outputs",
    "write_applicability_csv",
    "format_number",
]

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Data generation


@dataclass(frozen=True)
class DgpConfig:
    """AR(1) data-generating process over the base coordinates.

    Each base coordinate follows ``x^{t+1} = theta * x^t + w`` with
    ``w ~ N(0, sigma^2)``, started from its stationary distribution (or from
    zero at the unit root ``theta = 1``).
    """

    theta1: float
    theta2: float
    sigma: float
    T: int
    seed: int | tuple = 0

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.T < 2:
            raise ValueError(f"T must be at least 2, got {self.T}")


def generate_dataset(spec: ManifoldSpec, dgp: DgpConfig) -> np.ndarray:
    """Simulate ``T`` consecutive observations on a graph-lift manifold.

    Returns an array of shape ``(T, n)`` whose rows satisfy ``f(z) = 0``
    exactly (the lift and the constraint evaluation share one code path).
    """
    lift = spec.graph_lift
    if lift is None:
        raise ValueError(f"manifold {spec.name!r} has no graph lift; cannot simulate")
    d = lift.base_dim
    thetas = np.array([dgp.theta1, dgp.theta2][:d])
    rng = np.random.default_rng(list(dgp.seed) if isinstance(dgp.seed, tuple) else dgp.seed)
    latent = np.empty((dgp.T, d))
    for j in range(d):
        if thetas[j] < 1.0:
            start_sd = dgp.sigma / np.sqrt(1.0 - thetas[j] ** 2)
        else:
            start_sd = 0.0
        latent[0, j] = rng.normal(0.0, start_sd)
    noise = rng.normal(0.0, dgp.sigma, size=(dgp.T - 1, d))
    for t in range(1, dgp.T):
        latent[t] = thetas * latent[t - 1] + noise[t - 1]
    return lift.lift(latent)


# ---------------------------------------------------------------------------
# Applicability rates under isotropic perturbation


@dataclass(frozen=True)
class ApplicabilityRow:
    """Condition and reduction counts at one perturbation level."""

    sigma: float
    n_points: int
    n_failed: int
    n_condition: int
    n_reduction: int
    n_false_positive: int

    @property
    def n_converged(self) -> int:
        return self.n_points - self.n_failed

    @property
    def condition_rate(self) -> float:
        return self.n_condition / self.n_converged if self.n_converged else float("nan")

    @property
    def reduction_rate(self) -> float:
        return self.n_reduction / self.n_converged if self.n_converged else float("nan")


def _condition_verdict(spec: ManifoldSpec, z_hat, result: ProjectionResult) -> bool:
    if spec.codim == 1:
        return theorem1_check(spec, z_hat, result).guaranteed
    return theorem2b_check(spec, result).guaranteed


def applicability_study(
    spec: ManifoldSpec,
    sigma_levels: Sequence[float],
    n_points: int,
    *,
    seed: int = 0,
    dgp: DgpConfig | None = None,
    opts: SolverOptions | None = None,
) -> list[ApplicabilityRow]:
    """Rate of sufficient-condition triggers and actual error reductions.

    Samples ``n_points`` manifold points from the data-generating process,
    perturbs them with isotropic ambient noise at each level in
    ``sigma_levels``, projects back, and evaluates the matching sufficient
    condition (curvature-sign for hypersurfaces, gradient-cone otherwise).
    Projection failures are excluded from the rates and counted.
    """
    if n_points < 1:
        raise ValueError("n_points must be positive")
    if dgp is None:
        dgp = DgpConfig(theta1=0.5, theta2=0.5, sigma=1.0, T=max(n_points, 2), seed=(seed, 0))
    points = generate_dataset(spec, dgp)[:n_points]
    rows = []
    for level_index, sigma in enumerate(sigma_levels):
        sigma = float(sigma)
        if sigma <= 0:
            raise ValueError(f"perturbation levels must be positive, got {sigma}")
        rng = np.random.default_rng([seed, 1, level_index])
        z_hats = points + rng.normal(0.0, sigma, size=points.shape)
        results = batch_project(spec, z_hats, None, opts)
        failed = condition = reduction = false_positive = 0
        for z, z_hat, result in zip(points, z_hats, results):
            if not result.converged:
                failed += 1
                continue
            holds = _condition_verdict(spec, z_hat, result)
            err_hat = float(np.linalg.norm(z - z_hat))
            err_til = float(np.linalg.norm(z - result.z_tilde))
            condition += holds
            reduction += err_til < err_hat
            false_positive += holds and err_til > err_hat
        rows.append(
            ApplicabilityRow(
                sigma=sigma,
                n_points=n_points,
                n_failed=failed,
                n_condition=condition,
                n_reduction=reduction,
                n_false_positive=false_positive,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Ex-post metrics


def _calibration_order(e_values: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    # Ties on the sort key are broken by outcome so the curve is invariant
    # to the input ordering.
    return np.lexsort((outcomes, e_values))


def calibration_curve(e_values, outcomes, window: int) -> np.ndarray:
    """Moving-average success rate after sorting by the ex-ante estimate.

    ``r[t]`` is the mean of ``outcomes`` (sorted by ``e_values``) over the
    index window ``[t - window//2, t + window//2]`` clipped to the valid
    range, so boundary windows shrink rather than wrap.
    """
    e_values = np.asarray(e_values, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if e_values.ndim != 1 or e_values.shape != outcomes.shape:
        raise ValueError("e_values and outcomes must be matching 1-D arrays")
    if e_values.size == 0:
        raise ValueError("at least one record is required")
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise ValueError(f"window must be a positive integer, got {window!r}")
    sorted_outcomes = outcomes[_calibration_order(e_values, outcomes)]
    n = sorted_outcomes.size
    half = int(window) // 2
    cumulative = np.concatenate(([0.0], np.cumsum(sorted_outcomes)))
    t = np.arange(n)
    lo = np.maximum(t - half, 0)
    hi = np.minimum(t + half, n - 1)
    return (cumulative[hi + 1] - cumulative[lo]) / (hi - lo + 1)


def binary_coverage(records) -> float:
    """Fraction of records whose confidence bound falls on the correct side.

    A record counts as covered when it improved and the lower bound exceeds
    one half, or did not improve and the upper bound is below one half.
    Requires unweighted estimates (records must carry both bounds).
    """
    records = list(records)
    if not records:
        raise ValueError("at least one record is required")
    hits = []
    for record in records:
        if record.e_lower is None or record.e_upper is None:
            raise ValueError("weighted estimates carry no confidence bounds")
        hits.append(record.e_lower > 0.5 if record.improved else record.e_upper < 0.5)
    return float(np.mean(hits))


@dataclass(frozen=True)
class StrategyOutcome:
    """Result of applying a reconcile-or-not decision rule to a record set."""

    theta: float | str
    points: np.ndarray
    delta_rel_opt: float
    degenerate: bool


def apply_strategy(records, theta) -> StrategyOutcome:
    """Score a decision rule that reconciles only when the estimate is high.

    With threshold ``theta`` in ``[0, 1]`` the rule keeps the reconciled
    forecast where ``e > theta`` and the original elsewhere. The sentinel
    ``"always"`` reconciles everything; ``"oracle"`` picks the smaller error
    per record (ties go to the reconciled forecast). The score is the
    achieved share of the oracle's improvement on root-mean-square errors:

        (rms(err_hat) - rms(err_chosen)) / (rms(err_hat) - rms(err_oracle))

    A zero denominator (oracle cannot improve) is flagged and scored 0.
    """
    records = list(records)
    if not records:
        raise ValueError("at least one record is required")
    err_hat = np.array([r.err_hat for r in records])
    err_til = np.array([r.err_til for r in records])
    e_values = np.array([r.e for r in records])
    if theta == "always":
        use_recon = np.ones(len(records), dtype=bool)
    elif theta == "oracle":
        use_recon = err_til <= err_hat
    else:
        theta = float(theta)
        if not (0.0 <= theta <= 1.0):
            raise ValueError(f"threshold must lie in [0, 1], got {theta}")
        use_recon = e_values > theta
    chosen_err = np.where(use_recon, err_til, err_hat)
    points = np.array(
        [r.z_tilde if flag else r.z_hat for r, flag in zip(records, use_recon)]
    )

    def rms(values):
        return float(np.sqrt(np.mean(np.square(values))))

    base = rms(err_hat)
    achieved = rms(chosen_err)
    best = rms(np.minimum(err_hat, err_til))
    denom = base - best
    if denom <= 0.0:
        return StrategyOutcome(theta=theta, points=points, delta_rel_opt=0.0, degenerate=True)
    return StrategyOutcome(
        theta=theta,
        points=points,
        delta_rel_opt=(base - achieved) / denom,
        degenerate=False,
    )


def frechet_mean_euclidean(
    spec: ManifoldSpec,
    atoms,
    weights=None,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Minimizer on the manifold of the weighted sum of squared distances.

    With ambient (chordal) distances the minimizer is the projection of the
    weighted barycenter, which is how it is computed. Atoms must lie on the
    manifold; weights follow the same normalization rules as the estimator.
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.shape[1] != spec.ambient_dim:
        raise ValueError(f"atoms must have shape (S, {spec.ambient_dim}), got {atoms.shape}")
    if atoms.shape[0] < 1:
        raise ValueError("at least one atom is required")
    from .manifolds import eval_f

    for idx in range(atoms.shape[0]):
        residual = float(np.max(np.abs(eval_f(spec, atoms[idx]))))
        if residual > 1e-6:
            raise ValueError(f"atom {idx} is off the constraint set (residual {residual:.3e})")
    if weights is None:
        weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (atoms.shape[0],):
            raise ValueError("weights must align with atoms")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        weights = weights / total
    barycenter = weights @ atoms
    return project(spec, barycenter, None, opts).z_tilde


# ---------------------------------------------------------------------------
# Full studies


@dataclass(frozen=True)
class StudyRecord:
    """One reconciled test point with its ex-ante and ex-post scores."""

    study: int
    index: int
    z: np.ndarray
    z_hat: np.ndarray
    z_tilde: np.ndarray
    err_hat: float
    err_til: float
    e: float
    e_lower: float | None
    e_upper: float | None
    th1: bool | None
    c1: bool | None
    th2b: bool | None
    improved: bool


_DEFAULT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(10))


@dataclass(frozen=True)
class StudyConfig:
    """Declarative description of a batch of randomized studies."""

    manifold: str | ManifoldSpec
    dgp: DgpConfig
    n_studies: int = 25
    randomize_thetas: bool = True
    train_frac: float = 0.10
    cal_frac: float = 0.40
    test_frac: float = 0.50
    atoms: int = 200
    alpha: float = 0.05
    thresholds: tuple = _DEFAULT_THRESHOLDS
    calibration_window: int | None = None
    forecaster: str = "linear-ar"
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.n_studies < 1:
            raise ValueError("n_studies must be positive")
        for name in ("train_frac", "cal_frac", "test_frac"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name} must lie strictly between 0 and 1")
        total = self.train_frac + self.cal_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total!r}")
        if self.atoms < 2:
            raise ValueError("atoms must be at least 2")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        for theta in self.thresholds:
            if not (0.0 <= float(theta) <= 1.0):
                raise ValueError(f"thresholds must lie in [0, 1], got {theta}")
        if self.calibration_window is not None and self.calibration_window < 1:
            raise ValueError("calibration_window must be a positive integer")
        if isinstance(self.forecaster, str) and self.forecaster not in FORECASTERS:
            raise ValueError(
                f"unknown forecaster {self.forecaster!r}; "
                f"available: {', '.join(sorted(FORECASTERS))}"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


def _config_error(path: str, message: str):
    raise ValueError(f"{path}: {message}")


def _expect_mapping(value, path):
    if not isinstance(value, dict):
        _config_error(path, "must be a mapping")
    return value


def _expect_number(value, path, *, integer=False, minimum=None, maximum=None):
    ok = isinstance(value, int) and not isinstance(value, bool) if integer else isinstance(
        value, (int, float)
    ) and not isinstance(value, bool)
    if not ok:
        _config_error(path, "must be an integer" if integer else "must be a number")
    if minimum is not None and value < minimum:
        _config_error(path, f"must be >= {minimum}")
    if maximum is not None and value > maximum:
        _config_error(path, f"must be <= {maximum}")
    return value


def study_config_from_dict(raw: dict) -> StudyConfig:
    """Build a validated :class:`StudyConfig` from parsed JSON.

    Error messages name the offending field path (``dgp.sigma``,
    ``splits.train``, ...), which the command line surfaces verbatim.
    """
    raw = _expect_mapping(raw, "config")
    known = {
        "manifold",
        "dgp",
        "n_studies",
        "randomize_thetas",
        "splits",
        "atoms",
        "alpha",
        "thresholds",
        "calibration_window",
        "forecaster",
        "seed",
        "solver",
    }
    for key in raw:
        if key not in known:
            _config_error(key, "unknown config field")
    if "manifold" not in raw or not isinstance(raw["manifold"], str):
        _config_error("manifold", "must name a registry manifold")
    if "dgp" not in raw:
        _config_error("dgp", "is required")
    dgp_raw = _expect_mapping(raw["dgp"], "dgp")
    for key in dgp_raw:
        if key not in {"theta1", "theta2", "sigma", "T"}:
            _config_error(f"dgp.{key}", "unknown config field")
    if "sigma" not in dgp_raw:
        _config_error("dgp.sigma", "is required")
    if "T" not in dgp_raw:
        _config_error("dgp.T", "is required")
    dgp_kwargs = {
        "theta1": _expect_number(dgp_raw.get("theta1", 0.5), "dgp.theta1", minimum=0.0, maximum=1.0),
        "theta2": _expect_number(dgp_raw.get("theta2", 0.5), "dgp.theta2", minimum=0.0, maximum=1.0),
        "sigma": _expect_number(dgp_raw["sigma"], "dgp.sigma"),
        "T": _expect_number(dgp_raw["T"], "dgp.T", integer=True, minimum=2),
    }
    if dgp_kwargs["sigma"] <= 0:
        _config_error("dgp.sigma", "must be a positive number")

    kwargs = {"manifold": raw["manifold"], "dgp": DgpConfig(**dgp_kwargs)}
    if "splits" in raw:
        splits = _expect_mapping(raw["splits"], "splits")
        for key in splits:
            if key not in {"train", "calibration", "test"}:
                _config_error(f"splits.{key}", "unknown config field")
        kwargs["train_frac"] = _expect_number(splits.get("train", 0.10), "splits.train")
        kwargs["cal_frac"] = _expect_number(splits.get("calibration", 0.40), "splits.calibration")
        kwargs["test_frac"] = _expect_number(splits.get("test", 0.50), "splits.test")
    if "n_studies" in raw:
        kwargs["n_studies"] = _expect_number(raw["n_studies"], "n_studies", integer=True, minimum=1)
    if "randomize_thetas" in raw:
        if not isinstance(raw["randomize_thetas"], bool):
            _config_error("randomize_thetas", "must be a boolean")
        kwargs["randomize_thetas"] = raw["randomize_thetas"]
    if "atoms" in raw:
        kwargs["atoms"] = _expect_number(raw["atoms"], "atoms", integer=True, minimum=2)
    if "alpha" in raw:
        kwargs["alpha"] = _expect_number(raw["alpha"], "alpha")
    if "thresholds" in raw:
        if not isinstance(raw["thresholds"], list):
            _config_error("thresholds", "must be a list of numbers in [0, 1]")
        values = []
        for pos, item in enumerate(raw["thresholds"]):
            values.append(_expect_number(item, f"thresholds[{pos}]", minimum=0.0, maximum=1.0))
        kwargs["thresholds"] = tuple(values)
    if "calibration_window" in raw and raw["calibration_window"] is not None:
        kwargs["calibration_window"] = _expect_number(
            raw["calibration_window"], "calibration_window", integer=True, minimum=1
        )
    if "forecaster" in raw:
        if not isinstance(raw["forecaster"], str):
            _config_error("forecaster", "must be a string")
        kwargs["forecaster"] = raw["forecaster"]
    if "seed" in raw:
        kwargs["seed"] = _expect_number(raw["seed"], "seed", integer=True, minimum=0)
    if "solver" in raw:
        solver_raw = _expect_mapping(raw["solver"], "solver")
        allowed = {
            "tol_f",
            "tol_g",
            "max_iters",
            "restarts",
            "perturbation",
            "min_step",
            "newton_mode",
            "seed",
        }
        for key in solver_raw:
            if key not in allowed:
                _config_error(f"solver.{key}", "unknown config field")
        try:
            kwargs["solver"] = SolverOptions(**solver_raw)
        except (TypeError, ValueError) as exc:
            _config_error("solver", str(exc))
    try:
        return StudyConfig(**kwargs)
    except ValueError as exc:
        raise ValueError(str(exc)) from None


@dataclass
class StudyReport:
    """Everything :func:`run_study` produced, ready for serialization."""

    spec_name: str
    records: list
    study_params: list
    tables: list
    calibration: dict
    strategies: list
    manifest: dict


def _config_manifest(config: StudyConfig, spec: ManifoldSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "manifold": spec.name,
            "dgp": {
                "theta1": config.dgp.theta1,
                "theta2": config.dgp.theta2,
                "sigma": config.dgp.sigma,
                "T": config.dgp.T,
            },
            "n_studies": config.n_studies,
            "randomize_thetas": config.randomize_thetas,
            "splits": {
                "train": config.train_frac,
                "calibration": config.cal_frac,
                "test": config.test_frac,
            },
            "atoms": config.atoms,
            "alpha": config.alpha,
            "thresholds": list(config.thresholds),
            "calibration_window": config.calibration_window,
            "forecaster": config.forecaster
            if isinstance(config.forecaster, str)
            else getattr(config.forecaster, "name", "custom"),
            "seed": config.seed,
            "solver": {
                "tol_f": config.solver.tol_f,
                "tol_g": config.solver.tol_g,
                "max_iters": config.solver.max_iters,
                "restarts": config.solver.restarts,
                "perturbation": config.solver.perturbation,
                "min_step": config.solver.min_step,
                "newton_mode": config.solver.newton_mode,
                "seed": config.solver.seed,
            },
        },
    }


def _run_single_study(spec: ManifoldSpec, config: StudyConfig, study: int):
    lift = spec.graph_lift
    d = lift.base_dim
    if config.randomize_thetas:
        drawn = np.random.default_rng([config.seed, study, 0]).random(2)
        theta1, theta2 = float(drawn[0]), float(drawn[1])
    else:
        theta1, theta2 = config.dgp.theta1, config.dgp.theta2
    dgp = replace(config.dgp, theta1=theta1, theta2=theta2, seed=(config.seed, study, 1))
    data = generate_dataset(spec, dgp)
    x_all, y_all = data[:-1], data[1:]
    n_pairs = x_all.shape[0]

    n_train = int(round(config.train_frac * n_pairs))
    n_cal = int(round(config.cal_frac * n_pairs))
    n_test = n_pairs - n_train - n_cal
    if n_train < 2 or n_cal < 1 or n_test < 1:
        raise ValueError(
            f"T={config.dgp.T} is too small for splits "
            f"({config.train_frac}, {config.cal_frac}, {config.test_frac})"
        )
    perm = np.random.default_rng([config.seed, study, 2]).permutation(n_pairs)
    idx_train = perm[:n_train]
    idx_cal = perm[n_train : n_train + n_cal]
    idx_test = perm[n_train + n_cal :]

    model = fit_forecaster(x_all[idx_train], y_all[idx_train], config.forecaster)
    x_cal, y_cal = x_all[idx_cal], y_all[idx_cal]

    m = spec.codim
    tags = set(spec.convexity)
    uniform_tag = tags.pop() if len(tags) == 1 else None
    has_class = uniform_tag is not None and uniform_tag is not Convexity.UNKNOWN

    records = []
    failed_points = 0
    failed_atoms = 0
    for j, ti in enumerate(idx_test):
        z_t = x_all[ti]
        z_true = y_all[ti]
        z_hat = model.predict(z_t[None, :])[0]
        try:
            proj = project(spec, z_hat, None, config.solver, point_index=j)
        except ProjectionError:
            failed_points += 1
            continue
        atom_rng = np.random.default_rng([config.seed, study, 3, j])
        raw_atoms = bootstrap_predictive(model, x_cal, y_cal, z_t, config.atoms, atom_rng)
        atom_results = batch_project(spec, raw_atoms, None, config.solver)
        reconciled = [res.z_tilde for res in atom_results if res.converged]
        failed_atoms += config.atoms - len(reconciled)
        if not reconciled:
            failed_points += 1
            continue
        estimate = theorem3_estimate(spec, proj, np.array(reconciled), None, config.alpha)

        th1 = c1 = th2b = None
        if m == 1:
            th1 = theorem1_check(spec, z_hat, proj).guaranteed
            if spec.convexity[0] is not Convexity.UNKNOWN:
                try:
                    c1 = corollary1_check(spec, proj).guaranteed
                except SolverQualityError:
                    c1 = None
        if m >= 2 and has_class:
            try:
                th2b = theorem2b_check(spec, proj).guaranteed
            except (ApplicabilityError, SingularConstraintError):
                th2b = None

        err_hat = float(np.linalg.norm(z_true - z_hat))
        err_til = float(np.linalg.norm(z_true - proj.z_tilde))
        records.append(
            StudyRecord(
                study=study,
                index=j,
                z=z_true.copy(),
                z_hat=z_hat.copy(),
                z_tilde=proj.z_tilde.copy(),
                err_hat=err_hat,
                err_til=err_til,
                e=estimate.e,
                e_lower=estimate.lower,
                e_upper=estimate.upper,
                th1=th1,
                c1=c1,
                th2b=th2b,
                improved=err_hat >= err_til,
            )
        )
    params = {
        "study": study,
        "theta1": theta1,
        "theta2": theta2 if d > 1 else None,
        "n_test": int(n_test),
        "n_failed_points": failed_points,
        "n_failed_atoms": failed_atoms,
    }
    return records, params


def _rate(flags):
    flags = [f for f in flags if f is not None]
    return float(np.mean(flags)) if flags else None


def _false_positive_rate(records, attr):
    pairs = [(getattr(r, attr), r.improved) for r in records if getattr(r, attr) is not None]
    if not pairs:
        return None
    return float(np.mean([flag and not improved for flag, improved in pairs]))


def _table_row(spec: ManifoldSpec, sigma: float, params: dict, records: list) -> dict:
    return {
        "study": params["study"],
        "manifold": spec.name,
        "sigma": sigma,
        "theta1": params["theta1"],
        "theta2": params["theta2"],
        "n_test": params["n_test"],
        "n_failed_points": params["n_failed_points"],
        "n_failed_atoms": params["n_failed_atoms"],
        "reduction_rate": _rate([r.improved for r in records]),
        "th1_rate": _rate([r.th1 for r in records]),
        "th1_fp": _false_positive_rate(records, "th1"),
        "c1_rate": _rate([r.c1 for r in records]),
        "c1_fp": _false_positive_rate(records, "c1"),
        "th2b_rate": _rate([r.th2b for r in records]),
        "th2b_fp": _false_positive_rate(records, "th2b"),
        "coverage": binary_coverage(records) if records else None,
        "mean_e": _rate([r.e for r in records]),
    }


def run_study(config: StudyConfig) -> StudyReport:
    """Run the configured batch of randomized studies.

    Per study: draw AR parameters (uniformly on ``[0, 1)`` unless pinned),
    simulate, shuffle one-step pairs into train/calibration/test splits, fit
    the forecaster, then per test point project the forecast, bootstrap and
    project a predictive sample, run the guarantee checks, and score the
    probabilistic estimate. Aggregates per-study tables, a pooled
    calibration curve, and strategy scores.

    The environment variable ``RECON_THREADS`` caps worker threads across
    studies (default 1); results are identical for any thread count.
    """
    spec = config.manifold if isinstance(config.manifold, ManifoldSpec) else registry_get(config.manifold)
    if spec.graph_lift is None:
        raise ValueError(f"manifold {spec.name!r} has no graph lift; cannot simulate")

    workers = 1
    env_threads = os.environ.get("RECON_THREADS", "").strip()
    if env_threads:
        try:
            workers = max(1, int(env_threads))
        except ValueError as exc:
            raise ValueError(f"RECON_THREADS must be an integer, got {env_threads!r}") from exc

    indices = range(config.n_studies)
    if workers > 1 and config.n_studies > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda r: _run_single_study(spec, config, r), indices))
    else:
        outcomes = [_run_single_study(spec, config, r) for r in indices]

    all_records = []
    study_params = []
    tables = []
    strategies = []
    for records, params in outcomes:
        all_records.extend(records)
        study_params.append(params)
        tables.append(_table_row(spec, config.dgp.sigma, params, records))
        if records:
            for label in ("always", *config.thresholds):
                outcome = apply_strategy(records, label)
                strategies.append(
                    {
                        "study": params["study"],
                        "theta": label,
                        "delta_rel_opt": outcome.delta_rel_opt,
                        "degenerate": outcome.degenerate,
                    }
                )

    pooled = {
        "study": "all",
        "manifold": spec.name,
        "sigma": config.dgp.sigma,
        "theta1": None,
        "theta2": None,
        "n_test": sum(p["n_test"] for p in study_params),
        "n_failed_points": sum(p["n_failed_points"] for p in study_params),
        "n_failed_atoms": sum(p["n_failed_atoms"] for p in study_params),
        "reduction_rate": _rate([r.improved for r in all_records]),
        "th1_rate": _rate([r.th1 for r in all_records]),
        "th1_fp": _false_positive_rate(all_records, "th1"),
        "c1_rate": _rate([r.c1 for r in all_records]),
        "c1_fp": _false_positive_rate(all_records, "c1"),
        "th2b_rate": _rate([r.th2b for r in all_records]),
        "th2b_fp": _false_positive_rate(all_records, "th2b"),
        "coverage": binary_coverage(all_records) if all_records else None,
        "mean_e": _rate([r.e for r in all_records]),
    }
    tables.append(pooled)

    calibration = {"t": [], "e_sorted": [], "r_nominal": [], "r_lower": [], "r_upper": []}
    if all_records:
        e_nom = np.array([r.e for r in all_records])
        e_lo = np.array([r.e_lower for r in all_records])
        e_hi = np.array([r.e_upper for r in all_records])
        outcomes_arr = np.array([r.improved for r in all_records], dtype=float)
        window = config.calibration_window or max(50, len(all_records) // 50)
        calibration = {
            "t": np.arange(len(all_records)),
            "e_sorted": e_nom[_calibration_order(e_nom, outcomes_arr)],
            "r_nominal": calibration_curve(e_nom, outcomes_arr, window),
            "r_lower": calibration_curve(e_lo, outcomes_arr, window),
            "r_upper": calibration_curve(e_hi, outcomes_arr, window),
        }

    return StudyReport(
        spec_name=spec.name,
        records=all_records,
        study_params=study_params,
        tables=tables,
        calibration=calibration,
        strategies=strategies,
        manifest=_config_manifest(config, spec),
    )


# ---------------------------------------------------------------------------
# Serialization


def format_number(value) -> str:
    """Shortest decimal round-trip form; empty string for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    path.write_text(buffer.getvalue(), encoding="utf-8")


_TABLE_COLUMNS = [
    "study",
    "manifold",
    "sigma",
    "theta1",
    "theta2",
    "n_test",
    "n_failed_points",
    "n_failed_atoms",
    "reduction_rate",
    "th1_rate",
    "th1_fp",
    "c1_rate",
    "c1_fp",
    "th2b_rate",
    "th2b_fp",
    "coverage",
    "mean_e",
]


def write_study_outputs(report: StudyReport, out_dir) -> dict:
    """Write records, tables, calibration, strategies, and the manifest.

    Returns a mapping from logical output name to the file path written.
    Output bytes depend only on the study config, so reruns are identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    n = len(report.records[0].z) if report.records else 0
    header = (
        ["study", "idx"]
        + [f"z{i}" for i in range(n)]
        + [f"zhat{i}" for i in range(n)]
        + [f"ztil{i}" for i in range(n)]
        + ["err_hat", "err_til", "e", "e_lo", "e_hi", "th1", "c1", "th2b", "improved"]
    )
    rows = []
    for r in report.records:
        rows.append(
            [format_number(r.study), format_number(r.index)]
            + [format_number(v) for v in r.z]
            + [format_number(v) for v in r.z_hat]
            + [format_number(v) for v in r.z_tilde]
            + [
                format_number(r.err_hat),
                format_number(r.err_til),
                format_number(r.e),
                format_number(r.e_lower),
                format_number(r.e_upper),
                format_number(r.th1),
                format_number(r.c1),
                format_number(r.th2b),
                format_number(r.improved),
            ]
        )
    paths["records"] = out / "records.csv"
    _write_csv(paths["records"], header, rows)

    table_rows = []
    for row in report.tables:
        table_rows.append(
            [row["study"] if row["study"] == "all" else format_number(row["study"]), row["manifold"]]
            + [format_number(row[k]) for k in _TABLE_COLUMNS[2:]]
        )
    paths["tables"] = out / "tables.csv"
    _write_csv(paths["tables"], _TABLE_COLUMNS, table_rows)

    cal = report.calibration
    cal_rows = [
        [
            format_number(cal["t"][i]),
            format_number(cal["e_sorted"][i]),
            format_number(cal["r_nominal"][i]),
            format_number(cal["r_lower"][i]),
            format_number(cal["r_upper"][i]),
        ]
        for i in range(len(cal["t"]))
    ]
    paths["calibration"] = out / "calibration.csv"
    _write_csv(paths["calibration"], ["t", "e_sorted", "r_nominal", "r_lower", "r_upper"], cal_rows)

    strat_rows = [
        [
            format_number(row["study"]),
            row["theta"] if isinstance(row["theta"], str) else format_number(row["theta"]),
            format_number(row["delta_rel_opt"]),
            format_number(row["degenerate"]),
        ]
        for row in report.strategies
    ]
    paths["strategies"] = out / "strategies.csv"
    _write_csv(paths["strategies"], ["study", "theta", "delta_rel_opt", "degenerate"], strat_rows)

    paths["manifest"] = out / "manifest.json"
    paths["manifest"].write_text(
        json.dumps(report.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths


def write_applicability_csv(rows: Sequence[ApplicabilityRow], path) -> None:
    """Write per-level applicability counts and rates to a path or handle."""
    header = [
        "sigma",
        "n_points",
        "n_failed",
        "n_condition",
        "n_reduction",
        "n_false_positive",
        "condition_rate",
        "reduction_rate",
    ]
    data = [
        [
            format_number(row.sigma),
            format_number(row.n_points),
            format_number(row.n_failed),
            format_number(row.n_condition),
            format_number(row.n_reduction),
            format_number(row.n_false_positive),
            format_number(row.condition_rate),
            format_number(row.reduction_rate),
        ]
        for row in rows
    ]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(data)
    if hasattr(path, "write"):
        path.write(buffer.getvalue())
    else:
        Path(path).write_text(buffer.getvalue(), encoding="utf-8")

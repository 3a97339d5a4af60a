"""Simulation harness: data generation, metrics, studies, serialization."""

import json
from types import SimpleNamespace

import numpy as np
import pytest

from nlrecon import (
    ApplicabilityRow,
    DgpConfig,
    SolverOptions,
    StudyConfig,
    applicability_study,
    apply_strategy,
    binary_coverage,
    calibration_curve,
    eval_f,
    format_number,
    frechet_mean_euclidean,
    generate_dataset,
    registry_get,
    run_study,
    spec_from_config,
    study_config_from_dict,
    write_applicability_csv,
    write_study_outputs,
)


# ---------------------------------------------------------------------------
# Data generation


def test_dgp_config_validation():
    DgpConfig(theta1=0.0, theta2=1.0, sigma=0.1, T=2)
    with pytest.raises(ValueError, match="theta1"):
        DgpConfig(theta1=-0.1, theta2=0.5, sigma=1.0, T=10)
    with pytest.raises(ValueError, match="theta2"):
        DgpConfig(theta1=0.5, theta2=1.2, sigma=1.0, T=10)
    with pytest.raises(ValueError, match="sigma"):
        DgpConfig(theta1=0.5, theta2=0.5, sigma=0.0, T=10)
    with pytest.raises(ValueError, match="T must be"):
        DgpConfig(theta1=0.5, theta2=0.5, sigma=1.0, T=1)


def test_generate_dataset_shape_and_feasibility():
    spec = registry_get("paraboloid")
    data = generate_dataset(spec, DgpConfig(0.6, 0.3, sigma=0.7, T=300, seed=4))
    assert data.shape == (300, 3)
    residuals = np.array([eval_f(spec, row) for row in data])
    assert np.max(np.abs(residuals)) <= 1e-12


def test_generate_dataset_unit_root_starts_at_zero():
    spec = registry_get("parabola")
    data = generate_dataset(spec, DgpConfig(1.0, 1.0, sigma=0.5, T=5, seed=9))
    assert data[0, 0] == 0.0
    assert data[0, 1] == 0.0


def test_generate_dataset_stationary_variance():
    # theta = 0.6, sigma = 0.8 gives stationary variance 0.64 / 0.64 = 1
    spec = registry_get("parabola")
    data = generate_dataset(spec, DgpConfig(0.6, 0.6, sigma=0.8, T=100_000, seed=13))
    assert np.var(data[:, 0]) == pytest.approx(1.0, rel=0.05)


def test_generate_dataset_deterministic_and_tuple_seed():
    spec = registry_get("parabola")
    dgp = DgpConfig(0.5, 0.5, sigma=1.0, T=50, seed=(3, 7))
    a = generate_dataset(spec, dgp)
    b = generate_dataset(spec, dgp)
    np.testing.assert_array_equal(a, b)
    c = generate_dataset(spec, DgpConfig(0.5, 0.5, sigma=1.0, T=50, seed=(3, 8)))
    assert not np.array_equal(a, c)


def test_generate_dataset_requires_graph_lift():
    spec = spec_from_config(
        {"name": "circle", "ambient_dim": 2, "constraints": ["z1^2 + z2^2 - 1"]}
    )
    with pytest.raises(ValueError, match="graph lift"):
        generate_dataset(spec, DgpConfig(0.5, 0.5, sigma=1.0, T=10))


# ---------------------------------------------------------------------------
# Calibration curve


def test_calibration_curve_frozen_example():
    # sorted outcomes are (1, 0, 1); window 2 clips at the edges
    e = np.array([0.1, 0.5, 0.9])
    outcomes = np.array([1.0, 0.0, 1.0])
    curve = calibration_curve(e, outcomes, 2)
    np.testing.assert_allclose(curve, [0.5, 2.0 / 3.0, 0.5])


def test_calibration_curve_window_one_is_sorted_outcomes():
    e = np.array([0.3, 0.1, 0.2])
    outcomes = np.array([1.0, 0.0, 1.0])
    np.testing.assert_array_equal(calibration_curve(e, outcomes, 1), [0.0, 1.0, 1.0])


def test_calibration_curve_huge_window_is_global_mean():
    rng = np.random.default_rng(2)
    e = rng.random(17)
    outcomes = (rng.random(17) < 0.4).astype(float)
    curve = calibration_curve(e, outcomes, 9999)
    np.testing.assert_allclose(curve, np.full(17, outcomes.mean()))


def test_calibration_curve_invariant_to_input_order_with_ties():
    rng = np.random.default_rng(3)
    e = np.repeat([0.2, 0.5, 0.8], 6)
    outcomes = (rng.random(18) < 0.5).astype(float)
    base = calibration_curve(e, outcomes, 4)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(18)
        np.testing.assert_array_equal(calibration_curve(e[perm], outcomes[perm], 4), base)


def test_calibration_curve_validation():
    with pytest.raises(ValueError, match="matching"):
        calibration_curve([0.1, 0.2], [1.0], 2)
    with pytest.raises(ValueError, match="at least one"):
        calibration_curve([], [], 2)
    with pytest.raises(ValueError, match="window"):
        calibration_curve([0.1], [1.0], 0)
    with pytest.raises(ValueError, match="window"):
        calibration_curve([0.1], [1.0], 2.0)


# ---------------------------------------------------------------------------
# Coverage and strategies


def _coverage_record(improved, lower, upper):
    return SimpleNamespace(improved=improved, e_lower=lower, e_upper=upper)


def test_binary_coverage_counts_correct_sides():
    records = [
        _coverage_record(True, 0.6, 0.9),   # hit: lower above half
        _coverage_record(True, 0.5, 0.9),   # miss: bound not strict
        _coverage_record(False, 0.1, 0.4),  # hit: upper below half
        _coverage_record(False, 0.1, 0.7),  # miss: interval straddles half
    ]
    assert binary_coverage(records) == pytest.approx(0.5)


def test_binary_coverage_validation():
    with pytest.raises(ValueError, match="at least one"):
        binary_coverage([])
    with pytest.raises(ValueError, match="bounds"):
        binary_coverage([_coverage_record(True, None, None)])


def _strategy_record(err_hat, err_til, e):
    return SimpleNamespace(
        err_hat=err_hat,
        err_til=err_til,
        e=e,
        z_hat=np.array([err_hat, 0.0]),
        z_tilde=np.array([err_til, 1.0]),
    )


def test_apply_strategy_oracle_scores_one_when_improvable():
    records = [
        _strategy_record(1.0, 0.5, 0.9),
        _strategy_record(0.4, 0.8, 0.2),
        _strategy_record(0.7, 0.7, 0.5),
    ]
    out = apply_strategy(records, "oracle")
    assert out.delta_rel_opt == 1.0
    assert not out.degenerate
    # ties go to the reconciled forecast
    np.testing.assert_array_equal(out.points[2], records[2].z_tilde)


def test_apply_strategy_threshold_selects_points():
    records = [
        _strategy_record(1.0, 0.5, 0.9),
        _strategy_record(0.4, 0.8, 0.2),
    ]
    out = apply_strategy(records, 0.5)
    np.testing.assert_array_equal(out.points[0], records[0].z_tilde)
    np.testing.assert_array_equal(out.points[1], records[1].z_hat)
    assert out.theta == 0.5

    never = apply_strategy(records, 1.0)
    np.testing.assert_array_equal(never.points[0], records[0].z_hat)
    assert never.delta_rel_opt == 0.0
    assert not never.degenerate


def test_apply_strategy_always_matches_full_reconciliation():
    records = [
        _strategy_record(1.0, 0.5, 0.9),
        _strategy_record(0.4, 0.8, 0.2),
    ]
    out = apply_strategy(records, "always")
    np.testing.assert_array_equal(out.points[1], records[1].z_tilde)

    def rms(v):
        return float(np.sqrt(np.mean(np.square(v))))

    base = rms([1.0, 0.4])
    achieved = rms([0.5, 0.8])
    best = rms([0.5, 0.4])
    assert out.delta_rel_opt == pytest.approx((base - achieved) / (base - best))


def test_apply_strategy_degenerate_when_oracle_cannot_improve():
    records = [_strategy_record(0.3, 0.5, 0.9), _strategy_record(0.2, 0.2, 0.8)]
    out = apply_strategy(records, 0.0)
    assert out.degenerate
    assert out.delta_rel_opt == 0.0


def test_apply_strategy_validation():
    with pytest.raises(ValueError, match="at least one"):
        apply_strategy([], 0.5)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        apply_strategy([_strategy_record(1.0, 0.5, 0.9)], 1.5)


# ---------------------------------------------------------------------------
# Frechet mean


def test_frechet_mean_single_atom_is_identity():
    spec = registry_get("parabola")
    atom = np.array([[0.7, 0.49]])
    out = frechet_mean_euclidean(spec, atom)
    np.testing.assert_array_equal(out, atom[0])


def test_frechet_mean_degenerate_weight_picks_that_atom():
    spec = registry_get("parabola")
    atoms = np.array([[0.7, 0.49], [-1.0, 1.0]])
    out = frechet_mean_euclidean(spec, atoms, weights=[0.0, 1.0])
    np.testing.assert_array_equal(out, atoms[1])


def test_frechet_mean_beats_each_atom_on_objective():
    spec = registry_get("paraboloid")
    rng = np.random.default_rng(6)
    base = rng.normal(size=(12, 2))
    atoms = spec.graph_lift.lift(base)
    mean = frechet_mean_euclidean(spec, atoms)
    assert np.max(np.abs(eval_f(spec, mean))) <= 1e-9

    def objective(point):
        return float(np.mean(np.sum((atoms - point) ** 2, axis=1)))

    best_atom = min(objective(a) for a in atoms)
    assert objective(mean) <= best_atom + 1e-12


def test_frechet_mean_validation():
    spec = registry_get("parabola")
    good = np.array([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="off the constraint set"):
        frechet_mean_euclidean(spec, [[0.0, 0.5], [1.0, 1.0]])
    with pytest.raises(ValueError, match="shape"):
        frechet_mean_euclidean(spec, np.zeros((2, 3)))
    with pytest.raises(ValueError, match="align"):
        frechet_mean_euclidean(spec, good, weights=[1.0])
    with pytest.raises(ValueError, match="nonnegative"):
        frechet_mean_euclidean(spec, good, weights=[1.5, -0.5])
    with pytest.raises(ValueError, match="sum to 1"):
        frechet_mean_euclidean(spec, good, weights=[0.7, 0.6])


# ---------------------------------------------------------------------------
# Applicability rates


def test_applicability_study_counts_are_consistent():
    spec = registry_get("parabola")
    rows = applicability_study(spec, [0.2, 0.5], 40, seed=5)
    assert len(rows) == 2
    for row, sigma in zip(rows, (0.2, 0.5)):
        assert isinstance(row, ApplicabilityRow)
        assert row.sigma == sigma
        assert row.n_points == 40
        assert 0 <= row.n_failed <= row.n_points
        assert row.n_condition <= row.n_converged
        assert row.n_reduction <= row.n_converged
        assert row.n_false_positive <= row.n_condition
        assert 0.0 <= row.condition_rate <= 1.0


def test_applicability_study_deterministic():
    spec = registry_get("paraboloid")
    a = applicability_study(spec, [0.3], 25, seed=11)
    b = applicability_study(spec, [0.3], 25, seed=11)
    assert a == b


def test_applicability_study_validation():
    spec = registry_get("parabola")
    with pytest.raises(ValueError, match="n_points"):
        applicability_study(spec, [0.5], 0)
    with pytest.raises(ValueError, match="positive"):
        applicability_study(spec, [0.0], 5)


def test_write_applicability_csv_path_and_handle(tmp_path):
    import io

    rows = [
        ApplicabilityRow(
            sigma=0.5, n_points=10, n_failed=1, n_condition=6, n_reduction=8, n_false_positive=0
        )
    ]
    target = tmp_path / "app.csv"
    write_applicability_csv(rows, target)
    text = target.read_text()
    buffer = io.StringIO()
    write_applicability_csv(rows, buffer)
    assert buffer.getvalue() == text
    lines = text.splitlines()
    assert lines[0] == (
        "sigma,n_points,n_failed,n_condition,n_reduction,n_false_positive,"
        "condition_rate,reduction_rate"
    )
    assert lines[1].startswith("0.5,10,1,6,8,0,")


# ---------------------------------------------------------------------------
# Study configuration


def test_study_config_defaults():
    cfg = StudyConfig(manifold="parabola", dgp=DgpConfig(0.5, 0.5, 1.0, 100))
    assert cfg.n_studies == 25
    assert cfg.randomize_thetas
    assert (cfg.train_frac, cfg.cal_frac, cfg.test_frac) == (0.10, 0.40, 0.50)
    assert cfg.atoms == 200
    assert cfg.alpha == 0.05
    assert cfg.thresholds == tuple(round(0.1 * i, 1) for i in range(10))
    assert cfg.calibration_window is None
    assert cfg.forecaster == "linear-ar"
    assert cfg.solver == SolverOptions()


def test_study_config_validation():
    dgp = DgpConfig(0.5, 0.5, 1.0, 100)
    with pytest.raises(ValueError, match="n_studies"):
        StudyConfig(manifold="parabola", dgp=dgp, n_studies=0)
    with pytest.raises(ValueError, match="sum to 1"):
        StudyConfig(manifold="parabola", dgp=dgp, train_frac=0.5, cal_frac=0.4, test_frac=0.5)
    with pytest.raises(ValueError, match="atoms"):
        StudyConfig(manifold="parabola", dgp=dgp, atoms=1)
    with pytest.raises(ValueError, match="alpha"):
        StudyConfig(manifold="parabola", dgp=dgp, alpha=1.0)
    with pytest.raises(ValueError, match="thresholds"):
        StudyConfig(manifold="parabola", dgp=dgp, thresholds=(0.5, 1.2))
    with pytest.raises(ValueError, match="forecaster"):
        StudyConfig(manifold="parabola", dgp=dgp, forecaster="arima")
    with pytest.raises(ValueError, match="seed"):
        StudyConfig(manifold="parabola", dgp=dgp, seed=-1)


def test_study_config_from_dict_minimal():
    cfg = study_config_from_dict({"manifold": "parabola", "dgp": {"sigma": 1.0, "T": 100}})
    assert cfg.manifold == "parabola"
    assert cfg.dgp == DgpConfig(0.5, 0.5, 1.0, 100)
    assert cfg.n_studies == 25


def test_study_config_from_dict_full():
    cfg = study_config_from_dict(
        {
            "manifold": "paraboloid",
            "dgp": {"theta1": 0.2, "theta2": 0.8, "sigma": 0.5, "T": 400},
            "n_studies": 3,
            "randomize_thetas": False,
            "splits": {"train": 0.2, "calibration": 0.3, "test": 0.5},
            "atoms": 50,
            "alpha": 0.1,
            "thresholds": [0.0, 0.5],
            "calibration_window": 25,
            "forecaster": "persistence",
            "seed": 9,
            "solver": {"max_iters": 40, "restarts": 2},
        }
    )
    assert cfg.dgp.theta1 == 0.2
    assert not cfg.randomize_thetas
    assert cfg.train_frac == 0.2
    assert cfg.thresholds == (0.0, 0.5)
    assert cfg.calibration_window == 25
    assert cfg.solver.max_iters == 40
    assert cfg.solver.restarts == 2
    assert cfg.solver.tol_f == SolverOptions().tol_f


@pytest.mark.parametrize(
    "raw, path",
    [
        ({}, "manifold: must name"),
        ({"manifold": 3, "dgp": {"sigma": 1.0, "T": 10}}, "manifold: must name"),
        ({"manifold": "parabola"}, "dgp: is required"),
        ({"manifold": "parabola", "dgp": {"T": 10}}, "dgp.sigma: is required"),
        ({"manifold": "parabola", "dgp": {"sigma": 1.0}}, "dgp.T: is required"),
        (
            {"manifold": "parabola", "dgp": {"sigma": -1.0, "T": 10}},
            "dgp.sigma: must be a positive number",
        ),
        (
            {"manifold": "parabola", "dgp": {"sigma": 1.0, "T": 9.5}},
            "dgp.T: must be an integer",
        ),
        (
            {"manifold": "parabola", "dgp": {"sigma": 1.0, "T": 10, "mean": 0}},
            "dgp.mean: unknown config field",
        ),
        (
            {"manifold": "parabola", "dgp": {"sigma": 1.0, "T": 10}, "foo": 1},
            "foo: unknown config field",
        ),
        (
            {
                "manifold": "parabola",
                "dgp": {"sigma": 1.0, "T": 10},
                "solver": {"bogus": 1},
            },
            "solver.bogus: unknown config field",
        ),
        (
            {
                "manifold": "parabola",
                "dgp": {"sigma": 1.0, "T": 10},
                "thresholds": [0.5, 2.0],
            },
            r"thresholds\[1\]: must be <= 1.0",
        ),
        (
            {
                "manifold": "parabola",
                "dgp": {"sigma": 1.0, "T": 10},
                "splits": {"train": 0.2, "frac": 0.1},
            },
            "splits.frac: unknown config field",
        ),
        (
            {"manifold": "parabola", "dgp": {"sigma": 1.0, "T": 10}, "n_studies": 0},
            "n_studies: must be >= 1",
        ),
        (
            {
                "manifold": "parabola",
                "dgp": {"sigma": 1.0, "T": 10},
                "randomize_thetas": "yes",
            },
            "randomize_thetas: must be a boolean",
        ),
        (
            {
                "manifold": "parabola",
                "dgp": {"sigma": 1.0, "T": 10},
                "solver": {"tol_f": -1.0},
            },
            "solver: ",
        ),
    ],
)
def test_study_config_from_dict_errors_name_the_field(raw, path):
    with pytest.raises(ValueError, match=path):
        study_config_from_dict(raw)


# ---------------------------------------------------------------------------
# Study runs


def _tiny_config(**overrides):
    kwargs = dict(
        manifold="parabola",
        dgp=DgpConfig(0.5, 0.5, sigma=0.4, T=60, seed=0),
        n_studies=2,
        atoms=16,
        thresholds=(0.0, 0.5, 0.9),
        seed=7,
    )
    kwargs.update(overrides)
    return StudyConfig(**kwargs)


def test_run_study_structure_and_determinism():
    report = run_study(_tiny_config())
    again = run_study(_tiny_config())

    assert report.spec_name == "parabola"
    assert report.manifest["schema_version"] == 1
    assert report.manifest["config"]["seed"] == 7
    assert len(report.study_params) == 2
    assert report.records
    assert len(report.tables) == 3
    pooled = report.tables[-1]
    assert pooled["study"] == "all"
    assert pooled["n_test"] == sum(p["n_test"] for p in report.study_params)
    assert len(report.strategies) == 2 * (1 + 3)
    assert report.strategies[0]["theta"] == "always"

    assert len(again.records) == len(report.records)
    for a, b in zip(report.records, again.records):
        assert a.e == b.e and a.err_hat == b.err_hat
        np.testing.assert_array_equal(a.z_tilde, b.z_tilde)

    n = len(report.records)
    for key in ("t", "e_sorted", "r_nominal", "r_lower", "r_upper"):
        assert len(report.calibration[key]) == n


def test_run_study_pinned_thetas_and_hypersurface_checks():
    report = run_study(_tiny_config(randomize_thetas=False))
    for params in report.study_params:
        assert params["theta1"] == 0.5
        assert params["theta2"] is None  # scalar base coordinate
    for record in report.records:
        assert record.th1 is not None
        assert record.c1 is None or isinstance(record.c1, bool)
        assert record.th2b is None
        assert record.improved == (record.err_hat >= record.err_til)
        assert record.e_lower <= record.e <= record.e_upper


def test_run_study_randomized_thetas_differ_across_studies():
    report = run_study(_tiny_config())
    thetas = [p["theta1"] for p in report.study_params]
    assert thetas[0] != thetas[1]
    assert all(0.0 <= t < 1.0 for t in thetas)


def test_run_study_persistence_forecast_sits_on_manifold():
    report = run_study(_tiny_config(forecaster="persistence"))
    assert report.records
    for record in report.records:
        assert record.e == 1.0
        assert record.improved
        assert record.err_hat == record.err_til
    pooled = report.tables[-1]
    assert pooled["coverage"] == 1.0
    assert pooled["mean_e"] == 1.0


def test_run_study_thread_count_does_not_change_results(tmp_path, monkeypatch):
    report = run_study(_tiny_config())
    write_study_outputs(report, tmp_path / "serial")
    monkeypatch.setenv("RECON_THREADS", "3")
    threaded = run_study(_tiny_config())
    write_study_outputs(threaded, tmp_path / "threaded")
    for name in ("records.csv", "tables.csv", "calibration.csv", "strategies.csv", "manifest.json"):
        assert (tmp_path / "serial" / name).read_bytes() == (
            tmp_path / "threaded" / name
        ).read_bytes()


def test_run_study_rejects_bad_thread_env(monkeypatch):
    monkeypatch.setenv("RECON_THREADS", "many")
    with pytest.raises(ValueError, match="RECON_THREADS"):
        run_study(_tiny_config())


def test_run_study_requires_graph_lift():
    spec = spec_from_config(
        {"name": "circle", "ambient_dim": 2, "constraints": ["z1^2 + z2^2 - 1"]}
    )
    with pytest.raises(ValueError, match="graph lift"):
        run_study(_tiny_config(manifold=spec))


# ---------------------------------------------------------------------------
# Serialization


def test_format_number_cases():
    assert format_number(None) == ""
    assert format_number(True) == "1"
    assert format_number(False) == "0"
    assert format_number(np.bool_(True)) == "1"
    assert format_number(5) == "5"
    assert format_number(np.int64(-3)) == "-3"
    assert format_number(0.1) == "0.1"
    assert format_number(0.1 + 0.2) == "0.30000000000000004"
    rng = np.random.default_rng(1)
    for x in rng.normal(size=20):
        assert float(format_number(float(x))) == float(x)


def test_write_study_outputs_files_and_rerun_identical(tmp_path):
    report = run_study(_tiny_config())
    first = tmp_path / "a"
    paths = write_study_outputs(report, first)
    assert set(paths) == {"records", "tables", "calibration", "strategies", "manifest"}

    records_text = paths["records"].read_text()
    lines = records_text.splitlines()
    assert lines[0] == (
        "study,idx,z0,z1,zhat0,zhat1,ztil0,ztil1,"
        "err_hat,err_til,e,e_lo,e_hi,th1,c1,th2b,improved"
    )
    assert len(lines) == len(report.records) + 1

    tables_text = paths["tables"].read_text()
    assert tables_text.splitlines()[0] == (
        "study,manifold,sigma,theta1,theta2,n_test,n_failed_points,n_failed_atoms,"
        "reduction_rate,th1_rate,th1_fp,c1_rate,c1_fp,th2b_rate,th2b_fp,coverage,mean_e"
    )
    assert tables_text.splitlines()[-1].startswith("all,parabola,")

    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["schema_version"] == 1
    assert manifest["config"]["manifold"] == "parabola"
    assert "timestamp" not in json.dumps(manifest)

    second = tmp_path / "b"
    write_study_outputs(run_study(_tiny_config()), second)
    for name in ("records.csv", "tables.csv", "calibration.csv", "strategies.csv", "manifest.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

import numpy as np
import pytest

from src.exceptions import (
    DimensionMismatchError,
    GridCoverageError,
    MetricConstraintError,
)
from src.models import AnalyticGaussianEnergy, MlpEnergy
from src.numerics import GaussianSummary, Rng
from src.schemas.evaluation import EvalRow, GridAxis, GridSpec
from src.services.artifacts import (
    EVAL_COLUMNS,
    RunDirectory,
    append_eval_rows,
    read_samples_csv,
    samples_csv_text,
    scatter_svg,
    write_samples_csv,
)
from src.services.evaluation import (
    frechet_from_samples,
    frechet_gaussian,
    grid_coverage,
    grid_kl,
    oracle_log_likelihood,
    target_grid,
)


class TestFrechet:
    def test_identical_samples_give_zero(self, rng):
        X = rng.normal(size=(500, 2))
        assert frechet_from_samples(X, X) == pytest.approx(0.0, abs=1e-8)

    def test_mean_shift(self):
        a = GaussianSummary(np.zeros(2), np.eye(2))
        b = GaussianSummary(np.array([3.0, 4.0]), np.eye(2))
        assert frechet_gaussian(a, b) == pytest.approx(25.0, abs=1e-10)

    def test_covariance_scale(self):
        a = GaussianSummary(np.zeros(2), np.eye(2))
        b = GaussianSummary(np.zeros(2), 4.0 * np.eye(2))
        assert frechet_gaussian(a, b) == pytest.approx(2.0, abs=1e-10)

    def test_symmetric(self, rng):
        A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        a = GaussianSummary(rng.normal(size=3), A @ A.T + 0.1 * np.eye(3))
        b = GaussianSummary(rng.normal(size=3), B @ B.T + 0.1 * np.eye(3))
        assert frechet_gaussian(a, b) == pytest.approx(frechet_gaussian(b, a), rel=1e-8)

    def test_common_translation_leaves_distance_unchanged(self, rng):
        X = rng.normal(size=(400, 2))
        Y = 1.5 * rng.normal(size=(300, 2)) + np.array([1.0, -2.0])
        shift = np.array([-40.0, 12.5])
        base = frechet_from_samples(X, Y)
        assert frechet_from_samples(X + shift, Y + shift) == pytest.approx(base, rel=1e-8)
        a = GaussianSummary(np.array([0.5, 0.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
        b = GaussianSummary(np.array([-1.0, 2.0]), np.eye(2))
        moved_a = GaussianSummary(a.mean + shift, a.cov)
        moved_b = GaussianSummary(b.mean + shift, b.cov)
        assert frechet_gaussian(moved_a, moved_b) == pytest.approx(frechet_gaussian(a, b))

    def test_one_dimensional_closed_form(self):
        a = GaussianSummary(np.array([1.0]), np.array([[1.0]]))
        b = GaussianSummary(np.array([-1.0]), np.array([[9.0]]))
        assert frechet_gaussian(a, b) == pytest.approx(4.0 + (1.0 - 3.0) ** 2)

    def test_dimension_mismatch(self):
        a = GaussianSummary(np.zeros(2), np.eye(2))
        b = GaussianSummary(np.zeros(3), np.eye(3))
        with pytest.raises(DimensionMismatchError):
            frechet_gaussian(a, b)


class TestOracleLikelihood:
    def test_standard_gaussian_at_origin(self, standard_1d):
        assert oracle_log_likelihood(standard_1d, [[0.0]]) == pytest.approx(-0.9189, abs=1e-4)

    def test_expected_value_over_samples(self, standard_1d):
        X = standard_1d.sample(100_000, Rng(8))
        assert oracle_log_likelihood(standard_1d, X) == pytest.approx(-1.4189, abs=0.01)

    def test_needs_exact_density(self, small_mlp):
        with pytest.raises(MetricConstraintError):
            oracle_log_likelihood(small_mlp, np.zeros((3, 2)))


class TestGridKl:
    def test_model_equal_to_target(self, standard_1d):
        grid = target_grid(standard_1d, 256)
        assert grid_kl(AnalyticGaussianEnergy.standard(1), standard_1d, grid) < 1e-6

    def test_unit_mean_shift(self, standard_1d):
        model = AnalyticGaussianEnergy([1.0], [[1.0]])
        kl = grid_kl(model, standard_1d, target_grid(standard_1d, 512))
        assert kl == pytest.approx(0.5, rel=0.02)

    def test_two_dimensional_target(self, gaussian_2d):
        model = AnalyticGaussianEnergy(gaussian_2d.mu, gaussian_2d.precision)
        assert grid_kl(model, gaussian_2d, target_grid(gaussian_2d, 128)) < 1e-6

    def test_wider_model_costs_known_amount(self, standard_1d):
        # KL(N(0,1) || N(0,4)) = log 2 + 1/8 - 1/2
        model = AnalyticGaussianEnergy([0.0], [[0.25]])
        kl = grid_kl(model, standard_1d, target_grid(standard_1d, 512))
        assert kl == pytest.approx(np.log(2.0) - 0.375, rel=0.02)

    def test_refining_grid_does_not_raise_kl(self, two_modes):
        model = AnalyticGaussianEnergy([0.3], [[0.5]])
        kls = [grid_kl(model, two_modes, target_grid(two_modes, n)) for n in (32, 64, 128, 256)]
        for coarse, fine in zip(kls, kls[1:]):
            assert fine <= coarse + 1e-3
        assert kls[-1] > 0.0

    def test_mixture_grid_covers_every_mode(self, two_modes):
        grid = target_grid(two_modes, 256)
        assert grid_coverage(two_modes, grid) > 0.999
        assert grid.axes[0].lo < -1.5 < 1.5 < grid.axes[0].hi

    def test_insufficient_coverage(self, standard_1d):
        grid = GridSpec.cube(1, 3.0, 5.0, n_points=64)
        with pytest.raises(GridCoverageError):
            grid_kl(AnalyticGaussianEnergy.standard(1), standard_1d, grid)

    def test_high_dimension_rejected(self, rng):
        target = AnalyticGaussianEnergy.standard(4)
        model = MlpEnergy([4, 8, 1], rng=rng)
        with pytest.raises(MetricConstraintError):
            grid_kl(model, target, GridSpec.cube(4, -5.0, 5.0, n_points=16))
        with pytest.raises(MetricConstraintError):
            target_grid(target)

    def test_model_dimension_must_match_grid(self, standard_1d, small_mlp):
        with pytest.raises(MetricConstraintError):
            grid_kl(small_mlp, standard_1d, target_grid(standard_1d, 64))

    def test_axis_validation(self):
        with pytest.raises(ValueError):
            GridAxis(lo=1.0, hi=0.0)
        with pytest.raises(ValueError):
            GridAxis(lo=0.0, hi=1.0, n_points=4)


class TestArtifacts:
    def test_samples_csv_round_trip(self, tmp_path, rng):
        X = rng.normal(size=(5, 2))
        path = write_samples_csv(tmp_path / "samples.csv", X, 2)
        np.testing.assert_array_equal(read_samples_csv(path), X)

    def test_empty_samples_have_header_only(self, tmp_path):
        assert samples_csv_text(np.empty((0, 3)), 3) == "x0,x1,x2\n"
        path = write_samples_csv(tmp_path / "empty.csv", np.empty((0, 3)), 3)
        assert read_samples_csv(path).shape == (0, 3)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DimensionMismatchError):
            read_samples_csv(path)

    def test_scatter_is_deterministic(self, rng):
        X = rng.normal(size=(20, 2))
        svg = scatter_svg(X)
        assert svg == scatter_svg(X.copy())
        assert svg.count("<circle") == 20
        assert svg.startswith('<?xml version="1.0"')

    def test_scatter_handles_one_dimension_and_empty(self):
        assert scatter_svg(np.array([[0.0], [1.0]]), 1).count('cy="200.000"') == 2
        assert "<circle" not in scatter_svg(np.empty((0, 2)), 2)

    def test_eval_rows_append_with_single_header(self, tmp_path):
        path = tmp_path / "eval.csv"
        append_eval_rows(path, [EvalRow(run_id="a", metric="frechet", value=0.5, config_hash="h")])
        append_eval_rows(path, [EvalRow(run_id="b", metric="loglik", value=-1.0, config_hash="")])
        lines = path.read_text().splitlines()
        assert lines == [",".join(EVAL_COLUMNS), "a,frechet,0.5,h", "b,loglik,-1.0,"]

    def test_run_directory(self, tmp_path):
        run = RunDirectory(tmp_path / "nested" / "run")
        run.write_json(RunDirectory.RESOLVED_CONFIG, {"b": 1, "a": 2})
        text = run.path(RunDirectory.RESOLVED_CONFIG).read_text()
        assert text.index('"a"') < text.index('"b"')
        assert run.exists(RunDirectory.RESOLVED_CONFIG)
        assert not run.exists(RunDirectory.TRAIN_LOG)

import numpy as np
import pytest

from resilience.contour import ContourGrid, axis, emit_contour
from resilience.errors import DataError
from resilience.inference.models import Form, ModelSpec, model_predict
from resilience.inference.sampler import MCMCConfig, PosteriorResult

MULT = ModelSpec(Form.MULTIPLICATIVE, ("g", "t"), "r")


def posterior(theta, spec=MULT):
    samples = np.broadcast_to(np.asarray(theta, float), (2, 5, len(theta))).copy()
    return PosteriorResult(spec.all_names, samples, np.zeros((2, 5)), [0.2, 0.2], MCMCConfig(), spec)


def test_zero_slopes_give_a_flat_surface():
    g = emit_contour(posterior([0.0, 0.0, 0.0, 2.0, 0.1]), MULT, [0, 10, 20], [40, 60], 0)
    np.testing.assert_array_equal(g.z, 3.0)
    assert g.z.shape == (2, 3)


def test_surface_matches_model_at_grid_points():
    theta = [-4.0, 0.05, 0.03, 0.1, 0.2]
    w1, w2 = np.array([5.0, 20.0, 35.0]), np.array([40.0, 70.0])
    g = emit_contour(posterior(theta), MULT, w1, w2, 1)
    for i, t in enumerate(w2):
        for j, s in enumerate(w1):
            assert g.z[i, j] == pytest.approx(model_predict(MULT, theta[:-1], [s, t]), rel=1e-12)
    assert np.all(np.diff(g.z, axis=0) > 0) and np.all(np.diff(g.z, axis=1) > 0)
    assert g.precip_flag == 1 and (g.w1_name, g.w2_name) == ("g", "t")


def test_log1p_surface_is_back_transformed():
    spec = ModelSpec(Form.MULTIPLICATIVE, ("g", "t"), "auc", response_transform="log1p")
    g = emit_contour(posterior([0.0, 0.0, 0.0, 1.0, 0.1], spec), spec, [0, 1], [0, 1], 0)
    np.testing.assert_allclose(g.z, np.expm1(2.0), rtol=1e-12)


def test_single_predictor_model_is_refused():
    spec = ModelSpec(Form.SINGLE_EXP, ("g",), "r")
    with pytest.raises(DataError):
        emit_contour(posterior([1.0, 0.0, 0.0, 0.1], spec), spec, [0, 1], [0, 1], 0)


def test_shape_and_axis_validation():
    with pytest.raises(ValueError):
        ContourGrid([0, 1, 2], [0, 1], np.zeros((3, 2)), 0, "m")
    with pytest.raises(ValueError):
        ContourGrid([0, 2, 1], [0, 1], np.zeros((2, 3)), 0, "m")


def test_axis():
    np.testing.assert_array_equal(axis([3.0, 1.0, 2.0], 3), [1, 2, 3])
    np.testing.assert_array_equal(axis([5.0], 3), [4.5, 5, 5.5])
    np.testing.assert_array_equal(axis([1.0], 2, (0, 10)), [0, 10])


def test_csv_round_trip(tmp_path):
    g = emit_contour(posterior([-4.0, 0.05, 0.03, 0.1, 0.2]), MULT, np.linspace(0, 50, 7), np.linspace(30, 90, 4), 0)
    g.to_csv(tmp_path / "c.csv")
    back = ContourGrid.from_csv(tmp_path / "c.csv", 0, g.model_id)
    np.testing.assert_array_equal(back.w1_axis, g.w1_axis)
    np.testing.assert_array_equal(back.w2_axis, g.w2_axis)
    np.testing.assert_array_equal(back.z, g.z)
    assert (back.w1_name, back.w2_name) == ("g", "t")

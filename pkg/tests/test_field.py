import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopfmean.errors import NonFiniteError
from hopfmean.field import (
    VectorFieldModel,
    bilinear_B,
    eval_rhs,
    jacobian,
    model_from_file,
    trilinear_C,
    verify_analytic_tensors,
)
from hopfmean.models import brusselator, feedback_control, linear, predator_prey, wilson_cowan

M = np.array([[0.3, -1.2, 0.0], [0.8, -0.1, 0.5], [0.0, 2.0, -1.0]])

BRUSS_FILE = {
    "dimension": 2,
    "parameters": {"A": 1.0, "alpha": 2.0},
    "bifurcation_parameter": "alpha",
    "equations": ["A - (alpha+1)*x1 + x1^2*x2", "alpha*x1 - x1^2*x2"],
}


def test_rhs_at_equilibria():
    assert np.all(eval_rhs(brusselator(1.0), [1.0, 2.0], 2.0) == 0.0)
    assert np.all(eval_rhs(linear(M), np.zeros(3), 0.0) == 0.0)
    assert np.all(eval_rhs(feedback_control(), np.zeros(3), 1.0) == 0.0)


def test_rhs_shape_checked():
    with pytest.raises(ValueError):
        eval_rhs(brusselator(), [1.0, 2.0, 3.0], 2.0)


def test_rhs_non_finite_flagged():
    model = model_from_file({"dimension": 1, "parameters": {"a": 1.0},
                             "bifurcation_parameter": "a", "equations": ["a/x1"]})
    with pytest.raises(NonFiniteError):
        eval_rhs(model, [0.0], 1.0)


def test_jacobians():
    J = jacobian(brusselator(1.0), [1.0, 2.0], 2.0)
    assert np.array_equal(J, [[1.0, 1.0], [-2.0, -1.0]])
    Jf = jacobian(feedback_control(1.0), np.zeros(3), 1.0)
    assert np.array_equal(Jf, [[0, 1, 0], [0, 0, 1], [-1, -1, -1]])
    assert np.max(np.abs(jacobian(linear(M, analytic=False), np.zeros(3), 0.0) - M)) <= 1e-9


def test_fd_jacobian_of_expression_model():
    model = model_from_file(BRUSS_FILE)
    J = jacobian(model, [1.0, 2.0], 2.0)
    assert np.allclose(J, [[1.0, 1.0], [-2.0, -1.0]], atol=1e-9)


def test_known_tensor_values():
    fc = feedback_control()
    e1 = np.array([1, 0, 0])
    assert np.array_equal(bilinear_B(fc, np.zeros(3), 1.0, e1, e1), [0, 0, 2])
    assert np.array_equal(trilinear_C(fc, np.zeros(3), 1.0, e1, e1, e1), [0, 0, 0])
    br = brusselator(1.5)
    x0 = np.array([1.5, 2.0 / 1.5])
    assert np.allclose(bilinear_B(br, x0, 2.0, [1, 0], [1, 0]), [2 * 2.0 / 1.5, -2 * 2.0 / 1.5])
    assert np.array_equal(trilinear_C(br, x0, 2.0, [1, 0], [1, 0], [0, 1]), [2, -2])


def test_fd_tensors_of_expression_model():
    model = model_from_file(BRUSS_FILE)
    x0 = np.array([1.0, 2.0])
    assert np.allclose(bilinear_B(model, x0, 2.0, [1, 0], [1, 0]), [4, -4], atol=1e-6)
    assert np.allclose(trilinear_C(model, x0, 2.0, [1, 0], [1, 0], [0, 1]), [2, -2], atol=1e-6)
    assert np.max(np.abs(trilinear_C(model, x0, 2.0, [0, 1], [0, 1], [0, 1]))) <= 1e-6


def test_linear_model_tensors_vanish():
    an, fd = linear(M), linear(M, analytic=False)
    u, v = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.2, 1.0])
    assert np.all(bilinear_B(an, np.zeros(3), 0.0, u, v) == 0)
    assert np.max(np.abs(bilinear_B(fd, np.zeros(3), 0.0, u, v))) <= 1e-8


@pytest.mark.parametrize("model, x0, alpha", [
    (brusselator(1.0), [1.0, 2.0], 2.0),
    (brusselator(0.8), [0.8, 2.0], 2.5),
    (predator_prey(), [1.3 / (4 * 0.7), 2 / (4 * 0.7) * (1 - 1.3 / 2.8)], 4.0),
    (feedback_control(), [0.0, 0.0, 0.0], 1.0),
    (feedback_control(2.0), [0.1, -0.2, 0.3], 0.5),
])
def test_analytic_tensors_match_fd(model, x0, alpha):
    rep = verify_analytic_tensors(model, np.array(x0), alpha, trials=100, seed=1)
    assert rep.ok, rep.message
    assert rep.max_rel_err_B <= 1e-6 and rep.max_rel_err_C <= 1e-6


def test_linear_report():
    rep = verify_analytic_tensors(linear(M), np.zeros(3), 0.0)
    assert rep.ok
    assert rep.max_rel_err_B <= 1e-8 and rep.max_rel_err_C <= 1e-8


def test_missing_tensors_reported():
    rep = verify_analytic_tensors(wilson_cowan(), np.array([0.1, 0.1]), 0.1)
    assert not rep.ok and rep.message == "analytic tensors absent"


vec = st.lists(st.floats(-1, 1), min_size=2, max_size=2).map(np.array)
cvec = st.tuples(vec, vec).map(lambda t: t[0] + 1j * t[1]).filter(lambda z: np.linalg.norm(z) >= 0.1)
scalars = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@given(cvec, cvec, cvec)
def test_fd_symmetry(u, v, w):
    model, x0 = wilson_cowan(I=0.13), np.array([0.2, 0.15])
    b1 = bilinear_B(model, x0, 0.13, u, v)
    b2 = bilinear_B(model, x0, 0.13, v, u)
    scale = max(1.0, np.linalg.norm(b1))
    assert np.linalg.norm(b1 - b2) <= 1e-8 * np.linalg.norm(u) * np.linalg.norm(v) * scale
    c = [trilinear_C(model, x0, 0.13, *perm) for perm in itertools.permutations((u, v, w))]
    tol = 1e-8 * max(1.0, np.linalg.norm(c[0])) * np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w)
    assert max(np.linalg.norm(ci - c[0]) for ci in c) <= tol


@given(scalars, cvec, cvec)
def test_complex_extension_is_bilinear(a, u, v):
    model, x0 = brusselator(0.8, 2.0), np.array([0.8, 2.5])
    lhs = bilinear_B(model, x0, 2.0, a * u, v)
    rhs = a * bilinear_B(model, x0, 2.0, u, v)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13 * max(1.0, np.abs(rhs).max()))
    # a general scalar moves the FD probe directions, so only FD accuracy holds there
    lhs = bilinear_B(model, x0, 2.0, a * u, v, force_fd=True)
    rhs = a * bilinear_B(model, x0, 2.0, u, v, force_fd=True)
    assert np.allclose(lhs, rhs, rtol=1e-7, atol=1e-7 * max(1.0, np.abs(rhs).max()))


@given(cvec, cvec, st.sampled_from([1, -1, 1j, -1j]))
def test_unit_phase_scaling_is_exact_in_fd(u, v, a):
    model, x0 = wilson_cowan(I=0.13), np.array([0.2, 0.15])
    lhs = bilinear_B(model, x0, 0.13, a * u, v)
    rhs = a * bilinear_B(model, x0, 0.13, u, v)
    assert np.array_equal(lhs, rhs)


@given(vec, vec)
def test_real_arguments_give_real_output(u, v):
    model, x0 = wilson_cowan(I=0.13), np.array([0.2, 0.15])
    b = bilinear_B(model, x0, 0.13, u, v)
    assert np.all(np.abs(b.imag) <= 1e-12 * max(np.abs(b).max(), 1e-300))


def test_b_q_qbar_is_real():
    model, x0 = brusselator(0.8), np.array([0.8, 1.64 / 0.8])
    q = np.array([0.3 + 0.4j, -0.2 + 0.7j])
    for fd in (False, True):
        assert np.max(np.abs(bilinear_B(model, x0, 1.64, q, np.conj(q), force_fd=fd).imag)) <= 1e-10


def test_with_params():
    br = brusselator(1.0)
    assert br.with_params(A=1.5).params["A"] == 1.5
    assert br.params["A"] == 1.0
    with pytest.raises(KeyError):
        br.with_params(B=1.0)


def test_model_validation():
    with pytest.raises(ValueError):
        VectorFieldModel("bad", 2, {"a": 1}, "a", lambda x, p: x, scale=[1.0, -1.0])
    with pytest.raises(ValueError):
        VectorFieldModel("bad", 0, {"a": 1}, "a", lambda x, p: x)

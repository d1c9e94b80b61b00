import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kleeminty_bench.problem import (ConfigError, ProblemConfig, build_constraint_matrices,
                                     build_rotation_matrix, evaluate, evaluate_batch, in_box,
                                     inverse_transform, make_instance, transform)

from oracles import dense_evaluate, km_matrices, q_matrix, rotation, rotation_2d

ANGLE = 350 / 180 * math.pi
C, S = math.cos(ANGLE), math.sin(ANGLE)
admissible = st.floats(1.5 * math.pi, 2 * math.pi)


def test_constraint_matrices_n2():
    A, b = build_constraint_matrices(2, 0.1)
    np.testing.assert_array_equal(A, [[1, 0], [0.1, 1], [-1, 0], [0.1, -1]])
    np.testing.assert_array_equal(b, [1, 1, 0, 0])


def test_constraint_matrices_n1_and_n3():
    A, b = build_constraint_matrices(1, 0.1)
    np.testing.assert_array_equal(A, [[1], [-1]])
    np.testing.assert_array_equal(b, [1, 0])
    A, _ = build_constraint_matrices(3, 0.1)
    np.testing.assert_array_equal(A[2], [0, 0.1, 1])
    np.testing.assert_array_equal(A[5], [0, 0.1, -1])


@pytest.mark.parametrize("n", [1, 2, 7, 40])
def test_constraint_matrices_match_loop_oracle(n):
    A, b = build_constraint_matrices(n, 0.25)
    A0, b0 = km_matrices(n, 0.25)
    np.testing.assert_array_equal(A, A0)
    np.testing.assert_array_equal(b, b0)


@pytest.mark.parametrize("n, eps", [(0, 0.1), (2, 0.0), (2, 0.34), (2, -0.1)])
def test_constraint_matrices_reject_bad_input(n, eps):
    with pytest.raises(ConfigError):
        build_constraint_matrices(n, eps)


@pytest.mark.parametrize("n", [1, 2, 5, 40])
@pytest.mark.parametrize("angle", [0.0, 2 * math.pi])
def test_trivial_angles_give_identity(n, angle):
    np.testing.assert_allclose(build_rotation_matrix(n, angle), np.eye(n), atol=1e-12)


def test_rotation_n2_closed_form():
    R = build_rotation_matrix(2, ANGLE)
    np.testing.assert_allclose(R, rotation_2d(ANGLE), atol=1e-12)
    np.testing.assert_allclose(R, [[0.98481, -0.17365], [0.17365, 0.98481]], atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 40), angle=admissible)
def test_rotation_orthogonal(n, angle):
    R = build_rotation_matrix(n, angle)
    assert np.abs(R @ R.T - np.eye(n)).max() <= 1e-12
    assert abs(np.linalg.det(R) - 1.0) <= 1e-10
    np.testing.assert_allclose(R, rotation(n, angle), atol=1e-15)


def test_config_validation():
    with pytest.raises(ConfigError):
        ProblemConfig(2, rotation_angle=math.pi)
    ProblemConfig(2, rotation_angle=math.pi, allow_any_angle=True)
    with pytest.raises(ConfigError):
        ProblemConfig(2, epsilon=0.5)
    with pytest.raises(ConfigError):
        ProblemConfig(0)
    with pytest.raises(ConfigError):
        ProblemConfig(2, constraint_rotation="sideways")
    cfg = ProblemConfig(3, epsilon=0.2)
    assert ProblemConfig.from_dict(cfg.to_dict()) == cfg


def test_instance_fields():
    inst = make_instance(3)
    np.testing.assert_array_equal(inst.t, [27, 27, 27])
    np.testing.assert_array_equal(inst.c, [0, 0, 1])
    np.testing.assert_array_equal(inst.upper_bound, [135] * 3)
    np.testing.assert_array_equal(inst.lower_bound, [0] * 3)
    assert inst.optimum_value == 27.0
    assert not inst.A.flags.writeable


def test_transform_closed_forms_n2():
    inst = make_instance(2)
    np.testing.assert_allclose(transform(inst, inst.t), [0, 0], atol=0)
    # x = R^T (y - t) with y = 0
    expected = -8 * np.array([C - S, S + C])
    np.testing.assert_allclose(transform(inst, [0.0, 0.0]), expected, atol=1e-12)
    np.testing.assert_allclose(expected, [-9.2677, -6.4893], atol=1e-4)


def test_inverse_transform_closed_forms_n2():
    inst = make_instance(2)
    np.testing.assert_array_equal(inverse_transform(inst, [0.0, 0.0]), inst.t)
    y = inverse_transform(inst, [1.0, 0.9])
    expected = np.array([8 + C + 0.9 * S, 8 - S + 0.9 * C])
    np.testing.assert_allclose(y, expected, atol=1e-12)
    np.testing.assert_allclose(y, [8.8285, 9.0600], atol=1e-4)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1),
       conv=st.sampled_from(["transpose", "direct"]), angle=admissible)
def test_transform_matches_dense_and_round_trips(n, seed, conv, angle):
    inst = make_instance(n, constraint_rotation=conv, rotation_angle=angle)
    rng = np.random.default_rng(seed)
    Y = rng.uniform(0, 5 * n**3, size=(7, n))
    X = transform(inst, Y)
    Q = q_matrix(n, angle, conv)
    scale = n**3
    np.testing.assert_allclose(X, (Y - inst.t) @ Q.T, atol=1e-12 * scale * n)
    np.testing.assert_allclose(inverse_transform(inst, X), Y, atol=1e-10 * scale)
    x = rng.normal(size=n)
    np.testing.assert_allclose(transform(inst, inst.t + Q.T @ x), x, atol=1e-12 * scale)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 40), x=st.data())
def test_inverse_then_transform(n, x):
    inst = make_instance(n)
    v = np.array(x.draw(st.lists(st.floats(-2, 2), min_size=n, max_size=n)))
    np.testing.assert_allclose(transform(inst, inverse_transform(inst, v)), v, atol=1e-12 * n**3)


def test_evaluate_at_optimum():
    for n in (1, 2, 3, 5, 10, 20, 40):
        inst = make_instance(n)
        r = evaluate(inst, inst.optimum_point)
        assert r.nu == 0.0
        assert abs(r.f - n**3) <= 1e-12 * n**3


def test_evaluate_known_points_n2():
    inst = make_instance(2)
    y = inverse_transform(inst, [2.0, 0.0])
    r = evaluate(inst, y)
    # row 1 of the upper block violated by 1, row 2 of the lower block by 0.2
    assert r.nu == pytest.approx(1.2, abs=1e-12)
    assert r.f == pytest.approx(8 + 2 * (-S), abs=1e-12)
    y = inverse_transform(inst, [1.0, 0.9])
    r = evaluate(inst, y)
    assert r.nu <= 1e-12
    assert r.f == pytest.approx(8 - S + 0.9 * C, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1),
       conv=st.sampled_from(["transpose", "direct"]), eps=st.floats(0.01, 1 / 3))
def test_evaluate_matches_dense_oracle(n, seed, conv, eps):
    inst = make_instance(n, epsilon=eps, constraint_rotation=conv)
    rng = np.random.default_rng(seed)
    Y = rng.uniform(-n**3, 6 * n**3, size=(5, n))
    f, nu = evaluate_batch(inst, Y)
    for i, y in enumerate(Y):
        f0, nu0 = dense_evaluate(y, n, eps=eps, convention=conv)
        assert f[i] == f0
        assert nu[i] == pytest.approx(nu0, rel=1e-12, abs=1e-9 * n**3)
        assert nu[i] >= 0


def test_evaluate_is_pure_and_batch_consistent():
    inst = make_instance(5)
    Y = np.random.default_rng(3).uniform(0, 625, size=(50, 5))
    f1, nu1 = evaluate_batch(inst, Y)
    f2, nu2 = evaluate_batch(inst, Y.copy())
    assert f1.tobytes() == f2.tobytes() and nu1.tobytes() == nu2.tobytes()
    single = [evaluate(inst, y) for y in Y]
    assert [r.nu for r in single] == list(nu1)


def test_dimension_mismatch():
    inst = make_instance(3)
    with pytest.raises(ValueError):
        transform(inst, [1.0, 2.0])
    with pytest.raises(ValueError):
        inverse_transform(inst, [1.0])
    with pytest.raises(ValueError):
        evaluate(inst, np.zeros(4))


def test_in_box():
    inst = make_instance(2)
    assert in_box(inst, [0.0, 0.0])
    assert in_box(inst, [40.0, 40.0])
    assert not in_box(inst, [-1e-9, 0.0])
    assert not in_box(inst, [0.0, 40.000001])

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ocdma_pc import kernels
from conftest import random_point, toy_instance
from ocdma_pc.errors import SingularOrInfeasible
from ocdma_pc.netmodel import SystemParams, generate_instance
from ocdma_pc.problem import (cir, in_box, matrix_form, objective, oracle, rate,
                              spectral_radius, spectral_radius_bounds, sum_rate, tarhuni_solve)


def test_cir_two_user_example():
    # [DERIVED] by hand: 1*0.01 / (0.5*0.02 + 1e-3)
    inst = toy_instance([[1.0, 0.5], [0.5, 1.0]], 1e-3, 0.027)
    g = cir(inst, [0.01, 0.02])
    assert g == pytest.approx([0.01 / 0.011, 0.02 / 0.006], rel=1e-14)


def test_single_user_closed_form():
    inst = toy_instance([[0.5]], 2e-3, 0.05)
    p, inside = oracle(inst)
    # [DERIVED] p = Gamma* sigma^2 / G
    assert p[0] == pytest.approx(0.05 * 2e-3 / 0.5, rel=1e-14)
    assert inside


def test_shape_check(inst8):
    with pytest.raises(ValueError):
        cir(inst8, np.ones(7))


@given(st.integers(0, 5000), st.floats(1.1, 10.0))
def test_cir_scale_behaviour(seed, c):
    inst = generate_instance(SystemParams(), "II", seed, 6)
    p = random_point(inst, np.random.default_rng(seed))
    g = cir(inst, p)
    assert np.all(g > 0)
    # scaling all powers up raises every CIR (noise becomes relatively smaller)
    assert np.all(cir(inst, c * p) > g)
    # zero noise makes CIR scale invariant
    z = np.zeros(inst.K)
    assert np.allclose(kernels.cir(inst.G, z, c * p), kernels.cir(inst.G, z, p), rtol=1e-12)


@given(st.integers(0, 5000))
def test_oracle_makes_every_constraint_tight(seed):
    inst = generate_instance(SystemParams(), "II", seed, 10)
    p, _ = oracle(inst)
    assert np.allclose(cir(inst, p), inst.cir_target, rtol=1e-10)
    assert np.allclose(rate(inst, p), inst.min_rate, rtol=1e-10)
    assert sum_rate(inst, p) == pytest.approx(inst.min_rate.sum(), rel=1e-10)


@given(st.integers(0, 5000))
def test_oracle_is_componentwise_minimal(seed):
    # any feasible point dominates the fixed point of the standard interference map
    inst = generate_instance(SystemParams(), "II", seed, 6)
    p, _ = oracle(inst)
    q = p * np.random.default_rng(seed).uniform(1.0, 3.0, inst.K)
    if np.all(cir(inst, q) >= inst.cir_target):
        assert np.all(q >= p * (1 - 1e-12))
        assert objective(q) >= objective(p)


def test_matrix_form(inst8):
    mf = matrix_form(inst8)
    assert np.all(np.diag(mf.H) == 0)
    d = np.diag(inst8.G)
    assert np.allclose(mf.H * d[:, None] + np.diag(d), inst8.G)
    assert np.allclose(mf.u_bar, inst8.cir_target * inst8.noise / d)
    A = mf.system_matrix()
    assert np.allclose(A, np.eye(8) - inst8.cir_target[:, None] * mf.H)


def test_spectral_radius_against_eigvals():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.uniform(0, 1, (7, 7))
        lo, hi = spectral_radius_bounds(A)
        ref = max(abs(np.linalg.eigvals(A)))
        assert lo <= ref * (1 + 1e-9) and hi >= ref * (1 - 1e-9)
        assert spectral_radius(A) == pytest.approx(ref, rel=1e-8)
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def test_infeasible_target_raises():
    # two symmetric users: rho(Lambda H) = target, so target 1.5 is infeasible
    inst = toy_instance([[1.0, 1.0], [1.0, 1.0]], 1e-3, 1.5)
    with pytest.raises(SingularOrInfeasible):
        oracle(inst)
    inst = toy_instance([[1.0, 1.0], [1.0, 1.0]], 1e-3, 1.0)
    with pytest.raises(SingularOrInfeasible):
        oracle(inst)


def test_oracle_out_of_box_flag():
    inst = toy_instance([[1.0, 0.9], [0.9, 1.0]], 1e-3, 1.0, p_max=1e-3)
    p, inside = oracle(inst)
    assert not inside and not in_box(inst, p)


def test_float32_close_to_float64(inst8):
    mf = matrix_form(inst8)
    p64 = tarhuni_solve(mf)
    p32 = tarhuni_solve(mf, np.float32)
    assert p32.dtype == np.float64
    assert np.allclose(p32, p64, rtol=1e-5)
    assert not np.array_equal(p32, p64)

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyntwist.coeff import JetScalar, PolyContext, TruncationConfig
from dyntwist.dynamical_r import (
    DynamicalRMatrix,
    build_pi_r,
    cdybe_residual,
    compose_classical,
    dr_apply,
    dr_squared_check,
    equivariant_cochain_battery,
    frame_bivector,
    is_equivariant,
    nondegeneracy_certificate,
    quasi_poisson_defect,
    splitting_r_matrix,
)
from dyntwist.errors import IdenticallyDegenerate, NotEquivariant
from dyntwist.jets import invariant_vector_fields
from dyntwist.lie import LieAlgebraData, PolyVectorField, sl2, so3


def golden(name):
    L = so3() if name == "so3" else sl2()
    return splitting_r_matrix(L, L.lambda_context((1,) if name == "so3" else (2,)))


def zero3(L, ctx):
    return PolyVectorField.zero(L, ctx, 3)


def test_splitting_so3():
    R = golden("so3")
    lam = R.ctx.var(0)
    assert R.r == PolyVectorField(R.L, R.ctx, 2, {(0, 1): -1 / lam})


def test_splitting_sl2():
    R = golden("sl2")
    lam = R.ctx.var(0)
    assert R.r == PolyVectorField(R.L, R.ctx, 2, {(1, 2): -1 / lam})


def test_splitting_degenerate():
    with pytest.raises(IdenticallyDegenerate):
        splitting_r_matrix(so3(h=(), m=(0, 1, 2)))


@pytest.mark.parametrize("name", ["so3", "sl2"])
def test_cdybe_golden(name):
    assert cdybe_residual(golden(name)).is_zero()


def test_cdybe_trivial():
    L = sl2(h=(0, 1, 2), m=())
    ctx = L.lambda_context()
    R = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), zero3(L, ctx))
    assert cdybe_residual(R).is_zero()


def test_cdybe_sign_flipped_sl2():
    R = golden("sl2")
    lam = R.ctx.var(0)
    bad = DynamicalRMatrix(R.L, R.ctx, R.r.scale(R.ctx.const(-1)), R.Z, R.hidx)
    assert cdybe_residual(bad) == PolyVectorField(R.L, R.ctx, 3, {(0, 1, 2): 2 / (lam * lam)})


def test_nondegeneracy_certificates():
    for L in (so3(), sl2()):
        det, witness = nondegeneracy_certificate(L)
        ctx = PolyContext(["l1"])
        assert det == ctx.gens[0] ** 2
        assert not ctx.vanishes_at(det, witness)
    assert nondegeneracy_certificate(sl2(), preferred=(2,))[1] == (Fraction(2),)
    with pytest.raises(IdenticallyDegenerate):
        nondegeneracy_certificate(so3(h=(), m=(0, 1, 2)))


@pytest.mark.parametrize("name", ["so3", "sl2"])
def test_splitting_output_equivariant(name):
    R = golden(name)
    assert is_equivariant(R.L, R.ctx, R.hidx, R.r)


def test_dr_of_equivariant_degree_one():
    R = golden("so3")
    lam = R.ctx.var(0)
    c = PolyVectorField(R.L, R.ctx, 1, {(2,): lam * lam + 3})
    assert dr_apply(R, c).is_zero()


def test_dr_constant_with_zero_r():
    L = LieAlgebraData(("h",), {}, h=(0,))
    ctx = L.lambda_context()
    R = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), zero3(L, ctx))
    assert dr_apply(R, PolyVectorField(L, ctx, 1, {(0,): 5})).is_zero()


def test_dr_rejects_non_equivariant():
    R = golden("so3")
    with pytest.raises(NotEquivariant):
        dr_apply(R, PolyVectorField.basis(R.L, R.ctx, 0))


@pytest.mark.parametrize("name", ["so3", "sl2"])
def test_dr_squared_battery(name):
    R = golden(name)
    battery = equivariant_cochain_battery(R, 24)
    assert len(battery) >= 20
    assert all(is_equivariant(R.L, R.ctx, R.hidx, c) for c in battery)
    assert dr_squared_check(R, battery) == (True, None)


@given(st.integers(0, 10_000))
def test_dr_squared_random_seeds(seed):
    R = golden("sl2")
    assert dr_squared_check(R, equivariant_cochain_battery(R, 6, seed=seed))[0]


def test_compose_sl2_cartan():
    L = sl2(h=(0, 1, 2), m=())
    ctx = L.lambda_context()
    rho = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), zero3(L, ctx))
    theta = compose_classical(L, rho, (0,), (1, 2))
    tau = theta.ctx.var(0)
    assert theta.r == PolyVectorField(L, theta.ctx, 2, {(1, 2): -1 / tau})
    assert cdybe_residual(theta).is_zero()


def test_compose_so3():
    L = so3(h=(0, 1, 2), m=())
    ctx = L.lambda_context()
    rho = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), zero3(L, ctx))
    theta = compose_classical(L, rho, (2,), (0, 1))
    tau = theta.ctx.var(0)
    assert theta.r == PolyVectorField(L, theta.ctx, 2, {(0, 1): -1 / tau})
    assert cdybe_residual(theta).is_zero()


def test_compose_trivial_tower():
    L = LieAlgebraData(("a", "b"), {}, h=(0, 1))
    ctx = L.lambda_context()
    rho = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), zero3(L, ctx))
    theta = compose_classical(L, rho, (0, 1), ())
    assert theta.r.is_zero()


def test_frame_bivector_so3():
    R = golden("so3")
    lam = R.ctx.var(0)
    one, zero = R.ctx.one, R.ctx.zero
    expect = [[zero, zero, zero, one], [zero, zero, -1 / lam, zero], [zero, 1 / lam, zero, zero], [-one, zero, zero, zero]]
    assert frame_bivector(R) == expect


@pytest.mark.parametrize("name", ["so3", "sl2"])
def test_pi_r_quasi_poisson(name):
    assert quasi_poisson_defect(golden(name), 8) == {}


def test_pi_r_abelian_line():
    L = LieAlgebraData(("h",), {}, h=(0,))
    ctx = L.lambda_context((1,))
    R = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), zero3(L, ctx))
    assert quasi_poisson_defect(R, 4) == {}


def test_pi_r_with_nonzero_Z():
    # h = 0, r = e∧f on sl(2): ½[r, r] = h∧e∧f
    L = sl2(h=(), m=(0, 1, 2))
    ctx = PolyContext([])
    r = PolyVectorField.basis(L, ctx, 1, 2)
    R = DynamicalRMatrix(L, ctx, r, PolyVectorField.basis(L, ctx, 0, 1, 2), ())
    assert cdybe_residual(R).is_zero()
    assert quasi_poisson_defect(R, 5) == {}
    wrong = DynamicalRMatrix(L, ctx, r, PolyVectorField.basis(L, ctx, 0, 1, 2, coeff=2), ())
    assert quasi_poisson_defect(wrong, 5)


def _lie_derivative_bivector(cfg, pi, X):
    N = len(pi)

    def d(f, K):
        return f.differentiate(("lambda", K) if K < cfg.d else ("x", K - cfg.d))

    dX = [[d(X.comps[I], K) for K in range(N)] for I in range(N)]
    out = {}
    for I in range(N):
        for J in range(I + 1, N):
            acc = X.apply(pi[I][J])
            for K in range(N):
                acc = acc - pi[K][J] * dX[I][K] - pi[I][K] * dX[J][K]
            out[(I, J)] = acc
    return out


@pytest.mark.parametrize("name", ["so3", "sl2"])
def test_pi_r_right_translation_invariant(name):
    R = golden(name)
    cfg = TruncationConfig(1, 3, 6, 0, R.ctx.base_point)
    pi, _ = build_pi_r(R, cfg)
    for X in invariant_vector_fields(R.L, cfg, "right"):
        for v in _lie_derivative_bivector(cfg, pi, X).values():
            assert v.truncate(cfg.D_x - 1).is_zero()

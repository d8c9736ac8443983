from fractions import Fraction

import pytest

from dyntwist.diffops import FuncExpr
from dyntwist.dynamical_r import splitting_r_matrix
from dyntwist.errors import NotCocycle
from dyntwist.fedosov import FedosovEngine
from dyntwist.lie import EnvTensor, so3
from dyntwist.twist import (
    CompatibleStar,
    _as_func,
    extract_twist,
    gauge_transform,
    hochschild_b,
    obstruction_step,
    r_as_tensor,
    reconstruct_star,
    semiclassical_part,
    twist_equation_residual,
    twist_equivariance_defect,
    twist_gauge_check,
    xu_axioms_check,
)

L = so3()
R = splitting_r_matrix(L)
CTX = R.ctx


@pytest.fixture(scope="module", params=[1, 2], ids=["N1", "N2"])
def pipeline(request):
    E = FedosovEngine(L, CTX, R.hidx, request.param, R=R)
    sp = CompatibleStar(E)
    return E, sp, extract_twist(sp)


def test_compatibility_axioms(pipeline):
    _, sp, _ = pipeline
    res = xu_axioms_check(sp)
    assert all(ok for ok, _ in res.values()), res


def test_raw_star_is_not_compatible(pipeline):
    E, _, _ = pipeline
    res = xu_axioms_check(CompatibleStar(E, gauge=False))
    assert not res["shift"][0] and not res["left_module"][0]


def test_gauge_fixes_linear_functions(pipeline):
    E, sp, _ = pipeline
    lam = E.lam(0)
    assert sp.Q.apply(lam) == lam
    power = lam
    for n in range(2, 4):
        power = _as_func(sp.oc, E.star(power, lam))
        lam_n = FuncExpr.scalar(sp.oc, CTX.var(0) ** n)
        assert sp.Q.apply(lam_n) == power


def test_twist_properties(pipeline):
    _, sp, J = pipeline
    one = J.hbar_part(0)
    assert one == one.one(J.L, J.ctx, 2, J.N, J.scaled)
    assert semiclassical_part(J) == r_as_tensor(L, CTX, R.r, J.N)
    assert twist_equation_residual(J).is_zero()
    assert all(x.is_zero() for x in twist_equivariance_defect(J, R.hidx))
    assert reconstruct_star(J, sp.oc) == sp(sp.slot(), sp.slot())


def test_semiclassical_skew_part(pipeline):
    _, _, J = pipeline
    lam = CTX.var(0)
    skew = semiclassical_part(J)
    expect = EnvTensor(L, CTX, 2, {(((0,), (1,)), 0): -1 / lam, (((1,), (0,)), 0): 1 / lam}, N=J.N, scaled=J.scaled)
    assert skew == expect


@pytest.fixture(scope="module")
def twist2():
    E = FedosovEngine(L, CTX, R.hidx, 2, R=R)
    return E, extract_twist(CompatibleStar(E))


def test_gauge_transform(twist2):
    _, J = twist2
    lam = CTX.var(0)
    T = EnvTensor(L, CTX, 1, {(((),), 0): CTX.one, (((2,),), 1): lam * lam / (lam + 3)}, N=2, scaled=False)
    J2 = gauge_transform(J, T)
    assert not (J2 - J).is_zero()
    assert twist_equation_residual(J2).is_zero()
    assert twist_gauge_check(J, J2, T).is_zero()


def test_gauge_negative_control():
    one = EnvTensor.one(L, CTX, 2, N=2, scaled=False)
    T = EnvTensor(L, CTX, 1, {(((),), 0): CTX.one, (((0,),), 1): CTX.one}, N=2, scaled=False)
    assert not twist_gauge_check(one, one, T).is_zero()


def test_not_a_twist():
    one = EnvTensor.one(L, CTX, 2, N=2, scaled=False)
    Jb = one + EnvTensor(L, CTX, 2, {(((0,), (1,)), 1): CTX.one}, N=2, scaled=False)
    assert not twist_equation_residual(Jb).is_zero()


def _oc():
    return CompatibleStar(FedosovEngine(L, CTX, R.hidx, 1, R=R), gauge=False).oc


def test_hochschild_second_derivative():
    oc = _oc()
    C = FuncExpr(oc, ("M",), {(0, (((0,), (1, 1)),), ()): CTX.one})
    expect = FuncExpr(oc, ("M", "M"), {(0, (((0,), (1,)), ((0,), (1,))), ()): CTX.const(-2)})
    assert hochschild_b(C) == expect


def test_hochschild_squares_to_zero():
    oc = _oc()
    lam = CTX.var(0)
    C1 = FuncExpr(oc, ("M",), {(0, (((1,), (0, 2)),), ()): lam})
    C2 = FuncExpr(oc, ("M", "M"), {(0, (((0,), (1,)), ((1,), (2,))), ()): lam * lam})
    for C in (C1, C2):
        assert hochschild_b(hochschild_b(C)).is_zero()


def _second_orders(E1, E2):
    f, g = E1.slot(), E1.slot()
    out = []
    for E in (E1, E2):
        c = E.star(f, g).hbar_part(2).hbar_div().hbar_div()
        out.append(FuncExpr(E1.oc_star, c.kinds, c.terms))
    return out


def test_obstruction_step(twist2):
    E, _ = twist2
    E2 = FedosovEngine(L, CTX, R.hidx, 2, R=R, omega_hbar={1: {(1, 2): CTX.const(-1)}})
    C1, C2 = _second_orders(E, E2)
    res = obstruction_step(C1, C2, E)
    assert all(res.certificate.values()), res.certificate
    assert not res.B.is_zero()


def test_obstruction_rejects_non_closed(twist2):
    E, _ = twist2
    C1, C2 = _second_orders(E, E)
    f = E.slot()
    bad = E.pi_sharp_pair({(0, 1): CTX.one}, f, E.slot())
    with pytest.raises(NotCocycle):
        obstruction_step(C1 + bad, C2, E)


def test_shift_requires_abelian_h():
    from dyntwist.errors import ExtractionInconsistent
    from dyntwist.twist import h_is_abelian

    full = so3(h=(0, 1, 2), m=())
    assert h_is_abelian(L, R.hidx)
    assert not h_is_abelian(full, (0, 1, 2))
    J = EnvTensor.one(full, CTX, 2, N=1, scaled=False)
    with pytest.raises(ExtractionInconsistent):
        twist_equation_residual(J)

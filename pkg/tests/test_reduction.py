import pytest

from dyntwist.coeff import PolyContext
from dyntwist.dynamical_r import DynamicalRMatrix, cdybe_residual, compose_classical, splitting_r_matrix
from dyntwist.fedosov import FedosovEngine
from dyntwist.lie import PolyVectorField, sl2, so3
from dyntwist.reduction import (
    base_momentum_check,
    build_product_model,
    momentum_check_classical,
    quantum_momentum_check,
    reduced_bracket_check,
    subalgebra,
)
from dyntwist.twist import CompatibleStar

L = sl2(h=(0, 1, 2), m=())
CTX = PolyContext(["l1", "l2", "l3"])
RHO = DynamicalRMatrix(L, CTX, PolyVectorField.zero(L, CTX, 2), PolyVectorField.zero(L, CTX, 3), (0, 1, 2))


@pytest.fixture(scope="module")
def model():
    return build_product_model(L, RHO, (0,), (1, 2), D_x=4)


@pytest.fixture(scope="module")
def theta():
    return compose_classical(L, RHO, (0,), (1, 2))


def test_composed_matrix(theta):
    assert cdybe_residual(RHO).is_zero()
    assert cdybe_residual(theta).is_zero()
    tau = theta.ctx.var(0)
    assert theta.r == PolyVectorField(theta.L, theta.ctx, 2, {(1, 2): -1 / tau})


@pytest.mark.parametrize("which", ["base", "nu", "mu"])
def test_momentum_maps(model, which):
    assert momentum_check_classical(model, which) == {"ok": True, "failure": None}


def test_naive_momentum_fails(model):
    res = momentum_check_classical(model, "mu_naive")
    assert not res["ok"] and res["failure"][0] == "bracket"


def test_reduced_bracket(model, theta):
    assert reduced_bracket_check(model, theta.r)["ok"]
    flipped = reduced_bracket_check(model, theta.r.scale(theta.ctx.const(-1)))
    assert not flipped["ok"] and flipped["failure"][0] == "f_g"


@pytest.mark.parametrize("Lf", [so3, sl2], ids=["so3", "sl2"])
def test_base_momentum(Lf):
    R = splitting_r_matrix(Lf())
    assert base_momentum_check(R) == {"ok": True, "failure": None}


def test_subalgebra_structure():
    Lh = subalgebra(L, (0, 1, 2))
    assert Lh.n == 3 and Lh.c == L.c


@pytest.fixture(scope="module")
def quantum():
    Lh = sl2()
    Rt = splitting_r_matrix(Lh)
    E = FedosovEngine(Lh, Rt.ctx, Rt.hidx, 2, R=Rt)
    return CompatibleStar(E)


def test_quantum_momentum(quantum):
    base = FedosovEngine(L, CTX, (0, 1, 2), 2, R=RHO)
    rep = quantum_momentum_check(quantum, (0,), D_x=6, base_star=base)
    assert rep.ok and all(rep.results.values()), rep.failure


def test_quantum_momentum_without_gauge_fails(quantum):
    rep = quantum_momentum_check(quantum, (0,), D_x=6, use_Q=False)
    assert not rep.ok and not rep.results["morphism"]

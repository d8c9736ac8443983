from fractions import Fraction

import pytest

from dyntwist.coeff import JetScalar, TruncationConfig
from dyntwist.dynamical_r import build_pi_r, splitting_r_matrix
from dyntwist.fedosov import FedosovEngine
from dyntwist.jets import (
    connection_lie_derivative,
    covariant_form_derivative,
    curvature_tensor,
    exterior_derivative_2form,
    frame_connection_coeffs,
    frame_fields,
    half_bracket_connection,
    invariant_vector_fields,
    invert_bivector,
    lower_curvature,
    momentum_fields,
    symplectize,
)
from dyntwist.lie import LieAlgebraData, sl2, so3

SO3 = so3()


def cfg_for(L, D_x=5):
    return TruncationConfig(1, L.n, D_x, 0, (1,))


def comps_equal(u, v, wm):
    return all((a - b).truncate(wm).is_zero() for a, b in zip(u.comps, v.comps))


def test_abelian_fields_are_coordinate_fields():
    L = LieAlgebraData(("a", "b"), {}, h=(0,))
    cfg = cfg_for(L)
    for side in ("left", "right"):
        for a, X in enumerate(invariant_vector_fields(L, cfg, side)):
            assert all(c == int(I == 1 + a) for I, c in enumerate(X.comps))


def test_degree_one_term():
    cfg = cfg_for(SO3, 4)
    fields = invariant_vector_fields(SO3, cfg, "left")
    xs = [JetScalar.x(cfg, c) for c in range(3)]
    for a, X in enumerate(fields):
        for b in range(3):
            lin = JetScalar(cfg)
            for c in range(3):
                lin = lin - xs[c] * SO3.c[a][c].get(b, 0) * Fraction(1, 2)
            expect = lin + int(a == b)
            assert X.comps[1 + b].truncate(1) == expect


@pytest.mark.parametrize("L", [SO3, sl2()], ids=["so3", "sl2"])
def test_invariant_field_brackets(L):
    cfg = cfg_for(L, 5)
    left = invariant_vector_fields(L, cfg, "left")
    right = invariant_vector_fields(L, cfg, "right")
    wm = cfg.D_x - 1
    for a in range(3):
        for b in range(3):
            lhs = left[a].bracket(left[b])
            rhs = sum_fields(cfg, [(left[k], c) for k, c in L.c[a][b].items()])
            assert comps_equal(lhs, rhs, wm)
            lhs = right[a].bracket(right[b])
            rhs = sum_fields(cfg, [(right[k], -c) for k, c in L.c[a][b].items()])
            assert comps_equal(lhs, rhs, wm)
            assert all(c.truncate(wm).is_zero() for c in left[a].bracket(right[b]).comps)


def sum_fields(cfg, pairs):
    from dyntwist.jets import VectorFieldJet

    out = VectorFieldJet.zero(cfg)
    for X, c in pairs:
        out = out + X.scale(JetScalar.const(cfg, c))
    return out


def test_frame_connection_half_bracket():
    G, C = frame_connection_coeffs(SO3, 1)
    assert G[1 + 2][1 + 0][1 + 1] == Fraction(1, 2)
    N = 4
    for i in range(N):
        for j in range(N):
            for k in range(N):
                assert G[k][i][j] - G[k][j][i] - C[k][i][j] == 0


def test_abelian_connection_vanishes():
    L = LieAlgebraData(("a", "b"), {}, h=(0,))
    cfg = cfg_for(L)
    G = half_bracket_connection(L, cfg)
    assert all(v.is_zero() for plane in G for row in plane for v in row)


@pytest.fixture(scope="module")
def so3_coordinate_connection():
    cfg = cfg_for(SO3, 4)
    frame = frame_fields(SO3, cfg)
    return cfg, frame, half_bracket_connection(SO3, cfg, frame)


def test_coordinate_connection_reproduces_half_bracket(so3_coordinate_connection):
    cfg, frame, G = so3_coordinate_connection
    N = len(frame)
    wm = cfg.D_x - 2
    for i in range(N):
        for j in range(N):
            br = frame[i].bracket(frame[j])
            for K in range(N):
                nabla = frame[i].apply(frame[j].comps[K])
                for I in range(N):
                    for J in range(N):
                        nabla = nabla + G[K][I][J] * frame[i].comps[I] * frame[j].comps[J]
                assert (nabla - br.comps[K] * Fraction(1, 2)).truncate(wm).is_zero()


def test_coordinate_connection_torsion_free(so3_coordinate_connection):
    _, _, G = so3_coordinate_connection
    N = len(G)
    assert all((G[K][I][J] - G[K][J][I]).is_zero() for K in range(N) for I in range(N) for J in range(N))


def test_connection_invariance(so3_coordinate_connection):
    cfg, frame, G = so3_coordinate_connection
    wm = cfg.D_x - 2
    right = invariant_vector_fields(SO3, cfg, "right")
    chi = momentum_fields(SO3, cfg, (2,), left=frame[1:])
    for X in right + chi:
        LG = connection_lie_derivative(cfg, G, X)
        assert all(v.truncate(wm).is_zero() for plane in LG for row in plane for v in row)


@pytest.fixture(scope="module", params=["so3", "sl2"])
def engine(request):
    L = so3() if request.param == "so3" else sl2()
    R = splitting_r_matrix(L)
    return FedosovEngine(L, R.ctx, R.hidx, 1, R=R)


def test_symplectized_connection(engine):
    assert engine.torsion_free()
    assert engine.is_symplectic()


def test_symplectize_idempotent(engine):
    again = symplectize(engine.Gamma, engine.omega, engine.P, engine.deriv)
    assert again == engine.Gamma


def test_symplectize_constant_form_flat():
    from dyntwist.coeff import PolyContext

    ctx = PolyContext(["l"])
    z, o = ctx.zero, ctx.one
    w = [[z, o], [-o, z]]
    G0 = [[[z, z], [z, z]], [[z, z], [z, z]]]
    assert symplectize(G0, w, [[z, -o], [o, z]], lambda i, f: f.diff(0) if i == 0 else z) == G0


def test_curvature_symmetries(engine):
    R, Rl, N = engine.Rcurv, engine.Rlow, engine.N
    for i in range(N):
        for j in range(N):
            for k in range(N):
                for l in range(N):
                    assert Rl[i][j][k][l] == Rl[j][i][k][l]
                    assert Rl[i][j][k][l] == -Rl[i][j][l][k]
                    assert (R[i][j][k][l] + R[i][k][l][j] + R[i][l][j][k]).is_zero()


def test_curvature_flat_abelian():
    from dyntwist.dynamical_r import DynamicalRMatrix
    from dyntwist.lie import PolyVectorField

    L = LieAlgebraData(("h",), {}, h=(0,))
    ctx = L.lambda_context()
    R = DynamicalRMatrix(L, ctx, PolyVectorField.zero(L, ctx, 2), PolyVectorField.zero(L, ctx, 3))
    E = FedosovEngine(L, ctx, (0,), 1, R=R)
    assert all(v.is_zero() for a in E.Rlow for b in a for c in b for v in c)


def test_frame_symplectic_form_inverts_bivector(engine):
    N = engine.N
    for i in range(N):
        for k in range(N):
            acc = engine.ctx.zero
            for j in range(N):
                acc = acc + engine.P[i][j] * engine.omega[j][k]
            assert acc == int(i == k)


def test_golden_frame_form_so3():
    L = so3()
    R = splitting_r_matrix(L)
    E = FedosovEngine(L, R.ctx, R.hidx, 1, R=R)
    lam = R.ctx.var(0)
    z, o = R.ctx.zero, R.ctx.one
    assert E.omega == [[z, z, z, -o], [z, z, lam, z], [z, -lam, z, z], [o, z, z, z]]


@pytest.mark.parametrize("name", ["so3", "sl2"])
def test_coordinate_form_closed(name):
    L = so3() if name == "so3" else sl2()
    R = splitting_r_matrix(L, L.lambda_context((1,)))
    cfg = TruncationConfig(1, 3, 6, 0, (1,))
    pi, _ = build_pi_r(R, cfg)
    w = invert_bivector(cfg, pi)
    N = len(pi)
    for I in range(N):
        for K in range(N):
            acc = JetScalar(cfg)
            for J in range(N):
                acc = acc + pi[I][J] * w[J][K]
            assert (acc - int(I == K)).truncate(cfg.D_x - 1).is_zero()
    assert all(v.truncate(cfg.D_x - 2).is_zero() for v in exterior_derivative_2form(cfg, w).values())


def test_constant_darboux():
    L = LieAlgebraData(("h",), {}, h=(0,))
    cfg = TruncationConfig(1, 1, 4, 0, (1,))
    one, zero = JetScalar.const(cfg, 1), JetScalar(cfg)
    w = invert_bivector(cfg, [[zero, one], [-one, zero]])
    assert w[0][1] == -1 and w[1][0] == 1 and w[0][0].is_zero()


def test_momentum_fields_are_hamiltonian(engine):
    # χ_j has frame components P[j][·], so ι_{χ_j} ω = θ^j = dλ_j and L_χ ω = d(dλ_j) = 0.
    N, d = engine.N, engine.d
    for j in range(d):
        chi = [engine.P[j][b] for b in range(N)]
        contraction = []
        for b in range(N):
            acc = engine.ctx.zero
            for a in range(N):
                acc = acc + chi[a] * engine.omega[a][b]
            contraction.append(acc)
        assert contraction == [int(b == j) for b in range(N)]
        # the literal vanishing of the contraction would contradict nondegeneracy
        assert any(not c.is_zero() for c in contraction)


def test_covariant_derivative_of_form_vanishes(engine):
    Nt = covariant_form_derivative(engine.Gamma, engine.omega, engine.deriv)
    assert all(v.is_zero() for a in Nt for b in a for v in b)

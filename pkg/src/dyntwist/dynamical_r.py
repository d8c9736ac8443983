"""Classical dynamical r-matrices: CDYBE residual, splitting r-matrices,
equivariance, the d_r differential, composition and the frame form of π_r."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

from .coeff import JetScalar, PolyContext, RationalFunction, TruncationConfig
from .errors import DegenerateDenominator, IdenticallyDegenerate, InputInvalid, NotEquivariant
from .lie import LieAlgebraData, PolyVectorField, invariance_check, schouten_bracket
from .jets import bivector_schouten, coordinate_bivector, frame_fields, polyvector_from_frame
from .linalg import det_poly, inverse_poly_matrix, nullspace

__all__ = [
    "DynamicalRMatrix",
    "cdybe_residual",
    "equivariance_defect",
    "is_equivariant",
    "splitting_r_matrix",
    "nondegeneracy_certificate",
    "dr_apply",
    "compose_classical",
    "frame_bivector",
    "invariant_constant_cochains",
    "equivariant_cochain_battery",
    "dr_squared_check",
    "build_pi_r",
    "quasi_poisson_defect",
]


@dataclass
class DynamicalRMatrix:
    """r(λ) ∈ ∧²g over base h (indices ``hidx``), with constant Z ∈ ∧³g.

    ``ctx`` has one variable per element of ``hidx``; ``certificate`` lists the
    denominator polynomials whose zero sets are removed from the domain.
    """

    L: LieAlgebraData
    ctx: PolyContext
    r: PolyVectorField
    Z: PolyVectorField
    hidx: tuple = None
    certificate: list = field(default_factory=list)

    def __post_init__(self):
        if self.hidx is None:
            self.hidx = tuple(self.L.h)

    @property
    def d(self):
        return len(self.hidx)


def _hstruct(L, hidx):
    pos = {g: a for a, g in enumerate(hidx)}
    out = [[{} for _ in hidx] for _ in hidx]
    for a, i in enumerate(hidx):
        for b, j in enumerate(hidx):
            for k, v in L.c[i][j].items():
                if k not in pos:
                    raise InputInvalid("base subalgebra is not closed under the bracket", "splitting")
                out[a][b][pos[k]] = v
    return out


def coadjoint_field(L, ctx, hidx, a):
    """Components of ad*_{h_a}λ: (ad*_x λ)_k = −Σ_l c^l_{xk} λ_l, as RationalFunctions."""
    ch = _hstruct(L, hidx)
    out = []
    for k in range(len(hidx)):
        v = ctx.zero
        for l, c in ch[a][k].items():
            v = v - ctx.var(l) * c
        out.append(v)
    return out


def equivariance_defect(L, ctx, hidx, c: PolyVectorField, a: int) -> PolyVectorField:
    """[h_a, c(λ)] − Σ_k (ad*_{h_a}λ)_k ∂c/∂λ^k; zero iff c is equivariant along h_a."""
    lhs = schouten_bracket(PolyVectorField.basis(L, ctx, hidx[a]), c)
    for k, w in enumerate(coadjoint_field(L, ctx, hidx, a)):
        if not w.is_zero():
            lhs = lhs - c.diff_lambda(k).scale(w)
    return lhs


def is_equivariant(L, ctx, hidx, c) -> bool:
    return all(equivariance_defect(L, ctx, hidx, c, a).is_zero() for a in range(len(hidx)))


def cdybe_residual(R: DynamicalRMatrix) -> PolyVectorField:
    """½[r,r] − Σ_i h_i∧∂r/∂λ^i − Z."""
    L, ctx = R.L, R.ctx
    res = schouten_bracket(R.r, R.r).scale(ctx.const(Fraction(1, 2)))
    for i, hi in enumerate(R.hidx):
        res = res - PolyVectorField.basis(L, ctx, hi).wedge(R.r.diff_lambda(i))
    return res - R.Z if not R.Z.is_zero() else res


def _W_matrix(L, ctx, hidx, midx):
    pos = {g: a for a, g in enumerate(hidx)}
    W = []
    for a in midx:
        row = []
        for b in midx:
            p = ctx.ring.zero
            for k, v in L.c[a][b].items():
                if k in pos:
                    p += ctx.gens[pos[k]] * ctx.ring(v)
            row.append(p)
        W.append(row)
    return W


def splitting_r(L, ctx, hidx, midx) -> tuple:
    """(r, det W) for the reductive splitting hidx ⊕ midx; coefficient of
    m_a∧m_b (a<b) is (W^{-1})_{ab}."""
    if not L.is_reductive(hidx, midx):
        raise InputInvalid("splitting is not reductive: [h, m] ⊄ m", "splitting")
    W = _W_matrix(L, ctx, hidx, midx)
    if not midx:
        return PolyVectorField.zero(L, ctx, 2), ctx.ring.one
    det = ctx.ring(det_poly(W))
    if det == 0:
        raise IdenticallyDegenerate("det W(λ) vanishes identically")
    inv, det = inverse_poly_matrix(ctx, W)
    coeffs = {}
    for a, b in combinations(range(len(midx)), 2):
        coeffs[(midx[a], midx[b])] = inv[a][b]
    return PolyVectorField(L, ctx, 2, coeffs), det


def splitting_r_matrix(L: LieAlgebraData, ctx: PolyContext | None = None, Z=None) -> DynamicalRMatrix:
    ctx = ctx or L.lambda_context()
    r, det = splitting_r(L, ctx, L.h, L.m)
    Z = Z if Z is not None else PolyVectorField.zero(L, ctx, 3)
    return DynamicalRMatrix(L, ctx, r, Z, tuple(L.h), [det])


def _witness_candidates(d, box=3):
    vals = [0]
    for k in range(1, box + 1):
        vals += [k, -k]
    order = sorted(product(vals, repeat=d), key=lambda p: (max(map(abs, p)) if p else 0, sum(map(abs, p)), [(-v if v < 0 else v, v < 0) for v in p]))
    return [p for p in order if any(p)] or [()]


def nondegeneracy_certificate(L: LieAlgebraData, preferred=None, ctx=None):
    """(det W polynomial, rational witness λ₀ with det W(λ₀) ≠ 0)."""
    ctx = ctx or PolyContext([f"l{i + 1}" for i in range(L.d)])
    if len(L.m) % 2:
        raise IdenticallyDegenerate("odd-dimensional complement: det W ≡ 0")
    W = _W_matrix(L, ctx, L.h, L.m)
    det = ctx.ring(det_poly(W)) if L.m else ctx.ring.one
    if det == 0:
        raise IdenticallyDegenerate("det W(λ) vanishes identically")
    cands = ([tuple(preferred)] if preferred is not None else []) + _witness_candidates(L.d)
    for p in cands:
        if not ctx.vanishes_at(det, p):
            return det, tuple(Fraction(v) for v in p)
    raise IdenticallyDegenerate("no witness found in the search box")


def dr_apply(R: DynamicalRMatrix, c: PolyVectorField, check=True) -> PolyVectorField:
    """d_r(c) = Σ_i h_i∧∂c/∂λ^i + [r, c]."""
    L, ctx = R.L, R.ctx
    if check and not is_equivariant(L, ctx, R.hidx, c):
        raise NotEquivariant("cochain is not h-equivariant")
    out = schouten_bracket(R.r, c)
    for i, hi in enumerate(R.hidx):
        term = PolyVectorField.basis(L, ctx, hi).wedge(c.diff_lambda(i))
        out = term + out if not out.is_zero() else term
    return out


def invariant_constant_cochains(L, ctx, hidx, k):
    """Basis of constant k-vectors killed by ad_{h} for all h in hidx."""
    keys = list(combinations(range(L.n), k))
    index = {key: i for i, key in enumerate(keys)}
    rows = []
    for hi in hidx:
        x = PolyVectorField.basis(L, ctx, hi)
        cols = []
        for key in keys:
            img = schouten_bracket(x, PolyVectorField(L, ctx, k, {key: 1}))
            cols.append(img)
        out_keys = list(combinations(range(L.n), k))
        for ok in out_keys:
            rows.append([cols[j].coeffs[ok].constant_value() if ok in cols[j].coeffs else Fraction(0) for j in range(len(keys))])
    basis = nullspace(rows, len(keys))
    return [PolyVectorField(L, ctx, k, {keys[i]: v for i, v in enumerate(vec) if v}) for vec in basis]


def equivariant_cochain_battery(R: DynamicalRMatrix, count: int = 24, max_degree: int = 2, seed: int = 0):
    """Seeded random h-equivariant cochains of degree ≤ ``max_degree``.

    Each cochain is Σ f_k(λ) c_k over a basis c_k of ad_h-invariant constant
    k-vectors.  For abelian h the f_k are random rational functions of λ whose
    denominators avoid the base point; otherwise they are constants.
    """
    import random

    rng = random.Random(seed)
    L, ctx = R.L, R.ctx
    abelian = L.is_abelian(R.hidx)
    bases = {k: invariant_constant_cochains(L, ctx, R.hidx, k) for k in range(max_degree + 1)}
    degrees = [k for k in bases if bases[k]]
    if not degrees:
        return []
    base = ctx.base_point or (1,) * ctx.d

    def coeff():
        c = ctx.const(Fraction(rng.randint(-5, 5), rng.randint(1, 4)))
        if not abelian or not ctx.d:
            return c
        i = rng.randrange(ctx.d)
        lam = ctx.var(i)
        num = c + lam * rng.randint(-3, 3) + lam * lam * rng.randint(-2, 2)
        shift = base[i] + rng.randint(1, 3)
        den = lam if base[i] != 0 and rng.random() < 0.5 else lam - shift
        return num / den

    out = []
    while len(out) < count:
        k = degrees[len(out) % len(degrees)]
        c = PolyVectorField.zero(L, ctx, k)
        for b in bases[k]:
            c = c + b.scale(coeff())
        if not c.is_zero():
            out.append(c)
    return out


def dr_squared_check(R: DynamicalRMatrix, cochains) -> tuple:
    """(True, None) if d_r(d_r(c)) = 0 for every cochain, else (False, (index, residual))."""
    for a, c in enumerate(cochains):
        res = dr_apply(R, dr_apply(R, c), check=False)
        if not res.is_zero():
            return False, (a, res)
    return True, None


def compose_classical(L: LieAlgebraData, rho: DynamicalRMatrix, tidx, mprime, tctx: PolyContext | None = None) -> DynamicalRMatrix:
    """θ_ρ = r_t^{m'} + ρ∘p* over base t, where p*: t* → h* extends by zero on m'."""
    if not L.is_subalgebra(tidx):
        raise InputInvalid("t is not a subalgebra", "splitting.t")
    tctx = tctx or PolyContext([f"tau{i + 1}" for i in range(len(tidx))])
    r_t, det = splitting_r(L, tctx, tuple(tidx), tuple(mprime))
    tpos = {g: a for a, g in enumerate(tidx)}
    images = []
    for hi in rho.hidx:
        images.append(tctx.gens[tpos[hi]] if hi in tpos else tctx.ring.zero)
    restricted = {}
    for key, v in rho.r.coeffs.items():
        restricted[key] = v.compose(tctx, images)
    theta = r_t + PolyVectorField(L, tctx, 2, restricted)
    Z = PolyVectorField(L, tctx, 3, {k: v.compose(tctx, images) for k, v in rho.Z.coeffs.items()})
    return DynamicalRMatrix(L, tctx, theta, Z, tuple(tidx), [det])


def frame_bivector(R: DynamicalRMatrix):
    """π_r = π_lin + Σ ∂_{λ^i}∧→h_i + →r in the frame (∂_λ, →e_a); matrix P with
    {f, g} = Σ P^{ij} b_i(f) b_j(g)."""
    L, ctx, d, n = R.L, R.ctx, R.d, R.L.n
    N = d + n
    P = [[ctx.zero] * N for _ in range(N)]
    ch = _hstruct(L, R.hidx)
    for j in range(d):
        for k in range(d):
            v = ctx.zero
            for l, c in ch[j][k].items():
                v = v + ctx.var(l) * c
            P[j][k] = v
    for i, hi in enumerate(R.hidx):
        P[i][d + hi] = P[i][d + hi] + 1
        P[d + hi][i] = P[d + hi][i] - 1
    for (a, b), v in R.r.coeffs.items():
        P[d + a][d + b] = P[d + a][d + b] + v
        P[d + b][d + a] = P[d + b][d + a] - v
    return P


def build_pi_r(R: DynamicalRMatrix, cfg: TruncationConfig):
    """Coordinate jets π^{IJ} of π_r on (λ, x) together with the frame used."""
    frame = frame_fields(R.L, cfg)
    return coordinate_bivector(cfg, frame_bivector(R), frame), frame


def quasi_poisson_defect(R: DynamicalRMatrix, D_x: int = 8) -> dict:
    """½[π_r, π_r] − →Z on coordinate jets; empty dict when it vanishes up to watermark.

    The ½ matches the normalisation of the CDYBE (½[r, r] − ... = Z) under the
    pinned Schouten convention, so that →[r, r] = 2→Z.
    """
    base = R.ctx.base_point or nondegeneracy_certificate(R.L.with_splitting(R.hidx, ()), ctx=R.ctx)[1]
    cfg = TruncationConfig(R.d, R.L.n, D_x, 0, tuple(base))
    pi, frame = build_pi_r(R, cfg)
    sch = bivector_schouten(cfg, pi)
    if not R.Z.is_zero():
        coeffs = {tuple(R.d + a for a in key): JetScalar.from_rf(cfg, v) for key, v in R.Z.coeffs.items()}
        Zc = polyvector_from_frame(cfg, coeffs, frame, 3)
        sch = {k: v * Fraction(1, 2) - Zc[k] for k, v in sch.items()}
    return {k: v for k, v in sch.items() if not v.is_zero()}


def check_z_invariant(R: DynamicalRMatrix) -> bool:
    return invariance_check(R.Z)[0]


def as_rf(ctx, v):
    return v if isinstance(v, RationalFunction) else ctx.const(v)


def classical_suite(R: DynamicalRMatrix):
    """Core classical checks, returned as {name: bool}."""
    return {
        "cdybe": cdybe_residual(R).is_zero(),
        "equivariance": is_equivariant(R.L, R.ctx, R.hidx, R.r),
        "z_invariant": check_z_invariant(R),
    }


__all__ += ["splitting_r", "coadjoint_field", "classical_suite", "DegenerateDenominator"]

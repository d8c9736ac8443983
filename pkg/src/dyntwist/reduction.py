"""Momentum maps and reduction checks for the composition of dynamical r-matrices.

The product X = V×H×U×G carries π = π_{r_t} (on V×H, base t*) + π_ρ (on U×G,
base h*).  Jets use one context with base variables (τ, λ) and group
coordinates (x_H, y); the frames of the two factors are block-diagonal.

Classical checks run on jets.  Quantum checks reuse the symbolic operator
layer on V×H, evaluating matrix-coefficient atoms Ψ_{kj} = (Ad_{x⁻¹})_{kj} as jets
when an identity needs relations between them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .coeff import JetScalar, PolyContext, TruncationConfig
from .diffops import FuncExpr, ad_exp_atoms
from .errors import NotStronglyInvariant
from .dynamical_r import DynamicalRMatrix, frame_bivector, splitting_r
from .jets import VectorFieldJet, coordinate_bivector, frame_fields, invariant_vector_fields, momentum_fields
from .coeff import to_fraction
from .lie import LieAlgebraData, PolyVectorField, _distinct_arrangements, pbw_star
from .twist import CompatibleStar, _as_func

__all__ = [
    "subalgebra",
    "ProductModel",
    "build_product_model",
    "build_momentum",
    "momentum_check_classical",
    "base_momentum_check",
    "reduced_bracket_check",
    "nu_expressions",
    "quantum_momentum_check",
]


def subalgebra(L: LieAlgebraData, idx) -> LieAlgebraData:
    """Restriction of L to the span of basis elements ``idx`` (must be closed)."""
    pos = {g: a for a, g in enumerate(idx)}
    table = {}
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            for k, v in L.c[i][j].items():
                if k not in pos:
                    raise ValueError("index set is not a subalgebra")
                table[(a, b, pos[k])] = v
    return LieAlgebraData(tuple(L.names[i] for i in idx), table)


def _lift_to(cfg, rf, offset):
    """Embed a rational function whose variables are base variables offset.. of cfg."""
    gens = [cfg.ctx.gens[offset + i] for i in range(len(rf.ctx.gens))]
    return rf.compose(cfg.ctx, gens or [cfg.ctx.ring.zero])


@dataclass
class ProductModel:
    L: LieAlgebraData          # g
    rho: DynamicalRMatrix      # over h* (indices rho.hidx in g)
    Lh: LieAlgebraData         # h on its own basis
    tidx: tuple                # t inside h (positions in Lh)
    mprime: tuple              # m' inside h (positions in Lh)
    cfg: TruncationConfig
    P: list                    # block frame matrix, entries in cfg.ctx
    frame: list                # ∂_τ, →e^H, ∂_λ, →e^G
    pi: list = field(repr=False, default=None)
    r_t: PolyVectorField = None
    tctx: PolyContext = None

    @property
    def dt(self):
        return len(self.tidx)

    @property
    def dh(self):
        return len(self.rho.hidx)

    @property
    def nh(self):
        return self.Lh.n

    def tau(self, a):
        return JetScalar.lam(self.cfg, a)

    def lam(self, j):
        return JetScalar.lam(self.cfg, self.dt + j)

    def ptau(self):
        """Components of p*τ ∈ h* on the basis of h (zero along m')."""
        out = [JetScalar(self.cfg) for _ in range(self.nh)]
        for a, k in enumerate(self.tidx):
            out[k] = self.tau(a)
        return out

    def bracket(self, F: JetScalar, G: JetScalar) -> JetScalar:
        cfg = self.cfg
        N = len(self.pi)
        dF = [_d(cfg, F, I) for I in range(N)]
        dG = [_d(cfg, G, I) for I in range(N)]
        out = JetScalar(cfg)
        for I in range(N):
            if dF[I].is_zero():
                continue
            for J in range(N):
                p = self.pi[I][J]
                if p.is_zero() or dG[J].is_zero():
                    continue
                out = out + p * dF[I] * dG[J]
        return out

    def restrict(self, F: JetScalar) -> JetScalar:
        """Substitute x_H = 0 and λ = p*τ (the μ = 0 slice through the identity of H)."""
        cfg = self.cfg
        ctx = cfg.ctx
        imgs = list(ctx.gens)
        for j in range(self.dh):
            imgs[self.dt + j] = ctx.ring.zero
        for a, k in enumerate(self.tidx):
            imgs[self.dt + k] = ctx.gens[a]
        for c in range(self.nh):
            imgs[cfg.d + c] = ctx.ring.zero
        return JetScalar(cfg, F.rf.compose(ctx, imgs), F.watermark)

    def pullback(self, f: JetScalar) -> JetScalar:
        """ψ*f(τ, x_H, λ, y) = f(τ, y·exp(X_H)) = exp(Σ x_H^a →e^G_{h_a}) f."""
        cfg = self.cfg
        left_g = self.frame[self.dt + self.nh + self.dh:]
        X = VectorFieldJet.zero(cfg)
        for a, g in enumerate(self.rho.hidx):
            X = X + left_g[g].scale(JetScalar.x(cfg, a))
        out = f
        term = f
        for k in range(1, cfg.D_x + 1):
            term = X.apply(term) * Fraction(1, k)
            if term.is_zero():
                break
            out = out + term
        return out


def _d(cfg, f, I):
    return f.differentiate(("lambda", I) if I < cfg.d else ("x", I - cfg.d))


def build_product_model(L: LieAlgebraData, rho: DynamicalRMatrix, tidx_g, mprime_g, D_x=4, tau0=1) -> ProductModel:
    """``tidx_g``/``mprime_g`` are indices in g; h is ``rho.hidx``."""
    hidx = tuple(rho.hidx)
    Lh = subalgebra(L, hidx)
    pos = {g: a for a, g in enumerate(hidx)}
    tidx = tuple(pos[g] for g in tidx_g)
    mprime = tuple(pos[g] for g in mprime_g)
    tctx = PolyContext([f"tau{i + 1}" for i in range(len(tidx))])
    r_t, _ = splitting_r(Lh, tctx, tidx, mprime)
    Rt = DynamicalRMatrix(Lh, tctx, r_t, PolyVectorField.zero(Lh, tctx, 3), tidx)
    dt, dh, nh, ng = len(tidx), len(hidx), Lh.n, L.n
    lam0 = [Fraction(0)] * dh
    for k in tidx:
        lam0[k] = Fraction(tau0)
    cfg = TruncationConfig(dt + dh, nh + ng, D_x, 0, (Fraction(tau0),) * dt + tuple(lam0))
    Pvh = frame_bivector(Rt)
    Pug = frame_bivector(rho)
    N1, N2 = dt + nh, dh + ng
    zero = cfg.ctx.zero
    P = [[zero] * (N1 + N2) for _ in range(N1 + N2)]
    # frame order: τ (dt), →e^H (nh), λ (dh), →e^G (ng); P blocks follow
    for i in range(N1):
        for j in range(N1):
            if not Pvh[i][j].is_zero():
                P[i][j] = _lift_to(cfg, Pvh[i][j], 0)
    for i in range(N2):
        for j in range(N2):
            if not Pug[i][j].is_zero():
                P[N1 + i][N1 + j] = _lift_to(cfg, Pug[i][j], dt)
    d_all = cfg.d
    basis_l = [VectorFieldJet(cfg, [JetScalar.const(cfg, int(j == i)) for j in range(d_all + cfg.n)]) for i in range(d_all)]
    left_h = invariant_vector_fields(Lh, cfg, "left", x_offset=0)
    left_g = invariant_vector_fields(L, cfg, "left", x_offset=nh)
    frame = basis_l[:dt] + left_h + basis_l[dt:] + left_g
    pi_frame = coordinate_bivector(cfg, P, frame)
    return ProductModel(L, rho, Lh, tidx, mprime, cfg, P, frame, pi_frame, r_t, tctx)


def build_momentum(model: ProductModel, which: str) -> list:
    """Jets of μ = λ − Ad*_{x⁻¹}(p*τ), ν = −Ad*_{x⁻¹}(p*τ), base = λ, or the
    corrupted μ without the coadjoint factor ('mu_naive')."""
    cfg = model.cfg
    nh = model.nh
    pt = model.ptau()
    if which in ("mu", "nu"):
        Psi = ad_exp_atoms(model.Lh, cfg, 0)
        co = [sum((pt[k] * Psi[(k, j)] for k in range(nh)), JetScalar(cfg)) for j in range(nh)]
    elif which == "mu_naive":
        co = pt
    elif which == "base":
        co = [JetScalar(cfg) for _ in range(nh)]
    else:
        raise ValueError(which)
    if which == "nu":
        return [-c for c in co]
    return [model.lam(j) - co[j] for j in range(nh)]


def _declared_action(model: ProductModel, which: str):
    """Generators of the h-action whose momentum map is ``which``.

    On U×G: χ_j = Σ c^l_{jk} λ_l ∂_{λ^k} + →e^G_{h_j}; on V×H: the right-invariant
    field −←e^H_j (left translation), absent for the base map.
    """
    cfg = model.cfg
    dt, nh, dh = model.dt, model.nh, model.dh
    left_g = model.frame[dt + nh + dh:]
    right_h = invariant_vector_fields(model.Lh, cfg, "right", x_offset=0)
    out = []
    for j, g in enumerate(model.rho.hidx):
        comps = list(left_g[g].comps) if which != "nu" else [JetScalar(cfg) for _ in range(cfg.d + cfg.n)]
        if which != "nu":
            for k in range(dh):
                v = JetScalar(cfg)
                for l, c in model.Lh.c[j][k].items():
                    v = v + model.lam(l) * c
                comps[dt + k] = comps[dt + k] + v
        if which in ("mu", "nu", "mu_naive"):
            comps = [a - b for a, b in zip(comps, right_h[j].comps)]
        out.append(VectorFieldJet(cfg, comps))
    return out


def _jet_eq(a: JetScalar, b: JetScalar) -> bool:
    diff = a - b
    return diff.is_zero()


def _test_functions(model: ProductModel):
    cfg = model.cfg
    out = [("tau", model.tau(0))]
    for c in range(cfg.n):
        out.append((f"x{c + 1}", JetScalar.x(cfg, c)))
    out.append(("lam0", model.lam(0)))
    if cfg.n > 1:
        out.append(("x1*x_last", JetScalar.x(cfg, 0) * JetScalar.x(cfg, cfg.n - 1)))
    return out


def momentum_check_classical(model: ProductModel, which: str = "mu") -> dict:
    """{m_i, m_j} = Σ c^l_{ij} m_l and {m_i, f} = X_i f, up to watermark.

    Returns {"ok": bool, "failure": (identity, witness) or None}.
    """
    m = build_momentum(model, which)
    Lh = model.Lh
    nh = model.nh
    for i in range(nh):
        for j in range(i + 1, nh):
            lhs = model.bracket(m[i], m[j])
            rhs = sum((m[l] * c for l, c in Lh.c[i][j].items()), JetScalar(model.cfg))
            if not _jet_eq(lhs, rhs):
                return {"ok": False, "failure": ("bracket", (i, j))}
    acts = _declared_action(model, which)
    for name, f in _test_functions(model):
        for i in range(nh):
            if not _jet_eq(model.bracket(m[i], f), acts[i].apply(f)):
                return {"ok": False, "failure": ("action", (i, name))}
    return {"ok": True, "failure": None}


def base_momentum_check(R: DynamicalRMatrix, D_x: int = 6) -> dict:
    """The projection (λ, x) ↦ λ on U×G is a momentum map for π_r.

    Checks {λ_i, λ_j} = Σ c^l_{ij} λ_l and {λ_i, f} = χ_i f on coordinate jets.
    """
    L, d = R.L, R.d
    cfg = TruncationConfig(d, L.n, D_x, 0, tuple(R.ctx.base_point or (1,) * d))
    frame = frame_fields(L, cfg)
    pi = coordinate_bivector(cfg, frame_bivector(R), frame)
    chi = momentum_fields(L, cfg, R.hidx, left=frame[d:])

    def bracket(F, G):
        dF = [_d(cfg, F, I) for I in range(cfg.d + cfg.n)]
        dG = [_d(cfg, G, I) for I in range(cfg.d + cfg.n)]
        out = JetScalar(cfg)
        for I, a in enumerate(dF):
            if a.is_zero():
                continue
            for J, b in enumerate(dG):
                if not b.is_zero() and not pi[I][J].is_zero():
                    out = out + pi[I][J] * a * b
        return out

    lam = [JetScalar.lam(cfg, i) for i in range(d)]
    pos = {g: a for a, g in enumerate(R.hidx)}
    for i in range(d):
        for j in range(i + 1, d):
            rhs = JetScalar(cfg)
            for l, c in L.c[R.hidx[i]][R.hidx[j]].items():
                rhs = rhs + lam[pos[l]] * c
            if not _jet_eq(bracket(lam[i], lam[j]), rhs):
                return {"ok": False, "failure": ("bracket", (i, j))}
    battery = [(f"x{a + 1}", JetScalar.x(cfg, a)) for a in range(L.n)]
    battery += [(f"lam{i}", lam[i]) for i in range(d)]
    battery.append(("lam0*x1*x_last", lam[0] * JetScalar.x(cfg, 0) * JetScalar.x(cfg, L.n - 1)))
    for name, f in battery:
        for i in range(d):
            if not _jet_eq(bracket(lam[i], f), chi[i].apply(f)):
                return {"ok": False, "failure": ("action", (i, name))}
    return {"ok": True, "failure": None}


def _theta_bracket(model: ProductModel, theta_r: PolyVectorField, f: JetScalar, g: JetScalar) -> JetScalar:
    """Bracket of the dynamical model (t*, G, θ) in the frame (∂_τ, →e^G)."""
    Rth = DynamicalRMatrix(model.L, theta_r.ctx, theta_r, PolyVectorField.zero(model.L, theta_r.ctx, 3),
                           tuple(model.rho.hidx[k] for k in model.tidx))
    Pth = frame_bivector(Rth)
    cfg = model.cfg
    dt, nh, dh = model.dt, model.nh, model.dh
    frame = model.frame[:dt] + model.frame[dt + nh + dh:]
    bf = [b.apply(f) for b in frame]
    bg = [b.apply(g) for b in frame]
    out = JetScalar(cfg)
    for i in range(len(frame)):
        for j in range(len(frame)):
            p = Pth[i][j]
            if p.is_zero() or bf[i].is_zero() or bg[j].is_zero():
                continue
            out = out + JetScalar(cfg, _lift_to(cfg, p, 0)) * bf[i] * bg[j]
    return out


def _reduced_battery(model: ProductModel):
    cfg = model.cfg
    dt, nh = model.dt, model.nh
    ys = [JetScalar.x(cfg, nh + c) for c in range(model.L.n)]
    out = [("tau", model.tau(0))]
    for c, y in enumerate(ys):
        out.append((f"y{c + 1}", y))
    out.append(("tau*y1", model.tau(0) * ys[0]))
    out.append(("y1*y2", ys[0] * ys[1 % len(ys)]))
    if dt > 1:
        out.append(("tau2", model.tau(1)))
    return out


def reduced_bracket_check(model: ProductModel, theta_r: PolyVectorField, which: str = "mu") -> dict:
    """Brackets of pulled-back functions on μ = 0 versus the θ-bracket on t*×G.

    Identities: H-invariance of ψ*f on the constraint, {τ, τ'} = 0 (t abelian),
    {τ, f} = →t f, and {f, g} = θ-bracket, all at the slice x_H = 0, λ = p*τ.
    """
    mu = build_momentum(model, which)
    bat = _reduced_battery(model)
    pulled = [(name, f, model.pullback(f)) for name, f in bat]
    for name, f, pf in pulled:
        for i, m in enumerate(mu):
            if not model.restrict(model.bracket(m, pf)).is_zero():
                return {"ok": False, "failure": ("invariance", (i, name))}
    for a, (na, f, pf) in enumerate(pulled):
        for nb, g, pg in pulled[a + 1:]:
            lhs = model.restrict(model.bracket(pf, pg))
            rhs = model.restrict(_theta_bracket(model, theta_r, f, g))
            if not _jet_eq(lhs, rhs):
                kind = "tau_tau" if na.startswith("tau") and nb.startswith("tau") and "*" not in na + nb else (
                    "tau_f" if na == "tau" or nb == "tau" else "f_g")
                return {"ok": False, "failure": (kind, (na, nb))}
    return {"ok": True, "failure": None}


# ---------------------------------------------------------------------------
# quantum momentum maps on V×H
# ---------------------------------------------------------------------------


def nu_expressions(oc, tidx, nh):
    """ν*h_j = −Σ_k (p*τ)_k Ψ_{kj} as function expressions (τ = base variables)."""
    out = []
    for j in range(nh):
        e = FuncExpr(oc, (), {})
        for a, k in enumerate(tidx):
            e = e + FuncExpr.atom(oc, k, j, -oc.ctx.var(a))
        out.append(e)
    return out


@dataclass
class QuantumMomentumReport:
    ok: bool
    results: dict
    failure: tuple | None = None


def quantum_momentum_check(starP: CompatibleStar, tidx, D_x=6, use_Q=True, base_star=None) -> QuantumMomentumReport:
    """Checks for N = Q⁻¹∘U(ν*)∘sym on V×H (and M = N + λ on the product).

    (i)  N(h_i) *' N(h_j) = N(h_i *_PBW h_j) (jets of atoms, watermark ``D_x``);
    (ii) [N(h), F]_{*'} = ħ{ν*h, F} for a universal argument F;
    (iii) [λ_h, F]_{*} = ħ χ_h F on U×G (``base_star``: a Fedosov engine), so that
         M(h) = N(h) + λ_h satisfies [M(h), F₁F₂] = ħ{μ*h, F₁F₂} on split functions.
    ``use_Q=False`` gives the negative control N₀ = U(ν*)∘sym.
    """
    eng = starP.eng
    oc = starP.oc
    Lh = eng.L
    nh = Lh.n
    N = eng.N_hbar
    nu = nu_expressions(oc, tidx, nh)
    Qinv = starP.Qinv if use_Q else None

    def Nmap(expr):
        return Qinv.apply(expr) if use_Q else expr

    def Uν_sym(series):
        """U(ν*)(sym(u)) for u = {hbar: polynomial in the h*-coordinates}."""
        out = FuncExpr(oc, (), {})
        for h, poly in series.items():
            for exps, c in poly.num.items():
                word = tuple(i for i, e in enumerate(exps) for _ in range(e))
                c = to_fraction(c)
                if not word:
                    out = out + FuncExpr.scalar(oc, c, h)
                    continue
                arr = _distinct_arrangements(word)
                acc = None
                for w in arr:
                    t = nu[w[0]]
                    for x in w[1:]:
                        t = _as_func(oc, eng.star(t, nu[x]))
                    acc = t if acc is None else acc + t
                out = out + acc.scale(c / len(arr)).hbar_shift(h)
        return out

    hctx = PolyContext([f"m{i + 1}" for i in range(nh)])
    LhH = LieAlgebraData(Lh.names, {(i, j, k): v for i in range(nh) for j in range(nh) for k, v in Lh.c[i][j].items()}, h=tuple(range(nh)))
    cfg = TruncationConfig(eng.d, nh, max(D_x, 2 * N + 2), N, (1,) * eng.d)
    atoms = ad_exp_atoms(Lh, cfg)
    frame_left = invariant_vector_fields(Lh, cfg, "left")
    results = {}
    failure = None

    # (i) algebra morphism on quadratic generators
    Nnu = [Nmap(v) for v in nu]
    ok = True
    for i in range(nh):
        for j in range(nh):
            lhs = starP(Nnu[i], Nnu[j])
            prod = pbw_star(LhH, hctx, hctx.gens[i], hctx.gens[j], N)
            rhs = Nmap(Uν_sym(prod))
            diff = lhs - rhs
            val = diff.evaluate(cfg, [], frame_left, atoms)
            if not val.is_zero():
                ok = False
                failure = failure or ("morphism", (i, j))
                break
        if not ok:
            break
    results["morphism"] = ok

    # (ii) commutator with a universal argument
    F = starP.slot("M")
    ok = True
    for i in range(nh):
        lhs = starP(Nnu[i], F) - starP(F, Nnu[i])
        rhs = _as_func(oc, eng.poisson(nu[i], F)).hbar_shift(1)
        if not (lhs - rhs).is_zero():
            ok = False
            failure = failure or ("commutator", i)
            break
    results["commutator"] = ok

    # (iii) the U×G factor
    if base_star is not None:
        try:
            base_star.strong_invariance_check()
            results["product_momentum"] = results["commutator"]
        except NotStronglyInvariant:
            results["product_momentum"] = False
            failure = failure or ("product_momentum", None)
    return QuantumMomentumReport(all(results.values()), results, failure)

"""Compatible quantizations and dynamical twists.

Starting from a strongly h-invariant Fedosov star product on U×G this module
builds the gauge map Q, the compatible product *' = Q⁻¹(Q· * Q·), checks the
three compatibility axioms, reads off the twist J(λ) ∈ U(g)^{⊗2}[[ħ]], and
verifies the dynamical twist equation, gauge relations and the first step of
the obstruction theory (Hochschild coboundary, skew part, E-solve).

Enveloping algebras here are the plain U(g) (no ħ in the PBW rewriting); all
ħ-dependence sits in the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement, product
from math import factorial

from .diffops import FuncExpr, InvOp
from .dynamical_r import coadjoint_field
from .errors import ExtractionInconsistent, NotCocycle
from .lie import EnvTensor, _distinct_arrangements, pbw_star
from .linalg import solve

__all__ = [
    "build_gauge_Q",
    "CompatibleStar",
    "xu_axioms_check",
    "extract_twist",
    "reconstruct_star",
    "h_is_abelian",
    "twist_equation_residual",
    "semiclassical_part",
    "r_as_tensor",
    "twist_equivariance_defect",
    "twist_gauge_check",
    "gauge_transform",
    "hochschild_b",
    "skew_part",
    "obstruction_step",
    "ObstructionResult",
]


def _multi_indices(d, total):
    if d == 0:
        return [()] if total == 0 else []
    out = []
    for c in combinations_with_replacement(range(d), total):
        out.append(tuple(c.count(i) for i in range(d)))
    return out


def _alpha_factorial(alpha):
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def _lam_monomial(ctx, alpha):
    p = ctx.one
    for i, a in enumerate(alpha):
        for _ in range(a):
            p = p * ctx.var(i)
    return p


def _as_func(oc, F):
    return FuncExpr(oc, F.kinds, F.terms) if F.oc is not oc else F


# ---------------------------------------------------------------------------
# the gauge map Q
# ---------------------------------------------------------------------------


class _SymImage:
    """a(sym(λ^α)) = symmetrised star products of the linear functions λ_i."""

    def __init__(self, eng):
        self.eng = eng
        self._words: dict = {(): eng.scalar(1)}

    def word(self, w):
        hit = self._words.get(w)
        if hit is None:
            hit = self.eng.star(self.word(w[:-1]), self.eng.lam(w[-1]))
            self._words[w] = hit
        return hit

    def sym(self, alpha):
        letters = tuple(i for i, a in enumerate(alpha) for _ in range(a))
        arr = _distinct_arrangements(letters)
        out = None
        for w in arr:
            out = self.word(w) if out is None else out + self.word(w)
        return out.scale(Fraction(1, len(arr)))


def build_gauge_Q(eng, order=None, check=True) -> InvOp:
    """Q = Σ ħ^k q(λ) ∂_λ^α →u with Q(f·λ^α) = f * a(sym(λ^α)) for λ-independent f.

    Coefficients are solved triangularly in |α|; the first degree beyond
    ``order`` is used as a consistency check (it must require no new terms).
    """
    if check:
        eng.strong_invariance_check()
    oc = eng.oc_star
    ctx = eng.ctx
    d = eng.d
    order = 2 * eng.N_hbar + 1 if order is None else order
    syms = _SymImage(eng)
    f = eng.slot("G")
    q: dict = {}
    for total in range(order + 2):
        for alpha in _multi_indices(d, total):
            target = eng.star(f, syms.sym(alpha)) if total else f
            # subtract contributions of already-known ∂_λ^β, β < α
            known = InvOp(oc, q).apply(FuncExpr(oc, ("G",), {(0, ((oc.zero_alpha, ()),), ()): _lam_monomial(ctx, alpha)}))
            rest = target - _as_func(target.oc, known)
            new = {}
            for (h, slots, atoms), v in rest.terms.items():
                (beta, u), = slots
                if any(beta) or atoms:
                    raise ExtractionInconsistent("gauge map image is not of the expected form")
                new[(h, alpha, u)] = v * Fraction(1, _alpha_factorial(alpha))
            if total > order and new:
                raise ExtractionInconsistent(f"gauge map needs ∂_λ order above {order}")
            q.update(new)
    Q = InvOp(oc, q)
    return Q


class CompatibleStar:
    """f *' g = Q⁻¹(Q f * Q g)."""

    def __init__(self, eng, Q: InvOp | None = None, gauge=True):
        self.eng = eng
        self.oc = eng.oc_star
        if gauge:
            self.Q = Q if Q is not None else build_gauge_Q(eng)
            self.Qinv = self.Q.inverse()
        else:
            self.Q = self.Qinv = InvOp.identity(self.oc)
        self.N = eng.N_hbar

    def __call__(self, F: FuncExpr, G: FuncExpr) -> FuncExpr:
        F = _as_func(self.oc, F)
        G = _as_func(self.oc, G)
        return self.Qinv.apply(_as_func(self.oc, self.eng.star(self.Q.apply(F), self.Q.apply(G))))

    def slot(self, kind="M"):
        return FuncExpr.slot(self.oc, kind)

    def scalar(self, c, hpow=0):
        return FuncExpr.scalar(self.oc, c, hpow)


def _pbw_as_func(oc, series):
    out = FuncExpr(oc, (), {})
    for h, v in series.items():
        out = out + FuncExpr.scalar(oc, v, h)
    return out


def _lambda_battery(ctx, d, max_deg):
    return [(alpha, _lam_monomial(ctx, alpha)) for t in range(max_deg + 1) for alpha in _multi_indices(d, t)]


def _shift_sum(oc, u_rf, F, d, N):
    """Σ_I ħ^{|I|}/I! (∂^I u) (→h_I F) for abelian h."""
    hidx = oc.hidx
    out = FuncExpr(oc, F.kinds, {})
    for k in range(N + 1):
        for I in _multi_indices(d, k):
            du = u_rf
            for i, a in enumerate(I):
                for _ in range(a):
                    du = du.diff(i)
            if du.is_zero():
                continue
            word = tuple(hidx[i] for i, a in enumerate(I) for _ in range(a))
            term = F.apply_op(oc.zero_alpha, word).scale(du * Fraction(1, _alpha_factorial(I))).hbar_shift(k)
            out = out + term
    return out


def xu_axioms_check(starP, max_deg=2):
    """Report {axiom: (ok, witness)} for the compatibility axioms and strong invariance.

    Axioms: u*'v = u*_PBW v; f*'u = fu; u*'f = Σ ħ^k/k! ∂^I u · →h_I f (f independent of λ).
    """
    eng = starP.eng
    oc = starP.oc
    ctx, d, N, L = eng.ctx, eng.d, eng.N_hbar, eng.L
    battery = _lambda_battery(ctx, d, max_deg)
    report = {}

    def first_fail(pairs):
        for wit, diff in pairs:
            if not diff.is_zero():
                return False, (wit, min(k[0] for k in diff.terms))
        return True, None

    def pbw_pairs():
        for (a, u), (b, v) in product(battery, repeat=2):
            lhs = starP(FuncExpr.scalar(oc, u), FuncExpr.scalar(oc, v))
            rhs = _pbw_as_func(oc, pbw_star(L, ctx, u.num, v.num, N))
            yield (a, b), lhs - rhs

    def module_pairs():
        f = starP.slot("G")
        for a, u in battery:
            lhs = starP(f, FuncExpr.scalar(oc, u))
            yield a, lhs - f.scale(u)

    def shift_pairs():
        f = starP.slot("G")
        for a, u in battery:
            lhs = starP(FuncExpr.scalar(oc, u), f)
            yield a, lhs - _shift_sum(oc, u, f, d, N)

    def strong_pairs():
        F = starP.slot("M")
        for j in range(d):
            H = FuncExpr.scalar(oc, ctx.var(j))
            lhs = starP(H, F) - starP(F, H)
            rhs = _as_func(oc, eng.chi(j, F)).hbar_shift(1)
            yield j, lhs - rhs

    def unit_pairs():
        F = starP.slot("M")
        one = FuncExpr.scalar(oc, 1)
        yield "left", starP(one, F) - F
        yield "right", starP(F, one) - F

    report["pbw"] = first_fail(pbw_pairs())
    report["left_module"] = first_fail(module_pairs())
    report["shift"] = first_fail(shift_pairs())
    report["strong_invariance"] = first_fail(strong_pairs())
    report["unit"] = first_fail(unit_pairs())
    return report


# ---------------------------------------------------------------------------
# twists
# ---------------------------------------------------------------------------


def extract_twist(starP) -> EnvTensor:
    """Read J(λ) from f *' g = →J(λ)(f, g) for λ-independent f, g."""
    eng = starP.eng
    oc = starP.oc
    P = starP(starP.slot("G"), starP.slot("G"))
    terms = {}
    for (h, slots, atoms), v in P.terms.items():
        (a1, u), (a2, w) = slots
        if atoms or any(a1) or any(a2):
            raise ExtractionInconsistent("bidifferential operator is not left-invariant on λ-independent functions")
        terms[((u, w), h)] = v
    return EnvTensor(eng.L, eng.ctx, 2, terms, N=eng.N_hbar, scaled=False)


def h_is_abelian(L, hidx) -> bool:
    return all(not L.c[a][b] for a in hidx for b in hidx)


def _require_abelian(L, hidx):
    if not h_is_abelian(L, hidx):
        raise ExtractionInconsistent("the dynamical shift is implemented for abelian h only")


def reconstruct_star(J: EnvTensor, oc, kinds=("M", "M")) -> FuncExpr:
    """Rebuild f *' g = Σ ħ^{|I|}/I! J_{AB}(λ) (→A ∂^I f)(→B →h_I g) (abelian h)."""
    d = oc.d
    hidx = oc.hidx
    _require_abelian(J.L, hidx)
    N = J.N if J.N is not None else oc.N
    out: dict = {}
    for ((u, w), h), c in J.terms.items():
        for k in range(N - h + 1):
            for I in _multi_indices(d, k):
                word = tuple(hidx[i] for i, a in enumerate(I) for _ in range(a))
                for wv, cv in oc.word_product(w, word):
                    key = (h + k, ((I, u), (oc.zero_alpha, wv)), ())
                    val = c * (cv * Fraction(1, _alpha_factorial(I)))
                    out[key] = out[key] + val if key in out else val
    return FuncExpr(oc, kinds, out).with_kinds(kinds)


def _shifted(T: EnvTensor, extra_slot_pos: int) -> EnvTensor:
    """T(λ + ħ h^{(new)}) = Σ ħ^{|I|}/I! ∂^I T ⊗ h_I, the new slot appended (abelian h)."""
    L, ctx = T.L, T.ctx
    _require_abelian(L, L.h)
    d = ctx.nvars if hasattr(ctx, "nvars") else len(ctx.gens)
    N = T.N
    out = EnvTensor(L, ctx, T.arity + 1, {}, N, T.scaled)
    for k in range((N or 0) + 1):
        for I in _multi_indices(d, k):
            word = tuple(L.h[i] for i, a in enumerate(I) for _ in range(a))
            terms = {}
            for (monos, h), v in T.terms.items():
                dv = v
                for i, a in enumerate(I):
                    for _ in range(a):
                        dv = dv.diff(i)
                if dv.is_zero():
                    continue
                key = (monos[:extra_slot_pos] + (word,) + monos[extra_slot_pos:], h + k)
                terms[key] = dv * Fraction(1, _alpha_factorial(I))
            out = out + EnvTensor(L, ctx, T.arity + 1, terms, N, T.scaled)
    return out


def twist_equation_residual(J: EnvTensor) -> EnvTensor:
    """J^{12,3}(λ) J^{1,2}(λ+ħh^{(3)}) − J^{1,23}(λ) J^{2,3}(λ) with Φ = 1."""
    one = EnvTensor.one(J.L, J.ctx, 1, J.N, J.scaled)
    lhs = J.coproduct(0) * _shifted(J, 2)
    rhs = J.coproduct(1) * one.tensor(J)
    return lhs - rhs


def r_as_tensor(L, ctx, r, N=None) -> EnvTensor:
    terms = {}
    for (a, b), v in r.coeffs.items():
        terms[(((a,), (b,)), 0)] = v
        terms[(((b,), (a,)), 0)] = -v
    return EnvTensor(L, ctx, 2, terms, N, False)


def semiclassical_part(J: EnvTensor) -> EnvTensor:
    """ħ¹ coefficient of J − J^{21}, as an ħ⁰ tensor."""
    s = (J - J.permute((1, 0))).hbar_part(1)
    return EnvTensor(J.L, J.ctx, 2, {(m, 0): v for (m, _), v in s.terms.items()}, J.N, J.scaled)


def twist_equivariance_defect(J: EnvTensor, hidx) -> list:
    """[Δ(h_a), J] − Σ_k (ad*_{h_a}λ)_k ∂_k J for each base index a."""
    L, ctx = J.L, J.ctx
    out = []
    for a, g in enumerate(hidx):
        Dh = EnvTensor(L, ctx, 2, {(((g,), ()), 0): 1, (((), (g,)), 0): 1}, J.N, J.scaled)
        res = Dh * J - J * Dh
        for k, w in enumerate(coadjoint_field(L, ctx, hidx, a)):
            if not w.is_zero():
                res = res - J.map_coeffs(lambda v, k=k: v.diff(k)).scale(w)
        out.append(res)
    return out


def _series_inverse(X: EnvTensor) -> EnvTensor:
    one = EnvTensor.one(X.L, X.ctx, X.arity, X.N, X.scaled)
    eps = one - X
    if any(h == 0 for (_, h) in eps.terms):
        raise ValueError("tensor is not 1 modulo hbar")
    out, power = one, one
    for _ in range(X.N or 0):
        power = power * eps
        if power.is_zero():
            break
        out = out + power
    return out


def gauge_transform(J: EnvTensor, T: EnvTensor) -> EnvTensor:
    """J' = Δ(T) J (T^1(λ+ħh^{(2)}) T^2)⁻¹."""
    one = EnvTensor.one(J.L, J.ctx, 1, J.N, J.scaled)
    right = _shifted(T, 1) * one.tensor(T)
    return T.coproduct(0) * J * _series_inverse(right)


def twist_gauge_check(J1: EnvTensor, J2: EnvTensor, T: EnvTensor) -> EnvTensor:
    """Residual of Δ(T)(λ) J₁(λ) = J₂(λ) T^1(λ+ħh^{(2)}) T^2(λ)."""
    one = EnvTensor.one(J1.L, J1.ctx, 1, J1.N, J1.scaled)
    return T.coproduct(0) * J1 - J2 * _shifted(T, 1) * one.tensor(T)


# ---------------------------------------------------------------------------
# Hochschild complex and the obstruction step
# ---------------------------------------------------------------------------


def hochschild_b(C: FuncExpr) -> FuncExpr:
    """(bC)(f_0..f_k) = f_0 C(f_1..) + Σ (−1)^{i+1} C(.., f_i f_{i+1}, ..) + (−1)^{k+1} C(..f_{k−1}) f_k."""
    oc = C.oc
    k = len(C.kinds)
    f = FuncExpr.slot(oc, "M")
    out = f * C
    for i in range(k):
        term = C.slot_coproduct(i)
        out = out + (term if i % 2 else -term)
    last = C * f
    return out + (last if k % 2 else -last)


def skew_part(D: FuncExpr) -> FuncExpr:
    return (D - D.permute_slots((1, 0))).scale(Fraction(1, 2))


def _is_first_order(key):
    alpha, u = key
    return sum(alpha) + len(u) == 1


def _operator_basis(oc, max_order):
    d, n = oc.d, oc.n
    out = []
    for total in range(1, max_order + 1):
        for a in range(total + 1):
            for alpha in _multi_indices(d, a):
                for word in combinations_with_replacement(range(n), total - a):
                    out.append((alpha, tuple(word)))
    return out


@dataclass
class ObstructionResult:
    B: FuncExpr
    E: FuncExpr | None
    certificate: dict = field(default_factory=dict)


def obstruction_step(C1: FuncExpr, C2: FuncExpr, eng, max_order=4, check_cocycle=True) -> ObstructionResult:
    """Split the difference of two order-(n+1) cochains as B + bE.

    B is the skew part (a bivector); E is solved for among invariant operators
    of order ≤ ``max_order``.  Raises NotCocycle when b(C1 − C2) ≠ 0 or
    d_π B ≠ 0.
    """
    oc = C1.oc
    D = C1 - _as_func(oc, C2)
    cert = {}
    if check_cocycle:
        bD = hochschild_b(D)
        cert["hochschild_cocycle"] = bD.is_zero()
        if not cert["hochschild_cocycle"]:
            raise NotCocycle("difference is not a Hochschild cocycle")
    B = skew_part(D)
    cert["B_first_order"] = all(_is_first_order(s) for (_, slots, _) in B.terms for s in slots)
    dB = _lichnerowicz(B, eng)
    cert["d_pi_B"] = dB.is_zero()
    if not cert["d_pi_B"]:
        raise NotCocycle("skew part is not d_π-closed")
    cert["B_base_vanishes"] = all(B.substitute_slot(0, FuncExpr.scalar(oc, eng.ctx.var(j))).is_zero() for j in range(eng.d))
    S = (D + D.permute_slots((1, 0))).scale(Fraction(1, 2))
    E = _solve_coboundary(S, oc, max_order)
    cert["E_found"] = E is not None
    return ObstructionResult(B, E, cert)


def _lichnerowicz(B: FuncExpr, eng) -> FuncExpr:
    oc = B.oc
    f = FuncExpr.slot(oc, "M")
    T = _as_func(oc, eng.poisson(f, B)) + B.substitute_slot(1, _as_func(oc, eng.poisson(f, f)))
    return T + T.permute_slots((1, 2, 0)) + T.permute_slots((2, 0, 1))


def _solve_coboundary(S: FuncExpr, oc, max_order):
    if S.is_zero():
        return FuncExpr(oc, ("M",), {})
    basis = _operator_basis(oc, max_order)
    images = []
    for key in basis:
        op = FuncExpr(oc, ("M",), {(0, (key,), ()): 1})
        images.append(hochschild_b(op))
    keys = sorted({k for img in images for k in img.terms} | set(S.terms), key=repr)
    rows = []
    rhs = []
    for k in keys:
        rows.append([img.terms[k].constant_value() if k in img.terms else Fraction(0) for img in images])
        rhs.append(S.terms.get(k, oc.ctx.zero))
    sol = solve(rows, rhs)
    if sol is None:
        return None
    terms = {}
    for key, v in zip(basis, sol):
        if v != 0 and not (hasattr(v, "is_zero") and v.is_zero()):
            terms[(0, (key,), ())] = v
    return FuncExpr(oc, ("M",), terms)


"""Fedosov construction in the invariant frame b = (∂_λ, →e_a) of U×G.

Every G-invariant tensor (π, ω, the connection, curvature, Fedosov's r) has
frame components that are rational functions of λ alone, so the Weyl bundle
computation is exact.  Weyl elements are stored as

    {(A, J, k, slots, atoms): RationalFunction}

with A the y-exponent, J an ascending tuple of coframe indices (θ^J), k the
hbar power, and (slots, atoms) the function-expression key of
:mod:`dyntwist.diffops`.  Fedosov degree is |A| + 2k.

Conventions:
  fiber product  a∘b = exp((ħ/2) π^{ij} ∂_{y^i}⊗∂_{y^j}), π·ω = I, so [y^i, y^j] = ħπ^{ij};
  δ = θ^k ∂_{y^k},  κ = y^k ι_{b_k}/(p+q),  σ = (y, θ) ↦ 0;
  ∂(c y^A θ^J) = θ^k∧θ^J (b_k(c) y^A + c ∇_k y^A) + c y^A dθ^J with ∇_k y^m = −Γ^m_{kj} y^j;
  D = ∂ − δ + (1/ħ)[r, ·],  r = κ(Ω − ω − R + ∂r + (1/ħ) r∘r).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, permutations

from .diffops import FuncExpr, OpContext
from .dynamical_r import frame_bivector
from .errors import NotClosed, NotStronglyInvariant
from .jets import (
    covariant_form_derivative,
    curvature_tensor,
    frame_connection_coeffs,
    invert_matrix,
    lower_curvature,
    symplectize,
)
from .lie import wedge_sort

__all__ = ["FedosovEngine", "Weyl", "frame_form_d", "lemma_tech_compare"]


def _ydeg(A):
    return sum(A)


class Weyl:
    """Weyl-bundle valued form; see module docstring for the key layout."""

    __slots__ = ("eng", "kinds", "terms")

    def __init__(self, eng, kinds=(), terms=None):
        self.eng = eng
        self.kinds = tuple(kinds)
        self.terms = {}
        if terms:
            for k, v in terms.items():
                if not v.is_zero():
                    self.terms[k] = v

    @classmethod
    def from_func(cls, eng, F: FuncExpr):
        z = (0,) * eng.N
        return cls(eng, F.kinds, {(z, (), h, s, a): v for (h, s, a), v in F.terms.items()})

    def copy_empty(self):
        return Weyl(self.eng, self.kinds, {})

    def is_zero(self):
        return not self.terms

    def _acc(self, out, key, val):
        if key in out:
            nv = out[key] + val
            if nv.is_zero():
                del out[key]
            else:
                out[key] = nv
        elif not val.is_zero():
            out[key] = val

    def __add__(self, other):
        if not other.terms:
            return self
        if not self.terms:
            return other
        out = dict(self.terms)
        for k, v in other.terms.items():
            self._acc(out, k, v)
        return Weyl(self.eng, self.kinds or other.kinds, out)

    def __neg__(self):
        return Weyl(self.eng, self.kinds, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return Weyl(self.eng, self.kinds, {k: v * c for k, v in self.terms.items()})

    def degree_part(self, deg):
        return Weyl(self.eng, self.kinds, {k: v for k, v in self.terms.items() if _ydeg(k[0]) + 2 * k[2] == deg})

    def max_degree(self):
        return max((_ydeg(k[0]) + 2 * k[2] for k in self.terms), default=-1)

    def truncate_degree(self, deg):
        return Weyl(self.eng, self.kinds, {k: v for k, v in self.terms.items() if _ydeg(k[0]) + 2 * k[2] <= deg})

    def truncate_weight(self, w):
        return Weyl(self.eng, self.kinds, {k: v for k, v in self.terms.items() if _ydeg(k[0]) + k[2] <= w})

    def hbar_div(self):
        out = {}
        for (A, J, h, s, a), v in self.terms.items():
            if h == 0:
                raise ValueError("classical part present in hbar-division")
            out[(A, J, h - 1, s, a)] = v
        return Weyl(self.eng, self.kinds, out)

    def to_func(self) -> FuncExpr:
        """σ: keep the (y = 0, θ = 0) part."""
        z = (0,) * self.eng.N
        return FuncExpr(self.eng.oc, self.kinds, {(h, s, a): v for (A, J, h, s, a), v in self.terms.items() if A == z and not J})

    def __eq__(self, other):
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        return f"Weyl({len(self.terms)} terms, max degree {self.max_degree()})"


def frame_form_d(eng, form: dict) -> dict:
    """Frame exterior derivative of {J: RF} (λ-dependent invariant forms)."""
    out: dict = {}
    d = eng.d
    for J, c in form.items():
        for k in range(d):
            dc = c.diff(k)
            if dc.is_zero():
                continue
            sign, key = wedge_sort((k,) + J)
            if sign:
                out[key] = out[key] + dc * sign if key in out else dc * sign
        for key, s in eng.dtheta(J):
            val = c * s
            out[key] = out[key] + val if key in out else val
    return {k: v for k, v in out.items() if not v.is_zero()}


class FedosovEngine:
    """Fedosov star product for a G-invariant symplectic π on U×G in the invariant frame.

    ``P`` is the frame matrix of π (defaults to π_r of ``R``); ``omega_hbar`` maps
    k ≥ 1 to invariant 2-forms {J: RF} so that Ω = ω + Σ ħ^k α_k.
    """

    def __init__(self, L, ctx, hidx, N_hbar, P=None, R=None, omega_hbar=None, connection=None,
                 check_closed=True, degree_cap=None):
        if P is None:
            P = frame_bivector(R)
        self.L = L
        self.ctx = ctx
        self.hidx = tuple(hidx)
        self.d = len(self.hidx)
        self.n = L.n
        self.N = self.d + self.n
        self.N_hbar = N_hbar
        self.N_W = degree_cap if degree_cap is not None else 2 * N_hbar + 3
        self.oc = OpContext(L, ctx, self.hidx, N_hbar + self.N_W)
        self.P = P
        zero, one = ctx.zero, ctx.one
        self.omega = invert_matrix(P, zero, one, lambda x: not x.is_zero())
        Gh, C = frame_connection_coeffs(L, self.d)
        self.C = C
        N = self.N
        if connection is None:
            G0 = [[[ctx.const(Gh[k][i][j]) for j in range(N)] for i in range(N)] for k in range(N)]
            self.Gamma_half = G0
            self.Gamma = symplectize(G0, self.omega, P, self.deriv)
        else:
            self.Gamma_half = connection
            self.Gamma = connection
        self.Rcurv = curvature_tensor(self.Gamma, C, self.deriv)
        self.Rlow = lower_curvature(self.Rcurv, self.omega)
        self._dtheta_cache: dict = {}
        self._contract_cache: dict = {}
        self._perm_cache: dict = {}
        self.omega_form = {(i, j): self.omega[i][j] for i, j in combinations(range(N), 2) if not self.omega[i][j].is_zero()}
        self.omega_hbar = {k: {J: v for J, v in f.items() if not v.is_zero()} for k, f in (omega_hbar or {}).items()}
        if check_closed:
            for name, f in [("omega", self.omega_form)] + [(f"omega_hbar[{k}]", f) for k, f in self.omega_hbar.items()]:
                if frame_form_d(self, f):
                    raise NotClosed(f"{name} is not closed")
        self.R_weyl = self._curvature_weyl()
        self.r = self.solve_r()

    # -- geometry helpers -------------------------------------------------------
    def deriv(self, i, f):
        return f.diff(i) if i < self.d else self.ctx.zero

    def dtheta(self, J):
        """d(θ^J) as [(K, Fraction)], using dθ^m = −Σ_{p<q} C^m_{pq} θ^p∧θ^q."""
        hit = self._dtheta_cache.get(J)
        if hit is not None:
            return hit
        out: dict = {}
        for s, m in enumerate(J):
            sgn = -1 if s % 2 else 1
            for p, q in combinations(range(self.N), 2):
                c = self.C[m][p][q]
                if not c:
                    continue
                sign, key = wedge_sort(J[:s] + (p, q) + J[s + 1:])
                if sign:
                    out[key] = out.get(key, 0) - c * sgn * sign
        hit = tuple((k, v) for k, v in out.items() if v)
        self._dtheta_cache[J] = hit
        return hit

    def torsion_free(self):
        N = self.N
        G = self.Gamma
        return all((G[k][i][j] - G[k][j][i] - self.C[k][i][j]).is_zero() for k in range(N) for i in range(N) for j in range(N))

    def nabla_omega(self):
        return covariant_form_derivative(self.Gamma, self.omega, self.deriv)

    def is_symplectic(self):
        Nt = self.nabla_omega()
        return all(Nt[i][j][k].is_zero() for i in range(self.N) for j in range(self.N) for k in range(self.N))

    # -- fiberwise algebra -------------------------------------------------------
    def _contract(self, A, B):
        key = (A, B)
        hit = self._contract_cache.get(key)
        if hit is not None:
            return hit
        P = self.P
        states = {(A, B, 0): self.ctx.one}
        for i in range(self.N):
            for j in range(self.N):
                p = P[i][j]
                if p.is_zero():
                    continue
                new = {}
                for (a, b, h), c in states.items():
                    top = min(a[i], b[j])
                    coef = c
                    fa, fb = 1, 1
                    for m in range(top + 1):
                        if m:
                            coef = coef * p * Fraction(1, 2 * m)
                            fa *= a[i] - m + 1
                            fb *= b[j] - m + 1
                        na = a[:i] + (a[i] - m,) + a[i + 1:]
                        nb = b[:j] + (b[j] - m,) + b[j + 1:]
                        k2 = (na, nb, h + m)
                        val = coef * (fa * fb)
                        new[k2] = new[k2] + val if k2 in new else val
                states = new
        out: dict = {}
        for (a, b, h), c in states.items():
            C = tuple(x + y for x, y in zip(a, b))
            k2 = (C, h)
            out[k2] = out[k2] + c if k2 in out else c
        hit = tuple((k, v) for k, v in out.items() if not v.is_zero())
        self._contract_cache[key] = hit
        return hit

    def prod(self, a: Weyl, b: Weyl, max_degree=None, max_weight=None, sign_fn=None, swap_slots=False) -> Weyl:
        """Fiber product a∘b (forms wedge-multiplied, coefficients commute)."""
        NW = self.N_W if max_degree is None else max_degree
        out: dict = {}
        acc = Weyl._acc
        for (A, J1, h1, s1, a1), v1 in a.terms.items():
            da = _ydeg(A) + 2 * h1
            for (B, J2, h2, s2, a2), v2 in b.terms.items():
                if da + _ydeg(B) + 2 * h2 > NW:
                    continue
                sign, J = wedge_sort(J1 + J2)
                if not sign:
                    continue
                if sign_fn is not None:
                    sign *= sign_fn(len(J1), len(J2))
                slots = s2 + s1 if swap_slots else s1 + s2
                atoms = tuple(sorted(a1 + a2)) if a2 else a1
                base = v1 * v2
                if sign < 0:
                    base = -base
                for (Cm, hc), c in self._contract(A, B):
                    h = h1 + h2 + hc
                    if max_weight is not None and _ydeg(Cm) + h > max_weight:
                        continue
                    acc(a, out, (Cm, J, h, slots, atoms), base * c)
        kinds = (b.kinds + a.kinds) if swap_slots else (a.kinds + b.kinds)
        return Weyl(self, kinds, out)

    def bracket(self, a: Weyl, b: Weyl, **kw) -> Weyl:
        """Graded commutator a∘b − (−1)^{|a||b|} b∘a (one side must carry no slots)."""
        if a.kinds and b.kinds:
            raise ValueError("commutator of two slot-carrying elements is not supported")
        ab = self.prod(a, b, **kw)
        ba = self.prod(b, a, sign_fn=lambda p, q: -1 if (p * q) % 2 else 1, swap_slots=True, **kw)
        return ab - ba

    def delta(self, a: Weyl) -> Weyl:
        out: dict = {}
        for (A, J, h, s, at), v in a.terms.items():
            for k, e in enumerate(A):
                if not e:
                    continue
                sign, K = wedge_sort((k,) + J)
                if not sign:
                    continue
                key = (A[:k] + (e - 1,) + A[k + 1:], K, h, s, at)
                Weyl._acc(a, out, key, v * (e * sign))
        return Weyl(self, a.kinds, out)

    def kappa(self, a: Weyl) -> Weyl:
        out: dict = {}
        for (A, J, h, s, at), v in a.terms.items():
            p, q = _ydeg(A), len(J)
            if p + q == 0:
                continue
            for t, k in enumerate(J):
                sgn = -1 if t % 2 else 1
                key = (A[:k] + (A[k] + 1,) + A[k + 1:], J[:t] + J[t + 1:], h, s, at)
                Weyl._acc(a, out, key, v * Fraction(sgn, p + q))
        return Weyl(self, a.kinds, out)

    def sigma(self, a: Weyl) -> FuncExpr:
        return a.to_func()

    def nabla(self, a: Weyl) -> Weyl:
        """Covariant exterior derivative ∂."""
        oc = self.oc
        G = self.Gamma
        out: dict = {}
        acc = Weyl._acc
        N = self.N
        for (A, J, h, s, at), v in a.terms.items():
            single = FuncExpr(oc, a.kinds, {(h, s, at): v})
            for k in range(N):
                sign, K = wedge_sort((k,) + J)
                if not sign:
                    continue
                bc = single.deriv(k)
                for (h2, s2, a2), w in bc.terms.items():
                    acc(a, out, (A, K, h2, s2, a2), w if sign > 0 else -w)
                for m, e in enumerate(A):
                    if not e:
                        continue
                    for j in range(N):
                        g = G[m][k][j]
                        if g.is_zero():
                            continue
                        Am = list(A)
                        Am[m] -= 1
                        Am[j] += 1
                        acc(a, out, (tuple(Am), K, h, s, at), -(v * g) * (e * sign))
            for K, c in self.dtheta(J):
                acc(a, out, (A, K, h, s, at), v * c)
        return Weyl(self, a.kinds, out)

    def D(self, a: Weyl, max_degree=None) -> Weyl:
        return self.nabla(a) - self.delta(a) + self.bracket(self.r, a, max_degree=max_degree).hbar_div()

    # -- curvature and the connection r -----------------------------------------
    def _curvature_weyl(self) -> Weyl:
        """R_W = −¼ R_{ijkl} y^i y^j θ^k θ^l, normalised so that ∂² = −(1/ħ)[R_W, ·]."""
        N = self.N
        out: dict = {}
        for i in range(N):
            for j in range(N):
                A = [0] * N
                A[i] += 1
                A[j] += 1
                A = tuple(A)
                for k, l in combinations(range(N), 2):
                    v = self.Rlow[i][j][k][l]
                    if v.is_zero():
                        continue
                    key = (A, (k, l), 0, (), ())
                    val = v * Fraction(-1, 2)
                    out[key] = out[key] + val if key in out else val
        return Weyl(self, (), out)

    def central_form(self, form: dict, hpow: int) -> Weyl:
        z = (0,) * self.N
        return Weyl(self, (), {(z, J, hpow, (), ()): v for J, v in form.items()})

    def omega_hbar_weyl(self) -> Weyl:
        out = Weyl(self, ())
        for k, f in self.omega_hbar.items():
            out = out + self.central_form(f, k)
        return out

    def solve_r(self) -> Weyl:
        """Degree-by-degree solution of r = κ(Ω − ω − R + ∂r + (1/ħ) r∘r)."""
        src = self.omega_hbar_weyl() - self.R_weyl
        comps: dict = {}
        r = Weyl(self, ())
        for k in range(3, self.N_W + 1):
            rhs = src.degree_part(k - 1)
            if k - 1 in comps:
                rhs = rhs + self.nabla(comps[k - 1])
            quad = Weyl(self, ())
            for a in range(3, k - 1):
                b = k + 1 - a
                if a in comps and b in comps:
                    quad = quad + self.prod(comps[a], comps[b], max_degree=k + 1)
            if quad.terms:
                rhs = rhs + quad.degree_part(k + 1).hbar_div()
            comps[k] = self.kappa(rhs)
            r = r + comps[k]
        self._r_comps = comps
        return r

    def fixed_point_residual(self) -> Weyl:
        r = self.r
        rhs = self.omega_hbar_weyl() - self.R_weyl + self.nabla(r) + self.prod(r, r, max_degree=self.N_W + 2).hbar_div()
        return (r - self.kappa(rhs)).truncate_degree(self.N_W)

    def weyl_curvature(self) -> Weyl:
        """ω + R_W − ∂r + δr − (1/ħ) r∘r, which must equal Ω (through degree N_W − 1)."""
        r = self.r
        out = self.central_form(self.omega_form, 0) + self.R_weyl - self.nabla(r) + self.delta(r)
        out = out - self.prod(r, r, max_degree=self.N_W + 2).hbar_div()
        return out.truncate_degree(self.N_W - 1)

    # -- flat sections and the star product --------------------------------------
    def lift(self, F: FuncExpr, weight=None) -> Weyl:
        """Flat section with σ = F, truncated to weight (y-degree + hbar power) ≤ N_hbar."""
        W = self.N_hbar if weight is None else weight
        total = Weyl(self, F.kinds)
        by_h: dict = {}
        for (h, s, a), v in F.terms.items():
            by_h.setdefault(h, {})[(0, s, a)] = v
        for h, terms in sorted(by_h.items()):
            if h > W:
                continue
            base = Weyl.from_func(self, FuncExpr(self.oc, F.kinds, terms))
            lifted = self._lift_classical(base, W - h)
            total = total + Weyl(self, F.kinds, {(A, J, hh + h, s, a): v for (A, J, hh, s, a), v in lifted.terms.items()})
        return total

    def _lift_classical(self, f0: Weyl, W: int) -> Weyl:
        comps = {0: f0}
        total = f0
        rc = self._r_comps
        for k in range(1, 2 * W + 1):
            rhs = self.nabla(comps[k - 1]).truncate_weight(W)
            for a in range(3, k + 2):
                b = k + 1 - a
                if b < 0 or b not in comps or a not in rc or not comps[b].terms:
                    continue
                br = self.bracket(rc[a], comps[b], max_degree=k + 1, max_weight=W + 1)
                if br.terms:
                    rhs = rhs + br.hbar_div()
            comps[k] = self.kappa(rhs).truncate_weight(W)
            total = total + comps[k]
        return total

    def _perm(self, A, B):
        key = (A, B)
        hit = self._perm_cache.get(key)
        if hit is not None:
            return hit
        a = [i for i, e in enumerate(A) for _ in range(e)]
        b = [i for i, e in enumerate(B) for _ in range(e)]
        n = len(a)
        total = self.ctx.zero
        for p in permutations(range(n)):
            t = self.ctx.one
            for s in range(n):
                t = t * self.P[a[s]][b[p[s]]]
                if t.is_zero():
                    break
            total = total + t
        hit = total * Fraction(1, 2 ** n)
        self._perm_cache[key] = hit
        return hit

    def sigma_prod(self, fa: Weyl, fb: Weyl) -> FuncExpr:
        """σ(fa ∘ fb) for 0-form sections: only complete contractions survive."""
        NH = self.N_hbar
        out: dict = {}
        for (A, J1, h1, s1, a1), v1 in fa.terms.items():
            n = _ydeg(A)
            for (B, J2, h2, s2, a2), v2 in fb.terms.items():
                if _ydeg(B) != n or J1 or J2:
                    continue
                h = h1 + h2 + n
                if h > NH:
                    continue
                c = self._perm(A, B)
                if c.is_zero():
                    continue
                key = (h, s1 + s2, tuple(sorted(a1 + a2)) if a2 else a1)
                val = v1 * v2 * c
                out[key] = out[key] + val if key in out else val
        return FuncExpr(self.oc_star, fa.kinds + fb.kinds, out)

    @property
    def oc_star(self):
        if not hasattr(self, "_oc_star"):
            self._oc_star = OpContext(self.L, self.ctx, self.hidx, self.N_hbar)
            self._oc_star._mul_cache = self.oc._mul_cache
        return self._oc_star

    def _as_engine_expr(self, F: FuncExpr) -> FuncExpr:
        return FuncExpr(self.oc, F.kinds, F.terms) if F.oc is not self.oc else F

    def star(self, F: FuncExpr, G: FuncExpr) -> FuncExpr:
        F = self._as_engine_expr(F)
        G = self._as_engine_expr(G)
        return self.sigma_prod(self.lift(F), self.lift(G))

    # convenience constructors
    def slot(self, kind="M"):
        return FuncExpr.slot(self.oc_star, kind)

    def scalar(self, c, hpow=0):
        return FuncExpr.scalar(self.oc_star, c, hpow)

    def lam(self, i):
        return FuncExpr.scalar(self.oc_star, self.ctx.var(i))

    def chi(self, j, F: FuncExpr) -> FuncExpr:
        """χ_{h_j}(F) = Σ_k c^l_{jk} λ_l ∂_{λ^k} F + →h_j F."""
        L, hidx = self.L, self.hidx
        pos = {g: a for a, g in enumerate(hidx)}
        out = F.deriv(self.d + hidx[j])
        for k, hk in enumerate(hidx):
            coef = self.ctx.zero
            for l, c in L.c[hidx[j]][hk].items():
                coef = coef + self.ctx.var(pos[l]) * c
            if not coef.is_zero():
                out = out + F.deriv(k).scale(coef)
        return FuncExpr(F.oc, out.kinds, out.terms)

    def poisson(self, F: FuncExpr, G: FuncExpr) -> FuncExpr:
        """{F, G} = Σ P^{ij} b_i(F) b_j(G)."""
        out = None
        for i in range(self.N):
            bi = None
            for j in range(self.N):
                p = self.P[i][j]
                if p.is_zero():
                    continue
                if bi is None:
                    bi = F.deriv(i)
                term = (bi * G.deriv(j)).scale(p)
                out = term if out is None else out + term
        return out if out is not None else FuncExpr(F.oc, F.kinds + G.kinds, {})

    def strong_invariance_defect(self, j, F: FuncExpr) -> FuncExpr:
        """h*F − F*h − ħ χ_h(F) for h = λ_j."""
        H = self.lam(j)
        lhs = self.star(H, F) - self.star(F, H)
        rhs = self.chi(j, F).hbar_shift(1)
        return lhs - FuncExpr(lhs.oc, rhs.kinds, rhs.terms)

    def strong_invariance_check(self, F: FuncExpr | None = None):
        """Raises NotStronglyInvariant with the first failing basis element and hbar order."""
        F = F if F is not None else self.slot()
        for j in range(self.d):
            defect = self.strong_invariance_defect(j, F)
            if not defect.is_zero():
                order = min(k[0] for k in defect.terms)
                raise NotStronglyInvariant(f"h_{j}: defect at hbar^{order}")
        return True


    # -- comparison of two characteristic classes -------------------------------
    def pi_sharp_pair(self, alpha: dict, F: FuncExpr, G: FuncExpr) -> FuncExpr:
        """α(π#dF, π#dG) for a frame 2-form α = {(k, l): RF} (k < l).

        With (π#dF)^k = Σ_i π^{ik} b_i F this is −Σ (PαP)^{ij} b_i F b_j G.
        """
        N = self.N
        A = [[self.ctx.zero] * N for _ in range(N)]
        for (k, l), v in alpha.items():
            A[k][l] = A[k][l] + v
            A[l][k] = A[l][k] - v
        out = None
        for i in range(N):
            for j in range(N):
                c = self.ctx.zero
                for k in range(N):
                    if self.P[i][k].is_zero():
                        continue
                    for l in range(N):
                        if not A[k][l].is_zero() and not self.P[l][j].is_zero():
                            c = c + self.P[i][k] * A[k][l] * self.P[l][j]
                if c.is_zero():
                    continue
                term = (F.deriv(i) * G.deriv(j)).scale(-c)
                out = term if out is None else out + term
        return out if out is not None else FuncExpr(F.oc, F.kinds + G.kinds, {})


def lemma_tech_compare(E1: FedosovEngine, E2: FedosovEngine) -> dict:
    """Leading difference of two Fedosov stars sharing π and the connection.

    If Ω₂ − Ω₁ = ħ^k α + O(ħ^{k+1}), the stars agree through ħ^k and
    *₂ − *₁ = ½ ħ^{k+1} α(π#d·, π#d·) + O(ħ^{k+2}).  Both sides are evaluated on
    universal arguments, so the comparison covers every pair of functions.
    Returns {"k", "agree_below", "leading_ok", "difference", "predicted"}.
    """
    ks = sorted(set(E1.omega_hbar) | set(E2.omega_hbar))
    k, alpha = None, {}
    for kk in ks:
        a1, a2 = E1.omega_hbar.get(kk, {}), E2.omega_hbar.get(kk, {})
        diff = {J: a2.get(J, E1.ctx.zero) - a1.get(J, E1.ctx.zero) for J in set(a1) | set(a2)}
        diff = {J: v for J, v in diff.items() if not v.is_zero()}
        if diff:
            k, alpha = kk, diff
            break
    F, G = E1.slot(), E1.slot()
    d = E2.star(F, G) - E1.star(F, G)
    if k is None:
        return {"k": None, "agree_below": d.is_zero(), "leading_ok": d.is_zero(), "difference": d, "predicted": None}
    agree = all(d.hbar_part(j).is_zero() for j in range(k + 1))
    lead = d.hbar_part(k + 1)
    predicted = E1.pi_sharp_pair(alpha, F, G).scale(Fraction(1, 2)).hbar_shift(k + 1)
    predicted = FuncExpr(lead.oc, predicted.kinds, predicted.terms)
    return {"k": k, "agree_below": agree, "leading_ok": (lead - predicted).is_zero(),
            "difference": lead, "predicted": predicted}

"""G-invariant differential expressions on U×G.

A *function expression* is Σ c(λ) · atoms · Π_s (D_s f_s) where

* c(λ) is a RationalFunction of the base variables,
* each slot s holds an invariant operator D_s = ∂_λ^α →u (u a PBW monomial of
  U(g), unscaled bracket) applied to an abstract argument f_s,
* atoms are matrix coefficients Ψ_{kj}(x) of Ad_{x⁻¹} (used by momentum maps).

Slot kinds restrict the argument: ``"M"`` generic, ``"G"`` independent of λ,
``"U"`` independent of the group variable.  Frame derivations b_i act by the
Leibniz rule, so universal operator identities are checked symbolically.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import comb

from .coeff import JetScalar, RationalFunction
from .lie import _normalize_word

__all__ = ["OpContext", "FuncExpr", "InvOp"]


class OpContext:
    """Shared data: Lie algebra, base subalgebra indices, λ-context, hbar cap."""

    def __init__(self, L, ctx, hidx, N: int):
        self.L = L
        self.ctx = ctx
        self.hidx = tuple(hidx)
        self.d = len(self.hidx)
        self.n = L.n
        self.N = N
        self._mul_cache: dict = {}
        self._atom_cache: dict = {}

    @property
    def zero_alpha(self):
        return (0,) * self.d

    def identity_slot(self):
        return (self.zero_alpha, ())

    def left_mul(self, a: int, u: tuple):
        key = (a, u)
        hit = self._mul_cache.get(key)
        if hit is None:
            hit = tuple((w, c) for (w, _), c in _normalize_word(self.L, (a,) + u, False).items())
            self._mul_cache[key] = hit
        return hit

    def word_product(self, u: tuple, v: tuple):
        return tuple((w, c) for (w, _), c in _normalize_word(self.L, u + v, False).items())

    def slot_deriv(self, key, i: int, kind: str):
        """b_i applied to the slot operator: list of (new key, Fraction)."""
        alpha, u = key
        d = self.d
        if i < d:
            if kind == "G":
                return ()
            na = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]
            return (((na, u), 1),)
        if kind == "U":
            return ()
        return tuple(((alpha, w), c) for w, c in self.left_mul(i - d, u))

    def atom_deriv(self, atom, i: int):
        """b_i(Ψ_{kj}) = −Σ_l c^k_{al} Ψ_{lj} for i = d + a (Ψ = Ad_{x⁻¹}); λ-derivatives vanish."""
        if i < self.d:
            return ()
        a = i - self.d
        k, j = atom
        hit = self._atom_cache.get((a, k))
        if hit is None:
            hit = tuple((l, -c[k]) for l, c in enumerate(self.L.c[a]) if k in c)
            self._atom_cache[(a, k)] = hit
        return tuple(((l, j), v) for l, v in hit)

    def rf_deriv(self, c: RationalFunction, i: int):
        return c.diff(i) if i < self.d else None


def _merge_atoms(a: tuple, b: tuple) -> tuple:
    return tuple(sorted(a + b))


class FuncExpr:
    """Σ c · hbar^k · atoms · Π (D_s f_s); ``terms`` {(k, slots, atoms): RationalFunction}."""

    __slots__ = ("oc", "kinds", "terms")

    def __init__(self, oc: OpContext, kinds: tuple, terms=None):
        self.oc = oc
        self.kinds = tuple(kinds)
        self.terms = {}
        if terms:
            N = oc.N
            for key, v in terms.items():
                if key[0] > N:
                    continue
                if not isinstance(v, RationalFunction):
                    v = oc.ctx.const(v)
                if not v.is_zero():
                    self.terms[key] = v

    # -- constructors -------------------------------------------------------
    @classmethod
    def slot(cls, oc, kind="M"):
        return cls(oc, (kind,), {(0, (oc.identity_slot(),), ()): oc.ctx.one})

    @classmethod
    def scalar(cls, oc, c, hpow=0):
        c = c if isinstance(c, RationalFunction) else oc.ctx.const(c)
        return cls(oc, (), {(hpow, (), ()): c})

    @classmethod
    def atom(cls, oc, k, j, c=1):
        c = c if isinstance(c, RationalFunction) else oc.ctx.const(c)
        return cls(oc, (), {(0, (), ((k, j),)): c})

    @classmethod
    def zero(cls, oc, kinds=()):
        return cls(oc, kinds, {})

    # -- linear structure -----------------------------------------------------
    def _same(self, other):
        if self.kinds != other.kinds and self.terms and other.terms:
            raise ValueError(f"slot kinds differ: {self.kinds} vs {other.kinds}")

    def __add__(self, other):
        if not isinstance(other, FuncExpr):
            other = FuncExpr.scalar(self.oc, other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        self._same(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            if k in out:
                s = out[k] + v
                if s.is_zero():
                    del out[k]
                else:
                    out[k] = s
            else:
                out[k] = v
        return FuncExpr(self.oc, self.kinds or other.kinds, out)

    def __neg__(self):
        return FuncExpr(self.oc, self.kinds, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, FuncExpr):
            other = FuncExpr.scalar(self.oc, other)
        return self + (-other)

    def scale(self, c):
        if isinstance(c, RationalFunction):
            if c.is_zero():
                return FuncExpr(self.oc, self.kinds, {})
        return FuncExpr(self.oc, self.kinds, {k: v * c for k, v in self.terms.items()})

    def hbar_shift(self, k):
        if not k:
            return self
        return FuncExpr(self.oc, self.kinds, {(key[0] + k,) + key[1:]: v for key, v in self.terms.items()})

    def hbar_part(self, k):
        return FuncExpr(self.oc, self.kinds, {key: v for key, v in self.terms.items() if key[0] == k})

    def hbar_div(self):
        """Divide by hbar; raises if a classical term is present."""
        out = {}
        for (h, s, a), v in self.terms.items():
            if h == 0:
                raise ValueError("hbar-division of an expression with a classical part")
            out[(h - 1, s, a)] = v
        return FuncExpr(self.oc, self.kinds, out)

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return (self - other).is_zero()

    __hash__ = None

    # -- products and derivations -------------------------------------------
    def __mul__(self, other):
        if not isinstance(other, FuncExpr):
            return self.scale(other)
        N = self.oc.N
        out: dict = {}
        for (ha, sa, aa), va in self.terms.items():
            for (hb, sb, ab), vb in other.terms.items():
                h = ha + hb
                if h > N:
                    continue
                key = (h, sa + sb, _merge_atoms(aa, ab) if ab else aa)
                val = va * vb
                if key in out:
                    out[key] = out[key] + val
                else:
                    out[key] = val
        return FuncExpr(self.oc, self.kinds + other.kinds, out)

    def deriv(self, i: int) -> "FuncExpr":
        """Frame derivation b_i (i < d: ∂_{λ^i}; else →e_{i−d})."""
        oc = self.oc
        out: dict = {}

        def put(key, val):
            if key in out:
                out[key] = out[key] + val
            else:
                out[key] = val

        for (h, slots, atoms), v in self.terms.items():
            dv = oc.rf_deriv(v, i)
            if dv is not None and not dv.is_zero():
                put((h, slots, atoms), dv)
            for s, key in enumerate(slots):
                for nk, c in oc.slot_deriv(key, i, self.kinds[s]):
                    put((h, slots[:s] + (nk,) + slots[s + 1:], atoms), v * c)
            for t, atom in enumerate(atoms):
                rest = atoms[:t] + atoms[t + 1:]
                for na, c in oc.atom_deriv(atom, i):
                    put((h, slots, tuple(sorted(rest + (na,)))), v * c)
        return FuncExpr(oc, self.kinds, out)

    def apply_op(self, alpha: tuple, u: tuple) -> "FuncExpr":
        """∂_λ^α →u applied to the whole expression."""
        out = self
        for a in reversed(u):
            out = out.deriv(self.oc.d + a)
        for i, k in enumerate(alpha):
            for _ in range(k):
                out = out.deriv(i)
        return out

    def permute_slots(self, perm) -> "FuncExpr":
        """New slot s is old slot perm[s]."""
        return FuncExpr(
            self.oc,
            tuple(self.kinds[p] for p in perm),
            {(h, tuple(s[p] for p in perm), a): v for (h, s, a), v in self.terms.items()},
        )

    def with_kinds(self, kinds):
        """Reinterpret slot kinds, dropping terms that vanish for the new kinds."""
        out = {}
        for (h, slots, a), v in self.terms.items():
            ok = True
            for (alpha, u), kd in zip(slots, kinds):
                if (kd == "G" and any(alpha)) or (kd == "U" and u):
                    ok = False
                    break
            if ok:
                out[(h, slots, a)] = v
        return FuncExpr(self.oc, kinds, out)

    def substitute_slot(self, s: int, expr: "FuncExpr") -> "FuncExpr":
        """Replace argument s by a function expression (slots of ``expr`` appended at position s)."""
        oc = self.oc
        out = FuncExpr(oc, self.kinds[:s] + expr.kinds + self.kinds[s + 1:], {})
        cache = {}
        for (h, slots, atoms), v in self.terms.items():
            key = slots[s]
            if key not in cache:
                cache[key] = expr.apply_op(*key)
            img = cache[key]
            for (h2, s2, a2), v2 in img.terms.items():
                if h + h2 > oc.N:
                    continue
                nk = (h + h2, slots[:s] + s2 + slots[s + 1:], tuple(sorted(atoms + a2)))
                val = v * v2
                if nk in out.terms:
                    nv = out.terms[nk] + val
                    if nv.is_zero():
                        del out.terms[nk]
                    else:
                        out.terms[nk] = nv
                elif not val.is_zero():
                    out.terms[nk] = val
        return out

    def slot_coproduct(self, s: int) -> "FuncExpr":
        """Replace argument s by a product of two arguments (Leibniz on ∂^α →u)."""
        out: dict = {}
        for (h, slots, atoms), v in self.terms.items():
            alpha, u = slots[s]
            for beta in product(*(range(a + 1) for a in alpha)):
                c = 1
                for a, b in zip(alpha, beta):
                    c *= comb(a, b)
                rest = tuple(a - b for a, b in zip(alpha, beta))
                L = len(u)
                for mask in range(1 << L):
                    left = tuple(u[p] for p in range(L) if mask >> p & 1)
                    right = tuple(u[p] for p in range(L) if not mask >> p & 1)
                    key = (h, slots[:s] + ((tuple(beta), left), (rest, right)) + slots[s + 1:], atoms)
                    val = v * c
                    out[key] = out[key] + val if key in out else val
        kinds = self.kinds[:s] + (self.kinds[s], self.kinds[s]) + self.kinds[s + 1:]
        return FuncExpr(self.oc, kinds, out)

    def drop_atoms_check(self):
        return all(not a for (_, _, a) in self.terms)

    # -- evaluation on concrete jets -------------------------------------------
    def evaluate(self, cfg, args, frame_left, atom_jets=None, embed=None, hbar=True):
        """Evaluate on concrete JetScalars ``args`` (one per slot).

        ``frame_left`` are the left-invariant field jets; ``embed`` maps λ-rational
        functions into the jet context (default ``cfg.lift_rf``).  hbar becomes the
        jet hbar variable when ``hbar`` is true.
        """
        embed = embed or cfg.lift_rf
        cache: dict = {}
        hjet = JetScalar.hbar(cfg)

        def op(s, key):
            ck = (s, key)
            if ck not in cache:
                alpha, u = key
                f = args[s]
                for a in reversed(u):
                    f = frame_left[a].apply(f)
                for i, k in enumerate(alpha):
                    for _ in range(k):
                        f = f.differentiate(("lambda", i))
                cache[ck] = f
            return cache[ck]

        total = JetScalar(cfg)
        for (h, slots, atoms), v in self.terms.items():
            term = JetScalar(cfg, embed(v))
            for s, key in enumerate(slots):
                term = term * op(s, key)
            for atom in atoms:
                term = term * atom_jets[atom]
            if h:
                term = term * (hjet if hbar else JetScalar.const(cfg, 1))
                for _ in range(h - 1):
                    term = term * hjet
            total = total + term
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        names = self.oc.L.names

        def sk(k):
            alpha, u = k
            parts = [f"∂{i}^{a}" for i, a in enumerate(alpha) if a]
            if u:
                parts.append("→" + "".join(names[x] for x in u))
            return "".join(parts) or "id"

        out = []
        for (h, slots, atoms), v in sorted(self.terms.items(), key=lambda kv: repr(kv[0])):
            s = "·".join(f"[{sk(k)}]f{idx}" for idx, k in enumerate(slots))
            a = "".join(f"Ψ{k}{j}" for k, j in atoms)
            out.append(f"({v})ħ^{h}{a}{s}")
        return " + ".join(out)


class InvOp:
    """Invariant differential operator Σ hbar^k q(λ) ∂_λ^α →u; ``terms`` {(k, alpha, u): RF}."""

    __slots__ = ("oc", "terms")

    def __init__(self, oc: OpContext, terms=None):
        self.oc = oc
        self.terms = {}
        for key, v in (terms or {}).items():
            if key[0] > oc.N:
                continue
            if not isinstance(v, RationalFunction):
                v = oc.ctx.const(v)
            if not v.is_zero():
                self.terms[key] = v

    @classmethod
    def identity(cls, oc):
        return cls(oc, {(0, oc.zero_alpha, ()): 1})

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return InvOp(self.oc, out)

    def __neg__(self):
        return InvOp(self.oc, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self):
        return not self.terms

    def compose(self, other: "InvOp") -> "InvOp":
        """(q ∂^α →u) ∘ (q' ∂^β →v) = Σ_γ C(α,γ) q (∂^γ q') ∂^{α−γ+β} →(uv)."""
        oc = self.oc
        out: dict = {}
        for (h1, a, u), q in self.terms.items():
            for (h2, b, v), q2 in other.terms.items():
                if h1 + h2 > oc.N:
                    continue
                uv = oc.word_product(u, v)
                for g in product(*(range(x + 1) for x in a)):
                    c = 1
                    dq = q2
                    for i, (ai, gi) in enumerate(zip(a, g)):
                        c *= comb(ai, gi)
                        for _ in range(gi):
                            dq = dq.diff(i)
                    if dq.is_zero():
                        continue
                    coef = q * dq * c
                    alpha = tuple(ai - gi + bi for ai, gi, bi in zip(a, g, b))
                    for w, cw in uv:
                        key = (h1 + h2, alpha, w)
                        val = coef * cw
                        out[key] = out[key] + val if key in out else val
        return InvOp(oc, out)

    def inverse(self) -> "InvOp":
        """Inverse of id + O(hbar) by the geometric series."""
        oc = self.oc
        one = InvOp.identity(oc)
        eps = one - self
        if any(k[0] == 0 for k in eps.terms):
            raise ValueError("operator is not identity modulo hbar")
        out = one
        power = one
        for _ in range(oc.N):
            power = power.compose(eps)
            if power.is_zero():
                break
            out = out + power
        return out

    def apply(self, F: FuncExpr) -> FuncExpr:
        out = FuncExpr(self.oc, F.kinds, {})
        cache: dict = {}
        for (h, a, u), q in self.terms.items():
            key = (a, u)
            if key not in cache:
                cache[key] = F.apply_op(a, u)
            out = out + cache[key].scale(q).hbar_shift(h)
        return out


def ad_exp_atoms(L, cfg, x_offset=0):
    """Jets of Ψ_{kj}(x) = (exp(−ad_X))_{kj} = (Ad_{x⁻¹})_{kj}, X = Σ x^c e_c."""
    n = L.n
    xs = [JetScalar.x(cfg, x_offset + c) for c in range(n)]
    adX = [[JetScalar(cfg) for _ in range(n)] for _ in range(n)]
    for c in range(n):
        for j in range(n):
            for k, v in L.c[c][j].items():
                adX[k][j] = adX[k][j] - xs[c] * v
    out = [[JetScalar.const(cfg, int(k == j)) for j in range(n)] for k in range(n)]
    term = [row[:] for row in out]
    for m in range(1, cfg.D_x + 1):
        term = [[sum((term[k][l] * adX[l][j] for l in range(n)), JetScalar(cfg)) * Fraction(1, m) for j in range(n)] for k in range(n)]
        out = [[out[k][j] + term[k][j] for j in range(n)] for k in range(n)]
    return {(k, j): out[k][j] for k in range(n) for j in range(n)}

"""Lie algebras by structure constants, Schouten calculus on the exterior
algebra, and the enveloping-algebra layer (PBW normal form, Hopf maps,
symmetrisation, PBW star product)."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Sequence

from .coeff import PolyContext, RationalFunction, to_fraction
from .errors import InputInvalid

__all__ = [
    "LieAlgebraData",
    "jacobi_check",
    "PolyVectorField",
    "schouten_bracket",
    "invariance_check",
    "EnvTensor",
    "pbw_normalize",
    "sym_map",
    "sym_inverse",
    "pbw_star",
    "so3",
    "sl2",
]


class LieAlgebraData:
    """Structure constants ``c[i][j] = {k: c^k_ij}`` plus distinguished index sets.

    Basis order is declaration order; it is also the PBW order.
    """

    def __init__(self, basis_names, table, h=(), m=(), t=None, mprime=None):
        self.names = tuple(basis_names)
        self.n = len(self.names)
        self.c = [[{} for _ in range(self.n)] for _ in range(self.n)]
        for (i, j, k), v in table.items():
            v = to_fraction(v)
            if v:
                self.c[i][j][k] = self.c[i][j].get(k, 0) + v
        self.h = tuple(h)
        self.m = tuple(m)
        self.t = None if t is None else tuple(t)
        self.mprime = None if mprime is None else tuple(mprime)

    @classmethod
    def from_brackets(cls, basis_names, brackets, **kw):
        """``brackets``: iterable of (i, j, k, value) meaning [e_i, e_j] += value e_k (antisymmetrised)."""
        table = {}
        for i, j, k, v in brackets:
            v = to_fraction(v)
            table[(i, j, k)] = table.get((i, j, k), 0) + v
            table[(j, i, k)] = table.get((j, i, k), 0) - v
        return cls(basis_names, table, **kw)

    def bracket(self, i: int, j: int) -> dict:
        return self.c[i][j]

    def with_splitting(self, h, m, t=None, mprime=None) -> "LieAlgebraData":
        table = {(i, j, k): v for i in range(self.n) for j in range(self.n) for k, v in self.c[i][j].items()}
        return LieAlgebraData(self.names, table, h=h, m=m, t=t, mprime=mprime)

    @property
    def d(self) -> int:
        return len(self.h)

    def h_structure(self) -> list:
        """Structure constants of h in h-positions: ``ch[a][b] = {c: value}``."""
        pos = {g: a for a, g in enumerate(self.h)}
        out = [[{} for _ in self.h] for _ in self.h]
        for a, i in enumerate(self.h):
            for b, j in enumerate(self.h):
                for k, v in self.c[i][j].items():
                    if k not in pos:
                        raise InputInvalid(f"h is not closed: [{self.names[i]},{self.names[j]}]", "splitting.h")
                    out[a][b][pos[k]] = v
        return out

    def is_subalgebra(self, idx) -> bool:
        s = set(idx)
        return all(set(self.c[i][j]) <= s for i in idx for j in idx)

    def is_reductive(self, h, m) -> bool:
        s = set(m)
        return all(set(self.c[i][j]) <= s for i in h for j in m)

    def is_abelian(self, idx=None) -> bool:
        idx = range(self.n) if idx is None else idx
        return not any(self.c[i][j] for i in idx for j in idx)

    def lambda_context(self, base_point=None, names=None) -> PolyContext:
        names = names or [f"l_{self.names[i]}" for i in self.h]
        return PolyContext(names, base_point)


def jacobi_check(L: LieAlgebraData):
    """Return (True, None) or (False, (kind, indices)) for the first violation."""
    n = L.n
    for i in range(n):
        for j in range(n):
            a, b = L.c[i][j], L.c[j][i]
            for k in set(a) | set(b):
                if a.get(k, 0) + b.get(k, 0) != 0:
                    return False, ("antisymmetry", (i, j))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                acc: dict = {}
                for (p, q, r) in ((i, j, k), (j, k, i), (k, i, j)):
                    for mm, v in L.c[p][q].items():
                        for ll, w in L.c[mm][r].items():
                            acc[ll] = acc.get(ll, 0) + v * w
                for ll, v in acc.items():
                    if v:
                        return False, ("jacobi", (i, j, k, ll))
    return True, None


def so3(h=(2,), m=(0, 1), **kw) -> LieAlgebraData:
    return LieAlgebraData.from_brackets(
        ("e1", "e2", "e3"), [(0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1)], h=h, m=m, **kw
    )


def sl2(h=(0,), m=(1, 2), **kw) -> LieAlgebraData:
    return LieAlgebraData.from_brackets(
        ("h", "e", "f"), [(0, 1, 1, 2), (0, 2, 2, -2), (1, 2, 0, 1)], h=h, m=m, **kw
    )


# ---------------------------------------------------------------------------
# Polyvectors on the exterior algebra of g with rational-function coefficients
# ---------------------------------------------------------------------------


def wedge_sort(idx: Sequence[int]):
    """Sort a tuple of basis indices; return (sign, sorted tuple) or (0, None) on repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, None
    sign = 1
    for a in range(len(idx)):
        for b in range(len(idx) - 1 - a):
            if idx[b] > idx[b + 1]:
                idx[b], idx[b + 1] = idx[b + 1], idx[b]
                sign = -sign
    return sign, tuple(idx)


class PolyVectorField:
    """Homogeneous element of C(U) ⊗ ∧^k g stored on ascending index tuples."""

    __slots__ = ("L", "ctx", "k", "coeffs")

    def __init__(self, L, ctx, k, coeffs=None):
        self.L = L
        self.ctx = ctx
        self.k = k
        self.coeffs = {}
        for key, v in (coeffs or {}).items():
            if not isinstance(v, RationalFunction):
                v = ctx.const(v)
            sign, skey = wedge_sort(key)
            if not sign or v.is_zero():
                continue
            prev = self.coeffs.get(skey)
            nv = v if sign > 0 else -v
            nv = nv if prev is None else prev + nv
            if nv.is_zero():
                self.coeffs.pop(skey, None)
            else:
                self.coeffs[skey] = nv

    @classmethod
    def basis(cls, L, ctx, *idx, coeff=1):
        return cls(L, ctx, len(idx), {tuple(idx): coeff})

    @classmethod
    def zero(cls, L, ctx, k):
        return cls(L, ctx, k, {})

    def is_zero(self):
        return not self.coeffs

    def __add__(self, other):
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        assert self.k == other.k
        out = dict(self.coeffs)
        for key, v in other.coeffs.items():
            out[key] = out[key] + v if key in out else v
        return PolyVectorField(self.L, self.ctx, self.k, out)

    def __neg__(self):
        return PolyVectorField(self.L, self.ctx, self.k, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f):
        return PolyVectorField(self.L, self.ctx, self.k, {k: v * f for k, v in self.coeffs.items()})

    def wedge(self, other):
        out: dict = {}
        for a, va in self.coeffs.items():
            for b, vb in other.coeffs.items():
                sign, key = wedge_sort(a + b)
                if not sign:
                    continue
                v = va * vb if sign > 0 else -(va * vb)
                out[key] = out[key] + v if key in out else v
        return PolyVectorField(self.L, self.ctx, self.k + other.k, out)

    def diff_lambda(self, i):
        return PolyVectorField(self.L, self.ctx, self.k, {k: v.diff(i) for k, v in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, PolyVectorField) and (self - other).is_zero()

    __hash__ = None

    def to_terms(self):
        return [[list(key), v.to_terms()] for key, v in sorted(self.coeffs.items())]

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(
            f"({v})*" + "∧".join(self.L.names[i] for i in key) for key, v in sorted(self.coeffs.items())
        )


@lru_cache(maxsize=None)
def _monomial_schouten(cid, X: tuple, Y: tuple):
    L = _LIE_REGISTRY[cid]
    out: dict = {}
    for i, x in enumerate(X):
        rest_x = X[:i] + X[i + 1:]
        for j, y in enumerate(Y):
            rest_y = Y[:j] + Y[j + 1:]
            s = -1 if (i + j) % 2 else 1
            for k, v in L.c[x][y].items():
                sign, key = wedge_sort((k,) + rest_x + rest_y)
                if sign:
                    out[key] = out.get(key, 0) + s * sign * v
    return tuple((k, v) for k, v in out.items() if v)


_LIE_REGISTRY: dict = {}


def _lie_id(L):
    cid = id(L)
    _LIE_REGISTRY[cid] = L
    return cid


def schouten_bracket(P: PolyVectorField, Q: PolyVectorField) -> PolyVectorField:
    """Algebraic Schouten bracket on ∧g, λ entering as a parameter.

    Sign convention: [x, u∧v] = [x,u]∧v + u∧[x,v] and
    [x∧y, Q] = x∧[y,Q] − y∧[x,Q].
    """
    L, ctx = P.L, P.ctx
    if P.k == 0 or Q.k == 0:
        return PolyVectorField.zero(L, ctx, max(P.k + Q.k - 1, 0))
    cid = _lie_id(L)
    out: dict = {}
    for X, vx in P.coeffs.items():
        for Y, vy in Q.coeffs.items():
            mono = _monomial_schouten(cid, X, Y)
            if not mono:
                continue
            prod = vx * vy
            for key, v in mono:
                term = prod * v
                out[key] = out[key] + term if key in out else term
    return PolyVectorField(L, ctx, P.k + Q.k - 1, out)


def invariance_check(Z: PolyVectorField):
    """Check [e_i, Z] = 0 for every basis element; returns (ok, first failing index)."""
    for i in range(Z.L.n):
        if not schouten_bracket(PolyVectorField.basis(Z.L, Z.ctx, i), Z).is_zero():
            return False, i
    return True, None


# ---------------------------------------------------------------------------
# Enveloping algebra
# ---------------------------------------------------------------------------

_NORMAL_CACHE: dict = {}


def _normalize_word(L: LieAlgebraData, word: tuple, scaled: bool) -> dict:
    """PBW normal form of a word: {(sorted word, hbar power): Fraction}."""
    key = (id(L), word, scaled)
    hit = _NORMAL_CACHE.get(key)
    if hit is not None and hit[0] is L:
        return hit[1]
    for p in range(len(word) - 1):
        a, b = word[p], word[p + 1]
        if a > b:
            break
    else:
        res = {(word, 0): Fraction(1)}
        _NORMAL_CACHE[key] = (L, res)
        return res
    res: dict = {}
    # ab = ba + hbar [a, b]
    for (mono, k), v in _normalize_word(L, word[:p] + (b, a) + word[p + 2:], scaled).items():
        res[(mono, k)] = res.get((mono, k), 0) + v
    shift = 1 if scaled else 0
    for c, cv in L.c[a][b].items():
        for (mono, k), v in _normalize_word(L, word[:p] + (c,) + word[p + 2:], scaled).items():
            kk = (mono, k + shift)
            res[kk] = res.get(kk, 0) + cv * v
    res = {k: v for k, v in res.items() if v}
    _NORMAL_CACHE[key] = (L, res)
    return res


def pbw_normalize(L, word, coeff=1, ctx=None, scaled=True, N=None) -> "EnvTensor":
    ctx = ctx or PolyContext([])
    t = EnvTensor(L, ctx, 1, {}, N=N, scaled=scaled)
    c = coeff if isinstance(coeff, RationalFunction) else ctx.const(coeff)
    terms = {}
    for (mono, k), v in _normalize_word(L, tuple(word), scaled).items():
        terms[((mono,), k)] = c * v
    return EnvTensor(L, ctx, 1, terms, N=N, scaled=scaled)


class EnvTensor:
    """Element of U(g)^{⊗k}[[hbar]] with λ-rational coefficients.

    ``terms``: {((mono_1, ..., mono_k), hbar power): RationalFunction}, each
    mono an ascending tuple of basis indices.  ``scaled`` selects U(g_hbar)
    (rewrites carry hbar) versus plain U(g).
    """

    __slots__ = ("L", "ctx", "arity", "terms", "N", "scaled")

    def __init__(self, L, ctx, arity, terms=None, N=None, scaled=True):
        self.L = L
        self.ctx = ctx
        self.arity = arity
        self.N = N
        self.scaled = scaled
        clean = {}
        for key, v in (terms or {}).items():
            if N is not None and key[1] > N:
                continue
            if not isinstance(v, RationalFunction):
                v = ctx.const(v)
            if not v.is_zero():
                clean[key] = v
        self.terms = clean

    def _new(self, terms, arity=None):
        return EnvTensor(self.L, self.ctx, self.arity if arity is None else arity, terms, self.N, self.scaled)

    @classmethod
    def one(cls, L, ctx, arity, N=None, scaled=True):
        return cls(L, ctx, arity, {(((),) * arity, 0): 1}, N, scaled)

    @classmethod
    def from_words(cls, L, ctx, words_coeffs, arity, N=None, scaled=True):
        """``words_coeffs``: iterable of ((word_1..word_k), hbar power, coeff); words normalised."""
        out = cls(L, ctx, arity, {}, N, scaled)
        for words, k, c in words_coeffs:
            t = cls.one(L, ctx, arity, N, scaled)
            for s, w in enumerate(words):
                t = t.mul_slot_word(s, w)
            out = out + t.scale(c).hbar_shift(k)
        return out

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return self._new(out)

    def __neg__(self):
        return self._new({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return self._new({k: v * c for k, v in self.terms.items()})

    def hbar_shift(self, k):
        return self._new({(m, h + k): v for (m, h), v in self.terms.items()})

    def __eq__(self, other):
        return (self - other).is_zero()

    __hash__ = None

    def hbar_part(self, k):
        return self._new({key: v for key, v in self.terms.items() if key[1] == k})

    def mul_slot_word(self, slot, word):
        """Right-multiply slot ``slot`` by a word of basis elements."""
        out: dict = {}
        for (monos, h), v in self.terms.items():
            for (mono, k), q in _normalize_word(self.L, monos[slot] + tuple(word), self.scaled).items():
                key = (monos[:slot] + (mono,) + monos[slot + 1:], h + k)
                val = v * q
                out[key] = out[key] + val if key in out else val
        return self._new(out)

    def __mul__(self, other):
        """Slotwise product; λ-coefficients multiply pointwise."""
        if not isinstance(other, EnvTensor):
            return self.scale(other)
        assert self.arity == other.arity
        N = self.N if other.N is None else (other.N if self.N is None else min(self.N, other.N))
        out: dict = {}
        for (ma, ha), va in self.terms.items():
            for (mb, hb), vb in other.terms.items():
                if N is not None and ha + hb > N:
                    continue
                acc = {((), ha + hb): Fraction(1)}
                for s in range(self.arity):
                    nf = _normalize_word(self.L, ma[s] + mb[s], self.scaled)
                    nacc = {}
                    for (monos, h), q in acc.items():
                        for (mono, k), r in nf.items():
                            kk = (monos + (mono,), h + k)
                            nacc[kk] = nacc.get(kk, 0) + q * r
                    acc = nacc
                prod = va * vb
                for key, q in acc.items():
                    if not q or (N is not None and key[1] > N):
                        continue
                    val = prod * q
                    out[key] = out[key] + val if key in out else val
        return EnvTensor(self.L, self.ctx, self.arity, out, N, self.scaled)

    def tensor(self, other):
        out: dict = {}
        for (ma, ha), va in self.terms.items():
            for (mb, hb), vb in other.terms.items():
                key = (ma + mb, ha + hb)
                val = va * vb
                out[key] = out[key] + val if key in out else val
        return EnvTensor(self.L, self.ctx, self.arity + other.arity, out, self.N, self.scaled)

    def coproduct(self, slot) -> "EnvTensor":
        """Δ applied on one slot; arity grows by one."""
        out: dict = {}
        for (monos, h), v in self.terms.items():
            w = monos[slot]
            L = len(w)
            for mask in range(1 << L):
                left = tuple(w[p] for p in range(L) if mask >> p & 1)
                right = tuple(w[p] for p in range(L) if not mask >> p & 1)
                key = (monos[:slot] + (left, right) + monos[slot + 1:], h)
                out[key] = out[key] + v if key in out else v
        return self._new(out, self.arity + 1)

    def antipode(self) -> "EnvTensor":
        """S on every slot: S(x_1...x_k) = (−1)^k x_k...x_1."""
        out: dict = {}
        for (monos, h), v in self.terms.items():
            acc = {((), h): v}
            for w in monos:
                nf = _normalize_word(self.L, tuple(reversed(w)), self.scaled)
                sign = -1 if len(w) % 2 else 1
                nacc = {}
                for (ms, hh), q in acc.items():
                    for (mono, k), r in nf.items():
                        kk = (ms + (mono,), hh + k)
                        val = q * (r * sign)
                        nacc[kk] = nacc[kk] + val if kk in nacc else val
                acc = nacc
            for key, val in acc.items():
                out[key] = out[key] + val if key in out else val
        return self._new(out)

    def permute(self, perm) -> "EnvTensor":
        """New slot s holds old slot perm[s]."""
        return self._new({(tuple(m[p] for p in perm), h): v for (m, h), v in self.terms.items()})

    def map_coeffs(self, fn):
        return self._new({k: fn(v) for k, v in self.terms.items()})

    def to_json(self):
        """Deterministic nested lists: [[monos, hbar power, coefficient terms], ...]."""
        return [
            [[list(m) for m in monos], h, v.to_terms()]
            for (monos, h), v in sorted(self.terms.items())
        ]

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for (monos, h), v in sorted(self.terms.items()):
            s = "⊗".join("·".join(self.L.names[i] for i in m) or "1" for m in monos)
            parts.append(f"({v})ħ^{h}[{s}]")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# Symmetrisation and the PBW star product on polynomial functions of h*
# ---------------------------------------------------------------------------


def _distinct_arrangements(word):
    return sorted(set(permutations(word)))


@lru_cache(maxsize=None)
def _sym_of_monomial(cid, exps: tuple) -> tuple:
    L = _LIE_REGISTRY[cid]
    word = tuple(L.h[i] for i, e in enumerate(exps) for _ in range(e))
    arr = _distinct_arrangements(word)
    acc: dict = {}
    for w in arr:
        for key, v in _normalize_word(L, w, True).items():
            acc[key] = acc.get(key, 0) + v
    n = len(arr)
    return tuple((k, v / n) for k, v in acc.items() if v)


def sym_map(L, ctx, u, N=None) -> EnvTensor:
    """Symmetrisation S(h)[hbar] → U(h_hbar); ``u`` a polynomial in the λ-variables
    (or a dict {hbar power: polynomial})."""
    cid = _lie_id(L)
    series = u if isinstance(u, dict) and not hasattr(u, "ring") else {0: u}
    terms: dict = {}
    for h0, poly in series.items():
        poly = poly.num if isinstance(poly, RationalFunction) else ctx.ring(poly)
        for exps, c in poly.items():
            exps = tuple(exps)[: L.d] if L.d else ()
            for (mono, k), v in _sym_of_monomial(cid, exps):
                key = ((mono,), h0 + k)
                val = ctx.const(to_fraction(c) * v)
                terms[key] = terms[key] + val if key in terms else val
    return EnvTensor(L, ctx, 1, terms, N, True)


def sym_inverse(L, ctx, t: EnvTensor) -> dict:
    """Inverse of ``sym_map``: returns {hbar power: polynomial in λ}."""
    pos = {g: a for a, g in enumerate(L.h)}
    rem = dict(t.terms)
    out: dict = {}
    cid = _lie_id(L)
    while rem:
        (monos, h), v = max(rem.items(), key=lambda kv: (len(kv[0][0][0]), -kv[0][1], kv[0]))
        mono = monos[0]
        exps = [0] * max(L.d, 1)
        for g in mono:
            if g not in pos:
                raise ValueError("element not supported on U(h)")
            exps[pos[g]] += 1
        poly = ctx.ring({tuple(exps): 1})
        coeff = v
        out[h] = out.get(h, ctx.zero) + coeff * ctx.poly(poly)
        for (m, k), w in _sym_of_monomial(cid, tuple(exps[: L.d])):
            key = ((m,), h + k)
            if t.N is not None and key[1] > t.N:
                continue
            nv = rem[key] - coeff * w if key in rem else -(coeff * w)
            if nv.is_zero():
                rem.pop(key, None)
            else:
                rem[key] = nv
    return {k: v for k, v in out.items() if not v.is_zero()}


def pbw_star(L, ctx, u, v, N: int) -> dict:
    """u *_PBW v = sym⁻¹(sym(u)·sym(v)) truncated at hbar^N; inputs polynomials
    or {hbar power: polynomial}; output {hbar power: RationalFunction}."""
    su = sym_map(L, ctx, u, N)
    sv = sym_map(L, ctx, v, N)
    return sym_inverse(L, ctx, su * sv)

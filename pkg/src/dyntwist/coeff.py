"""Exact coefficient arithmetic.

Three layers live here:

* :class:`PolyContext` / :class:`RationalFunction` -- rational functions in the
  base variables ``lambda^1..lambda^d`` over QQ.  Polynomials are sympy's
  sparse ``PolyElement``; denominators are kept as products of powers of
  registered irreducible factors, so sums never need a gcd.
* :class:`JetScalar` -- rational function coefficients times a polynomial in the
  group coordinates ``x`` truncated at degree ``D_x`` times a polynomial in hbar
  truncated at ``N_hbar``, with an exactness watermark.
* :class:`TruncationConfig`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from sympy import QQ
from sympy.polys.rings import ring

from .errors import DegenerateDenominator, TruncationError

__all__ = [
    "PolyContext",
    "RationalFunction",
    "TruncationConfig",
    "JetScalar",
    "to_fraction",
    "parse_rational",
]


def to_fraction(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, int):
        return Fraction(q)
    if isinstance(q, str):
        return parse_rational(q)
    return Fraction(int(q.numerator), int(q.denominator))


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def _qq(q):
    if isinstance(q, Fraction):
        return QQ(q.numerator, q.denominator)
    if isinstance(q, str):
        f = Fraction(q)
        return QQ(f.numerator, f.denominator)
    return QQ(q)


class PolyContext:
    """Polynomial ring QQ[lambda^1..lambda^d] plus the registry of denominator factors.

    ``base_point`` (optional) is the rational point lambda_0 that no recorded
    denominator may vanish at.
    """

    def __init__(self, names: Sequence[str], base_point: Sequence | None = None):
        self.names = tuple(names)
        self.d = len(self.names)
        gens = self.names if self.d else ("_z",)
        self.ring, *self.gens = ring(",".join(gens), QQ)
        self.gens = tuple(self.gens)
        self.base_point = None if base_point is None else tuple(to_fraction(b) for b in base_point)
        if self.base_point is not None and len(self.base_point) != self.d:
            raise TruncationError("base point dimension does not match number of variables")
        self._factors: list = []
        self._factor_index: dict = {}
        # factor index -> generator index when the factor is a bare variable
        self._factor_gen: dict[int, int] = {}
        self._pow_cache: dict = {}
        self._factor_cache: dict = {}
        self.zero = RationalFunction(self, self.ring.zero, ())
        self.one = RationalFunction(self, self.ring.one, ())

    def __repr__(self):
        return f"PolyContext({self.names})"

    # -- constructors -------------------------------------------------------
    def const(self, q) -> "RationalFunction":
        return RationalFunction(self, self.ring(_qq(to_fraction(q))), ())

    def var(self, i: int) -> "RationalFunction":
        return RationalFunction(self, self.gens[i], ())

    def poly(self, p) -> "RationalFunction":
        return RationalFunction(self, self.ring(p), ())

    def from_terms(self, terms) -> "RationalFunction":
        return self.poly(self.poly_from_terms(terms))

    def poly_from_terms(self, terms):
        """``terms``: iterable of (exponent tuple, rational)."""
        p = self.ring.zero
        for exps, c in terms:
            exps = tuple(exps) if self.d else (0,)
            p += self.ring({exps: _qq(to_fraction(c))})
        return p

    def fraction(self, num, den) -> "RationalFunction":
        """num/den for polynomials, reduced against den's factorisation."""
        num = self.ring(num)
        den = self.ring(den)
        if den == 0:
            raise DegenerateDenominator("zero denominator")
        content, facs = self.factorize(den)
        rf = RationalFunction(self, num * self.ring(1 / content), tuple(sorted(facs)))
        rf = rf._reduced()
        self._check_base(rf)
        return rf

    def unreduced(self, num, den) -> "RationalFunction":
        """num/den with no cancellation at all (documents the normalisation policy)."""
        content, facs = self.factorize(self.ring(den))
        return RationalFunction(self, self.ring(num) * self.ring(1 / content), tuple(sorted(facs)))

    # -- factor registry ----------------------------------------------------
    def factorize(self, p):
        """Return (content, ((factor index, power), ...)) with registered monic factors."""
        key = p
        hit = self._factor_cache.get(key)
        if hit is not None:
            return hit
        if p.is_ground:
            out = (p.LC if p != 0 else QQ(0), ())
            self._factor_cache[key] = out
            return out
        content, facs = p.factor_list()
        merged: dict[int, int] = {}
        for f, m in facs:
            lc = f.LC
            f = f.monic()
            content *= lc**m
            merged[self._register(f)] = merged.get(self._register(f), 0) + m
        out = (content, tuple(sorted(merged.items())))
        self._factor_cache[key] = out
        return out

    def _register(self, f) -> int:
        idx = self._factor_index.get(f)
        if idx is None:
            idx = len(self._factors)
            self._factors.append(f)
            self._factor_index[f] = idx
            for k, g in enumerate(self.gens):
                if f == g:
                    self._factor_gen[idx] = k
        return idx

    def factor(self, idx):
        return self._factors[idx]

    def factor_power(self, idx: int, k: int):
        key = (idx, k)
        p = self._pow_cache.get(key)
        if p is None:
            p = self._factors[idx] ** k
            self._pow_cache[key] = p
        return p

    def denominator_poly(self, den) -> object:
        p = self.ring.one
        for idx, k in den:
            p *= self.factor_power(idx, k)
        return p

    def _check_base(self, rf: "RationalFunction"):
        if self.base_point is None:
            return
        for idx, _ in rf.den:
            if self._eval_poly(self._factors[idx], self.base_point) == 0:
                raise DegenerateDenominator(
                    f"denominator factor {self._factors[idx]} vanishes at base point {self.base_point}"
                )

    def _eval_poly(self, p, point) -> Fraction:
        if not self.d:
            return to_fraction(p.LC if p != 0 else 0) if p.is_ground else to_fraction(p(0))
        return to_fraction(p(*[_qq(v) for v in point]))

    def vanishes_at(self, p, point) -> bool:
        return self._eval_poly(self.ring(p), point) == 0


class RationalFunction:
    """num / prod(factor_i ** power_i), exact over QQ.

    Immutable; every arithmetic operation cancels the tracked factors from the
    numerator, so zero tests and equality are exact without a gcd.
    """

    __slots__ = ("ctx", "num", "den")

    def __init__(self, ctx: PolyContext, num, den: tuple):
        self.ctx = ctx
        self.num = num
        self.den = den

    # -- internal -------------------------------------------------------------
    def _reduced(self) -> "RationalFunction":
        num, den = self.num, self.den
        if not den:
            return self
        if num == 0:
            return RationalFunction(self.ctx, num, ())
        ctx = self.ctx
        new_den = []
        for idx, k in den:
            gen = ctx._factor_gen.get(idx)
            if gen is not None:
                low = min(m[gen] for m in num.keys())
                cut = min(low, k)
                if cut:
                    num = num.ring(
                        {m[:gen] + (m[gen] - cut,) + m[gen + 1:]: c for m, c in num.items()}
                    )
                    k -= cut
            else:
                f = ctx._factors[idx]
                while k:
                    q, r = num.div(f)
                    if r != 0:
                        break
                    num = q
                    k -= 1
            if k:
                new_den.append((idx, k))
        return RationalFunction(ctx, num, tuple(new_den))

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        return self.ctx.const(other)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other.num == 0:
            return self
        if self.num == 0:
            return other
        if self.den == other.den:
            return RationalFunction(self.ctx, self.num + other.num, self.den)._reduced()
        a = dict(self.den)
        b = dict(other.den)
        common = {i: max(a.get(i, 0), b.get(i, 0)) for i in set(a) | set(b)}
        ctx = self.ctx
        na = self.num
        for i, k in common.items():
            if k - a.get(i, 0):
                na = na * ctx.factor_power(i, k - a.get(i, 0))
        nb = other.num
        for i, k in common.items():
            if k - b.get(i, 0):
                nb = nb * ctx.factor_power(i, k - b.get(i, 0))
        return RationalFunction(ctx, na + nb, tuple(sorted(common.items())))._reduced()

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(self.ctx, -self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, RationalFunction):
            if other == 1:
                return self
            return RationalFunction(self.ctx, self.num * _qq(to_fraction(other)), self.den if other else ())
        if self.num == 0 or other.num == 0:
            return self.ctx.zero
        if not other.den:
            if not self.den:
                return RationalFunction(self.ctx, self.num * other.num, ())
        d = dict(self.den)
        for i, k in other.den:
            d[i] = d.get(i, 0) + k
        return RationalFunction(self.ctx, self.num * other.num, tuple(sorted(d.items())))._reduced()

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, RationalFunction):
            q = to_fraction(other)
            if q == 0:
                raise DegenerateDenominator("division by zero")
            return RationalFunction(self.ctx, self.num * _qq(1 / q), self.den)
        if other.num == 0:
            raise DegenerateDenominator("division by the zero rational function")
        ctx = self.ctx
        content, facs = ctx.factorize(other.num)
        num = self.num * ctx.denominator_poly(other.den) * ctx.ring(1 / content)
        d = dict(self.den)
        for i, k in facs:
            d[i] = d.get(i, 0) + k
        out = RationalFunction(ctx, num, tuple(sorted(d.items())))._reduced()
        ctx._check_base(out)
        return out

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return (self.ctx.one / self) ** (-k)
        out = self.ctx.one
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)) or not isinstance(other, RationalFunction):
            other = self._coerce(other)
        return (self - other).num == 0

    def __hash__(self):  # values are compared by content, hashing is coarse on purpose
        return hash(self.den)

    def is_zero(self) -> bool:
        return self.num == 0

    def __bool__(self):
        return self.num != 0

    # -- calculus -----------------------------------------------------------
    def diff(self, i: int) -> "RationalFunction":
        ctx = self.ctx
        g = ctx.gens[i]
        out = RationalFunction(ctx, self.num.diff(g), self.den)
        for j, (idx, k) in enumerate(self.den):
            df = ctx._factors[idx].diff(g)
            if df == 0:
                continue
            den = list(self.den)
            den[j] = (idx, k + 1)
            out = out + RationalFunction(ctx, -k * self.num * df, tuple(den))
        return out._reduced()

    def is_constant(self) -> bool:
        return not self.den and self.num.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant")
        return to_fraction(self.num.LC) if self.num != 0 else Fraction(0)

    def evaluate(self, point: Sequence | None = None, normalize: bool = True) -> Fraction:
        ctx = self.ctx
        point = ctx.base_point if point is None else tuple(to_fraction(v) for v in point)
        if point is None and ctx.d:
            raise ValueError("no evaluation point and no base point declared")
        rf = self._reduced() if normalize else self
        den = Fraction(1)
        for idx, k in rf.den:
            den *= ctx._eval_poly(ctx._factors[idx], point) ** k
        if den == 0:
            raise DegenerateDenominator(f"denominator vanishes at {point}")
        return ctx._eval_poly(rf.num, point) / den

    def denominator(self):
        return self.ctx.denominator_poly(self.den)

    def compose(self, target: PolyContext, images: Sequence) -> "RationalFunction":
        """Substitute lambda^i := images[i] (polynomials of ``target``)."""
        imgs = [target.ring(p) for p in images]

        def sub(p):
            out = target.ring.zero
            for m, c in p.items():
                term = target.ring(c)
                for e, im in zip(m, imgs):
                    if e:
                        term *= im**e
                out += term
            return out

        num = sub(self.num) if self.ctx.d else target.ring(self.num.LC if self.num != 0 else 0)
        den = sub(self.denominator()) if self.ctx.d else target.ring.one
        if self.ctx.d and not self.den:
            return RationalFunction(target, num, ())
        return target.fraction(num, den)

    # -- serialisation --------------------------------------------------------
    def to_terms(self):
        """({"num": [[exps, "p/q"], ...], "den": [...]}) with deterministic ordering."""
        rf = self._reduced()

        def terms(p):
            return [[list(m), str(to_fraction(c))] for m, c in sorted(p.items())]

        return {"num": terms(rf.num), "den": terms(rf.denominator())}

    def __repr__(self):
        if not self.den:
            return f"{self.num.as_expr()}"
        return f"({self.num.as_expr()})/({self.denominator().as_expr()})"

    __str__ = __repr__


# ---------------------------------------------------------------------------
# Truncated jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationConfig:
    """Truncation orders plus the polynomial context the jets live in.

    The jet context has variables ``l1..ld, x1..xn, hbar`` and base point
    (λ₀, 0, 0); denominators only ever involve the λ variables.
    """

    d: int
    n: int
    D_x: int
    N_hbar: int
    base_point: tuple = ()
    ctx: PolyContext | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.D_x < 2 * self.N_hbar + 2:
            raise TruncationError(
                f"D_x={self.D_x} too small for N_hbar={self.N_hbar}: need D_x >= 2*N_hbar + 2"
            )
        if len(self.base_point) != self.d:
            raise TruncationError("base point dimension must equal d")
        object.__setattr__(self, "base_point", tuple(to_fraction(b) for b in self.base_point))
        if self.ctx is None:
            names = [f"l{i + 1}" for i in range(self.d)] + [f"x{a + 1}" for a in range(self.n)] + ["hbar"]
            object.__setattr__(
                self, "ctx", PolyContext(names, self.base_point + (Fraction(0),) * (self.n + 1))
            )

    @property
    def x_slice(self):
        return slice(self.d, self.d + self.n)

    @property
    def hbar_index(self):
        return self.d + self.n

    def lift_rf(self, rf: "RationalFunction") -> "RationalFunction":
        """Embed a rational function of λ alone into the jet context."""
        if rf.ctx is self.ctx:
            return rf
        return rf.compose(self.ctx, [self.ctx.gens[i] for i in range(self.d)] or [self.ctx.ring.zero])


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class JetScalar:
    """Rational function of λ times a polynomial in x (degree ≤ watermark) and
    hbar (degree ≤ N_hbar).

    Stored as one RationalFunction over QQ[λ, x, hbar] whose denominator only
    involves λ, so truncation acts on the numerator alone.
    """

    __slots__ = ("cfg", "rf", "watermark")

    def __init__(self, cfg: TruncationConfig, rf: RationalFunction | None = None, watermark: int | None = None):
        self.cfg = cfg
        self.watermark = cfg.D_x if watermark is None else min(watermark, cfg.D_x)
        if rf is None:
            rf = cfg.ctx.zero
        elif not isinstance(rf, RationalFunction):
            rf = cfg.ctx.const(rf)
        self.rf = self._truncated(rf)

    def _truncated(self, rf):
        cfg = self.cfg
        d, n, wm, N = cfg.d, cfg.n, self.watermark, cfg.N_hbar
        num = rf.num
        keep = {m: c for m, c in num.items() if m[d + n] <= N and sum(m[d:d + n]) <= wm}
        if len(keep) != len(num):
            rf = RationalFunction(rf.ctx, num.ring(keep), rf.den if keep else ())._reduced()
        return rf

    # -- constructors ---------------------------------------------------------
    @classmethod
    def const(cls, cfg, q):
        return cls(cfg, cfg.ctx.const(q))

    @classmethod
    def lam(cls, cfg, i):
        return cls(cfg, cfg.ctx.var(i))

    @classmethod
    def x(cls, cfg, a):
        return cls(cfg, cfg.ctx.var(cfg.d + a))

    @classmethod
    def hbar(cls, cfg):
        return cls(cfg, cfg.ctx.var(cfg.hbar_index))

    @classmethod
    def from_rf(cls, cfg, rf, hpow=0):
        rf = cfg.lift_rf(rf)
        if hpow:
            rf = rf * cfg.ctx.var(cfg.hbar_index) ** hpow
        return cls(cfg, rf)

    @classmethod
    def from_terms(cls, cfg, terms, watermark=None):
        """``terms``: {(x exponent tuple, hbar power): rational or λ-RationalFunction}."""
        ctx = cfg.ctx
        out = ctx.zero
        for (xe, k), c in terms.items():
            mono = ctx.ring({(0,) * cfg.d + tuple(xe) + (k,): 1})
            c = cfg.lift_rf(c) if isinstance(c, RationalFunction) else ctx.const(c)
            out = out + c * ctx.poly(mono)
        return cls(cfg, out, watermark)

    def _lift(self, other) -> "JetScalar":
        if isinstance(other, JetScalar):
            return other
        if isinstance(other, RationalFunction):
            return JetScalar.from_rf(self.cfg, other)
        return JetScalar.const(self.cfg, other)

    # -- ring operations ------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        return JetScalar(self.cfg, self.rf + other.rf, min(self.watermark, other.watermark))

    __radd__ = __add__

    def __neg__(self):
        return JetScalar(self.cfg, -self.rf, self.watermark)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        return JetScalar(self.cfg, self.rf * other.rf, min(self.watermark, other.watermark))

    __rmul__ = __mul__

    @property
    def terms(self) -> dict:
        """{(x exponents, hbar power): λ-part numerator coefficient}; denominator in ``self.rf.den``."""
        d, n = self.cfg.d, self.cfg.n
        out: dict = {}
        for m, c in self.rf.num.items():
            key = (tuple(m[d:d + n]), m[d + n])
            out.setdefault(key, {})[tuple(m[:d])] = c
        return out

    def is_lambda_only(self) -> bool:
        d = self.cfg.d
        return all(not any(m[d:]) for m in self.rf.num.keys())

    def constant_term(self) -> RationalFunction:
        d = self.cfg.d
        num = self.rf.num
        keep = {m: c for m, c in num.items() if not any(m[d:])}
        return RationalFunction(self.rf.ctx, num.ring(keep), self.rf.den if keep else ())._reduced()

    def inverse(self, lambda_only: bool = False) -> "JetScalar":
        """Multiplicative inverse; λ-only values divide exactly, others by geometric series."""
        if self.is_lambda_only():
            if self.rf.is_zero():
                raise DegenerateDenominator("division by zero jet")
            return JetScalar(self.cfg, self.cfg.ctx.one / self.rf, self.watermark)
        if lambda_only:
            raise ValueError("lambda-only division requested for a jet with x or hbar dependence")
        c0 = self.constant_term()
        if c0.is_zero():
            raise DegenerateDenominator("jet has no invertible constant term")
        inv0 = JetScalar(self.cfg, self.cfg.ctx.one / c0)
        eps = self * inv0 - 1
        out = JetScalar.const(self.cfg, 1)
        power = JetScalar.const(self.cfg, 1)
        for _ in range(self.cfg.D_x + self.cfg.N_hbar + 1):
            power = power * (-eps)
            if power.is_zero():
                break
            out = out + power
        return JetScalar(self.cfg, (out * inv0).rf, self.watermark)

    def __truediv__(self, other):
        other = self._lift(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def differentiate(self, var) -> "JetScalar":
        """var = ("lambda", i) or ("x", a)."""
        kind, i = var
        if kind in ("lambda", "l"):
            return JetScalar(self.cfg, self.rf.diff(i), self.watermark)
        return JetScalar(self.cfg, self.rf.diff(self.cfg.d + i), self.watermark - 1)

    def truncate(self, watermark: int) -> "JetScalar":
        return JetScalar(self.cfg, self.rf, min(watermark, self.watermark))

    def evaluate_at_base(self, normalize: bool = True) -> dict:
        """Substitute λ = λ₀, x = 0; returns {hbar power: Fraction}."""
        cfg = self.cfg
        d, n = cfg.d, cfg.n
        rf = self.rf._reduced() if normalize else self.rf
        out = {}
        for k in range(cfg.N_hbar + 1):
            keep = {m[: d + n] + (0,): c for m, c in rf.num.items() if not any(m[d:d + n]) and m[d + n] == k}
            if not keep and normalize:
                continue
            part = RationalFunction(rf.ctx, rf.num.ring(keep), rf.den)
            v = part.evaluate(normalize=normalize)
            if v:
                out[k] = v
        return out

    def is_zero(self) -> bool:
        return self.rf.is_zero()

    def __eq__(self, other):
        return (self - self._lift(other)).is_zero()

    __hash__ = None

    def __repr__(self):
        return f"{self.rf}  [wm={self.watermark}]"

"""JSON documents: instances in, twists and reports out.

Rationals are "p/q" strings (plain integers are accepted on input).  Rational
functions are {"num": [[exps, "p/q"], ...], "den": [...]} over the base variables.

Instance document layout::

    {
      "name": "so3-golden",
      "lie_algebra": {"basis": ["e1", "e2", "e3"],
                      "brackets": [[i, j, k, "c"], ...]},      # [e_i, e_j] += c e_k, antisymmetrised
      "splitting": {"h": [2], "m": [0, 1], "t": null, "mprime": null},
      "r_matrix": "from-splitting" | [[[i, j], rf], ...],
      "Z": [[[i, j, k], "c"], ...],
      "truncation": {"N_hbar": 2, "D_x": 8, "base_point": ["1"]},
      "pipeline": "classical" | "quantize" | "compose"
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

from .coeff import PolyContext, RationalFunction, TruncationConfig, to_fraction
from .dynamical_r import DynamicalRMatrix, splitting_r_matrix
from .errors import DegenerateDenominator, InputInvalid, TruncationError
from .lie import EnvTensor, LieAlgebraData, PolyVectorField, jacobi_check

__all__ = [
    "Instance",
    "load_instance",
    "parse_instance",
    "rf_from_json",
    "rf_to_json",
    "twist_to_json",
    "twist_from_json",
    "dumps",
    "instance_hash",
]

PIPELINES = ("classical", "quantize", "compose")


def _rational(value, path) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise InputInvalid(f"expected a rational as int or 'p/q' string, got {value!r}", path)
    try:
        return to_fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise InputInvalid(f"bad rational {value!r}", path) from e


def _index_list(value, n, path):
    if value is None:
        return None
    if not isinstance(value, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in value):
        raise InputInvalid("expected a list of basis indices", path)
    for i in value:
        if not 0 <= i < n:
            raise InputInvalid(f"index {i} out of range 0..{n - 1}", path)
    if len(set(value)) != len(value):
        raise InputInvalid("repeated index", path)
    return tuple(value)


def rf_to_json(rf: RationalFunction) -> dict:
    return rf.to_terms()


def rf_from_json(ctx: PolyContext, obj, path="") -> RationalFunction:
    if isinstance(obj, (int, str)) and not isinstance(obj, bool):
        return ctx.const(_rational(obj, path))
    if not isinstance(obj, dict) or "num" not in obj:
        raise InputInvalid("expected a rational or {'num': ..., 'den': ...}", path)

    def poly(terms, p):
        if not isinstance(terms, list):
            raise InputInvalid("expected a term list", p)
        out = []
        for t, term in enumerate(terms):
            if not (isinstance(term, list) and len(term) == 2 and isinstance(term[0], list)):
                raise InputInvalid("term must be [exponents, coefficient]", f"{p}[{t}]")
            exps = term[0]
            if len(exps) != ctx.d or not all(isinstance(e, int) and e >= 0 for e in exps):
                raise InputInvalid(f"exponent vector must have {ctx.d} non-negative entries", f"{p}[{t}]")
            out.append((tuple(exps), _rational(term[1], f"{p}[{t}][1]")))
        return ctx.poly_from_terms(out)

    num = poly(obj["num"], f"{path}.num")
    den = poly(obj.get("den", [[[0] * ctx.d, "1"]]), f"{path}.den")
    if den == 0:
        raise InputInvalid("zero denominator", f"{path}.den")
    try:
        return ctx.fraction(num, den)
    except DegenerateDenominator as e:
        raise DegenerateDenominator(f"{path}: {e}") from e


@dataclass
class Instance:
    name: str
    L: LieAlgebraData
    R: DynamicalRMatrix
    N_hbar: int
    D_x: int
    base_point: tuple
    pipeline: str
    raw: dict

    @property
    def ctx(self) -> PolyContext:
        return self.R.ctx


def parse_instance(doc: dict) -> Instance:
    """Validate a document and build the algebra and r-matrix.  Raises InputInvalid."""
    if not isinstance(doc, dict):
        raise InputInvalid("document must be a JSON object")
    la = doc.get("lie_algebra")
    if not isinstance(la, dict):
        raise InputInvalid("missing block", "lie_algebra")
    names = la.get("basis")
    if not isinstance(names, list) or not names or not all(isinstance(x, str) for x in names):
        raise InputInvalid("expected a non-empty list of names", "lie_algebra.basis")
    n = len(names)
    brackets = []
    for t, entry in enumerate(la.get("brackets", [])):
        p = f"lie_algebra.brackets[{t}]"
        if not (isinstance(entry, list) and len(entry) == 4):
            raise InputInvalid("entry must be [i, j, k, value]", p)
        i, j, k = entry[:3]
        for q, v in zip("ijk", (i, j, k)):
            if not isinstance(v, int) or not 0 <= v < n:
                raise InputInvalid(f"{q} must be an index in 0..{n - 1}", p)
        brackets.append((i, j, k, _rational(entry[3], f"{p}[3]")))

    sp = doc.get("splitting")
    if not isinstance(sp, dict):
        raise InputInvalid("missing block", "splitting")
    h = _index_list(sp.get("h"), n, "splitting.h")
    m = _index_list(sp.get("m", []), n, "splitting.m")
    if h is None:
        raise InputInvalid("h is required", "splitting.h")
    t = _index_list(sp.get("t"), n, "splitting.t")
    mprime = _index_list(sp.get("mprime"), n, "splitting.mprime")
    if set(h) & set(m) or len(h) + len(m) != n:
        raise InputInvalid("h and m must partition the basis", "splitting")

    L = LieAlgebraData.from_brackets(names, brackets, h=h, m=m, t=t, mprime=mprime)
    ok, where = jacobi_check(L)
    if not ok:
        kind, idx = where
        label = ",".join(names[i] for i in idx[:3])
        raise InputInvalid(f"{kind} fails at ({label})", "lie_algebra.brackets")
    if not L.is_subalgebra(h):
        raise InputInvalid("h is not closed under the bracket", "splitting.h")
    if m and not L.is_reductive(h, m):
        raise InputInvalid("[h, m] is not contained in m", "splitting.m")
    if t is not None:
        if not set(t) <= set(h) or not L.is_subalgebra(t):
            raise InputInvalid("t must be a subalgebra of h", "splitting.t")
        if mprime is None or set(t) | set(mprime) != set(h) or set(t) & set(mprime):
            raise InputInvalid("t and mprime must partition h", "splitting.mprime")
        if not L.is_reductive(t, mprime):
            raise InputInvalid("[t, m'] is not contained in m'", "splitting.mprime")

    tr = doc.get("truncation", {})
    if not isinstance(tr, dict):
        raise InputInvalid("expected an object", "truncation")
    N_hbar = tr.get("N_hbar", 2)
    D_x = tr.get("D_x", 2 * N_hbar + 2 if isinstance(N_hbar, int) else 0)
    for key, v in (("N_hbar", N_hbar), ("D_x", D_x)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise InputInvalid("expected a non-negative integer", f"truncation.{key}")
    bp = tr.get("base_point", ["1"] * len(h))
    if not isinstance(bp, list) or len(bp) != len(h):
        raise InputInvalid(f"expected {len(h)} coordinates", "truncation.base_point")
    base_point = tuple(_rational(v, f"truncation.base_point[{a}]") for a, v in enumerate(bp))
    try:
        TruncationConfig(len(h), n, D_x, N_hbar, base_point)
    except TruncationError as e:
        raise InputInvalid(str(e), "truncation") from e

    ctx = L.lambda_context(base_point)
    Z = PolyVectorField.zero(L, ctx, 3)
    for a, entry in enumerate(doc.get("Z", [])):
        p = f"Z[{a}]"
        if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], list) and len(entry[0]) == 3):
            raise InputInvalid("entry must be [[i, j, k], value]", p)
        _index_list(entry[0], n, f"{p}[0]")
        Z = Z + PolyVectorField(L, ctx, 3, {tuple(entry[0]): _rational(entry[1], f"{p}[1]")})

    rspec = doc.get("r_matrix", "from-splitting")
    if rspec == "from-splitting":
        R = splitting_r_matrix(L, ctx, Z)
    elif isinstance(rspec, list):
        coeffs = {}
        for a, entry in enumerate(rspec):
            p = f"r_matrix[{a}]"
            if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], list) and len(entry[0]) == 2):
                raise InputInvalid("entry must be [[i, j], coefficient]", p)
            key = _index_list(entry[0], n, f"{p}[0]")
            coeffs[key] = rf_from_json(ctx, entry[1], f"{p}[1]")
        R = DynamicalRMatrix(L, ctx, PolyVectorField(L, ctx, 2, coeffs), Z, tuple(h))
    else:
        raise InputInvalid("expected 'from-splitting' or a term list", "r_matrix")

    pipeline = doc.get("pipeline", "classical")
    if pipeline not in PIPELINES:
        raise InputInvalid(f"unknown pipeline {pipeline!r}", "pipeline")
    if pipeline == "compose" and t is None:
        raise InputInvalid("compose needs an inner splitting t ⊕ m'", "splitting.t")
    return Instance(doc.get("name", ""), L, R, N_hbar, D_x, base_point, pipeline, doc)


def load_instance(path) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputInvalid(f"not valid JSON: {e}") from e
    return parse_instance(doc)


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def instance_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


def twist_to_json(J: EnvTensor) -> dict:
    return {
        "basis": list(J.L.names),
        "base_variables": list(J.ctx.names),
        "hbar_order": J.N,
        "scaled": J.scaled,
        "arity": J.arity,
        "terms": J.to_json(),
    }


def twist_from_json(obj: dict, L: LieAlgebraData, ctx: PolyContext) -> EnvTensor:
    if list(L.names) != obj.get("basis") or list(ctx.names) != obj.get("base_variables"):
        raise InputInvalid("twist file does not match the instance basis", "basis")
    terms = {}
    for a, (monos, h, coeff) in enumerate(obj["terms"]):
        key = (tuple(tuple(m) for m in monos), h)
        terms[key] = rf_from_json(ctx, coeff, f"terms[{a}][2]")
    return EnvTensor(L, ctx, obj["arity"], terms, N=obj["hbar_order"], scaled=obj["scaled"])

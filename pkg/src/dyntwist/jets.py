"""Jet model of U×G: coordinates (λ, x) with x exponential coordinates of the
first kind, invariant vector fields, the half-bracket connection, symplectic
correction, curvature and bivector inversion.

Tensor routines that only need a derivation and a field of scalars
(``symplectize``, ``curvature_tensor``, ``covariant_form_derivative``) are
written once and shared by the coordinate model here and the frame model in
:mod:`dyntwist.fedosov`.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import factorial

from .coeff import JetScalar, TruncationConfig
from .errors import DegenerateForm, FrameDegenerate

__all__ = [
    "exp_series_coeffs",
    "VectorFieldJet",
    "invariant_vector_fields",
    "frame_fields",
    "momentum_fields",
    "coordinate_bivector",
    "bivector_schouten",
    "polyvector_from_frame",
    "half_bracket_connection",
    "frame_connection_coeffs",
    "connection_lie_derivative",
    "symplectize",
    "covariant_form_derivative",
    "curvature_tensor",
    "lower_curvature",
    "invert_matrix",
    "invert_bivector",
    "exterior_derivative_2form",
]


def exp_series_coeffs(K: int, side: str) -> list:
    """Taylor coefficients of z/(1−e^{−z}) (left) or z/(e^z−1) (right) up to z^K."""
    # (1 − e^{−z})/z = Σ (−1)^k z^k/(k+1)!,  (e^z − 1)/z = Σ z^k/(k+1)!
    a = [Fraction((-1) ** k if side == "left" else 1, factorial(k + 1)) for k in range(K + 1)]
    inv = [Fraction(0)] * (K + 1)
    inv[0] = 1 / a[0]
    for k in range(1, K + 1):
        inv[k] = -sum(a[j] * inv[k - j] for j in range(1, k + 1)) / a[0]
    return inv


class VectorFieldJet:
    """Components along (∂_{λ^1..λ^d}, ∂_{x^1..x^n})."""

    __slots__ = ("cfg", "comps")

    def __init__(self, cfg: TruncationConfig, comps):
        self.cfg = cfg
        self.comps = list(comps)

    @classmethod
    def zero(cls, cfg):
        return cls(cfg, [JetScalar(cfg) for _ in range(cfg.d + cfg.n)])

    def apply(self, f: JetScalar) -> JetScalar:
        d = self.cfg.d
        out = JetScalar(self.cfg)
        for I, c in enumerate(self.comps):
            if c.is_zero():
                continue
            var = ("lambda", I) if I < d else ("x", I - d)
            out = out + c * f.differentiate(var)
        return out

    def bracket(self, other: "VectorFieldJet") -> "VectorFieldJet":
        return VectorFieldJet(self.cfg, [self.apply(b) - other.apply(a) for a, b in zip(self.comps, other.comps)])

    def __add__(self, other):
        return VectorFieldJet(self.cfg, [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        return VectorFieldJet(self.cfg, [a - b for a, b in zip(self.comps, other.comps)])

    def scale(self, f):
        return VectorFieldJet(self.cfg, [a * f for a in self.comps])

    def is_zero(self):
        return all(c.is_zero() for c in self.comps)

    @property
    def watermark(self):
        return min(c.watermark for c in self.comps)


def invariant_vector_fields(L, cfg: TruncationConfig, side: str = "left", x_offset: int = 0):
    """Jets of the left (→e_a) or right (←e_a) invariant fields in exponential coordinates.

    →e_a = Σ_k c_k (ad_X)^k e_a with X = Σ x^c e_c and c_k the coefficients of
    z/(1−e^{−z}); right fields use z/(e^z−1).  The group coordinates are
    x^{offset+1..offset+n} of the jet context.
    """
    n, d = L.n, cfg.d
    coeffs = exp_series_coeffs(cfg.D_x, side)
    xs = [JetScalar.x(cfg, x_offset + c) for c in range(n)]
    fields = []
    for a in range(n):
        v = [JetScalar.const(cfg, int(b == a)) for b in range(n)]
        acc = [vb * coeffs[0] for vb in v]
        for k in range(1, cfg.D_x + 1):
            nv = [JetScalar(cfg) for _ in range(n)]
            for c in range(n):
                for e in range(n):
                    if v[e].is_zero():
                        continue
                    for b, s in L.c[c][e].items():
                        nv[b] = nv[b] + xs[c] * v[e] * s
            v = nv
            if coeffs[k]:
                acc = [x + y * coeffs[k] for x, y in zip(acc, v)]
        pad = [JetScalar(cfg) for _ in range(cfg.n)]
        pad[x_offset:x_offset + n] = acc
        fields.append(VectorFieldJet(cfg, [JetScalar(cfg) for _ in range(d)] + pad))
    return fields


def frame_fields(L, cfg: TruncationConfig):
    """Frame (∂_{λ^1..λ^d}, →e_1..→e_n)."""
    d = cfg.d
    out = []
    for i in range(d):
        out.append(VectorFieldJet(cfg, [JetScalar.const(cfg, int(j == i)) for j in range(d + L.n)]))
    return out + invariant_vector_fields(L, cfg, "left")


def momentum_fields(L, cfg: TruncationConfig, hidx, left=None):
    """χ_{h_j} = Σ_k c^l_{jk} λ_l ∂_{λ^k} + →h_j."""
    left = left or invariant_vector_fields(L, cfg, "left")
    pos = {g: a for a, g in enumerate(hidx)}
    out = []
    for j, hj in enumerate(hidx):
        comps = list(left[hj].comps)
        for k, hk in enumerate(hidx):
            v = JetScalar(cfg)
            for l, c in L.c[hj][hk].items():
                v = v + JetScalar.lam(cfg, pos[l]) * c
            comps[k] = comps[k] + v
        out.append(VectorFieldJet(cfg, comps))
    return out


def coordinate_bivector(cfg, P, frame):
    """π^{IJ} = Σ P^{ij} b_i^I b_j^J from a frame matrix of λ-rational functions."""
    N = len(frame)
    Pj = [[JetScalar.from_rf(cfg, P[i][j]) if not P[i][j].is_zero() else None for j in range(N)] for i in range(N)]
    pi = [[JetScalar(cfg) for _ in range(N)] for _ in range(N)]
    for I in range(N):
        for J in range(I + 1, N):
            acc = JetScalar(cfg)
            for i in range(N):
                bi = frame[i].comps[I]
                if bi.is_zero():
                    continue
                for j in range(N):
                    if Pj[i][j] is None:
                        continue
                    bj = frame[j].comps[J]
                    if bj.is_zero():
                        continue
                    acc = acc + Pj[i][j] * bi * bj
            pi[I][J] = acc
            pi[J][I] = -acc
    return pi


def _d(cfg, f, I):
    return f.differentiate(("lambda", I) if I < cfg.d else ("x", I - cfg.d))


def bivector_schouten(cfg, pi):
    """[π, π] for a coordinate bivector, as {(I,J,K) ascending: JetScalar}.

    Uses [π,π]^{IJK} = −2 Σ_cyclic Σ_L π^{LI} ∂_L π^{JK}, the normalisation under
    which coordinate Schouten matches the algebraic rule on ∧g (checked in tests
    via left-invariant polyvectors).
    """
    N = len(pi)
    dpi = {}
    for L_ in range(N):
        for J in range(N):
            for K in range(J + 1, N):
                if not pi[J][K].is_zero():
                    dpi[(L_, J, K)] = _d(cfg, pi[J][K], L_)

    def dd(L_, J, K):
        if J < K:
            return dpi.get((L_, J, K))
        v = dpi.get((L_, K, J))
        return None if v is None else -v

    out = {}
    for I, J, K in combinations(range(N), 3):
        acc = JetScalar(cfg)
        for a, b, c in ((I, J, K), (J, K, I), (K, I, J)):
            for L_ in range(N):
                p = pi[L_][a]
                if p.is_zero():
                    continue
                q = dd(L_, b, c)
                if q is not None and not q.is_zero():
                    acc = acc + p * q
        out[(I, J, K)] = acc * (-2)
    return out


def polyvector_from_frame(cfg, coeffs, frame, k):
    """Coordinate components of Σ c_{i..} b_{i1}∧...∧b_{ik} (coeffs on ascending frame tuples)."""
    N = len(frame)
    out = {}
    for I in combinations(range(N), k):
        acc = JetScalar(cfg)
        for key, c in coeffs.items():
            # determinant of the k×k block frame[key][I]
            acc = acc + _block_det(cfg, [[frame[i].comps[J] for J in I] for i in key]) * c
        out[I] = acc
    return out


def _block_det(cfg, M):
    n = len(M)
    if n == 1:
        return M[0][0]
    acc = JetScalar(cfg)
    for j in range(n):
        if M[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        t = M[0][j] * _block_det(cfg, minor)
        acc = acc + t if j % 2 == 0 else acc - t
    return acc


# ---------------------------------------------------------------------------
# Matrices of jets
# ---------------------------------------------------------------------------


def invert_matrix(M, zero, one, is_unit):
    """Gauss-Jordan inverse for square matrices over a ring where ``is_unit``
    identifies invertible pivots (for jets: nonzero constant term)."""
    n = len(M)
    A = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        p = next((r for r in range(c, n) if is_unit(A[r][c])), None)
        if p is None:
            raise DegenerateForm("matrix is singular at the base point")
        A[c], A[p] = A[p], A[c]
        inv = 1 / A[c][c] if not hasattr(A[c][c], "inverse") else A[c][c].inverse()
        A[c] = [x * inv for x in A[c]]
        for r in range(n):
            if r != c and not A[r][c].is_zero():
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[n:] for row in A]


def _jet_unit(x: JetScalar) -> bool:
    c0 = x.constant_term()
    if c0.is_zero():
        return False
    try:
        return c0.evaluate() != 0
    except Exception:
        return False


def invert_bivector(cfg, pi):
    """ω with π·ω = identity (π^{IJ} ω_{JK} = δ^I_K)."""
    N = len(pi)
    try:
        return invert_matrix(pi, JetScalar(cfg), JetScalar.const(cfg, 1), _jet_unit)
    except DegenerateForm as e:
        raise DegenerateForm(f"bivector not invertible at base point ({N}×{N})") from e


def exterior_derivative_2form(cfg, w):
    out = {}
    N = len(w)
    for I, J, K in combinations(range(N), 3):
        out[(I, J, K)] = _d(cfg, w[J][K], I) + _d(cfg, w[K][I], J) + _d(cfg, w[I][J], K)
    return out


# ---------------------------------------------------------------------------
# Connections
# ---------------------------------------------------------------------------


def frame_connection_coeffs(L, d):
    """Half-bracket connection in the frame: ∇_{b_i} b_j = Γ^k_{ij} b_k with Γ^k_{ij} = ½ C^k_{ij}.

    Returns (Gamma[k][i][j] Fractions, C[k][i][j] frame structure constants).
    """
    n = L.n
    N = d + n
    C = [[[Fraction(0)] * N for _ in range(N)] for _ in range(N)]
    for a in range(n):
        for b in range(n):
            for c, v in L.c[a][b].items():
                C[d + c][d + a][d + b] = v
    G = [[[C[k][i][j] / 2 for j in range(N)] for i in range(N)] for k in range(N)]
    return G, C


def half_bracket_connection(L, cfg, frame=None):
    """Coordinate Christoffels Γ^K_{IJ} of ∇_b X = ½[b, X] built from the frame.

    Γ^K_{IJ} = −½ A_I^i A_J^j (b_i(b_j^K) + b_j(b_i^K)), A the inverse frame matrix.
    """
    frame = frame or frame_fields(L, cfg)
    N = len(frame)
    B = [[frame[i].comps[I] for I in range(N)] for i in range(N)]  # B[i][I] = b_i^I
    try:
        Binv = invert_matrix(B, JetScalar(cfg), JetScalar.const(cfg, 1), _jet_unit)  # Binv[I][i] = A_I^i
    except DegenerateForm as e:
        raise FrameDegenerate("frame does not span at the base point") from e
    # sym[i][j][K] = b_i(b_j^K) + b_j(b_i^K)
    sym = [[[None] * N for _ in range(N)] for _ in range(N)]
    for i in range(N):
        for j in range(i, N):
            for K in range(N):
                v = frame[i].apply(frame[j].comps[K]) + frame[j].apply(frame[i].comps[K])
                sym[i][j][K] = v
                sym[j][i][K] = v
    G = [[[None] * N for _ in range(N)] for _ in range(N)]
    for I in range(N):
        for J in range(I, N):
            for K in range(N):
                acc = JetScalar(cfg)
                for i in range(N):
                    a = Binv[I][i]
                    if a.is_zero():
                        continue
                    for j in range(N):
                        b = Binv[J][j]
                        if b.is_zero() or sym[i][j][K].is_zero():
                            continue
                        acc = acc + a * b * sym[i][j][K]
                acc = acc * Fraction(-1, 2)
                G[K][I][J] = acc
                G[K][J][I] = acc
    return G


def connection_lie_derivative(cfg, G, X: VectorFieldJet):
    """(L_X Γ)^K_{IJ} = X(Γ^K_{IJ}) − Γ^L_{IJ}∂_L X^K + Γ^K_{LJ}∂_I X^L + Γ^K_{IL}∂_J X^L + ∂_I∂_J X^K."""
    N = len(G)
    dX = [[_d(cfg, X.comps[K], I) for K in range(N)] for I in range(N)]
    out = [[[None] * N for _ in range(N)] for _ in range(N)]
    for K in range(N):
        for I in range(N):
            for J in range(I, N):
                acc = X.apply(G[K][I][J]) + _d(cfg, dX[J][K], I)
                for L_ in range(N):
                    acc = acc - G[L_][I][J] * dX[L_][K] + G[K][L_][J] * dX[I][L_] + G[K][I][L_] * dX[J][L_]
                out[K][I][J] = acc
                out[K][J][I] = acc
    return out


def covariant_form_derivative(G, w, deriv):
    """N_{ijk} = (∇_i ω)_{jk} = b_i(ω_{jk}) − Γ^m_{ij} ω_{mk} − Γ^m_{ik} ω_{jm}.

    ``G[m][i][j]`` with ∇_{b_i} b_j = Γ^m_{ij} b_m; ``deriv(i, f)`` is b_i(f).
    """
    N = len(w)
    out = [[[None] * N for _ in range(N)] for _ in range(N)]
    for i in range(N):
        for j in range(N):
            for k in range(N):
                acc = deriv(i, w[j][k])
                for m in range(N):
                    if G[m][i][j]:
                        acc = acc - w[m][k] * G[m][i][j]
                    if G[m][i][k]:
                        acc = acc - w[j][m] * G[m][i][k]
                out[i][j][k] = acc
    return out


def symplectize(G, w, winv, deriv):
    """Γ' = Γ + S with ω_{mk} S^m_{ij} = ⅓(N_{ijk} + N_{jik}).

    ``winv`` is π with π·ω = I.  S is symmetric in (i, j), so torsion is unchanged.
    """
    N = len(w)
    Nt = covariant_form_derivative(G, w, deriv)
    out = [[[None] * N for _ in range(N)] for _ in range(N)]
    third = Fraction(1, 3)
    # Σ_m ω_{mk} S^m = T_k  ⇒  S^m = Σ_k T_k π^{km}·(−1)·(−1) with π·ω = I and ω antisymmetric
    for i in range(N):
        for j in range(N):
            T = [(Nt[i][j][k] + Nt[j][i][k]) * third for k in range(N)]
            for m in range(N):
                acc = G[m][i][j]
                for k in range(N):
                    if winv[k][m]:
                        acc = acc + T[k] * winv[k][m]
                out[m][i][j] = acc
    return out


def curvature_tensor(G, C, deriv):
    """R^m_{jkl}: ∇_k∇_l b_j − ∇_l∇_k b_j − ∇_{[b_k,b_l]} b_j in a frame with [b_k,b_l] = C^p_{kl} b_p.

    Returned as R[m][j][k][l].
    """
    N = len(G)
    R = [[[[None] * N for _ in range(N)] for _ in range(N)] for _ in range(N)]
    for m in range(N):
        for j in range(N):
            for k in range(N):
                for l in range(N):
                    if l < k:
                        R[m][j][k][l] = -R[m][j][l][k]
                        continue
                    acc = deriv(k, G[m][l][j]) - deriv(l, G[m][k][j])
                    for p in range(N):
                        acc = acc + G[p][l][j] * G[m][k][p] - G[p][k][j] * G[m][l][p]
                        if C[p][k][l]:
                            acc = acc - G[m][p][j] * C[p][k][l]
                    R[m][j][k][l] = acc
    return R


def lower_curvature(R, w):
    """R_{ijkl} = ω_{im} R^m_{jkl}."""
    N = len(w)
    out = [[[[None] * N for _ in range(N)] for _ in range(N)] for _ in range(N)]
    for i in range(N):
        for j in range(N):
            for k in range(N):
                for l in range(N):
                    acc = R[0][j][k][l] * w[i][0]
                    for m in range(1, N):
                        acc = acc + R[m][j][k][l] * w[i][m]
                    out[i][j][k][l] = acc
    return out

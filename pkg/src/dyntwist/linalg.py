"""Small exact linear algebra over Fraction or RationalFunction entries."""

from __future__ import annotations

from fractions import Fraction


def _is_zero(x) -> bool:
    return x.is_zero() if hasattr(x, "is_zero") else x == 0


def rref(rows, ncols=None):
    """Reduced row echelon form; returns (rows, pivot columns). Entries must form a field."""
    rows = [list(r) for r in rows]
    if not rows:
        return rows, []
    ncols = len(rows[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if not _is_zero(rows[i][c])), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not _is_zero(rows[i][c]):
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def nullspace(rows, ncols):
    """Basis of {v : rows · v = 0} over Fraction."""
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    red, piv = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(piv):
            v[p] = -red[i][f]
        basis.append(v)
    return basis


def solve(rows, rhs):
    """One solution of rows · v = rhs, or None when inconsistent."""
    ncols = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    red, piv = rref(aug, ncols + 1)
    if ncols in piv:
        return None
    v = [Fraction(0)] * ncols
    for i, p in enumerate(piv):
        v[p] = red[i][ncols]
    return v


def det_poly(M):
    """Determinant by cofactor expansion of a small matrix of ring elements."""
    n = len(M)
    if n == 0:
        return 1
    if n == 1:
        return M[0][0]
    total = 0
    for j in range(n):
        if M[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * det_poly(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def inverse_poly_matrix(ctx, M):
    """Inverse of a square matrix of polynomials as RationalFunctions (adjugate / det)."""
    n = len(M)
    det = ctx.ring(det_poly(M))
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:i] + row[i + 1:] for k, row in enumerate(M) if k != j]
            cof = ctx.ring(det_poly(minor)) if minor else ctx.ring.one
            if (i + j) % 2:
                cof = -cof
            out[i][j] = ctx.fraction(cof, det)
    return out, det


def matmul(A, B):
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), 0 * A[0][0]) for j in range(len(B[0]))] for i in range(len(A))]

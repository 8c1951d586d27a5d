"""Strain algebra of the cubic-to-tetragonal transformation.

Variant strains, the six twin normals, rank-one compatibility testing and the
three displacement gradients used by the branching construction.  Matrices are
plain ``(3, 3)`` numpy arrays and vectors ``(3,)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

_VARIANT_DIAGONALS = {
    0: (0.0, 0.0, 0.0),
    1: (-2.0, 1.0, 1.0),
    2: (1.0, -2.0, 1.0),
    3: (1.0, 1.0, -2.0),
}

#: Order in which the twin normals are tabulated (and scanned for habit normals).
TWIN_TABLE_ORDER = ((1, 2), (3, 1), (2, 3), (2, 1), (1, 3), (3, 2))

_TWIN_DIRECTIONS = {
    (1, 2): (1.0, 1.0, 0.0),
    (3, 1): (1.0, 0.0, 1.0),
    (2, 3): (0.0, 1.0, 1.0),
    (2, 1): (-1.0, 1.0, 0.0),
    (1, 3): (1.0, 0.0, -1.0),
    (3, 2): (0.0, -1.0, 1.0),
}


def sym(A):
    """Symmetric part ``(A + A^T) / 2`` (works on stacks of matrices)."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def frobenius(A) -> float:
    return float(np.sqrt(np.sum(np.asarray(A, dtype=float) ** 2)))


def sym_tensor_product(a, b):
    """``a ⊙ b = (a⊗b + b⊗a) / 2``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.5 * (np.outer(a, b) + np.outer(b, a))


def permutation_sign(i: int, j: int, k: int) -> int:
    """Signature of the permutation ``(i, j, k)`` of ``(1, 2, 3)``."""
    if sorted((i, j, k)) != [1, 2, 3]:
        raise ValueError(f"({i}, {j}, {k}) is not a permutation of (1, 2, 3)")
    return 1 if (i, j, k) in ((1, 2, 3), (2, 3, 1), (3, 1, 2)) else -1


def third_index(i: int, j: int) -> int:
    return 6 - i - j


def _check_pair(i: int, j: int) -> None:
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError(f"variant indices must be in {{1, 2, 3}}, got ({i}, {j})")
    if i == j:
        raise ValueError(f"variant indices must be distinct, got ({i}, {j})")


def variant_strain(i: int):
    """Stress-free strain of variant ``i`` (0 is austenite)."""
    if i not in _VARIANT_DIAGONALS:
        raise ValueError(f"variant index must be in 0..3, got {i!r}")
    return np.diag(_VARIANT_DIAGONALS[i])


def twin_normal(i: int, j: int):
    """Unit normal ``b_ij`` of the twin table."""
    _check_pair(i, j)
    return np.asarray(_TWIN_DIRECTIONS[(i, j)]) * _INV_SQRT2


@dataclass(frozen=True, eq=False)
class TwinSystem:
    i: int
    j: int
    b_ij: np.ndarray
    b_ji: np.ndarray
    sign: int

    def residual(self) -> float:
        lhs = variant_strain(self.i) - variant_strain(self.j)
        rhs = 6.0 * self.sign * sym_tensor_product(self.b_ij, self.b_ji)
        return frobenius(lhs - rhs)


def twin_system(i: int, j: int) -> TwinSystem:
    _check_pair(i, j)
    k = third_index(i, j)
    return TwinSystem(i, j, twin_normal(i, j), twin_normal(j, i), permutation_sign(i, j, k))


def twin_systems():
    """All six ordered twin systems, in table order."""
    return [twin_system(i, j) for i, j in TWIN_TABLE_ORDER]


def habit_relation_residual(i: int, j: int) -> float:
    """``|e(i)/3 + 2 e(j)/3 - 2 sgn(ijk) b_jk ⊙ b_kj|``."""
    _check_pair(i, j)
    k = third_index(i, j)
    mix = variant_strain(i) / 3.0 + 2.0 * variant_strain(j) / 3.0
    rhs = 2.0 * permutation_sign(i, j, k) * sym_tensor_product(twin_normal(j, k), twin_normal(k, j))
    return frobenius(mix - rhs)


@dataclass(frozen=True, eq=False)
class CompatibilityResult:
    compatible: bool
    a: np.ndarray | None
    b: np.ndarray | None
    residual: float
    eigenvalues: np.ndarray


def compatibility_check(A, B, tol: float = 1e-9) -> CompatibilityResult:
    """Decide whether ``A - B = a ⊙ b`` for some vectors ``a``, ``b``.

    The tolerance is applied to the eigenvalues of ``S = A - B`` relative to
    ``max(|S|, 1)``.  A difference is rank-one compatible iff its middle
    eigenvalue vanishes and the outer two have opposite (weak) signs.  The
    returned pair is normalised so that the first nonzero component of ``b``
    is positive.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    for name, M in (("A", A), ("B", B)):
        if frobenius(M - M.T) > tol * max(frobenius(M), 1.0):
            raise ValueError(f"{name} is not symmetric")
    S = sym(A - B)
    scale = max(frobenius(S), 1.0)
    eps = tol * scale
    lam, vecs = np.linalg.eigh(S)
    l1, l2, l3 = lam
    if not (abs(l2) <= eps and l1 <= eps and l3 >= -eps):
        return CompatibilityResult(False, None, None, abs(l2), lam)

    p = np.sqrt(max(l3, 0.0)) * vecs[:, 2]
    q = np.sqrt(max(-l1, 0.0)) * vecs[:, 0]
    a = p + q
    b = p - q
    nz = np.flatnonzero(np.abs(b) > eps)
    if nz.size and b[nz[0]] < 0:
        a, b = -a, -b
    residual = frobenius(S - sym_tensor_product(a, b))
    return CompatibilityResult(True, a, b, residual, lam)


def recovered_normals_match(result: CompatibilityResult, i: int, j: int, tol: float = 1e-9) -> bool:
    """Whether the recovered directions are ``{b_ij, b_ji}`` up to sign and order."""
    if not result.compatible:
        return False
    got = [v / np.linalg.norm(v) for v in (result.a, result.b)]
    want = [twin_normal(i, j), twin_normal(j, i)]

    def close(u, v):
        return min(np.linalg.norm(u - v), np.linalg.norm(u + v)) < tol
    return ((close(got[0], want[0]) and close(got[1], want[1]))
            or (close(got[0], want[1]) and close(got[1], want[0])))


@dataclass(frozen=True, eq=False)
class ConstructionGradients:
    D1: np.ndarray
    D2: np.ndarray
    DM: np.ndarray

    def residuals(self) -> dict[str, float]:
        b12, b21 = twin_normal(1, 2), twin_normal(2, 1)
        b23, b32 = twin_normal(2, 3), twin_normal(3, 2)
        return {
            "sym_D1": frobenius(sym(self.D1) - variant_strain(1)),
            "sym_D2": frobenius(sym(self.D2) - variant_strain(2)),
            "D1_minus_D2": frobenius(self.D1 - self.D2 - 6.0 * np.outer(b12, b21)),
            "DM_mixture": frobenius(self.DM - (self.D1 / 3.0 + 2.0 * self.D2 / 3.0)),
            "DM_rank_one": frobenius(self.DM - 2.0 * np.outer(b23, b32)),
        }


def construction_gradients() -> ConstructionGradients:
    D1 = np.array([[-2.0, 2.0, 0.0], [-2.0, 1.0, 1.0], [0.0, -1.0, 1.0]])
    D2 = np.array([[1.0, -1.0, 0.0], [1.0, -2.0, 1.0], [0.0, -1.0, 1.0]])
    DM = np.array([[0.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, -1.0, 1.0]])
    return ConstructionGradients(D1, D2, DM)


def algebra_report() -> dict:
    """Residuals of every identity of the algebra, keyed by a short label."""
    out = {}
    for ts in twin_systems():
        out[f"twin_{ts.i}{ts.j}"] = ts.residual()
    for i, j in TWIN_TABLE_ORDER:
        out[f"habit_{i}{j}"] = habit_relation_residual(i, j)
    for key, val in construction_gradients().residuals().items():
        out[f"gradients_{key}"] = val
    return out

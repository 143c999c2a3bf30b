"""Canonical conic program handed to solver adapters.

A program over ``x in R^n`` is

    minimize    c @ x + c0
    subject to  A_eq @ x == b_eq
                G @ x <= h
                sum_{r in rows(i)} (F_r @ x + f_r)^2 <= g_i @ x + h_i   (quadratic)
                || E_i @ x + e_i ||_2 <= t_i @ x + k_i                    (second-order cones)

Quadratic rows are grouped by an ``owner`` index; cones of equal dimension
are stored as one block whose ``E`` has ``dim`` consecutive rows per cone.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class AffineExpr:
    """A stack of affine functions ``A @ x + b`` of the program variables."""

    __slots__ = ("A", "b")
    __array_ufunc__ = None

    def __init__(self, A, b=None):
        self.A = sp.csr_matrix(A)
        self.b = np.zeros(self.A.shape[0]) if b is None else np.asarray(b, dtype=float).reshape(-1)
        if self.b.size != self.A.shape[0]:
            raise ValueError("constant term does not match the number of rows")

    @property
    def size(self):
        return self.A.shape[0]

    def _coerce(self, other):
        if isinstance(other, AffineExpr):
            return other
        b = np.broadcast_to(np.asarray(other, dtype=float), (self.size,))
        return AffineExpr(sp.csr_matrix(self.A.shape), b)

    def __add__(self, other):
        other = self._coerce(other)
        return AffineExpr(self.A + other.A, self.b + other.b)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return AffineExpr(self.A - other.A, self.b - other.b)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return AffineExpr(-self.A, -self.b)

    def __mul__(self, scalar):
        scalar = np.asarray(scalar, dtype=float)
        if scalar.ndim == 0:
            return AffineExpr(self.A * float(scalar), self.b * float(scalar))
        return AffineExpr(sp.diags(scalar.reshape(-1)) @ self.A, self.b * scalar.reshape(-1))

    __rmul__ = __mul__

    def __rmatmul__(self, matrix):
        if sp.issparse(matrix):
            m = sp.csr_matrix(matrix)
        else:
            m = np.atleast_2d(np.asarray(matrix, dtype=float))
            m = sp.csr_matrix(m)
        return AffineExpr(m @ self.A, m @ self.b)

    def __getitem__(self, rows):
        rows = np.arange(self.size)[rows]
        return AffineExpr(self.A[np.atleast_1d(rows)], self.b[np.atleast_1d(rows)])

    def sum(self):
        return AffineExpr(sp.csr_matrix(self.A.sum(axis=0)), [self.b.sum()])

    def value(self, x):
        return self.A @ x + self.b

    @staticmethod
    def vstack(exprs):
        exprs = list(exprs)
        return AffineExpr(sp.vstack([e.A for e in exprs], format="csr"), np.concatenate([e.b for e in exprs]))


@dataclass
class ConeBlock:
    dim: int
    E: sp.csr_matrix
    e: np.ndarray
    t_A: sp.csr_matrix
    t_b: np.ndarray
    label: str = ""

    @property
    def count(self):
        return self.t_A.shape[0]


@dataclass
class QuadraticBlock:
    F: sp.csr_matrix
    f: np.ndarray
    owner: np.ndarray
    g: sp.csr_matrix
    h: np.ndarray
    label: str = ""

    @property
    def count(self):
        return self.g.shape[0]

    def aggregator(self):
        k = self.F.shape[0]
        return sp.csr_matrix((np.ones(k), (self.owner, np.arange(k))), shape=(self.count, k))


@dataclass
class ConicProgram:
    n: int
    c: np.ndarray
    c0: float
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    quadratic: list
    cones: list
    variables: dict
    labels: dict = field(default_factory=dict)

    def counts(self):
        return {
            "variables": self.n,
            "equalities": self.A_eq.shape[0],
            "inequalities": self.G.shape[0],
            "quadratic": sum(q.count for q in self.quadratic),
            "cones": sum(c.count for c in self.cones),
        }

    def extract(self, x, name):
        start, shape = self.variables[name]
        size = int(np.prod(shape))
        return np.asarray(x[start:start + size]).reshape(shape)

    def objective(self, x):
        return float(self.c @ x + self.c0)

    def residuals(self, x):
        """Largest violation of each constraint class at ``x``, scaled by ``1 + |rhs|``."""
        out = {}
        if self.A_eq.shape[0]:
            r = np.abs(self.A_eq @ x - self.b_eq) / (1.0 + np.abs(self.b_eq))
            out["equalities"] = float(r.max())
        if self.G.shape[0]:
            r = (self.G @ x - self.h) / (1.0 + np.abs(self.h))
            out["inequalities"] = float(max(r.max(), 0.0))
        worst = 0.0
        for q in self.quadratic:
            z = q.F @ x + q.f
            lhs = q.aggregator() @ (z * z)
            rhs = q.g @ x + q.h
            worst = max(worst, float(np.max((lhs - rhs) / (1.0 + np.abs(rhs)), initial=0.0)))
        out["quadratic"] = worst
        worst = 0.0
        for c in self.cones:
            z = (c.E @ x + c.e).reshape(c.count, c.dim)
            lhs = np.linalg.norm(z, axis=1)
            rhs = c.t_A @ x + c.t_b
            worst = max(worst, float(np.max((lhs - rhs) / (1.0 + np.abs(rhs)), initial=0.0)))
        out["cones"] = worst
        return out

    def max_residual(self, x):
        return max(self.residuals(x).values(), default=0.0)


class ProgramBuilder:
    """Allocates variable blocks and collects constraints into a ``ConicProgram``."""

    def __init__(self):
        self._vars = {}
        self._n = 0
        self._frozen = False
        self._eq, self._ineq, self._quad, self._cones = [], [], [], []
        self._labels = {"equalities": {}, "inequalities": {}, "quadratic": {}, "cones": {}}
        self._objective = None

    def variable(self, name, shape):
        if self._frozen:
            raise RuntimeError("all variables must be declared before building expressions")
        shape = tuple(np.atleast_1d(shape).astype(int))
        self._vars[name] = (self._n, shape)
        self._n += int(np.prod(shape))

    def var(self, name, index=None):
        """Expression for a variable block, flattened row-major, optionally indexed."""
        self._frozen = True
        start, shape = self._vars[name]
        flat = np.arange(start, start + int(np.prod(shape))).reshape(shape)
        cols = flat if index is None else flat[index]
        cols = np.atleast_1d(cols).reshape(-1)
        a = sp.csr_matrix((np.ones(cols.size), (np.arange(cols.size), cols)), shape=(cols.size, self._n))
        return AffineExpr(a)

    def constant(self, values):
        self._frozen = True
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return AffineExpr(sp.csr_matrix((values.size, self._n)), values)

    def _record(self, kind, label, store, count):
        start = sum(
            (blk.count if hasattr(blk, "count") else blk.size) for blk in store
        )
        self._labels[kind].setdefault(label, []).append((start, start + count))

    def equal(self, expr, label=""):
        """Add ``expr == 0``."""
        self._record("equalities", label, self._eq, expr.size)
        self._eq.append(expr)

    def less_equal(self, expr, label=""):
        """Add ``expr <= 0``."""
        self._record("inequalities", label, self._ineq, expr.size)
        self._ineq.append(expr)

    def quadratic(self, rows, bound, owner=None, label=""):
        """Add ``sum of rows**2 (grouped by owner) <= bound``.

        Without ``owner`` every row is its own constraint (elementwise squares).
        """
        owner = np.arange(rows.size) if owner is None else np.asarray(owner, dtype=int)
        blk = QuadraticBlock(rows.A, rows.b, owner, bound.A, bound.b, label)
        self._record("quadratic", label, self._quad, blk.count)
        self._quad.append(blk)

    def cone(self, parts, bound, label=""):
        """Add ``||(parts[0]_i, parts[1]_i, ...)|| <= bound_i`` for every row ``i``."""
        m, dim = bound.size, len(parts)
        interleave = AffineExpr.vstack(parts)
        order = np.arange(m * dim).reshape(dim, m).T.reshape(-1)
        e = interleave[order]
        blk = ConeBlock(dim, e.A, e.b, bound.A, bound.b, label)
        self._record("cones", label, self._cones, blk.count)
        self._cones.append(blk)

    def minimize(self, expr):
        if expr.size != 1:
            raise ValueError("objective must be scalar")
        self._objective = expr

    def build(self):
        n = self._n
        empty = AffineExpr(sp.csr_matrix((0, n)))
        eq = AffineExpr.vstack(self._eq) if self._eq else empty
        ineq = AffineExpr.vstack(self._ineq) if self._ineq else empty
        obj = self._objective or AffineExpr(sp.csr_matrix((1, n)))
        return ConicProgram(
            n=n,
            c=np.asarray(obj.A.todense()).reshape(-1),
            c0=float(obj.b[0]),
            A_eq=eq.A,
            b_eq=-eq.b,
            G=ineq.A,
            h=-ineq.b,
            quadratic=self._quad,
            cones=self._cones,
            variables=dict(self._vars),
            labels=self._labels,
        )

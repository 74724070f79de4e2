"""Affine matrix-inequality systems and the semidefinite solver boundary.

A problem is a list of structured variable blocks (symmetric, skew or full
matrices) packed into one scalar decision vector ``y`` and a list of
constraints ``F0 + sum_i y_i F_i  >= margin*I`` (or ``<= -margin*I``).
Assemblers build the synchronization conditions on top of :class:`AffineExpr`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyValueList, FrozenGainViolatesNormBound, SolverFailure
from .linalg import Plant, matrix_2norm

TRACE_CAP = 1e6
# box on every scalar decision variable inside the phase-one problem; keeps
# the optimum attained when multipliers would otherwise run off to infinity
VAR_BOUND = 1e5
SLACK_FLOOR = -1.0
VERIFY_RTOL = 1e-9

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
SOLVER_FAILURE = "SolverFailure"


def default_margin(A) -> float:
    return 1e-6 * (1.0 + matrix_2norm(A))


# ---------------------------------------------------------------------------
# variables and affine expressions


@dataclass(frozen=True)
class VariableBlock:
    name: str
    kind: str  # "sym", "skew" or "full"
    shape: tuple
    offset: int

    @property
    def size(self) -> int:
        r, c = self.shape
        if self.kind == "sym":
            return r * (r + 1) // 2
        if self.kind == "skew":
            return r * (r - 1) // 2
        return r * c

    def basis(self) -> np.ndarray:
        """Coefficient matrices, one per scalar of this block."""
        r, c = self.shape
        out = np.zeros((self.size, r, c))
        if self.kind == "full":
            out.reshape(self.size, r * c)[np.arange(self.size), np.arange(self.size)] = 1.0
            return out
        idx = 0
        for i in range(r):
            for j in range(i if self.kind == "sym" else i + 1, r):
                out[idx, i, j] = 1.0
                out[idx, j, i] = 1.0 if self.kind == "sym" else -1.0
                idx += 1
        return out

    def unpack(self, y) -> np.ndarray:
        vals = np.asarray(y)[self.offset:self.offset + self.size]
        return np.tensordot(vals, self.basis(), axes=1) if self.size else np.zeros(self.shape)

    def pack(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        if M.shape != tuple(self.shape):
            raise DimensionMismatch(f"block {self.name} expects {self.shape}, got {M.shape}")
        r, c = self.shape
        if self.kind == "full":
            return M.reshape(-1).copy()
        iu = np.triu_indices(r, 0 if self.kind == "sym" else 1)
        return M[iu].copy()


class AffineExpr:
    """Matrix-valued affine function ``const + sum_i y_i coef[i]``."""

    __slots__ = ("const", "coef")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, const, coef):
        self.const = np.asarray(const, dtype=float)
        self.coef = np.asarray(coef, dtype=float)

    @property
    def shape(self):
        return self.const.shape

    @property
    def nvar(self):
        return self.coef.shape[0]

    @classmethod
    def constant(cls, M, nvar):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(M, np.zeros((nvar,) + M.shape))

    def _lift(self, other):
        if isinstance(other, AffineExpr):
            return other
        return AffineExpr.constant(other, self.nvar)

    def __add__(self, other):
        other = self._lift(other)
        return AffineExpr(self.const + other.const, self.coef + other.coef)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return AffineExpr(self.const - other.const, self.coef - other.coef)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return AffineExpr(-self.const, -self.coef)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return AffineExpr(scalar * self.const, scalar * self.coef)

    __rmul__ = __mul__

    def __matmul__(self, M):
        if isinstance(M, AffineExpr):
            raise TypeError("product of two affine expressions is not affine")
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return AffineExpr(self.const @ M, self.coef @ M)

    def __rmatmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return AffineExpr(M @ self.const, np.einsum("ij,vjk->vik", M, self.coef))

    @property
    def T(self):
        return AffineExpr(self.const.T, self.coef.transpose(0, 2, 1))

    def kron_left(self, C):
        """``C (x) self`` for a constant matrix ``C``."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        a, b = C.shape
        r, c = self.shape
        const = np.kron(C, self.const)
        coef = np.einsum("ab,vij->vaibj", C, self.coef).reshape(self.nvar, a * r, b * c)
        return AffineExpr(const, coef)

    def value(self, y) -> np.ndarray:
        return self.const + np.tensordot(np.asarray(y, dtype=float), self.coef, axes=1)


def he(expr: AffineExpr) -> AffineExpr:
    """``M + M^T``; exactly symmetric in floating point."""
    return expr + expr.T


def bmat(rows, nvar) -> AffineExpr:
    """Block matrix from nested lists of expressions, arrays, or ``None`` (zero)."""
    heights = []
    widths = [None] * len(rows[0])
    for row in rows:
        h = None
        for j, item in enumerate(row):
            if item is None:
                continue
            shape = item.shape if isinstance(item, AffineExpr) else np.atleast_2d(item).shape
            h = shape[0]
            widths[j] = shape[1]
        heights.append(h)
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise DimensionMismatch("every block row and column needs one sized entry")
    const_rows, coef_rows = [], []
    for row, h in zip(rows, heights):
        crow, frow = [], []
        for item, w in zip(row, widths):
            if item is None:
                item = AffineExpr.constant(np.zeros((h, w)), nvar)
            elif not isinstance(item, AffineExpr):
                item = AffineExpr.constant(item, nvar)
            if item.shape != (h, w):
                raise DimensionMismatch(f"block has shape {item.shape}, expected {(h, w)}")
            crow.append(item.const)
            frow.append(item.coef)
        const_rows.append(np.concatenate(crow, axis=1))
        coef_rows.append(np.concatenate(frow, axis=2))
    return AffineExpr(np.concatenate(const_rows, axis=0), np.concatenate(coef_rows, axis=1))


# ---------------------------------------------------------------------------
# problems


@dataclass
class AffineConstraint:
    name: str
    F0: np.ndarray
    indices: np.ndarray
    coefs: np.ndarray
    sense: str  # ">=" : value >= margin*I ; "<=" : value <= -margin*I

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    @property
    def coefficients(self) -> dict:
        return {int(i): F for i, F in zip(self.indices, self.coefs)}

    def value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.F0 + np.tensordot(y[self.indices], self.coefs, axes=1)

    def oriented(self, y) -> np.ndarray:
        v = self.value(y)
        return v if self.sense == ">=" else -v


@dataclass
class SdpProblem:
    blocks: list
    constraints: list
    margin: float
    meta: dict = field(default_factory=dict)

    @property
    def nvar(self) -> int:
        return sum(b.size for b in self.blocks)

    def block(self, name) -> VariableBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def unpack(self, y) -> dict:
        return {b.name: b.unpack(y) for b in self.blocks}

    def pack(self, values: dict) -> np.ndarray:
        y = np.zeros(self.nvar)
        for b in self.blocks:
            y[b.offset:b.offset + b.size] = b.pack(values[b.name])
        return y

    def to_json(self) -> str:
        return json.dumps({
            "margin": self.margin,
            "nvar": self.nvar,
            "meta": self.meta,
            "blocks": [
                {"name": b.name, "kind": b.kind, "shape": list(b.shape), "offset": b.offset, "size": b.size}
                for b in self.blocks
            ],
            "constraints": [
                {
                    "name": c.name,
                    "sense": c.sense,
                    "size": c.size,
                    "F0": c.F0.tolist(),
                    "coefficients": {str(int(i)): F.tolist() for i, F in zip(c.indices, c.coefs)},
                }
                for c in self.constraints
            ],
        })


class ProblemBuilder:
    """Allocate blocks first, then build expressions and constraints."""

    def __init__(self, margin: float):
        self.margin = float(margin)
        self.blocks: list[VariableBlock] = []
        self.constraints: list[AffineConstraint] = []
        self._offset = 0
        self._frozen = False

    def add(self, name, kind, shape) -> VariableBlock:
        if self._frozen:
            raise RuntimeError("cannot add blocks after building expressions")
        shape = (shape, shape) if isinstance(shape, int) else tuple(shape)
        blk = VariableBlock(name, kind, shape, self._offset)
        self._offset += blk.size
        self.blocks.append(blk)
        return blk

    @property
    def nvar(self) -> int:
        return self._offset

    def var(self, blk: VariableBlock) -> AffineExpr:
        self._frozen = True
        coef = np.zeros((self.nvar,) + tuple(blk.shape))
        coef[blk.offset:blk.offset + blk.size] = blk.basis()
        return AffineExpr(np.zeros(blk.shape), coef)

    def const(self, M) -> AffineExpr:
        self._frozen = True
        return AffineExpr.constant(M, self.nvar)

    def constrain(self, name, expr: AffineExpr, sense: str) -> None:
        if expr.shape[0] != expr.shape[1]:
            raise DimensionMismatch(f"constraint {name} is not square")
        F0 = 0.5 * (expr.const + expr.const.T)
        coefs = 0.5 * (expr.coef + expr.coef.transpose(0, 2, 1))
        nz = np.nonzero(np.any(coefs != 0, axis=(1, 2)))[0]
        self.constraints.append(AffineConstraint(name, F0, nz, coefs[nz], sense))

    def build(self, **meta) -> SdpProblem:
        return SdpProblem(list(self.blocks), list(self.constraints), self.margin, meta)


# ---------------------------------------------------------------------------
# assemblers


def _lambda_block(lam: complex) -> np.ndarray:
    a, b = lam.real, lam.imag
    return np.array([[a, -b], [b, a]])


def _embedded_q(Q: AffineExpr, S: AffineExpr, nvar) -> AffineExpr:
    return bmat([[Q, S], [-S, Q]], nvar)


def _trace_cap(bld: ProblemBuilder, name, Q: AffineExpr):
    tr = AffineExpr(np.atleast_2d(np.trace(Q.const)), np.trace(Q.coef, axis1=1, axis2=2).reshape(-1, 1, 1))
    bld.constrain(name, TRACE_CAP - tr, ">=")


def _synchronization_block(Qe, Theta, Xe, Z, W, mu, nvar):
    """Left-hand side of the lifted inequality; exactly one factor of each product is constant."""
    phi = bmat([[2.0 * mu * Qe, Qe], [Qe, None]], nvar)
    lifted = bmat([[Theta @ Z, Theta @ W], [-(Xe @ Z), -(Xe @ W)]], nvar)
    return phi + he(lifted)


def _norm_bound_expr(X: AffineExpr, Y: AffineExpr, kbar: float, nvar) -> AffineExpr:
    n, m = X.shape[0], Y.shape[0]
    return bmat([[X + X.T - np.eye(n), Y.T], [Y, kbar ** 2 * np.eye(m)]], nvar)


def norm_bound_value(X, Y, kbar: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = X.shape[0], Y.shape[0]
    return np.block([[X + X.T - np.eye(n), Y.T], [Y, kbar ** 2 * np.eye(m)]])


def _check_multipliers(n, multipliers):
    for Z, W in multipliers:
        if np.shape(Z) != (2 * n, 2 * n) or np.shape(W) != (2 * n, 2 * n):
            raise DimensionMismatch(f"multipliers must be {2 * n}x{2 * n}")


def assemble_synthesis(p: Plant, spectrum, multipliers, mu: float, kbar: float, margin=None) -> SdpProblem:
    """Synthesis step: multipliers frozen, decision over X, Y, Q_k, Sigma_k."""
    n, m = p.n, p.m
    lams = list(spectrum)
    if len(multipliers) != len(lams):
        raise DimensionMismatch("one (Z, W) pair is needed per eigenvalue")
    _check_multipliers(n, multipliers)
    margin = default_margin(p.A) if margin is None else margin
    bld = ProblemBuilder(margin)
    bX = bld.add("X", "full", (n, n))
    bY = bld.add("Y", "full", (m, n))
    qblocks = [(bld.add(f"Q{k}", "sym", n), bld.add(f"S{k}", "skew", n)) for k in range(len(lams))]
    nv = bld.nvar
    X, Y = bld.var(bX), bld.var(bY)
    I2 = np.eye(2)
    AX = p.A @ X
    BY = p.B @ Y
    Xe = X.kron_left(I2)
    for k, (lam, (Z, W), (bq, bs)) in enumerate(zip(lams, multipliers, qblocks)):
        Q, S = bld.var(bq), bld.var(bs)
        Qe = _embedded_q(Q, S, nv)
        Theta = AX.kron_left(I2) - BY.kron_left(_lambda_block(lam))
        lhs = _synchronization_block(Qe, Theta, Xe, np.asarray(Z, float), np.asarray(W, float), mu, nv)
        bld.constrain(f"sync{k}", lhs, "<=")
        bld.constrain(f"Qe{k}", Qe, ">=")
        _trace_cap(bld, f"trace{k}", Q)
    bld.constrain("norm", _norm_bound_expr(X, Y, kbar, nv), ">=")
    return bld.build(kind="synthesis", mu=mu, kbar=kbar, nu=len(lams), n=n, m=m)


def assemble_analysis(p: Plant, spectrum, X, Y, mu: float, kbar: float | None = None,
                      margin=None, modes=None) -> SdpProblem:
    """Analysis step: X, Y frozen, decision over Z_k, W_k, Q_k, Sigma_k.

    ``modes`` restricts the problem to a subset of eigenvalue indices; the
    per-mode problems are independent once X and Y are fixed.
    """
    n, m = p.n, p.m
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != (n, n) or Y.shape != (m, n):
        raise DimensionMismatch("X must be n x n and Y m x n")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("X and Y must be finite")
    margin = default_margin(p.A) if margin is None else margin
    if kbar is not None:
        nb = norm_bound_value(X, Y, kbar)
        if np.linalg.eigvalsh(nb).min() < -VERIFY_RTOL * (1.0 + np.linalg.norm(nb, 2)):
            raise FrozenGainViolatesNormBound("frozen (X, Y) violates the gain-norm LMI")
    lams = list(spectrum)
    modes = range(len(lams)) if modes is None else list(modes)
    bld = ProblemBuilder(margin)
    blocks = []
    for k in modes:
        blocks.append((k,
                       bld.add(f"Z{k}", "full", (2 * n, 2 * n)),
                       bld.add(f"W{k}", "full", (2 * n, 2 * n)),
                       bld.add(f"Q{k}", "sym", n),
                       bld.add(f"S{k}", "skew", n)))
    nv = bld.nvar
    I2 = np.eye(2)
    Xe = np.kron(I2, X)
    for k, bz, bw, bq, bs in blocks:
        Z, W, Q, S = bld.var(bz), bld.var(bw), bld.var(bq), bld.var(bs)
        Qe = _embedded_q(Q, S, nv)
        Theta = np.kron(I2, p.A @ X) - np.kron(_lambda_block(lams[k]), p.B @ Y)
        bld.constrain(f"sync{k}", _synchronization_block(Qe, Theta, Xe, Z, W, mu, nv), "<=")
        bld.constrain(f"Qe{k}", Qe, ">=")
        _trace_cap(bld, f"trace{k}", Q)
    return bld.build(kind="analysis", mu=mu, nu=len(lams), modes=list(modes), n=n, m=m)


def common_q_norm_expr(Q: AffineExpr, Y: AffineExpr, kbar: float, nvar) -> AffineExpr:
    n, m = Q.shape[0], Y.shape[0]
    return bmat([[2.0 * Q - np.eye(n), Y.T], [Y, kbar ** 2 * np.eye(m)]], nvar)


def assemble_common_q(p: Plant, values, mu: float, kbar: float, margin=None) -> SdpProblem:
    """Common block-diagonal certificate diag(Q, Q) imposed at each value."""
    values = [complex(v) for v in values]
    if not values:
        raise EmptyValueList("at least one eigenvalue is required")
    n, m = p.n, p.m
    margin = default_margin(p.A) if margin is None else margin
    bld = ProblemBuilder(margin)
    bQ = bld.add("Q", "sym", n)
    bY = bld.add("Y", "full", (m, n))
    nv = bld.nvar
    Q, Y = bld.var(bQ), bld.var(bY)
    AQ = p.A @ Q
    BY = p.B @ Y
    Qe = bmat([[Q, None], [None, Q]], nv)
    for k, lam in enumerate(values):
        d = AQ - lam.real * BY
        o = lam.imag * BY
        M = bmat([[d, o], [-o, d]], nv)
        bld.constrain(f"lyap{k}", he(M) + 2.0 * mu * Qe, "<=")
    bld.constrain("Q", Q, ">=")
    _trace_cap(bld, "trace", Q)
    bld.constrain("norm", common_q_norm_expr(Q, Y, kbar, nv), ">=")
    return bld.build(kind="common_q", mu=mu, kbar=kbar, n=n, m=m, values=[[v.real, v.imag] for v in values])


def assemble_lyap_check(aek, mu: float, margin=None) -> SdpProblem:
    """Lyapunov certificate P_e = [[P, -Pi], [Pi, P]] for a real embedding."""
    aek = np.asarray(aek, dtype=float)
    two_n = aek.shape[0]
    if aek.shape != (two_n, two_n) or two_n % 2:
        raise DimensionMismatch("real embedding must be 2n x 2n")
    n = two_n // 2
    margin = default_margin(aek) if margin is None else margin
    bld = ProblemBuilder(margin)
    bP = bld.add("P", "sym", n)
    bPi = bld.add("Pi", "skew", n)
    nv = bld.nvar
    P, Pi = bld.var(bP), bld.var(bPi)
    Pe = bmat([[P, -Pi], [Pi, P]], nv)
    bld.constrain("Pe", Pe, ">=")
    bld.constrain("lyap", he(Pe @ aek) + 2.0 * mu * Pe, "<=")
    _trace_cap(bld, "trace", P)
    return bld.build(kind="lyap_check", mu=mu, n=n)


def assemble_multiplier_form(aek, mu: float, margin=None) -> SdpProblem:
    """Lifted Lyapunov inequality with free multipliers X1, X2 (no structure)."""
    aek = np.asarray(aek, dtype=float)
    two_n = aek.shape[0]
    n = two_n // 2
    margin = default_margin(aek) if margin is None else margin
    bld = ProblemBuilder(margin)
    bQ = bld.add("Q", "sym", n)
    bS = bld.add("S", "skew", n)
    bX1 = bld.add("X1", "full", (two_n, two_n))
    bX2 = bld.add("X2", "full", (two_n, two_n))
    nv = bld.nvar
    Q, S, X1, X2 = bld.var(bQ), bld.var(bS), bld.var(bX1), bld.var(bX2)
    Qe = _embedded_q(Q, S, nv)
    phi = bmat([[2.0 * mu * Qe, Qe], [Qe, None]], nv)
    lifted = bmat([[aek @ X1, aek @ X2], [-X1, -X2]], nv)
    bld.constrain("lifted", phi + he(lifted), "<=")
    bld.constrain("Qe", Qe, ">=")
    _trace_cap(bld, "trace", Q)
    return bld.build(kind="multiplier_form", mu=mu, n=n)


def assemble_direct_q(aek, mu: float, margin=None) -> SdpProblem:
    """``He{A_e Q_e} <= -2 mu Q_e`` with structured Q_e = [[Q, S], [-S, Q]]."""
    aek = np.asarray(aek, dtype=float)
    n = aek.shape[0] // 2
    margin = default_margin(aek) if margin is None else margin
    bld = ProblemBuilder(margin)
    bQ = bld.add("Q", "sym", n)
    bS = bld.add("S", "skew", n)
    nv = bld.nvar
    Q, S = bld.var(bQ), bld.var(bS)
    Qe = _embedded_q(Q, S, nv)
    bld.constrain("Qe", Qe, ">=")
    bld.constrain("lyap", he(aek @ Qe) + 2.0 * mu * Qe, "<=")
    _trace_cap(bld, "trace", Q)
    return bld.build(kind="direct_q", mu=mu, n=n)


# ---------------------------------------------------------------------------
# solver boundary


@dataclass
class SdpOutcome:
    status: str
    assignment: np.ndarray | None
    max_violation: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def constraint_violations(prob: SdpProblem, y) -> np.ndarray:
    """Per-constraint ``margin - lambda_min`` normalized by ``1 + ||F0||``."""
    out = []
    for c in prob.constraints:
        lmin = np.linalg.eigvalsh(c.oriented(y)).min()
        out.append((prob.margin - lmin) / (1.0 + np.linalg.norm(c.F0, 2)))
    return np.array(out)


def verify_assignment(prob: SdpProblem, y, rtol: float = VERIFY_RTOL) -> tuple[bool, float]:
    """Independent eigenvalue re-check of every constraint at ``y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (prob.nvar,) or not np.all(np.isfinite(y)):
        return False, float("inf")
    viol = constraint_violations(prob, y)
    worst = float(viol.max()) if viol.size else -np.inf
    return bool(worst <= rtol), worst


def _cvxopt_solve(prob: SdpProblem, options):
    import cvxopt
    from cvxopt import solvers

    nv = prob.nvar
    ncol = nv + 1  # last column: slack t
    Gl_rows, hl = [], []
    Gs, hs = [], []
    for c in prob.constraints:
        s = c.size
        sgn = 1.0 if c.sense == ">=" else -1.0
        # sgn*F(y) + t I - margin I >= 0  <=>  G x + S = h
        G = np.zeros((s * s, ncol))
        if c.indices.size:
            G[:, c.indices] = -sgn * c.coefs.transpose(0, 2, 1).reshape(len(c.indices), s * s).T
        G[:, nv] = -np.eye(s).reshape(-1)
        h = sgn * c.F0 - prob.margin * np.eye(s)
        if s == 1:
            Gl_rows.append(G[0])
            hl.append(h[0, 0])
        else:
            Gs.append(cvxopt.matrix(G))
            hs.append(cvxopt.matrix(h))
    # t >= -1 keeps the phase-one problem bounded
    row = np.zeros(ncol)
    row[nv] = -1.0
    Gl_rows.append(row)
    hl.append(-SLACK_FLOOR)
    Gl_rows.extend(np.hstack([np.vstack([np.eye(nv), -np.eye(nv)]), np.zeros((2 * nv, 1))]))
    hl.extend([VAR_BOUND] * (2 * nv))
    cvec = np.zeros(ncol)
    cvec[nv] = 1.0
    base = {"show_progress": False, "maxiters": 100}
    base.update(options or {})
    # near a degenerate optimum the KKT step can break down for one refinement setting and not another
    attempts = [base] if "refinement" in base else [base, {**base, "refinement": 2}, {**base, "refinement": 0}]
    old = dict(solvers.options)
    sol, error = None, None
    try:
        for opts in attempts:
            solvers.options.clear()
            solvers.options.update(opts)
            try:
                sol = solvers.sdp(cvxopt.matrix(cvec), Gl=cvxopt.matrix(np.array(Gl_rows)),
                                  hl=cvxopt.matrix(np.array(hl)), Gs=Gs, hs=hs)
                break
            except (ArithmeticError, ValueError) as exc:
                error = error or exc
    finally:
        solvers.options.clear()
        solvers.options.update(old)
    if sol is None:
        raise SolverFailure(f"cvxopt raised: {error}", {"exception": repr(error)}) from error
    return {
        "status": sol["status"],
        "x": np.array(sol["x"]).reshape(-1) if sol["x"] is not None else None,
        "iterations": sol.get("iterations"),
        "primal objective": sol.get("primal objective"),
        "dual objective": sol.get("dual objective"),
        "solved": sol["status"] == "optimal",
    }


def _svec_indices(s):
    rows, cols = [], []
    for j in range(s):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    rows, cols = np.array(rows), np.array(cols)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows, cols, scale


def _clarabel_solve(prob: SdpProblem, options):
    import clarabel
    import scipy.sparse as sp

    nv = prob.nvar
    ncol = nv + 1
    lin_rows, lin_rhs = [], []
    psd_blocks, psd_rhs, cones = [], [], []
    for c in prob.constraints:
        s = c.size
        sgn = 1.0 if c.sense == ">=" else -1.0
        h = sgn * c.F0 - prob.margin * np.eye(s)
        if s == 1:
            row = np.zeros(ncol)
            row[c.indices] = -sgn * c.coefs[:, 0, 0]
            row[nv] = -1.0
            lin_rows.append(row)
            lin_rhs.append(h[0, 0])
            continue
        r, q, sc = _svec_indices(s)
        G = np.zeros((r.size, ncol))
        if c.indices.size:
            G[:, c.indices] = -sgn * (c.coefs[:, r, q] * sc).T
        G[:, nv] = -np.where(r == q, 1.0, 0.0)
        psd_blocks.append(G)
        psd_rhs.append(h[r, q] * sc)
        cones.append(clarabel.PSDTriangleConeT(s))
    row = np.zeros(ncol)
    row[nv] = -1.0
    lin_rows.append(row)
    lin_rhs.append(-SLACK_FLOOR)
    box = np.hstack([np.vstack([np.eye(nv), -np.eye(nv)]), np.zeros((2 * nv, 1))])
    lin_rows.extend(box)
    lin_rhs.extend([VAR_BOUND] * (2 * nv))
    A = sp.csc_matrix(np.vstack([np.array(lin_rows)] + psd_blocks))
    b = np.concatenate([np.array(lin_rhs)] + psd_rhs)
    cones = [clarabel.NonnegativeConeT(len(lin_rows))] + cones
    q = np.zeros(ncol)
    q[nv] = 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    for key, val in (options or {}).items():
        setattr(settings, key, val)
    solver = clarabel.DefaultSolver(sp.csc_matrix((ncol, ncol)), q, A, b, cones, settings)
    sol = solver.solve()
    return {
        "status": str(sol.status),
        "x": np.array(sol.x) if sol.x is not None else None,
        "iterations": sol.iterations,
        "primal objective": sol.obj_val,
        "dual objective": getattr(sol, "obj_val_dual", None),
        "solved": str(sol.status) in ("Solved", "AlmostSolved"),
    }


BACKENDS = {"clarabel": _clarabel_solve, "cvxopt": _cvxopt_solve}
DEFAULT_BACKEND = "clarabel"


def check_feasible(prob: SdpProblem, options=None, backend: str = DEFAULT_BACKEND,
                   fallback: bool = True) -> SdpOutcome:
    """Decide margin-feasibility via the phase-one SDP ``min t`` over the PSD cones.

    Every constraint is relaxed to ``oriented(y) + t I >= margin I`` with
    ``t >= -1`` and ``|y_i| <= VAR_BOUND``; this problem is always strictly
    feasible and compact, so the backend only has to find its optimum.
    Infeasible therefore means: no margin-feasible point inside the box.
    ``Feasible`` is returned only after :func:`verify_assignment` accepts the
    point. The optimal ``t`` is kept in ``diagnostics["t"]`` as a signed
    distance to infeasibility.

    The constraints are homogeneous for most assemblers, so ``y = 0`` gives
    ``t = margin`` and an infeasible problem has its optimum in ``(0, margin]``.
    That degenerate optimum occasionally stalls one backend; with
    ``fallback`` the remaining backends are tried before giving up.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown SDP backend {backend!r}")
    order = [backend] + ([b for b in BACKENDS if b != backend] if fallback else [])
    failure = None
    for name in order:
        try:
            out = _check_with(prob, name, options if name == backend else None)
        except SolverFailure as exc:
            failure = failure or exc
            continue
        if failure is not None:
            out.diagnostics["fallback_from"] = failure.diagnostics
        return out
    raise failure


def _check_with(prob: SdpProblem, backend: str, options) -> SdpOutcome:
    sol = BACKENDS[backend](prob, options)
    diag = {k: sol[k] for k in ("status", "iterations", "primal objective", "dual objective")}
    diag["backend"] = backend
    x = sol["x"]
    if x is None or not np.all(np.isfinite(x)):
        raise SolverFailure(f"solver status {sol['status']!r} without a usable point", diag)
    y, t = x[:-1], float(x[-1])
    diag["t"] = t
    ok, worst = verify_assignment(prob, y)
    if ok:
        return SdpOutcome(FEASIBLE, y, worst, diag)
    if sol["solved"]:
        # t > 0: no point meets the margin; t <= 0 but unverifiable: boundary case
        return SdpOutcome(INFEASIBLE, None, worst, diag)
    dual = sol["dual objective"]
    if dual is not None and np.isfinite(dual) and dual > 0:
        return SdpOutcome(INFEASIBLE, None, worst, diag)
    raise SolverFailure(f"solver status {sol['status']!r} with an unverifiable point", diag)

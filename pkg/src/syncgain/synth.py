"""Gain design: the iterative synthesis/analysis scheme and four baselines.

All methods maximize the synchronization rate ``mu`` subject to
``||K||_2 <= kbar``. Rate maximization is a quasi-convex search: each
feasibility problem is monotone in ``mu``, so :func:`bisect_mu` brackets the
largest feasible value.
"""

from __future__ import annotations

import logging
import time
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from . import lmi
from .errors import InfeasibleAtInitialization, SolverFailure
from .graph import WeightedDigraph, is_connected, laplacian, nonzero_spectrum
from .linalg import Plant, matrix_2norm, real_embedding, solve_care, spectral_abscissa
from .verify import estimate_rate

log = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = (0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0)

Probe = namedtuple("Probe", "ok score witness")


@dataclass
class AlgorithmConfig:
    kbar: float = 20.0
    tolerance: float = 1e-3
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    mu_tol: float = 1e-4
    mu_cap: float | None = None
    max_iter: int = 50
    margin: float | None = None
    backend: str = lmi.DEFAULT_BACKEND

    def __post_init__(self):
        if self.kbar <= 0 or self.tolerance <= 0 or self.mu_tol <= 0 or self.max_iter <= 0:
            raise ValueError("kbar, tolerances and max_iter must be positive")
        if not self.alpha_grid or any(a <= 0 for a in self.alpha_grid):
            raise ValueError("alpha grid must be a nonempty list of positive values")
        if self.tolerance <= self.mu_tol:
            raise ValueError("outer tolerance must exceed the mu bisection tolerance")
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)

    def cap_for(self, p: Plant, spectrum) -> float:
        if self.mu_cap is not None:
            return float(self.mu_cap)
        na = matrix_2norm(p.A)
        lam_max = max(abs(lam) for lam in spectrum)
        return self.kbar * (na + lam_max * matrix_2norm(p.B)) + na

    def margin_for(self, p: Plant) -> float:
        return lmi.default_margin(p.A) if self.margin is None else self.margin


@dataclass
class SynthesisResult:
    gain: np.ndarray
    mu_star: float
    method: str
    mu_trace: list = field(default_factory=list)
    certificates: list | None = None
    multipliers: list | None = None
    iterations: int = 0
    wall_time: float = 0.0
    degraded: bool = False
    info: dict = field(default_factory=dict)

    @property
    def gain_norm(self) -> float:
        return matrix_2norm(self.gain)


# ---------------------------------------------------------------------------
# quasi-convex search


@dataclass
class BisectionResult:
    feasible: bool
    mu: float
    witness: object = None
    score: float | None = None
    upper: float | None = None
    evaluations: int = 0


def _as_probe(value) -> Probe:
    if isinstance(value, Probe):
        return value
    if isinstance(value, (bool, np.bool_)):
        return Probe(bool(value), None, None)
    ok, score, witness = value
    return Probe(bool(ok), score, witness)


def bisect_mu(predicate, cap: float, tol: float = 1e-4, lower=None, lower_witness=None, lower_score=None,
              upper=None, upper_score=None, first_probe=None) -> BisectionResult:
    """Largest ``mu`` in ``[0, cap]`` for which a monotone predicate holds.

    ``predicate(mu)`` returns a bool or a :class:`Probe` whose ``score`` is a
    signed distance to infeasibility (negative when feasible). Scores drive a
    safeguarded false-position step; without them this is plain bisection.
    ``lower``/``upper`` pass in already known feasible/infeasible points.

    On success ``predicate(mu)`` holds and either ``mu == cap`` or
    ``predicate(mu + tol)`` fails (by monotonicity).
    """
    evals = 0

    def probe(mu):
        nonlocal evals
        evals += 1
        return _as_probe(predicate(mu))

    if lower is None:
        p0 = probe(0.0)
        if not p0.ok:
            return BisectionResult(False, float("nan"), None, p0.score, 0.0, evals)
        lo, slo, wlo = 0.0, p0.score, p0.witness
    else:
        lo, slo, wlo = float(lower), lower_score, lower_witness
    hi, shi = (None, None) if upper is None else (float(upper), upper_score)
    if hi is not None and hi <= lo:
        return BisectionResult(True, lo, wlo, slo, hi, evals)

    # expand until an infeasible point (or the cap) is found
    step = tol if lower is not None else None
    while hi is None:
        if lo >= cap:
            return BisectionResult(True, cap, wlo, slo, None, evals)
        if step is None:
            c = min(cap, first_probe if first_probe is not None else max(1.0, 8 * tol))
            step = c - lo
        else:
            c = min(cap, lo + step)
        pr = probe(c)
        if pr.ok:
            lo, slo, wlo = c, pr.score, pr.witness
            step *= 4.0
        else:
            hi, shi = c, pr.score

    last = None
    repeats = 0
    while hi - lo > tol:
        w = hi - lo
        use_interp = (slo is not None and shi is not None and slo < 0 < shi and repeats < 2 and w > 4 * tol)
        if use_interp:
            c = lo + w * (-slo) / (shi - slo)
            c = min(max(c, lo + max(0.02 * w, 0.5 * tol)), hi - max(0.02 * w, 0.5 * tol))
        else:
            c = lo + 0.5 * w
        pr = probe(c)
        side = "lo" if pr.ok else "hi"
        if pr.ok:
            lo, slo, wlo = c, pr.score, pr.witness
        else:
            hi, shi = c, pr.score
        repeats = repeats + 1 if side == last else 0
        last = side
    return BisectionResult(True, lo, wlo, slo, hi, evals)


def _sdp_probe(build, cfg: AlgorithmConfig):
    def predicate(mu):
        prob = build(mu)
        out = lmi.check_feasible(prob, backend=cfg.backend)
        t = out.diagnostics.get("t")
        if t is not None and t <= 0.999 * lmi.SLACK_FLOOR:
            t = None  # pinned at the floor: carries no distance information
        return Probe(out.feasible, t, (prob, out.assignment) if out.feasible else None)
    return predicate


# ---------------------------------------------------------------------------
# synthesis / analysis steps


@dataclass
class StepResult:
    mu: float
    X: np.ndarray
    Y: np.ndarray
    Q: list
    S: list
    Z: list
    W: list
    evaluations: int = 0
    score: float | None = None

    @property
    def gain(self) -> np.ndarray:
        return np.linalg.solve(self.X.T, self.Y.T).T

    def certificates(self):
        return [np.block([[q, s], [-s, q]]) for q, s in zip(self.Q, self.S)]


def _spectrum_of(spectrum):
    return list(spectrum)


def synthesis_step(p: Plant, spectrum, multipliers, cfg: AlgorithmConfig, lower=None, lower_values=None):
    """Largest ``mu`` with frozen multipliers; ``None`` if infeasible at ``mu = 0``.

    ``lower_values`` is a dict of block values (X, Y, Q_k, S_k) known to be
    feasible at ``lower``.
    """
    lams = _spectrum_of(spectrum)
    margin = cfg.margin_for(p)

    def build(mu):
        return lmi.assemble_synthesis(p, lams, multipliers, mu, cfg.kbar, margin=margin)

    known = None
    if lower is not None and lower_values is not None:
        prob = build(lower)
        y = prob.pack(lower_values)
        if lmi.verify_assignment(prob, y)[0]:
            known = (prob, y)
    if known is None and lower is not None:
        pr = _sdp_probe(build, cfg)(lower)
        if pr.ok:
            known = pr.witness
    if known is not None:
        res = bisect_mu(_sdp_probe(build, cfg), cfg.cap_for(p, lams), cfg.mu_tol,
                        lower=lower, lower_witness=known, lower_score=None)
    else:
        res = bisect_mu(_sdp_probe(build, cfg), cfg.cap_for(p, lams), cfg.mu_tol)
    if not res.feasible:
        return None
    prob, y = res.witness
    vals = prob.unpack(y)
    nu = len(lams)
    return StepResult(res.mu, vals["X"], vals["Y"], [vals[f"Q{k}"] for k in range(nu)],
                      [vals[f"S{k}"] for k in range(nu)], [z for z, _ in multipliers],
                      [w for _, w in multipliers], res.evaluations, res.score)


def analysis_step(p: Plant, spectrum, X, Y, cfg: AlgorithmConfig, lower=None, lower_step: StepResult | None = None):
    """Largest ``mu`` with (X, Y) frozen, searching multipliers per eigenvalue.

    With X invertible, ``Theta_k Z_k = A_ek X_e Z_k``, so the substitution
    ``X1 = X_e Z_k, X2 = X_e W_k`` turns the frozen-(X, Y) problem into the
    free-multiplier form on ``A_ek``; it is solved there (independent of the
    scaling of X) and mapped back. The problem separates over eigenvalues, so
    the common ``mu`` is the minimum of the per-mode optima; each mode's
    optimum is bracketed above by its spectral rate.
    """
    lams = _spectrum_of(spectrum)
    X = np.asarray(X, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    margin = cfg.margin_for(p)
    K = np.linalg.solve(X.T, Y.T).T
    Xe = np.kron(np.eye(2), X)
    embeddings = [real_embedding(p, K, lam) for lam in lams]
    rates = [-spectral_abscissa(a) for a in embeddings]
    evals = 0
    mu_cur = None
    witnesses = {}
    for k in np.argsort(rates):
        k = int(k)
        aek = embeddings[k]

        def build(mu, aek=aek):
            return lmi.assemble_multiplier_form(aek, mu, margin=margin)

        pred = _sdp_probe(build, cfg)
        known = None
        if lower is not None and lower_step is not None:
            prob = build(lower)
            y = prob.pack({"Q": lower_step.Q[k], "S": lower_step.S[k],
                           "X1": Xe @ lower_step.Z[k], "X2": Xe @ lower_step.W[k]})
            if lmi.verify_assignment(prob, y)[0]:
                known = (prob, y)
            else:
                pr = pred(lower)
                evals += 1
                if pr.ok:
                    known = pr.witness
        # no certificate exists beyond the spectral rate of this mode
        upper = rates[k] if mu_cur is None else min(rates[k], mu_cur)
        if mu_cur is not None and mu_cur <= rates[k]:
            pr = pred(mu_cur)
            evals += 1
            if pr.ok:
                witnesses[k] = pr.witness
                continue
        if known is not None:
            res = bisect_mu(pred, upper, cfg.mu_tol, lower=lower, lower_witness=known, upper=upper)
        else:
            res = bisect_mu(pred, upper, cfg.mu_tol, upper=upper)
        evals += res.evaluations
        if not res.feasible:
            return None
        mu_cur = res.mu
        witnesses[k] = res.witness
    Z, W, Q, S = [], [], [], []
    for k in range(len(lams)):
        prob, y = witnesses[k]
        vals = prob.unpack(y)
        Z.append(np.linalg.solve(Xe, vals["X1"]))
        W.append(np.linalg.solve(Xe, vals["X2"]))
        Q.append(vals["Q"])
        S.append(vals["S"])
    return StepResult(mu_cur, X, Y, Q, S, Z, W, evals)


# ---------------------------------------------------------------------------
# designs


def _prepare(g_or_spectrum):
    if isinstance(g_or_spectrum, WeightedDigraph):
        return nonzero_spectrum(laplacian(g_or_spectrum))
    return g_or_spectrum


def _initial_step(p: Plant, lams, cfg: AlgorithmConfig):
    n = p.n
    best = None
    best_alpha = None
    for alpha in cfg.alpha_grid:
        mults = [(np.eye(2 * n), alpha * np.eye(2 * n))] * len(lams)
        try:
            step = synthesis_step(p, lams, mults, cfg)
        except SolverFailure as exc:
            log.warning("solver failure at alpha=%g: %s", alpha, exc)
            continue
        log.debug("alpha=%g -> %s", alpha, None if step is None else step.mu)
        if step is None:
            continue
        # strict improvement beyond the bisection tolerance; ties keep the smaller alpha
        if best is None or step.mu > best.mu + cfg.mu_tol:
            best, best_alpha = step, alpha
    if best is None:
        raise InfeasibleAtInitialization("no alpha in the grid is feasible at mu = 0")
    return best, best_alpha


def direct_design(p: Plant, g, cfg: AlgorithmConfig | None = None) -> SynthesisResult:
    """One synthesis step with Z = I, W = alpha I, best alpha over the grid."""
    cfg = cfg or AlgorithmConfig()
    t0 = time.perf_counter()
    lams = list(_prepare(g))
    step, alpha = _initial_step(p, lams, cfg)
    return SynthesisResult(step.gain, step.mu, "direct", [("synthesis", step.mu)], step.certificates(),
                           list(zip(step.Z, step.W)), 1, time.perf_counter() - t0, info={"alpha": alpha})


def algorithm1(p: Plant, g, cfg: AlgorithmConfig | None = None) -> SynthesisResult:
    """Alternate synthesis and analysis steps until ``mu_S`` stalls."""
    cfg = cfg or AlgorithmConfig()
    t0 = time.perf_counter()
    if isinstance(g, WeightedDigraph) and not is_connected(g):
        raise ValueError("graph is not connected; synchronization is impossible")
    lams = list(_prepare(g))
    syn, alpha = _initial_step(p, lams, cfg)
    trace = [("synthesis", syn.mu)]
    iterations = 0
    degraded = False
    converged = False
    while iterations < cfg.max_iter:
        iterations += 1
        try:
            ana = analysis_step(p, lams, syn.X, syn.Y, cfg, lower=syn.mu, lower_step=syn)
            if ana is None:  # cannot happen with a verified witness; treat as stall
                break
            trace.append(("analysis", ana.mu))
            mults = list(zip(ana.Z, ana.W))
            vals = {"X": ana.X, "Y": ana.Y}
            for k in range(len(lams)):
                vals[f"Q{k}"], vals[f"S{k}"] = ana.Q[k], ana.S[k]
            new = synthesis_step(p, lams, mults, cfg, lower=ana.mu, lower_values=vals)
        except SolverFailure as exc:
            log.warning("solver failure in iteration %d: %s", iterations, exc)
            degraded = True
            break
        if new is None:
            degraded = True
            break
        trace.append(("synthesis", new.mu))
        improvement = abs(new.mu - syn.mu)
        syn = new
        log.debug("iteration %d: mu_A=%.6f mu_S=%.6f", iterations, ana.mu, new.mu)
        if improvement <= cfg.tolerance:
            converged = True
            break
    return SynthesisResult(syn.gain, syn.mu, "alg1", trace, syn.certificates(), list(zip(syn.Z, syn.W)),
                           iterations, time.perf_counter() - t0, degraded,
                           info={"alpha": alpha, "converged": converged})


def riccati_gain(p: Plant, a: float, b: float) -> np.ndarray:
    return p.B.T @ solve_care(p, a, b)


def riccati_design(p: Plant, spectrum, cfg: AlgorithmConfig | None = None, rtol: float = 1e-6) -> SynthesisResult:
    """``K = B^T P`` with ``b = min Re(lambda_k)`` and the largest ``a`` meeting the norm bound."""
    cfg = cfg or AlgorithmConfig()
    t0 = time.perf_counter()
    lams = list(_prepare(spectrum))
    if not lams:
        raise ValueError("spectrum is empty")
    b = min(lam.real for lam in lams)

    def norm_at(a):
        return matrix_2norm(riccati_gain(p, a, b))

    lo = 1e-8
    if norm_at(lo) > cfg.kbar:
        raise ValueError("norm bound cannot be met even for vanishing a")
    hi = 1.0
    while norm_at(hi) <= cfg.kbar:
        lo, hi = hi, hi * 4.0
        if hi > 1e16:
            break
    while (hi - lo) > rtol * hi:
        mid = 0.5 * (lo + hi)
        if norm_at(mid) <= cfg.kbar:
            lo = mid
        else:
            hi = mid
    K = riccati_gain(p, lo, b)
    rate = estimate_rate(p, lams, K).mu_hat
    return SynthesisResult(K, rate, "riccati", [("riccati", rate)], iterations=1,
                           wall_time=time.perf_counter() - t0, info={"a": lo, "b": b})


def listmann_corners(spectrum) -> list:
    """Corners of the first-quadrant box enclosing the spectrum, deduplicated."""
    lams = list(spectrum)
    re = [lam.real for lam in lams]
    im = [abs(lam.imag) for lam in lams]
    lo_re, hi_re, hi_im = min(re), max(re), max(im)
    corners = []
    for c in (complex(lo_re, 0.0), complex(lo_re, hi_im), complex(hi_re, 0.0), complex(hi_re, hi_im)):
        if all(abs(c - d) > 1e-12 for d in corners):
            corners.append(c)
    corners.sort(key=lambda z: (z.real, z.imag))
    return corners


def _common_q_design(p: Plant, values, lams, cfg: AlgorithmConfig, method: str) -> SynthesisResult:
    t0 = time.perf_counter()
    margin = cfg.margin_for(p)

    def build(mu):
        return lmi.assemble_common_q(p, values, mu, cfg.kbar, margin=margin)

    res = bisect_mu(_sdp_probe(build, cfg), cfg.cap_for(p, lams), cfg.mu_tol)
    if not res.feasible:
        return None
    prob, y = res.witness
    vals = prob.unpack(y)
    Q, Y = vals["Q"], vals["Y"]
    K = np.linalg.solve(Q, Y.T).T  # Q symmetric
    zero = np.zeros_like(Q)
    return SynthesisResult(K, res.mu, method, [("common_q", res.mu)], [np.block([[Q, zero], [zero, Q]])],
                           iterations=1, wall_time=time.perf_counter() - t0,
                           info={"values": [complex(v) for v in values], "evaluations": res.evaluations})


def listmann_design(p: Plant, spectrum, cfg: AlgorithmConfig | None = None):
    """Common diagonal certificate imposed at the spectrum's bounding-box corners."""
    cfg = cfg or AlgorithmConfig()
    lams = list(_prepare(spectrum))
    return _common_q_design(p, listmann_corners(lams), lams, cfg, "listmann")


def aek_design(p: Plant, spectrum, cfg: AlgorithmConfig | None = None):
    """Common diagonal certificate imposed at every nonzero eigenvalue."""
    cfg = cfg or AlgorithmConfig()
    lams = list(_prepare(spectrum))
    return _common_q_design(p, lams, lams, cfg, "aek")


METHODS = ("riccati", "listmann", "aek", "direct", "alg1")


def design(method: str, p: Plant, g, cfg: AlgorithmConfig | None = None):
    cfg = cfg or AlgorithmConfig()
    if method == "riccati":
        return riccati_design(p, g, cfg)
    if method == "listmann":
        return listmann_design(p, g, cfg)
    if method == "aek":
        return aek_design(p, g, cfg)
    if method == "direct":
        return direct_design(p, g, cfg)
    if method == "alg1":
        return algorithm1(p, g, cfg)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")

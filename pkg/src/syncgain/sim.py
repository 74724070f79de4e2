"""Closed-loop network simulation and distance to the synchronization set."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, DimensionMismatch, NonFiniteState
from .linalg import Plant

DEFAULT_STEP = 1e-3
DEFAULT_SEED = 42
# log guard only; the split integration resolves distances far below 1e-14
DIST_FLOOR = 1e-300


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), N*n), agent-major stacking
    distances: np.ndarray
    n_agents: int
    n_states: int


@dataclass
class DecayFit:
    M: float
    rate: float
    window: tuple
    residual: float


def _shape_check(x, N, n):
    x = np.asarray(x, dtype=float)
    if x.shape != (N * n,):
        raise DimensionMismatch(f"state must have length {N * n}, got {x.shape}")
    return x


def closed_loop_field(x, p: Plant, K, L) -> np.ndarray:
    """``((I_N kron A) - (L kron BK)) x`` evaluated blockwise."""
    L = np.asarray(L, dtype=float)
    N, n = L.shape[0], p.n
    X = _shape_check(x, N, n).reshape(N, n)
    BK = p.B @ np.atleast_2d(K)
    if BK.shape != (n, n):
        raise DimensionMismatch("gain does not match the plant")
    return (X @ p.A.T - L @ X @ BK.T).reshape(-1)


def closed_loop_matrix(p: Plant, K, L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    return np.kron(np.eye(L.shape[0]), p.A) - np.kron(L, p.B @ np.atleast_2d(K))


def dist_to_sync(x, N: int, n: int) -> float:
    X = _shape_check(x, N, n).reshape(N, n)
    return float(np.linalg.norm(X - X.mean(axis=0)))


def initial_state(N: int, n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(N * n)


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(x0, p: Plant, K, L, T: float, h: float = DEFAULT_STEP) -> Trajectory:
    """Fixed-step classical RK4 on the closed-loop network.

    The state is carried as its mean ``xbar`` plus the disagreement
    ``e = x - 1 kron xbar``; both obey closed linear dynamics, so the
    distance ``||e||`` keeps full relative precision even when the agents'
    common motion grows or the disagreement has decayed by many decades.
    ``T = 0`` yields a single sample.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    L = np.asarray(L, dtype=float)
    N, n = L.shape[0], p.n
    x0 = _shape_check(x0, N, n)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    BK = p.B @ K
    if BK.shape != (n, n):
        raise DimensionMismatch("gain does not match the plant")
    A = p.A
    row_mean = L.mean(axis=0)  # 1^T L / N
    PL = L - row_mean[None, :]  # projected Laplacian

    def field(z):
        xbar = z[:n]
        E = z[n:].reshape(N, n)
        dE = E @ A.T - PL @ E @ BK.T
        dxbar = A @ xbar - BK @ (row_mean @ E)
        return np.concatenate([dxbar, dE.reshape(-1)])

    steps = int(round(T / h))
    if steps * h < T - 1e-12 * max(T, 1.0):
        steps += 1
    X0 = x0.reshape(N, n)
    xbar0 = X0.mean(axis=0)
    z = np.concatenate([xbar0, (X0 - xbar0).reshape(-1)])
    Z = np.empty((steps + 1, z.size))
    Z[0] = z
    for i in range(steps):
        z = _rk4(field, z, h)
        # sum of disagreements is invariant at zero; shed the roundoff drift into the mean
        E = z[n:].reshape(N, n)
        drift = E.mean(axis=0)
        E -= drift
        z[:n] += drift
        if not np.all(np.isfinite(z)) or np.abs(z).max() > 1e250:
            raise NonFiniteState(f"state diverged at t = {(i + 1) * h:g}")
        Z[i + 1] = z
    times = h * np.arange(steps + 1)
    E = Z[:, n:]
    states = E + np.tile(Z[:, :n], N)
    distances = np.linalg.norm(E, axis=1)
    return Trajectory(times, states, distances, N, n)


def fit_decay(traj: Trajectory, window_fraction: float = 0.5) -> DecayFit:
    """Least-squares line through log-distance over the final part of the horizon."""
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must be in (0, 1]")
    t = traj.times
    t1 = t[-1] - window_fraction * (t[-1] - t[0])
    mask = t >= t1 - 1e-12
    if mask.sum() < 2:
        raise DegenerateWindow("fit window holds fewer than two samples")
    tw = t[mask]
    logd = np.log(np.maximum(traj.distances[mask], DIST_FLOOR))
    slope, intercept = np.polyfit(tw, logd, 1)
    resid = float(np.sqrt(np.mean((logd - (slope * tw + intercept)) ** 2)))
    rate = -float(slope)
    logd_all = np.log(np.maximum(traj.distances, DIST_FLOOR))
    with np.errstate(over="ignore"):  # an exact zero in the window can make M infinite
        M = float(np.exp(np.max(logd_all + rate * (t - t[0])) - logd_all[0]))
    return DecayFit(M, rate, (float(tw[0]), float(tw[-1])), resid)


def write_trajectory_csv(traj: Trajectory, path, include_states: bool = False) -> None:
    header = ["t", "dist"]
    if include_states:
        header += [f"x{i + 1}_{j + 1}" for i in range(traj.n_agents) for j in range(traj.n_states)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(traj.times):
            row = [repr(float(t)), repr(float(traj.distances[i]))]
            if include_states:
                row += [repr(float(v)) for v in traj.states[i]]
            w.writerow(row)


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return header, data

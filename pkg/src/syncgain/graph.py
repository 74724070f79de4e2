"""Weighted directed communication graphs and their Laplacian spectra.

Edge convention: ``weights[i, j] > 0`` means agent ``i`` receives the state
of agent ``j`` (information flows ``j -> i``).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import InvalidGraph, MultipleZeroEigenvalues, UnknownPreset

DEFAULT_DEDUP_TOL = 1e-6

PRESET_NAMES = ("circ4", "circ10", "cpx5", "cpx10", "star10")


@dataclass(frozen=True)
class WeightedDigraph:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidGraph(f"weight matrix must be square, got shape {w.shape}")
        if w.shape[0] < 2:
            raise InvalidGraph("a network needs at least two agents")
        if not np.all(np.isfinite(w)):
            raise InvalidGraph("weights must be finite")
        if np.any(w < 0):
            raise InvalidGraph("weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise InvalidGraph("self-loops are not allowed (diagonal must be zero)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "WeightedDigraph":
        """Build from 1-based ``(receiver, sender, weight)`` triples."""
        w = np.zeros((n, n))
        for edge in edges:
            if len(edge) == 2:
                i, j = edge
                wt = 1.0
            else:
                i, j, wt = edge
            if not (1 <= i <= n and 1 <= j <= n):
                raise InvalidGraph(f"edge ({i}, {j}) out of range for n={n}")
            w[int(i) - 1, int(j) - 1] = float(wt)
        return cls(w)

    def edges(self) -> list[list]:
        rows, cols = np.nonzero(self.weights)
        return [[int(i) + 1, int(j) + 1, float(self.weights[i, j])] for i, j in zip(rows, cols)]

    def to_json(self) -> str:
        return json.dumps({"n": self.n_agents, "edges": self.edges()})

    @classmethod
    def from_json(cls, text: str) -> "WeightedDigraph":
        try:
            obj = json.loads(text)
            return cls.from_edges(int(obj["n"]), obj["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidGraph):
                raise
            raise InvalidGraph(f"malformed graph JSON: {exc}") from exc


@dataclass(frozen=True)
class SpectrumSlice:
    """Distinct nonzero Laplacian eigenvalues, one per conjugate pair."""

    eigenvalues: tuple
    dedup_tolerance: float = DEFAULT_DEDUP_TOL

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def __getitem__(self, k):
        return self.eigenvalues[k]

    @property
    def nu(self) -> int:
        return len(self.eigenvalues)

    @property
    def real_parts(self) -> np.ndarray:
        return np.array([lam.real for lam in self.eigenvalues])

    @property
    def imag_parts(self) -> np.ndarray:
        return np.array([lam.imag for lam in self.eigenvalues])


def laplacian(g: WeightedDigraph) -> np.ndarray:
    w = g.weights
    return np.diag(w.sum(axis=1)) - w


def schur_eigenvalues(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real matrix read off its real Schur form."""
    T = spla.schur(np.asarray(M, dtype=float), output="real")[0]
    n = T.shape[0]
    out = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            a, b, c, d = T[i, i], T[i, i + 1], T[i + 1, i], T[i + 1, i + 1]
            half_tr = 0.5 * (a + d)
            disc = (0.5 * (a - d)) ** 2 + b * c
            root = np.sqrt(complex(disc))
            out.extend([half_tr + root, half_tr - root])
            i += 2
        else:
            out.append(complex(T[i, i]))
            i += 1
    return np.array(out, dtype=complex)


def nonzero_spectrum(L: np.ndarray, dedup_tolerance: float = DEFAULT_DEDUP_TOL) -> SpectrumSlice:
    if dedup_tolerance <= 0:
        raise ValueError("dedup_tolerance must be positive")
    eigs = schur_eigenvalues(L)
    near_zero = np.abs(eigs) < dedup_tolerance
    if near_zero.sum() > 1:
        raise MultipleZeroEigenvalues(
            f"{int(near_zero.sum())} eigenvalues within {dedup_tolerance:g} of zero; graph is not connected"
        )
    reps = []
    for lam in eigs[~near_zero]:
        re, im = lam.real, abs(lam.imag)
        if im < dedup_tolerance:
            im = 0.0
        reps.append(complex(re, im))
    reps.sort(key=lambda z: (z.real, abs(z.imag)))
    kept: list[complex] = []
    for lam in reps:
        if all(abs(lam - other) >= dedup_tolerance for other in kept):
            kept.append(lam)
    kept.sort(key=lambda z: (z.real, abs(z.imag)))
    return SpectrumSlice(tuple(kept), dedup_tolerance)


def is_connected(g: WeightedDigraph) -> bool:
    """True iff some agent's state reaches every other agent along the edges."""
    n = g.n_agents
    # successors of j: agents that receive from j
    succ = [np.nonzero(g.weights[:, j] > 0)[0] for j in range(n)]
    for root in range(n):
        seen = np.zeros(n, dtype=bool)
        seen[root] = True
        queue = deque([root])
        while queue:
            j = queue.popleft()
            for i in succ[j]:
                if not seen[i]:
                    seen[i] = True
                    queue.append(i)
        if seen.all():
            return True
    return False


def _cycle(n: int) -> np.ndarray:
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i - 1) % n] = 1.0
    return w


def _add_chord(w: np.ndarray, src: int, dst: int) -> None:
    # 1-based "src -> dst": agent dst receives from agent src
    w[dst - 1, src - 1] = 1.0


def preset(name: str, n_agents: int | None = None) -> WeightedDigraph:
    """Benchmark topologies: directed cycles, chorded cycles and a star."""
    if name == "circ4":
        w = _cycle(4)
    elif name == "circ10":
        w = _cycle(10)
    elif name == "cpx5":
        w = _cycle(5)
        _add_chord(w, 1, 3)
    elif name == "cpx10":
        w = _cycle(10)
        _add_chord(w, 1, 4)
        _add_chord(w, 6, 9)
    elif name == "star10":
        w = np.zeros((10, 10))
        w[0, 1:] = 1.0
        w[1:, 0] = 1.0
    else:
        raise UnknownPreset(name)
    if n_agents is not None and n_agents != w.shape[0]:
        raise InvalidGraph(f"preset {name} has {w.shape[0]} agents, not {n_agents}")
    return WeightedDigraph(w)

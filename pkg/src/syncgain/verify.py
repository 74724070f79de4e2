"""Rate estimation and mu-synchronization checks for a given gain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Plant, closed_loop_mode, real_embedding, spectral_abscissa
from .lmi import assemble_lyap_check, check_feasible


@dataclass(frozen=True)
class RateEstimate:
    mu_hat: float
    worst_k: int
    abscissas: tuple


def estimate_rate(p: Plant, spectrum, K) -> RateEstimate:
    """``mu_hat = -max_k max Re eig(A - lambda_k B K)``."""
    lams = list(spectrum)
    if not lams:
        raise ValueError("spectrum is empty")
    absc = tuple(spectral_abscissa(closed_loop_mode(p, K, lam)) for lam in lams)
    worst = int(np.argmax(absc))
    return RateEstimate(-absc[worst], worst, absc)


def check_mu_uges(p: Plant, spectrum, K, mu: float, method: str = "spectral", margin=None,
                  backend: str | None = None) -> bool:
    """Whether the synchronization set is mu-UGES under gain ``K``.

    ``spectral`` tests every real embedding's spectral abscissa against
    ``-mu``; ``lyapunov`` asks the SDP solver for a structured Lyapunov
    certificate per eigenvalue. The two can disagree only within a few
    margins of the boundary.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if method == "spectral":
        return all(spectral_abscissa(real_embedding(p, K, lam)) < -mu for lam in spectrum)
    if method == "lyapunov":
        kw = {} if backend is None else {"backend": backend}
        for lam in spectrum:
            aek = real_embedding(p, K, lam)
            if not check_feasible(assemble_lyap_check(aek, mu, margin=margin), **kw).feasible:
                return False
        return True
    raise ValueError(f"unknown method {method!r}")

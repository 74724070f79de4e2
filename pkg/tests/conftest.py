import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from syncgain import lmi
from syncgain.bench import ScenarioConfig, plant_preset, run_benchmark

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, echoed in the terminal summary
CRITERION_LINES: dict[int, str] = {}


def report(number: int, passed: bool, detail: str = "") -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    CRITERION_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERION_LINES):
            terminalreporter.write_line(CRITERION_LINES[k])


@pytest.fixture(scope="session")
def osc():
    return plant_preset("osc")


@pytest.fixture(scope="session")
def x29():
    return plant_preset("x29")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class SolverAudit:
    """Re-checks every Feasible outcome with an eigenvalue computation of its own."""

    def __init__(self):
        self.feasible = 0
        self.failures = []
        self.total = 0
        self.gain_norms = []  # (kind, kbar, ||K||) per feasible synthesis or common-Q outcome

    def inspect(self, prob, out):
        self.total += 1
        if not out.feasible:
            return
        self.feasible += 1
        y = np.asarray(out.assignment)
        for c in prob.constraints:
            M = c.F0 + np.einsum("i,ijk->jk", y[c.indices], c.coefs)
            if c.sense == "<=":
                M = -M
            lmin = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
            if lmin < prob.margin - 1e-9 * (1.0 + np.linalg.norm(c.F0, 2)):
                self.failures.append((prob.meta.get("kind"), c.name, lmin))
        kind = prob.meta.get("kind")
        if kind in ("synthesis", "common_q"):
            vals = prob.unpack(y)
            X = vals["X"] if kind == "synthesis" else vals["Q"]
            K = np.linalg.solve(X.T, vals["Y"].T).T
            self.gain_norms.append((kind, prob.meta["kbar"], np.linalg.norm(K, 2)))


@pytest.fixture(scope="session")
def benchmark_run():
    """Full default benchmark (2 plants x 5 graphs x 5 methods), audited at the solver boundary."""
    audit = SolverAudit()
    original = lmi._check_with

    def audited(prob, backend, options):
        out = original(prob, backend, options)
        audit.inspect(prob, out)
        return out

    lmi._check_with = audited
    try:
        cfg = ScenarioConfig()
        t0 = time.perf_counter()
        rows = run_benchmark(cfg)
        elapsed = time.perf_counter() - t0
    finally:
        lmi._check_with = original
    return {"cfg": cfg, "rows": rows, "elapsed": elapsed, "audit": audit}

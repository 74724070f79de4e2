import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from syncgain.errors import InvalidGraph, MultipleZeroEigenvalues, UnknownPreset
from syncgain.graph import (
    PRESET_NAMES,
    WeightedDigraph,
    is_connected,
    laplacian,
    nonzero_spectrum,
    preset,
    schur_eigenvalues,
)


def cycle(n):
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i - 1) % n] = 1.0
    return WeightedDigraph(w)


# --- construction -----------------------------------------------------------

@pytest.mark.parametrize("w", [
    [[0, -1], [1, 0]],           # negative weight
    [[1, 1], [1, 0]],            # self loop
    [[0]],                       # single agent
    [[0, 1, 0], [1, 0, 1]],      # not square
    [[0, np.nan], [1, 0]],
])
def test_invalid_weights_rejected(w):
    with pytest.raises(InvalidGraph):
        WeightedDigraph(w)


def test_weights_are_read_only():
    g = preset("circ4")
    with pytest.raises(ValueError):
        g.weights[0, 1] = 5.0


def test_json_round_trip():
    g = preset("cpx10")
    text = g.to_json()
    assert json.loads(text)["n"] == 10
    assert np.array_equal(WeightedDigraph.from_json(text).weights, g.weights)


def test_from_edges_is_one_based():
    g = WeightedDigraph.from_edges(3, [[2, 1, 0.5], [3, 2, 2.0]])
    assert g.weights[1, 0] == 0.5 and g.weights[2, 1] == 2.0


@pytest.mark.parametrize("text", ['{"n": 2}', '{"n": 2, "edges": [[1, 5, 1]]}', "not json"])
def test_bad_json(text):
    with pytest.raises(InvalidGraph):
        WeightedDigraph.from_json(text)


# --- laplacian -----------------------------------------------------------------

def test_laplacian_pair():
    L = laplacian(WeightedDigraph([[0, 1], [1, 0]]))
    assert np.array_equal(L, [[1, -1], [-1, 1]])


def test_laplacian_directed_cycle_is_circulant():
    L = laplacian(cycle(4))
    # first row [1, 0, 0, -1], each row a right shift of the previous
    assert np.array_equal(L[0], [1, 0, 0, -1])
    for i in range(1, 4):
        assert np.array_equal(L[i], np.roll(L[0], i))


def test_laplacian_empty_graph():
    assert np.array_equal(laplacian(WeightedDigraph(np.zeros((3, 3)))), np.zeros((3, 3)))


@st.composite
def digraphs(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    density = draw(st.floats(0.05, 0.9))
    seed = draw(st.integers(0, 2**31 - 1))
    r = np.random.default_rng(seed)
    w = (r.random((n, n)) < density) * r.uniform(0.1, 3.0, (n, n))
    np.fill_diagonal(w, 0.0)
    return WeightedDigraph(w)


@given(digraphs())
def test_laplacian_rows_sum_to_zero(g):
    L = laplacian(g)
    assert np.all(np.abs(L.sum(axis=1)) <= 1e-12 * max(1.0, np.abs(L).max()))
    off = L - np.diag(np.diag(L))
    assert np.all(off <= 0)


# --- spectrum ----------------------------------------------------------------

def test_spectrum_pair():
    s = nonzero_spectrum(laplacian(WeightedDigraph([[0, 1], [1, 0]])))
    assert s.nu == 1 and abs(s[0] - 2) < 1e-12


def test_spectrum_directed_four_cycle():
    # circulant oracle: 1 - exp(-j pi k / 2)
    oracle = [1 - np.exp(-1j * np.pi * k / 2) for k in range(4)]
    reps = sorted({complex(round(z.real, 9), round(abs(z.imag), 9)) for z in oracle if abs(z) > 1e-9},
                  key=lambda z: (z.real, z.imag))
    s = nonzero_spectrum(laplacian(cycle(4)))
    assert s.nu == 2
    assert np.allclose(s.eigenvalues, reps, atol=1e-10)
    assert np.allclose(s.eigenvalues, [1 + 1j, 2], atol=1e-10)


def test_spectrum_complete_graph_deduplicates():
    w = np.ones((3, 3)) - np.eye(3)
    s = nonzero_spectrum(laplacian(WeightedDigraph(w)))
    assert s.nu == 1 and abs(s[0] - 3) < 1e-10


def test_spectrum_disconnected_raises():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
    with pytest.raises(MultipleZeroEigenvalues):
        nonzero_spectrum(laplacian(WeightedDigraph(w)))


def test_spectrum_bad_tolerance():
    with pytest.raises(ValueError):
        nonzero_spectrum(laplacian(cycle(3)), dedup_tolerance=0.0)


def test_schur_eigenvalues_match_numpy():
    M = np.random.default_rng(1).standard_normal((7, 7))
    ours = np.sort_complex(schur_eigenvalues(M))
    ref = np.sort_complex(np.linalg.eigvals(M))
    assert np.allclose(ours, ref, atol=1e-10)


@given(digraphs())
def test_spectrum_properties(g):
    L = laplacian(g)
    try:
        s = nonzero_spectrum(L)
    except MultipleZeroEigenvalues:
        return
    eigs = np.linalg.eigvals(L)
    lams = list(s)
    assert lams == list(nonzero_spectrum(L))  # idempotent
    for i, a in enumerate(lams):
        assert a.real > 0 and a.imag >= 0
        for b in lams[i + 1:]:
            assert abs(a - b) >= s.dedup_tolerance
        if a.imag != 0:
            # conjugate closure and conjugate not stored
            assert np.min(np.abs(eigs - a.conjugate())) < 1e-8
            assert all(abs(b - a.conjugate()) > s.dedup_tolerance for b in lams)
    keys = [(a.real, abs(a.imag)) for a in lams]
    assert keys == sorted(keys)


# --- connectivity -------------------------------------------------------------

def test_connected_examples():
    assert is_connected(cycle(4))
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
    assert not is_connected(WeightedDigraph(w))


def test_star_direction_matters():
    leaf_to_hub = np.zeros((5, 5))
    leaf_to_hub[0, 1:] = 1.0  # hub receives from leaves only
    assert not is_connected(WeightedDigraph(leaf_to_hub))
    hub_to_leaf = np.zeros((5, 5))
    hub_to_leaf[1:, 0] = 1.0  # leaves receive from hub
    assert is_connected(WeightedDigraph(hub_to_leaf))


@given(digraphs())
def test_structural_connectivity_matches_spectral(g):
    eigs = np.linalg.eigvals(laplacian(g))
    simple_zero = int(np.sum(np.abs(eigs) < 1e-6)) == 1
    assert is_connected(g) == simple_zero


# --- presets -------------------------------------------------------------------

@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_connected_with_positive_spectrum(name):
    g = preset(name)
    assert is_connected(g)
    s = nonzero_spectrum(laplacian(g))
    assert s.nu >= 1 and np.all(s.real_parts > 0)
    assert np.all(g.weights[g.weights > 0] == 1.0)


def test_preset_circ4_spectrum():
    assert np.allclose(nonzero_spectrum(laplacian(preset("circ4"))).eigenvalues, [1 + 1j, 2], atol=1e-10)


def test_preset_star10_spectrum():
    g = preset("star10")
    assert np.all(g.weights[0, 1:] == 1) and np.all(g.weights[1:, 0] == 1)
    assert np.allclose(nonzero_spectrum(laplacian(g)).eigenvalues, [1, 10], atol=1e-9)


def test_preset_circ10_matches_circulant_formula():
    oracle = [1 - np.exp(-2j * np.pi * k / 10) for k in range(1, 10)]
    reps = sorted({complex(round(z.real, 9), round(abs(z.imag), 9)) for z in oracle},
                  key=lambda z: (z.real, z.imag))
    assert np.allclose(nonzero_spectrum(laplacian(preset("circ10"))).eigenvalues, reps, atol=1e-9)


@pytest.mark.parametrize("name", ["cpx5", "cpx10"])
def test_complex_presets_have_complex_pairs(name):
    s = nonzero_spectrum(laplacian(preset(name)))
    assert np.any(s.imag_parts > 1e-3)


def test_preset_chords():
    w5 = preset("cpx5").weights
    assert w5[2, 0] == 1.0 and w5.sum() == 6
    w10 = preset("cpx10").weights
    assert w10[3, 0] == 1.0 and w10[8, 5] == 1.0 and w10.sum() == 12


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        preset("ring7")
    with pytest.raises(KeyError):
        preset("ring7")


def test_preset_size_mismatch():
    with pytest.raises(InvalidGraph):
        preset("circ4", n_agents=5)

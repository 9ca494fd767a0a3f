import time

import numpy as np
import pytest
import scipy.sparse as sp

from btes.assembly import StateLayout, assemble_system, fixed_point_residual, spectral_radius, step
from btes.errors import NumericError

from conftest import make_config
from oracles import system_step


def test_paper_state_count(paper_system):
    lay = paper_system.layout
    assert lay.n == 2319
    assert (lay.ground_offset - 2, lay.n_cells) == (108, 2209)
    assert paper_system.A.shape == (2319, 2319)


def test_paper_fixed_point(paper_system):
    assert fixed_point_residual(paper_system) < 1e-10


def test_inlet_only_responds_to_input(paper_system):
    x = paper_system.ambient_state()
    x1 = step(paper_system, x, 4500.0)
    assert x1[0] - 295.15 == pytest.approx(0.6031, abs=1e-4)
    np.testing.assert_allclose(x1[1:], 295.15, atol=1e-10)


def test_f_is_response_to_zero_state(paper_system):
    z = np.zeros(paper_system.n)
    np.testing.assert_array_equal(step(paper_system, z, 0.0), paper_system.f)


def test_sign_structure(paper_system):
    A = paper_system.A.tocoo()
    # only the BHE cell rows carry negative (wall) weights from the flux form
    g0 = paper_system.layout.ground_offset
    neg_rows = set(int(r) - g0 for r in A.row[A.data < 0])
    assert neg_rows == set(paper_system.classification.bhe_cells)
    sums = np.asarray(paper_system.A.sum(axis=1)).ravel()
    assert sums.max() <= 1.0 + 1e-12


@pytest.mark.parametrize("sigma, substeps, v", [(1, 1, (0.0, 0.0)), (2, 1, (2e-6, -1e-6)),
                                                 (3, 2, (1.3889e-6, 1.3889e-6))])
def test_matches_per_state_oracle(sigma, substeps, v):
    cfg = make_config(size=7.0, bhe=((2.5, 2.5), (4.5, 4.5)), sigma=sigma, substeps=substeps, v=v)
    sys = assemble_system(cfg)
    rng = np.random.default_rng(sigma)
    for u in (0.0, 750.0, -1000.0):
        x = rng.uniform(285.0, 310.0, sys.n)
        np.testing.assert_allclose(step(sys, x, u), system_step(cfg, x, u), rtol=0, atol=1e-9)


def test_matches_oracle_on_paper_system(paper_config, paper_system):
    x = np.random.default_rng(5).uniform(290.0, 305.0, paper_system.n)
    np.testing.assert_allclose(step(paper_system, x, 2000.0), system_step(paper_config, x, 2000.0),
                               rtol=0, atol=1e-9)


def test_sparsity_pattern_single_bhe():
    sys = assemble_system(make_config(sigma=1))
    lay = sys.layout
    assert lay.n == 31
    G = lambda c: lay.index(("G", c))  # noqa: E731
    f0, f1, b0, b1 = range(2, 6)
    wall = {G(c) for c in (11, 13, 7, 17)}
    expected = {
        0: {1},
        1: {f1},
        f0: {0, f0, b0},
        f1: {f0, f1, b1},
        b0: {f0, b0, b1} | wall,
        b1: {f1, b0, b1} | wall,
    }
    for c in range(25):
        if sys.mesh.is_boundary(c):
            expected[G(c)] = set()
        else:
            pattern = {G(c), G(c - 1), G(c + 1), G(c - 5), G(c + 5)}
            if c == 12:
                pattern |= {b0, b1}
            expected[G(c)] = pattern
    A = sys.A.tocsr()
    for i in range(lay.n):
        assert set(A.indices[A.indptr[i]:A.indptr[i + 1]]) == expected[i], i
    assert np.count_nonzero(sys.B) == 1 and sys.B[0] > 0


def test_layout_round_trip():
    lay = StateLayout(nu=3, sigma=2, n_cells=10)
    seen = {lay.index("T_in"), lay.index("T_out")}
    for j in range(3):
        for k in range(8):
            idx = lay.index(("B", j, k))
            assert idx == lay.index(k, bhe=j)
            assert lay.bhe_slice(j).start <= idx < lay.bhe_slice(j).stop
            seen.add(idx)
    seen |= {lay.index(("G", c)) for c in range(10)}
    assert seen == set(range(lay.n))
    assert len(lay.labels()) == lay.n
    with pytest.raises(KeyError):
        lay.index(("G", 10))
    with pytest.raises(KeyError):
        lay.index(3)


def test_step_shape_check(paper_system):
    with pytest.raises(ValueError):
        step(paper_system, np.zeros(5), 0.0)


def test_spectral_radius_known_matrices():
    assert spectral_radius(np.eye(4), 200).rho == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius(np.diag([0.5, -0.9]), 500).rho == pytest.approx(0.9, abs=1e-9)
    assert spectral_radius(sp.csr_matrix(np.diag([0.2, 0.7, 0.1])), 300).rho == pytest.approx(0.7, abs=1e-9)


def test_spectral_radius_rejects_short_runs():
    with pytest.raises(ValueError):
        spectral_radius(np.eye(2), 10)
    with pytest.raises(NumericError):
        spectral_radius(np.diag([1e200, 1.0]), 100)


def test_paper_system_is_stable(paper_system):
    est = spectral_radius(paper_system, 2000)
    assert est.rho < 1.0
    assert est.monotone


def test_literal_single_substep_scheme_is_unstable(paper_config):
    sys = assemble_system(paper_config.with_overrides(bhe={"substeps": 1}))
    assert spectral_radius(sys, 2000).rho > 1.0


def test_assembly_time(paper_config):
    t0 = time.perf_counter()
    assemble_system(paper_config)
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.slow
def test_power_estimate_against_dense_eigenvalues(paper_system):
    exact = np.abs(np.linalg.eigvals(paper_system.A.toarray())).max()
    assert exact < 1.0
    est = spectral_radius(paper_system, 2000).rho
    # the Rayleigh-free norm ratio approaches rho from below for this clustered spectrum
    assert est <= exact + 1e-9
    assert est == pytest.approx(exact, abs=1e-3)

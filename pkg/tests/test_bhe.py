import numpy as np
import pytest

from btes.bhe import (INLET, BheParams, assemble_bhe, backfill_index, backfill_rows, fluid_index,
                      fluid_rows, heat_flux_form, wall_average_form)
from btes.mesh import MeshSpec, build_mesh, classify_cells

from oracles import bhe_ode_step as _ode_step

PAPER = dict(sigma=3, l=3.66, q_vol=0.1974 / 1000 / 9 * 9, C_w=2452.7037, C_b=20361.661, R_fb=0.261,
             R_bb=0.4538652673363449, R_gb=0.06931151010684597, c_w=4.2e6, dt=15.0)


def bp(**kw):
    return BheParams(**{**PAPER, **kw})


def wall(cells=(10, 11, 12, 13)):
    return {("G", c): 0.25 for c in cells}


def test_fluid_self_coefficient_example():
    p = bp()
    row = fluid_rows(p, 0, 1)
    expected = 1 - 15 / 2452.7037 * (1 / 0.261 + p.q_vol * 4.2e6 / 3.66)
    assert row[fluid_index(p, 0, 1)] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(-0.4088, abs=2e-4)
    assert row[INLET] == pytest.approx(15 * p.q_vol * 4.2e6 / (3.66 * 2452.7037))


def test_backfill_self_coefficient_example():
    row = backfill_rows(bp(), 0, 1, wall())
    assert row[backfill_index(bp(), 0, 1)] == pytest.approx(0.98493, abs=1e-5)


@pytest.mark.parametrize("pipe, s, upstream", [
    (0, 1, INLET), (0, 2, 0), (0, 3, 1), (1, 3, 2), (1, 2, 5), (1, 1, 4),
])
def test_upstream_rule(pipe, s, upstream):
    row = fluid_rows(bp(), pipe, s)
    assert upstream in row and row[upstream] > 0


def test_single_segment_upstream():
    p = bp(sigma=1)
    assert INLET in fluid_rows(p, 0, 1)
    assert fluid_index(p, 0, 1) in fluid_rows(p, 1, 1)


def test_segment_range_checked():
    with pytest.raises(ValueError):
        fluid_index(bp(), 0, 4)


@pytest.mark.parametrize("substeps", [1, 2, 3])
def test_equilibrium_is_fixed_point(substeps):
    p = bp(substeps=substeps)
    block = assemble_bhe(p, wall())
    vals = {INLET: 300.0, **{("G", c): 300.0 for c in (10, 11, 12, 13)}}
    vals.update({i: 300.0 for i in range(p.n_states)})
    for row in block.rows:
        assert sum(v * vals[k] for k, v in row.items()) == pytest.approx(300.0, abs=1e-10)


def test_rows_sum_to_one():
    for m in (1, 2):
        for row in assemble_bhe(bp(substeps=m), wall()).rows:
            assert sum(row.values()) == pytest.approx(1.0, abs=1e-13)


def test_zero_flow_limit_decouples_inlet():
    row = fluid_rows(bp(q_vol=1e-300), 0, 1)
    assert row[INLET] == pytest.approx(0.0, abs=1e-200)


def test_insulated_wall_limit():
    row = backfill_rows(bp(R_gb=1e300), 0, 1, wall())
    assert all(row[k] < 1e-290 for k in wall())


def test_wall_average_form():
    mesh = build_mesh(MeshSpec(5.0, 5.0, 1.0, 1.0))
    cls = classify_cells(mesh, [(2.5, 2.5)])
    assert wall_average_form(cls, 0) == {("G", 13): 0.25, ("G", 11): 0.25, ("G", 7): 0.25, ("G", 17): 0.25}


def test_heat_flux_example():
    # backfill 1 K above the wall everywhere: Q = 2 / R_gb
    p = bp()
    form = heat_flux_form(p, wall())
    vals = {k: 1.0 if isinstance(k, int) else 0.0 for k in form}
    q = sum(v * vals[k] for k, v in form.items())
    assert q == pytest.approx(2 / 0.06931151010684597, rel=1e-12)
    assert q == pytest.approx(28.855, abs=1e-3)
    assert sum(form.values()) == pytest.approx(0.0, abs=1e-12)


def _apply(block, x, T_in, Tg):
    vals = {INLET: T_in, **{k: Tg for k in block.wall_form}, **dict(enumerate(x))}
    return np.array([sum(v * vals[k] for k, v in row.items()) for row in block.rows])


@pytest.mark.parametrize("m", [1, 2, 4])
def test_matches_ode_oracle_with_substeps(m):
    p = bp(substeps=m)
    block = assemble_bhe(p, wall())
    rng = np.random.default_rng(0)
    x = rng.uniform(290, 310, p.n_states)
    T_in, Tg = 305.0, 296.0
    ref = x.copy()
    for _ in range(m):
        ref = _ode_step(p, T_in, Tg, ref, p.dt / m)
    np.testing.assert_allclose(_apply(block, x, T_in, Tg), ref, rtol=0, atol=1e-9)


def test_enthalpy_balance():
    p = bp(substeps=1)
    block = assemble_bhe(p, wall())
    rng = np.random.default_rng(7)
    x = rng.uniform(290, 310, p.n_states)
    T_in, Tg = 307.0, 294.0
    x1 = _apply(block, x, T_in, Tg)

    def energy(y):
        return p.l * (p.C_w * y[:2 * p.sigma].sum() + p.C_b * y[2 * p.sigma:].sum())

    outlet = x[fluid_index(p, 1, 1)]
    exchange = p.l * np.sum((Tg - x[2 * p.sigma:]) / p.R_gb)
    expected = p.dt * (p.q_vol * p.c_w * (T_in - outlet) + exchange)
    assert energy(x1) - energy(x) == pytest.approx(expected, rel=1e-9)


def test_offset_invariance_of_flux():
    p = bp()
    form = heat_flux_form(p, wall())
    x = np.random.default_rng(2).uniform(280, 300, len(form))
    keys = list(form)
    q = sum(form[k] * v for k, v in zip(keys, x))
    q_shift = sum(form[k] * (v + 13.0) for k, v in zip(keys, x))
    assert q_shift == pytest.approx(q, abs=1e-9)


def test_courant_property():
    assert bp().courant == pytest.approx(15 * PAPER["q_vol"] * 4.2e6 / (3.66 * 2452.7037))
    assert bp(substeps=2).courant == pytest.approx(bp().courant / 2)

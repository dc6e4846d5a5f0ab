import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvbus import planner as P
from nvbus.dynamics import schedule_propagator
from nvbus.hamiltonians import HamiltonianModel


# ---------------------------------------------------------------- frequency plan

def test_reference_gradient_spacing():
    plan = P.build_frequency_plan(150e6, rows=64)
    assert len(plan.lines) == 64 * 6
    assert plan.min_spacing == 10e6
    assert P.brute_force_min_spacing([ln.frequency for ln in plan.lines]) == 10e6
    a, b = plan.closest_pair
    assert b.frequency - a.frequency == plan.min_spacing


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1e6, max_value=500e6), st.integers(min_value=2, max_value=24),
       st.sampled_from(["rounded", "exact"]))
def test_sorted_scan_matches_brute_force(G, rows, offsets):
    plan = P.build_frequency_plan(G, rows, offsets)
    assert plan.min_spacing == pytest.approx(P.brute_force_min_spacing([ln.frequency for ln in plan.lines]), abs=1e-6)


def test_three_gigahertz_base_collides_from_41_rows():
    assert P.build_frequency_plan(150e6, 40, nv_base=3e9).min_spacing == 10e6
    assert P.build_frequency_plan(150e6, 41, nv_base=3e9).min_spacing == 0.0


def test_single_row_and_bad_inputs():
    plan = P.build_frequency_plan(150e6, rows=1)
    assert plan.min_spacing > 0
    with pytest.raises(ValueError):
        P.build_frequency_plan(150e6, rows=0)
    with pytest.raises(ValueError):
        P.build_frequency_plan(150e6, offsets="approx")


def test_plan_csv(tmp_path):
    text = P.build_frequency_plan(150e6, 2).to_csv(tmp_path / "f.csv")
    assert text.splitlines()[0] == "row,species,label,frequency_hz"
    assert len(text.splitlines()) == 13


@given(st.integers(min_value=0, max_value=200))
def test_admissible_family(n):
    assert P.is_admissible(3000.0 / (3 * n + 1))


def test_reference_zeta_not_admissible_literally():
    assert not P.is_admissible(50.0)


def test_search_gradient_ranks_and_warns():
    with pytest.warns(UserWarning):
        out = P.search_gradient([50.0, 60.0], rows=16)
    assert out[0].min_spacing >= out[1].min_spacing
    ranked = P.search_gradient([3000.0 / 61, 50.0], rows=64)
    assert any(c.admissible for c in ranked)
    assert ranked[0].zeta == 50.0 and not ranked[0].admissible


# ---------------------------------------------------------------- layout

def test_default_layout_links_in_range():
    lay = P.generate_layout()
    assert lay.ok
    lengths = lay.link_lengths("horizontal")
    assert set(np.round(lengths, 3)) == {19.925, 20.353}
    assert lay.link_lengths("vertical") == pytest.approx(math.hypot(18, 9.5))
    assert lay.impurities == {"horizontal": 32, "vertical": 37}
    xy = lay.coordinates_nm()
    assert xy[:32, 0].max() <= 525.0


def test_zero_stagger_flagged():
    lay = P.generate_layout(P.LayoutConfig(stagger=Fraction(0)))
    assert not lay.ok
    assert {v.length for v in lay.violations} == {18.0}


def test_layout_exports(tmp_path):
    lay = P.generate_layout()
    text = lay.to_csv(tmp_path / "l.csv")
    assert len(text.splitlines()) == 1 + len(lay.sites)
    s = lay.summary()
    assert s["diagonal_link"] == pytest.approx(19.925, abs=1e-3)
    assert s["return_link"] == pytest.approx(20.353, abs=1e-3)


def test_layout_validation():
    with pytest.raises(ValueError):
        P.LayoutConfig(h=0.0)


def test_sawtooth_positions_periodic():
    pos = P.sawtooth_positions(9)
    assert pos[4][0] - pos[0][0] == Fraction(7, 2)
    assert [p[2] for p in pos[:5]] == ["A", "B", "C", "D", "A"]


def test_sawtooth_couplings_orders():
    pairs, kappas, order = P.sawtooth_couplings(8)
    assert order.count(1) == 7 and order.count(2) == 6
    nn = [k for k, o in zip(kappas, order) if o == 1]
    nnn = [k for k, o in zip(kappas, order) if o == 2]
    assert min(nn) > 3 * max(nnn)


# ---------------------------------------------------------------- yield

def test_yield_matches_closed_form():
    rep = P.yield_monte_carlo(trials=100_000, seed=0)
    assert rep.closed_form == pytest.approx(1 - 0.6**8)
    assert rep.consistent
    assert rep.failure_probability == pytest.approx(0.016796, abs=1e-6)
    assert not rep.meets_target


def test_yield_reproducible():
    a = P.yield_monte_carlo(trials=20_000, seed=3)
    b = P.yield_monte_carlo(trials=20_000, seed=3)
    assert a.functional_fraction == b.functional_fraction


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 12), st.integers(0, 2**31))
def test_yield_property(p, sites, seed):
    rep = P.yield_monte_carlo(p, sites, 10_000, seed)
    assert abs(rep.functional_fraction - rep.closed_form) <= 5 * max(rep.stderr, 1e-3)


def test_yield_input_checks():
    with pytest.raises(ValueError):
        P.yield_monte_carlo(trials=100)
    with pytest.raises(ValueError):
        P.yield_monte_carlo(p_conv=1.5)


# ---------------------------------------------------------------- refocusing

def test_sign_averages():
    table = P.sign_average_table()
    for name in ("eff1", "eff2"):
        for term in ("AC", "BD", "CA'", "DB'"):
            assert table[name][term] == 0
    assert [table["eff1"][t] for t in ("AB", "BC", "CD", "DA'")] == [1, 0, 1, 0]
    assert [table["eff2"][t] for t in ("AB", "BC", "CD", "DA'")] == [0, 1, 0, 1]


@given(st.lists(st.sampled_from(["A", "B", "C", "D", "A'", "B'"]), min_size=2, max_size=2),
       st.sets(st.integers(1, 4)))
def test_sign_average_is_zero_or_one(term, rows):
    v = P.toggling_sign_average(term, frozenset(rows))
    assert v in (0, 1)


def test_echo_plan_structure():
    plan = P.echo_schedule_nnn(1.0, 3)
    assert plan.simulated_time == 3.0
    assert plan.wall_time == pytest.approx(6.0)
    assert len(plan.trotter.events) == 3 * 6
    assert plan.eff1.events[0] == (0.25, P.rows_to_sites(8, {1, 2}))
    assert P.rows_to_sites(8, {1, 2}) == frozenset({0, 1, 4, 5})
    with pytest.raises(ValueError):
        P.echo_schedule_nnn(1.0, 0)
    with pytest.raises(ValueError):
        P.echo_schedule_nnn(1.0, 1, rows=3)


def test_schedule_with_time_reverse_is_identity():
    model = P.sawtooth_model(6, 2)
    plan = P.echo_schedule_nnn(2e-5, 2, n_sites=6)
    back = HamiltonianModel(model.layout, -model.static_part)
    U = schedule_propagator(back, P.reverse_schedule(plan.trotter)) @ schedule_propagator(model, plan.trotter)
    np.testing.assert_allclose(U, np.eye(64), atol=1e-10)


def test_single_echo_removes_nnn_to_first_order():
    full, nn = P.sawtooth_model(6, 2), P.sawtooth_model(6, 1)
    T = 0.5 / max(nn.meta["kappas"])
    errs = [P.trotter_error(P.echo_schedule_nnn(T / n, n, 6), full, nn) for n in (8, 16)]
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvbus import core
from nvbus.core import (
    DEFAULT_CONSTANTS,
    JTAxis,
    PhysicalConstants,
    SpinKind,
    SpinSpecies,
    SystemSpec,
    dipolar_coupling,
    dipolar_distance,
    impurity_line_offsets,
    jt_relaxation_rate,
    nitrogen,
    rotated_hyperfine,
)


def test_angular_linear_roundtrip():
    assert core.linear(core.angular(1.5e3)) == pytest.approx(1.5e3)
    np.testing.assert_allclose(core.linear(core.angular([1.0, 2.0])), [1.0, 2.0])


@pytest.mark.parametrize("r, kappa", [(16.0, 12.6e3), (18.1, 8.71e3)])
def test_dipolar_calibration_pairs(r, kappa):
    assert dipolar_coupling(r) == pytest.approx(kappa, rel=0.02)


@given(st.floats(min_value=1.0, max_value=200.0))
def test_dipolar_distance_inverts_coupling(r):
    assert dipolar_distance(dipolar_coupling(r)) == pytest.approx(r, rel=1e-12)


@given(st.floats(min_value=2.0, max_value=100.0), st.floats(min_value=1.01, max_value=3.0))
def test_dipolar_inverse_cube(r, scale):
    assert dipolar_coupling(r) / dipolar_coupling(r * scale) == pytest.approx(scale**3, rel=1e-12)


def test_dipolar_rejects_nonpositive():
    with pytest.raises(ValueError):
        dipolar_coupling(0.0)
    with pytest.raises(ValueError):
        dipolar_distance(-1.0)


def _tensor_oracle(a_par, a_perp):
    """Rotate the axial tensor to a tetrahedral axis and read off the S_z row."""
    cos_t = -1.0 / 3.0
    sin_t = math.sqrt(1 - cos_t**2)
    axis = np.array([sin_t, 0.0, cos_t])
    A = a_perp * np.eye(3) + (a_par - a_perp) * np.outer(axis, axis)
    return A[2]


def test_rotated_hyperfine_matches_tensor_rotation():
    hf = rotated_hyperfine(JTAxis.TILTED2)
    row = _tensor_oracle(DEFAULT_CONSTANTS.n_hyperfine_par, DEFAULT_CONSTANTS.n_hyperfine_perp)
    # the in-plane orientation of the tilt is a gauge choice; magnitudes are not
    assert hf.gamma == pytest.approx(row[2], rel=1e-12)
    assert math.hypot(hf.alpha, hf.beta) == pytest.approx(math.hypot(row[0], row[1]), rel=1e-12)


def test_rotated_hyperfine_published_values():
    hf = rotated_hyperfine(JTAxis.TILTED1)
    assert hf.alpha / 1e6 == pytest.approx(-7.2, abs=0.1)
    assert hf.beta / 1e6 == pytest.approx(-12.5, abs=0.1)
    assert hf.gamma / 1e6 == pytest.approx(-118.9, abs=0.1)


def test_parallel_axis_is_diagonal():
    hf = rotated_hyperfine(JTAxis.PARALLEL)
    assert (hf.alpha, hf.beta) == (0.0, 0.0)
    assert hf.gamma == DEFAULT_CONSTANTS.n_hyperfine_par
    assert tuple(hf) == (0.0, 0.0, hf.gamma)


@pytest.mark.parametrize("axis", [JTAxis.TILTED1, JTAxis.TILTED2, JTAxis.TILTED3])
def test_tilted_axes_equivalent(axis):
    assert rotated_hyperfine(axis) == rotated_hyperfine(JTAxis.TILTED1)


def test_impurity_offsets():
    exact = impurity_line_offsets()
    rounded = impurity_line_offsets(rounded=True)
    assert rounded == (-80e6, -60e6, 60e6, 80e6)
    assert exact == tuple(sorted(exact))
    np.testing.assert_allclose(exact, rounded, atol=1e6)


def test_hyperfine_shift_signs():
    up = core.hyperfine_shift(nitrogen(JTAxis.PARALLEL, 0.5))
    down = core.hyperfine_shift(nitrogen(JTAxis.PARALLEL, -0.5))
    assert up == -down == pytest.approx(DEFAULT_CONSTANTS.n_hyperfine_par / 2)
    with pytest.raises(ValueError):
        core.hyperfine_shift(core.NV_ELECTRON)


def test_species_validation():
    assert core.NV_ELECTRON.dim == 3
    assert core.NV_QUBIT.dim == 2
    assert nitrogen().dim == 2
    with pytest.raises(ValueError):
        SpinSpecies(SpinKind.NITROGEN_ELECTRON)
    with pytest.raises(ValueError):
        SpinSpecies(SpinKind.NUCLEAR, jt_axis=JTAxis.PARALLEL, nuclear_state=0.5)
    with pytest.raises(ValueError):
        nitrogen(nuclear_state=1.0)
    with pytest.raises(ValueError):
        SpinSpecies(SpinKind.NUCLEAR, qubit=True)


def test_arrhenius_points():
    assert jt_relaxation_rate(300.0) == pytest.approx(0.6833, rel=1e-3)
    assert 1.0 / jt_relaxation_rate(250.0) > 10.0
    with pytest.raises(ValueError):
        jt_relaxation_rate(0.0)


@given(st.floats(min_value=150.0, max_value=400.0), st.floats(min_value=1.0, max_value=50.0))
def test_arrhenius_monotone(T, dT):
    assert jt_relaxation_rate(T + dT) > jt_relaxation_rate(T)


def test_measured_t1_kept_separate():
    assert core.MEASURED_ROOM_TEMPERATURE_T1_N == 2e-3
    assert 1.0 / jt_relaxation_rate(300.0) > 100 * core.MEASURED_ROOM_TEMPERATURE_T1_N


def test_system_spec_gradient():
    spec = SystemSpec()
    assert spec.field_at(10.0) - spec.field_at(0.0) == pytest.approx(spec.gradient * 10e-9)
    assert spec.gradient_per_row == pytest.approx(
        spec.constants.electron_gyro * spec.gradient * spec.row_pitch * 1e-9)
    swapped = spec.with_constants(dipolar_prefactor=26.0e6)
    assert swapped.constants.dipolar_prefactor == 26.0e6
    assert spec.constants.dipolar_prefactor == 52.0e6


def test_constants_override():
    c = PhysicalConstants(angular_factor=0.5)
    assert dipolar_coupling(16.0, c) == pytest.approx(0.5 * dipolar_coupling(16.0))

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvbus import protocols as P
from nvbus import spin
from nvbus.dynamics import process_fidelity
from nvbus.hamiltonians import ChainSpec, chain_mode_energies

KAPPA = 10e3


# ---------------------------------------------------------------- register

def test_gate_constants():
    np.testing.assert_array_equal(P.FSWAP, P.SWAP @ P.CZ)
    assert P.cp_wait_time() == pytest.approx(1 / 6e6)


def test_ideal_register_gates():
    for report in (P.gate_ce_not_n(), P.gate_cn_not_e(), P.gate_register_swap()):
        assert report.fidelity == pytest.approx(1.0, abs=1e-12), report.protocol
    assert P.gate_register_swap().duration > 0


def test_finite_rabi_cnot():
    # the off-resonant manifold (3 MHz away) picks up a deterministic phase and a little leakage
    r = P.gate_ce_not_n(rabi=100e3)
    assert r.fidelity == pytest.approx(0.49983, abs=1e-4)
    assert r.extras["leakage"] == pytest.approx(7.601e-7, rel=1e-3)
    assert 1 - r.extras["phase_corrected_fidelity"] == pytest.approx(r.extras["leakage"] / 2, rel=0.05)
    assert r.duration == pytest.approx(5e-6)


@given(st.floats(min_value=1e3, max_value=1e6))
def test_cnot_leakage_grows_with_rabi(rabi):
    a = P.gate_ce_not_n(rabi=rabi).extras["leakage"]
    assert a <= (rabi / 3e6) ** 2 * 1.0001


def test_cp_phase_gate():
    cp = P.hyperfine_cp()
    assert process_fidelity(cp, P.CZ) == pytest.approx(1.0, abs=1e-12)


def test_report_json_roundtrip():
    rec = json.loads(P.gate_register_swap().to_json())
    assert rec["protocol"] == "register-SWAP" and rec["fidelity"] == pytest.approx(1.0)


# ---------------------------------------------------------------- adiabatic swap

def test_ramp_profile_endpoints():
    r = P.optimal_ramp(KAPPA, 20 / KAPPA)
    d0, d1 = r.detuning(0.0), r.detuning(r.duration)
    assert d0 == pytest.approx(-d1)
    w0 = r.schedule(0.0)
    assert w0[0] - w0[1] == pytest.approx(d0)
    with pytest.raises(ValueError):
        P.optimal_ramp(KAPPA, 0.0)


def test_pair_swap_realises_fermionic_swap():
    r = P.adiabatic_pair_swap(KAPPA, P.optimal_ramp(KAPPA, 20 / KAPPA))
    assert r.fidelity > 0.9999
    assert process_fidelity(r.unitary, P.SWAP) < 0.5


def test_pair_swap_windowed_scaling():
    ts = np.array([10.0, 20.0, 40.0]) / KAPPA
    inf = [P.windowed_pair_infidelity(KAPPA, t) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(inf), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.3)


@pytest.mark.parametrize("scale", [0.7, 1.3])
def test_pair_swap_robust_to_coupling_error(scale):
    ramp = P.optimal_ramp(KAPPA, 40 / KAPPA)
    f0 = P.adiabatic_pair_swap(KAPPA, ramp).fidelity
    assert abs(P.adiabatic_pair_swap(KAPPA * scale, ramp).fidelity - f0) < 1e-3


def test_spectator_leakage_small_when_parked_far():
    ramp = P.optimal_ramp(KAPPA, 20 / KAPPA)
    r = P.adiabatic_pair_swap(KAPPA, ramp, delta_next=20 * KAPPA)
    assert r.extras["leakage"] < 1e-2


def test_sequential_swap_moves_excitation():
    r = P.sequential_swap(ChainSpec.uniform(3, KAPPA), 30 / KAPPA)
    assert r.fidelity > 0.99
    assert r.duration == pytest.approx(3 * 30 / KAPPA)


def test_sequential_swap_dense_and_quadratic_agree():
    chain = ChainSpec.uniform(3, KAPPA)
    a = P.sequential_swap(chain, 8 / KAPPA, mode="dense").fidelity
    b = P.sequential_swap(chain, 8 / KAPPA, mode="quadratic").fidelity
    assert a == pytest.approx(b, abs=1e-7)


# ---------------------------------------------------------------- FFST

@pytest.mark.parametrize("n, modes", [(4, (2, 3)), (5, (3,)), (6, (3, 4)), (7, (4,))])
def test_fastest_modes(n, modes):
    assert P.fastest_modes(n) == modes
    ends = [abs(math.sin(k * math.pi / (n + 1))) for k in range(1, n + 1)]
    assert all(ends[k - 1] == pytest.approx(max(ends)) for k in modes)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=9), st.data())
def test_ffst_tuning_resonance(n, data):
    k = data.draw(st.integers(min_value=1, max_value=n))
    energies = chain_mode_energies(n, KAPPA)
    spacing = np.min(np.abs(np.delete(energies, k - 1) - energies[k - 1]))
    g = data.draw(st.floats(min_value=1e-3, max_value=0.2)) * spacing
    t = P.ffst_tune(n, KAPPA, k, g)
    lhs = t.delta + 2 * t.omega**2 / t.delta - t.omega_n
    assert lhs == pytest.approx(t.mode_energy, abs=1e-6 * KAPPA)
    assert 2 * math.sqrt(2) * KAPPA * t.omega / t.delta == pytest.approx(g)


def test_ffst_tune_guards():
    with pytest.raises(P.SelectivityError):
        P.ffst_tune(4, KAPPA, 3, KAPPA)
    with pytest.warns(UserWarning):
        P.ffst_tune(4, KAPPA, 3, 0.3 * (chain_mode_energies(4, KAPPA)[1] - chain_mode_energies(4, KAPPA)[2]))
    with pytest.raises(ValueError):
        P.ffst_tune(4, KAPPA, 0, 0.05 * KAPPA)


def test_ffst_round_trip_fidelity():
    t = P.ffst_tune(4, KAPPA, 3, 0.05 * KAPPA)
    r = P.ffst_transfer(t)
    assert r.fidelity >= 0.99
    assert r.extras["transfer_probability"] > 0.99


@pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
def test_ffst_selectivity_between_modes(n):
    k = P.fastest_modes(n)[-1]
    t = P.ffst_tune(n, KAPPA, k, 0.05 * KAPPA)
    on = P.ffst_transfer(t, unpolarized=False).extras["transfer_probability"]
    off = P.ffst_transfer(t, detune=0.5 * t.mode_spacing, unpolarized=False).extras["transfer_probability"]
    assert on > 0.95
    assert off < 0.06


# ---------------------------------------------------------------- remote gate

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_remote_gate_disentangles(n):
    r = P.remote_gate_circuit(n)
    assert r.fidelity == pytest.approx(1.0, abs=1e-10)
    assert r.extras["map_spread"] < 1e-6


def test_remote_gate_negative_control():
    h = np.kron(spin.HADAMARD, np.eye(2))
    r = P.remote_gate_circuit(3, middle_gate=h)
    assert r.extras["map_spread"] > 0.1


def test_ideal_single_particle_map_is_unitary_involution_up_to_sign():
    u = P.ideal_ffst_single_particle(4, 3)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(6), atol=1e-12)
    np.testing.assert_allclose(u @ u, np.eye(6), atol=1e-12)


# ---------------------------------------------------------------- auxiliary protocols

def test_map_nuclear_to_dressed_needs_slow_ramp():
    slow = P.map_nuclear_to_dressed()
    fast = P.map_nuclear_to_dressed(ramp_time=0.3 / 285e3)
    assert 1 - slow.fidelity < 1e-6
    assert fast.fidelity < 0.99


def test_directionality():
    rep = P.directionality_margin(4, 6, 12.6e3, 105.0)
    assert rep.separation == pytest.approx(1050.0)
    assert rep.leakage < 0.05 and not rep.flagged
    with pytest.warns(UserWarning):
        assert P.directionality_margin(5, 5, 12.6e3, 100.0).flagged


def test_disorder_compensation_helps():
    rng = np.random.default_rng(7)
    couplings = KAPPA * (1 + 0.2 * rng.uniform(-1, 1, 4))
    rep = P.disorder_compensation(couplings, 0.05 * KAPPA)
    assert rep.fidelity > rep.baseline_fidelity
    assert rep.fidelity > 0.99


def test_localized_mode_rejected():
    with pytest.raises(P.LocalizationError):
        P.disorder_compensation([KAPPA, 1e-6 * KAPPA, KAPPA, KAPPA], 0.01 * KAPPA, threshold=0.2)

"""Time evolution, echo schedules and fidelity metrics.

Phases follow ``U = exp(-2 pi i H t)`` with ``H`` in Hz.  Time-dependent
models are integrated with the fourth-order Magnus scheme on Gauss-Legendre
nodes; each step exponential comes from a Hermitian eigendecomposition, so
the propagator is unitary to rounding error regardless of step size.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import spin
from .core import TWO_PI
from .hamiltonians import Form, HamiltonianModel, HilbertLayout

NORM_TOL = 1e-6
DT_FACTOR = 0.02
DT_LIMIT = 0.1
_GAUSS = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)
_STACK_BUDGET = 1 << 22  # complex entries per batched chunk


class IntegrationError(RuntimeError):
    """Propagation lost unitarity beyond tolerance; try a smaller dt."""


@dataclass(frozen=True)
class StateVector:
    layout: HilbertLayout
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class QuadraticState:
    """Single-particle propagator plus the vacuum phase of the offset."""

    mode_matrix: np.ndarray
    vacuum_phase: complex = 1.0

    def single_excitation_amplitudes(self, psi0: np.ndarray) -> np.ndarray:
        return self.vacuum_phase * (self.mode_matrix @ psi0)


def spectral_propagator(H: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * TWO_PI * w * t)) @ v.conj().T


def max_frequency(model: HamiltonianModel, t0: float, t1: float, samples: int = 33) -> float:
    """Upper bound on the spectral radius over ``[t0, t1]`` (sampled)."""
    Hs = model.at_times(np.linspace(t0, t1, samples))
    return float(np.abs(Hs).sum(axis=-1).max())


def default_dt(model: HamiltonianModel, t0: float, t1: float) -> float:
    f = max_frequency(model, t0, t1)
    return DT_FACTOR / f if f > 0 else (t1 - t0)


def _tree_product(U: np.ndarray) -> np.ndarray:
    """``U[n-1] @ ... @ U[0]`` by pairwise reduction."""
    while U.shape[0] > 1:
        if U.shape[0] % 2:
            U = np.concatenate([U, np.eye(U.shape[1])[None]], axis=0)
        U = U[1::2] @ U[0::2]
    return U[0]


def _magnus_steps(model: HamiltonianModel, starts: np.ndarray, h: float) -> np.ndarray:
    H1 = model.at_times(starts + _GAUSS[0] * h)
    H2 = model.at_times(starts + _GAUSS[1] * h)
    K1, K2 = TWO_PI * H1, TWO_PI * H2
    comm = K2 @ K1 - K1 @ K2
    M = 0.5 * h * (K1 + K2) - 1j * (math.sqrt(3.0) / 12.0) * h * h * comm
    w, v = np.linalg.eigh(M)
    return (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def propagator(model: HamiltonianModel, t_final: float, dt: float | None = None, t0: float = 0.0) -> np.ndarray:
    """Unitary from ``t0`` to ``t_final`` (matrix of the model's own form)."""
    span = t_final - t0
    if span < 0:
        raise ValueError("t_final precedes t0")
    if span == 0:
        return np.eye(model.dim, dtype=complex)
    if model.is_static:
        return spectral_propagator(model.static_part, span)
    f_max = max_frequency(model, t0, t_final)
    if dt is None:
        dt = DT_FACTOR / f_max if f_max > 0 else span
    elif dt * f_max > DT_LIMIT:
        raise ValueError(f"dt={dt:g} does not resolve f_max={f_max:g} (need dt <= {DT_LIMIT}/f_max)")
    n = max(1, math.ceil(span / dt - 1e-9))
    h = span / n
    chunk = max(1, _STACK_BUDGET // model.dim**2)
    U = np.eye(model.dim, dtype=complex)
    for s in range(0, n, chunk):
        starts = t0 + h * np.arange(s, min(n, s + chunk))
        U = _tree_product(_magnus_steps(model, starts, h)) @ U
    drift = np.abs(U.conj().T @ U - np.eye(model.dim)).max()
    if drift > NORM_TOL:
        raise IntegrationError(f"unitarity drift {drift:.2e}; reduce dt")
    return U


def vacuum_phase(model: HamiltonianModel, t_final: float, t0: float = 0.0, dt: float | None = None) -> complex:
    """``exp(-2 pi i int offset dt)`` for a quadratic model."""
    if model.is_static:
        return complex(np.exp(-1j * TWO_PI * model.offset * (t_final - t0)))
    dt = dt or default_dt(model, t0, t_final)
    n = max(1, math.ceil((t_final - t0) / dt))
    h = (t_final - t0) / n
    starts = t0 + h * np.arange(n)
    integral = 0.5 * h * sum(np.sum(model.offset_at(starts + g * h)) for g in _GAUSS)
    return complex(np.exp(-1j * TWO_PI * integral))


def evolve_dense(model: HamiltonianModel, psi0, t_final: float, dt: float | None = None, t0: float = 0.0) -> StateVector:
    """Propagate a state vector (or a matrix of column states) under a dense model."""
    if model.form is not Form.DENSE:
        raise ValueError("evolve_dense needs a dense model")
    psi0 = np.asarray(psi0, dtype=complex)
    psi = propagator(model, t_final, dt, t0) @ psi0
    before = np.linalg.norm(psi0, axis=0)
    if np.abs(np.linalg.norm(psi, axis=0) - before).max() > NORM_TOL:
        raise IntegrationError("norm drift exceeds tolerance; reduce dt")
    return StateVector(model.layout, psi)


def evolve_quadratic(model: HamiltonianModel, t_final: float, dt: float | None = None, t0: float = 0.0) -> QuadraticState:
    """Single-particle propagator of a quadratic model, no dense construction."""
    if model.form is not Form.QUADRATIC:
        raise ValueError("evolve_quadratic needs a quadratic model")
    u = propagator(model, t_final, dt, t0)
    return QuadraticState(u, vacuum_phase(model, t_final, t0, dt))


@dataclass(frozen=True)
class EchoSchedule:
    """Instantaneous pi flips of site sets at given times.

    ``axis`` selects the flip operator: ``"x"`` for lab-frame spin flips,
    ``"z"`` for flips seen in a frame rotating with the drive, where a
    lab pi pulse about x acts as a z rotation.
    """

    events: tuple[tuple[float, frozenset], ...]
    total_time: float
    axis: str = "x"

    def __post_init__(self):
        events = tuple((float(t), frozenset(s)) for t, s in self.events)
        object.__setattr__(self, "events", events)
        times = [t for t, _ in events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("echo events must be time-ordered")
        if times and (times[0] < 0 or times[-1] > self.total_time):
            raise ValueError("echo events must lie within [0, total_time]")
        if self.axis not in ("x", "z"):
            raise ValueError("axis must be 'x' or 'z'")

    def flip_operator(self, layout: HilbertLayout, sites) -> np.ndarray:
        if any(d != 2 for d in layout.dims):
            raise ValueError("echo flips need spin-1/2 sites")
        pauli = spin.PAULI_X if self.axis == "x" else spin.PAULI_Z
        return spin.kron_all([pauli if i in sites else spin.ID2 for i in range(len(layout.dims))])

    def then(self, other: "EchoSchedule") -> "EchoSchedule":
        shifted = tuple((t + self.total_time, s) for t, s in other.events)
        return EchoSchedule(self.events + shifted, self.total_time + other.total_time, self.axis)


def schedule_propagator(model: HamiltonianModel, schedule: EchoSchedule, dt: float | None = None) -> np.ndarray:
    """Piecewise propagator with the schedule's flips interleaved."""
    U = np.eye(model.dim, dtype=complex)
    t = 0.0
    for when, sites in schedule.events:
        U = propagator(model, when, dt, t) @ U
        U = schedule.flip_operator(model.layout, sites) @ U
        t = when
    return propagator(model, schedule.total_time, dt, t) @ U


def apply_echo_schedule(model: HamiltonianModel, schedule: EchoSchedule, psi0, dt: float | None = None) -> StateVector:
    psi = schedule_propagator(model, schedule, dt) @ np.asarray(psi0, dtype=complex)
    return StateVector(model.layout, psi)


def _as_projector(subspace, dim: int) -> np.ndarray:
    if subspace is None:
        return np.eye(dim)
    sub = np.asarray(subspace)
    if sub.ndim == 1:
        P = np.zeros((dim, dim))
        P[sub, sub] = 1.0
        return P
    return sub


def process_fidelity(U_actual, U_target, subspace=None) -> float:
    """Entanglement fidelity ``|Tr(P V+ U P)|^2 / d_P^2``.

    ``subspace`` is a projector, a list of basis indices, or ``None`` for
    the whole space.  Insensitive to global phase.
    """
    U, V = np.asarray(U_actual), np.asarray(U_target)
    if U.shape != V.shape:
        raise ValueError(f"dimension mismatch {U.shape} vs {V.shape}")
    P = _as_projector(subspace, U.shape[0])
    d = np.real(np.trace(P))
    return float(min(1.0, abs(np.trace(P @ V.conj().T @ U @ P)) ** 2 / d**2))


def _chain_states(n_chain: int, samples: int | None, rng) -> np.ndarray:
    if n_chain <= 8 and samples is None:
        return np.arange(2**n_chain)
    samples = max(256, samples or 256)
    rng = np.random.default_rng(rng)
    return rng.integers(0, 2**n_chain, size=samples)


def channel_fidelities(U, n_sites, r_in, r_out, env_sites, env_states, fixed=None, target=None) -> np.ndarray:
    """Entanglement fidelity of the qubit map ``r_in -> r_out`` per environment state.

    ``env_states`` are integers whose bits (most significant first) set the
    initial values of ``env_sites``; ``fixed`` maps further sites to bits.
    """
    V = np.eye(2) if target is None else np.asarray(target)
    fixed = fixed or {}
    base = sum(spin.bit(n_sites, s) for s, b in fixed.items() if b)
    env_bits = np.zeros(len(env_states), dtype=np.int64)
    for k, s in enumerate(env_sites):
        on = (np.asarray(env_states) >> (len(env_sites) - 1 - k)) & 1
        env_bits |= on * spin.bit(n_sites, s)
    cols0 = base | env_bits
    cols1 = cols0 | spin.bit(n_sites, r_in)
    out = np.stack([U[:, cols0], U[:, cols1]], axis=-1)  # (dim, samples, q)
    out = out.reshape((2,) * n_sites + out.shape[1:])
    out = np.moveaxis(out, r_out, 0).reshape(2, -1, len(env_states), 2)  # (p, env_out, samples, q)
    overlap = np.einsum("pq,pesq->es", V.conj(), out)
    return (np.abs(overlap) ** 2).sum(axis=0) / 4.0


def transfer_fidelity_unpolarized(
    U, n_chain: int, round_trip: bool = False, target=None, samples: int | None = None, rng=None
) -> float:
    """Chain-averaged entanglement fidelity of the NV1 -> NV2 (or NV1 -> NV1) map.

    ``U`` acts on ``NV1 x chain x NV2``.  The other NV starts in ``|0>``;
    chain spins are averaged over all computational states for ``N <= 8``
    (or over at least 256 seeded samples when ``samples`` is given or N > 8).
    """
    n = n_chain + 2
    states = _chain_states(n_chain, samples, rng)
    r_out = 0 if round_trip else n - 1
    fixed = {n - 1: 0}
    f = channel_fidelities(np.asarray(U), n, 0, r_out, list(range(1, n_chain + 1)), states, fixed, target)
    return float(f.mean())


def local_z_calibration(M: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    """Remove single-qubit Z phases from a two-qubit map.

    Phases are read off the images of ``|00>, |01>, |10>`` relative to the
    target; the ``|11>`` phase is left alone so controlled phases survive.
    Returns the corrected map and ``(phi_first, phi_second)``.
    """
    theta = np.zeros(4)
    for b in range(4):
        o = int(np.argmax(np.abs(target[:, b])))
        theta[o] = np.angle(np.conj(target[o, b]) * M[o, b])
    a_second, a_first = theta[1] - theta[0], theta[2] - theta[0]
    x, y = np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1])
    D = np.diag(np.exp(-1j * (x * a_first + y * a_second)))
    return D @ M, (float(a_first), float(a_second))


def site_populations(state: np.ndarray, n_sites: int) -> np.ndarray:
    """Excitation probability of each spin-1/2 site."""
    p = np.abs(np.asarray(state)) ** 2
    idx = np.arange(p.size)
    return np.array([p[(idx & spin.bit(n_sites, i)) > 0].sum() for i in range(n_sites)])


def trajectory(model: HamiltonianModel, psi0, times, dt: float | None = None) -> np.ndarray:
    """Site populations at each requested time (dense, spin-1/2 layouts)."""
    n = len(model.layout.sites)
    psi = np.asarray(psi0, dtype=complex)
    out, t = [], 0.0
    for tt in times:
        psi = propagator(model, tt, dt, t) @ psi
        t = tt
        out.append(site_populations(psi, n))
    return np.array(out)


def trajectory_csv(times, populations, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"p{i}" for i in range(np.shape(populations)[1])])
    for t, row in zip(times, populations):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text

"""Hamiltonian builders on labelled tensor-product spaces.

Every builder returns an immutable :class:`HamiltonianModel`.  Dense models
hold full matrices (frequency units, Hz).  Quadratic models hold the
single-particle coefficient matrix ``h`` of an excitation-conserving XX
chain, ``H = sum_ij h_ij c+_i c_j + offset``, so that the single-excitation
energies are ``eigvalsh(h) + offset``.

Coupling convention: ``kappa`` is always the flip-flop coefficient of
``kappa (S+_i S-_j + h.c.)``; the secular Ising form of the same pair is
``4 kappa S_z S_z``.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import spin
from .core import (
    NUCLEUS,
    NV_ELECTRON,
    NV_QUBIT,
    JTAxis,
    SpinSpecies,
    SystemSpec,
    dipolar_coupling,
    hyperfine_shift,
    nitrogen,
    rotated_hyperfine,
)

DENSE_DIM_CAP = 4096
HERMITIAN_RTOL = 1e-12


class DimensionError(ValueError):
    """Requested dense construction exceeds the dimension cap."""


class Form(enum.Enum):
    DENSE = "dense"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class HilbertLayout:
    sites: tuple[SpinSpecies, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.sites)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def check_cap(self, cap: int = DENSE_DIM_CAP) -> None:
        if self.total_dim > cap:
            raise DimensionError(
                f"dense dimension {self.total_dim} exceeds cap {cap}; use the quadratic form"
            )


@dataclass(frozen=True)
class DroppedTerm:
    """A term removed by a secular approximation and the gap protecting it."""

    name: str
    amplitude: float
    splitting: float

    @property
    def ratio(self) -> float:
        if self.amplitude == 0:
            return 0.0
        if self.splitting == 0:
            return math.inf
        return (self.amplitude / self.splitting) ** 2


@dataclass(frozen=True)
class DriveTerm:
    """``envelope(t) * operator``; ``offset`` scales the envelope's vacuum shift."""

    operator: np.ndarray
    envelope: Callable
    offset: float = 0.0


@dataclass(frozen=True)
class HamiltonianModel:
    layout: HilbertLayout
    static_part: np.ndarray
    drive_parts: tuple[DriveTerm, ...] = ()
    form: Form = Form.DENSE
    offset: float = 0.0
    dropped: tuple[DroppedTerm, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for op in (self.static_part, *(d.operator for d in self.drive_parts)):
            if hermiticity_error(op) > HERMITIAN_RTOL:
                raise ValueError("operator is not Hermitian")

    @property
    def is_static(self) -> bool:
        return not self.drive_parts

    @property
    def dim(self) -> int:
        return self.static_part.shape[0]

    def at(self, t: float) -> np.ndarray:
        H = self.static_part.astype(complex if np.iscomplexobj(self.static_part) else float)
        for d in self.drive_parts:
            H = H + d.envelope(t) * d.operator
        return H

    def at_times(self, ts) -> np.ndarray:
        """Stack of ``H(t)`` for an array of times, envelopes evaluated vectorised."""
        ts = np.asarray(ts, dtype=float)
        H = np.broadcast_to(self.static_part, (ts.size, *self.static_part.shape)).copy()
        for d in self.drive_parts:
            amp = np.broadcast_to(np.asarray(d.envelope(ts), dtype=float), ts.shape)
            H = H + amp[:, None, None] * d.operator
        return H

    def offset_at(self, t) -> float:
        return self.offset + sum(d.offset * d.envelope(t) for d in self.drive_parts)

    def single_excitation_block(self, t: float = 0.0) -> np.ndarray:
        """Single-excitation sector of an XX-type model, in site order."""
        if self.form is Form.QUADRATIC:
            return self.at(t) + self.offset_at(t) * np.eye(self.dim)
        n = len(self.layout.sites)
        idx = spin.single_excitation_indices(n)
        return self.at(t)[np.ix_(idx, idx)]


def hermiticity_error(op: np.ndarray) -> float:
    op = np.asarray(op)
    scale = max(np.abs(op).max(), 1e-300)
    return float(np.abs(op - op.conj().T).max() / scale)


@dataclass(frozen=True)
class ChainSpec:
    """Chain parameters in Hz.

    ``end_fields`` are the on-site fields of the two NV end sites used by
    the state-transfer model; plain driven chains ignore them.
    """

    n_chain: int
    couplings: tuple[float, ...]
    end_couplings: tuple[float, float] = (0.0, 0.0)
    on_site: tuple[float, ...] | None = None
    end_fields: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(float(k) for k in self.couplings))
        if self.on_site is None:
            object.__setattr__(self, "on_site", (0.0,) * self.n_chain)
        object.__setattr__(self, "on_site", tuple(float(x) for x in self.on_site))
        if self.n_chain < 1:
            raise ValueError("n_chain must be at least 1")
        if len(self.couplings) != self.n_chain - 1:
            raise ValueError(f"need {self.n_chain - 1} couplings, got {len(self.couplings)}")
        if len(self.on_site) != self.n_chain:
            raise ValueError(f"need {self.n_chain} on-site terms, got {len(self.on_site)}")
        if any(not k > 0 for k in self.couplings):
            raise ValueError("chain couplings must be positive")

    @classmethod
    def uniform(cls, n_chain: int, kappa: float, **kw) -> "ChainSpec":
        return cls(n_chain, (kappa,) * (n_chain - 1), **kw)


def _xx_model(sites, couplings, fields, form, envelopes=None, dim_cap=DENSE_DIM_CAP, meta=None):
    n = len(sites)
    layout = HilbertLayout(tuple(sites))
    envelopes = envelopes or {}
    static_fields = [0.0 if i in envelopes else f for i, f in enumerate(fields)]
    form = Form(form)
    if form is Form.QUADRATIC:
        h = np.diag(np.asarray(static_fields, dtype=float))
        idx = np.arange(n - 1)
        h[idx, idx + 1] = h[idx + 1, idx] = couplings
        drives = []
        for i, env in sorted(envelopes.items()):
            op = np.zeros((n, n))
            op[i, i] = 1.0
            drives.append(DriveTerm(op, env, offset=-0.5))
        return HamiltonianModel(layout, h, tuple(drives), form, -0.5 * sum(static_fields), meta=meta or {})
    layout.check_cap(dim_cap)
    H = spin.xx_chain_dense(couplings, static_fields, n)
    drives = tuple(
        DriveTerm(np.diag(spin.sz_dense_diagonal(n, i)), env) for i, env in sorted(envelopes.items())
    )
    return HamiltonianModel(layout, H, drives, form, meta=meta or {})


def build_driven_chain(chain: ChainSpec, form="dense", envelopes=None, dim_cap=DENSE_DIM_CAP):
    """Rotating-frame XX chain ``sum kappa_i (S+S- + h.c.) + sum Omega_i S_z``.

    ``envelopes`` maps a site index to a time-dependent ``Omega_i(t)`` that
    replaces the static on-site value there.
    """
    sites = [nitrogen()] * chain.n_chain
    return _xx_model(sites, chain.couplings, chain.on_site, form, envelopes, dim_cap, {"builder": "driven_chain"})


def build_ffst_hamiltonian(chain: ChainSpec, form="dense", envelopes=None, dim_cap=DENSE_DIM_CAP):
    """NV1 - chain - NV2 XX model; site 0 and site N+1 are the NV qubits."""
    g_l, g_r = chain.end_couplings
    couplings = (g_l, *chain.couplings, g_r)
    fields = (chain.end_fields[0], *chain.on_site, chain.end_fields[1])
    sites = [NV_QUBIT] + [nitrogen()] * chain.n_chain + [NV_QUBIT]
    return _xx_model(sites, couplings, fields, form, envelopes, dim_cap, {"builder": "ffst"})


def chain_mode_energies(n: int, kappa: float) -> np.ndarray:
    """Closed-form single-fermion energies ``2 kappa cos(k pi/(N+1))``, k = 1..N."""
    k = np.arange(1, n + 1)
    return 2.0 * kappa * np.cos(k * np.pi / (n + 1))


def chain_mode_amplitudes(n: int, k: int) -> np.ndarray:
    """Normalised eigenvector of mode ``k`` of the uniform chain."""
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(j * k * np.pi / (n + 1))


def build_register_hamiltonian(spec: SystemSpec, B: float | None = None) -> HamiltonianModel:
    """NV electron (m_s = -1, 0, +1) times 15N nucleus (down, up), diagonal."""
    c = spec.constants
    B = spec.B0 if B is None else B
    dims = (3, 2)
    H = (
        c.zero_field_splitting * spin.embed(spin.SZ1 @ spin.SZ1, 0, dims)
        + c.electron_gyro * B * spin.embed(spin.SZ1, 0, dims)
        + c.nuclear_gyro * B * spin.embed(spin.SZ, 1, dims)
        + c.nv_hyperfine * spin.embed_pair(spin.SZ1, 0, spin.SZ, 1, dims)
    )
    ze = c.electron_gyro * B
    dropped = (
        DroppedTerm(
            "transverse hyperfine flip-flop",
            c.nv_hyperfine,
            min(abs(c.zero_field_splitting + ze), abs(c.zero_field_splitting - ze)),
        ),
    )
    return HamiltonianModel(HilbertLayout((NV_ELECTRON, NUCLEUS)), H, dropped=dropped, meta={"builder": "register", "B": B})


def register_index(ms: int, nuclear_up: bool) -> int:
    """Basis index of ``|m_s> x |nucleus>`` in the register model."""
    return 2 * (ms + 1) + int(nuclear_up)


def gradient_detuning(spec: SystemSpec, rows: float) -> float:
    """Electron Zeeman offset ``mu_e (dB/dy) dy`` across ``rows`` row pitches."""
    return spec.gradient_per_row * rows


def build_ising_pair(kappa: float, omega0: float, delta1: float, delta2: float) -> HamiltonianModel:
    """``4 kappa Sz1 Sz2 + sum (omega0 + delta_i) Sz_i`` on two spin-1/2 sites."""
    dims = (2, 2)
    H = (
        4.0 * kappa * spin.embed_pair(spin.SZ, 0, spin.SZ, 1, dims)
        + (omega0 + delta1) * spin.embed(spin.SZ, 0, dims)
        + (omega0 + delta2) * spin.embed(spin.SZ, 1, dims)
    )
    dropped = (DroppedTerm("dipolar flip-flop", abs(kappa), abs(delta1 - delta2)),)
    return HamiltonianModel(HilbertLayout((nitrogen(), nitrogen())), H, dropped=dropped, meta={"builder": "ising_pair"})


def dressed_states(omega: float, delta: float) -> dict[str, np.ndarray]:
    """Exact NV dressed states under symmetric two-tone driving.

    Returns ``B``, ``D`` and the eigenvectors ``+``/``-`` of the ``{|B>, |0>}``
    block, in the ``(-1, 0, +1)`` basis.  Signs are fixed so that ``-`` has a
    positive ``|0>`` component and ``+`` a positive ``|B>`` component.
    """
    ket = np.eye(3)
    b = (ket[2] + ket[0]) / np.sqrt(2.0)
    d = (ket[2] - ket[0]) / np.sqrt(2.0)
    # block in basis (|B>, |0>): [[-delta, -sqrt2 omega], [-sqrt2 omega, 0]]
    block = np.array([[-delta, -np.sqrt(2.0) * omega], [-np.sqrt(2.0) * omega, 0.0]])
    w, v = np.linalg.eigh(block)
    plus = v[0, 0] * b + v[1, 0] * ket[1]
    minus = v[0, 1] * b + v[1, 1] * ket[1]
    plus *= np.sign(plus @ b) or 1.0
    minus *= np.sign(minus @ ket[1]) or 1.0
    return {"B": b, "D": d, "+": plus, "-": minus, "E+": w[0], "E-": w[1], "ED": -delta}


def nitrogen_x_states() -> dict[str, np.ndarray]:
    up, down = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    return {"+": (up + down) / np.sqrt(2.0), "-": (up - down) / np.sqrt(2.0)}


def build_three_level_coupling(omega: float, delta: float, omega_n: float, kappa: float) -> HamiltonianModel:
    """Driven three-level NV times nitrogen electron in the rotating frame."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    dims = (3, 2)
    proj = np.diag([1.0, 0.0, 1.0])
    drive = np.zeros((3, 3))
    drive[1, 0] = drive[1, 2] = drive[0, 1] = drive[2, 1] = 1.0
    H = (
        -delta * spin.embed(proj, 0, dims)
        - omega * spin.embed(drive, 0, dims)
        - omega_n * spin.embed(spin.SX, 1, dims)
        + 4.0 * kappa * spin.embed_pair(spin.SZ1, 0, spin.SZ, 1, dims)
    )
    dropped = (DroppedTerm("bright-state leakage", abs(kappa), abs(delta)),)
    return HamiltonianModel(
        HilbertLayout((NV_ELECTRON, nitrogen())), H, dropped=dropped,
        meta={"builder": "three_level", "omega": omega, "delta": delta, "omega_n": omega_n, "kappa": kappa},
    )


def effective_coupling(kappa: float, omega: float, delta: float) -> float:
    """NV-chain coupling in the ``{|D>, |->}`` subspace, ``2 sqrt2 kappa Omega / Delta``."""
    return 2.0 * math.sqrt(2.0) * kappa * omega / delta


def _nitrogen_frequency(species: SpinSpecies, spec: SystemSpec, y_nm: float) -> float:
    return spec.electron_frequency(y_nm) + hyperfine_shift(species, spec.constants)


def _nuclear_flip_amplitude(jt_axis: JTAxis, spec: SystemSpec) -> tuple[float, float]:
    """Residual nuclear Zeeman flip amplitude in the rotated hyperfine basis."""
    a, b, g = rotated_hyperfine(jt_axis, spec.constants)
    if not jt_axis.tilted:
        return 0.0, abs(g)
    s2 = a * a + b * b + g * g
    amp = spec.constants.nuclear_gyro * spec.B0 * math.sqrt(
        a * a / (a * a + g * g) + b * b * g * g / ((a * a + g * g) * s2)
    )
    return amp, math.sqrt(s2)


def build_nitrogen_pair_secular(
    jt1: JTAxis,
    jt2: JTAxis,
    nuclear1: float,
    nuclear2: float,
    r: float,
    spec: SystemSpec,
    y1: float = 0.0,
    y2: float | None = None,
) -> HamiltonianModel:
    """Two nitrogen electrons with secular hyperfine shifts and Ising coupling.

    Nuclear spins are classical labels selecting the hyperfine shift.  ``y2``
    defaults to ``y1`` so that only hyperfine differences separate the lines.
    """
    y2 = y1 if y2 is None else y2
    s1, s2 = nitrogen(jt1, nuclear1), nitrogen(jt2, nuclear2)
    w1, w2 = _nitrogen_frequency(s1, spec, y1), _nitrogen_frequency(s2, spec, y2)
    kappa = dipolar_coupling(r, spec.constants)
    dims = (2, 2)
    H = (
        w1 * spin.embed(spin.SZ, 0, dims)
        + w2 * spin.embed(spin.SZ, 1, dims)
        + 4.0 * kappa * spin.embed_pair(spin.SZ, 0, spin.SZ, 1, dims)
    )
    ze = min(spec.electron_frequency(y1), spec.electron_frequency(y2))
    dropped = [
        DroppedTerm("dipolar flip-flop", kappa, abs(w1 - w2)),
        DroppedTerm("transverse hyperfine electron flip", abs(spec.constants.n_hyperfine_perp), ze),
    ]
    for i, jt in enumerate((jt1, jt2)):
        amp, gap = _nuclear_flip_amplitude(jt, spec)
        dropped.append(DroppedTerm(f"nuclear flip site {i}", amp, gap))
    return HamiltonianModel(
        HilbertLayout((s1, s2)), H, dropped=tuple(dropped),
        meta={"builder": "nitrogen_pair", "kappa": kappa, "frequencies": (w1, w2)},
    )


def build_nv_nitrogen_pair_secular(
    r: float,
    spec: SystemSpec,
    nv_nuclear: float = 0.5,
    partner: SpinSpecies | None = None,
    y_nv: float = 0.0,
    y_n: float = 0.0,
) -> HamiltonianModel:
    """NV electron (three levels) and a nitrogen electron after secular reduction."""
    partner = partner or nitrogen()
    c = spec.constants
    w_n = _nitrogen_frequency(partner, spec, y_n)
    kappa = dipolar_coupling(r, c)
    ze_nv = spec.electron_frequency(y_nv)
    dims = (3, 2)
    H = (
        c.zero_field_splitting * spin.embed(spin.SZ1 @ spin.SZ1, 0, dims)
        + (ze_nv + c.nv_hyperfine * nv_nuclear) * spin.embed(spin.SZ1, 0, dims)
        + w_n * spin.embed(spin.SZ, 1, dims)
        + 4.0 * kappa * spin.embed_pair(spin.SZ1, 0, spin.SZ, 1, dims)
    )
    w_nv = c.zero_field_splitting + ze_nv
    dropped = (
        DroppedTerm("dipolar flip-flop", kappa, abs(w_nv - w_n)),
        DroppedTerm("NV electron flip", kappa, abs(w_nv)),
        DroppedTerm("nitrogen electron flip", kappa, abs(w_n)),
        DroppedTerm("NV hyperfine flip-flop", c.nv_hyperfine, min(abs(c.zero_field_splitting + ze_nv), abs(c.zero_field_splitting - ze_nv))),
        DroppedTerm("nitrogen transverse hyperfine", abs(c.n_hyperfine_perp), abs(w_n)),
    )
    return HamiltonianModel(
        HilbertLayout((NV_ELECTRON, partner)), H, dropped=dropped,
        meta={"builder": "nv_nitrogen_pair", "kappa": kappa},
    )


@dataclass(frozen=True)
class SecularReport:
    ratios: dict
    threshold: float

    @property
    def flagged(self) -> list[str]:
        return [k for k, v in self.ratios.items() if v > self.threshold]

    @property
    def ok(self) -> bool:
        return not self.flagged


def secular_validity(model: HamiltonianModel, threshold: float = 1e-3) -> SecularReport:
    """Squared ratios ``(dropped amplitude / protecting splitting)^2``."""
    return SecularReport({d.name: d.ratio for d in model.dropped}, threshold)


def operator_to_csv(op: np.ndarray, path=None) -> str:
    """Column-major ``row,col,real,imag`` dump of a dense operator."""
    op = np.asarray(op)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "real", "imag"])
    for j in range(op.shape[1]):
        for i in range(op.shape[0]):
            v = complex(op[i, j])
            w.writerow([i, j, repr(v.real), repr(v.imag)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def operator_from_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    n = max(int(r["row"]) for r in rows) + 1
    m = max(int(r["col"]) for r in rows) + 1
    out = np.zeros((n, m), dtype=complex)
    for r in rows:
        out[int(r["row"]), int(r["col"])] = float(r["real"]) + 1j * float(r["imag"])
    return out


def numerical_effective_coupling(kappa: float, omega: float, delta: float) -> tuple[float, float]:
    """Half the minimum avoided-crossing gap between ``|D,-N>`` and ``|-,+N>``.

    Scans ``Omega_N`` around the resonance ``Delta + 2 Omega^2 / Delta`` on
    the full six-level model.  Returns ``(coupling, Omega_N at minimum)``.
    """
    ds = dressed_states(omega, delta)
    nx = nitrogen_x_states()
    a = np.kron(ds["D"], nx["-"])
    b = np.kron(ds["-"], nx["+"])

    def gap(omega_n):
        H = build_three_level_coupling(omega, delta, omega_n, kappa).static_part
        w, v = np.linalg.eigh(H)
        weight = np.abs(a @ v) ** 2 + np.abs(b @ v) ** 2
        i, j = np.argsort(weight)[-2:]
        return abs(w[i] - w[j])

    centre = ds["E-"] - ds["ED"]  # exact dressed resonance
    width = 20.0 * effective_coupling(kappa, omega, delta) + 1e-12 * delta
    res = minimize_scalar(gap, bounds=(centre - width, centre + width), method="bounded",
                          options={"xatol": 1e-9 * delta})
    return 0.5 * res.fun, float(res.x)

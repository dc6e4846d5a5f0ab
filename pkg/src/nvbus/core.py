"""Physical constants, spin species and derived couplings.

All frequencies are linear frequencies in Hz with hbar absorbed; a phase
accumulated over time ``t`` by an energy ``f`` is ``2*pi*f*t``.  The two
helpers :func:`angular` and :func:`linear` are the only place that factor
is crossed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


def angular(f):
    """Convert a linear frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * np.asarray(f) if isinstance(f, (list, tuple)) else TWO_PI * f


def linear(w):
    """Convert an angular frequency (rad/s) back to Hz."""
    return np.asarray(w) / TWO_PI if isinstance(w, (list, tuple)) else w / TWO_PI


@dataclass(frozen=True)
class PhysicalConstants:
    """Material and spin constants in Hz-family units.

    The Zeeman coefficients are stored as positive magnitudes; the sign
    printed for them in the literature only fixes the field orientation.
    """

    zero_field_splitting: float = 2.87e9
    electron_gyro: float = 2.8e10  # Hz/T (2.8 MHz/G)
    nuclear_gyro: float = 4.3e6  # Hz/T (0.43 kHz/G)
    nv_hyperfine: float = 3.0e6
    n_hyperfine_par: float = -159.7e6
    n_hyperfine_perp: float = -113.8e6
    jt_attempt_rate: float = 4.0e12  # 1/s
    jt_activation: float = 0.76  # eV
    boltzmann: float = 8.617333e-5  # eV/K
    dipolar_prefactor: float = 52.0e6  # Hz nm^3
    angular_factor: float = 1.0


DEFAULT_CONSTANTS = PhysicalConstants()


class SpinKind(enum.Enum):
    NV_ELECTRON = "nv-electron"
    NITROGEN_ELECTRON = "nitrogen-electron"
    NUCLEAR = "nuclear"


class JTAxis(enum.Enum):
    PARALLEL = 0
    TILTED1 = 1
    TILTED2 = 2
    TILTED3 = 3

    @property
    def tilted(self) -> bool:
        return self is not JTAxis.PARALLEL


@dataclass(frozen=True)
class SpinSpecies:
    """One site of a tensor-product Hilbert space.

    ``qubit=True`` truncates an NV electron to its ``{0, +1}`` pseudo-spin
    so it can sit inside a spin-1/2 chain.
    """

    kind: SpinKind
    jt_axis: JTAxis | None = None
    nuclear_state: float | None = None
    qubit: bool = False

    def __post_init__(self):
        is_n = self.kind is SpinKind.NITROGEN_ELECTRON
        if is_n != (self.jt_axis is not None) or is_n != (self.nuclear_state is not None):
            raise ValueError("jt_axis and nuclear_state are required for, and only for, nitrogen electrons")
        if is_n and self.nuclear_state not in (0.5, -0.5):
            raise ValueError(f"nuclear_state must be +-1/2, got {self.nuclear_state}")
        if self.qubit and self.kind is not SpinKind.NV_ELECTRON:
            raise ValueError("only NV electrons can be truncated to a qubit")

    @property
    def dim(self) -> int:
        if self.kind is SpinKind.NV_ELECTRON and not self.qubit:
            return 3
        return 2


NV_ELECTRON = SpinSpecies(SpinKind.NV_ELECTRON)
NV_QUBIT = SpinSpecies(SpinKind.NV_ELECTRON, qubit=True)
NUCLEUS = SpinSpecies(SpinKind.NUCLEAR)


def nitrogen(jt_axis: JTAxis = JTAxis.PARALLEL, nuclear_state: float = 0.5) -> SpinSpecies:
    return SpinSpecies(SpinKind.NITROGEN_ELECTRON, jt_axis, nuclear_state)


@dataclass(frozen=True)
class SystemSpec:
    """Field configuration and geometry shared by the builders.

    ``B0`` in tesla, ``gradient`` in T/m, ``row_pitch`` in nm.
    """

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    B0: float = 1.0
    gradient: float = 1.0e5
    row_pitch: float = 10.0
    temperature: float = 300.0

    def __post_init__(self):
        if not self.B0 > 0:
            raise ValueError("B0 must be positive")
        if not self.row_pitch > 0:
            raise ValueError("row_pitch must be positive")

    def field_at(self, y_nm: float) -> float:
        return self.B0 + self.gradient * y_nm * 1e-9

    def electron_frequency(self, y_nm: float = 0.0) -> float:
        return self.constants.electron_gyro * self.field_at(y_nm)

    @property
    def gradient_per_row(self) -> float:
        """Electron Zeeman splitting between adjacent rows, Hz."""
        return self.constants.electron_gyro * self.gradient * self.row_pitch * 1e-9

    def with_constants(self, **kw) -> "SystemSpec":
        return replace(self, constants=replace(self.constants, **kw))


def dipolar_coupling(r_nm: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Flip-flop coupling kappa (Hz) between electron spins ``r_nm`` apart.

    The secular Ising coefficient of the same pair is ``4 * kappa``.
    """
    if not r_nm > 0:
        raise ValueError(f"separation must be positive, got {r_nm}")
    return constants.angular_factor * constants.dipolar_prefactor / r_nm**3


def dipolar_distance(kappa: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Inverse of :func:`dipolar_coupling`."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return (constants.angular_factor * constants.dipolar_prefactor / kappa) ** (1.0 / 3.0)


@dataclass(frozen=True)
class RotatedHyperfine:
    alpha: float
    beta: float
    gamma: float

    @property
    def splitting(self) -> float:
        return math.sqrt(self.alpha**2 + self.beta**2 + self.gamma**2)

    def __iter__(self):
        return iter((self.alpha, self.beta, self.gamma))


def rotated_hyperfine(jt_axis: JTAxis, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> RotatedHyperfine:
    """Secular hyperfine coefficients ``S_z (gamma I_z + alpha I_x + beta I_y)``.

    All three tilted orientations are equivalent relative to a (111) field.
    """
    a_par, a_perp = constants.n_hyperfine_par, constants.n_hyperfine_perp
    if not jt_axis.tilted:
        return RotatedHyperfine(0.0, 0.0, a_par)
    mix = (a_par - a_perp) / (3.0 * math.sqrt(3.0))
    return RotatedHyperfine(
        alpha=mix * 2.0 / math.sqrt(6.0),
        beta=mix * 2.0 / math.sqrt(2.0),
        gamma=a_par / 9.0 + 8.0 * a_perp / 9.0,
    )


def hyperfine_shift(species: SpinSpecies, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """ESR line offset of a nitrogen electron for its JT axis and nuclear state."""
    if species.kind is not SpinKind.NITROGEN_ELECTRON:
        raise ValueError("hyperfine_shift applies to nitrogen electrons only")
    return rotated_hyperfine(species.jt_axis, constants).gamma * species.nuclear_state


def impurity_line_offsets(rounded: bool = False, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> tuple[float, ...]:
    """The four nitrogen ESR offsets from the bare electron line, ascending."""
    if rounded:
        return (-80e6, -60e6, 60e6, 80e6)
    par = constants.n_hyperfine_par / 2.0
    tilt = rotated_hyperfine(JTAxis.TILTED1, constants).gamma / 2.0
    return tuple(sorted((par, -par, tilt, -tilt)))


def jt_relaxation_rate(temperature: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Arrhenius Jahn-Teller reorientation rate 1/T1 of a nitrogen (1/s)."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return constants.jt_attempt_rate * math.exp(-constants.jt_activation / (constants.boltzmann * temperature))


# Room-temperature nitrogen T1 quoted from measurement; the Arrhenius law above
# evaluates to ~1.5 s at 300 K. Both are kept, neither is derived from the other.
MEASURED_ROOM_TEMPERATURE_T1_N = 2e-3

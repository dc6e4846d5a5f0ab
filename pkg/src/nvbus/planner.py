"""Frequency allocation, lattice layout, yield estimate and refocusing schedules."""
from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import spin
from .core import DEFAULT_CONSTANTS, PhysicalConstants, dipolar_coupling, impurity_line_offsets, nitrogen
from .dynamics import EchoSchedule, propagator, schedule_propagator
from .hamiltonians import HamiltonianModel, HilbertLayout

COLLISION_SPACING = 1e6


# ---------------------------------------------------------------- frequency plan

@dataclass(frozen=True)
class FrequencyLine:
    row: int
    species: str
    label: str
    frequency: float


@dataclass(frozen=True)
class FrequencyPlan:
    gradient_per_row: float
    rows: int
    lines: tuple[FrequencyLine, ...]
    min_spacing: float
    closest_pair: tuple[FrequencyLine, FrequencyLine]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "species", "label", "frequency_hz"])
        for ln in self.lines:
            w.writerow([ln.row, ln.species, ln.label, repr(float(ln.frequency))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        a, b = self.closest_pair
        return {"gradient_per_row": self.gradient_per_row, "rows": self.rows, "n_lines": len(self.lines),
                "min_spacing": self.min_spacing,
                "closest_pair": [vars(a), vars(b)]}


def build_frequency_plan(gradient_per_row: float, rows: int = 64, offsets: str = "rounded",
                         nv_base: float | None = None,
                         constants: PhysicalConstants = DEFAULT_CONSTANTS) -> FrequencyPlan:
    """All ESR lines of a super-plaquette in the three-base-line picture.

    NV lines sit at ``+-nv_base`` (default the zero-field splitting) from the
    bare nitrogen line; nitrogen lines carry the four hyperfine offsets.  Each
    row adds ``gradient_per_row``.  ``min_spacing`` is exact.
    """
    if rows < 1:
        raise ValueError("rows must be at least 1")
    nv_base = constants.zero_field_splitting if nv_base is None else nv_base
    offs = impurity_line_offsets(rounded=(offsets == "rounded"), constants=constants)
    if offsets not in ("rounded", "exact"):
        raise ValueError("offsets must be 'rounded' or 'exact'")
    lines = []
    for n in range(rows):
        shift = n * gradient_per_row
        lines.append(FrequencyLine(n, "NV", "NV-", shift - nv_base))
        lines.append(FrequencyLine(n, "NV", "NV+", shift + nv_base))
        for o in offs:
            lines.append(FrequencyLine(n, "N", f"N{o / 1e6:+.2f}MHz", shift + o))
    order = sorted(lines, key=lambda ln: ln.frequency)
    gaps = [b.frequency - a.frequency for a, b in zip(order, order[1:])]
    if gaps:
        i = int(np.argmin(gaps))
        spacing, pair = gaps[i], (order[i], order[i + 1])
    else:
        spacing, pair = math.inf, (order[0], order[0])
    return FrequencyPlan(gradient_per_row, rows, tuple(lines), float(spacing), pair)


def brute_force_min_spacing(freqs) -> float:
    """Minimum over every pair; the O(n^2) oracle for the sorted scan."""
    return min(abs(a - b) for a, b in itertools.combinations(freqs, 2))


@dataclass(frozen=True)
class GradientCandidate:
    zeta: float
    gradient_per_row: float
    min_spacing: float
    admissible: bool
    collision: bool


def is_admissible(zeta_mhz: float, base_mhz: float = 3000.0, tol: float = 1e-9) -> bool:
    """Whether ``n * 3 zeta = base - zeta`` for some integer ``n``."""
    n = (base_mhz - zeta_mhz) / (3.0 * zeta_mhz)
    return abs(n - round(n)) < tol


def search_gradient(zetas_mhz, rows: int = 64, offsets: str = "rounded", nv_base: float | None = None,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS) -> list[GradientCandidate]:
    """Scan gradients ``G = 3 zeta`` MHz/row, ranked by minimum line spacing."""
    out = []
    for z in zetas_mhz:
        plan = build_frequency_plan(3.0 * z * 1e6, rows, offsets, nv_base, constants)
        out.append(GradientCandidate(float(z), 3.0 * z * 1e6, plan.min_spacing, is_admissible(z),
                                     plan.min_spacing < COLLISION_SPACING))
    if not any(c.admissible for c in out):
        warnings.warn("no admissible gradient in the scanned range", stacklevel=2)
    return sorted(out, key=lambda c: (-c.min_spacing, c.zeta))


# ---------------------------------------------------------------- layout

@dataclass(frozen=True)
class LayoutConfig:
    h: float = 6.0
    w: float = 19.0
    plaquette_x: float = 525.0
    plaquette_y: float = 650.0
    link_min: float = 19.5
    link_max: float = 20.5
    stagger: Fraction = Fraction(1, 2)  # vertical zig-zag offset in units of w
    nv_sites: int = 8

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.plaquette_x > 0 and self.plaquette_y > 0):
            raise ValueError("pitches and plaquette size must be positive")


@dataclass(frozen=True)
class Site:
    x: Fraction  # units of w
    y: int  # units of h
    role: str
    row: str
    chain: str


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    length: float
    chain: str


@dataclass(frozen=True)
class LayoutPlan:
    config: LayoutConfig
    sites: tuple[Site, ...]
    links: tuple[Link, ...]
    violations: tuple[Link, ...]
    impurities: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    def coordinates_nm(self) -> np.ndarray:
        c = self.config
        return np.array([[float(s.x) * c.w, s.y * c.h] for s in self.sites])

    def link_lengths(self, chain: str) -> np.ndarray:
        return np.array([ln.length for ln in self.links if ln.chain == chain])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index", "x_nm", "y_nm", "role", "row", "chain"])
        for i, (s, (x, y)) in enumerate(zip(self.sites, self.coordinates_nm())):
            wr.writerow([i, repr(float(x)), repr(float(y)), s.role, s.row, s.chain])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        return {
            "h": self.config.h, "w": self.config.w,
            "plaquette": [self.config.plaquette_x, self.config.plaquette_y],
            "impurities": self.impurities,
            "n_links": len(self.links),
            "violations": [vars(v) for v in self.violations],
            "link_range": [self.config.link_min, self.config.link_max],
            "diagonal_link": math.hypot(self.config.h, self.config.w),
            "return_link": math.hypot(3 * self.config.h, self.config.w / 2),
        }


SAWTOOTH = ((Fraction(0), 0, "A"), (Fraction(1), 1, "B"), (Fraction(2), 2, "C"), (Fraction(3), 3, "D"))
SAWTOOTH_PERIOD = Fraction(7, 2)  # units of w


def sawtooth_positions(n_sites: int) -> list[tuple[Fraction, int, str]]:
    """Exact ``(x / w, y / h, row)`` of the first ``n_sites`` horizontal chain sites."""
    out = []
    for i in range(n_sites):
        x, y, label = SAWTOOTH[i % 4]
        out.append((x + (i // 4) * SAWTOOTH_PERIOD, y, label))
    return out


def generate_layout(config: LayoutConfig = LayoutConfig()) -> LayoutPlan:
    """Saw-tooth horizontal chain, zig-zag vertical chain and NV candidate row."""
    c = config
    sites: list[Site] = []
    links: list[Link] = []

    def length(a: Site, b: Site) -> float:
        return math.hypot(float(b.x - a.x) * c.w, (b.y - a.y) * c.h)

    def add_chain(points, chain):
        start = len(sites)
        for x, y, row in points:
            sites.append(Site(x, y, "N-impurity", row, chain))
        for i in range(start, len(sites) - 1):
            links.append(Link(i, i + 1, length(sites[i], sites[i + 1]), chain))
        return len(sites) - start

    n_h = 0
    while (sawtooth_positions(n_h + 1)[-1][0]) * c.w <= c.plaquette_x:
        n_h += 1
    count_h = add_chain(sawtooth_positions(n_h), "horizontal")

    vertical = []
    j = 0
    while 3 * j * c.h <= c.plaquette_y:
        vertical.append((c.stagger * (j % 2), 3 * j, "V"))
        j += 1
    count_v = add_chain(vertical, "vertical")

    for k in range(c.nv_sites):
        sites.append(Site(Fraction(k), -3, "NV-candidate", "NV", "register"))

    bad = tuple(ln for ln in links if not c.link_min <= ln.length <= c.link_max)
    return LayoutPlan(c, tuple(sites), tuple(links), bad, {"horizontal": count_h, "vertical": count_v})


def sawtooth_couplings(n_sites: int, h: float = 6.0, w: float = 19.0, neighbours: int = 2,
                       constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Dipolar flip-flop couplings of a saw-tooth chain up to ``neighbours`` apart.

    Returns ``(pairs, kappas, order)`` with ``order`` 1 for nearest and 2 for
    next-nearest neighbours.
    """
    pos = [(float(x) * w, y * h) for x, y, _ in sawtooth_positions(n_sites)]
    pairs, kappas, order = [], [], []
    for d in range(1, neighbours + 1):
        for i in range(n_sites - d):
            r = math.dist(pos[i], pos[i + d])
            pairs.append((i, i + d))
            kappas.append(dipolar_coupling(r, constants))
            order.append(d)
    return pairs, kappas, order


# ---------------------------------------------------------------- yield

@dataclass(frozen=True)
class YieldReport:
    p_conversion: float
    sites_per_plaquette: int
    trials: int
    functional_fraction: float
    stderr: float
    closed_form: float
    seed: int
    target_failure: float = 1e-2

    @property
    def failure_probability(self) -> float:
        return 1.0 - self.closed_form

    @property
    def consistent(self) -> bool:
        return abs(self.functional_fraction - self.closed_form) <= 3 * max(self.stderr, 1e-15)

    @property
    def meets_target(self) -> bool:
        return self.failure_probability < self.target_failure

    def summary(self) -> dict:
        return {
            "p_conversion": self.p_conversion, "sites": self.sites_per_plaquette, "trials": self.trials,
            "seed": self.seed, "functional_fraction": self.functional_fraction, "stderr": self.stderr,
            "closed_form": self.closed_form, "failure_probability": self.failure_probability,
            "consistent_3sigma": self.consistent, "meets_failure_target": self.meets_target,
            "failure_target": self.target_failure,
        }


def yield_monte_carlo(p_conv: float = 0.4, sites: int = 8, trials: int = 100_000, seed: int = 0,
                      chunk: int = 65_536) -> YieldReport:
    """Fraction of plaquettes with at least one converted NV among ``sites`` candidates.

    Each chunk draws from its own child of a ``SeedSequence``; a given
    ``(seed, chunk)`` always reproduces the same estimate.
    """
    if trials < 10_000:
        raise ValueError("need at least 1e4 trials")
    if not 0 <= p_conv <= 1:
        raise ValueError("p_conv must be a probability")
    n_chunks = -(-trials // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    hits = 0
    for i, child in enumerate(children):
        m = min(chunk, trials - i * chunk)
        draws = np.random.default_rng(child).random((m, sites)) < p_conv
        hits += int(draws.any(axis=1).sum())
    f = hits / trials
    return YieldReport(p_conv, sites, trials, f, math.sqrt(f * (1 - f) / trials), 1 - (1 - p_conv) ** sites, seed)


# ---------------------------------------------------------------- refocusing

ROW_OF = {"A": 1, "B": 2, "C": 3, "D": 4}
NN_TERMS = (("A", "B"), ("B", "C"), ("C", "D"), ("D", "A'"))
NNN_TERMS = (("A", "C"), ("B", "D"), ("C", "A'"), ("D", "B'"))
ECHO1_ROWS = frozenset({1, 2})
ECHO2_ROWS = frozenset({2, 3})


def _row(label: str) -> int:
    return ROW_OF[label.rstrip("'")]


def toggling_sign_average(term, flipped_rows) -> Fraction:
    """Average toggling-frame sign of a flip-flop term under a symmetric echo.

    The echo runs a quarter, flips, runs a half, flips back, runs a quarter.
    A term changes sign while flipped iff exactly one of its spins is flipped.
    """
    n_flipped = sum(_row(s) in flipped_rows for s in term)
    s = -1 if n_flipped % 2 else 1
    return Fraction(1, 4) + Fraction(s, 2) + Fraction(1, 4)


def sign_average_table() -> dict:
    return {
        name: {"".join(t): toggling_sign_average(t, rows) for t in NN_TERMS + NNN_TERMS}
        for name, rows in (("eff1", ECHO1_ROWS), ("eff2", ECHO2_ROWS))
    }


def rows_to_sites(n_sites: int, rows) -> frozenset:
    return frozenset(i for i in range(n_sites) if (i % 4) + 1 in rows)


def echo_segment(n_sites: int, rows, duration: float) -> EchoSchedule:
    sites = rows_to_sites(n_sites, rows)
    return EchoSchedule(((duration / 4, sites), (3 * duration / 4, sites)), duration, axis="z")


@dataclass(frozen=True)
class EchoPlan:
    eff1: EchoSchedule
    eff2: EchoSchedule
    trotter: EchoSchedule
    segment_time: float
    trotter_steps: int

    @property
    def simulated_time(self) -> float:
        """Duration of ideal nearest-neighbour evolution the sequence targets."""
        return self.segment_time * self.trotter_steps

    @property
    def wall_time(self) -> float:
        return self.trotter.total_time


def echo_schedule_nnn(segment_time: float, trotter_steps: int, n_sites: int = 8, rows: int = 4) -> EchoPlan:
    """Echo segments isolating each half of the nearest-neighbour couplings, Strang-interleaved.

    One Trotter step is ``eff1(tau/2) eff2(tau) eff1(tau/2)`` and targets the
    nearest-neighbour evolution for ``tau``; flips act as Z in the drive frame.
    """
    if rows != 4:
        raise ValueError("only the four-row saw-tooth is supported")
    if segment_time <= 0 or trotter_steps < 1:
        raise ValueError("segment_time and trotter_steps must be positive")
    e1 = echo_segment(n_sites, ECHO1_ROWS, segment_time)
    e2 = echo_segment(n_sites, ECHO2_ROWS, segment_time)
    half = echo_segment(n_sites, ECHO1_ROWS, segment_time / 2)
    step = half.then(e2).then(half)
    seq = step
    for _ in range(trotter_steps - 1):
        seq = seq.then(step)
    return EchoPlan(e1, e2, seq, segment_time, trotter_steps)


def reverse_schedule(schedule: EchoSchedule) -> EchoSchedule:
    """Events mirrored in time; run it under ``-H`` to undo ``schedule`` under ``H``."""
    T = schedule.total_time
    return EchoSchedule(tuple((T - t, s) for t, s in reversed(schedule.events)), T, schedule.axis)


def sawtooth_model(n_sites: int = 8, neighbours: int = 2, h: float = 6.0, w: float = 19.0,
                   constants: PhysicalConstants = DEFAULT_CONSTANTS) -> HamiltonianModel:
    """Dense flip-flop model of a saw-tooth chain in the drive frame."""
    pairs, kappas, order = sawtooth_couplings(n_sites, h, w, neighbours, constants)
    H = spin.xx_chain_dense(kappas, [], n_sites, pairs=pairs)
    layout = HilbertLayout(tuple(nitrogen() for _ in range(n_sites)))
    return HamiltonianModel(layout, H, meta={"pairs": pairs, "kappas": kappas, "order": order})


def trotter_error(plan: EchoPlan, model: HamiltonianModel, target: HamiltonianModel) -> float:
    """Operator-norm distance between the echo sequence and ideal target evolution."""
    U = schedule_propagator(model, plan.trotter)
    V = propagator(target, plan.simulated_time)
    return float(np.linalg.norm(U - V, 2))

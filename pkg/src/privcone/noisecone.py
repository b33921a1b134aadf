"""Integer-noise mechanisms on a truncated window.

The true domain is all of Z; here datasets and outputs are restricted to
``[-W, W]`` and every quantity is Float64.  Truncation error is always
reported, never folded away by renormalizing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import NearSingularTransform, ParseError, WindowTooSmall

DEFAULT_TAIL_TOLERANCE = 1e-12
DEFAULT_GRID = 4096
_TERM_CUTOFF = 1e-20


@dataclass(frozen=True)
class Window:
    half_width: int
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE

    def __post_init__(self):
        if not isinstance(self.half_width, (int, np.integer)) or self.half_width < 1:
            raise ParseError(f"window half-width must be a positive integer, got {self.half_width!r}")
        if not self.tail_tolerance > 0:
            raise ParseError("tail tolerance must be positive")
        object.__setattr__(self, "half_width", int(self.half_width))

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    def __len__(self) -> int:
        return 2 * self.half_width + 1


def _check_p(p: float) -> float:
    p = float(p)
    if not 0 < p < 1:
        raise ParseError(f"p must lie strictly between 0 and 1, got {p}")
    return p


def _check_r(r) -> int:
    if int(r) != r or r < 1:
        raise ParseError(f"r must be a positive integer, got {r!r}")
    return int(r)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0:
        raise ParseError(f"Poisson rate must be positive, got {lam}")
    return lam


def nb_pmf(p: float, r: int, n: int) -> float:
    """``C(n+r-1, n) p^n (1-p)^r``, evaluated in log space."""
    if n < 0:
        return 0.0
    logv = math.lgamma(n + r) - math.lgamma(r) - math.lgamma(n + 1) + n * math.log(p) + r * math.log1p(-p)
    return math.exp(logv)


def poisson_pmf(lam: float, n: int) -> float:
    if n < 0:
        return 0.0
    return math.exp(n * math.log(lam) - lam - math.lgamma(n + 1))


def _difference_sum(a, b, k: int) -> float:
    """``sum_j a(j + k) b(j)`` over ``j >= max(0, -k)`` until the terms vanish."""
    total = 0.0
    j = max(0, -k)
    peaked = False
    while True:
        term = a(j + k) * b(j)
        total += term
        if term > 0:
            peaked = True
        if peaked and term < _TERM_CUTOFF * max(total, 1e-300):
            break
        j += 1
        if j > 100_000:
            break
    return total


def geometric_pmf(p: float, k: int) -> float:
    p = _check_p(p)
    return (1 - p) / (1 + p) * p ** abs(int(k))


def _tail_mass(pmf, window: Window) -> float:
    inside = math.fsum(pmf(int(k)) for k in window.ks)
    return max(0.0, 1.0 - inside)


@lru_cache(maxsize=256)
def _dnb_tail(p: float, r: int, w: int) -> float:
    return _tail_mass(lambda k: _dnb_raw(p, r, k), Window(w))


def _dnb_raw(p: float, r: int, k: int) -> float:
    k = abs(k)
    return _difference_sum(lambda n: nb_pmf(p, r, n), lambda n: nb_pmf(p, r, n), k)


def dnb_pmf(p: float, r: int, k: int, w: Window | None = None) -> float:
    """Mass at ``k`` of ``X - Y`` with ``X, Y`` independent NB(p, r)."""
    p, r = _check_p(p), _check_r(r)
    if w is not None:
        tail = _dnb_tail(p, r, w.half_width)
        if tail > w.tail_tolerance:
            raise WindowTooSmall(f"DNB({p}, {r}) leaves mass {tail:.3g} outside +-{w.half_width}")
    return _dnb_raw(p, r, int(k))


def binom_diff_pmf(p: float, r: int, j: int) -> float:
    """``P(X - Y = j)`` for ``X, Y`` independent Binomial(r, p/(1+p))."""
    p, r = _check_p(p), _check_r(r)
    j = int(j)
    if abs(j) > r:
        return 0.0
    s = p / (1 + p)

    def b(n):
        return math.comb(r, n) * s ** n * (1 - s) ** (r - n) if 0 <= n <= r else 0.0

    return math.fsum(b(n + j) * b(n) for n in range(max(0, -j), r + 1))


@lru_cache(maxsize=256)
def _skellam_tail(l1: float, l2: float, w: int) -> float:
    return _tail_mass(lambda k: _skellam_raw(l1, l2, k), Window(w))


def _skellam_raw(l1: float, l2: float, k: int) -> float:
    return _difference_sum(lambda n: poisson_pmf(l1, n), lambda n: poisson_pmf(l2, n), k)


def skellam_pmf(l1: float, l2: float, k: int, w: Window | None = None) -> float:
    """Mass at ``k`` of ``X - Y`` with ``X ~ Poisson(l1)``, ``Y ~ Poisson(l2)``."""
    l1, l2 = _check_lambda(l1), _check_lambda(l2)
    if w is not None:
        tail = _skellam_tail(l1, l2, w.half_width)
        if tail > w.tail_tolerance:
            raise WindowTooSmall(f"Skellam({l1}, {l2}) leaves mass {tail:.3g} outside +-{w.half_width}")
    return _skellam_raw(l1, l2, int(k))


class NoiseKind(str, enum.Enum):
    GEOMETRIC = "geometric"
    DNB = "dnb"
    SKELLAM = "skellam"
    CUSTOM = "custom"


@dataclass(frozen=True)
class NoiseSpec:
    """An additive integer-noise mechanism ``k -> k + Z``."""

    kind: NoiseKind
    p: float | None = None
    r: int = 1
    l1: float | None = None
    l2: float | None = None
    table: Mapping[int, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (NoiseKind.GEOMETRIC, NoiseKind.DNB):
            if self.p is None:
                raise ParseError(f"{kind.value} noise needs p")
            object.__setattr__(self, "p", _check_p(self.p))
            object.__setattr__(self, "r", _check_r(self.r))
        elif kind is NoiseKind.SKELLAM:
            if self.l1 is None or self.l2 is None:
                raise ParseError("Skellam noise needs l1 and l2")
            object.__setattr__(self, "l1", _check_lambda(self.l1))
            object.__setattr__(self, "l2", _check_lambda(self.l2))
        else:
            if not self.table:
                raise ParseError("custom noise needs a nonempty pmf table")
            table = {int(k): float(v) for k, v in self.table.items()}
            if any(v < 0 for v in table.values()):
                raise ParseError("pmf values must be nonnegative")
            object.__setattr__(self, "table", table)

    def pmf(self, k: int) -> float:
        k = int(k)
        if self.kind is NoiseKind.GEOMETRIC:
            return geometric_pmf(self.p, k)
        if self.kind is NoiseKind.DNB:
            return _dnb_raw(self.p, self.r, k)
        if self.kind is NoiseKind.SKELLAM:
            return _skellam_raw(self.l1, self.l2, k)
        return self.table.get(k, 0.0)

    def tail_mass(self, w: Window) -> float:
        return _tail_mass(self.pmf, w)

    def check_window(self, w: Window) -> float:
        tail = self.tail_mass(w)
        if tail > w.tail_tolerance:
            raise WindowTooSmall(f"{self.kind.value} noise leaves mass {tail:.3g} outside +-{w.half_width}")
        return tail

    def table_over(self, w: Window) -> np.ndarray:
        return np.array([self.pmf(int(k)) for k in w.ks])


def parse_pmf_table(text: str) -> dict[int, float]:
    """Read ``k value`` lines (blank lines and ``#`` comments ignored)."""
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'k value', got {line!r}")
        try:
            k, v = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if k in table:
            raise ParseError(f"line {lineno}: duplicate k = {k}")
        table[k] = v
    if not table:
        raise ParseError("empty pmf table")
    return table


def choose_window(spec: NoiseSpec, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE, limit: int = 2048) -> Window:
    """Smallest half-width whose two-sided tail mass is below ``tail_tolerance``.

    For Skellam noise the width is doubled: its stencil has infinite support
    and is cut at ``W/2``, so the stencil must clear the tail too.
    """
    def fits(w):
        return spec.tail_mass(Window(w, tail_tolerance)) < tail_tolerance

    hi = 1
    while not fits(hi):
        if hi >= limit:
            raise WindowTooSmall(f"no window up to +-{limit} reaches tail mass {tail_tolerance}")
        hi = min(2 * hi, limit)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid
    if spec.kind is NoiseKind.SKELLAM:
        hi = min(2 * hi, 2 * limit)
    return Window(hi, tail_tolerance)


@dataclass(frozen=True)
class BandedConstraintSystem:
    """Translation-invariant constraints ``sum_j c_j x_{k+j} >= 0`` for interior k.

    ``stencil[i]`` is ``c_{offset + i}``.  ``truncation_error`` bounds the
    l1 mass of the stencil dropped by cutting it to finite width.
    """

    stencil: tuple[float, ...]
    offset: int
    window: Window
    truncation_error: float = 0.0

    @property
    def radius(self) -> int:
        return max(abs(self.offset), abs(self.offset + len(self.stencil) - 1))

    @property
    def coefficients(self) -> dict[int, float]:
        return {self.offset + i: c for i, c in enumerate(self.stencil)}

    @property
    def interior(self) -> np.ndarray:
        edge = self.window.half_width - self.radius
        if edge < 0:
            raise WindowTooSmall(f"stencil radius {self.radius} exceeds window +-{self.window.half_width}")
        return np.arange(-edge, edge + 1)

    def evaluate(self, x) -> np.ndarray:
        """Constraint values on a vector indexed by ``k = -W..W``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (len(self.window),):
            raise ParseError(f"vector of length {x.shape} for a window of {len(self.window)}")
        w = self.window.half_width
        ks = self.interior
        out = np.zeros(len(ks))
        for i, c in enumerate(self.stencil):
            out += c * x[ks + self.offset + i + w]
        return out

    def min_value(self, x) -> float:
        return float(self.evaluate(x).min())

    def normalized_stencil(self) -> tuple[float, ...]:
        """Stencil scaled so that ``c_{-1} = -1`` (the reference display scale)."""
        c = self.coefficients
        ref = c.get(-1) or c.get(1)
        if not ref:
            return self.stencil
        return tuple(v / -ref for v in self.stencil)


def dnb_stencil(p: float, r: int) -> dict[int, float]:
    return {j: (-1) ** abs(j) * binom_diff_pmf(p, r, j) for j in range(-r, r + 1)}


def dnb_constraints(p: float, r: int, w: Window) -> BandedConstraintSystem:
    st = dnb_stencil(p, r)
    return BandedConstraintSystem(tuple(st[j] for j in range(-r, r + 1)), -r, w, 0.0)


def skellam_constraints(l1: float, l2: float, w: Window, radius: int | None = None) -> BandedConstraintSystem:
    """Stencil ``c_j = (-1)^j f_Z(j)`` cut to ``|j| <= radius`` (default W/2)."""
    radius = w.half_width // 2 if radius is None else radius
    js = range(-radius, radius + 1)
    st = tuple((-1) ** abs(j) * skellam_pmf(l1, l2, j) for j in js)
    truncation = max(0.0, 1.0 - math.fsum(abs(v) for v in st))
    return BandedConstraintSystem(st, -radius, w, truncation)


def mechanism_matrix(spec: NoiseSpec, w: Window) -> np.ndarray:
    """Windowed matrix ``M[omega, k] = f(omega - k)``, both indices in ``[-W, W]``.

    Columns are not renormalized; see :func:`column_deficits`.
    """
    ks = w.ks
    n = len(ks)
    diffs = np.arange(-2 * w.half_width, 2 * w.half_width + 1)
    f = {int(d): spec.pmf(int(d)) for d in diffs}
    m = np.empty((n, n))
    for a, omega in enumerate(ks):
        for b, k in enumerate(ks):
            m[a, b] = f[int(omega - k)]
    return m


def column_deficits(m: np.ndarray) -> np.ndarray:
    return 1.0 - m.sum(axis=0)


@dataclass(frozen=True)
class RowCheck:
    min_value: float
    worst_row: int
    worst_k: int

    def holds(self, tolerance: float) -> bool:
        return self.min_value >= -tolerance


def check_mechanism_rows(m: np.ndarray, system: BandedConstraintSystem) -> RowCheck:
    worst = (math.inf, 0, 0)
    w = system.window.half_width
    ks = system.interior
    for i, row in enumerate(m):
        vals = system.evaluate(row)
        j = int(np.argmin(vals))
        if vals[j] < worst[0]:
            worst = (float(vals[j]), i - w, int(ks[j]))
    return RowCheck(*worst)


@dataclass(frozen=True)
class ConvolutionReport:
    value_at_0: float
    max_offcenter: float


def _as_table(f, w: Window) -> dict[int, float]:
    if isinstance(f, Mapping):
        return {int(k): float(v) for k, v in f.items()}
    return {int(k): float(v) for k, v in zip(w.ks, f)}


def verify_inverse_convolution(f, g, w: Window) -> ConvolutionReport:
    """``(f * g)(k) = sum_j f(k - j) g(j)`` for ``|k| <= W/2``.

    ``f`` and ``g`` are mappings ``k -> value`` or arrays over ``-W..W``.
    """
    ft, gt = _as_table(f, w), _as_table(g, w)
    half = w.half_width // 2
    values = {}
    for k in range(-half, half + 1):
        values[k] = math.fsum(gv * ft.get(k - j, 0.0) for j, gv in gt.items())
    off = max((abs(v) for k, v in values.items() if k != 0), default=0.0)
    return ConvolutionReport(values[0], off)


@dataclass(frozen=True)
class FourierStencil:
    coefficients: dict[int, float]
    min_abs_transform: float
    dropped_mass: float

    @property
    def radius(self) -> int:
        return max(abs(k) for k in self.coefficients)

    def as_system(self, w: Window) -> BandedConstraintSystem:
        lo, hi = min(self.coefficients), max(self.coefficients)
        st = tuple(self.coefficients.get(j, 0.0) for j in range(lo, hi + 1))
        return BandedConstraintSystem(st, lo, w, self.dropped_mass)


def general_noise_stencil(f, w: Window, grid_points: int = DEFAULT_GRID, cutoff: float = 1e-10,
                          singular_threshold: float = 1e-8) -> FourierStencil:
    """Row-cone stencil of an additive noise pmf via the inverse characteristic function.

    The pmf is wrapped onto a ``grid_points``-periodic grid, transformed,
    inverted pointwise, and transformed back; entries below ``cutoff`` in
    absolute value are dropped.
    """
    table = _as_table(f, w)
    if grid_points < 2 * w.half_width + 1:
        raise ParseError(f"grid of {grid_points} points cannot hold a window of {len(w)}")
    a = np.zeros(grid_points)
    for k, v in table.items():
        a[k % grid_points] += v
    fhat = np.fft.fft(a)
    m = float(np.min(np.abs(fhat)))
    if m <= singular_threshold:
        raise NearSingularTransform(f"min |f^| = {m:.3g} on a {grid_points}-point grid")
    g = np.fft.ifft(1.0 / fhat).real
    coeffs = {}
    dropped = 0.0
    for n, v in enumerate(g):
        k = n if n < grid_points // 2 else n - grid_points
        if abs(v) >= cutoff:
            coeffs[k] = float(v)
        else:
            dropped += abs(v)
    return FourierStencil(dict(sorted(coeffs.items())), m, dropped)


def cosine_similarity(a: Mapping[int, float], b: Mapping[int, float]) -> float:
    keys = sorted(set(a) | set(b))
    u = np.array([a.get(k, 0.0) for k in keys])
    v = np.array([b.get(k, 0.0) for k in keys])
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


@dataclass(frozen=True)
class TelescopingReport:
    epsilon_direct: float
    epsilon_telescoping: float
    min_direct: float
    min_telescoping: float
    max_disagreement: float
    partial_sums_monotone: bool
    pairs_checked: int

    def holds(self, tolerance: float = 1e-9) -> bool:
        return (self.min_direct >= -tolerance and self.min_telescoping >= -tolerance
                and self.max_disagreement <= tolerance)


def dp_from_dnb_telescoping(p: float, w: Window, remainder_tolerance: float = 1e-13) -> TelescopingReport:
    """Recover the adjacent-column ratio bound ``1/p`` from the r = 1 stencil.

    For each row ``x`` and interior ``k``: ``d_k = x_k/p - x_{k-1}`` equals
    ``sum_{j>=0} p^j s_{k+j}`` plus a geometric remainder, where ``s`` are the
    stencil values.  Pairs are used only where the remainder is below
    ``remainder_tolerance``; the mirrored identity handles ``x_k/p - x_{k+1}``.
    """
    p = _check_p(p)
    spec = NoiseSpec(NoiseKind.DNB, p=p, r=1)
    m = mechanism_matrix(spec, w)
    system = dnb_constraints(p, 1, w)
    # scale so that s_m = -x_{m-1} + (p + 1/p) x_m - x_{m+1}
    scale = -1.0 / system.coefficients[-1]
    half = w.half_width
    ks = system.interior
    lo, hi = int(ks[0]), int(ks[-1])
    eps_direct = eps_tel = -math.inf
    min_direct = min_tel = math.inf
    disagreement = 0.0
    monotone = True
    checked = 0
    for x in m:
        s = {int(k): v * scale for k, v in zip(ks, system.evaluate(x))}

        def at(k):
            return x[k + half]

        for k in range(lo + 1, hi + 1):
            for direction in (1, -1):
                nb = k - direction  # neighbor compared against x_k
                direct = at(k) / p - at(nb)
                total, partial_ok, prev = 0.0, True, -math.inf
                steps = range(0, hi - k + 1) if direction == 1 else range(0, k - lo + 1)
                last = None
                for j in steps:
                    total += p ** j * s[k + direction * j]
                    if total < prev - 1e-15:
                        partial_ok = False
                    prev = total
                    last = j
                edge = k + direction * (last + 1)
                if abs(edge) > half:
                    continue
                edge_nb = edge - direction
                remainder = p ** (last + 1) * (at(edge) / p - at(edge_nb))
                if abs(remainder) > remainder_tolerance:
                    continue
                checked += 1
                monotone &= partial_ok
                min_direct = min(min_direct, direct)
                min_tel = min(min_tel, total)
                disagreement = max(disagreement, abs(total - direct))
                if at(k) > 0 and at(nb) > 0:
                    eps_direct = max(eps_direct, math.log(at(nb) / at(k)))
                    rebuilt = at(k) / p - total
                    if rebuilt > 0:
                        eps_tel = max(eps_tel, math.log(rebuilt / at(k)))
    return TelescopingReport(eps_direct, eps_tel, min_direct, min_tel, disagreement, monotone, checked)

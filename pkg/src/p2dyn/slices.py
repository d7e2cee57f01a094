"""Slice measures, ball masses, and a global mass certificate for currents.

The invariant current of a holomorphic endomorphism is locally ``dd^c`` of
a plurisubharmonic potential.  Wedging it against either coordinate area
form of a frame chart gives a measure whose density is the *transverse*
Laplacian of the potential: the ``Z``-direction measure (against
``(i/2) dZ ^ dZbar``) weighs the ``W``-plane Laplacian and vice versa.
This module realizes those measures as nonnegative mass grids over a
bidisk in chart coordinates:

* :class:`LocalGrid` fixes a cell-centered grid with one ghost node ring
  so 5-point stencils cover every interior cell.
* :func:`slice_measure` converts a sampled potential into per-cell masses
  ``mass = (raw 5-point stencil) * h^2 / (2 pi)``.  The raw stencil is
  ``h^2`` times the transverse Laplacian, so this is the measure of the
  cell under the normalization fixed by the smooth calibration potential
  ``|W|^2``: constant density ``2/pi`` against 4-dimensional Lebesgue
  measure and Euclidean ball mass ``pi r^4``.  The same convention makes
  :func:`mass_certificate` integrate the current against the Fubini-Study
  area form to exactly one.  Slightly negative stencil values are pure
  discretization error (the potentials are plurisubharmonic); they are
  clamped to zero, logged, and budgeted.
* :func:`ball_mass` sums cell masses over a Euclidean ball, weighting
  boundary cells by fractional coverage (2 x 2 x 2 x 2 subsamples).
* :func:`trace_measure` adds the two directional grids cellwise; its ball
  scaling realizes the minimum of the two directional scalings.
* :func:`mass_certificate` integrates (depth-``N`` truncated current)
  wedge (``n``-fold pullback of the Fubini-Study form) over the whole
  projective plane with a three-chart partition-of-unity quadrature.  The
  pairing is cohomological, so the exact value is ``d^n`` for *every*
  truncation depth; the computed number certifies the quadrature and the
  mass normalization at once.
* :func:`positivity_check` measures how often grids centered at
  equilibrium sample points carry genuine slice mass, and
  :func:`harmonicity_defect` integrates ``|transverse Laplacian|`` per
  slice, separating harmonic slice families from mass-bearing ones.

Charts for grids at arbitrary points (no dynamical frame needed) come from
:func:`axis_chart`, which reuses the frame-chart machinery with the
orthonormal tangent basis itself as the (unit) frame.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ResolutionError
from .frames import NormalFormCoordinates, OseledecFrame, default_coordinates
from .green import GreenEvaluator, local_potential
from .projective import HomogeneousMap, HomogeneousPoint
from .sampler import tangent_basis_batch

__all__ = [
    "CERTIFICATE_DEPTH",
    "CERTIFICATE_RESOLUTION",
    "CLAMP_BUDGET",
    "DEFAULT_RADIUS_FRACTION",
    "MIN_RESOLUTION",
    "POSITIVITY_SCALE",
    "LocalGrid",
    "MassCertificate",
    "SliceMeasure",
    "axis_chart",
    "ball_mass",
    "calibration_defect",
    "calibration_mass",
    "harmonicity_defect",
    "mass_certificate",
    "positivity_check",
    "slice_csv",
    "slice_measure",
    "slice_summary",
    "trace_measure",
]

logger = logging.getLogger(__name__)

#: Minimum grid resolution per real axis.
MIN_RESOLUTION = 32
#: Default grid radius as a fraction of the chart domain radius; leaves the
#: ghost ring inside the chart for every resolution >= MIN_RESOLUTION.
DEFAULT_RADIUS_FRACTION = 0.45
#: Cell mass = raw stencil * h^2 * MASS_NORMALIZATION.
MASS_NORMALIZATION = 1.0 / (2.0 * math.pi)
#: Clamped (negative) mass may not exceed this fraction of the total.
CLAMP_BUDGET = 0.01
#: Negative cells beyond -NEGATIVITY_FLOOR * max cell trigger a warning.
NEGATIVITY_FLOOR = 1e-9
#: A grid "carries mass" when its total exceeds this times the calibration.
POSITIVITY_SCALE = 1e-8
#: ... and this many times its own clamped negative mass: symmetric noise
#: has comparable positive and negative parts, a current does not.
POSITIVITY_NOISE_FACTOR = 8.0
#: Depth of the truncated potential used by the mass certificate.
CERTIFICATE_DEPTH = 3
#: Quadrature nodes per real axis (per chart) for the mass certificate.
CERTIFICATE_RESOLUTION = 40
#: Half-width of the per-chart quadrature box; the partition-of-unity
#: weight vanishes outside |z|^2 + |w|^2 = 3, i.e. inside this bidisk.
_CERTIFICATE_EXTENT = math.sqrt(3.0)
#: Partition-of-unity hinge offset: weights activate where a homogeneous
#: coordinate carries more than this fraction of the squared norm.
_HINGE_OFFSET = 0.25
#: Relative disagreement between full and half resolution that flags the
#: certificate as inconclusive.
_CERTIFICATE_RESIDUAL_TOL = 0.10

_DIRECTIONS = ("Z", "W")


# ---------------------------------------------------------------------------
# grid geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalGrid:
    """Cell-centered bidisk grid ``|Z| < radius, |W| < radius`` in a chart.

    ``resolution`` cells per real axis, spacing ``h = 2 radius /
    resolution``; node ``i`` of an axis sits at ``-radius + (i + 1/2) h``.
    One ghost node beyond each edge supports the 5-point stencils, so the
    sampled node cube has ``resolution + 2`` nodes per axis and must stay
    inside the chart domain (including the ghost ring).
    """

    coords: NormalFormCoordinates
    resolution: int
    radius: float

    def __post_init__(self):
        if int(self.resolution) != self.resolution \
                or self.resolution < MIN_RESOLUTION:
            raise ValueError("grid resolution must be an integer >= %d, "
                             "got %r" % (MIN_RESOLUTION, self.resolution))
        object.__setattr__(self, "resolution", int(self.resolution))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("grid radius must be positive and finite")
        # worst corner: all four real axes at radius + h/2, so the chart
        # norm |xi| reaches 2 (radius + h/2) there
        reach = 2.0 * (self.radius + 0.5 * self.spacing)
        domain = float(self.coords.domain_radius)
        if reach > domain * (1.0 + 1e-12):
            raise ValueError(
                "grid (with its ghost ring) reaches |xi| = %.3g beyond the "
                "chart domain radius %.3g; shrink the grid radius below "
                "%.3g" % (reach, domain, domain / 2.0))

    @classmethod
    def from_coords(cls, coords: NormalFormCoordinates,
                    resolution: int = MIN_RESOLUTION,
                    radius: float | None = None) -> "LocalGrid":
        """Grid filling the default fraction of the chart domain."""
        if radius is None:
            radius = DEFAULT_RADIUS_FRACTION * float(coords.domain_radius)
        return cls(coords=coords, resolution=resolution, radius=float(radius))

    @property
    def spacing(self) -> float:
        """Cell side ``h = 2 radius / resolution``."""
        return 2.0 * self.radius / self.resolution

    def axis_nodes(self, ghost: bool = True) -> np.ndarray:
        """Per-axis node coordinates, optionally with the ghost ring."""
        m = self.resolution
        h = self.spacing
        if ghost:
            return -self.radius + (np.arange(m + 2) - 0.5) * h
        return -self.radius + (np.arange(m) + 0.5) * h

    def cell_centers(self) -> np.ndarray:
        """Interior cell centers of one axis (length ``resolution``)."""
        return self.axis_nodes(ghost=False)

    def sample_scalar(self, fn) -> np.ndarray:
        """Sample ``fn(Z, W)`` on the ghosted node cube.

        ``fn`` receives broadcastable complex arrays ``Z`` of shape
        ``(n, n, 1, 1)`` and ``W`` of shape ``(1, 1, n, n)`` with
        ``n = resolution + 2`` and must return a real broadcastable array.
        """
        ax = self.axis_nodes()
        n = ax.size
        zz = (ax[:, None] + 1j * ax[None, :])[:, :, None, None]
        ww = (ax[:, None] + 1j * ax[None, :])[None, None, :, :]
        vals = np.asarray(fn(zz, ww), dtype=np.float64)
        return np.ascontiguousarray(
            np.broadcast_to(vals, (n, n, n, n)))

    def sample_green(self, evaluator: GreenEvaluator) -> np.ndarray:
        """Truncated potential on the ghosted node cube, in large blocks."""
        ax = self.axis_nodes()
        n = ax.size
        out = np.empty((n, n, n, n), dtype=np.float64)
        ww = (ax[:, None] + 1j * ax[None, :]).ravel()
        slabs = max(1, (1 << 18) // (n * ww.size))
        block = np.empty((slabs * n * ww.size, 2), dtype=np.complex128)
        for a in range(0, n, slabs):
            k = min(slabs, n - a)
            size = k * n * ww.size
            zz = (ax[a:a + k, None] + 1j * ax[None, :]).ravel()
            block[:size, 0] = np.repeat(zz, ww.size)
            block[:size, 1] = np.tile(ww, k * n)
            vals = local_potential(evaluator, self.coords, block[:size])
            out[a:a + k] = vals.reshape(k, n, n, n)
        return out


def axis_chart(map_: HomogeneousMap, point,
               domain_radius: float | None = None) -> NormalFormCoordinates:
    """Chart at ``point`` whose frame is the orthonormal tangent basis.

    This is pure geometry -- the two directions are the Fubini-Study
    tangent basis columns, not dynamically distinguished ones -- so the
    frame is marked isotropic.  With ``domain_radius=None`` the domain is
    the same safe fraction of the injectivity radius that dynamical frame
    charts use.
    """
    hp = point if isinstance(point, HomogeneousPoint) \
        else HomogeneousPoint(point)
    lift = hp.array / np.linalg.norm(hp.array)
    basis = tangent_basis_batch(lift[None, :])[0]
    frame = OseledecFrame(
        base=hp.chart_point(),
        e1=np.array([1.0, 0.0], dtype=np.complex128),
        e2=np.array([0.0, 1.0], dtype=np.complex128),
        conditioning=1.0,
        isotropic=True,
        base_lift=lift,
        tangent_basis=basis,
    )
    if domain_radius is None:
        return default_coordinates(map_, frame)
    return NormalFormCoordinates(frame=frame,
                                 domain_radius=float(domain_radius))


def calibration_mass(grid: LocalGrid) -> float:
    """Total slice mass of the calibration potential ``|W|^2`` on ``grid``.

    The transverse Laplacian is 4, the density ``4 / (2 pi) = 2 / pi``,
    and the grid box has Lebesgue volume ``(2 radius)^4``.
    """
    return (2.0 / math.pi) * (2.0 * grid.radius) ** 4


def calibration_defect(grid: LocalGrid) -> float:
    """Per-slice harmonicity defect of ``|W|^2``: ``4 * (2 radius)^2``."""
    return 4.0 * (2.0 * grid.radius) ** 2


# ---------------------------------------------------------------------------
# slice measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SliceMeasure:
    """Nonnegative cell masses of one directional slice of the current.

    ``cell_mass`` has shape ``(m, m, m, m)`` indexed by the interior cells
    (Z-real, Z-imag, W-real, W-imag); ``direction`` names the area form
    the current was wedged against ('Z', 'W', or their cellwise 'trace').
    ``clamped_mass`` is the total discretization-negative mass that was
    clamped to zero.
    """

    grid: LocalGrid
    direction: str
    cell_mass: np.ndarray
    total_mass: float
    clamped_mass: float = 0.0

    def __post_init__(self):
        if self.direction not in _DIRECTIONS + ("trace",):
            raise ValueError("direction must be 'Z', 'W', or 'trace', "
                             "got %r" % (self.direction,))
        mass = np.asarray(self.cell_mass, dtype=np.float64)
        m = self.grid.resolution
        if mass.shape != (m, m, m, m):
            raise ValueError("cell_mass shape %r does not match the grid "
                             "resolution %d" % (mass.shape, m))
        if mass.size and float(mass.min()) < 0.0:
            raise ValueError("cell masses must be nonnegative")
        object.__setattr__(self, "cell_mass", mass)
        total = float(mass.sum())
        if abs(total - self.total_mass) > 1e-9 * max(abs(total), 1.0):
            raise ValueError("total_mass %.17g does not equal the cell sum "
                             "%.17g" % (self.total_mass, total))


def _raw_stencil(potential: np.ndarray, grid: LocalGrid,
                 direction: str) -> np.ndarray:
    """Unnormalized transverse 5-point stencil on interior cells.

    The returned array is ``h^2`` times the transverse Laplacian up to
    ``O(h^4)``: the W-plane Laplacian for direction 'Z' and vice versa.
    """
    if direction not in _DIRECTIONS:
        raise ValueError("direction must be 'Z' or 'W', got %r"
                         % (direction,))
    pot = np.asarray(potential, dtype=np.float64)
    n = grid.resolution + 2
    if pot.shape != (n, n, n, n):
        raise ValueError(
            "potential grid mismatch: expected the ghosted node cube "
            "%r, got %r" % ((n, n, n, n), pot.shape))
    c = pot[1:-1, 1:-1, 1:-1, 1:-1]
    if direction == "Z":
        return (pot[1:-1, 1:-1, 2:, 1:-1] + pot[1:-1, 1:-1, :-2, 1:-1]
                + pot[1:-1, 1:-1, 1:-1, 2:] + pot[1:-1, 1:-1, 1:-1, :-2]
                - 4.0 * c)
    return (pot[2:, 1:-1, 1:-1, 1:-1] + pot[:-2, 1:-1, 1:-1, 1:-1]
            + pot[1:-1, 2:, 1:-1, 1:-1] + pot[1:-1, :-2, 1:-1, 1:-1]
            - 4.0 * c)


def slice_measure(potential: np.ndarray, grid: LocalGrid, direction: str,
                  clamp_budget: float = CLAMP_BUDGET) -> SliceMeasure:
    """Directional slice of ``dd^c potential`` as a cell-mass grid.

    ``potential`` must be sampled on the grid's ghosted node cube (shape
    ``(m+2,)*4``).  Negative stencil values are clamped to zero and
    logged; if the clamped mass exceeds ``clamp_budget`` of the total (and
    is not floor-level noise) the discretization cannot be trusted and a
    :class:`ResolutionError` is raised.  Potentials with a genuinely
    singular transverse part (a point mass on the transverse plane) carry
    a few percent of discrete negativity next to the singularity; callers
    knowingly slicing one may widen ``clamp_budget``.  An infinite budget
    disables the failure entirely (clamping is still applied and
    reported) for callers that merely classify whether mass is present.
    """
    raw = _raw_stencil(potential, grid, direction)
    mass = raw * (grid.spacing ** 2 * MASS_NORMALIZATION)
    negative = mass < 0.0
    clamped = float(-mass[negative].sum()) if negative.any() else 0.0
    worst = float(-mass.min()) if clamped else 0.0
    if clamped:
        mass = np.where(negative, 0.0, mass)
    total = float(mass.sum())
    if clamped:
        max_cell = float(mass.max(initial=0.0))
        # A grid whose mass sits below the positivity floor carries no
        # measurable slice mass, so clamping there cannot be material; the
        # relative budget alone would reject every massless grid, because
        # stencil truncation error on a curved potential is never exactly 0.
        if math.isfinite(clamp_budget) and \
                clamped > max(clamp_budget * total,
                              POSITIVITY_SCALE * calibration_mass(grid)):
            raise ResolutionError(
                "clamped negative mass %.3g exceeds %.0f%% of the total "
                "%.3g; the transverse Laplacian is not resolved at "
                "spacing %.3g" % (clamped, 100.0 * clamp_budget, total,
                                  grid.spacing))
        count = int(np.count_nonzero(negative))
        logger.info("clamped %d negative cells totaling %.3g (total %.3g)",
                    count, clamped, total)
        if max_cell > 0.0 and worst > NEGATIVITY_FLOOR * max_cell:
            logger.warning(
                "negative cell mass %.3g beyond the discretization floor "
                "%.3g; treat cell-level values with care", worst,
                NEGATIVITY_FLOOR * max_cell)
    return SliceMeasure(grid=grid, direction=direction, cell_mass=mass,
                        total_mass=total, clamped_mass=clamped)


def trace_measure(z_slices: SliceMeasure,
                  w_slices: SliceMeasure) -> SliceMeasure:
    """Cellwise sum of the two directional slices (the trace-like grid).

    Both inputs must live on the same grid.  Ball masses of the result
    scale like the *smaller* of the two directional scalings (a direction
    whose grid carries no mass at all is degenerate and simply does not
    contribute).
    """
    if z_slices.direction != "Z" or w_slices.direction != "W":
        raise ValueError("trace_measure expects a Z-direction and a "
                         "W-direction slice measure, got %r and %r"
                         % (z_slices.direction, w_slices.direction))
    ga, gb = z_slices.grid, w_slices.grid
    same = ga is gb or (
        ga.resolution == gb.resolution
        and ga.radius == gb.radius
        and np.allclose(ga.coords.frame.base_lift,
                        gb.coords.frame.base_lift, atol=1e-12))
    if not same:
        raise ValueError("slice measures live on different grids")
    mass = z_slices.cell_mass + w_slices.cell_mass
    return SliceMeasure(
        grid=ga, direction="trace", cell_mass=mass,
        total_mass=float(mass.sum()),
        clamped_mass=z_slices.clamped_mass + w_slices.clamped_mass)


# ---------------------------------------------------------------------------
# ball masses
# ---------------------------------------------------------------------------

def ball_mass(sm: SliceMeasure, center, r: float) -> float:
    """Mass of the Euclidean chart ball ``B(center, r)``.

    Cells whose center is more than one cell diagonal inside (outside) the
    sphere count fully (not at all); the shell in between is weighted by
    the fraction of a 2x2x2x2 subsample of the cell falling inside, which
    makes the result exactly monotone in ``r``.  ``center`` is a complex
    pair ``(Z, W)`` and must lie inside the grid box; radii below three
    cell widths are under-resolved and raise :class:`ResolutionError`.
    Balls reaching beyond the grid box are truncated to it (the returned
    value is then a lower bound; keep ``r`` small enough if that matters).
    """
    grid = sm.grid
    h = grid.spacing
    if r < 3.0 * h:
        raise ResolutionError(
            "ball radius %.3g is below the resolution floor 3h = %.3g"
            % (r, 3.0 * h))
    cz, cw = np.asarray(center, dtype=np.complex128).reshape(2)
    parts = (cz.real, cz.imag, cw.real, cw.imag)
    if max(abs(p) for p in parts) >= grid.radius:
        raise ValueError("ball center %r lies outside the grid box of "
                         "radius %.3g" % (center, grid.radius))
    ax = grid.cell_centers()
    d2 = [np.square(ax - p) for p in parts]
    dist2 = (d2[0][:, None, None, None] + d2[1][None, :, None, None]
             + d2[2][None, None, :, None] + d2[3][None, None, None, :])
    inside = dist2 <= (r - h) ** 2 if r > h else np.zeros(dist2.shape, bool)
    shell = (dist2 < (r + h) ** 2) & ~inside
    total = float(sm.cell_mass[inside].sum())
    idx = np.nonzero(shell)
    if idx[0].size:
        offsets = np.array(list(product((-0.25 * h, 0.25 * h), repeat=4)))
        centers = np.stack([ax[idx[k]] - parts[k] for k in range(4)], axis=1)
        counts = np.zeros(idx[0].size, dtype=np.float64)
        for off in offsets:
            counts += (np.square(centers + off).sum(axis=1) <= r * r)
        total += float((counts / offsets.shape[0]
                        * sm.cell_mass[shell]).sum())
    return total


# ---------------------------------------------------------------------------
# harmonicity and positivity diagnostics
# ---------------------------------------------------------------------------

def harmonicity_defect(potential: np.ndarray, grid: LocalGrid,
                       direction: str) -> np.ndarray:
    """Per-slice integral of ``|transverse Laplacian|``.

    For direction 'Z' the result is an ``(m, m)`` array over the Z-plane
    cells: entry ``(i, j)`` is ``sum |Laplacian_W potential| h^2`` over the
    W-plane at that Z node, which is just the sum of the absolute raw
    stencils.  A slice family of a potential that is harmonic transverse
    to it has defect at the truncation-noise floor; mass-carrying slices
    sit far above the floor and survive grid refinement.
    """
    raw = _raw_stencil(potential, grid, direction)
    if direction == "Z":
        return np.abs(raw).sum(axis=(2, 3))
    return np.abs(raw).sum(axis=(0, 1))


def positivity_check(sm: SliceMeasure, sample, *, evaluator: GreenEvaluator,
                     max_points: int = 12, seed: int = 0) -> float:
    """Fraction of sample points whose centered grid carries slice mass.

    For each (sub-sampled) point of ``sample`` a fresh axis chart and grid
    with the template measure's relative geometry (same resolution, same
    radius fraction of the chart domain) is built, the truncated potential
    of ``evaluator`` is sampled, and the point counts as positive when the
    directional slice total exceeds ``POSITIVITY_SCALE`` times the
    calibration mass of its grid *and* a noise guard.  On a grid carrying
    only rounding/stencil-truncation noise the positive and clamped
    negative parts have comparable size, while a genuine current keeps
    the clamped part many orders below the total, so requiring the total
    to beat several times the clamped mass separates the two regimes at
    every grid scale.  At equilibrium points the fraction tends to one;
    far from the support (inside an attracting basin) the potential is
    pluriharmonic and grids carry only noise.
    """
    if sm.direction not in _DIRECTIONS:
        raise ValueError("positivity_check needs a directional slice "
                         "measure, got %r" % (sm.direction,))
    points = list(sample.points)
    if not points:
        raise ValueError("empty measure sample")
    if len(points) > max_points:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(points), size=max_points, replace=False)
        points = [points[int(i)] for i in sorted(chosen)]
    fraction_of_domain = sm.grid.radius / float(sm.grid.coords.domain_radius)
    positive = 0
    for point in points:
        coords = axis_chart(evaluator.map, point)
        grid = LocalGrid(coords=coords, resolution=sm.grid.resolution,
                         radius=fraction_of_domain
                         * float(coords.domain_radius))
        potential = grid.sample_green(evaluator)
        meas = slice_measure(potential, grid, sm.direction,
                             clamp_budget=math.inf)
        floor = max(POSITIVITY_SCALE * calibration_mass(grid),
                    POSITIVITY_NOISE_FACTOR * meas.clamped_mass)
        if meas.total_mass > floor:
            positive += 1
    return positive / len(points)


# ---------------------------------------------------------------------------
# global mass certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassCertificate:
    """Quadrature value of current wedge pullback area, expected ``d^n``.

    ``residual`` compares the full-resolution value against half
    resolution; above 10% the certificate is ``inconclusive``.
    """

    value: float
    coarse_value: float
    residual: float
    inconclusive: bool
    pullbacks: int
    green_depth: int
    resolution: int


def _l2_green(map_: HomogeneousMap, lifts: np.ndarray,
              depth: int) -> np.ndarray:
    """Depth-truncated 2-norm escape rate (log-homogeneous, smooth).

    Telescopes to ``d^-depth * log ||F^depth(lift)||_2``; its ``dd^c``
    is the degree-normalized depth-fold pullback of the Fubini-Study
    form, which keeps every certificate integral exactly cohomological.
    """
    norms = np.linalg.norm(lifts, axis=1)
    total = np.log(norms)
    v = lifts / norms[:, None]
    factor = 1.0 / map_.degree
    for _ in range(depth):
        # evaluate_batch sup-normalizes its input, dividing the image by
        # ||v||_sup^degree; homogeneity restores the exact-lift value.
        sup = np.max(np.abs(v), axis=1)
        out = map_.evaluate_batch(v, renormalize=False)
        norms = np.linalg.norm(out, axis=1)
        total = total + factor * (np.log(norms)
                                  + map_.degree * np.log(sup))
        v = out / norms[:, None]
        factor /= map_.degree
    return total


def _l2_pullback(map_: HomogeneousMap, lifts: np.ndarray,
                 n: int) -> np.ndarray:
    """``log ||F^n(lift)||_2`` without degree weights (n in {0, 1})."""
    if n == 0:
        return np.log(np.linalg.norm(lifts, axis=1))
    sup = np.max(np.abs(lifts), axis=1)
    out = map_.evaluate_batch(lifts, renormalize=False)
    return (np.log(np.linalg.norm(out, axis=1))
            + map_.degree * np.log(sup))


def _chart_values(map_: HomogeneousMap, chart: int, axis: np.ndarray,
                  kind: str, order: int) -> np.ndarray:
    """Sample a potential on the ghosted chart node cube, slab by slab.

    ``kind`` 'green' gives the degree-weighted truncated potential of
    depth ``order``; 'pullback' gives ``log ||F^order||_2``.
    """
    n = axis.size
    others = [i for i in range(3) if i != chart]
    out = np.empty((n, n, n, n), dtype=np.float64)
    ww = (axis[:, None] + 1j * axis[None, :]).ravel()
    lifts = np.empty((n * ww.size, 3), dtype=np.complex128)
    lifts[:, chart] = 1.0
    lifts[:, others[1]] = np.tile(ww, n)
    for a in range(n):
        lifts[:, others[0]] = np.repeat(axis[a] + 1j * axis, ww.size)
        if kind == "green":
            vals = _l2_green(map_, lifts, order)
        else:
            vals = _l2_pullback(map_, lifts, order)
        out[a] = vals.reshape(n, n, n)
    return out


def _hessian_terms(values: np.ndarray, h: float):
    """Mixed complex Hessian entries from 2nd-order stencils.

    Returns ``(u_ZZbar, u_WWbar, u_ZWbar)`` on the interior node cube.
    """
    c = values[1:-1, 1:-1, 1:-1, 1:-1]
    lap_z = (values[2:, 1:-1, 1:-1, 1:-1] + values[:-2, 1:-1, 1:-1, 1:-1]
             + values[1:-1, 2:, 1:-1, 1:-1] + values[1:-1, :-2, 1:-1, 1:-1]
             - 4.0 * c)
    lap_w = (values[1:-1, 1:-1, 2:, 1:-1] + values[1:-1, 1:-1, :-2, 1:-1]
             + values[1:-1, 1:-1, 1:-1, 2:] + values[1:-1, 1:-1, 1:-1, :-2]
             - 4.0 * c)

    def cross(ax_a, ax_b):
        sl_pp = [slice(1, -1)] * 4
        sl_pm = [slice(1, -1)] * 4
        sl_mp = [slice(1, -1)] * 4
        sl_mm = [slice(1, -1)] * 4
        sl_pp[ax_a] = slice(2, None); sl_pp[ax_b] = slice(2, None)
        sl_pm[ax_a] = slice(2, None); sl_pm[ax_b] = slice(None, -2)
        sl_mp[ax_a] = slice(None, -2); sl_mp[ax_b] = slice(2, None)
        sl_mm[ax_a] = slice(None, -2); sl_mm[ax_b] = slice(None, -2)
        return (values[tuple(sl_pp)] - values[tuple(sl_pm)]
                - values[tuple(sl_mp)] + values[tuple(sl_mm)])

    h2 = h * h
    u_zz = lap_z / (4.0 * h2)
    u_ww = lap_w / (4.0 * h2)
    u_zw = (cross(0, 2) + cross(1, 3)
            + 1j * (cross(0, 3) - cross(1, 2))) / (16.0 * h2)
    return u_zz, u_ww, u_zw


def _hinge(x: np.ndarray) -> np.ndarray:
    return np.square(np.maximum(x - _HINGE_OFFSET, 0.0))


def _certificate_integral(map_: HomogeneousMap, n: int, depth: int,
                          resolution: int) -> float:
    """Three-chart partition-of-unity quadrature of the wedge density."""
    h = 2.0 * _CERTIFICATE_EXTENT / resolution
    axis = -_CERTIFICATE_EXTENT + (np.arange(resolution + 2) - 0.5) * h
    interior = axis[1:-1]
    abs_z2 = (np.square(interior[:, None])
              + np.square(interior[None, :]))
    s_z = abs_z2[:, :, None, None]
    s_w = abs_z2[None, None, :, :]
    denom = 1.0 + s_z + s_w
    weight = _hinge(1.0 / denom)
    weight = weight / (weight + _hinge(s_z / denom) + _hinge(s_w / denom))
    total = 0.0
    for chart in range(3):
        u = _chart_values(map_, chart, axis, "green", depth)
        v = _chart_values(map_, chart, axis, "pullback", n)
        u_zz, u_ww, u_zw = _hessian_terms(u, h)
        v_zz, v_ww, v_zw = _hessian_terms(v, h)
        density = (u_zz * v_ww + u_ww * v_zz
                   - 2.0 * np.real(u_zw * np.conj(v_zw)))
        total += float((weight * density).sum()) * h ** 4
    return total * 4.0 / math.pi ** 2


def mass_certificate(map_: HomogeneousMap, n: int, *,
                     green_depth: int = CERTIFICATE_DEPTH,
                     resolution: int = CERTIFICATE_RESOLUTION
                     ) -> MassCertificate:
    """Integral of current wedge ``n``-fold pullback area over the plane.

    The truncated potential of depth ``green_depth`` represents the
    current (depth 0 is the Fubini-Study form itself); the pairing equals
    ``degree^n`` exactly for every depth, so the returned value checks the
    quadrature and normalization.  ``n`` beyond 1 would need prohibitively
    fine global grids and is rejected.  The value is recomputed at half
    resolution; a relative spread above 10% flags the certificate as
    inconclusive.
    """
    if n not in (0, 1):
        raise ValueError("the global quadrature certificate supports "
                         "n in {0, 1}, got %r" % (n,))
    if int(green_depth) != green_depth or green_depth < 0:
        raise ValueError("green_depth must be a nonnegative integer")
    if int(resolution) != resolution or resolution < 8 or resolution % 2:
        raise ValueError("certificate resolution must be an even integer "
                         ">= 8, got %r" % (resolution,))
    value = _certificate_integral(map_, n, int(green_depth), int(resolution))
    coarse = _certificate_integral(map_, n, int(green_depth),
                                   int(resolution) // 2)
    residual = abs(value - coarse) / max(abs(value), 1e-300)
    return MassCertificate(value=value, coarse_value=coarse,
                           residual=residual,
                           inconclusive=residual > _CERTIFICATE_RESIDUAL_TOL,
                           pullbacks=n, green_depth=int(green_depth),
                           resolution=int(resolution))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def slice_csv(sm: SliceMeasure, path) -> None:
    """Write the nonzero cells as CSV rows (four indices, mass)."""
    idx = np.nonzero(sm.cell_mass)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z_re_cell", "z_im_cell", "w_re_cell",
                         "w_im_cell", "mass"])
        masses = sm.cell_mass[idx]
        for row in zip(*idx, masses):
            writer.writerow([int(row[0]), int(row[1]), int(row[2]),
                             int(row[3]), "%.17g" % row[4]])


def slice_summary(sm: SliceMeasure) -> dict:
    """JSON-ready summary of a slice measure."""
    base = sm.grid.coords.frame.base
    return {
        "base_chart": int(base.chart),
        "base_coords": [base.c1.real, base.c1.imag,
                        base.c2.real, base.c2.imag],
        "clamped_mass": float(sm.clamped_mass),
        "direction": sm.direction,
        "max_cell_mass": float(sm.cell_mass.max(initial=0.0)),
        "nonzero_cells": int(np.count_nonzero(sm.cell_mass)),
        "radius": float(sm.grid.radius),
        "resolution": int(sm.grid.resolution),
        "spacing": float(sm.grid.spacing),
        "total_mass": float(sm.total_mass),
    }

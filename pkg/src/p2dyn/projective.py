"""Points, maps, metric, and derivatives on the complex projective plane.

Points are homogeneous triples in C^3 \\ {0}.  Every point owns a preferred
affine chart: the index of its largest-modulus coordinate (ties resolved to
the lowest index), which keeps affine representatives inside the closed unit
bidisk.  Maps are triples of homogeneous polynomials of a common degree d
with 2 <= d <= 8, stored as dense exponent/coefficient tables.

Most routines come in two flavours: scalar wrappers operating on
:class:`HomogeneousPoint` and vectorized kernels operating on ``(N, 3)``
complex arrays.  The vectorized kernels are the hot paths used by the
samplers and grid evaluators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CriticalPointError,
    DegenerateEvaluationError,
    DegenerateMapError,
)

#: indices of the two affine coordinates for each chart, in increasing order
CHART_OTHERS = ((1, 2), (0, 2), (0, 1))

#: evaluations whose sup-norm falls below this (on sup-normalized input)
#: count as degenerate
DEGENERATE_EVAL_TOL = 1e-14

#: chart-Jacobian modulus below which differentials refuse to invert
CRITICAL_JACOBIAN_TOL = 1e-12

MAX_DEGREE = 8


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------

def as_point_array(points) -> np.ndarray:
    """Coerce input to an (N, 3) complex array of homogeneous triples."""
    arr = np.asarray(points, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("expected an (N, 3) array of homogeneous triples")
    return arr


def sup_normalize(points: np.ndarray) -> np.ndarray:
    """Scale each row to unit sup-norm."""
    arr = as_point_array(points)
    scale = np.max(np.abs(arr), axis=1)
    if np.any(scale == 0.0):
        raise ValueError("zero vector is not a projective point")
    return arr / scale[:, None]


def chart_indices(points: np.ndarray) -> np.ndarray:
    """Index of the largest-modulus coordinate per row (ties -> lowest)."""
    return np.argmax(np.abs(as_point_array(points)), axis=1)


def chart_normalize(points: np.ndarray, charts: np.ndarray | None = None):
    """Divide each row by its chart coordinate.

    Returns ``(normalized, charts)`` where the chart coordinate of each
    normalized row equals exactly 1.
    """
    arr = as_point_array(points)
    if charts is None:
        charts = chart_indices(arr)
    pivot = np.take_along_axis(arr, charts[:, None], axis=1)[:, 0]
    return arr / pivot[:, None], charts


def affine_coords(points: np.ndarray, charts: np.ndarray | None = None):
    """Affine coordinates ``(N, 2)`` in each row's own chart."""
    norm, charts = chart_normalize(points, charts)
    others = np.asarray(CHART_OTHERS)[charts]  # (N, 2)
    coords = np.take_along_axis(norm, others, axis=1)
    return coords, charts


def lift_from_chart(chart: int, coords: np.ndarray) -> np.ndarray:
    """Inverse of :func:`affine_coords` for a fixed chart: insert 1."""
    coords = np.asarray(coords, dtype=np.complex128)
    if coords.ndim == 1:
        coords = coords[None, :]
    out = np.empty((coords.shape[0], 3), dtype=np.complex128)
    i, j = CHART_OTHERS[chart]
    out[:, chart] = 1.0
    out[:, i] = coords[:, 0]
    out[:, j] = coords[:, 1]
    return out


def fs_distance_batch(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Fubini-Study chordal distance |p ^ q| / (|p| |q|), broadcastable.

    This is the sine of the Fubini-Study angle: 0 on equal projective
    points, 1 on orthogonal ones.
    """
    p = np.asarray(p, dtype=np.complex128)
    q = np.asarray(q, dtype=np.complex128)
    cross = np.cross(p, q)
    num = np.linalg.norm(cross, axis=-1)
    den = np.linalg.norm(p, axis=-1) * np.linalg.norm(q, axis=-1)
    return np.minimum(num / den, 1.0)


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomogeneousPoint:
    """A point of the projective plane as a homogeneous triple."""

    coords: tuple[complex, complex, complex]

    def __init__(self, coords):
        arr = np.asarray(coords, dtype=np.complex128).reshape(3)
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("non-finite homogeneous coordinates")
        if np.max(np.abs(arr)) == 0.0:
            raise ValueError("zero vector is not a projective point")
        object.__setattr__(self, "coords", tuple(complex(c) for c in arr))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.complex128)

    @property
    def chart(self) -> int:
        return int(chart_indices(self.array[None, :])[0])

    def normalized(self) -> "HomogeneousPoint":
        """Representative scaled to unit sup-norm."""
        return HomogeneousPoint(sup_normalize(self.array[None, :])[0])

    def chart_point(self) -> "ChartPoint":
        coords, charts = affine_coords(self.array[None, :])
        return ChartPoint(int(charts[0]), complex(coords[0, 0]),
                          complex(coords[0, 1]))

    def distance(self, other: "HomogeneousPoint") -> float:
        return float(fs_distance_batch(self.array, other.array))


@dataclass(frozen=True)
class ChartPoint:
    """Affine representative: chart index plus the two affine coordinates.

    The affine coordinates are the remaining homogeneous coordinates (in
    increasing index order) divided by the chart coordinate; on a point's
    own chart both lie in the closed unit bidisk.
    """

    chart: int
    c1: complex
    c2: complex

    def __post_init__(self):
        if self.chart not in (0, 1, 2):
            raise ValueError("chart index must be 0, 1, or 2")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.c1, self.c2], dtype=np.complex128)

    def homogeneous(self) -> HomogeneousPoint:
        return HomogeneousPoint(lift_from_chart(self.chart, self.coords)[0])


def fs_distance(p: HomogeneousPoint, q: HomogeneousPoint) -> float:
    """Fubini-Study chordal distance between two points."""
    return p.distance(q)


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector at a point, expressed in that point's chart."""

    point: HomogeneousPoint
    chart: int
    components: tuple[complex, complex]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=np.complex128)


# ---------------------------------------------------------------------------
# homogeneous polynomial maps
# ---------------------------------------------------------------------------

def _component_table(table, degree):
    """Validate one component's {(i, j, k): coeff} exponent table."""
    exps = []
    coeffs = []
    for key, val in sorted(table.items()):
        i, j, k = (int(e) for e in key)
        if min(i, j, k) < 0 or i + j + k != degree:
            raise DegenerateMapError(
                "exponent triple %r does not have total degree %d"
                % (key, degree))
        if val != 0:
            exps.append((i, j, k))
            coeffs.append(complex(val))
    if not exps:
        raise DegenerateMapError("component is identically zero")
    return np.asarray(exps, dtype=np.int64), np.asarray(coeffs,
                                                        dtype=np.complex128)


def _eval_terms(exps, coeffs, points):
    """Evaluate sum coeffs * z^i w^j t^k on an (N, 3) array."""
    n = points.shape[0]
    dmax = int(exps.max())
    pows = np.empty((3, n, dmax + 1), dtype=np.complex128)
    pows[:, :, 0] = 1.0
    for var in range(3):
        col = points[:, var]
        for e in range(1, dmax + 1):
            pows[var, :, e] = pows[var, :, e - 1] * col
    vals = (pows[0][:, exps[:, 0]]
            * pows[1][:, exps[:, 1]]
            * pows[2][:, exps[:, 2]])
    return vals @ coeffs


def _derivative_table(exps, coeffs, var):
    """Exponent table of the partial derivative along one variable."""
    mask = exps[:, var] > 0
    if not np.any(mask):
        return None
    dexps = exps[mask].copy()
    dcoeffs = coeffs[mask] * dexps[:, var]
    dexps[:, var] -= 1
    return dexps, dcoeffs


class HomogeneousMap:
    """Endomorphism candidate: three homogeneous polynomials of degree d.

    Construction validates homogeneity, the degree range, and that no
    component is identically zero.  Full nondegeneracy (no common root) is
    certified separately through preimage counting (see the zoo module).
    """

    def __init__(self, components, name: str = "map"):
        if len(components) != 3:
            raise DegenerateMapError("a map needs exactly three components")
        degrees = set()
        for table in components:
            for key in table:
                i, j, k = key
                degrees.add(int(i) + int(j) + int(k))
        if len(degrees) != 1:
            raise DegenerateMapError(
                "components must share a single total degree")
        degree = degrees.pop()
        if not 2 <= degree <= MAX_DEGREE:
            raise DegenerateMapError(
                "degree %d outside the supported range [2, %d]"
                % (degree, MAX_DEGREE))
        self.degree = degree
        self.name = name
        self.tables = tuple(dict(t) for t in components)
        self._terms = tuple(_component_table(t, degree) for t in components)
        self._jac_terms = tuple(
            tuple(_derivative_table(exps, coeffs, var) for var in range(3))
            for exps, coeffs in self._terms)
        self._c2_cache: float | None = None

    # -- evaluation --------------------------------------------------------

    def evaluate_batch(self, points: np.ndarray,
                       renormalize: bool = True) -> np.ndarray:
        """Apply the lift to an (N, 3) array of sup-normalized triples.

        Rows whose image collapses below the degeneracy threshold raise
        :class:`DegenerateEvaluationError`.
        """
        pts = sup_normalize(points)
        out = np.empty_like(pts)
        for comp, (exps, coeffs) in enumerate(self._terms):
            out[:, comp] = _eval_terms(exps, coeffs, pts)
        scale = np.max(np.abs(out), axis=1)
        if np.any(scale <= DEGENERATE_EVAL_TOL):
            raise DegenerateEvaluationError(
                "map %r collapsed a point to ~0 (common-zero locus hit)"
                % self.name)
        if renormalize:
            out /= scale[:, None]
        return out

    def evaluate_batch_safe(self, points: np.ndarray):
        """Like :meth:`evaluate_batch` but returns a validity mask.

        Rows that collapse below the degeneracy threshold come back as
        unit vectors with ``ok`` False instead of raising; used by solvers
        that must filter wild intermediate candidates row by row.
        """
        pts = sup_normalize(points)
        out = np.empty_like(pts)
        for comp, (exps, coeffs) in enumerate(self._terms):
            out[:, comp] = _eval_terms(exps, coeffs, pts)
        scale = np.max(np.abs(out), axis=1)
        ok = scale > DEGENERATE_EVAL_TOL
        safe = np.where(ok, scale, 1.0)
        out /= safe[:, None]
        out[~ok] = np.array([1.0, 0.0, 0.0], dtype=np.complex128)
        return out, ok

    def evaluate(self, point: HomogeneousPoint) -> HomogeneousPoint:
        """Image of a point, renormalized to unit sup-norm."""
        return HomogeneousPoint(self.evaluate_batch(point.array[None, :])[0])

    def orbit_batch(self, points: np.ndarray, length: int) -> np.ndarray:
        """Forward orbits: array (N, length + 1, 3), renormalized each step."""
        pts = sup_normalize(points)
        out = np.empty((pts.shape[0], length + 1, 3), dtype=np.complex128)
        out[:, 0] = pts
        for k in range(length):
            pts = self.evaluate_batch(pts)
            out[:, k + 1] = pts
        return out

    # -- derivatives -------------------------------------------------------

    def jacobian_h_batch(self, points: np.ndarray) -> np.ndarray:
        """Homogeneous 3x3 Jacobian dF_i/dx_j on an (N, 3) array."""
        pts = as_point_array(points)
        n = pts.shape[0]
        jac = np.zeros((n, 3, 3), dtype=np.complex128)
        for comp in range(3):
            for var in range(3):
                dt = self._jac_terms[comp][var]
                if dt is not None:
                    jac[:, comp, var] = _eval_terms(dt[0], dt[1], pts)
        return jac

    def chart_differential_batch(self, points: np.ndarray):
        """Derivative of the chart representation at each row.

        Returns ``(mats, charts_in, charts_out)`` where ``mats[k]`` is the
        2x2 complex derivative of the map read from the k-th point's own
        chart to its image's own chart.
        """
        pts, charts_in = chart_normalize(points)
        images = np.empty_like(pts)
        for comp, (exps, coeffs) in enumerate(self._terms):
            images[:, comp] = _eval_terms(exps, coeffs, pts)
        scale = np.max(np.abs(images), axis=1)
        if np.any(scale <= DEGENERATE_EVAL_TOL):
            raise DegenerateEvaluationError(
                "map %r collapsed a point to ~0" % self.name)
        charts_out = np.argmax(np.abs(images), axis=1)
        jac = self.jacobian_h_batch(pts)

        n = pts.shape[0]
        others = np.asarray(CHART_OTHERS)
        rows = others[charts_out]          # (N, 2) output affine indices
        cols = others[charts_in]           # (N, 2) input affine indices
        fb = np.take_along_axis(images, charts_out[:, None], axis=1)[:, 0]
        mats = np.empty((n, 2, 2), dtype=np.complex128)
        idx = np.arange(n)
        for r in range(2):
            fr = images[idx, rows[:, r]]
            for c in range(2):
                jr = jac[idx, rows[:, r], cols[:, c]]
                jb = jac[idx, charts_out, cols[:, c]]
                mats[:, r, c] = (jr * fb - fr * jb) / (fb * fb)
        return mats, charts_in, charts_out

    def __repr__(self):
        return "HomogeneousMap(%r, degree=%d)" % (self.name, self.degree)


@dataclass(frozen=True)
class ChartDifferential:
    """2x2 derivative of a map between the source and image charts."""

    matrix: np.ndarray
    chart_in: int
    chart_out: int

    @property
    def det(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


def chart_differential(map_: HomogeneousMap, point: HomogeneousPoint,
                       check_critical: bool = True) -> ChartDifferential:
    """Derivative of the chart representation of a map at a point.

    With ``check_critical`` the determinant is required to exceed the
    critical threshold; otherwise :class:`CriticalPointError` is raised.
    """
    mats, cin, cout = map_.chart_differential_batch(point.array[None, :])
    diff = ChartDifferential(mats[0], int(cin[0]), int(cout[0]))
    if check_critical and abs(diff.det) < CRITICAL_JACOBIAN_TOL:
        raise CriticalPointError(
            "chart Jacobian determinant %.3e below threshold at %r"
            % (abs(diff.det), point.coords))
    return diff


def tangent_to_chart(point: HomogeneousPoint, vector: TangentVector,
                     chart: int) -> TangentVector:
    """Re-express a tangent vector in another chart at the same point."""
    if vector.chart == chart:
        return vector
    src = vector.chart
    norm, _ = chart_normalize(point.array[None, :],
                              np.asarray([src], dtype=np.int64))
    p = norm[0]
    if abs(p[chart]) < DEGENERATE_EVAL_TOL:
        raise CriticalPointError(
            "point lies on the coordinate line of the target chart")
    lift = np.zeros(3, dtype=np.complex128)
    i, j = CHART_OTHERS[src]
    lift[i], lift[j] = vector.components
    k1, k2 = CHART_OTHERS[chart]
    pb, vb = p[chart], lift[chart]
    comps = ((lift[k1] * pb - p[k1] * vb) / pb**2,
             (lift[k2] * pb - p[k2] * vb) / pb**2)
    return TangentVector(point, chart, (complex(comps[0]), complex(comps[1])))


def push_tangent(map_: HomogeneousMap, vector: TangentVector) -> TangentVector:
    """Push a tangent vector forward through the map."""
    diff = chart_differential(map_, vector.point, check_critical=False)
    v = tangent_to_chart(vector.point, vector, diff.chart_in)
    out = diff.matrix @ v.array
    image = map_.evaluate(vector.point)
    return TangentVector(image, diff.chart_out,
                         (complex(out[0]), complex(out[1])))


# ---------------------------------------------------------------------------
# polynomial algebra on exponent tables
# ---------------------------------------------------------------------------

def _mul_tables(a: dict, b: dict) -> dict:
    out: dict = {}
    for (i1, j1, k1), c1 in a.items():
        for (i2, j2, k2), c2 in b.items():
            key = (i1 + i2, j1 + j2, k1 + k2)
            out[key] = out.get(key, 0j) + c1 * c2
    return out


def _pow_table(a: dict, n: int) -> dict:
    out = {(0, 0, 0): 1.0 + 0j}
    for _ in range(n):
        out = _mul_tables(out, a)
    return out


def _clean_table(table: dict, rel_tol: float = 1e-14) -> dict:
    mags = [abs(c) for c in table.values()]
    floor = max(mags) * rel_tol if mags else 0.0
    return {k: c for k, c in table.items() if abs(c) > floor}


def compose(outer: HomogeneousMap, inner: HomogeneousMap,
            name: str | None = None) -> HomogeneousMap:
    """Coefficient table of ``outer(inner(.))`` (degree multiplies)."""
    inner_tables = [dict(t) for t in inner.tables]
    # cache powers of each inner component up to outer.degree
    powers = [[{(0, 0, 0): 1.0 + 0j}] for _ in range(3)]
    for comp in range(3):
        for n in range(outer.degree):
            powers[comp].append(
                _mul_tables(powers[comp][-1], inner_tables[comp]))
    comps = []
    for table in outer.tables:
        acc: dict = {}
        for (i, j, k), c in table.items():
            term = _mul_tables(powers[0][i], powers[1][j])
            term = _mul_tables(term, powers[2][k])
            for key, val in term.items():
                acc[key] = acc.get(key, 0j) + c * val
        comps.append(_clean_table(acc))
    if name is None:
        name = "%s.%s" % (outer.name, inner.name)
    return HomogeneousMap(comps, name=name)


def substitute_linear(map_: HomogeneousMap, matrix: np.ndarray,
                      name: str | None = None) -> HomogeneousMap:
    """Coefficient table of ``F(U x)`` for a 3x3 linear change ``U``."""
    u = np.asarray(matrix, dtype=np.complex128)
    rows = []
    for r in range(3):
        rows.append({(1, 0, 0): complex(u[r, 0]),
                     (0, 1, 0): complex(u[r, 1]),
                     (0, 0, 1): complex(u[r, 2])})
    powers = [[{(0, 0, 0): 1.0 + 0j}] for _ in range(3)]
    for var in range(3):
        for n in range(map_.degree):
            powers[var].append(_mul_tables(powers[var][-1], rows[var]))
    comps = []
    for table in map_.tables:
        acc: dict = {}
        for (i, j, k), c in table.items():
            term = _mul_tables(powers[0][i], powers[1][j])
            term = _mul_tables(term, powers[2][k])
            for key, val in term.items():
                acc[key] = acc.get(key, 0j) + c * val
        comps.append(_clean_table(acc))
    if name is None:
        name = "%s.rotated" % map_.name
    return HomogeneousMap(comps, name=name)


def dehomogenized_tables(map_: HomogeneousMap, chart: int) -> list[np.ndarray]:
    """Dense 2D coefficient matrices of each component on one chart.

    Entry ``[a, b]`` of matrix ``c`` is the coefficient of ``u^a v^b`` in
    component ``c`` after setting the chart coordinate to 1, where (u, v)
    are the chart's affine coordinates in increasing index order.
    """
    d = map_.degree
    i1, i2 = CHART_OTHERS[chart]
    out = []
    for table in map_.tables:
        mat = np.zeros((d + 1, d + 1), dtype=np.complex128)
        for exps, coeff in table.items():
            mat[exps[i1], exps[i2]] += coeff
        out.append(mat)
    return out


# ---------------------------------------------------------------------------
# geometry of local charts: second-derivative norm and injectivity radius
# ---------------------------------------------------------------------------

def _c2_norm_estimate(map_: HomogeneousMap, grid: int = 64,
                      safety: float = 2.0) -> float:
    """Estimated sup of second chart-derivatives over the unit bidisks.

    Samples a grid x grid lattice on each of the three input charts (which
    together cover the plane), reads the map in the output chart chosen at
    each node, and takes finite differences of the 2x2 first derivative.
    The result is inflated by a safety factor and cached on the map.
    """
    h = 1e-4
    sup = 0.0
    per_axis = max(2, int(round(grid ** 0.5)))  # complex nodes per variable
    side = np.linspace(-1.0, 1.0, per_axis)
    re, im = np.meshgrid(side, side)
    nodes = (re + 1j * im).ravel()
    uu, vv = np.meshgrid(nodes, nodes)
    base = np.stack([uu.ravel(), vv.ravel()], axis=1)
    for chart in range(3):
        pts = lift_from_chart(chart, base)
        offsets = [(h, 0), (-h, 0), (0, h), (0, -h), (0, 0)]
        mats = []
        ok = np.ones(pts.shape[0], dtype=bool)
        for du, dv in offsets:
            shifted = pts.copy()
            i, j = CHART_OTHERS[chart]
            shifted[:, i] += du
            shifted[:, j] += dv
            try:
                m, ci, co = map_.chart_differential_batch(shifted)
            except DegenerateEvaluationError:
                return float("inf")
            mats.append((m, ci, co))
        _, ci0, co0 = mats[-1]
        for k in range(4):
            ok &= (mats[k][1] == ci0) & (mats[k][2] == co0)
        if not np.any(ok):
            continue
        d_u = (mats[0][0][ok] - mats[1][0][ok]) / (2 * h)
        d_v = (mats[2][0][ok] - mats[3][0][ok]) / (2 * h)
        mag = max(np.max(np.abs(d_u)), np.max(np.abs(d_v)))
        sup = max(sup, float(mag))
    if sup == 0.0:
        sup = 1.0
    return safety * sup


def c2_norm(map_: HomogeneousMap) -> float:
    """Cached second-derivative sup-norm estimate for a map."""
    if map_._c2_cache is None:
        map_._c2_cache = _c2_norm_estimate(map_)
    return map_._c2_cache


def injectivity_radius(map_: HomogeneousMap, point: HomogeneousPoint) -> float:
    """Radius on which the chart representation is safely invertible.

    Uses the quantitative inverse-function bound min(a / C2, 1) with
    a = sigma_min(Df) / 2 and C2 the cached second-derivative estimate.
    """
    diff = chart_differential(map_, point, check_critical=True)
    sigma_min = float(diff.singular_values[-1])
    a = 0.5 * sigma_min
    return float(min(a / c2_norm(map_), 1.0))

"""Escape-rate potential of the invariant current of an endomorphism.

The dynamical Green function G of a degree-d endomorphism with polynomial
lift F is the renormalized escape rate

    G(p) = lim_N d^(-N) log ||F^N(p)||,

log-homogeneous of degree 1 (G(c p) = log|c| + G(p)).  The invariant
current is (i/pi) d d-bar G in any holomorphic trivialization, so sampling
G along holomorphic lift sections provides local potentials whose discrete
Laplacians feed the slice-measure machinery.

Partial sums telescope exactly -- G_N(p) = log||p|| + sum_{k<N}
d^(-k-1) log||F(v_k)|| with v_k the sup-renormalized orbit -- so each step
adds a bounded term and the truncation error after depth N is at most
B d^(-N) / (d-1), where B bounds |log ||F|| | on the sup-norm unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError
from .projective import HomogeneousMap, HomogeneousPoint, lift_from_chart

#: default escape-rate depth: d^(-40) is far below double-precision noise
DEFAULT_DEPTH = 40

_SPHERE_SAMPLE_SEED = 524287
_SPHERE_SAMPLE_COUNT = 4096


def _norm_growth_constants(map_: HomogeneousMap) -> tuple[float, float]:
    """(min, max) of ||F(v)||_sup over the sup-norm unit sphere.

    The max is the rigorous coefficient bound max_i sum |c_ij|; the min is
    a seeded sample minimum with a 2x safety margin (adequate for an error
    *estimate*; tests check the implied bound empirically).
    """
    upper = max(float(np.sum(np.abs(list(table.values()))))
                for table in map_.tables)
    rng = np.random.default_rng(_SPHERE_SAMPLE_SEED)
    n = _SPHERE_SAMPLE_COUNT
    pts = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    pts /= np.max(np.abs(pts), axis=1)[:, None]
    values = map_.evaluate_batch(pts, renormalize=False)
    lower = 0.5 * float(np.min(np.max(np.abs(values), axis=1)))
    return lower, upper


@dataclass(frozen=True)
class GreenEvaluator:
    """Escape-rate evaluator at a fixed truncation depth."""

    map: HomogeneousMap
    depth: int = DEFAULT_DEPTH
    _constants: tuple[float, float] = field(init=False, repr=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        object.__setattr__(self, "_constants",
                           _norm_growth_constants(self.map))

    @property
    def step_bound(self) -> float:
        """B with |log ||F(v)||_sup| <= B for sup-normalized v."""
        lower, upper = self._constants
        return max(abs(np.log(lower)), abs(np.log(upper)))

    def truncation_bound(self, depth: int | None = None) -> float:
        """|G - G_N| <= B d^(-N) / (d-1): geometric in the depth."""
        n = self.depth if depth is None else depth
        d = self.map.degree
        return self.step_bound * d ** (-float(n)) / (d - 1.0)


def escape_rate(ev: GreenEvaluator, lifts: np.ndarray,
                depth: int | None = None) -> np.ndarray:
    """G_N at the exact lifts given ((N,3) complex): log-homogeneous.

    Accumulates log ||F(v_k)||_sup over the sup-renormalized orbit, each
    term weighted d^(-k-1), plus log of the initial sup norm.
    """
    n = ev.depth if depth is None else depth
    pts = np.asarray(lifts, dtype=np.complex128)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    scale = np.max(np.abs(pts), axis=1)
    total = np.log(scale)
    v = pts / scale[:, None]
    inv_d = 1.0 / ev.map.degree
    factor = inv_d
    for _ in range(n):
        out = ev.map.evaluate_batch(v, renormalize=False)
        norms = np.max(np.abs(out), axis=1)
        total = total + factor * np.log(norms)
        v = out / norms[:, None]
        factor *= inv_d
    return total[0] if squeeze else total


def green_value(ev: GreenEvaluator, point: HomogeneousPoint) -> float:
    """Scale-invariant potential G(p) - log ||p||_2 of a projective point."""
    arr = point.array
    return float(escape_rate(ev, arr) - np.log(np.linalg.norm(arr)))


def chart_potential(ev: GreenEvaluator, chart: int,
                    coords: np.ndarray) -> np.ndarray:
    """G at the affine lifts with chart coordinate 1.

    ``coords`` is any (..., 2) complex array of affine coordinates; the
    result has shape coords.shape[:-1].  For the coordinatewise power map
    in the chart where the last coordinate is 1 this equals
    log max(1, |z|, |w|) exactly.
    """
    xi = np.asarray(coords, dtype=np.complex128)
    flat = xi.reshape(-1, 2)
    vals = escape_rate(ev, lift_from_chart(chart, flat))
    return vals.reshape(xi.shape[:-1])


def local_potential(ev: GreenEvaluator, coords, xi: np.ndarray) -> np.ndarray:
    """G sampled along a holomorphic lift section at frame coordinates xi.

    ``coords`` is anything with a ``lift_batch((M, 2) complex) -> (M, 3)``
    method (the normal-form frame charts provide one).  Sections differing
    by a nonvanishing holomorphic factor shift G pluriharmonically, so all
    downstream Laplacians are section-independent.  Nodes outside the
    chart's validity ball (``coords.domain_radius``, when present) raise
    :class:`ResolutionError` rather than silently sampling an invalid
    trivialization.
    """
    xi = np.asarray(xi, dtype=np.complex128)
    flat = xi.reshape(-1, 2)
    radius = getattr(coords, "domain_radius", None)
    if radius is not None:
        extent = float(np.max(np.linalg.norm(flat, axis=1), initial=0.0))
        if extent > radius:
            raise ResolutionError(
                "grid extends to |xi| = %.3g beyond the chart domain "
                "radius %.3g" % (extent, radius))
    vals = escape_rate(ev, coords.lift_batch(flat))
    return vals.reshape(xi.shape[:-1])


def laplacian_defect(values: np.ndarray, spacing: float) -> float:
    """Most-negative unnormalized 5-point stencil over interior nodes.

    ``values`` is a real 2D grid of potential samples with uniform complex
    grid ``spacing`` (same step in both real directions).  For samples of a
    plurisubharmonic function the stencil sums are >= -spacing^2 * 1e-6 up
    to discretization noise; callers use this as the positivity proxy.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or min(v.shape) < 3:
        raise ValueError("need an (m, n) grid with m, n >= 3")
    stencil = (v[:-2, 1:-1] + v[2:, 1:-1] + v[1:-1, :-2] + v[1:-1, 2:]
               - 4.0 * v[1:-1, 1:-1])
    del spacing  # the stencil is already in unnormalized (h^2-scaled) form
    return float(stencil.min())

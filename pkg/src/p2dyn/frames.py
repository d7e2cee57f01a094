"""Expansion-adapted local frames and affine normal-form coordinates.

At a point carrying a backward orbit, two tangent directions organize the
local dynamics: the fastest-expanded direction ``e1`` (the image under the
cocycle along the orbit of its leading right-singular vector, i.e. the
leading left-singular direction of the backward-depth cocycle) and the
slowly-expanded direction ``e2`` (the second right-singular vector of the
forward cocycle started at the point, which converges to the slow
invariant direction at rate ``exp(-m (l1 - l2))`` in the window length
``m``).  Both directions are stabilized by phase-aligned averaging over
the last five window depths.

The pair spans an affine chart ``p -> (Z, W)``: offsets from the base
point are computed in the Fubini-Study orthonormal tangent basis (project
the scaled lift difference onto the hermitian complement of the base) and
then expressed in the ``[e1 e2]`` basis.  Because the orthonormal step is
an isometry up to second-order chart distortion, the chart is bi-Lipschitz
with lower constant 1/2 and upper constant at most 2 / conditioning,
where ``conditioning = |det [e1 e2]|``.

For maps whose two exponents coincide (conformal cocycles) the
singular directions of any finite window are fluctuation artifacts; the
frame is still returned deterministically but is flagged ``isotropic``
when the mean per-iterate singular rates of the window products are
within five percent of each other.

The pullback scaling check follows a cloud of chart points down the
orbit's recorded inverse branches and reads off the per-depth linear
scaling factors ``|alpha_n|`` (fast coordinate) and ``|beta_n|`` (slow
coordinate) of the conjugated inverse branch.  Charts at interior depths
use the inverse-transported base frame (columns of ``P_k^{-1} [e1 e2]``
normalized, ``P_k`` the cocycle product along the stored orbit), which is
the covariant continuation of the base frame and is exact for conformal
maps; the linear factors are extracted with a fourth-order central
difference whose error budget (solver noise / step + step^4 curvature)
stays below 1e-9 in absolute terms, while plain median ratios of
coordinate moduli at a smaller radius are reported alongside as
diagnostics, including the off-diagonal leakage of pure-Z test vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FrameError
from .preimages import preimage_batch
from .projective import (
    ChartPoint,
    HomogeneousMap,
    HomogeneousPoint,
    as_point_array,
    fs_distance_batch,
    injectivity_radius,
    sup_normalize,
)
from .sampler import (
    COCYCLE_BACKOFF,
    CRITICAL_DET_TOL,
    BackwardOrbit,
    _chained_factors,
    _factor_from_bases,
    _raw_images,
    tangent_basis_batch,
)

#: minimum backward-orbit depth accepted by :func:`compute_frame`
MIN_FRAME_DEPTH = 20

#: number of trailing window depths averaged into each frame direction
DIRECTION_WINDOW = 5

#: frames with |det [e1 e2]| at or below this are rejected as degenerate
CONDITIONING_TOL = 1e-6

#: per-iterate singular-rate gap below which a cocycle counts as isotropic
ISOTROPY_TOL = 0.05

#: fraction of the local injectivity radius used as the chart domain
DOMAIN_FRACTION = 0.05

#: cap on live forward steps used to estimate the slow direction
FORWARD_CAP = 60

#: minimum usable forward steps for the slow direction
MIN_FORWARD_STEPS = 8

#: stencil offset and median-test radius as fractions of the test radius
STENCIL_FRACTION = 0.15
MEDIAN_FRACTION = 0.1

#: radius halvings attempted when followed points escape a chart
SHRINK_RETRIES = 5

#: cosine of the Fubini-Study angle beyond which a point leaves a chart
CHART_COS_MIN = 0.5


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise FrameError("zero vector cannot define a frame direction")
    return v / n


def _phase_aligned_mean(directions: list[np.ndarray]) -> np.ndarray:
    """Average unit vectors after rotating each to match the last's phase."""
    ref = directions[-1]
    acc = np.zeros_like(ref)
    for vec in directions:
        overlap = complex(np.vdot(ref, vec))
        phase = 1.0 if overlap == 0 else overlap.conjugate() / abs(overlap)
        acc += vec * phase
    return _unit(acc)


def _forward_factors(map_: HomogeneousMap, lift: np.ndarray,
                     cap: int) -> np.ndarray:
    """Censored chained cocycle factors along the forward orbit of a lift.

    Iterates until the Fubini-Study determinant of a factor collapses
    below the critical threshold (or ``cap`` steps), then drops the
    trailing :data:`~p2dyn.sampler.COCYCLE_BACKOFF` factors when the
    collapse detector fired, mirroring the exponent estimator's policy
    for float64 forward orbits.
    """
    pts = sup_normalize(np.asarray(lift, dtype=np.complex128)[None, :])
    basis = tangent_basis_batch(pts)
    factors = []
    censored = False
    for _ in range(cap):
        raw, ok = _raw_images(map_, pts)
        if not ok[0]:
            censored = True
            break
        basis_out = tangent_basis_batch(raw)
        fac = _factor_from_bases(map_, pts, raw, basis, basis_out)[0]
        det = abs(fac[0, 0] * fac[1, 1] - fac[0, 1] * fac[1, 0])
        if det < CRITICAL_DET_TOL:
            censored = True
            break
        factors.append(fac)
        pts = sup_normalize(raw)
        basis = basis_out
    if censored:
        factors = factors[:-COCYCLE_BACKOFF] if len(factors) > COCYCLE_BACKOFF \
            else []
    if not factors:
        raise FrameError(
            "forward orbit of the base point lost resolution immediately; "
            "no usable cocycle factors for the slow direction (base frames "
            "at backward-walk endpoints, whose forward horizon is deep)")
    return np.asarray(factors)


def _window_lengths(n: int) -> list[int]:
    return list(range(max(1, n - DIRECTION_WINDOW + 1), n + 1))


def _fast_direction(back_factors: np.ndarray) -> tuple[np.ndarray, float]:
    """Leading left-singular direction of the deepest windows, averaged.

    ``back_factors[j]`` maps depth ``n - j`` to depth ``n - j - 1`` below
    the base (factors ordered deepest first, so the product over the last
    ``k`` entries is the cocycle over the ``k`` steps ending at the base).
    Returns the averaged direction and the per-iterate log singular gap
    of the deepest window.
    """
    n = back_factors.shape[0]
    wanted = set(_window_lengths(n))
    prod = np.eye(2, dtype=np.complex128)
    directions = []
    gap = 0.0
    for k in range(1, n + 1):
        prod = prod @ back_factors[n - k]
        prod /= np.linalg.norm(prod)
        if k in wanted:
            u, s, _ = np.linalg.svd(prod)
            directions.append(_unit(u[:, 0]))
            if k == n:
                gap = float(np.log(s[0]) - np.log(s[1])) / k
    return _phase_aligned_mean(directions), gap


def _slow_direction(fwd_factors: np.ndarray) -> tuple[np.ndarray, float]:
    """Second right-singular direction of the deepest windows, averaged."""
    m = fwd_factors.shape[0]
    wanted = set(_window_lengths(m))
    prod = np.eye(2, dtype=np.complex128)
    directions = []
    gap = 0.0
    for k in range(1, m + 1):
        prod = fwd_factors[k - 1] @ prod
        prod /= np.linalg.norm(prod)
        if k in wanted:
            _, s, vh = np.linalg.svd(prod)
            directions.append(_unit(vh[1, :].conj()))
            if k == m:
                gap = float(np.log(s[0]) - np.log(s[1])) / k
    return _phase_aligned_mean(directions), gap


@dataclass(frozen=True, eq=False)
class OseledecFrame:
    """Fast/slow tangent directions at a base point, in its FS basis.

    ``e1`` and ``e2`` are unit 2-vectors expressed in the orthonormal
    Fubini-Study tangent basis columns ``tangent_basis`` at the unit lift
    ``base_lift``; ``conditioning = |det [e1 e2]|`` measures their angular
    separation and must exceed :data:`CONDITIONING_TOL`.  ``isotropic``
    marks cocycles whose per-iterate singular rates are within
    :data:`ISOTROPY_TOL` of each other, in which case the directions are
    finite-window fluctuation artifacts (deterministic but not dynamically
    distinguished).
    """

    base: ChartPoint
    e1: np.ndarray
    e2: np.ndarray
    conditioning: float
    isotropic: bool
    base_lift: np.ndarray
    tangent_basis: np.ndarray

    def __post_init__(self):
        for name in ("e1", "e2"):
            vec = np.asarray(getattr(self, name), dtype=np.complex128)
            if vec.shape != (2,) or abs(np.linalg.norm(vec) - 1.0) > 1e-9:
                raise FrameError("%s must be a unit 2-vector" % name)
            object.__setattr__(self, name, vec)
        lift = np.asarray(self.base_lift, dtype=np.complex128)
        object.__setattr__(self, "base_lift",
                           lift / np.linalg.norm(lift))
        det = abs(self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0])
        if abs(det - self.conditioning) > 1e-9:
            raise FrameError("conditioning %.3g does not match |det| %.3g"
                             % (self.conditioning, det))
        if self.conditioning <= CONDITIONING_TOL:
            raise FrameError(
                "frame directions are numerically parallel "
                "(|det [e1 e2]| = %.3g <= %.1g); the directions resonate "
                "even though the exponents may not"
                % (self.conditioning, CONDITIONING_TOL))

    @property
    def matrix(self) -> np.ndarray:
        """2x2 matrix with columns ``e1``, ``e2``."""
        return np.stack([self.e1, self.e2], axis=1)

    @property
    def ambient_e1(self) -> np.ndarray:
        """e1 as a 3-vector tangent to the unit lift."""
        return self.tangent_basis @ self.e1

    @property
    def ambient_e2(self) -> np.ndarray:
        return self.tangent_basis @ self.e2


def compute_frame(map_: HomogeneousMap, orbit: BackwardOrbit,
                  forward_cap: int = FORWARD_CAP) -> OseledecFrame:
    """Fast/slow frame at the endpoint ``x_0`` of a backward orbit.

    The fast direction is the image at ``x_0`` of the leading
    right-singular vector of the cocycle along the orbit; the slow
    direction is the second right-singular vector of the forward cocycle
    started at ``x_0`` (censored near critical degeneracy like the
    exponent estimator).  Each is averaged over the last
    :data:`DIRECTION_WINDOW` window depths with phase alignment.
    """
    if orbit.depth < MIN_FRAME_DEPTH:
        raise ValueError("frame estimation needs a backward orbit of depth "
                         ">= %d, got %d" % (MIN_FRAME_DEPTH, orbit.depth))
    chain = sup_normalize(orbit.array[::-1])
    back = _chained_factors(map_, chain)
    e1, gap_back = _fast_direction(back)
    fwd = _forward_factors(map_, orbit.array[0], forward_cap)
    if fwd.shape[0] < MIN_FORWARD_STEPS:
        raise FrameError(
            "only %d usable forward cocycle steps at the base point "
            "(need >= %d for the slow direction)"
            % (fwd.shape[0], MIN_FORWARD_STEPS))
    e2, gap_fwd = _slow_direction(fwd)
    base_lift = chain[-1]
    basis = tangent_basis_batch(base_lift[None, :])[0]
    det = abs(e1[0] * e2[1] - e1[1] * e2[0])
    isotropic = max(np.exp(gap_back), np.exp(gap_fwd)) <= 1.0 + ISOTROPY_TOL
    return OseledecFrame(
        base=HomogeneousPoint(base_lift).chart_point(),
        e1=e1, e2=e2, conditioning=float(det), isotropic=bool(isotropic),
        base_lift=base_lift, tangent_basis=basis)


def transport_frame(map_: HomogeneousMap, frame: OseledecFrame
                    ) -> OseledecFrame:
    """Frame at the forward image, directions pushed by the derivative.

    Used by invariance checks comparing local estimates at ``x`` and at
    ``f(x)`` in corresponding (covariant) coordinates.
    """
    pts = sup_normalize(frame.base_lift[None, :])
    raw, ok = _raw_images(map_, pts)
    if not ok[0]:
        raise FrameError("cannot transport frame: evaluation collapsed")
    basis_out = tangent_basis_batch(raw)
    fac = _factor_from_bases(map_, pts, raw, tangent_basis_batch(pts),
                             basis_out)[0]
    e1 = _unit(fac @ frame.e1)
    e2 = _unit(fac @ frame.e2)
    det = abs(e1[0] * e2[1] - e1[1] * e2[0])
    lift = raw[0] / np.linalg.norm(raw[0])
    return OseledecFrame(
        base=HomogeneousPoint(lift).chart_point(),
        e1=e1, e2=e2, conditioning=float(det), isotropic=frame.isotropic,
        base_lift=lift, tangent_basis=basis_out[0])


def _chart_offsets(base_lift: np.ndarray, points: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Tangent offsets of lifts from a unit base, plus chart cosines.

    Scales each lift so its component along the base is 1 and subtracts
    the base; the remainder lies exactly in the hermitian complement of
    the base.  The cosine |<base, q>| / |q| measures how far into the
    chart each point sits (1 at the base, 0 on the far hyperplane).
    """
    pts = as_point_array(points)
    inner = pts @ base_lift.conj()
    cosine = np.abs(inner) / np.linalg.norm(pts, axis=1)
    safe = np.where(np.abs(inner) == 0.0, 1.0, inner)
    offsets = pts / safe[:, None] - base_lift
    return offsets, cosine


@dataclass(frozen=True, eq=False)
class NormalFormCoordinates:
    """Affine chart adapted to a frame: ``p -> (Z, W)`` near the base.

    Offsets from the base are measured in the Fubini-Study orthonormal
    tangent basis and expressed in the (generally non-orthogonal)
    ``[e1 e2]`` basis, so the chart is holomorphic, exactly inverts via
    :meth:`lift_batch`, and satisfies the bi-Lipschitz sandwich
    ``d/2 <= |xi(p) - xi(q)| <= beta d`` against the Fubini-Study
    distance on the chart domain, with ``beta <= 2 / conditioning``.
    """

    frame: OseledecFrame
    domain_radius: float

    def __post_init__(self):
        if not (np.isfinite(self.domain_radius) and self.domain_radius > 0):
            raise ValueError("domain_radius must be a positive real")

    @property
    def bilipschitz_upper(self) -> float:
        """Upper chart constant: inverse least singular value, padded 2%."""
        smin = float(np.linalg.svd(self.frame.matrix, compute_uv=False)[-1])
        return 1.02 / smin

    def to_frame(self, points) -> np.ndarray:
        """(N, 2) frame coordinates of lifts near the base point."""
        offsets, cosine = _chart_offsets(self.frame.base_lift,
                                         as_point_array(points))
        if np.min(cosine) < CHART_COS_MIN:
            raise FrameError(
                "point at Fubini-Study cosine %.3g from the base is outside "
                "the frame chart" % float(np.min(cosine)))
        ortho = offsets @ self.frame.tangent_basis.conj()
        return np.ascontiguousarray(
            np.linalg.solve(self.frame.matrix, ortho.T).T)

    def lift_batch(self, xi: np.ndarray) -> np.ndarray:
        """(N, 3) holomorphic lift section of frame coordinates."""
        xi = np.asarray(xi, dtype=np.complex128).reshape(-1, 2)
        ambient = (self.frame.tangent_basis @ (self.frame.matrix @ xi.T)).T
        return np.ascontiguousarray(self.frame.base_lift[None, :] + ambient)


def default_coordinates(map_: HomogeneousMap, frame: OseledecFrame,
                        fraction: float = DOMAIN_FRACTION
                        ) -> NormalFormCoordinates:
    """Frame chart with domain a safe fraction of the injectivity radius."""
    radius = injectivity_radius(map_, HomogeneousPoint(frame.base_lift))
    return NormalFormCoordinates(frame=frame,
                                 domain_radius=fraction * radius)


def resonance_detect(lambda1: float, lambda2: float,
                     tolerance: float = 0.05):
    """Integer ``k >= 2`` with ``lambda1 ~ k * lambda2``, else ``None``.

    Detects when the fast exponent is an integer multiple of the slow one
    within ``tolerance * lambda2``; equal exponents are *not* resonant in
    this sense (``k >= 2`` is required).  Downstream reporting downgrades
    fast-coordinate claims to warnings under a detected resonance.
    """
    if not (np.isfinite(lambda1) and np.isfinite(lambda2)):
        raise ValueError("exponents must be finite")
    if lambda2 <= 0 or lambda1 < lambda2:
        raise ValueError("need lambda1 >= lambda2 > 0, got %.6g, %.6g"
                         % (lambda1, lambda2))
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    k = int(round(lambda1 / lambda2))
    if k >= 2 and abs(lambda1 - k * lambda2) < tolerance * lambda2:
        return k
    return None


class _ChartEscape(Exception):
    """Internal: a followed test point left its target chart."""


@dataclass(frozen=True, eq=False)
class PullbackScaling:
    """Per-depth linear scaling of the inverse branches in frame charts.

    ``alpha_abs[i]`` and ``beta_abs[i]`` are the moduli of the diagonal
    entries of the derivative at the base of the ``depths[i]``-fold
    inverse branch, conjugated by the frame charts (fourth-order stencil
    extraction); ``alpha_ratio``/``beta_ratio`` are the plain median
    ratios of coordinate moduli over a circle of test points, and
    ``leakage`` is the median off-diagonal share |W|/|Z| of the images of
    pure-Z test points.  ``radius`` is the test radius actually used
    after any chart-escape shrinking.
    """

    depths: np.ndarray
    alpha_abs: np.ndarray
    beta_abs: np.ndarray
    alpha_ratio: np.ndarray
    beta_ratio: np.ndarray
    leakage: np.ndarray
    radius: float

    @property
    def alpha_rates(self) -> np.ndarray:
        """Per-depth mean log rate of the fast coordinate scaling."""
        return np.log(self.alpha_abs) / self.depths

    @property
    def beta_rates(self) -> np.ndarray:
        return np.log(self.beta_abs) / self.depths


def _band_check(rates: np.ndarray, depths: np.ndarray, target: float,
                stderr: float, slack: float, label: str) -> None:
    eps = 3.0 * (stderr + slack)
    rate = float(rates[-1])
    if not (-target - eps <= rate <= -target + eps):
        raise FrameError(
            "pullback %s rate %.6f at depth %d outside [%.6f, %.6f]"
            % (label, rate, int(depths[-1]), -target - eps, -target + eps))


def pullback_scaling_check(map_: HomogeneousMap, orbit: BackwardOrbit,
                           coords: NormalFormCoordinates,
                           depths=None, exponents=None, slack: float = 0.02,
                           n_test: int = 16, seed: int = 0
                           ) -> PullbackScaling:
    """Follow chart points down the orbit and measure coordinate scaling.

    A cloud of test points around the base (stencil offsets along each
    frame axis plus circles of pure-Z and pure-W points) is pulled back
    step by step, always selecting the preimage closest to the recorded
    orbit point (the recorded inverse branch); at each requested depth the
    cloud is read in the inverse-transported frame chart and the linear
    scaling factors extracted.  Points that escape a chart or whose
    branch selection becomes ambiguous trigger a radius halving and a
    full retry (up to :data:`SHRINK_RETRIES`).

    When ``exponents`` is given — an object with ``lambda1``, ``lambda2``,
    ``stderr1``, ``stderr2`` attributes or a 4-tuple — the deepest mean
    rates are asserted to lie within ``3 * (stderr + slack)`` of the
    negated exponents, raising :class:`FrameError` otherwise.
    """
    depth = orbit.depth
    if depth < 1:
        raise ValueError("pullback check needs a backward orbit of depth "
                         ">= 1")
    if fs_distance_batch(coords.frame.base_lift,
                         orbit.array[0]) > 1e-9:
        raise ValueError("coordinates are not based at the orbit endpoint")
    if depths is None:
        depths = np.arange(1, depth + 1)
    depths = np.asarray(depths, dtype=int)
    if depths.size == 0 or np.any(depths < 1) or np.any(depths > depth) \
            or np.any(np.diff(depths) <= 0):
        raise ValueError("depths must be strictly increasing in [1, %d]"
                         % depth)
    if n_test < 4:
        raise ValueError("need at least 4 median test points per axis")

    sup = sup_normalize(orbit.array)            # rows x_0 .. x_-n
    back = _chained_factors(map_, sup[::-1])    # deepest-first factors
    units = sup / np.linalg.norm(sup, axis=1)[:, None]
    bases = tangent_basis_batch(sup)
    f0 = coords.frame.matrix

    radius = float(coords.domain_radius)
    last_error = None
    for _ in range(SHRINK_RETRIES):
        try:
            result = _pullback_once(map_, sup, units, bases, back, coords,
                                    f0, depths, radius, n_test, seed)
            break
        except _ChartEscape as exc:
            last_error = exc
            radius *= 0.5
    else:
        raise FrameError(
            "pullback test points kept escaping the frame charts after "
            "%d radius halvings (%s)" % (SHRINK_RETRIES, last_error))

    if exponents is not None:
        if isinstance(exponents, tuple):
            l1, l2, s1, s2 = exponents
        else:
            l1, l2 = exponents.lambda1, exponents.lambda2
            s1, s2 = exponents.stderr1, exponents.stderr2
        _band_check(result.alpha_rates, result.depths, l1, s1, slack,
                    "fast-coordinate")
        _band_check(result.beta_rates, result.depths, l2, s2, slack,
                    "slow-coordinate")
    return result


def _pullback_once(map_: HomogeneousMap, sup: np.ndarray, units: np.ndarray,
                   bases: np.ndarray, back: np.ndarray,
                   coords: NormalFormCoordinates, f0: np.ndarray,
                   depths: np.ndarray, radius: float, n_test: int,
                   seed: int) -> PullbackScaling:
    h = STENCIL_FRACTION * radius
    r_med = MEDIAN_FRACTION * radius
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * rng.random(n_test)
    ring = r_med * np.exp(1j * angles)

    xi0 = np.zeros((8 + 2 * n_test, 2), dtype=np.complex128)
    xi0[0, 0], xi0[1, 0] = h, -h
    xi0[2, 0], xi0[3, 0] = 2 * h, -2 * h
    xi0[4, 1], xi0[5, 1] = h, -h
    xi0[6, 1], xi0[7, 1] = 2 * h, -2 * h
    xi0[8:8 + n_test, 0] = ring
    xi0[8 + n_test:, 1] = ring

    current = coords.lift_batch(xi0)
    n_levels = int(depths[-1])
    depth_set = {int(d): i for i, d in enumerate(depths)}
    out = {name: np.empty(depths.size)
           for name in ("alpha_abs", "beta_abs", "alpha_ratio",
                        "beta_ratio", "leakage")}

    prod = np.eye(2, dtype=np.complex128)
    n_back = back.shape[0]
    for level in range(1, n_levels + 1):
        prod = prod @ back[n_back - level]
        target = sup[level]
        psets = preimage_batch(map_, current)
        for i, pset in enumerate(psets):
            expanded = pset.expanded_points()
            dist = fs_distance_batch(expanded, target)
            pick = int(np.argmin(dist))
            separated = fs_distance_batch(expanded, expanded[pick]) > 1e-8
            if np.any(separated):
                margin = float(np.min(dist[separated]))
                if dist[pick] > 0.25 * margin:
                    raise _ChartEscape(
                        "branch selection ambiguous at depth %d "
                        "(%.3g vs %.3g)" % (level, dist[pick], margin))
            current[i] = expanded[pick]
        idx = depth_set.get(level)
        if idx is None:
            continue
        fk_raw = np.linalg.solve(prod, f0)
        norms = np.linalg.norm(fk_raw, axis=0)
        fk = fk_raw / norms[None, :]
        det = abs(fk[0, 0] * fk[1, 1] - fk[0, 1] * fk[1, 0])
        if det <= CONDITIONING_TOL:
            raise FrameError(
                "inverse-transported frame degenerates at depth %d "
                "(|det| = %.3g); request shallower depths" % (level, det))
        offsets, cosine = _chart_offsets(units[level], current)
        if np.min(cosine) < CHART_COS_MIN:
            raise _ChartEscape("followed point left the chart at depth %d"
                               % level)
        xi = np.linalg.solve(fk, (offsets @ bases[level].conj()).T).T
        col_z = (8.0 * (xi[0] - xi[1]) - (xi[2] - xi[3])) / (12.0 * h)
        col_w = (8.0 * (xi[4] - xi[5]) - (xi[6] - xi[7])) / (12.0 * h)
        ring_z = xi[8:8 + n_test]
        ring_w = xi[8 + n_test:]
        out["alpha_abs"][idx] = abs(col_z[0])
        out["beta_abs"][idx] = abs(col_w[1])
        out["alpha_ratio"][idx] = float(np.median(np.abs(ring_z[:, 0]))) \
            / r_med
        out["beta_ratio"][idx] = float(np.median(np.abs(ring_w[:, 1]))) \
            / r_med
        out["leakage"][idx] = float(np.median(
            np.abs(ring_z[:, 1]) / np.abs(ring_z[:, 0])))
    return PullbackScaling(depths=depths.copy(), radius=radius, **out)

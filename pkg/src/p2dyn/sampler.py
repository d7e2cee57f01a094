"""Equilibrium-measure sampling, Lyapunov exponents, and contraction rates.

Backward random walks (one uniformly chosen preimage per step, counted with
multiplicity) equidistribute toward the measure of maximal entropy; the
walk is also numerically stable because inverse branches contract toward
the measure's support.  Forward orbits on that support are expanding, so a
float64 forward orbit loses the support after roughly ``52 / log2(e^l1)``
steps (representation error grows like ``e^{n l1}``); the exponent
estimator below therefore censors each walker's cocycle series a fixed
number of steps before the walker hits the critical-degeneracy detector,
which removes the exponentially concentrated end-of-track contamination
while keeping the estimator a plain ergodic average.

All tangent-space computations use Fubini-Study orthonormal frames: at a
lift p the tangent plane is the hermitian orthogonal complement of p, and
the derivative cocycle factor from p to its image q = F(p) is

    A = B(q)^H . DF(p) . B(p) * (||p|| / ||F(p)||),

a 2x2 matrix whose singular values are the metric derivative rates.
Factors compose exactly when consecutive steps share the basis at the
common point, and |det A| is basis-independent, so the same machinery
serves exponent estimation, backward-orbit validation, and the
inverse-branch Lipschitz diagnostic.

Concurrency model: walkers are independent; the implementation realizes
the parallel map over walkers as vectorized batch steps.  Walker k draws
from a generator seeded with the k-th child of ``SeedSequence(seed)``;
replacement walkers consume children ``count, count+1, ...`` in the order
failures are discovered (deterministic, because the batch sweep is).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMapError,
    InsufficientDataError,
    OrbitInvariantError,
    PreimageSolverError,
    SamplingError,
)
from .preimages import PreimageSet, preimage_batch
from .projective import (
    CHART_OTHERS,
    HomogeneousMap,
    HomogeneousPoint,
    as_point_array,
    fs_distance_batch,
    sup_normalize,
)

logger = logging.getLogger("p2dyn.sampler")

#: clearance threshold on the Fubini-Study Jacobian determinant
CRITICAL_DET_TOL = 1e-10
#: forward-backward consistency tolerance along stored orbits
ORBIT_CONSISTENCY_TOL = 1e-9
#: branch re-draws allowed when a chosen preimage is critically close
BRANCH_RETRIES = 5
#: aborted-walker budget before sampling gives up
MAX_FAILURE_FRACTION = 0.01

#: cocycle steps dropped before a walker's degeneracy event; the
#: off-support contamination halves per dropped step, so 12 steps shrink
#: it below 1e-3 of a single step's value
COCYCLE_BACKOFF = 12
#: steps dropped from the start of each series (QR alignment transient)
COCYCLE_BURN_CAP = 10
#: minimum usable steps for a walker to contribute an exponent; a depth-n
#: backward sample starts 2^-n off the support and survives forward for
#: about n + 43 steps, so depth 25 leaves a dozen usable steps and deeper
#: samples leave proportionally more
COCYCLE_MIN_WINDOW = 12

#: fixed generic starting lift for backward walks
GENERIC_START = (0.4371 + 0.2913j, -0.1718 + 0.8842j, 1.0 + 0.0j)


# ---------------------------------------------------------------------------
# Fubini-Study tangent frames and cocycle factors
# ---------------------------------------------------------------------------

def tangent_basis_batch(points) -> np.ndarray:
    """(N, 3, 2) orthonormal bases of the hermitian complements of rows.

    Columns come from a QR factorization of [p_unit, e_i, e_j] where e_i,
    e_j are the standard vectors away from each row's largest coordinate,
    so the triple is always nonsingular and the result deterministic.
    """
    pts = as_point_array(points)
    unit = pts / np.linalg.norm(pts, axis=1)[:, None]
    n = pts.shape[0]
    others = np.asarray(CHART_OTHERS)[np.argmax(np.abs(pts), axis=1)]
    m = np.zeros((n, 3, 3), dtype=np.complex128)
    m[:, :, 0] = unit
    rows = np.arange(n)
    m[rows, others[:, 0], 1] = 1.0
    m[rows, others[:, 1], 2] = 1.0
    q = np.linalg.qr(m)[0]
    return q[:, :, 1:]


def _raw_images(map_: HomogeneousMap, pts: np.ndarray):
    """Unnormalized images of sup-normalized rows plus a validity mask."""
    try:
        return map_.evaluate_batch(pts, renormalize=False), \
            np.ones(pts.shape[0], dtype=bool)
    except DegenerateMapError:
        out = np.empty_like(pts)
        ok = np.ones(pts.shape[0], dtype=bool)
        for i in range(pts.shape[0]):
            try:
                out[i] = map_.evaluate_batch(pts[i][None, :],
                                             renormalize=False)[0]
            except DegenerateMapError:
                out[i] = np.array([1.0, 0.0, 0.0])
                ok[i] = False
        return out, ok


def _factor_from_bases(map_: HomogeneousMap, pts: np.ndarray,
                       raw: np.ndarray, basis_in: np.ndarray,
                       basis_out: np.ndarray) -> np.ndarray:
    """FS cocycle factors B_out^H . DF(p) . B_in * (||p|| / ||F(p)||)."""
    jac = map_.jacobian_h_batch(pts)
    a = np.einsum("nij,njk,nkl->nil", basis_out.conj().transpose(0, 2, 1),
                  jac, basis_in)
    scale = np.linalg.norm(pts, axis=1) / np.linalg.norm(raw, axis=1)
    return a * scale[:, None, None]


def fs_tangent_maps(map_: HomogeneousMap, points):
    """Per-point FS derivative factors and raw images.

    Each factor's output basis comes from the point's own image, so the
    matrices are self-contained; their singular values and |det| are
    basis-independent metric derivatives.
    """
    pts = sup_normalize(as_point_array(points))
    raw, ok = _raw_images(map_, pts)
    mats = _factor_from_bases(map_, pts, raw, tangent_basis_batch(pts),
                              tangent_basis_batch(raw))
    return mats, raw, ok


def fs_jacobian_dets(map_: HomogeneousMap, points) -> np.ndarray:
    """|det| of the FS derivative at each row (0 where evaluation fails)."""
    mats, _, ok = fs_tangent_maps(map_, points)
    dets = np.abs(mats[:, 0, 0] * mats[:, 1, 1]
                  - mats[:, 0, 1] * mats[:, 1, 0])
    dets[~ok] = 0.0
    return dets


def _chained_factors(map_: HomogeneousMap, pts: np.ndarray) -> np.ndarray:
    """Composable factors along a stored orbit pts[0] -> pts[-1].

    Both bases of each factor are built from the *stored* representatives,
    so products telescope exactly; the stored image agrees with the true
    one within the orbit consistency tolerance.
    """
    sup = sup_normalize(pts)
    bases = tangent_basis_batch(sup)
    raw, ok = _raw_images(map_, sup[:-1])
    if not np.all(ok):
        raise OrbitInvariantError("orbit point evaluation collapsed")
    return _factor_from_bases(map_, sup[:-1], raw, bases[:-1], bases[1:])


# ---------------------------------------------------------------------------
# backward orbits
# ---------------------------------------------------------------------------

def branch_expanded_lifts(pset: PreimageSet):
    """(d^2, 3) preimage lifts in canonical branch order plus root ids.

    Roots are sorted by descending real part (then descending imaginary
    part) of their affine coordinates in the standard chart, points at
    infinity of that chart last; each root then repeats by multiplicity.
    Branch index 0 therefore selects the "largest" preimage, which on the
    real Chebyshev product is the coordinatewise positive square root.
    """
    entries = []
    for rid, root in enumerate(pset.roots):
        lift = root.point.homogeneous().array
        sup = np.max(np.abs(lift))
        t = lift[2]
        # keys are rounded so that solver noise (distinct roots differ by
        # >= the dedup clustering radius) never decides the order
        if np.abs(t) > 1e-12 * sup:
            a, b = lift[0] / t, lift[1] / t
            key = (0,) + tuple(np.round(
                [-a.real, -a.imag, -b.real, -b.imag], 12))
        else:
            norm = lift / sup
            key = (1,) + tuple(np.round(
                [-norm[0].real, -norm[0].imag,
                 -norm[1].real, -norm[1].imag], 12))
        entries.append((key, lift, rid, root.multiplicity))
    entries.sort(key=lambda e: e[0])
    lifts = []
    ids = []
    for _, lift, rid, mult in entries:
        for _ in range(mult):
            lifts.append(lift)
            ids.append(rid)
    return np.asarray(lifts, dtype=np.complex128), np.asarray(ids)


@dataclass(frozen=True)
class BackwardOrbit:
    """Finite backward orbit x_0, x_{-1}, ..., x_{-n} under a map.

    ``points[k+1]`` is a preimage of ``points[k]``; ``branch_choices[k]``
    is the canonical branch index (see :func:`branch_expanded_lifts`) that
    produced it.  Construction validates forward-backward consistency and
    critical-set clearance of every point.
    """

    map: HomogeneousMap
    points: tuple[HomogeneousPoint, ...]
    branch_choices: tuple[int, ...]

    def __post_init__(self):
        if len(self.points) != len(self.branch_choices) + 1:
            raise OrbitInvariantError(
                "need exactly one branch choice per backward step")
        arr = self.array
        if arr.shape[0] > 1:
            images = self.map.evaluate_batch(arr[1:])
            gaps = fs_distance_batch(images, arr[:-1])
            if np.max(gaps) >= ORBIT_CONSISTENCY_TOL:
                raise OrbitInvariantError(
                    "forward image strays %.3g from the stored orbit"
                    % float(np.max(gaps)))
        dets = fs_jacobian_dets(self.map, arr)
        if np.min(dets) < CRITICAL_DET_TOL:
            raise OrbitInvariantError(
                "orbit point within tolerance of the critical set "
                "(|Jac| = %.3g)" % float(np.min(dets)))

    @property
    def depth(self) -> int:
        return len(self.points) - 1

    @property
    def array(self) -> np.ndarray:
        """(depth + 1, 3) lifts ordered x_0, x_{-1}, ..., x_{-n}."""
        return np.asarray([p.array for p in self.points],
                          dtype=np.complex128)


def _draw_clear_branch(map_: HomogeneousMap, pset: PreimageSet,
                       rng: np.random.Generator):
    """One uniform multiplicity-weighted branch with clearance retries."""
    lifts, ids = branch_expanded_lifts(pset)
    excluded: set[int] = set()
    for _ in range(BRANCH_RETRIES + 1):
        allowed = np.flatnonzero(~np.isin(ids, sorted(excluded)))
        if allowed.size == 0:
            break
        idx = int(allowed[int(rng.integers(0, allowed.size))])
        det = float(fs_jacobian_dets(map_, lifts[idx][None, :])[0])
        if det >= CRITICAL_DET_TOL:
            return idx, lifts[idx]
        excluded.add(int(ids[idx]))
    raise OrbitInvariantError(
        "all preimage branches of %r are critically close" % map_.name)


def backward_orbit(map_: HomogeneousMap, x0: HomogeneousPoint, depth: int,
                   rng: np.random.Generator | None = None,
                   branch_choices=None) -> BackwardOrbit:
    """Depth-n backward random walk from x0 with validated invariants.

    Branches are chosen uniformly among the d^2 preimages counted with
    multiplicity; a critically close choice is re-drawn (different root,
    at most ``BRANCH_RETRIES`` times).  Passing ``branch_choices`` replays
    fixed canonical indices instead of sampling (no retries).
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if branch_choices is None and rng is None and depth > 0:
        raise ValueError("need an rng or explicit branch choices")
    if float(fs_jacobian_dets(map_, x0.array[None, :])[0]) < CRITICAL_DET_TOL:
        raise OrbitInvariantError("starting point is critically close")
    points = [x0]
    chosen = []
    current = x0
    for k in range(depth):
        pset = preimage_batch(map_, current.array[None, :])[0]
        if branch_choices is not None:
            idx = int(branch_choices[k])
            lifts, _ = branch_expanded_lifts(pset)
            if not 0 <= idx < lifts.shape[0]:
                raise OrbitInvariantError("branch index %d out of range" % idx)
            lift = lifts[idx]
        else:
            idx, lift = _draw_clear_branch(map_, pset, rng)
        current = HomogeneousPoint(lift)
        points.append(current)
        chosen.append(idx)
    return BackwardOrbit(map_, tuple(points), tuple(chosen))


# ---------------------------------------------------------------------------
# equilibrium sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureSample:
    """Uniformly weighted empirical sample of the equilibrium measure."""

    points: tuple[HomogeneousPoint, ...]
    weights: np.ndarray
    provenance: tuple[int, int, int]  # (depth, count, seed)
    n_failures: int = 0

    def __post_init__(self):
        if len(self.points) != self.weights.shape[0]:
            raise ValueError("one weight per point required")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @property
    def array(self) -> np.ndarray:
        return np.asarray([p.array for p in self.points],
                          dtype=np.complex128)


def _clear_start(map_: HomogeneousMap) -> HomogeneousPoint:
    """The fixed generic start, nudged deterministically if critical."""
    base = np.asarray(GENERIC_START, dtype=np.complex128)
    for k in range(6):
        candidate = base + np.array([0.013 * k, -0.007 * k, 0.0])
        if float(fs_jacobian_dets(map_, candidate[None, :])[0]) \
                >= CRITICAL_DET_TOL:
            return HomogeneousPoint(candidate)
    raise OrbitInvariantError(
        "could not find a critically clear start for %r" % map_.name)


def _solve_rows(map_: HomogeneousMap, pts: np.ndarray):
    """Preimage sets per row with deduplication and failure isolation.

    Returns a list with a :class:`PreimageSet` per row, or None where the
    solver failed for that row's target.
    """
    norm = sup_normalize(pts)
    view = np.ascontiguousarray(np.round(norm, 12)).view(np.float64)
    view = view.reshape(pts.shape[0], -1)
    _, first, inverse = np.unique(view, axis=0, return_index=True,
                                  return_inverse=True)
    distinct: list[PreimageSet | None]
    try:
        distinct = list(preimage_batch(map_, pts[first]))
    except PreimageSolverError:
        distinct = []
        for row in first:
            try:
                distinct.append(preimage_batch(map_, pts[row][None, :])[0])
            except PreimageSolverError:
                distinct.append(None)
    return [distinct[inverse[i]] for i in range(pts.shape[0])]


def sample_equilibrium(map_: HomogeneousMap, depth: int = 25,
                       count: int = 2000, seed: int = 0) -> MeasureSample:
    """Endpoints of ``count`` depth-n backward random walks.

    Walks run level-synchronously (one batched preimage solve per depth
    level over the distinct walker positions); each walker draws branches
    from its own seeded stream.  A walker whose solve or clearance retries
    fail is aborted and replaced by a fresh-seeded full walk (logged);
    more than ``MAX_FAILURE_FRACTION`` aborts raise ``SamplingError``.
    """
    if depth < 1 or count < 1:
        raise ValueError("depth and count must be >= 1")
    ss = np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(c) for c in ss.spawn(count)]
    start = _clear_start(map_)
    pos = np.tile(start.array, (count, 1))
    active = np.ones(count, dtype=bool)
    failures = 0

    def fail_budget_ok() -> bool:
        return failures <= MAX_FAILURE_FRACTION * count

    replacement_rows = []
    for _ in range(depth):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        sets = _solve_rows(map_, pos[rows])
        pending = []  # (row, pset, lifts, ids, excluded)
        for local, row in enumerate(rows):
            if sets[local] is None:
                failures += 1
                logger.info("walker %d aborted: preimage solve failed", row)
                active[row] = False
                replacement_rows.append(row)
            else:
                lifts, ids = branch_expanded_lifts(sets[local])
                pending.append([row, lifts, ids, set()])
        for _attempt in range(BRANCH_RETRIES + 1):
            if not pending:
                break
            cands = np.empty((len(pending), 3), dtype=np.complex128)
            picks = np.empty(len(pending), dtype=np.int64)
            for i, (row, lifts, ids, excluded) in enumerate(pending):
                allowed = np.flatnonzero(~np.isin(ids, sorted(excluded)))
                if allowed.size == 0:
                    picks[i] = -1
                    cands[i] = np.array([1.0, 0.0, 0.0])
                    continue
                picks[i] = int(allowed[int(rngs[row].integers(
                    0, allowed.size))])
                cands[i] = lifts[picks[i]]
            dets = fs_jacobian_dets(map_, cands)
            still = []
            for i, entry in enumerate(pending):
                row, lifts, ids, excluded = entry
                if picks[i] >= 0 and dets[i] >= CRITICAL_DET_TOL:
                    pos[row] = cands[i]
                elif picks[i] < 0:
                    failures += 1
                    logger.info("walker %d aborted: all branches critical",
                                row)
                    active[row] = False
                    replacement_rows.append(row)
                else:
                    excluded.add(int(ids[picks[i]]))
                    still.append(entry)
            pending = still
        for row, lifts, ids, excluded in pending:
            failures += 1
            logger.info("walker %d aborted: clearance retries exhausted", row)
            active[row] = False
            replacement_rows.append(row)
        if not fail_budget_ok():
            raise SamplingError(
                "%d of %d walkers aborted (> %.0f%%)"
                % (failures, count, 100 * MAX_FAILURE_FRACTION))

    for row in replacement_rows:
        done = False
        while fail_budget_ok() and not done:
            fresh = np.random.default_rng(ss.spawn(1)[0])
            try:
                orbit = backward_orbit(map_, start, depth, fresh)
                pos[row] = orbit.points[-1].array
                done = True
            except (PreimageSolverError, OrbitInvariantError):
                failures += 1
                logger.info("replacement walker for row %d aborted", row)
        if not done:
            raise SamplingError(
                "%d of %d walkers aborted (> %.0f%%)"
                % (failures, count, 100 * MAX_FAILURE_FRACTION))

    points = tuple(HomogeneousPoint(row) for row in pos)
    weights = np.full(count, 1.0 / count)
    return MeasureSample(points, weights, (depth, count, seed), failures)


def write_csv(sample: MeasureSample, path) -> None:
    """Write sample points as chart records: chart, re_z, im_z, re_w, im_w."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chart", "re_z", "im_z", "re_w", "im_w"])
        for point in sample.points:
            cp = point.chart_point()
            writer.writerow([cp.chart,
                             "%.17g" % cp.c1.real, "%.17g" % cp.c1.imag,
                             "%.17g" % cp.c2.real, "%.17g" % cp.c2.imag])


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentEstimate:
    """Lyapunov exponents (nats per iteration) with walker statistics.

    ``per_point`` holds each contributing walker's finite-time pair sorted
    descending; ``n_truncated`` counts walkers whose series was censored
    at the degeneracy detector (numerical loss of the expanding support),
    ``n_discarded`` those with too little usable data to contribute.
    """

    lambda1: float
    lambda2: float
    stderr1: float
    stderr2: float
    n_iter: int
    per_point: np.ndarray = field(repr=False)
    n_truncated: int = 0
    n_discarded: int = 0

    def __post_init__(self):
        if self.lambda1 < self.lambda2:
            raise ValueError("exponents must be sorted descending")


def _qr_accumulate(q: np.ndarray, mats: np.ndarray):
    """One batched 2x2 QR step: returns (new Q, log r11, log r22)."""
    a = mats @ q
    a1 = a[:, :, 0]
    a2 = a[:, :, 1]
    r11 = np.linalg.norm(a1, axis=1)
    r11 = np.maximum(r11, 1e-300)
    q1 = a1 / r11[:, None]
    r12 = np.sum(q1.conj() * a2, axis=1)
    u = a2 - q1 * r12[:, None]
    r22 = np.maximum(np.linalg.norm(u, axis=1), 1e-300)
    q2 = u / r22[:, None]
    return np.stack([q1, q2], axis=2), np.log(r11), np.log(r22)


def lyapunov_exponents(map_: HomogeneousMap, sample: MeasureSample,
                       n_iter: int) -> ExponentEstimate:
    """Forward QR cocycle statistics over the sample's walkers.

    Each sample point is iterated forward up to ``n_iter`` steps; the FS
    derivative factor feeds a per-walker QR accumulation.  A walker whose
    FS Jacobian falls below ``CRITICAL_DET_TOL`` is stopped there and
    logged: on an expanding support this fires when accumulated rounding
    has carried the computed orbit off the support, so the walker's last
    ``COCYCLE_BACKOFF`` steps (where the contamination concentrates) are
    censored and the rest kept.  The first few steps are dropped as the
    QR alignment transient.  Aggregates are means with standard errors
    across contributing walkers, exponents sorted descending per walker.
    """
    if n_iter < 100:
        raise ValueError("n_iter must be >= 100")
    pts = sample.array
    n = pts.shape[0]
    p = sup_normalize(pts)
    basis = tangent_basis_batch(p)
    q = np.tile(np.eye(2, dtype=np.complex128), (n, 1, 1))
    logs = np.zeros((n, n_iter, 2))
    length = np.zeros(n, dtype=np.int64)
    censored = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    for k in range(n_iter):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        raw, ok = _raw_images(map_, p[rows])
        basis_out = tangent_basis_batch(raw)
        mats = _factor_from_bases(map_, p[rows], raw, basis[rows], basis_out)
        dets = np.abs(mats[:, 0, 0] * mats[:, 1, 1]
                      - mats[:, 0, 1] * mats[:, 1, 0])
        dead = ~ok | (dets < CRITICAL_DET_TOL)
        if np.any(dead):
            for row in rows[dead]:
                logger.info("walker %d hit the critical tolerance zone at "
                            "step %d; censoring its tail", row, k)
            censored[rows[dead]] = True
            active[rows[dead]] = False
            rows = rows[~dead]
            if rows.size == 0:
                break
            keep = ~dead
            raw, basis_out, mats = raw[keep], basis_out[keep], mats[keep]
        q_new, l1, l2 = _qr_accumulate(q[rows], mats)
        q[rows] = q_new
        logs[rows, k, 0] = l1
        logs[rows, k, 1] = l2
        length[rows] = k + 1
        p[rows] = sup_normalize(raw)
        basis[rows] = basis_out

    per_point = []
    n_discarded = 0
    for i in range(n):
        stop = length[i] - (COCYCLE_BACKOFF if censored[i] else 0)
        burn = min(COCYCLE_BURN_CAP, stop // 4) if stop > 0 else 0
        if stop - burn < COCYCLE_MIN_WINDOW:
            n_discarded += 1
            logger.info("walker %d discarded: only %d usable cocycle steps",
                        i, max(stop - burn, 0))
            continue
        pair = logs[i, burn:stop].mean(axis=0)
        per_point.append(np.sort(pair)[::-1])
    if not per_point:
        raise InsufficientDataError(
            "no walker produced %d usable cocycle steps; sample at a "
            "larger depth to extend the forward-stable horizon"
            % COCYCLE_MIN_WINDOW)
    per_point = np.asarray(per_point)
    m = per_point.shape[0]
    means = per_point.mean(axis=0)
    if m > 1:
        errs = per_point.std(axis=0, ddof=1) / np.sqrt(m)
    else:
        errs = np.full(2, np.inf)
    return ExponentEstimate(float(means[0]), float(means[1]),
                            float(errs[0]), float(errs[1]), n_iter,
                            per_point, int(np.sum(censored)), n_discarded)


# ---------------------------------------------------------------------------
# inverse-branch contraction diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionDiagnostic:
    """Per-depth inverse-branch Lipschitz estimates along one orbit.

    ``log_lipschitz[n-1]`` estimates log Lip(f^{-n}) as minus the log of
    the smallest singular value of the forward cocycle over the orbit's
    last n steps; ``slope`` is the least-squares rate per step over the
    deeper half, to be compared with minus the small exponent.
    """

    depths: np.ndarray
    log_lipschitz: np.ndarray
    slope: float

    @property
    def rates(self) -> np.ndarray:
        """(1/n) log Lip(f^{-n}) per depth."""
        return self.log_lipschitz / self.depths


def contraction_diagnostic(orbit: BackwardOrbit) -> ContractionDiagnostic:
    """Fit the contraction rate of inverse branches along a backward orbit."""
    n = orbit.depth
    if n < 5:
        raise ValueError("need orbit depth >= 5")
    chain = orbit.array[::-1]  # x_{-n}, ..., x_0
    factors = _chained_factors(orbit.map, chain)
    log_lip = np.empty(n)
    prod = np.eye(2, dtype=np.complex128)
    log_scale = 0.0
    for k in range(n):
        # prepend the factor closest to x_0: after k+1 steps the product
        # is Df(x_{-1}) ... Df(x_{-(k+1)}), the forward cocycle over the
        # deepest k+1 points
        prod = prod @ factors[n - 1 - k]
        norm = np.linalg.norm(prod)
        prod /= norm
        log_scale += np.log(norm)
        sigma_min = np.linalg.svd(prod, compute_uv=False)[-1]
        log_lip[k] = -(np.log(sigma_min) + log_scale)
    depths = np.arange(1, n + 1)
    half = depths >= max(1, n // 2)
    slope = float(np.polyfit(depths[half], log_lip[half], 1)[0])
    return ContractionDiagnostic(depths, log_lip, slope)

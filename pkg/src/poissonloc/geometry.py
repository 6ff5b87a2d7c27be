"""Planar geometry: detector arrays, source parameters, identifiability.

The unknown is theta = (x1, y1, x2, y2), the stacked coordinates of two
sources. Detector k at position D_k starts seeing source i at the arrival
time tau_{i,k} = ||D_k - S_i|| / nu, where nu is the propagation speed.

A detector configuration is non-identifiable exactly when all detectors can
be covered by two orthogonal lines (a "cross"): reflecting a point-symmetric
source pair across one line of the cross preserves every detector's
unordered pair of arrival times. `lies_on_cross` decides this and returns
the witness, `confusable_pair` builds the matching pair of parameter points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError


@dataclass(frozen=True)
class ThetaVector:
    """Parameter point theta = (x1, y1, x2, y2)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).reshape(4)
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"theta must be finite, got {arr}")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_sources(cls, source1, source2) -> "ThetaVector":
        return cls(np.concatenate([np.asarray(source1, float).reshape(2),
                                   np.asarray(source2, float).reshape(2)]))

    @property
    def source1(self) -> np.ndarray:
        return self.values[:2]

    @property
    def source2(self) -> np.ndarray:
        return self.values[2:]

    def swapped(self) -> "ThetaVector":
        return ThetaVector(np.concatenate([self.values[2:], self.values[:2]]))

    def __array__(self, dtype=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_theta_array(theta) -> np.ndarray:
    """Coerce a ThetaVector or array-like to a validated (4,) float array."""
    if isinstance(theta, ThetaVector):
        return theta.values
    arr = np.asarray(theta, dtype=float).reshape(4)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"theta must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class DetectorArray:
    """K detector positions (K, 2) plus the propagation speed nu > 0."""

    positions: np.ndarray
    nu: float = 1.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise DomainError(f"positions must be (K, 2) with K >= 1, got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise DomainError("detector positions must be finite")
        diff = pos[:, None, :] - pos[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(d, np.inf)
        if d.min() == 0.0:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            raise DegenerateInputError(f"detectors {i} and {j} coincide at {pos[i]}")
        if not (self.nu > 0 and np.isfinite(self.nu)):
            raise DomainError(f"nu must be positive and finite, got {self.nu}")
        object.__setattr__(self, "positions", pos)

    @property
    def size(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ParameterBox:
    """Axis-aligned closed box in R^4 holding the admissible theta values."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(4)
        hi = np.asarray(self.upper, dtype=float).reshape(4)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("box bounds must be finite")
        if not np.all(lo < hi):
            ax = int(np.argmin(hi - lo))
            raise DomainError(f"box axis {ax} is empty: lower {lo[ax]} >= upper {hi[ax]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, theta, atol: float = 0.0) -> bool:
        t = as_theta_array(theta)
        return bool(np.all(t >= self.lower - atol) and np.all(t <= self.upper + atol))

    def clip(self, theta) -> np.ndarray:
        return np.clip(as_theta_array(theta), self.lower, self.upper)

    def corners(self) -> np.ndarray:
        """All 16 corners, shape (16, 4)."""
        bits = ((np.arange(16)[:, None] >> np.arange(4)[None, :]) & 1).astype(float)
        return self.lower + bits * self.span

    def source_box(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """2-D bounds (lower, upper) for source i in {0, 1}."""
        s = slice(2 * i, 2 * i + 2)
        return self.lower[s], self.upper[s]


def source_positions(theta) -> np.ndarray:
    """Both sources as a (2, 2) array, row i = source i."""
    return as_theta_array(theta).reshape(2, 2)


def arrival_times(array: DetectorArray, theta) -> np.ndarray:
    """Arrival times tau_{i,k} = ||D_k - S_i|| / nu, shape (2, K)."""
    src = source_positions(theta)
    diff = array.positions[None, :, :] - src[:, None, :]
    return np.hypot(diff[..., 0], diff[..., 1]) / array.nu


def direction_vectors(array: DetectorArray, theta) -> np.ndarray:
    """Unit vectors m_{i,k} from source i toward detector k, shape (2, K, 2).

    Raises
    ------
    DegenerateInputError
        if a source coincides with a detector (the direction is undefined).
    """
    src = source_positions(theta)
    diff = array.positions[None, :, :] - src[:, None, :]
    norms = np.hypot(diff[..., 0], diff[..., 1])
    if norms.min() == 0.0:
        i, k = np.unravel_index(np.argmin(norms), norms.shape)
        raise DegenerateInputError(f"source {i} coincides with detector {k}")
    return diff / norms[..., None]


def arrival_time_gradient(array: DetectorArray, theta) -> np.ndarray:
    """d tau_{i,k} / d theta, shape (2, K, 4).

    Only the block of source i is nonzero: moving source i by ds changes
    tau_{i,k} by -<m_{i,k}, ds> / nu.
    """
    m = direction_vectors(array, theta)
    K = array.size
    grad = np.zeros((2, K, 4))
    grad[0, :, 0:2] = -m[0] / array.nu
    grad[1, :, 2:4] = -m[1] / array.nu
    return grad


# --- cross detection -------------------------------------------------------


@dataclass(frozen=True)
class Line:
    """Line through `point` with unit `direction`."""

    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.point, float).reshape(2)
        d = np.asarray(self.direction, float).reshape(2)
        n = np.hypot(d[0], d[1])
        if n == 0.0 or not np.all(np.isfinite(d)) or not np.all(np.isfinite(p)):
            raise DegenerateInputError("line needs a finite point and nonzero direction")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "direction", d / n)

    def distance(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        rel = pts - self.point
        return np.abs(rel[:, 0] * self.direction[1] - rel[:, 1] * self.direction[0])


@dataclass(frozen=True)
class CrossWitness:
    """Two orthogonal lines covering every detector, plus the assignment.

    assignment[k] is 0 if detector k sits on line1, 1 if it needed line2.
    """

    line1: Line
    line2: Line
    assignment: np.ndarray
    max_offset: float = 0.0

    def intersection(self) -> np.ndarray:
        # solve p1 + t d1 = p2 + s d2; d1 and d2 orthonormal
        d1, d2 = self.line1.direction, self.line2.direction
        rel = self.line2.point - self.line1.point
        t = rel @ d1
        return self.line1.point + t * d1

    def describe(self) -> str:
        p, q = self.line1, self.line2
        o = self.intersection()
        return (
            f"cross: line1 through ({p.point[0]:.6g}, {p.point[1]:.6g}) "
            f"direction ({p.direction[0]:.6g}, {p.direction[1]:.6g}); "
            f"line2 orthogonal through ({q.point[0]:.6g}, {q.point[1]:.6g}); "
            f"intersection ({o[0]:.6g}, {o[1]:.6g}); "
            f"assignment {self.assignment.tolist()}"
        )


def _perp(d: np.ndarray) -> np.ndarray:
    return np.array([-d[1], d[0]])


def _witness_from(points, line1: Line, assignment, tol) -> CrossWitness | None:
    """Validate a candidate line1 plus perpendicular cover of the residues."""
    dist1 = line1.distance(points)
    on1 = dist1 <= tol
    rest = np.flatnonzero(~on1)
    d2 = _perp(line1.direction)
    if rest.size == 0:
        line2 = Line(line1.point, d2)
        return CrossWitness(line1, line2, np.zeros(len(points), dtype=np.int8),
                            float(dist1.max(initial=0.0)))
    line2 = Line(points[rest[0]], d2)
    dist2 = line2.distance(points[rest])
    if np.all(dist2 <= tol):
        assign = np.where(on1, np.int8(0), np.int8(1)).astype(np.int8)
        worst = max(float(dist1[on1].max(initial=0.0)), float(dist2.max(initial=0.0)))
        return CrossWitness(line1, line2, assign, worst)
    return None


def lies_on_cross(points, tol: float = 1e-9) -> CrossWitness | None:
    """Find two orthogonal lines covering all points, or None.

    Parameters
    ----------
    points : (K, 2) array-like
    tol : absolute distance tolerance for "on the line".

    Returns
    -------
    CrossWitness or None. Any configuration of K <= 3 points is coverable,
    so a witness always exists there.

    Notes
    -----
    If a cover exists, some line of it passes through >= 2 of the points
    whenever K >= 3 (a line carrying <= 1 point can be replaced by the
    perpendicular through that point). Enumerating all point pairs as line1
    candidates plus the perpendicular residue line is therefore exhaustive.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    K = pts.shape[0]
    if K == 0:
        raise DomainError("need at least one point")
    if K <= 2:
        d = pts[1] - pts[0] if K == 2 else np.array([1.0, 0.0])
        if K == 2 and np.hypot(*d) == 0.0:
            d = np.array([1.0, 0.0])
        line1 = Line(pts[0], d)
        return _witness_from(pts, line1, None, tol)
    for i in range(K):
        for j in range(i + 1, K):
            d = pts[j] - pts[i]
            if np.hypot(d[0], d[1]) <= tol:
                continue
            w = _witness_from(pts, Line(pts[i], d), None, tol)
            if w is not None:
                return w
            # the pair may instead sit on the orthogonal line of the cross
            w = _witness_from(pts, Line(pts[i], _perp(d / np.hypot(d[0], d[1]))), None, tol)
            if w is not None:
                return w
    return None


def confusable_pair(array: DetectorArray, box: ParameterBox | None = None,
                    witness: CrossWitness | None = None,
                    grid: int = 41) -> tuple[ThetaVector, ThetaVector] | None:
    """Two distinct parameter points that no detector on a cross can tell apart.

    For a cross with intersection O and axes (e1, e2): take S1 = O + a e1 + b e2
    off both lines, S2 the point reflection of S1 through O. Reflecting the
    pair across line1 maps line1-detectors to themselves and acts as the point
    reflection on line2, so every detector keeps its unordered pair of
    source distances. The two parameter points are

        theta  = (S1, S2),   theta' = (S1 reflected, S2 reflected).

    With `box` given, (a, b) is found by a deterministic grid scan so that
    both points lie inside it (each source in its own sub-box); returns None
    when the box admits no such pair, or when the array is not on a cross.
    """
    if witness is None:
        witness = lies_on_cross(array.positions)
        if witness is None:
            return None
    O = witness.intersection()
    e1 = witness.line1.direction
    e2 = witness.line2.direction

    def build(a: float, b: float):
        s1 = O + a * e1 + b * e2
        s2 = O - a * e1 - b * e2
        s1r = O + a * e1 - b * e2
        s2r = O - a * e1 + b * e2
        return (ThetaVector.from_sources(s1, s2), ThetaVector.from_sources(s1r, s2r))

    if box is None:
        scale = float(np.max(np.linalg.norm(array.positions - O, axis=1)))
        scale = scale if scale > 0 else 1.0
        return build(0.35 * scale, 0.55 * scale)

    lo1, hi1 = box.source_box(0)
    margin = 1e-3 * float(np.min(box.span))
    xs = np.linspace(lo1[0], hi1[0], grid)
    ys = np.linspace(lo1[1], hi1[1], grid)
    for x in xs:
        for y in ys:
            rel = np.array([x, y]) - O
            a, b = float(rel @ e1), float(rel @ e2)
            if abs(a) < margin or abs(b) < margin:
                continue
            th, thr = build(a, b)
            if (box.contains(th) and box.contains(thr)):
                return th, thr
            # the reflected pair may fit with its labels exchanged
            if box.contains(th) and box.contains(thr.swapped()):
                return th, thr.swapped()
    return None


def arrival_signature_equal(array: DetectorArray, theta, theta_prime,
                            tol: float = 1e-12) -> bool:
    """True when every detector sees the same unordered arrival-time pair."""
    t1 = np.sort(arrival_times(array, theta), axis=0)
    t2 = np.sort(arrival_times(array, theta_prime), axis=0)
    return bool(np.max(np.abs(t1 - t2)) <= tol)


def swap_min_error(theta_hat, theta_ref) -> float:
    """Euclidean estimation error minimized over the source labeling."""
    a = as_theta_array(theta_hat)
    b = as_theta_array(theta_ref)
    plain = float(np.linalg.norm(a - b))
    swap = float(np.linalg.norm(np.concatenate([a[2:], a[:2]]) - b))
    return min(plain, swap)

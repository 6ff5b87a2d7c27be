"""Samplers for the three limit laws of the rescaled estimation error.

In the smooth regime the rescaled error is Gaussian with the inverse
information matrix as covariance (zeta). In the cusp regime it converges
to a ratio functional xi of a likelihood-ratio field Z over the local
parameter u, driven by one two-sided Wiener process per source-detector
pair. In the change-point regime the analogous eta is driven by two-sided
Poisson jump processes.

xi and eta are integrals of u against Z(u) over the plane pair, normalized
by the integral of Z. ln Z separates into the two source blocks, so the
four-dimensional ratio factorizes into two ratios over a planar lattice;
each is evaluated in log space with a subtracted maximum (a stabilized
softmax), which makes overflow impossible by construction.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RegimeError
from .geometry import DetectorArray, arrival_times, as_theta_array, direction_vectors
from .likelihood import FisherMatrix, q_kappa_squared
from .seeds import substream
from .signal import IntensityModel, Regime

__all__ = ["Law", "GridSpec", "LimitLawSample", "sample_zeta", "sample_xi",
           "sample_eta", "XiSampler", "EtaSampler", "write_draws_csv"]

# pilot settings for the automatic Wiener-step search
_TUNE_CELLS = (512, 1024, 2048, 4096)
_TUNE_DRAWS = 48
_TUNE_RTOL = 0.02


class Law(enum.Enum):
    ZETA = "zeta"
    XI = "xi"
    ETA = "eta"


@dataclass(frozen=True)
class GridSpec:
    """Lattice controls for the xi and eta samplers.

    half_width: u-box half-width L (None selects a width at which the
    drift of ln Z has killed the field in every direction).
    resolution: lattice points per u-axis, odd so the origin is a point.
    v_half_width, step: domain half-width and cell size of the Wiener
    discretization (xi only); step None triggers the halving search.
    """

    half_width: float | None = None
    resolution: int = 17
    v_half_width: float | None = None
    step: float | None = None

    def __post_init__(self):
        r = self.resolution
        if not isinstance(r, (int, np.integer)) or r < 5 or r % 2 == 0:
            raise DomainError(f"resolution must be an odd integer >= 5, got {r}")
        for name in ("half_width", "v_half_width", "step"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class LimitLawSample:
    draws: np.ndarray
    law: Law
    grid_spec: GridSpec | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim != 2 or d.shape[1] != 4 or not np.all(np.isfinite(d)):
            raise DomainError("draws must be a finite (count, 4) array")
        object.__setattr__(self, "draws", d)
        if (self.grid_spec is None) != (self.law is Law.ZETA):
            raise DomainError("grid_spec is required exactly for the lattice laws")

    @property
    def count(self) -> int:
        return self.draws.shape[0]

    def mean_square_norm(self) -> float:
        """Empirical E||draw||^2, the quantity entering risk comparisons."""
        return float(np.mean(np.sum(self.draws ** 2, axis=1)))


def sample_zeta(fisher: FisherMatrix, count: int, seed: int = 0) -> LimitLawSample:
    """Centered Gaussian draws with covariance inverse(fisher)."""
    _check_count(count)
    cov = fisher.inverse()
    chol = np.linalg.cholesky(cov)
    z = substream(seed).standard_normal((int(count), 4))
    return LimitLawSample(z @ chol.T, Law.ZETA,
                          info={"trace_inverse": float(np.trace(cov))})


def _check_count(count) -> None:
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise DomainError(f"count must be a positive integer, got {count}")


def _frames(model: IntensityModel, array: DetectorArray, theta0):
    """Arrival times, unit directions, amplitudes and pre-jump rates at the
    true arrivals, all per unit n; shapes (2, K) and (2, K, 2)."""
    th = as_theta_array(theta0)
    tau = arrival_times(array, th)
    m = direction_vectors(array, th)
    if np.any(tau >= model.horizon):
        raise DomainError("an arrival time falls beyond the horizon; the "
                          "local limit description does not apply")
    K = array.size
    amp = np.empty((2, K))
    rate = np.empty((2, K))
    for i in range(2):
        for k in range(K):
            t = tau[i, k]
            amp[i, k] = float(model.amplitude(i, k, t))
            r = model.lambda0
            for j in range(2):
                # the front vanishes at its own onset, so this is the
                # pre-jump rate of source i with any overlap included
                r += float(model.amplitude(j, k, t)) * \
                    float(model.front.value(t - tau[j, k]))
            rate[i, k] = r
    return tau, m, amp, rate


def _block_lattice(half_width: float, resolution: int):
    """Planar lattice (resolution^2, 2) in lexicographic order, with ticks."""
    ticks = np.linspace(-half_width, half_width, resolution)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    return ticks, np.stack([gx.ravel(), gy.ravel()], axis=1)


def _auto_half_width(block_drift, kappa: float) -> float:
    """Half-width at which the worst-direction drift of ln Z reaches at
    least max(8^(2k+1), 16), so edge lattice weights are negligible."""
    angles = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    cmin = min(block_drift(np.array([np.cos(p), np.sin(p)])) for p in angles)
    if cmin <= 1e-12:
        raise DomainError(
            "the field has a direction with vanishing drift (all detectors "
            "in line with a source); supply grid_spec.half_width explicitly")
    power = 2.0 * kappa + 1.0
    return max(8.0, 16.0 ** (1.0 / power)) * cmin ** (-1.0 / power)


def _softmax_ratio(field: np.ndarray, lattice: np.ndarray):
    """Per-row ratio sum(u exp(f)) / sum(exp(f)) over the lattice and the
    average total weight on the lattice boundary ring.

    Row results must not depend on how many rows are processed together,
    so the projection runs one row at a time instead of as a batched
    matmul whose blocking would vary with the batch shape.
    """
    m = field.max(axis=1, keepdims=True)
    w = np.exp(field - m)
    tot = w.sum(axis=1)
    means = np.empty((field.shape[0], lattice.shape[1]))
    for d in range(field.shape[0]):
        means[d] = w[d] @ lattice
    means /= tot[:, None]
    edge = np.max(np.abs(lattice), axis=1) >= np.max(lattice) - 1e-12
    edge_mass = float(np.mean(w[:, edge].sum(axis=1) / tot))
    return means, edge_mass


class XiSampler:
    """Cusp-regime limit draws: the u-ratio of a field built from scaled
    two-sided Wiener integrals with a matching negative drift.

    Per pair (i, k) the integrand compares a front shifted by
    a = <u_i, m_ik> / nu against the unshifted one; the integral is a
    Riemann sum over a fixed v-grid, so all lattice values of one draw
    share a single Wiener path. Draw d uses its own substream, so results
    do not depend on how draws are batched.
    """

    def __init__(self, theta0, array: DetectorArray, model: IntensityModel,
                 grid_spec: GridSpec | None = None, seed: int = 0):
        if model.regime is not Regime.CUSP:
            raise RegimeError("xi sampler needs the cusp regime "
                              f"(0 < kappa < 1/2), got {model.regime.name}")
        self.array = array
        self.model = model
        self.seed = int(seed)
        spec = grid_spec if grid_spec is not None else GridSpec()
        kappa = model.front.kappa
        self.kappa = kappa
        self.q2 = q_kappa_squared(kappa)
        tau, m, amp, rate = _frames(model, array, theta0)
        self.gamma_hat = amp / (model.front.delta ** kappa * np.sqrt(rate))
        nu = array.nu
        power = 2.0 * kappa + 1.0

        if spec.half_width is not None:
            L = spec.half_width
        else:
            def block_drift(i):
                def drift(e):
                    inner = np.abs(m[i] @ e) / nu
                    return 0.5 * self.q2 * np.sum(
                        self.gamma_hat[i] ** 2 * inner ** power)
                return drift

            L = max(_auto_half_width(block_drift(0), kappa),
                    _auto_half_width(block_drift(1), kappa))
        self.ticks, self.lattice = _block_lattice(L, spec.resolution)

        # per-pair shift of the front onset for every lattice point
        self.a = np.einsum("pj,ikj->ikp", self.lattice, m) / nu
        self.drift = -0.5 * self.q2 * np.sum(
            self.gamma_hat[:, :, None] ** 2 * np.abs(self.a) ** power, axis=1)

        V = spec.v_half_width if spec.v_half_width is not None else 4.0 * L / nu
        info: dict = {}
        if spec.step is not None:
            cells = int(np.ceil(2.0 * V / spec.step))
            info["step_history"] = []
        else:
            cells, history, converged = self._tune_cells(V)
            info["step_history"] = history
            if not converged:
                info["step_warning"] = ("halving search did not settle below "
                                        f"{_TUNE_RTOL:.0%}; using the finest grid")
        self.step = 2.0 * V / cells
        self.cells = cells
        self.v_half_width = V
        self.grid_spec = GridSpec(half_width=float(L),
                                  resolution=spec.resolution,
                                  v_half_width=float(V), step=float(self.step))
        self.info = info
        self._G = {(i, k): self._build_pair_matrix(i, k, cells)
                   for i in range(2) for k in range(array.size)}

    def _kernel(self, a: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(v + a)_+^kappa - v_+^kappa on the (a, v) product grid."""
        shifted = np.clip(v[None, :] + a[:, None], 0.0, None) ** self.kappa
        base = np.clip(v, 0.0, None) ** self.kappa
        return shifted - base[None, :]

    def _centers(self, cells: int) -> np.ndarray:
        h = 2.0 * self.v_half_width / cells
        return -self.v_half_width + (np.arange(cells) + 0.5) * h

    def _build_pair_matrix(self, i: int, k: int, cells: int) -> np.ndarray:
        h = 2.0 * self.v_half_width / cells
        g = self._kernel(self.a[i, k], self._centers(cells))
        return self.gamma_hat[i, k] * np.sqrt(h) * g

    def _tune_cells(self, V: float):
        """Pick the v-grid size by halving the step until the pilot risk
        statistic moves less than the tolerance. The coarser grids reuse
        the finest normals by aggregation, so the comparison is matched
        and not washed out by Monte Carlo noise."""
        self.v_half_width = V
        P = self.lattice.shape[0]
        finest = _TUNE_CELLS[-1]
        fields = {c: np.tile(self.drift[:, None, :], (1, _TUNE_DRAWS, 1))
                  for c in _TUNE_CELLS}
        for i in range(2):
            for k in range(self.array.size):
                mats = {c: self._build_pair_matrix(i, k, c) for c in _TUNE_CELLS}
                for d in range(_TUNE_DRAWS):
                    z = substream(self.seed, 0, i * self.array.size + k,
                                  d).standard_normal(finest)
                    for c in _TUNE_CELLS:
                        group = finest // c
                        zc = z.reshape(c, group).sum(axis=1) / np.sqrt(group)
                        fields[c][i, d] += mats[c] @ zc
        history = []
        for c in _TUNE_CELLS:
            parts = [_softmax_ratio(fields[c][i], self.lattice)[0]
                     for i in range(2)]
            xi = np.hstack(parts)
            history.append((c, float(np.mean(np.sum(xi ** 2, axis=1)))))
        for j in range(len(history) - 1):
            prev, cur = history[j][1], history[j + 1][1]
            if abs(cur - prev) <= _TUNE_RTOL * max(abs(cur), 1e-12):
                return history[j + 1][0], history, True
        return finest, history, False

    def log_field(self, count: int) -> np.ndarray:
        """ln Z over the planar lattice, shape (count, 2, P).

        One matrix-vector product per draw and pair; a draw's values are
        then bit-identical however the draws are batched.
        """
        _check_count(count)
        K = self.array.size
        field = np.tile(self.drift[None, :, :], (count, 1, 1))
        for i in range(2):
            for k in range(K):
                G = self._G[(i, k)]
                for d in range(count):
                    z = substream(self.seed, d + 1,
                                  i * K + k).standard_normal(self.cells)
                    field[d, i] += G @ z
        return field

    def sample(self, count: int) -> LimitLawSample:
        field = self.log_field(count)
        parts = []
        edge = 0.0
        for i in range(2):
            means, edge_mass = _softmax_ratio(field[:, i], self.lattice)
            parts.append(means)
            edge = max(edge, edge_mass)
        info = dict(self.info)
        info["edge_mass"] = edge
        return LimitLawSample(np.hstack(parts), Law.XI, self.grid_spec, info)


class EtaSampler:
    """Change-point limit draws: the u-ratio of a compound-Poisson field.

    Shifting the onset of source i as seen by detector k later by dt > 0
    turns the events in the gap (rate lam_plus) into pre-jump ones, giving
    ln Z = -ell N + S dt with N counted on a unit-rate path at lam_plus dt;
    shifting earlier gives ln Z = ell N - S dt at rate lam_minus, where
    ell = ln(lam_plus / lam_minus). All lattice values of one draw share
    the same two jump paths per pair, one per side.

    The default lattice is finer per axis than the cusp sampler's: the
    field is piecewise constant in u, so the ratio quadrature needs more
    points for the same stability under refinement.
    """

    def __init__(self, theta0, array: DetectorArray, model: IntensityModel,
                 grid_spec: GridSpec | None = None, seed: int = 0):
        if model.regime is not Regime.CHANGE_POINT:
            raise RegimeError("eta sampler needs the change-point regime "
                              f"(kappa = 0), got {model.regime.name}")
        self.array = array
        self.model = model
        self.seed = int(seed)
        spec = grid_spec if grid_spec is not None else GridSpec(resolution=33)
        tau, m, amp, rate = _frames(model, array, theta0)
        self.amp = amp
        self.lam_minus = rate
        self.lam_plus = rate + amp
        self.ell = np.log(self.lam_plus / self.lam_minus)
        nu = array.nu
        # drift of -ln Z per unit shift, by shift direction
        dpos = self.ell * self.lam_plus - amp
        dneg = amp - self.ell * self.lam_minus

        if spec.half_width is not None:
            L = spec.half_width
        else:
            def block_drift(i):
                def drift(e):
                    a = m[i] @ e / nu
                    side = np.where(a < 0.0, dpos[i], dneg[i])
                    return float(np.sum(side * np.abs(a)))
                return drift

            L = max(_auto_half_width(block_drift(0), 0.0),
                    _auto_half_width(block_drift(1), 0.0))
        self.ticks, self.lattice = _block_lattice(L, spec.resolution)
        self.grid_spec = GridSpec(half_width=float(L),
                                  resolution=spec.resolution)

        self.a = np.einsum("pj,ikj->ikp", self.lattice, m) / nu
        # a < 0 delays the onset: the gap holds post-jump events
        later = self.a < 0.0
        self._jump_coef = np.where(later, -self.ell[:, :, None],
                                   self.ell[:, :, None])
        self._linear = np.where(later, self.amp[:, :, None] * np.abs(self.a),
                                -self.amp[:, :, None] * self.a)
        self._thr_plus = self.lam_plus[:, :, None] * np.clip(-self.a, 0.0, None)
        self._thr_minus = self.lam_minus[:, :, None] * np.clip(self.a, 0.0, None)
        self._span_plus = self._thr_plus.max(axis=2)
        self._span_minus = self._thr_minus.max(axis=2)

    def log_field(self, count: int) -> np.ndarray:
        """ln Z over the planar lattice, shape (count, 2, P)."""
        _check_count(count)
        K = self.array.size
        field = np.tile(self._linear.sum(axis=1)[None, :, :], (count, 1, 1))
        for i in range(2):
            for k in range(K):
                coef = self._jump_coef[i, k]
                later = self.a[i, k] < 0.0
                tp = self._thr_plus[i, k]
                tm = self._thr_minus[i, k]
                for d in range(count):
                    rng = substream(self.seed, d + 1, i * K + k)
                    path_p = np.sort(rng.uniform(
                        0.0, self._span_plus[i, k],
                        rng.poisson(self._span_plus[i, k])))
                    path_m = np.sort(rng.uniform(
                        0.0, self._span_minus[i, k],
                        rng.poisson(self._span_minus[i, k])))
                    counts = np.where(
                        later,
                        np.searchsorted(path_p, tp, side="right"),
                        np.searchsorted(path_m, tm, side="right"))
                    field[d, i] += coef * counts
        return field

    def sample(self, count: int) -> LimitLawSample:
        field = self.log_field(count)
        parts = []
        edge = 0.0
        for i in range(2):
            means, edge_mass = _softmax_ratio(field[:, i], self.lattice)
            parts.append(means)
            edge = max(edge, edge_mass)
        return LimitLawSample(np.hstack(parts), Law.ETA, self.grid_spec,
                              {"edge_mass": edge})


def sample_xi(theta0, array: DetectorArray, model: IntensityModel,
              grid_spec: GridSpec | None = None, count: int = 1000,
              seed: int = 0) -> LimitLawSample:
    return XiSampler(theta0, array, model, grid_spec, seed).sample(count)


def sample_eta(theta0, array: DetectorArray, model: IntensityModel,
               grid_spec: GridSpec | None = None, count: int = 1000,
               seed: int = 0) -> LimitLawSample:
    return EtaSampler(theta0, array, model, grid_spec, seed).sample(count)


def write_draws_csv(sample: LimitLawSample, path) -> None:
    """Draw index plus the four components, full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "u1", "u2", "u3", "u4"])
        for d, row in enumerate(sample.draws):
            writer.writerow([d] + [repr(float(x)) for x in row])

"""Sampling the detector streams and the observation container.

Each detector is an independent inhomogeneous Poisson process, sampled by
thinning against the constant majorant n * (max_t (S_1k + S_2k) + lambda0).
Detector k draws from the substream derive_seed(seed, k), so records are
byte-identical however the work is partitioned; the draw order per detector
is fixed (count, event times, thinning uniforms).

Disk format is JSON lines, one record per line:

    {"k": 0, "n": 500.0, "events": [0.0137, ...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError
from .geometry import DetectorArray, ThetaVector, as_theta_array, arrival_times
from .seeds import substream
from .signal import IntensityModel, _check_sizes

__all__ = [
    "DetectorRecord", "ObservationSet", "simulate", "count_path",
    "write_jsonl", "read_jsonl",
]


@dataclass(frozen=True)
class DetectorRecord:
    """Events of one detector: strictly increasing times in [0, horizon]."""

    detector: int
    events: np.ndarray
    n: float

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=float).reshape(-1)
        if ev.size and (not np.all(np.isfinite(ev)) or np.any(np.diff(ev) <= 0.0)):
            raise DataError(f"detector {self.detector}: events must be finite "
                            "and strictly increasing")
        if ev.size and ev[0] < 0.0:
            raise DataError(f"detector {self.detector}: negative event time {ev[0]}")
        object.__setattr__(self, "events", ev)

    @property
    def count(self) -> int:
        return self.events.size


@dataclass(frozen=True)
class ObservationSet:
    """All detector records plus the generating model and array."""

    records: tuple
    model: IntensityModel
    array: DetectorArray
    seed: int | None = None

    def __post_init__(self):
        recs = tuple(self.records)
        if len(recs) != self.array.size:
            raise DataError(f"{len(recs)} records for {self.array.size} detectors")
        for k, r in enumerate(recs):
            if r.detector != k:
                raise DataError(f"record {k} labeled detector {r.detector}")
            if r.events.size and r.events[-1] > self.model.horizon:
                raise DataError(f"detector {k}: event {r.events[-1]} beyond "
                                f"horizon {self.model.horizon}")
        object.__setattr__(self, "records", recs)

    def counts(self) -> np.ndarray:
        return np.array([r.count for r in self.records])

    @property
    def total_events(self) -> int:
        return int(self.counts().sum())


def simulate(model: IntensityModel, array: DetectorArray, theta,
             seed: int) -> ObservationSet:
    """Draw one observation set at parameter theta.

    Thinning with a constant bound per detector: N ~ Poisson(bound * T)
    candidate times, sorted uniforms, accepted where u * bound < lambda(t).
    """
    _check_sizes(model, array)
    t = as_theta_array(theta)
    tau = arrival_times(array, t)
    front = model.front
    records = []
    for k in range(array.size):
        rng = substream(seed, k)
        bound = model.n * (model.max_amplitude_sum(k) + model.lambda0)
        total = rng.poisson(bound * model.horizon)
        times = np.sort(rng.uniform(0.0, model.horizon, total))
        u = rng.uniform(size=total)
        lam = np.full(total, model.lambda0)
        for i in (0, 1):
            lam = lam + model.amplitude(i, k, times) * front.value(times - tau[i, k])
        keep = u * bound < model.n * lam
        events = np.unique(times[keep])  # ties have probability zero; be safe
        records.append(DetectorRecord(k, events, model.n))
    return ObservationSet(tuple(records), model, array, seed)


def count_path(record: DetectorRecord, t) -> np.ndarray:
    """N_k(t): number of events up to and including time t; vectorized."""
    return np.searchsorted(record.events, np.asarray(t, dtype=float), side="right")


def write_jsonl(obs: ObservationSet, path) -> None:
    with open(path, "w") as fh:
        for rec in obs.records:
            fh.write(json.dumps({"k": rec.detector, "n": rec.n,
                                 "events": rec.events.tolist()}) + "\n")


def read_jsonl(path, model: IntensityModel, array: DetectorArray,
               seed: int | None = None) -> ObservationSet:
    """Load records written by write_jsonl; validates against model/array.

    Raises DataError naming the first offending line.
    """
    by_k: dict[int, DetectorRecord] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict) or not {"k", "n", "events"} <= rec.keys():
                raise DataError(f"{path}: line {lineno}: need keys k, n, events")
            k = rec["k"]
            if not isinstance(k, int) or not 0 <= k < array.size:
                raise DataError(f"{path}: line {lineno}: detector index {k!r} "
                                f"outside 0..{array.size - 1}")
            if k in by_k:
                raise DataError(f"{path}: line {lineno}: duplicate detector {k}")
            try:
                by_k[k] = DetectorRecord(k, np.asarray(rec["events"], dtype=float),
                                         float(rec["n"]))
            except (DataError, ValueError, TypeError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    if len(by_k) == 0:
        raise DataError(f"{path}: no records")
    missing = [k for k in range(array.size) if k not in by_k]
    if missing:
        raise DataError(f"{path}: missing detector records {missing}")
    try:
        return ObservationSet(tuple(by_k[k] for k in range(array.size)),
                              model, array, seed)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc

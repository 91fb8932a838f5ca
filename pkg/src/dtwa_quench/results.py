"""Shared result containers and their CSV/JSON serialization.

Two tabular schemas are emitted everywhere:
  - observable series: header ``time,observable,mean,stderr``
  - threshold contours: header ``j,tau,status``
Times in files are always the dimensionless tJ. Floats are written with
repr so files round-trip bit-for-bit and reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ObservableSeries",
    "CorrelationField",
    "write_series_csv",
    "read_series_csv",
    "field_to_series",
    "field_from_series",
    "write_metadata",
    "read_metadata",
]

SERIES_HEADER = "time,observable,mean,stderr"


@dataclass
class ObservableSeries:
    """Per-time mean and standard error for named observables."""

    times: np.ndarray
    # observable id -> (mean, stderr), each shaped like times
    data: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def add(self, name: str, mean: np.ndarray, stderr: np.ndarray) -> None:
        mean = np.asarray(mean, dtype=np.float64)
        stderr = np.asarray(stderr, dtype=np.float64)
        if mean.shape != self.times.shape or stderr.shape != self.times.shape:
            raise ValueError(f"series {name!r} shape mismatch with time grid")
        self.data[name] = (mean, stderr)

    def mean(self, name: str) -> np.ndarray:
        return self.data[name][0]

    def stderr(self, name: str) -> np.ndarray:
        return self.data[name][1]


@dataclass
class CorrelationField:
    """Connected correlations C(t, j) from a reference site along an axis."""

    component: str  # "xx" | "yy" | "zz"
    reference: int  # 0-based site index
    axis: str  # "x" | "y"
    separations: np.ndarray  # integer j >= 1
    times: np.ndarray
    values: np.ndarray  # shape (n_times, n_separations)
    stderr: np.ndarray  # same shape

    def __post_init__(self) -> None:
        nt, nj = len(self.times), len(self.separations)
        if self.values.shape != (nt, nj) or self.stderr.shape != (nt, nj):
            raise ValueError("correlation field shape mismatch")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series_csv(path, series: ObservableSeries) -> None:
    with open(path, "w") as f:
        f.write(SERIES_HEADER + "\n")
        for name in series.data:
            mean, stderr = series.data[name]
            for t, m, s in zip(series.times, mean, stderr):
                f.write(f"{_fmt(t)},{name},{_fmt(m)},{_fmt(s)}\n")


def read_series_csv(path) -> ObservableSeries:
    names: list[str] = []
    rows: dict[str, list[tuple[float, float, float]]] = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != SERIES_HEADER:
            raise ValueError(f"unexpected series header {header!r} in {path}")
        for line in f:
            t, name, m, s = line.rstrip("\n").split(",")
            if name not in rows:
                rows[name] = []
                names.append(name)
            rows[name].append((float(t), float(m), float(s)))
    if not names:
        raise ValueError(f"empty series file {path}")
    times = np.array([r[0] for r in rows[names[0]]])
    series = ObservableSeries(times=times)
    for name in names:
        got = np.array(rows[name])
        if got.shape[0] != len(times) or not np.array_equal(got[:, 0], times):
            raise ValueError(f"observable {name!r} not on the shared time grid")
        series.add(name, got[:, 1], got[:, 2])
    return series


def field_to_series(fld: CorrelationField) -> ObservableSeries:
    """Flatten a correlation field to series rows named C_<comp>_j<j>."""
    series = ObservableSeries(times=fld.times)
    for k, j in enumerate(fld.separations):
        series.add(f"C_{fld.component}_j{int(j)}", fld.values[:, k], fld.stderr[:, k])
    return series


def field_from_series(
    series: ObservableSeries, component: str, reference: int = -1, axis: str = ""
) -> CorrelationField:
    """Rebuild a correlation field from C_<comp>_j<j> series rows."""
    prefix = f"C_{component}_j"
    seps = sorted(
        int(name[len(prefix):]) for name in series.data if name.startswith(prefix)
    )
    if not seps:
        raise ValueError(f"no C_{component} rows present")
    nt = len(series.times)
    values = np.empty((nt, len(seps)))
    stderr = np.empty((nt, len(seps)))
    for k, j in enumerate(seps):
        values[:, k] = series.mean(f"{prefix}{j}")
        stderr[:, k] = series.stderr(f"{prefix}{j}")
    return CorrelationField(
        component=component,
        reference=reference,
        axis=axis,
        separations=np.array(seps),
        times=series.times,
        values=values,
        stderr=stderr,
    )


def write_metadata(path, meta: dict) -> None:
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def read_metadata(path) -> dict:
    with open(path) as f:
        return json.load(f)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)!r}")

"""Correlation analytics: connected correlators, threshold contours,
power-law fits, and comparison metrics between result sets.

A contour records, per separation j, the first time the connected
correlation reaches a threshold (linear interpolation between time
samples; first passage even if the signal later dips below). Contour
shapes are summarized by least-squares power laws tau = c * j^eta on
log-log axes, with uncertainties from a bootstrap over trajectory chunks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .results import CorrelationField

__all__ = [
    "Contour",
    "PowerLawFit",
    "CrossoverRow",
    "connected",
    "extract_contour",
    "fit_power_law",
    "evaluate_fit",
    "contour_difference",
    "eta_crossover",
    "monotonic_within_error",
    "bootstrap_eta",
    "relative_deviation",
    "write_contour_csv",
    "read_contour_csv",
]

CONTOUR_HEADER = "j,tau,status"


@dataclass
class Contour:
    """First-crossing times tau_j of a correlation threshold."""

    threshold: float
    separations: np.ndarray  # integer j
    tau: np.ndarray  # first-crossing time; nan where not crossed
    crossed: np.ndarray  # bool per j


@dataclass
class PowerLawFit:
    """tau = exp(log_prefactor) * j^eta fitted on log-log axes."""

    eta: float
    log_prefactor: float
    eta_stderr: float | None
    j_min: int
    n_points: int
    residual_rms: float
    ok: bool = True
    reason: str | None = None

    @classmethod
    def failure(cls, j_min: int, n_points: int, reason: str) -> "PowerLawFit":
        return cls(
            eta=float("nan"),
            log_prefactor=float("nan"),
            eta_stderr=None,
            j_min=j_min,
            n_points=n_points,
            residual_rms=float("nan"),
            ok=False,
            reason=reason,
        )


@dataclass
class CrossoverRow:
    alpha: float
    eta: float
    eta_stderr: float | None
    ok: bool


def connected(pair_mean, pair_stderr, a_mean, a_stderr, b_mean, b_stderr):
    """C = <ss> - <s><s>, stderr combined in quadrature.

    Broadcasts, so single-site factors may be column vectors against a
    (time, separation) pair array.
    """
    values = pair_mean - a_mean * b_mean
    stderr = np.sqrt(
        pair_stderr**2 + (b_mean * a_stderr) ** 2 + (a_mean * b_stderr) ** 2
    )
    return values, stderr


def extract_contour(field: CorrelationField, threshold: float) -> Contour:
    """First time C(t, j) >= threshold per j, linearly interpolated."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    times = field.times
    nj = len(field.separations)
    tau = np.full(nj, np.nan)
    crossed = np.zeros(nj, dtype=bool)
    for k in range(nj):
        v = field.values[:, k]
        hits = np.nonzero(v >= threshold)[0]
        if len(hits) == 0:
            continue
        i = hits[0]
        crossed[k] = True
        if i == 0:
            tau[k] = times[0]
        else:
            frac = (threshold - v[i - 1]) / (v[i] - v[i - 1])
            tau[k] = times[i - 1] + frac * (times[i] - times[i - 1])
    return Contour(
        threshold=float(threshold),
        separations=field.separations.copy(),
        tau=tau,
        crossed=crossed,
    )


def _fit_points(contour: Contour, j_min: int):
    mask = contour.crossed & (contour.separations >= j_min) & (contour.tau > 0)
    return contour.separations[mask], contour.tau[mask]


def fit_power_law(contour: Contour, j_min: int = 1) -> PowerLawFit:
    """Least-squares line on (log j, log tau); slope is eta.

    Needs at least 3 crossed separations with j >= j_min; otherwise a
    fit-failure result is returned (ok=False), never an exception.
    """
    js, taus = _fit_points(contour, j_min)
    if len(js) < 3:
        return PowerLawFit.failure(
            j_min, len(js), f"need >= 3 crossed separations with j >= {j_min}, got {len(js)}"
        )
    x = np.log(js.astype(np.float64))
    y = np.log(taus)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return PowerLawFit(
        eta=float(slope),
        log_prefactor=float(intercept),
        eta_stderr=None,
        j_min=j_min,
        n_points=len(js),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


def evaluate_fit(fit: PowerLawFit, j) -> np.ndarray:
    """tau values of the fitted power law at separations j."""
    if not fit.ok:
        raise ValueError(f"cannot evaluate failed fit: {fit.reason}")
    j = np.asarray(j, dtype=np.float64)
    return np.exp(fit.log_prefactor) * j**fit.eta


def contour_difference(a: Contour, b: Contour, j_min: int = 1):
    """Per-j difference of the fitted power laws (fit first, subtract after).

    Returns (j, delta_tau) on the separations crossed in both contours.
    """
    if a.threshold != b.threshold:
        raise ValueError(
            f"threshold mismatch: {a.threshold} vs {b.threshold}"
        )
    if not np.array_equal(a.separations, b.separations):
        raise ValueError("contours are defined on different separations")
    fit_a = fit_power_law(a, j_min)
    fit_b = fit_power_law(b, j_min)
    if not (fit_a.ok and fit_b.ok):
        bad = fit_a if not fit_a.ok else fit_b
        raise ValueError(f"contour fit failed: {bad.reason}")
    mask = a.crossed & b.crossed
    js = a.separations[mask]
    delta = evaluate_fit(fit_a, js) - evaluate_fit(fit_b, js)
    return js, delta


def eta_crossover(fits: dict[float, PowerLawFit]) -> list[CrossoverRow]:
    """One row per alpha, sorted; consumers check the monotonic trend."""
    rows = []
    for alpha in sorted(fits):
        f = fits[alpha]
        rows.append(
            CrossoverRow(alpha=float(alpha), eta=f.eta, eta_stderr=f.eta_stderr, ok=f.ok)
        )
    return rows


def monotonic_within_error(rows: list[CrossoverRow], sigmas: float = 2.0) -> bool:
    """Non-decreasing eta along alpha, allowing overlap of error bars."""
    for prev, cur in zip(rows, rows[1:]):
        slack = sigmas * ((prev.eta_stderr or 0.0) + (cur.eta_stderr or 0.0))
        if cur.eta < prev.eta - slack:
            return False
    return True


def bootstrap_eta(
    counts: np.ndarray,
    site_sum: np.ndarray,
    pair_sum: np.ndarray,
    times: np.ndarray,
    separations: np.ndarray,
    component: str,
    threshold: float,
    j_min: int,
    n_resamples: int = 200,
    seed: int = 0,
):
    """Bootstrap stderr of eta by resampling trajectory chunks.

    site_sum: (n_chunks, n_times, n_j + 1) per-chunk sums of the single
    site component at [reference, partners...]; pair_sum the matching
    (n_chunks, n_times, n_j) pair-product sums. Chunks are iid blocks of
    trajectories, so resampling them with replacement is a nonparametric
    bootstrap over trajectories without per-trajectory storage.

    Returns (eta_stderr, etas) over the resamples that produced a valid
    fit; eta_stderr is nan when fewer than 2 fits succeed.
    """
    n_chunks = len(counts)
    rng = np.random.default_rng(seed)
    etas = []
    for _ in range(n_resamples):
        pick = rng.integers(0, n_chunks, size=n_chunks)
        n = counts[pick].sum()
        site = site_sum[pick].sum(axis=0) / n
        pair = pair_sum[pick].sum(axis=0) / n
        values = pair - site[:, :1] * site[:, 1:]
        fld = CorrelationField(
            component=component,
            reference=-1,
            axis="",
            separations=separations,
            times=times,
            values=values,
            stderr=np.zeros_like(values),
        )
        fit = fit_power_law(extract_contour(fld, threshold), j_min)
        if fit.ok:
            etas.append(fit.eta)
    etas = np.array(etas)
    if len(etas) < 2:
        return float("nan"), etas
    return float(etas.std(ddof=1)), etas


def relative_deviation(observed, reference, floor: float = 1e-12):
    """|observed - reference| / |reference|, nan where reference ~ 0."""
    observed = np.asarray(observed, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    out = np.full(np.broadcast(observed, reference).shape, np.nan)
    ok = np.abs(reference) > floor
    out[ok] = np.abs(observed - reference)[ok] / np.abs(reference)[ok]
    return out


def write_contour_csv(path, contour: Contour) -> None:
    with open(path, "w") as f:
        f.write(CONTOUR_HEADER + "\n")
        for j, t, c in zip(contour.separations, contour.tau, contour.crossed):
            status = "crossed" if c else "absent"
            f.write(f"{int(j)},{repr(float(t))},{status}\n")


def read_contour_csv(path, threshold: float) -> Contour:
    js, taus, crossed = [], [], []
    with open(path) as f:
        header = f.readline().strip()
        if header != CONTOUR_HEADER:
            raise ValueError(f"unexpected contour header {header!r} in {path}")
        for line in f:
            j, t, status = line.rstrip("\n").split(",")
            js.append(int(j))
            taus.append(float(t))
            crossed.append(status == "crossed")
    return Contour(
        threshold=threshold,
        separations=np.array(js),
        tau=np.array(taus),
        crossed=np.array(crossed),
    )

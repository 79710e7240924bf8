"""Chain and ensemble diagnostics: autocorrelation, ESS, field statistics,
misfit traces, a Gaussian KL proxy and efficiency tables."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ValidationError


def _series(x, min_len=2):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("expected a 1-d series")
    if x.size < min_len:
        raise ValidationError(f"series needs at least {min_len} points, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite values")
    return x


def _autocov(x):
    """Biased autocovariance at all lags via zero-padded FFT."""
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    return np.fft.irfft(f * np.conj(f), nfft)[:n] / n


def acf(series, max_lag=None):
    """Autocorrelation at lags ``0..max_lag``; lag 0 is exactly 1."""
    x = _series(series)
    max_lag = x.size - 1 if max_lag is None else int(max_lag)
    if not 0 <= max_lag < x.size:
        raise ValidationError(f"max_lag must lie in [0, {x.size - 1}]")
    c = _autocov(x)
    if c[0] <= 0:
        raise ValidationError("autocorrelation is undefined for a constant series")
    out = c[:max_lag + 1] / c[0]
    out[0] = 1.0
    return out


def ess(series):
    """Effective sample size with Geyer's initial positive sequence truncation.

    Consecutive autocorrelation pairs are summed until a pair sum is
    non-positive; the result is capped at the series length.  A constant
    series (a chain that never moved) counts as a single draw.
    """
    x = _series(series, min_len=4)
    n = x.size
    if np.ptp(x) == 0:
        return 1.0
    rho = acf(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(min(n / tau, n)) if tau > 0 else float(n)


def ess_summary(samples):
    """(min, median, max) ESS over coordinates of a ``(n, d)`` chain."""
    samples = np.asarray(samples, dtype=np.float64)
    values = np.array([ess(samples[:, j]) for j in range(samples.shape[1])])
    return float(values.min()), float(np.median(values)), float(values.max())


def field_stats(samples, weights=None):
    """Per-coordinate mean and standard deviation (unbiased when unweighted)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValidationError("field_stats needs a (n >= 2, d) sample array")
    if weights is None:
        return samples.mean(axis=0), samples.std(axis=0, ddof=1)
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    mean = w @ samples
    return mean, np.sqrt(w @ (samples - mean) ** 2)


def misfit_trace(samples, model, obs):
    """Exact data misfit of every sample; surrogate chains are judged on the true model."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] == 0:
        return np.empty(0)
    return obs.misfit(model.evaluate_many(samples))


def gauss_kl_diag(mean, var, prior_var):
    """KL(N(mean, diag(var)) || N(0, diag(prior_var)))."""
    mean, var, prior_var = (np.asarray(a, dtype=np.float64) for a in (mean, var, prior_var))
    return 0.5 * float(np.sum(var / prior_var + mean**2 / prior_var - 1.0 - np.log(var / prior_var)))


def kl_gauss_proxy(samples, prior, window=None, every=1):
    """Running diagonal-Gaussian KL proxy between the chain and the prior.

    Entry ``t`` uses the moments of samples ``max(0, t+1-window)..t``
    (all samples so far when ``window`` is None).  The first value is
    reported once ``d + 1`` samples are available.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n, d = samples.shape
    if window is not None and window < d + 1:
        raise ValidationError(f"window must hold at least d + 1 = {d + 1} samples")
    if n < d + 1:
        raise ValidationError(f"need at least d + 1 = {d + 1} samples for the KL proxy")
    pv = prior.variance
    c1 = np.cumsum(samples, axis=0)
    c2 = np.cumsum(samples**2, axis=0)
    zero = np.zeros((1, d))
    c1 = np.vstack([zero, c1])
    c2 = np.vstack([zero, c2])
    steps, values = [], []
    for t in range(d, n, every):
        lo = 0 if window is None else max(0, t + 1 - window)
        k = t + 1 - lo
        m = (c1[t + 1] - c1[lo]) / k
        v = np.maximum((c2[t + 1] - c2[lo]) / k - m**2, 1e-300) * k / (k - 1)
        steps.append(t)
        values.append(gauss_kl_diag(m, v, pv))
    return np.array(steps), np.array(values)


@dataclass
class EfficiencyReport:
    rows: list = field(default_factory=list)
    baseline: str = ""

    columns = ("method", "step", "acceptance", "s_per_iter", "ess_min", "ess_med", "ess_max",
               "min_ess_per_s", "speedup", "pde_solves")

    def row(self, tag):
        for r in self.rows:
            if r["method"] == tag:
                return r
        raise KeyError(tag)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.columns)
            writer.writeheader()
            writer.writerows(self.rows)

    def __str__(self):
        head = " ".join(f"{c:>13}" for c in self.columns)
        lines = [head]
        for r in self.rows:
            lines.append(" ".join(f"{r[c]:>13.4g}" if isinstance(r[c], float) else f"{r[c]!s:>13}"
                                  for c in self.columns))
        return "\n".join(lines)


def efficiency_table(records, baseline):
    """Table-style comparison with speedup = minESS/s divided by the baseline's minESS/s.

    Time is total chain time (burn-in included) divided by iterations, and
    minESS/s uses the post burn-in sampling time.
    """
    tags = [r.tag for r in records]
    if baseline not in tags:
        raise ValidationError(f"baseline {baseline!r} is not among {tags}")
    rows = []
    for r in records:
        if not r.times.size:
            raise ValidationError(f"record {r.tag!r} has no timing")
        lo, med, hi = ess_summary(r.samples)
        sample_time = float(r.times[r.burnin:].sum())
        rows.append({"method": r.tag, "step": float(r.step), "acceptance": r.acceptance_rate,
                     "s_per_iter": r.seconds_per_iter, "ess_min": lo, "ess_med": med, "ess_max": hi,
                     "min_ess_per_s": lo / sample_time, "speedup": 0.0, "pde_solves": int(r.n_solves)})
    base = rows[tags.index(baseline)]["min_ess_per_s"]
    for row in rows:
        row["speedup"] = row["min_ess_per_s"] / base
    return EfficiencyReport(rows, baseline)


def _write_columns(path, header, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(zip(*columns))


def write_diagnostics(out_dir, records, model, obs, prior, baseline=None, max_lag=100, kl_every=10):
    """Write acf.csv, misfit.csv, kl.csv, fields_mean.csv, fields_sd.csv and efficiency.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [r for r in records if r.n_samples >= 2]
    if not records:
        raise ValidationError("no chain has enough samples for diagnostics")
    misfits = {r.tag: misfit_trace(r.samples, model, obs) for r in records}
    n = min(len(m) for m in misfits.values())
    tags = [r.tag for r in records]
    _write_columns(out / "misfit.csv", ["iteration"] + tags, [range(n)] + [misfits[t][:n] for t in tags])
    lag = min(max_lag, n - 1)
    acfs = []
    for t in tags:
        try:
            acfs.append(acf(misfits[t][:n], lag))
        except ValidationError:
            acfs.append(np.full(lag + 1, np.nan))
    _write_columns(out / "acf.csv", ["lag"] + tags, [range(lag + 1)] + acfs)
    kl_cols, kl_steps = [], None
    for r in records:
        if r.n_samples > r.samples.shape[1]:
            steps, vals = kl_gauss_proxy(r.samples, prior, every=kl_every)
        else:
            steps, vals = np.array([]), np.array([])
        kl_cols.append(vals)
        kl_steps = steps if kl_steps is None or len(steps) < len(kl_steps) else kl_steps
    m = min(len(v) for v in kl_cols)
    _write_columns(out / "kl.csv", ["sample"] + [f"{t}_kl_proxy" for t in tags],
                   [kl_steps[:m]] + [v[:m] for v in kl_cols])
    stats = [field_stats(r.samples, r.weights() if r.log_weights is not None else None) for r in records]
    d = records[0].samples.shape[1]
    _write_columns(out / "fields_mean.csv", ["index"] + tags, [range(d)] + [s[0] for s in stats])
    _write_columns(out / "fields_sd.csv", ["index"] + tags, [range(d)] + [s[1] for s in stats])
    report = efficiency_table(records, baseline or tags[0])
    report.to_csv(out / "efficiency.csv")
    return report


def fit_circle(points):
    """Algebraic least-squares circle fit; returns (center, radius)."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise ValidationError("circle fit needs an (n >= 3, 2) point array")
    design = np.column_stack([p, np.ones(len(p))])
    coef, *_ = np.linalg.lstsq(design, (p**2).sum(axis=1), rcond=None)
    center = coef[:2] / 2.0
    return center, float(np.sqrt(coef[2] + center @ center))


def annulus_occupancy(points, width=0.5):
    """Fraction of 2-d points within ``width * R`` of the fitted circle of radius R."""
    center, radius = fit_circle(points)
    r = np.linalg.norm(np.asarray(points, dtype=np.float64) - center, axis=1)
    return float(np.mean(np.abs(r - radius) < width * radius))

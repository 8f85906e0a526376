"""Monte Carlo runner, interval statistics, persistence and arm comparison."""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from .channel import ChannelParams, InjectedNoise, NoiseStream
from .decoder import MixtureConfig, make_decoder
from .errors import ConfigError, NoisyFeedbackError
from .protocol import run_baseline, run_session

__all__ = [
    "SCHEMES",
    "CSV_COLUMNS",
    "RunConfig",
    "RunStats",
    "clopper_pearson",
    "run_trials",
    "sweep",
    "expand_grid",
    "save_manifest",
    "load_manifest",
    "write_csv",
    "read_csv",
    "Comparison",
    "compare_arms",
    "FitResult",
    "exponent_fit",
]

SCHEMES = ("feedback_one_switch", "baseline_no_feedback", "naive_feedback")

CSV_COLUMNS = ("scheme", "n", "M", "A", "sigma2", "beta", "tau2", "tau3", "seed",
               "trials", "errors", "p_hat", "ci_low", "ci_high", "exponent_hat",
               "k2_freq", "k3_freq", "k4_freq", "coord_fail_freq")

# flat config keys that are not ChannelParams fields
_DECODER_KEYS = {"decoder.samples": "num_samples",
                 "decoder.oracle_points": "oracle_quadrature_points"}
_PARAM_KEYS = ("A", "sigma2", "n", "M", "beta", "tau2", "tau3")
_EXECUTION_KEYS = ("workers", "output")


@dataclass(frozen=True)
class RunConfig:
    """One Monte Carlo experiment.

    ``zero_noise`` replaces both channel noises by zeros (a plumbing check).
    ``workers > 1`` splits trials over processes; results do not depend on
    it because every trial owns its noise stream.
    """

    params: ChannelParams
    scheme: str = "feedback_one_switch"
    trials: int = 1000
    seed: int = 0
    decoder: MixtureConfig = MixtureConfig()
    output: str | None = None
    workers: int = 1
    zero_noise: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.scheme == "baseline_no_feedback" and self.params.M > self.params.n:
            raise ConfigError("baseline needs M <= n")

    def to_dict(self) -> dict:
        p = self.params
        d = {"scheme": self.scheme, "A": p.A, "sigma2": p.sigma2, "n": p.n,
             "M": p.M, "beta": p.beta, "tau2": p.tau2, "tau3": p.tau3,
             "trials": self.trials, "seed": self.seed,
             "decoder.samples": self.decoder.num_samples,
             "decoder.oracle_points": self.decoder.oracle_quadrature_points,
             "output": self.output, "workers": self.workers,
             "zero_noise": self.zero_noise}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Build from a flat mapping (the JSON config-file format).

        ``nA`` may be given instead of ``A``.
        """
        d = dict(d)
        known = set(_PARAM_KEYS) | set(_DECODER_KEYS) | {
            "nA", "scheme", "trials", "seed", "output", "workers", "zero_noise"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "nA" in d:
            if "A" in d:
                raise ConfigError("give either A or nA, not both")
            if "n" not in d:
                raise ConfigError("nA needs n")
            d["A"] = float(d.pop("nA")) / int(d["n"])
        missing = {"A", "n", "M"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            pkw = {k: d[k] for k in ("beta", "tau2", "tau3") if k in d}
            params = ChannelParams.from_sigma2(
                float(d["A"]), float(d.get("sigma2", 0.0)), int(d["n"]), int(d["M"]),
                **pkw)
            dkw = {v: int(d[k]) for k, v in _DECODER_KEYS.items() if k in d}
            dec = MixtureConfig(**dkw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        kw = {k: d[k] for k in ("scheme", "output", "zero_noise") if k in d}
        for k in ("trials", "seed", "workers"):
            if k in d:
                kw[k] = int(d[k])
        return cls(params=params, decoder=dec, **kw)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)


@dataclass
class RunStats:
    """Aggregated outcome of a :class:`RunConfig`.

    ``k_freq`` and ``coord_fail_freq`` are ``None`` for the baseline, which
    has no group selection. ``energy_max_dev`` is the largest relative
    deviation of a transmitted block's energy from ``nA``.
    """

    config: dict
    trials: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float
    exponent_hat: float
    k_freq: dict | None
    coord_fail_freq: float | None
    per_message_trials: list
    per_message_errors: list
    energy_max_dev: float = 0.0
    wall_clock: float = 0.0

    @property
    def max_message_error(self) -> float:
        """Largest per-message error rate (the min-max criterion)."""
        return max((e / t if t else 0.0)
                   for e, t in zip(self.per_message_errors, self.per_message_trials))

    def same_outcome(self, other: "RunStats") -> bool:
        """Equality ignoring wall-clock time and execution-only settings
        (worker count, output path)."""
        a, b = asdict(self), asdict(other)
        for d in (a, b):
            d.pop("wall_clock")
            for key in _EXECUTION_KEYS:
                d["config"].pop(key, None)
        return _nan_equal(a, b)

    def csv_row(self) -> dict:
        c = self.config
        row = {k: c[k] for k in ("scheme", "n", "M", "A", "sigma2", "beta",
                                  "tau2", "tau3", "seed")}
        row.update(trials=self.trials, errors=self.errors, p_hat=self.p_hat,
                   ci_low=self.ci_low, ci_high=self.ci_high,
                   exponent_hat=self.exponent_hat)
        kf = self.k_freq or {}
        for k in (2, 3, 4):
            row[f"k{k}_freq"] = kf.get(k) if self.k_freq is not None else None
        row["coord_fail_freq"] = self.coord_fail_freq
        return row

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["k_freq"] is not None:
            d["k_freq"] = {str(k): v for k, v in d["k_freq"].items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunStats":
        d = dict(d)
        if d.get("k_freq") is not None:
            d["k_freq"] = {int(k): v for k, v in d["k_freq"].items()}
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _nan_equal(a, b) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_nan_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_nan_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def clopper_pearson(errors: int, trials: int, level: float = 0.95):
    """Exact binomial confidence interval for ``errors / trials``."""
    if trials < 1 or not 0 <= errors <= trials:
        raise ValueError("need 0 <= errors <= trials and trials >= 1")
    alpha = 1.0 - level
    lo = 0.0 if errors == 0 else float(stats.beta.ppf(alpha / 2, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(stats.beta.ppf(1 - alpha / 2, errors + 1, trials - errors))
    return lo, hi


@dataclass
class _Tally:
    M: int
    errors: int = 0
    trials: int = 0
    k_counts: np.ndarray = None
    coord_fail: int = 0
    msg_trials: np.ndarray = None
    msg_errors: np.ndarray = None
    energy_dev: float = 0.0

    def __post_init__(self):
        self.k_counts = np.zeros(5, dtype=np.int64)
        self.msg_trials = np.zeros(self.M, dtype=np.int64)
        self.msg_errors = np.zeros(self.M, dtype=np.int64)

    def merge(self, other: "_Tally") -> "_Tally":
        self.errors += other.errors
        self.trials += other.trials
        self.k_counts += other.k_counts
        self.coord_fail += other.coord_fail
        self.msg_trials += other.msg_trials
        self.msg_errors += other.msg_errors
        self.energy_dev = max(self.energy_dev, other.energy_dev)
        return self


def _run_range(config: RunConfig, start: int, stop: int) -> _Tally:
    p = config.params
    tally = _Tally(p.M)
    baseline = config.scheme == "baseline_no_feedback"
    if not baseline:
        kind = "naive" if config.scheme == "naive_feedback" else "mixture"
        decoder = make_decoder(kind, config.decoder)
    target = p.total_energy
    for t in range(start, stop):
        if config.zero_noise:
            noise = InjectedNoise(master_seed=config.seed, trial_index=t)
        else:
            noise = NoiseStream(config.seed, t)
        m = noise.message(p.M)
        if baseline:
            tr = run_baseline(m, p, noise)
        else:
            tr = run_session(m, p, noise, decoder)
            tally.k_counts[tr.selection.k] += 1
            tally.coord_fail += tr.coordination_failure
        wrong = tr.decision != m
        tally.trials += 1
        tally.errors += wrong
        tally.msg_trials[m] += 1
        tally.msg_errors[m] += wrong
        dev = abs(tr.energy - target) / target
        if dev > tally.energy_dev:
            tally.energy_dev = dev
    return tally


def _worker(args):
    return _run_range(*args)


def run_trials(config: RunConfig) -> RunStats:
    """Run ``config.trials`` independent sessions and aggregate them.

    Trial ``t`` draws all its randomness (true message, channel noise,
    decoder samples) from ``NoiseStream(config.seed, t)``, so the result
    is a pure function of the config for any worker count.
    """
    t0 = time.perf_counter()
    T = int(config.trials)
    if config.workers > 1 and T > 1:
        import multiprocessing as mp

        w = min(config.workers, T)
        bounds = np.linspace(0, T, w + 1).astype(int)
        jobs = [(config, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        with mp.get_context("fork").Pool(w) as pool:
            parts = pool.map(_worker, jobs)
        tally = parts[0]
        for part in parts[1:]:
            tally.merge(part)
    else:
        tally = _run_range(config, 0, T)
    return _finish(config, tally, time.perf_counter() - t0)


def _finish(config: RunConfig, tally: _Tally, elapsed: float) -> RunStats:
    n = config.params.n
    p_hat = tally.errors / tally.trials
    lo, hi = clopper_pearson(tally.errors, tally.trials)
    exp_hat = -math.log(p_hat) / n if p_hat > 0 else math.inf
    if config.scheme == "baseline_no_feedback":
        k_freq = coord = None
    else:
        k_freq = {k: float(tally.k_counts[k] / tally.trials) for k in (2, 3, 4)}
        coord = tally.coord_fail / tally.trials
    return RunStats(
        config=config.to_dict(), trials=tally.trials, errors=int(tally.errors),
        p_hat=p_hat, ci_low=lo, ci_high=hi, exponent_hat=exp_hat,
        k_freq=k_freq, coord_fail_freq=coord,
        per_message_trials=[int(v) for v in tally.msg_trials],
        per_message_errors=[int(v) for v in tally.msg_errors],
        energy_max_dev=float(tally.energy_dev), wall_clock=elapsed)


# -- persistence --------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, path, columns=CSV_COLUMNS) -> None:
    """Write dict rows with a header; floats keep their full repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _parse(v: str):
    if v == "":
        return None
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def read_csv(path) -> list:
    """Rows of a results CSV as dicts with numbers parsed back."""
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def save_manifest(path, cells: list) -> None:
    """Write sweep cells (``{"config": ..., "stats": ...}`` or with
    ``"error"``) as JSON."""
    def enc(o):
        if isinstance(o, float) and not math.isfinite(o):
            return repr(o)
        return o
    payload = {"version": 1, "cells": cells}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, default=enc, allow_nan=True)


def load_manifest(path) -> list:
    with open(path) as fh:
        payload = json.load(fh)
    return payload["cells"]


def expand_grid(base: dict, grid: dict) -> list:
    """Cartesian product of ``grid`` values on top of the flat ``base`` dict."""
    keys = list(grid)
    out = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        d = dict(base)
        d.update(zip(keys, combo))
        out.append(d)
    return out


def sweep(configs, csv_path=None, manifest_path=None) -> list:
    """Run every config; failed cells are recorded with an error marker.

    Returns the list of :class:`RunStats` (``None`` for failed cells).
    """
    results, cells, rows = [], [], []
    for cfg in configs:
        try:
            st = run_trials(cfg)
        except NoisyFeedbackError as exc:
            results.append(None)
            cells.append({"config": cfg.to_dict(), "error": f"{type(exc).__name__}: {exc}"})
            row = {k: v for k, v in cfg.to_dict().items() if k in CSV_COLUMNS}
            row["trials"] = "ERROR"
            rows.append(row)
            continue
        results.append(st)
        cells.append({"config": cfg.to_dict(), "stats": st.to_dict()})
        rows.append(st.csv_row())
    if csv_path is not None:
        write_csv(rows, csv_path)
    if manifest_path is not None:
        save_manifest(manifest_path, cells)
    return results


# -- comparison and fitting ---------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    """Two-proportion z-test plus a confidence-interval overlap verdict.

    ``verdict`` is ``"a_lower"`` or ``"b_lower"`` when the 95% intervals do
    not overlap, ``"no difference"`` otherwise.
    """

    p_a: float
    p_b: float
    z: float
    p_value: float
    ci_overlap: bool
    verdict: str


def compare_arms(a: RunStats, b: RunStats) -> Comparison:
    for key in ("n", "A", "M"):
        if a.config[key] != b.config[key]:
            raise ConfigError(f"arms differ in {key}: {a.config[key]} vs {b.config[key]}")
    pa, pb = a.p_hat, b.p_hat
    pooled = (a.errors + b.errors) / (a.trials + b.trials)
    se = math.sqrt(pooled * (1 - pooled) * (1 / a.trials + 1 / b.trials))
    z = 0.0 if se == 0 else (pa - pb) / se
    pval = float(2 * stats.norm.sf(abs(z)))
    overlap = not (a.ci_high < b.ci_low or b.ci_high < a.ci_low)
    if overlap:
        verdict = "no difference"
    else:
        verdict = "a_lower" if a.ci_high < b.ci_low else "b_lower"
    return Comparison(pa, pb, z, pval, overlap, verdict)


@dataclass(frozen=True)
class FitResult:
    """Slope of ``-ln p_hat`` against ``n`` with a 95% interval."""

    slope: float
    intercept: float
    se: float
    ci_low: float
    ci_high: float
    dof: int
    used: tuple
    excluded: tuple
    weighted: bool


def exponent_fit(series, level: float = 0.95) -> FitResult:
    """Least-squares exponent estimate from ``(n, p_hat[, trials])`` points.

    With trial counts the fit is weighted by the delta-method variance
    ``(1 - p) / (trials p)`` of ``-ln p_hat`` and the slope interval is
    normal; without them it is ordinary least squares with a Student-t
    interval from the residuals. Cells with ``p_hat = 0`` are excluded and
    listed in ``excluded``.
    """
    pts = [tuple(s) for s in series]
    if len({p[0] for p in pts}) < 3:
        raise ConfigError("need at least three block lengths")
    used = [p for p in pts if p[1] > 0]
    excluded = tuple(p[0] for p in pts if not p[1] > 0)
    if len(used) < 2:
        raise ConfigError("fewer than two cells with errors")
    n = np.array([p[0] for p in used], dtype=float)
    ph = np.array([p[1] for p in used], dtype=float)
    y = -np.log(ph)
    weighted = all(len(p) > 2 and p[2] for p in used)
    dof = len(used) - 2
    if weighted:
        tr = np.array([p[2] for p in used], dtype=float)
        var = (1 - ph) / (tr * ph)
        w = 1.0 / np.maximum(var, 1e-300)
    else:
        w = np.ones_like(n)
    nbar = np.sum(w * n) / np.sum(w)
    ybar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (n - nbar) ** 2)
    slope = float(np.sum(w * (n - nbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * nbar)
    if weighted:
        se = math.sqrt(1.0 / sxx)
        q = stats.norm.ppf(0.5 + level / 2)
    else:
        resid = y - (intercept + slope * n)
        s2 = float(resid @ resid) / dof if dof > 0 else math.nan
        se = math.sqrt(s2 / sxx) if dof > 0 else math.nan
        q = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else math.nan
    return FitResult(slope, intercept, se, slope - q * se, slope + q * se, dof,
                     tuple(int(v) for v in n), excluded, weighted)

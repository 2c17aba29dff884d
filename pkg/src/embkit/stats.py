"""Bootstrap confidence intervals for differences in mean metrics, plus
run-file loading for the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError
from .validation import check_samples, require

# Resamples are drawn in fixed-size chunks, each from its own spawned
# substream, so results are identical no matter how the chunks are
# scheduled (and could be computed in parallel).
CHUNK_RESAMPLES = 65_536


def percentile(samples, q: float) -> float:
    """Linear-interpolation percentile: index h = q*(n-1) on sorted data."""
    samples = np.asarray(samples, dtype=np.float64)
    require(samples.size > 0, "percentile of an empty sample")
    require(0.0 <= q <= 1.0, f"q must be in [0,1], got {q}")
    ordered = np.sort(samples)
    h = q * (ordered.size - 1)
    lo = math.floor(h)
    hi = math.ceil(h)
    if lo == hi:
        return float(ordered[lo])
    return float(ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo]))


@dataclass(frozen=True)
class BootstrapResult:
    lo: float
    hi: float
    alpha: float
    resamples: int
    point_estimate: float
    contains_zero: bool

    @property
    def significant(self) -> bool:
        """True when the CI excludes zero: the observed difference is
        unlikely to be chance at the 1-alpha level."""
        return not self.contains_zero

    @property
    def interpretation(self) -> str:
        if self.significant:
            return "difference unlikely due to chance (CI excludes 0)"
        return "difference consistent with chance (CI includes 0)"

    def to_dict(self) -> dict:
        return {
            "lo": self.lo, "hi": self.hi, "alpha": self.alpha,
            "resamples": self.resamples, "point_estimate": self.point_estimate,
            "contains_zero": self.contains_zero, "significant": self.significant,
            "interpretation": self.interpretation,
        }


def bootstrap_ci_diff(
    a,
    b,
    resamples: int = 10_000,
    alpha: float = 0.05,
    seed: int = 0,
) -> BootstrapResult:
    """Percentile-bootstrap CI for mean(a) - mean(b).

    Each resample draws len(a) values from a and len(b) from b with
    replacement (independently, unpaired) and records the difference of
    means; the CI is the [alpha/2, 1-alpha/2] percentile span of those
    differences. Deterministic for a fixed seed.
    """
    a = check_samples(a, "a", min_len=2)
    b = check_samples(b, "b", min_len=2)
    require(resamples >= 1, f"resamples must be >= 1, got {resamples}")
    require(0.0 < alpha < 1.0, f"alpha must be in (0,1), got {alpha}")

    n_chunks = (resamples + CHUNK_RESAMPLES - 1) // CHUNK_RESAMPLES
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    diffs = np.empty(resamples, dtype=np.float64)
    pos = 0
    for chunk_seed in children:
        count = min(CHUNK_RESAMPLES, resamples - pos)
        rng = np.random.default_rng(chunk_seed)
        # sub-batch to bound memory; consecutive integer draws from one
        # generator concatenate, so batching does not change the stream
        batch = max(1, min(count, 2_000_000 // max(len(a), len(b))))
        done = 0
        while done < count:
            take = min(batch, count - done)
            idx_a = rng.integers(0, len(a), size=(take, len(a)))
            idx_b = rng.integers(0, len(b), size=(take, len(b)))
            diffs[pos + done : pos + done + take] = (
                a[idx_a].mean(axis=1) - b[idx_b].mean(axis=1)
            )
            done += take
        pos += count
    lo = percentile(diffs, alpha / 2.0)
    hi = percentile(diffs, 1.0 - alpha / 2.0)
    return BootstrapResult(
        lo=lo,
        hi=hi,
        alpha=alpha,
        resamples=resamples,
        point_estimate=float(a.mean() - b.mean()),
        contains_zero=bool(lo <= 0.0 <= hi),
    )


def read_metric_file(path) -> list[float]:
    """One metric value per line, blank lines ignored."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ParseError(line_no, f"bad metric value {line!r}") from None
    return values


def values_from_runs(path, metric: str = "f1", split: str = "test") -> list[float]:
    """Extract one metric across runs from a runs.json produced by the
    tagger protocol."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    runs = payload.get("runs")
    if not isinstance(runs, list):
        raise ConfigError(f"{path}: no 'runs' array present")
    out = []
    for i, run in enumerate(runs):
        try:
            out.append(float(run[split][metric]))
        except (KeyError, TypeError):
            raise ConfigError(
                f"{path}: run {i} has no {split}/{metric} value"
            ) from None
    return out


def load_metric_values(path, metric: str = "f1", split: str = "test") -> list[float]:
    """Plain text (one value per line) or runs.json, decided by content."""
    with open(path, encoding="utf-8") as fh:
        head = fh.read(1).strip()
    if head == "{":
        return values_from_runs(path, metric=metric, split=split)
    return read_metric_file(path)

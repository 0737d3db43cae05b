"""Subjective score processing and metric benchmarking.

Raw viewer ratings pass two screening steps (trapping stimuli, then
viewer-vs-panel correlation) before averaging into mean opinion scores.
Objective metrics are benchmarked against MOS through a five-parameter
logistic mapping followed by Pearson (PLCC) and Spearman (SROCC)
correlation, reported overall and per sequence/distortion group.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .pointcloud_metrics import cap_scores

TRAP_MAX_SCORE = 2          # low-quality trap may be scored 0, 1, or 2
DUPLICATE_MAX_DIFF = 2      # duplicate pair differences must stay below 3
VIEWER_CORRELATION_MIN = 0.8
MIN_VALID_VOTES = 16


@dataclass(frozen=True)
class RatingRecord:
    """One raw score: a viewer's 0-10 rating of a sample within a subgroup."""

    viewer_id: str
    subgroup_id: str
    sample_id: str
    score: int
    is_trap_low: bool = False
    duplicate_pair_id: str | None = None

    def __post_init__(self):
        if not (0 <= self.score <= 10):
            raise ValueError(f"score must be in [0, 10], got {self.score}")


@dataclass
class ScreeningInfo:
    rejected_pairs: set = field(default_factory=set)    # (viewer, subgroup)
    dropped_viewers: set = field(default_factory=set)
    viewer_correlations: dict = field(default_factory=dict)


@dataclass
class MosTable:
    """Screened mean opinion scores: sample_id -> (mos, valid vote count)."""

    mos: dict
    counts: dict
    labels: dict = field(default_factory=dict)          # sample -> (sequence, distortion)
    screening: ScreeningInfo = field(default_factory=ScreeningInfo)

    def samples(self):
        return sorted(self.mos)


def screen_traps(records) -> set:
    """(viewer, subgroup) pairs failing a trapping check.

    A pair is rejected when its low-quality trap scores above 2 or any
    duplicate pair of scores differs by 3 or more.  Subgroups with no traps
    at all trigger a warning since nothing can be screened there.
    """
    rejected = set()
    subgroups_with_traps = set()
    subgroups = set()
    dup_scores: dict = {}
    for rec in records:
        subgroups.add(rec.subgroup_id)
        if rec.is_trap_low or rec.duplicate_pair_id is not None:
            subgroups_with_traps.add(rec.subgroup_id)
        if rec.is_trap_low and rec.score > TRAP_MAX_SCORE:
            rejected.add((rec.viewer_id, rec.subgroup_id))
        if rec.duplicate_pair_id is not None:
            key = (rec.viewer_id, rec.subgroup_id, rec.duplicate_pair_id)
            dup_scores.setdefault(key, []).append(rec.score)
    for (viewer, subgroup, _pair), scores in dup_scores.items():
        if len(scores) >= 2 and max(scores) - min(scores) > DUPLICATE_MAX_DIFF:
            rejected.add((viewer, subgroup))
    missing = subgroups - subgroups_with_traps
    if missing:
        warnings.warn(f"subgroups without trapping samples: {sorted(missing)}",
                      stacklevel=2)
    return rejected


def _pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.mean(dx * dx)))
    sy = float(np.sqrt(np.mean(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean(dx * dy) / (sx * sy))


def plcc(x, y) -> float:
    """Pearson linear correlation; zero variance yields 0."""
    return _pearson(x, y)


def _average_ranks(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def srocc(x, y) -> float:
    """Spearman rank-order correlation with ties sharing the mean rank."""
    return _pearson(_average_ranks(x), _average_ranks(y))


def _per_viewer_sample_scores(records) -> dict:
    """viewer -> {sample -> mean score} (duplicate ratings averaged)."""
    acc: dict = {}
    for rec in records:
        acc.setdefault(rec.viewer_id, {}).setdefault(rec.sample_id, []).append(rec.score)
    return {
        viewer: {s: float(np.mean(v)) for s, v in samples.items()}
        for viewer, samples in acc.items()
    }


def _sample_averages(per_viewer) -> dict:
    acc: dict = {}
    for samples in per_viewer.values():
        for s, v in samples.items():
            acc.setdefault(s, []).append(v)
    return {s: float(np.mean(v)) for s, v in acc.items()}


def viewer_correlation(records, viewer_id) -> float:
    """Pearson correlation between one viewer's scores and the all-viewer
    average scores over the samples that viewer rated."""
    per_viewer = _per_viewer_sample_scores(records)
    if viewer_id not in per_viewer or len(per_viewer[viewer_id]) < 2:
        raise ValueError(f"viewer {viewer_id!r} rated fewer than 2 samples")
    averages = _sample_averages(per_viewer)
    samples = sorted(per_viewer[viewer_id])
    own = [per_viewer[viewer_id][s] for s in samples]
    avg = [averages[s] for s in samples]
    return _pearson(own, avg)


def remove_outliers(records, labels: dict | None = None) -> MosTable:
    """Trap screening, then a single correlation-based viewer removal pass.

    Viewers whose correlation with the panel average falls below 0.8 are
    dropped and the averages are updated once to produce the MOS.  Low
    trap stimuli are controls and do not appear in the output table.
    """
    records = list(records)
    rejected = screen_traps(records)
    kept = [r for r in records if (r.viewer_id, r.subgroup_id) not in rejected]

    per_viewer = _per_viewer_sample_scores(kept)
    averages = _sample_averages(per_viewer)
    info = ScreeningInfo(rejected_pairs=rejected)
    for viewer, samples in sorted(per_viewer.items()):
        if len(samples) < 2:
            info.viewer_correlations[viewer] = 1.0
            continue
        ss = sorted(samples)
        rho = _pearson([samples[s] for s in ss], [averages[s] for s in ss])
        info.viewer_correlations[viewer] = rho
        if rho < VIEWER_CORRELATION_MIN:
            info.dropped_viewers.add(viewer)

    survivors = [r for r in kept if r.viewer_id not in info.dropped_viewers]
    trap_samples = {r.sample_id for r in records if r.is_trap_low}
    per_viewer = _per_viewer_sample_scores(survivors)
    mos: dict = {}
    counts: dict = {}
    votes: dict = {}
    for viewer, samples in per_viewer.items():
        for s, v in samples.items():
            if s in trap_samples:
                continue
            votes.setdefault(s, []).append(v)
    for s, v in votes.items():
        mos[s] = float(np.mean(v))
        counts[s] = len(v)
        if len(v) < MIN_VALID_VOTES:
            warnings.warn(f"sample {s!r} has only {len(v)} valid votes "
                          f"(target {MIN_VALID_VOTES})", stacklevel=2)
    return MosTable(mos=mos, counts=counts, labels=labels or {}, screening=info)


# --- logistic mapping and report ---------------------------------------------


@dataclass
class LogisticFit:
    """Five-parameter logistic regression from objective score to MOS scale."""

    k: np.ndarray
    sse: float
    converged: bool
    degenerate: bool = False

    def predict(self, s) -> np.ndarray:
        return _logistic(np.asarray(s, dtype=np.float64), self.k)


def _logistic(s: np.ndarray, k: np.ndarray) -> np.ndarray:
    z = np.clip(k[1] * (s - k[2]), -500.0, 500.0)
    return k[0] * (0.5 - 1.0 / (1.0 + np.exp(z))) + k[3] * s + k[4]


def _damped_least_squares(s, q, k0, max_iter=2000, rel_tol=1e-10):
    """Levenberg-style descent with a numerically differentiated Jacobian.

    The damping factor shrinks on accepted steps and grows on rejected
    ones, so the SSE never increases across accepted iterations.
    """
    k = k0.astype(np.float64).copy()
    resid = _logistic(s, k) - q
    sse = float(resid @ resid)
    lam = 1e-3
    converged = False
    for _ in range(max_iter):
        jac = np.empty((s.size, 5))
        for j in range(5):
            step = 1e-6 * max(1.0, abs(k[j]))
            kp = k.copy()
            kp[j] += step
            jac[:, j] = (_logistic(s, kp) - _logistic(s, k)) / step
        g = jac.T @ resid
        hess = jac.T @ jac
        accepted = False
        for _ in range(50):
            try:
                delta = np.linalg.solve(hess + lam * np.eye(5), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            k_new = k + delta
            r_new = _logistic(s, k_new) - q
            sse_new = float(r_new @ r_new)
            if sse_new < sse:
                accepted = True
                break
            lam *= 10.0
            if lam > 1e12:
                break
        if not accepted:
            converged = True
            break
        improvement = (sse - sse_new) / sse if sse > 0 else 0.0
        k, resid, sse = k_new, r_new, sse_new
        lam = max(lam * 0.3, 1e-12)
        if improvement < rel_tol:
            converged = True
            break
    return k, sse, converged


def fit_logistic(objective, subjective) -> LogisticFit:
    """Fit Q(s) = k1*(1/2 - 1/(1+exp(k2*(s-k3)))) + k4*s + k5 by damped
    least squares, multi-started over the sign of k2.

    Inputs must be finite (cap sentinels first) and hold at least 5 points.
    A constant objective cannot be mapped; the fit degenerates to the mean
    MOS and is flagged.
    """
    s = np.asarray(objective, dtype=np.float64)
    q = np.asarray(subjective, dtype=np.float64)
    if s.size != q.size:
        raise ValueError("objective and subjective score counts differ")
    if s.size < 5:
        raise ValueError("need at least 5 points to fit the mapping")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(q))):
        raise ValueError("scores must be finite; cap sentinels before fitting")

    std_s = float(np.std(s))
    if std_s == 0.0:
        k = np.array([0.0, 0.0, float(np.mean(s)), 0.0, float(np.mean(q))])
        resid = _logistic(s, k) - q
        return LogisticFit(k=k, sse=float(resid @ resid), converged=True, degenerate=True)

    k2_init = 1.0 / std_s
    best = None
    for k2 in (k2_init, -k2_init):
        k0 = np.array([float(np.max(q) - np.min(q)), k2, float(np.mean(s)),
                       0.0, float(np.mean(q))])
        k, sse, converged = _damped_least_squares(s, q, k0)
        if best is None or sse < best[1]:
            best = (k, sse, converged)
    return LogisticFit(k=best[0], sse=best[1], converged=best[2])


@dataclass
class GroupResult:
    plcc: float | None
    srocc: float | None
    n: int


@dataclass
class EvaluationReport:
    """Benchmark of one metric against MOS, shaped like a results table row:
    overall correlation plus per-sequence and per-distortion breakdowns.
    None values mark groups where the metric is constant or too small to fit."""

    metric_name: str
    overall: GroupResult
    per_sequence: dict
    per_distortion: dict

    def to_dict(self) -> dict:
        def cell(g):
            return {"plcc": g.plcc, "srocc": g.srocc, "n": g.n}

        return {
            "metric": self.metric_name,
            "overall": cell(self.overall),
            "per_sequence": {k: cell(v) for k, v in sorted(self.per_sequence.items())},
            "per_distortion": {k: cell(v) for k, v in sorted(self.per_distortion.items())},
        }


def _group_result(scores, mos) -> GroupResult:
    scores = np.asarray(scores, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    n = scores.size
    if n < 5 or np.all(scores == scores[0]):
        return GroupResult(plcc=None, srocc=None, n=n)
    fit = fit_logistic(scores, mos)
    mapped = fit.predict(scores)
    return GroupResult(plcc=plcc(mapped, mos), srocc=srocc(scores, mos), n=n)


def evaluate_metric(metric_scores: dict, mos_table: MosTable,
                    grouping: dict | None = None,
                    metric_name: str = "metric") -> EvaluationReport:
    """Correlate a metric against MOS overall and within each sequence and
    distortion group (independent logistic fits per group).

    metric_scores: sample_id -> objective score (sentinels are capped).
    grouping: sample_id -> (sequence, distortion); falls back to the MOS
    table labels when omitted.  Constant-metric groups get None markers,
    mirroring the usual dash cells for inapplicable metrics.
    """
    grouping = grouping if grouping is not None else mos_table.labels
    samples = sorted(set(metric_scores) & set(mos_table.mos))
    if not samples:
        raise ValueError("no overlapping samples between metric scores and MOS")
    scores = cap_scores([metric_scores[s] for s in samples])
    mos = np.array([mos_table.mos[s] for s in samples])

    overall = _group_result(scores, mos)

    def grouped(index):
        groups: dict = {}
        for i, s in enumerate(samples):
            label = grouping.get(s)
            if label is None:
                continue
            groups.setdefault(label[index], []).append(i)
        return {
            name: _group_result(scores[idx], mos[idx])
            for name, idx in sorted(groups.items())
        }

    return EvaluationReport(metric_name=metric_name, overall=overall,
                            per_sequence=grouped(0), per_distortion=grouped(1))

"""Scoring, confusion tables, and diagnostic experiments.

Accuracy is equivalence-aware: confusions within a scoring group (e.g.
predicting aa for ao) count as correct, while the confusion matrix keeps
raw per-label counts so both views stay available. The experiment helpers
(learning curves, error-vs-rounds curves, context-margin sweeps) emit
ExperimentReport values: plain named scalars and curve series that
serialize to a line-oriented text file and a CSV table. Rendering them as
figures is the CLI's job, not this module's.

Every experiment is a pure function of (corpus, config): train/test splits
and trial subsets derive from the config seed, so reruns and parallel
execution reproduce identical reports.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boost, multiclass, pipeline
from .ingest import PhoneSet

# fixed substream ids so different uses of the config seed stay independent
_SPLIT_STREAM = 11

TEST_FRACTION = 0.25


# ---------------------------------------------------------------------------
# scoring


def _check_labels(preds, phone_set: PhoneSet) -> None:
    if not preds:
        raise ValueError("no predictions to score")
    for true, predicted in preds:
        for label in (true, predicted):
            if label not in phone_set:
                raise ValueError(f"unknown phone label {label!r}")


def accuracy(preds, phone_set: PhoneSet) -> float:
    """Fraction of (true, predicted) pairs that match up to scoring groups."""
    _check_labels(preds, phone_set)
    correct = sum(1 for true, predicted in preds
                  if phone_set.scoring_equivalent(true, predicted))
    return correct / len(preds)


def error_rate(preds, phone_set: PhoneSet) -> float:
    """Equivalence-aware complement of accuracy."""
    _check_labels(preds, phone_set)
    wrong = sum(1 for true, predicted in preds
                if not phone_set.scoring_equivalent(true, predicted))
    return wrong / len(preds)


def raw_accuracy(preds, phone_set: PhoneSet) -> float:
    """Exact-match fraction, ignoring scoring groups."""
    _check_labels(preds, phone_set)
    return sum(1 for t, p in preds if t == p) / len(preds)


@dataclass
class ConfusionMatrix:
    """Raw counts, rows = true phone, columns = predicted phone."""

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.labels = tuple(self.labels)
        self.counts = np.asarray(self.counts)
        n = len(self.labels)
        if self.counts.shape != (n, n):
            raise ValueError(
                f"counts must be {n}x{n}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be nonnegative")

    def normalized(self) -> np.ndarray:
        """Row frequencies; rows with no samples stay all zero."""
        sums = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, sums, where=sums > 0,
                         out=np.zeros(self.counts.shape))


def confusion(preds, phone_set: PhoneSet) -> ConfusionMatrix:
    _check_labels(preds, phone_set)
    n = len(phone_set.labels)
    counts = np.zeros((n, n), dtype=int)
    for true, predicted in preds:
        counts[phone_set.index(true), phone_set.index(predicted)] += 1
    return ConfusionMatrix(tuple(phone_set.labels), counts)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]

    def __post_init__(self) -> None:
        self.x = [float(v) for v in self.x]
        self.y = [float(v) for v in self.y]
        if len(self.x) != len(self.y):
            raise ValueError(
                f"series {self.label!r}: {len(self.x)} x values vs "
                f"{len(self.y)} y values")


@dataclass
class ExperimentReport:
    name: str
    scalars: dict[str, float] = field(default_factory=dict)
    series: list[Series] = field(default_factory=list)


def format_report(report: ExperimentReport) -> str:
    lines = [f"report {report.name}"]
    for key, value in report.scalars.items():
        lines.append(f"metric {key} {value!r}")
    for series in report.series:
        lines.append(f"series {series.label} {len(series.x)}")
        for x, y in zip(series.x, series.y):
            lines.append(f"{x!r} {y!r}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> ExperimentReport:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("report "):
        raise ValueError("not a report: missing 'report <name>' header")
    report = ExperimentReport(lines[0].split(None, 1)[1])
    i = 1
    while i < len(lines):
        fields = lines[i].split()
        if fields[0] == "metric" and len(fields) == 3:
            report.scalars[fields[1]] = float(fields[2])
            i += 1
        elif fields[0] == "series" and len(fields) == 3:
            count = int(fields[2])
            points = [lines[i + 1 + k].split() for k in range(count)]
            report.series.append(Series(fields[1],
                                        [float(p[0]) for p in points],
                                        [float(p[1]) for p in points]))
            i += 1 + count
        else:
            raise ValueError(f"unrecognized report line: {lines[i]!r}")
    return report


def report_csv(report: ExperimentReport) -> str:
    """One row per scalar and per curve point: kind,name,x,y."""
    rows = ["kind,name,x,y"]
    for key, value in report.scalars.items():
        rows.append(f"metric,{key},,{value!r}")
    for series in report.series:
        for x, y in zip(series.x, series.y):
            rows.append(f"point,{series.label},{x!r},{y!r}")
    return "\n".join(rows) + "\n"


def write_report(report: ExperimentReport, directory,
                 stem: str | None = None) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or report.name
    text_path = directory / f"{stem}.txt"
    csv_path = directory / f"{stem}.csv"
    text_path.write_text(format_report(report), encoding="utf-8")
    csv_path.write_text(report_csv(report), encoding="utf-8")
    return [text_path, csv_path]


def format_confusion(matrix: ConfusionMatrix) -> str:
    lines = [f"confusion {len(matrix.labels)}",
             "labels " + " ".join(matrix.labels), "counts"]
    for row in matrix.counts:
        lines.append(" ".join(str(int(v)) for v in row))
    lines.append("normalized")
    for row in matrix.normalized():
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def confusion_csv(matrix: ConfusionMatrix) -> str:
    rows = ["true,predicted,count,frequency"]
    freq = matrix.normalized()
    for i, true in enumerate(matrix.labels):
        for j, predicted in enumerate(matrix.labels):
            rows.append(f"{true},{predicted},{int(matrix.counts[i, j])},"
                        f"{float(freq[i, j])!r}")
    return "\n".join(rows) + "\n"


def write_confusion(matrix: ConfusionMatrix, directory,
                    stem: str = "confusion") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text_path = directory / f"{stem}.txt"
    csv_path = directory / f"{stem}.csv"
    text_path.write_text(format_confusion(matrix), encoding="utf-8")
    csv_path.write_text(confusion_csv(matrix), encoding="utf-8")
    return [text_path, csv_path]


# ---------------------------------------------------------------------------
# experiment plumbing


def _pair_rows(corpus, pair):
    """(pair-only corpus, per-phone row indices into it)."""
    a, b = pair
    subset = []
    rows: dict[str, list[int]] = {a: [], b: []}
    for recording, segment in corpus:
        if segment.label in rows:
            rows[segment.label].append(len(subset))
            subset.append((recording, segment))
    for phone in pair:
        if not rows[phone]:
            raise ValueError(f"corpus has no samples of phone {phone!r}")
    return subset, rows


def _split_rows(rows: dict[str, list[int]], seed: int,
                test_fraction: float = TEST_FRACTION):
    """Deterministic per-phone shuffle into (pool, test) row indices."""
    pool: dict[str, np.ndarray] = {}
    test: dict[str, np.ndarray] = {}
    for i, (phone, indices) in enumerate(sorted(rows.items())):
        if len(indices) < 2:
            raise ValueError(
                f"phone {phone!r} needs at least 2 samples to split into "
                f"train and test, got {len(indices)}")
        rng = np.random.default_rng(
            np.random.SeedSequence((seed, _SPLIT_STREAM, i)))
        shuffled = np.asarray(indices)[rng.permutation(len(indices))]
        n_test = max(1, int(round(test_fraction * len(indices))))
        n_test = min(n_test, len(indices) - 1)
        test[phone] = shuffled[:n_test]
        pool[phone] = shuffled[n_test:]
    return pool, test


def _pair_targets(rows_a: np.ndarray, rows_b: np.ndarray):
    indices = np.concatenate([rows_a, rows_b])
    targets = np.concatenate([-np.ones(len(rows_a)), np.ones(len(rows_b))])
    return indices, targets


def _error(classifier: boost.StrongClassifier, values: np.ndarray,
           targets: np.ndarray) -> float:
    outputs = boost.round_outputs(classifier, values).sum(axis=1)
    predictions = np.where(outputs > 0, 1.0, -1.0)
    return float(np.mean(predictions != targets))


def _featurize_pair(corpus, pair, config: pipeline.PipelineConfig):
    """Featurize the pair's samples once, with statistics from the training
    pool only; returns (table, pool rows, test rows) in table row space."""
    subset, rows = _pair_rows(corpus, pair)
    pool, test = _split_rows(rows, config.seed)
    featurizer = pipeline.Featurizer(config)
    if not config.has_stats():
        pool_corpus = [subset[i] for phone in pair for i in pool[phone]]
        featurizer = featurizer.with_stats(pool_corpus)
    table = multiclass.featurize_corpus(featurizer, subset)
    return table, pool, test


def learning_curve(corpus, pair, config: pipeline.PipelineConfig,
                   sizes, trials: int) -> ExperimentReport:
    """Mean train/test error per training-set size (samples per phone).

    Each size gets `trials` disjoint training subsets drawn from a pool
    that excludes the fixed test split.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"sizes must be positive, got {sizes}")
    if sizes != sorted(sizes):
        raise ValueError(f"sizes must be ascending, got {sizes}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    table, pool, test = _featurize_pair(corpus, pair, config)
    a, b = pair
    need = sizes[-1] * trials
    for phone in pair:
        have = len(pool[phone])
        if have < need:
            raise ValueError(
                f"learning curve needs {need} training samples of phone "
                f"{phone!r} ({trials} disjoint subsets of {sizes[-1]}), but "
                f"the pool holds only {have} after reserving the test set")
    test_idx, test_y = _pair_targets(test[a], test[b])
    train_means, test_means = [], []
    for size in sizes:
        train_errs, test_errs = [], []
        for trial in range(trials):
            lo, hi = trial * size, (trial + 1) * size
            idx, targets = _pair_targets(pool[a][lo:hi], pool[b][lo:hi])
            classifier, values, _ = multiclass.fit_binary_raw(
                table, idx, targets, pair)
            train_errs.append(_error(classifier, values(idx), targets))
            test_errs.append(_error(classifier, values(test_idx), test_y))
        train_means.append(float(np.mean(train_errs)))
        test_means.append(float(np.mean(test_errs)))
    return ExperimentReport(
        "learning",
        scalars={"trials": float(trials)},
        series=[Series("train", sizes, train_means),
                Series("test", sizes, test_means)])


def rounds_curve(classifier: boost.StrongClassifier,
                 train: boost.SampleMatrix,
                 test: boost.SampleMatrix) -> ExperimentReport:
    """Train/test error after each boosting round prefix 1..M."""
    if len(classifier) == 0:
        raise ValueError("classifier has no rounds")
    xs = list(range(1, len(classifier) + 1))
    series = []
    for label, data in (("train", train), ("test", test)):
        outputs = np.cumsum(boost.round_outputs(classifier, data.values),
                            axis=1)
        predictions = np.where(outputs > 0, 1.0, -1.0)
        errors = np.mean(predictions != data.labels[:, None], axis=0)
        series.append(Series(label, xs, errors.tolist()))
    return ExperimentReport("rounds", series=series)


def fit_pair_split(corpus, pair, config: pipeline.PipelineConfig):
    """Split, train on the pool, and package train/test sample matrices.

    Returns (classifier, train SampleMatrix, test SampleMatrix) ready for
    rounds_curve.
    """
    table, pool, test = _featurize_pair(corpus, pair, config)
    a, b = pair
    train_idx, train_y = _pair_targets(pool[a], pool[b])
    test_idx, test_y = _pair_targets(test[a], test[b])
    classifier, values, _ = multiclass.fit_binary_raw(table, train_idx,
                                                      train_y, pair)
    return (classifier,
            boost.SampleMatrix(values(train_idx), train_y),
            boost.SampleMatrix(values(test_idx), test_y))


def margin_sweep(corpus, pair, config: pipeline.PipelineConfig,
                 margins) -> ExperimentReport:
    """Train/test error as a function of added context margin (seconds).

    The train/test split is shared across margins so the error differences
    reflect the margin alone. Margin 0 reproduces the exact-window
    baseline.
    """
    margins = [float(m) for m in margins]
    if not margins or any(m < 0 for m in margins):
        raise ValueError(f"margins must be nonnegative, got {margins}")
    train_errs, test_errs = [], []
    for margin in margins:
        cfg = dataclasses.replace(config, mode="margins", margin=margin)
        table, pool, test = _featurize_pair(corpus, pair, cfg)
        a, b = pair
        train_idx, train_y = _pair_targets(pool[a], pool[b])
        test_idx, test_y = _pair_targets(test[a], test[b])
        classifier, values, _ = multiclass.fit_binary_raw(table, train_idx,
                                                          train_y, pair)
        train_errs.append(_error(classifier, values(train_idx), train_y))
        test_errs.append(_error(classifier, values(test_idx), test_y))
    return ExperimentReport(
        "margins",
        series=[Series("train", margins, train_errs),
                Series("test", margins, test_errs)])

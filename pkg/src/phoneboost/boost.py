"""Boosted decision stumps over precomputed feature matrices.

Two flavors share the stump search: the discrete variant votes with weighted
hard decisions (classifier weight log((1-e)/e), multiplicative reweighting of
misclassified samples), the gentle variant adds weighted-least-squares branch
outputs directly and reweights by exp(-y*f). Stump search is exhaustive over
features and thresholds; candidate thresholds are midpoints between distinct
consecutive sorted values plus one sentinel below the minimum. All ties break
toward the lowest feature index, then the lowest threshold, so training is
deterministic given the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ERROR_CLAMP = 1e-10
BLOCK_SIZE = 4096

FORMAT_TAG = "phoneboost-classifier"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Stump:
    """One threshold test on one feature column.

    Discrete stumps output polarity for values above the threshold and
    -polarity otherwise; gentle stumps output the real branch values
    above/below.
    """

    feature_index: int
    threshold: float
    mode: str
    polarity: int = 1
    above: float = 0.0
    below: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("discrete", "gentle"):
            raise ValueError(f"unknown stump mode {self.mode!r}")
        if self.mode == "discrete" and self.polarity not in (-1, 1):
            raise ValueError(f"polarity must be +-1, got {self.polarity}")

    def evaluate(self, column):
        """Stump output for a scalar or vector of feature values."""
        side = np.asarray(column) > self.threshold
        if self.mode == "discrete":
            out = np.where(side, float(self.polarity), float(-self.polarity))
        else:
            out = np.where(side, self.above, self.below)
        return float(out) if out.ndim == 0 else out


@dataclass
class StrongClassifier:
    """A trained stage: stumps with their votes, plus bookkeeping."""

    mode: str
    rounds: list[tuple[Stump, float]]
    labels: tuple[str, str] | None = None   # (phone at -1, phone at +1)
    terminated_early: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("discrete", "gentle"):
            raise ValueError(f"unknown classifier mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.rounds)

    def feature_indices(self) -> list[int]:
        return [stump.feature_index for stump, _ in self.rounds]


@dataclass
class SampleMatrix:
    """Feature rows with +-1 labels and normalized nonnegative weights."""

    values: np.ndarray
    labels: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        n = self.values.shape[0]
        if n == 0 or self.values.shape[1] == 0:
            raise ValueError("need at least one sample and one feature")
        if self.labels.shape != (n,):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match {n} samples")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        else:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != (n,):
                raise ValueError(
                    f"weights shape {self.weights.shape} does not match "
                    f"{n} samples")
            if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
                raise ValueError("weights must be finite and nonnegative")
            total = self.weights.sum()
            if total <= 0:
                raise ValueError("weights must not sum to zero")
            self.weights = self.weights / total

    @property
    def sample_count(self) -> int:
        return self.values.shape[0]

    @property
    def feature_count(self) -> int:
        return self.values.shape[1]


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _scan_block_discrete(xs, valid, labels_sorted, weights_sorted):
    """Best (error, candidate, polarity) per feature of a sorted block.

    Candidates are indexed 0 for the below-minimum sentinel, k >= 1 for the
    midpoint after sorted position k-1. Returns arrays over features.
    """
    n = xs.shape[0]
    wpos = np.where(labels_sorted > 0, weights_sorted, 0.0)
    wneg = weights_sorted - wpos
    cpos = np.cumsum(wpos, axis=0)
    cneg = np.cumsum(wneg, axis=0)
    total_pos = cpos[-1]
    total_neg = cneg[-1]
    errs = np.empty((n, 2) + xs.shape[1:])
    errs[0, 0] = total_neg               # sentinel, predict +1 everywhere
    errs[0, 1] = total_pos
    errs[1:, 0] = cpos[:-1] + (total_neg - cneg[:-1])
    errs[1:, 1] = cneg[:-1] + (total_pos - cpos[:-1])
    errs[1:][np.broadcast_to(~valid[:, None], errs[1:].shape)] = np.inf
    flat = errs.reshape((2 * n,) + xs.shape[1:])
    idx = np.argmin(flat, axis=0)
    cols = np.arange(xs.shape[1])
    best = flat[idx, cols]
    candidate = idx // 2
    polarity = np.where(idx % 2 == 0, 1, -1)
    return best, candidate, polarity


def _scan_block_gentle(xs, valid, labels_sorted, weights_sorted):
    """Best least-squares split per feature: (residual, candidate, above, below)."""
    n = xs.shape[0]
    cw = np.cumsum(weights_sorted, axis=0)
    cwy = np.cumsum(weights_sorted * labels_sorted, axis=0)
    total_w = cw[-1]
    total_wy = cwy[-1]
    gains = np.empty((n,) + xs.shape[1:])
    gains[0] = _safe_div(total_wy ** 2, total_w)
    left_w, left_wy = cw[:-1], cwy[:-1]
    right_w, right_wy = total_w - left_w, total_wy - left_wy
    gains[1:] = (_safe_div(left_wy ** 2, left_w)
                 + _safe_div(right_wy ** 2, right_w))
    gains[1:][~valid] = -np.inf
    idx = np.argmax(gains, axis=0)
    cols = np.arange(xs.shape[1])
    residual = total_w - gains[idx, cols]
    sent = idx == 0
    grab = np.maximum(idx - 1, 0)
    above = np.where(sent, _safe_div(total_wy, total_w),
                     _safe_div(right_wy[grab, cols], right_w[grab, cols]))
    below = np.where(sent, 0.0, _safe_div(left_wy[grab, cols],
                                          left_w[grab, cols]))
    return residual, idx, above, below


def _thresholds_for(xs, candidate, cols):
    sentinel = xs[0, cols] - 1.0
    grab = np.maximum(candidate - 1, 0)
    mids = 0.5 * (xs[grab, cols] + xs[np.minimum(grab + 1, xs.shape[0] - 1), cols])
    return np.where(candidate == 0, sentinel, mids)


class _SortCache:
    """Per-block sorted views of the feature matrix, reused across rounds."""

    def __init__(self, values: np.ndarray, block_size: int = BLOCK_SIZE):
        self.blocks = []
        for offset in range(0, values.shape[1], block_size):
            sub = values[:, offset:offset + block_size]
            order = np.argsort(sub, axis=0, kind="stable").astype(np.int32)
            xs = np.take_along_axis(sub, order, axis=0)
            valid = xs[:-1] < xs[1:]
            self.blocks.append((offset, order, xs, valid))


def _best_stump(cache: _SortCache, labels, weights, mode):
    best = None
    for offset, order, xs, valid in cache.blocks:
        ls = labels[order]
        ws = weights[order]
        cols = np.arange(xs.shape[1])
        if mode == "discrete":
            score, candidate, polarity = _scan_block_discrete(xs, valid, ls, ws)
        else:
            score, candidate, above, below = _scan_block_gentle(xs, valid, ls, ws)
        local = int(np.argmin(score))
        if best is not None and not score[local] < best[0]:
            continue
        thr = float(_thresholds_for(xs, candidate[[local]], np.array([local]))[0])
        if mode == "discrete":
            stump = Stump(offset + local, thr, "discrete",
                          polarity=int(polarity[local]))
        else:
            stump = Stump(offset + local, thr, "gentle",
                          above=float(above[local]), below=float(below[local]))
        best = (float(score[local]), stump)
    return best


def fit_stump_discrete(data: SampleMatrix, feature: int) -> tuple[Stump, float]:
    """Minimum weighted 0/1 error split of one feature column."""
    if not 0 <= feature < data.feature_count:
        raise ValueError(f"feature index {feature} out of range")
    cache = _SortCache(data.values[:, feature:feature + 1])
    err, stump = _best_stump(cache, data.labels, data.weights, "discrete")
    stump = Stump(feature, stump.threshold, "discrete", polarity=stump.polarity)
    return stump, err


def fit_stump_gentle(data: SampleMatrix, feature: int) -> tuple[Stump, float]:
    """Minimum weighted squared-residual split of one feature column."""
    if not 0 <= feature < data.feature_count:
        raise ValueError(f"feature index {feature} out of range")
    cache = _SortCache(data.values[:, feature:feature + 1])
    residual, stump = _best_stump(cache, data.labels, data.weights, "gentle")
    stump = Stump(feature, stump.threshold, "gentle",
                  above=stump.above, below=stump.below)
    return stump, residual


def train_discrete(data: SampleMatrix, n_rounds: int,
                   labels: tuple[str, str] | None = None,
                   trace=None) -> StrongClassifier:
    """Weighted-vote boosting with hard stumps.

    Each round fits the best stump under the current weights, stops early if
    its weighted error reaches 0.5 (checked before clamping), otherwise
    weights the stump by log((1-e)/e) with e clamped away from 0 and 1,
    scales misclassified sample weights by that factor's exp, and
    renormalizes. trace, if given, is called with (round, stump, vote,
    weights) after each reweighting; useful for inspecting convergence.
    """
    if n_rounds < 1:
        raise ValueError(f"n_rounds must be >= 1, got {n_rounds}")
    cache = _SortCache(data.values)
    weights = data.weights.copy()
    rounds: list[tuple[Stump, float]] = []
    terminated = False
    for _ in range(n_rounds):
        err, stump = _best_stump(cache, data.labels, weights, "discrete")
        if err >= 0.5:
            terminated = True
            break
        clamped = min(max(err, ERROR_CLAMP), 1.0 - ERROR_CLAMP)
        vote = float(np.log((1.0 - clamped) / clamped))
        rounds.append((stump, vote))
        predictions = stump.evaluate(data.values[:, stump.feature_index])
        missed = predictions != data.labels
        weights = weights * np.exp(vote * missed)
        weights = weights / weights.sum()
        if trace is not None:
            trace(len(rounds) - 1, stump, vote, weights)
    return StrongClassifier("discrete", rounds, labels, terminated)


def train_gentle(data: SampleMatrix, n_rounds: int,
                 labels: tuple[str, str] | None = None,
                 trace=None) -> StrongClassifier:
    """Additive boosting with least-squares stumps.

    Each round adds the stump's real-valued output to the ensemble, scales
    sample weights by exp(-y*f) and renormalizes. Rounds all carry vote 1.
    trace as in train_discrete.
    """
    if n_rounds < 1:
        raise ValueError(f"n_rounds must be >= 1, got {n_rounds}")
    cache = _SortCache(data.values)
    weights = data.weights.copy()
    rounds: list[tuple[Stump, float]] = []
    for _ in range(n_rounds):
        _, stump = _best_stump(cache, data.labels, weights, "gentle")
        rounds.append((stump, 1.0))
        outputs = stump.evaluate(data.values[:, stump.feature_index])
        weights = weights * np.exp(-data.labels * outputs)
        weights = weights / weights.sum()
        if trace is not None:
            trace(len(rounds) - 1, stump, 1.0, weights)
    return StrongClassifier("gentle", rounds, labels)


def round_outputs(classifier: StrongClassifier, values: np.ndarray) -> np.ndarray:
    """Per-round weighted outputs for each sample row: shape (n, rounds)."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    out = np.empty((values.shape[0], len(classifier.rounds)))
    for m, (stump, vote) in enumerate(classifier.rounds):
        out[:, m] = vote * stump.evaluate(values[:, stump.feature_index])
    return out


def score(classifier: StrongClassifier, sample_features,
          n_rounds: int | None = None) -> float:
    """Ensemble sum for one feature vector, optionally truncated to a prefix."""
    sample_features = np.asarray(sample_features, dtype=np.float64)
    rounds = classifier.rounds if n_rounds is None else classifier.rounds[:n_rounds]
    total = 0.0
    for stump, vote in rounds:
        total += vote * stump.evaluate(sample_features[stump.feature_index])
    return float(total)


def classify(classifier: StrongClassifier, sample_features,
             n_rounds: int | None = None) -> int:
    """Sign of the ensemble score; an exact zero counts as -1."""
    return 1 if score(classifier, sample_features, n_rounds) > 0 else -1


# ---------------------------------------------------------------------------
# text serialization (feature descriptors are referenced by index; the model
# layer around this owns the descriptor table)
# ---------------------------------------------------------------------------

def format_classifier(classifier: StrongClassifier) -> list[str]:
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        f"mode {classifier.mode}",
    ]
    if classifier.labels is not None:
        lines.append(f"labels {classifier.labels[0]} {classifier.labels[1]}")
    lines.append(f"terminated {int(classifier.terminated_early)}")
    lines.append(f"rounds {len(classifier.rounds)}")
    for stump, vote in classifier.rounds:
        if classifier.mode == "discrete":
            lines.append(f"{stump.feature_index} {stump.threshold!r} "
                         f"{stump.polarity} {vote!r}")
        else:
            lines.append(f"{stump.feature_index} {stump.threshold!r} "
                         f"{stump.above!r} {stump.below!r} {vote!r}")
    return lines


def parse_classifier(lines: list[str]) -> StrongClassifier:
    it = iter(line.strip() for line in lines if line.strip())
    header = next(it, "")
    fields = header.split()
    if len(fields) != 2 or fields[0] != FORMAT_TAG:
        raise ValueError(f"bad classifier header {header!r}")
    if int(fields[1]) != FORMAT_VERSION:
        raise ValueError(f"unsupported classifier format version {fields[1]}")
    mode = None
    labels = None
    terminated = False
    n_rounds = None
    for line in it:
        key, *rest = line.split()
        if key == "mode":
            mode = rest[0]
        elif key == "labels":
            if len(rest) != 2:
                raise ValueError(f"bad labels line {line!r}")
            labels = (rest[0], rest[1])
        elif key == "terminated":
            terminated = bool(int(rest[0]))
        elif key == "rounds":
            n_rounds = int(rest[0])
            break
        else:
            raise ValueError(f"unexpected line {line!r} in classifier record")
    if mode is None or n_rounds is None:
        raise ValueError("classifier record is missing mode or rounds")
    rounds = []
    for _ in range(n_rounds):
        line = next(it, None)
        if line is None:
            raise ValueError(
                f"classifier record ends early: expected {n_rounds} rounds")
        fields = line.split()
        if mode == "discrete":
            if len(fields) != 4:
                raise ValueError(f"bad discrete round line {line!r}")
            stump = Stump(int(fields[0]), float(fields[1]), "discrete",
                          polarity=int(fields[2]))
            rounds.append((stump, float(fields[3])))
        else:
            if len(fields) != 5:
                raise ValueError(f"bad gentle round line {line!r}")
            stump = Stump(int(fields[0]), float(fields[1]), "gentle",
                          above=float(fields[2]), below=float(fields[3]))
            rounds.append((stump, float(fields[4])))
    return StrongClassifier(mode, rounds, labels, terminated)

"""Gradient-orientation histograms over spectrogram patches.

Each patch of the image yields a 9-bin histogram of gradient directions,
magnitude-weighted and attenuated by distance from the patch center. A small
linear SVM is trained per patch on those histograms; its raw output is the
scalar feature that boosting consumes. Patches at a fixed coordinate can also
be pooled across neighboring columns of a longer spectrogram, which handles
variable-length input without warping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_BINS = 9
BIN_WIDTH = 2.0 * np.pi / N_BINS
DIST_EPS = 0.5

SVM_ITERATIONS = 800


@dataclass(frozen=True)
class HogPatch:
    """Pixel rectangle: band/column origin, width in columns, height in bands."""

    band: int
    column: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.band < 0 or self.column < 0:
            raise ValueError(f"origin ({self.band}, {self.column}) must be >= 0")
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"patch must be at least 1x1, got {self.width}x{self.height}")


@dataclass
class HogSvmFeature:
    """A patch plus the trained hyperplane that scores its histogram."""

    patch: HogPatch | None
    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_BINS,):
            raise ValueError(f"need {N_BINS} weights, got {self.weights.shape}")


def format_feature(feature: HogSvmFeature) -> str:
    p = feature.patch
    if p is None:
        raise ValueError("cannot serialize a feature without its patch")
    nums = " ".join(repr(float(w)) for w in feature.weights)
    return f"{p.band} {p.column} {p.width} {p.height} {nums} {repr(feature.bias)}"


def parse_feature(line: str) -> HogSvmFeature:
    fields = line.split()
    if len(fields) != 4 + N_BINS + 1:
        raise ValueError(f"expected patch, {N_BINS} weights and bias, got {line!r}")
    patch = HogPatch(*(int(v) for v in fields[:4]))
    weights = np.array([float(v) for v in fields[4:4 + N_BINS]])
    return HogSvmFeature(patch, weights, float(fields[-1]))


def _as_values(source) -> np.ndarray:
    values = source.values if hasattr(source, "values") else source
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"need a 2-D grid, got shape {values.shape}")
    return values


def gradient_fields(values: np.ndarray):
    """Per-pixel gradient magnitude, direction bin, and validity mask.

    Gradients are central differences, so pixels on the image's one-pixel
    border (where a neighbor is missing) are marked invalid.
    """
    dx = np.zeros_like(values)
    dy = np.zeros_like(values)
    dx[:, 1:-1] = values[:, 2:] - values[:, :-2]
    dy[1:-1, :] = values[2:, :] - values[:-2, :]
    magnitude = np.hypot(dx, dy)
    direction = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    bins = np.minimum((direction / BIN_WIDTH).astype(np.intp), N_BINS - 1)
    valid = np.zeros(values.shape, dtype=bool)
    valid[1:-1, 1:-1] = True
    return magnitude, bins, valid


def hog_histogram(source, patch: HogPatch) -> np.ndarray:
    """9-bin direction histogram of a patch, max-normalized.

    Each pixel of the patch whose 4-neighbors lie inside the image adds its
    gradient magnitude, divided by (distance from the patch center + 0.5),
    to the bin floor(direction / (2*pi/9)). The histogram is divided by its
    largest bin unless all bins are zero.
    """
    values = _as_values(source)
    b0, c0 = patch.band, patch.column
    b1, c1 = b0 + patch.height, c0 + patch.width
    if b1 > values.shape[0] or c1 > values.shape[1]:
        raise ValueError(
            f"patch [{b0}:{b1}, {c0}:{c1}] leaves the "
            f"{values.shape[0]}x{values.shape[1]} image")
    magnitude, bins, valid = gradient_fields(values)
    rows = np.arange(b0, b1)[:, None]
    cols = np.arange(c0, c1)[None, :]
    mask = valid[rows, cols]
    if not mask.any():
        raise ValueError(
            f"patch [{b0}:{b1}, {c0}:{c1}] has no pixels with in-image "
            f"neighbors in a {values.shape[0]}x{values.shape[1]} image")
    center_b = b0 + (patch.height - 1) / 2.0
    center_c = c0 + (patch.width - 1) / 2.0
    dist = np.hypot(rows - center_b, cols - center_c)
    weights = np.where(mask, magnitude[rows, cols] / (dist + DIST_EPS), 0.0)
    hist = np.bincount(bins[rows, cols].ravel(), weights=weights.ravel(),
                       minlength=N_BINS).astype(np.float64)
    peak = hist.max()
    if peak > 0.0:
        hist /= peak
    return hist


def _distance_kernel(height: int, width: int) -> np.ndarray:
    rows = np.arange(height)[:, None] - (height - 1) / 2.0
    cols = np.arange(width)[None, :] - (width - 1) / 2.0
    return 1.0 / (np.hypot(rows, cols) + DIST_EPS)


def histogram_maps(source, height: int, width: int) -> np.ndarray:
    """Histograms of every (height x width) patch position at once.

    Returns (N_BINS, bands - height + 1, columns - width + 1); position
    (i, j) matches hog_histogram at origin (i, j) up to roundoff.
    """
    values = _as_values(source)
    if height > values.shape[0] or width > values.shape[1]:
        raise ValueError(
            f"{height}x{width} patches do not fit a "
            f"{values.shape[0]}x{values.shape[1]} image")
    magnitude, bins, valid = gradient_fields(values)
    kernel = _distance_kernel(height, width)
    per_bin = np.zeros((N_BINS,) + values.shape)
    rows, cols = np.indices(values.shape)
    per_bin[bins, rows, cols] = np.where(valid, magnitude, 0.0)
    windows = np.lib.stride_tricks.sliding_window_view(
        per_bin, (height, width), axis=(1, 2))
    raw = np.einsum("bijhw,hw->bij", windows, kernel)
    peak = raw.max(axis=0)
    return raw / np.where(peak > 0.0, peak, 1.0)


def enumerate_hog(bands: int, columns: int) -> list[HogPatch]:
    """All (t, t), (2t, t) and (t, 2t) patches for even t, strictly smaller
    than the image in both dimensions, at every in-bounds origin."""
    if bands < 1 or columns < 1:
        raise ValueError(f"image geometry must be positive, got {bands}x{columns}")
    patches = []
    t = 2
    while True:
        shapes = [(t, t), (2 * t, t), (t, 2 * t)]
        fitting = [(w, h) for w, h in shapes if w < columns and h < bands]
        if not fitting:
            break
        for width, height in fitting:
            for band in range(bands - height + 1):
                for column in range(columns - width + 1):
                    patches.append(HogPatch(band, column, width, height))
        t += 2
    return patches


def _svm_fit_batch(histograms: np.ndarray, labels: np.ndarray, c: float,
                   iterations: int):
    """Full-batch subgradient descent on the hinge loss, one SVM per patch.

    Deterministic: no sampling, fixed iteration budget, tail-averaged
    iterates. Flipping every label exactly negates the result.
    """
    n, n_patches, dim = histograms.shape
    lam = 1.0 / (c * n)
    radius = 1.0 / np.sqrt(lam)
    weights = np.zeros((n_patches, dim))
    bias = np.zeros(n_patches)
    avg_w = np.zeros_like(weights)
    avg_b = np.zeros_like(bias)
    tail_start = iterations // 2
    for step in range(1, iterations + 1):
        margins = np.einsum("npd,pd->np", histograms, weights) + bias
        coef = np.where(labels[:, None] * margins < 1.0, labels[:, None], 0.0)
        grad_w = lam * weights - np.einsum("np,npd->pd", coef, histograms) / n
        grad_b = -coef.sum(axis=0) / n
        eta = 1.0 / (lam * (step + 1))
        weights = weights - eta * grad_w
        bias = bias - eta * grad_b
        norms = np.linalg.norm(weights, axis=1, keepdims=True)
        weights = weights * np.minimum(1.0, radius / np.maximum(norms, 1e-300))
        if step > tail_start:
            avg_w += weights
            avg_b += bias
    count = iterations - tail_start
    return avg_w / count, avg_b / count


def train_patch_svm(histograms_pos: np.ndarray, histograms_neg: np.ndarray,
                    patch: HogPatch | None = None, c: float = 1.0,
                    iterations: int = SVM_ITERATIONS) -> HogSvmFeature:
    """Fit the patch's linear classifier: positives to +1, negatives to -1."""
    pos = np.atleast_2d(np.asarray(histograms_pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(histograms_neg, dtype=np.float64))
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise ValueError("need at least one histogram on each side")
    if pos.shape[1] != N_BINS or neg.shape[1] != N_BINS:
        raise ValueError(
            f"histograms must have {N_BINS} bins, got {pos.shape[1]} and "
            f"{neg.shape[1]}")
    stacked = np.concatenate([pos, neg])[:, None, :]
    labels = np.concatenate([np.ones(pos.shape[0]), -np.ones(neg.shape[0])])
    weights, bias = _svm_fit_batch(stacked, labels, c, iterations)
    return HogSvmFeature(patch, weights[0], float(bias[0]))


def eval_hog_feature(source, feature: HogSvmFeature) -> float:
    """Raw SVM output for the feature's patch on this image."""
    if feature.patch is None:
        raise ValueError("feature has no patch to evaluate")
    hist = hog_histogram(source, feature.patch)
    return float(feature.weights @ hist + feature.bias)


def _pooled_positions(t: int, width: int, t0: int, t1: int) -> range:
    if t1 == t0:
        return range(t, t + 1)
    lo = int(np.floor(t * t1 / t0)) - 1
    hi = int(np.ceil(t * t1 / t0))
    last = t1 - width
    lo = max(0, min(lo, last))
    hi = max(lo, min(hi, last))
    return range(lo, hi + 1)


def pooled_histogram(source, patch: HogPatch, t0: int,
                     mode: str = "avg") -> np.ndarray:
    """Bin-wise pool of the patch's histogram over its column span.

    The patch coordinates live on a standard t0-column geometry; on an image
    with T1 >= t0 columns the patch slides over the span
    [floor(t*T1/t0) - 1, ceil(t*T1/t0)] (just {t} when T1 == t0) and the
    normalized histograms are pooled bin-wise by avg or max.
    """
    if mode not in ("avg", "max"):
        raise ValueError(f"pooling mode must be avg or max, got {mode!r}")
    values = _as_values(source)
    t1 = values.shape[1]
    if t1 < t0:
        raise ValueError(
            f"image has {t1} columns, fewer than the standard {t0}; pad or "
            f"warp up first")
    if patch.column + patch.width > t0:
        raise ValueError(
            f"patch column span [{patch.column}, {patch.column + patch.width}) "
            f"leaves the standard {t0}-column geometry")
    span = _pooled_positions(patch.column, patch.width, t0, t1)
    hists = np.stack([
        hog_histogram(values, HogPatch(patch.band, col, patch.width,
                                       patch.height))
        for col in span])
    return hists.mean(axis=0) if mode == "avg" else hists.max(axis=0)


def pooled_hog_feature(source, feature: HogSvmFeature, t0: int,
                       mode: str = "avg") -> float:
    """SVM output on the pooled histogram of the feature's patch."""
    if feature.patch is None:
        raise ValueError("feature has no patch to evaluate")
    pooled = pooled_histogram(source, feature.patch, t0, mode)
    return float(feature.weights @ pooled + feature.bias)

"""Rectangle-contrast features over spectrogram images.

Six feature kinds (edges, lines, center-surround, diagonal) evaluated in
constant time through an integral image. Weights are chosen per kind so the
response to a constant image is zero: the white/black areas cancel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# (cells wide, cells tall) of each kind's minimal footprint
KINDS = {
    "edge_vertical": (2, 1),
    "edge_horizontal": (1, 2),
    "line_vertical": (3, 1),
    "line_horizontal": (1, 3),
    "center_surround": (3, 3),
    "diagonal": (2, 2),
}

KIND_ORDER = tuple(KINDS)


class IntegralImage:
    """Cumulative-sum table giving O(1) rectangle sums.

    Entry (i, j) of the table is the sum of all cells with band < i and
    column < j, stored relative to the image's first cell (the anchor).
    Rectangle sums add the anchor back; feature evaluation skips it, since
    every kind's weighted areas cancel, which is what makes responses on
    constant images exactly zero rather than roundoff-sized.
    """

    def __init__(self, table: np.ndarray, anchor: float, shape: tuple[int, int]):
        self.table = table
        self.anchor = anchor
        self.shape = shape

    @property
    def entries(self) -> np.ndarray:
        """Raw cumulative sums: entry (i, j) = sum of cells above-left."""
        cells = (np.arange(self.shape[0] + 1)[:, None]
                 * np.arange(self.shape[1] + 1)[None, :])
        return self.table + self.anchor * cells

    def _combo(self, b0: int, c0: int, b1: int, c1: int) -> float:
        t = self.table
        return float(t[b1, c1] - t[b0, c1] - t[b1, c0] + t[b0, c0])

    def rect_sum(self, b0: int, c0: int, b1: int, c1: int) -> float:
        """Sum of cells in bands [b0, b1), columns [c0, c1)."""
        if not (0 <= b0 <= b1 <= self.shape[0] and 0 <= c0 <= c1 <= self.shape[1]):
            raise ValueError(
                f"rectangle [{b0}:{b1}, {c0}:{c1}] leaves the "
                f"{self.shape[0]}x{self.shape[1]} image")
        return self._combo(b0, c0, b1, c1) + self.anchor * (b1 - b0) * (c1 - c0)


def integral(source) -> IntegralImage:
    """Build the summed-area table of a spectrogram or plain 2-D array."""
    values = source.values if hasattr(source, "values") else source
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise ValueError(f"need a nonempty 2-D grid, got shape {values.shape}")
    anchor = float(values[0, 0])
    table = np.zeros((values.shape[0] + 1, values.shape[1] + 1))
    table[1:, 1:] = (values - anchor).cumsum(axis=0).cumsum(axis=1)
    return IntegralImage(table, anchor, values.shape)


@dataclass(frozen=True)
class HaarFeature:
    """One rectangle-contrast feature: kind plus pixel geometry.

    band/column locate the top-left corner; width spans columns, height
    spans bands.
    """

    kind: str
    band: int
    column: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        cw, ch = KINDS[self.kind]
        if self.band < 0 or self.column < 0:
            raise ValueError(f"origin ({self.band}, {self.column}) must be >= 0")
        if self.width < cw or self.width % cw:
            raise ValueError(
                f"{self.kind} width must be a positive multiple of {cw}, "
                f"got {self.width}")
        if self.height < ch or self.height % ch:
            raise ValueError(
                f"{self.kind} height must be a positive multiple of {ch}, "
                f"got {self.height}")

    def rects(self) -> list[tuple[int, int, int, int, float]]:
        """(b0, c0, b1, c1, weight) rectangles; weighted areas sum to zero."""
        b, c, w, h = self.band, self.column, self.width, self.height
        if self.kind == "edge_vertical":
            return [(b, c, b + h, c + w // 2, 1.0),
                    (b, c + w // 2, b + h, c + w, -1.0)]
        if self.kind == "edge_horizontal":
            return [(b, c, b + h // 2, c + w, 1.0),
                    (b + h // 2, c, b + h, c + w, -1.0)]
        if self.kind == "line_vertical":
            third = w // 3
            return [(b, c, b + h, c + third, -1.0),
                    (b, c + third, b + h, c + 2 * third, 2.0),
                    (b, c + 2 * third, b + h, c + w, -1.0)]
        if self.kind == "line_horizontal":
            third = h // 3
            return [(b, c, b + third, c + w, -1.0),
                    (b + third, c, b + 2 * third, c + w, 2.0),
                    (b + 2 * third, c, b + h, c + w, -1.0)]
        if self.kind == "center_surround":
            tw, th = w // 3, h // 3
            return [(b, c, b + h, c + w, -1.0),
                    (b + th, c + tw, b + 2 * th, c + 2 * tw, 9.0)]
        # diagonal: paired quadrants
        hw, hh = w // 2, h // 2
        return [(b, c, b + hh, c + hw, 1.0),
                (b, c + hw, b + hh, c + w, -1.0),
                (b + hh, c, b + h, c + hw, -1.0),
                (b + hh, c + hw, b + h, c + w, 1.0)]


def format_feature(feature: HaarFeature) -> str:
    return (f"{feature.kind} {feature.band} {feature.column} "
            f"{feature.width} {feature.height}")


def parse_feature(line: str) -> HaarFeature:
    fields = line.split()
    if len(fields) != 5:
        raise ValueError(f"expected 'kind band column width height', got {line!r}")
    return HaarFeature(fields[0], *(int(v) for v in fields[1:]))


def _normalize_scales(scales) -> list[tuple[int, int]]:
    seen = []
    for s in scales:
        pair = (int(s), int(s)) if np.isscalar(s) else (int(s[0]), int(s[1]))
        if pair[0] < 1 or pair[1] < 1:
            raise ValueError(f"scales must be >= 1, got {pair}")
        if pair not in seen:
            seen.append(pair)
    return seen


class FeatureBank:
    """An ordered, duplicate-free feature list for a fixed image geometry."""

    def __init__(self, features: list[HaarFeature], bands: int, columns: int):
        self.features = features
        self.bands = bands
        self.columns = columns
        self._arrays = None

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, idx: int) -> HaarFeature:
        return self.features[idx]

    def _corner_arrays(self):
        # padded to 4 rectangles; weight 0 rows contribute nothing
        if self._arrays is None:
            n = len(self.features)
            r0 = np.zeros((n, 4), dtype=np.intp)
            c0 = np.zeros((n, 4), dtype=np.intp)
            r1 = np.zeros((n, 4), dtype=np.intp)
            c1 = np.zeros((n, 4), dtype=np.intp)
            wt = np.zeros((n, 4))
            for i, feature in enumerate(self.features):
                for j, (a, b, c, d, w) in enumerate(feature.rects()):
                    r0[i, j], c0[i, j], r1[i, j], c1[i, j], wt[i, j] = a, b, c, d, w
            self._arrays = (r0, c0, r1, c1, wt)
        return self._arrays

    def evaluate(self, image: IntegralImage) -> np.ndarray:
        """All feature responses for one image as a float vector."""
        if image.shape != (self.bands, self.columns):
            raise ValueError(
                f"bank built for {self.bands}x{self.columns}, image is "
                f"{image.shape[0]}x{image.shape[1]}")
        r0, c0, r1, c1, wt = self._corner_arrays()
        t = image.table
        combos = t[r1, c1] - t[r0, c1] - t[r1, c0] + t[r0, c0]
        return np.einsum("fr,fr->f", combos, wt)


def enumerate_haar(bands: int, columns: int, scales=None) -> FeatureBank:
    """Every kind at every in-bounds origin and scale.

    A scale is pixels per cell: an int applies to both axes, a (sx, sy) pair
    scales width and height independently. scales=None enumerates every cell
    size whose footprint fits the image. Order is deterministic: kind, then
    scale, then origin band, then origin column.
    """
    if bands < 1 or columns < 1:
        raise ValueError(f"image geometry must be positive, got {bands}x{columns}")
    explicit = None if scales is None else _normalize_scales(scales)
    features = []
    for kind in KIND_ORDER:
        cw, ch = KINDS[kind]
        if explicit is None:
            pairs = [(sx, sy)
                     for sy in range(1, bands // ch + 1)
                     for sx in range(1, columns // cw + 1)]
        else:
            pairs = explicit
        for sx, sy in pairs:
            width, height = cw * sx, ch * sy
            if width > columns or height > bands:
                continue
            for band in range(bands - height + 1):
                for column in range(columns - width + 1):
                    features.append(HaarFeature(kind, band, column, width, height))
    return FeatureBank(features, bands, columns)


def eval_haar(feature: HaarFeature, image: IntegralImage) -> float:
    """Response of one feature on one integral image."""
    if (feature.band + feature.height > image.shape[0]
            or feature.column + feature.width > image.shape[1]):
        raise ValueError(
            f"feature {format_feature(feature)} leaves the "
            f"{image.shape[0]}x{image.shape[1]} image")
    # anchor terms cancel across the rectangles, so combos alone are exact
    return float(sum(w * image._combo(b0, c0, b1, c1)
                     for b0, c0, b1, c1, w in feature.rects()))

"""Spectrogram construction and shaping.

Everything downstream (Haar features, HoG features, cepstral stumps) consumes
small spectrogram images, so this module owns the path from raw samples to a
normalized band-by-column grid, plus the reshaping strategies that deal with
variable segment length: exact/fixed/margin windows, bilinear warping,
duration-bucketed frame stacking, and smoothed stacking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.ndimage import convolve1d

STAGES = ("power", "mel", "log", "normalized")

# floor added before log10 so silent cells stay finite
LOG_EPS = 1e-10

# duration thresholds (seconds) for frame stacking, half-open ranges
STACK_EDGES = (0.075, 0.150)

SMOOTH_KERNELS = (
    np.array([1.0, 2.0, 1.0]) / 4.0,
    np.array([1.0, 2.0, 5.0, 2.0, 1.0]) / 11.0,
)


@dataclass(frozen=True)
class StftConfig:
    """Frame geometry for the short-time transform."""

    frame_length: int = 128
    increment: int = 64
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        if self.frame_length < 2 or self.frame_length % 2 != 0:
            raise ValueError(
                f"frame_length must be even and >= 2, got {self.frame_length}")
        if not 0 < self.increment <= self.frame_length:
            raise ValueError(
                f"increment must be in (0, frame_length], got {self.increment}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def band_count(self) -> int:
        return self.frame_length // 2 + 1

    def column_count(self, n_samples: int) -> int:
        if n_samples < self.frame_length:
            raise ValueError(
                f"need at least {self.frame_length} samples, got {n_samples}")
        return (n_samples - self.frame_length) // self.increment + 1


@dataclass
class Spectrogram:
    """A band-by-column grid of reals at a named processing stage."""

    values: np.ndarray
    stage: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}, expected one of {STAGES}")

    @property
    def band_count(self) -> int:
        return self.values.shape[0]

    @property
    def column_count(self) -> int:
        return self.values.shape[1]


@dataclass
class MelBank:
    """Triangular filters with peaks equally spaced on the mel scale."""

    filters: np.ndarray        # (n_mel, n_fft_bins) nonnegative weights
    corners: np.ndarray        # (n_mel + 2,) corner frequencies in Hz
    bin_freqs: np.ndarray      # (n_fft_bins,) center frequency per fft bin
    sample_rate: int
    f_min: float
    f_max: float

    @property
    def band_count(self) -> int:
        return self.filters.shape[0]

    @property
    def peaks(self) -> np.ndarray:
        """Peak frequency of each filter in Hz."""
        return self.corners[1:-1]

    def response(self, k: int, freq: float) -> float:
        """Continuous value of filter k at an arbitrary frequency."""
        if not 0 <= k < self.band_count:
            raise ValueError(f"filter index {k} out of range")
        lo, mid, hi = self.corners[k], self.corners[k + 1], self.corners[k + 2]
        if freq <= lo or freq >= hi:
            return 0.0
        if freq <= mid:
            return float((freq - lo) / (mid - lo))
        return float((hi - freq) / (hi - mid))


@dataclass
class MfccFrame:
    """Cepstral coefficients for one column plus their local time derivatives."""

    coefficients: np.ndarray
    delta: np.ndarray
    delta_delta: np.ndarray

    def __post_init__(self) -> None:
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.float64)
        self.delta_delta = np.asarray(self.delta_delta, dtype=np.float64)
        n = self.coefficients.shape[0]
        if self.delta.shape != (n,) or self.delta_delta.shape != (n,):
            raise ValueError("coefficient, delta and delta_delta lengths must match")


def hamming(n: int) -> np.ndarray:
    """Hamming window: 0.54 - 0.46*cos(2*pi*k/(n-1)) for k in [0, n)."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def stft_power(samples: np.ndarray, config: StftConfig) -> Spectrogram:
    """Squared-magnitude short-time spectrum, one column per frame.

    Frames advance by ``config.increment`` and are fully contained in the
    signal, so the column count is floor((len - frame)/increment) + 1. Only
    the frame_length/2 + 1 nonnegative-frequency bins are kept.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
    n = config.frame_length
    cols = config.column_count(samples.shape[0])
    frames = np.lib.stride_tricks.sliding_window_view(samples, n)
    frames = frames[:: config.increment][:cols]
    spectrum = np.fft.rfft(frames * hamming(n), axis=1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    return Spectrogram(power.T, "power")


def mel_from_hz(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def hz_from_mel(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def build_mel_bank(n_mel: int, n_fft_bins: int, sample_rate: int,
                   f_min: float = 0.0, f_max: float | None = None) -> MelBank:
    """Build triangular filters whose peaks are equally spaced in mel.

    Filter k rises linearly in Hz from corner k to corner k+1 (its peak,
    value exactly 1) and falls to corner k+2, with the n_mel + 2 corners
    placed uniformly between mel(f_min) and mel(f_max).
    """
    if n_mel < 1:
        raise ValueError(f"need at least one mel band, got {n_mel}")
    if n_fft_bins < 2:
        raise ValueError(f"need at least two fft bins, got {n_fft_bins}")
    nyquist = sample_rate / 2.0
    if f_max is None:
        f_max = nyquist
    if not 0.0 <= f_min < f_max <= nyquist:
        raise ValueError(
            f"need 0 <= f_min < f_max <= {nyquist}, got [{f_min}, {f_max}]")
    corners = hz_from_mel(np.linspace(mel_from_hz(f_min), mel_from_hz(f_max),
                                      n_mel + 2))
    bin_freqs = np.linspace(0.0, nyquist, n_fft_bins)
    lo = corners[:-2, None]
    mid = corners[1:-1, None]
    hi = corners[2:, None]
    rise = (bin_freqs[None, :] - lo) / (mid - lo)
    fall = (hi - bin_freqs[None, :]) / (hi - mid)
    filters = np.clip(np.minimum(rise, fall), 0.0, None)
    return MelBank(filters, corners, bin_freqs, sample_rate, float(f_min),
                   float(f_max))


def mel_energies(spect: Spectrogram, bank: MelBank) -> Spectrogram:
    """Apply the filter bank to every column of a power spectrogram."""
    if spect.stage != "power":
        raise ValueError(f"expected a power spectrogram, got stage {spect.stage!r}")
    if bank.filters.shape[1] != spect.band_count:
        raise ValueError(
            f"bank covers {bank.filters.shape[1]} fft bins, spectrogram has "
            f"{spect.band_count}")
    return Spectrogram(bank.filters @ spect.values, "mel")


def log_compress(spect: Spectrogram, eps: float = LOG_EPS) -> Spectrogram:
    if spect.stage != "mel":
        raise ValueError(f"expected a mel spectrogram, got stage {spect.stage!r}")
    return Spectrogram(np.log10(spect.values + eps), "log")


def clip_normalize(spect: Spectrogram, low: float, high: float) -> Spectrogram:
    """Clip log values to [low, high] and map that range onto [0, 1]."""
    if spect.stage != "log":
        raise ValueError(f"expected a log spectrogram, got stage {spect.stage!r}")
    if not high > low:
        raise ValueError(f"need high > low, got [{low}, {high}]")
    clipped = np.clip(spect.values, low, high)
    return Spectrogram((clipped - low) / (high - low), "normalized")


def process_spectrogram(spect: Spectrogram, bank: MelBank,
                        clip: tuple[float, float],
                        eps: float = LOG_EPS) -> Spectrogram:
    """Power -> mel -> log10(.+eps) -> clipped affine map to [0, 1]."""
    low, high = clip
    return clip_normalize(log_compress(mel_energies(spect, bank), eps), low, high)


def _interp_matrix(src: int, dst: int) -> np.ndarray:
    # corner-aligned linear interpolation; identity when src == dst
    if src < 1 or dst < 1:
        raise ValueError("interpolation needs at least one cell on each side")
    m = np.zeros((dst, src))
    if src == 1:
        m[:, 0] = 1.0
        return m
    if dst == 1:
        positions = np.array([(src - 1) / 2.0])
    else:
        positions = np.arange(dst) * ((src - 1) / (dst - 1))
    lo = np.floor(positions).astype(int)
    frac = positions - lo
    rows = np.arange(dst)
    m[rows, lo] = 1.0 - frac
    m[rows, np.minimum(lo + 1, src - 1)] += frac
    return m


def warp(spect: Spectrogram, target_bands: int, target_columns: int) -> Spectrogram:
    """Bilinear resample of a normalized spectrogram to a fixed grid."""
    if spect.stage != "normalized":
        raise ValueError(f"warp expects a normalized spectrogram, got {spect.stage!r}")
    rows = _interp_matrix(spect.band_count, target_bands)
    cols = _interp_matrix(spect.column_count, target_columns)
    values = rows @ spect.values @ cols.T
    # convex weights keep values inside [0, 1] up to roundoff; pin them there
    return Spectrogram(np.clip(values, 0.0, 1.0), "normalized")


def extract_segment_window(recording, segment, mode: str = "exact",
                           dt: float = 0.120, margin: float = 0.030) -> np.ndarray:
    """Slice the samples a segment's classifier input should see.

    exact        [start, end)
    fixed_center [center - dt, center + dt), zero-padded where the window
                 leaves the recording
    margins      [start - margin, end + margin), zero-padded likewise

    dt and margin are in seconds.
    """
    samples = recording.samples
    rate = recording.sample_rate
    if mode == "exact":
        lo, hi = segment.start, segment.end
    elif mode == "fixed_center":
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        half = int(round(dt * rate))
        center = (segment.start + segment.end) // 2
        lo, hi = center - half, center + half
    elif mode == "margins":
        if margin < 0:
            raise ValueError(f"margin must be nonnegative, got {margin}")
        pad = int(round(margin * rate))
        lo, hi = segment.start - pad, segment.end + pad
    else:
        raise ValueError(f"unknown window mode {mode!r}")
    out = np.zeros(hi - lo, dtype=np.float64)
    src_lo = max(lo, 0)
    src_hi = min(hi, samples.shape[0])
    if src_lo < src_hi:
        out[src_lo - lo:src_hi - lo] = samples[src_lo:src_hi]
    return out


def stack_frames(spect: Spectrogram, duration: float, bands_per_frame: int,
                 columns_per_frame: int) -> Spectrogram:
    """Place the warped image in one of three duration-keyed frames.

    The output stacks three frames vertically. The sample occupies the frame
    for its duration range ([0, 0.075), [0.075, 0.150), [0.150, inf)
    seconds); the other two frames stay zero, so classifiers can key features
    off gross duration without it being a scalar input.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    small = warp(spect, bands_per_frame, columns_per_frame)
    out = np.zeros((3 * bands_per_frame, columns_per_frame))
    idx = 0
    while idx < len(STACK_EDGES) and duration >= STACK_EDGES[idx]:
        idx += 1
    out[idx * bands_per_frame:(idx + 1) * bands_per_frame] = small.values
    return Spectrogram(out, "normalized")


def smooth_stack(spect: Spectrogram) -> Spectrogram:
    """Stack the image with two row-smoothed copies (triple height).

    Copy 2 convolves each row with [1,2,1]/4, copy 3 with [1,2,5,2,1]/11,
    both same-size with edge replication.
    """
    if spect.stage != "normalized":
        raise ValueError(
            f"smooth_stack expects a normalized spectrogram, got {spect.stage!r}")
    parts = [spect.values]
    for kernel in SMOOTH_KERNELS:
        parts.append(convolve1d(spect.values, kernel, axis=1, mode="nearest"))
    return Spectrogram(np.vstack(parts), "normalized")


def mfcc(spect: Spectrogram, n_coeffs: int) -> list[MfccFrame]:
    """Orthonormal DCT-II of each column, truncated to the first n_coeffs.

    Operates on log-compressed values; the normalized stage (an affine remap
    of log) is accepted too since the transform is linear.
    """
    if spect.stage not in ("log", "normalized"):
        raise ValueError(
            f"mfcc expects log or normalized values, got stage {spect.stage!r}")
    if not 1 <= n_coeffs <= spect.band_count:
        raise ValueError(
            f"n_coeffs must be in [1, {spect.band_count}], got {n_coeffs}")
    coeffs = scipy.fft.dct(spect.values, type=2, axis=0, norm="ortho")[:n_coeffs]
    zero = np.zeros(n_coeffs)
    return [MfccFrame(coeffs[:, t].copy(), zero.copy(), zero.copy())
            for t in range(spect.column_count)]


def _delta_matrix(matrix: np.ndarray, half_width: int) -> np.ndarray:
    # delta_t = sum_k k*(c[t+k] - c[t-k]) / (2*sum_k k^2), edges replicated
    t_count = matrix.shape[0]
    out = np.zeros_like(matrix)
    norm = 2.0 * sum(k * k for k in range(1, half_width + 1))
    for k in range(1, half_width + 1):
        ahead = np.minimum(np.arange(t_count) + k, t_count - 1)
        behind = np.maximum(np.arange(t_count) - k, 0)
        out += k * (matrix[ahead] - matrix[behind])
    return out / norm


def deltas(frames: list[MfccFrame], half_width: int = 2) -> list[MfccFrame]:
    """Fill delta and delta-delta fields from the coefficient sequence."""
    if not frames:
        raise ValueError("cannot take deltas of an empty frame sequence")
    if half_width < 1:
        raise ValueError(f"half_width must be >= 1, got {half_width}")
    coeffs = np.stack([f.coefficients for f in frames])   # (T, n)
    d1 = _delta_matrix(coeffs, half_width)
    d2 = _delta_matrix(d1, half_width)
    return [MfccFrame(coeffs[t].copy(), d1[t], d2[t]) for t in range(len(frames))]


def write_text_grid(spect: Spectrogram, path) -> None:
    """Export as plain text, one row of reals per band."""
    with open(path, "w", encoding="ascii") as fh:
        for row in spect.values:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_text_grid(path, stage: str = "normalized") -> Spectrogram:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ValueError(f"{path}: empty spectrogram file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows, widths {sorted(widths)}")
    return Spectrogram(np.array(rows, dtype=np.float64), stage)

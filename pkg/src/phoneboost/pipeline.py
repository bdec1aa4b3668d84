"""Pipeline configuration and feature extraction.

A PipelineConfig fixes everything between a labeled segment and a feature
vector: window mode, spectrogram geometry, normalization reference, feature
family and boosting settings. The Featurizer turns (recording, segment)
pairs into prepared images and then into the per-family representations that
training and classification consume. Two corpus statistics (the log-power
normalization reference and the mean segment duration) are computed at train
time and carried in the config so classification reproduces the exact same
features.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import dsp, haar, hog

MODES = ("warp", "fixed_center", "margins", "stacked", "hog_pooled")
FAMILIES = ("haar", "hog-svm", "mfcc-stump")
BOOSTING = ("gentle", "discrete")

MFCC_STREAMS = ("c", "d", "dd")


@dataclass(frozen=True)
class MfccCoordinate:
    """One cepstral feature: stream (c, d or dd), coefficient, frame column."""

    stream: str
    coeff: int
    frame: int

    def __post_init__(self) -> None:
        if self.stream not in MFCC_STREAMS:
            raise ValueError(f"stream must be one of {MFCC_STREAMS}, "
                             f"got {self.stream!r}")
        if self.coeff < 0 or self.frame < 0:
            raise ValueError("coeff and frame must be nonnegative")


def format_mfcc_coordinate(coord: MfccCoordinate) -> str:
    return f"{coord.stream} {coord.coeff} {coord.frame}"


def parse_mfcc_coordinate(line: str) -> MfccCoordinate:
    fields = line.split()
    if len(fields) != 3:
        raise ValueError(f"expected 'stream coeff frame', got {line!r}")
    return MfccCoordinate(fields[0], int(fields[1]), int(fields[2]))


@dataclass(frozen=True)
class PipelineConfig:
    """Everything between raw samples and classifier features."""

    # spectrogram
    frame_length: int = 128
    increment: int = 64
    mel_bands: int = 14
    f_min: float = 0.0
    f_max: float | None = None          # None means Nyquist
    clip_low: float = -6.0              # log10 units relative to log_ref
    clip_high: float = 0.0
    log_ref: float | None = None        # log10 of corpus max mel power
    avg_duration: float | None = None   # mean training segment length, seconds

    # variable-length handling
    mode: str = "warp"
    target_bands: int = 14
    target_columns: int = 15
    fixed_center_dt: float = 0.120
    margin: float = 0.030
    stack_columns: int = 15
    pool_columns: int = 12
    pool_mode: str = "avg"
    smooth: bool = False

    # features and training
    family: str = "haar"
    boosting: str = "gentle"
    rounds: int = 60
    n_mfcc: int = 14
    delta_half_width: int = 2
    svm_c: float = 1.0
    svm_iterations: int = 800
    seed: int = 0
    train_ova: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.family not in FAMILIES:
            raise ValueError(
                f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.boosting not in BOOSTING:
            raise ValueError(
                f"boosting must be one of {BOOSTING}, got {self.boosting!r}")
        if self.mode == "hog_pooled" and self.family != "hog-svm":
            raise ValueError("hog_pooled mode requires the hog-svm family")
        if self.pool_mode not in ("avg", "max"):
            raise ValueError(f"pool_mode must be avg or max, got {self.pool_mode!r}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if min(self.target_bands, self.target_columns, self.stack_columns,
               self.pool_columns, self.mel_bands) < 1:
            raise ValueError("image geometry settings must be positive")
        if not self.clip_high > self.clip_low:
            raise ValueError(
                f"need clip_high > clip_low, got [{self.clip_low}, "
                f"{self.clip_high}]")
        if self.n_mfcc < 1 or self.n_mfcc > self.mel_bands:
            raise ValueError(
                f"n_mfcc must be in [1, mel_bands={self.mel_bands}], "
                f"got {self.n_mfcc}")

    def has_stats(self) -> bool:
        if self.log_ref is None:
            return False
        return self.mode != "margins" or self.avg_duration is not None

    def margin_columns(self) -> int:
        """Warp width for margins mode, expanded by the added context."""
        if self.avg_duration is None:
            raise ValueError(
                "margins mode needs avg_duration; train-time statistics "
                "were not computed")
        grow = (self.avg_duration + 2.0 * self.margin) / self.avg_duration
        return max(2, int(round(self.target_columns * grow)))

    def geometry(self) -> tuple[int, int]:
        """(bands, columns) of prepared images (the standard geometry for
        pooled mode, where actual images may be wider)."""
        if self.mode == "stacked":
            bands, columns = 3 * self.target_bands, self.stack_columns
        elif self.mode == "hog_pooled":
            bands, columns = self.mel_bands, self.pool_columns
        elif self.mode == "margins":
            bands, columns = self.target_bands, self.margin_columns()
        else:
            bands, columns = self.target_bands, self.target_columns
        if self.smooth:
            bands *= 3
        return bands, columns


# config files are flat key = value text; these are the only recognized keys
_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _parse_value(name: str, text: str):
    kind = _CONFIG_FIELDS[name].type
    if text == "none":
        return None
    if name in ("f_max", "log_ref", "avg_duration"):
        return float(text)
    if kind == "bool":
        if text not in ("true", "false"):
            raise ValueError(f"{name}: expected true or false, got {text!r}")
        return text == "true"
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def parse_config(text: str, **overrides) -> PipelineConfig:
    """Parse 'key = value' lines; '#' starts a comment; unknown keys error."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    values.update(overrides)
    return PipelineConfig(**values)


def read_config(path, **overrides) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def format_config(config: PipelineConfig) -> str:
    lines = []
    for field in dataclasses.fields(PipelineConfig):
        value = getattr(config, field.name)
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{field.name} = {text}")
    return "\n".join(lines) + "\n"


def write_config(config: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(config))


class Featurizer:
    """Turns (recording, segment) pairs into classifier features."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._banks: dict[int, dsp.MelBank] = {}

    def _mel_bank(self, sample_rate: int) -> dsp.MelBank:
        if sample_rate not in self._banks:
            cfg = self.config
            bins = cfg.frame_length // 2 + 1
            self._banks[sample_rate] = dsp.build_mel_bank(
                cfg.mel_bands, bins, sample_rate, cfg.f_min, cfg.f_max)
        return self._banks[sample_rate]

    def _stft(self, window: np.ndarray, sample_rate: int) -> dsp.Spectrogram:
        cfg = self.config
        n = cfg.frame_length
        if window.shape[0] < n:
            # very short phones: center the window in one zero-padded frame
            pad = n - window.shape[0]
            window = np.pad(window, (pad // 2, pad - pad // 2))
        stft_cfg = dsp.StftConfig(n, cfg.increment, sample_rate)
        return dsp.stft_power(window, stft_cfg)

    def _window(self, recording, segment) -> np.ndarray:
        cfg = self.config
        if cfg.mode == "fixed_center":
            return dsp.extract_segment_window(recording, segment,
                                              "fixed_center",
                                              dt=cfg.fixed_center_dt)
        if cfg.mode == "margins":
            return dsp.extract_segment_window(recording, segment, "margins",
                                              margin=cfg.margin)
        return dsp.extract_segment_window(recording, segment, "exact")

    def corpus_stats(self, corpus) -> tuple[float, float]:
        """(log_ref, avg_duration) over exact segment windows of a corpus."""
        if not corpus:
            raise ValueError("cannot compute statistics of an empty corpus")
        max_power = 0.0
        durations = []
        for recording, segment in corpus:
            window = dsp.extract_segment_window(recording, segment, "exact")
            power = self._stft(window, recording.sample_rate)
            mel = dsp.mel_energies(power, self._mel_bank(recording.sample_rate))
            max_power = max(max_power, float(mel.values.max()))
            durations.append(segment.duration(recording.sample_rate))
        log_ref = float(np.log10(max_power + dsp.LOG_EPS))
        return log_ref, float(np.mean(durations))

    def with_stats(self, corpus) -> "Featurizer":
        """A featurizer whose config carries this corpus's statistics."""
        log_ref, avg_duration = self.corpus_stats(corpus)
        config = dataclasses.replace(self.config, log_ref=log_ref,
                                     avg_duration=avg_duration)
        return Featurizer(config)

    def prepare(self, recording, segment) -> dsp.Spectrogram:
        """The normalized, mode-shaped image for one segment."""
        cfg = self.config
        if cfg.log_ref is None:
            raise ValueError(
                "pipeline has no normalization reference; call with_stats on "
                "the training corpus or set log_ref explicitly")
        window = self._window(recording, segment)
        power = self._stft(window, recording.sample_rate)
        bank = self._mel_bank(recording.sample_rate)
        clip = (cfg.log_ref + cfg.clip_low, cfg.log_ref + cfg.clip_high)
        norm = dsp.process_spectrogram(power, bank, clip)
        if cfg.mode == "stacked":
            duration = segment.duration(recording.sample_rate)
            image = dsp.stack_frames(norm, duration, cfg.target_bands,
                                     cfg.stack_columns)
        elif cfg.mode == "hog_pooled":
            if norm.column_count < cfg.pool_columns:
                image = dsp.warp(norm, cfg.mel_bands, cfg.pool_columns)
            else:
                image = norm
        elif cfg.mode == "margins":
            image = dsp.warp(norm, cfg.target_bands, cfg.margin_columns())
        else:
            image = dsp.warp(norm, cfg.target_bands, cfg.target_columns)
        if cfg.smooth:
            image = dsp.smooth_stack(image)
        return image

    def prepare_corpus(self, corpus) -> list[dsp.Spectrogram]:
        return [self.prepare(rec, seg) for rec, seg in corpus]

    # -- per-family descriptor banks ---------------------------------------

    def haar_bank(self) -> haar.FeatureBank:
        bands, columns = self.config.geometry()
        return haar.enumerate_haar(bands, columns)

    def hog_patches(self) -> list[hog.HogPatch]:
        bands, columns = self.config.geometry()
        return hog.enumerate_hog(bands, columns)

    def mfcc_coordinates(self) -> list[MfccCoordinate]:
        _, columns = self.config.geometry()
        if self.config.smooth:
            raise ValueError("mfcc-stump family does not combine with smooth")
        return [MfccCoordinate(stream, coeff, frame)
                for stream in MFCC_STREAMS
                for frame in range(columns)
                for coeff in range(self.config.n_mfcc)]

    def descriptor_bank(self) -> list:
        if self.config.family == "haar":
            return list(self.haar_bank())
        if self.config.family == "hog-svm":
            return self.hog_patches()
        return self.mfcc_coordinates()

    # -- bulk featurization for training ------------------------------------

    def _mfcc_row(self, image: dsp.Spectrogram) -> np.ndarray:
        cfg = self.config
        frames = dsp.deltas(dsp.mfcc(image, cfg.n_mfcc), cfg.delta_half_width)
        coeff = np.stack([f.coefficients for f in frames])   # (T, n)
        d1 = np.stack([f.delta for f in frames])
        d2 = np.stack([f.delta_delta for f in frames])
        return np.concatenate([coeff.ravel(), d1.ravel(), d2.ravel()])

    def feature_matrix(self, prepared: list[dsp.Spectrogram]) -> np.ndarray:
        """(n_samples, n_features) for the haar and mfcc-stump families."""
        cfg = self.config
        if cfg.family == "haar":
            bank = self.haar_bank()
            return np.stack([bank.evaluate(haar.integral(img))
                             for img in prepared])
        if cfg.family == "mfcc-stump":
            return np.stack([self._mfcc_row(img) for img in prepared])
        raise ValueError(
            f"feature_matrix does not apply to family {cfg.family!r}")

    def histogram_tensor(self, prepared: list[dsp.Spectrogram]) -> np.ndarray:
        """(n_samples, n_patches, 9) pooled or direct patch histograms."""
        cfg = self.config
        if cfg.family != "hog-svm":
            raise ValueError(
                f"histogram_tensor does not apply to family {cfg.family!r}")
        patches = self.hog_patches()
        by_shape: dict[tuple[int, int], list[int]] = {}
        for idx, patch in enumerate(patches):
            by_shape.setdefault((patch.height, patch.width), []).append(idx)
        bands, t0 = cfg.geometry()
        out = np.empty((len(prepared), len(patches), hog.N_BINS))
        for si, image in enumerate(prepared):
            t1 = image.column_count
            for (height, width), indices in by_shape.items():
                maps = hog.histogram_maps(image, height, width)
                for idx in indices:
                    patch = patches[idx]
                    if cfg.mode == "hog_pooled":
                        span = hog._pooled_positions(patch.column, width, t0, t1)
                        block = maps[:, patch.band, list(span)]
                        if cfg.pool_mode == "avg":
                            out[si, idx] = block.mean(axis=1)
                        else:
                            out[si, idx] = block.max(axis=1)
                    else:
                        out[si, idx] = maps[:, patch.band, patch.column]
        return out

    # -- classify-time evaluation of a compact descriptor list --------------

    def evaluate_features(self, image: dsp.Spectrogram,
                          descriptors: list) -> np.ndarray:
        cfg = self.config
        values = np.empty(len(descriptors))
        if cfg.family == "haar":
            table = haar.integral(image)
            for i, feature in enumerate(descriptors):
                values[i] = haar.eval_haar(feature, table)
        elif cfg.family == "hog-svm":
            for i, feature in enumerate(descriptors):
                if cfg.mode == "hog_pooled":
                    values[i] = hog.pooled_hog_feature(
                        image, feature, cfg.pool_columns, cfg.pool_mode)
                else:
                    values[i] = hog.eval_hog_feature(image, feature)
        else:
            row = self._mfcc_row(image)
            _, columns = cfg.geometry()
            stride = cfg.n_mfcc * columns
            offsets = {"c": 0, "d": stride, "dd": 2 * stride}
            for i, coord in enumerate(descriptors):
                values[i] = row[offsets[coord.stream]
                                + coord.frame * cfg.n_mfcc + coord.coeff]
        return values

"""Audio, segmentation and phone-set ingestion, plus synthetic corpora.

All real data enters through this module: 16-bit mono PCM recordings,
start/end/label segmentations, and the phone inventory with its scoring
equivalence groups. It also generates labeled synthetic corpora whose
classes are separable by construction, which the rest of the toolkit uses
for self-contained experiments.
"""

from __future__ import annotations

import json
import logging
import wave
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

PCM_SCALE = 32768.0


class FormatError(ValueError):
    """Raised when a file is not structurally what it claims to be."""


class UnsupportedFormatError(ValueError):
    """Raised when a file is well-formed but in a shape we do not handle."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class Recording:
    """Mono audio at a known rate, samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    path: str | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate


@dataclass(frozen=True)
class PhoneSegment:
    """Half-open sample range [start, end) carrying a phone label."""

    start: int
    end: int
    label: str | None = None

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValueError(
                f"need 0 <= start < end, got [{self.start}, {self.end})")

    def duration(self, sample_rate: int) -> float:
        return (self.end - self.start) / sample_rate


class PhoneSet:
    """Ordered phone labels plus disjoint scoring-equivalence groups."""

    def __init__(self, labels: list[str], groups: list[list[str]] | None = None):
        labels = list(labels)
        if not labels:
            raise ValueError("phone set needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError("phone labels must be distinct")
        self.labels = labels
        self.groups = [list(g) for g in (groups or [])]
        self._index = {lab: i for i, lab in enumerate(labels)}
        self._group_of: dict[str, int] = {}
        for gi, group in enumerate(self.groups):
            if len(group) < 2:
                raise ValueError(f"group {group} needs at least two members")
            for lab in group:
                if lab not in self._index:
                    raise ValueError(f"group member {lab!r} is not in the label set")
                if lab in self._group_of:
                    raise ValueError(
                        f"label {lab!r} appears in more than one group")
                self._group_of[lab] = gi

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        if label not in self._index:
            raise ValueError(f"unknown phone label {label!r}")
        return self._index[label]

    def scoring_equivalent(self, a: str, b: str) -> bool:
        """True when a and b should not count as a confusion."""
        ia, ib = self.index(a), self.index(b)
        if ia == ib:
            return True
        ga = self._group_of.get(a)
        return ga is not None and ga == self._group_of.get(b)


def scoring_equivalent(a: str, b: str, phone_set: PhoneSet) -> bool:
    return phone_set.scoring_equivalent(a, b)


def default_phone_set() -> PhoneSet:
    """The stock 48-label inventory with its equivalence groups."""
    pkg = resources.files("phoneboost.data")
    labels = _parse_labels((pkg / "phones48.txt").read_text("ascii"))
    groups = _parse_groups((pkg / "groups48.txt").read_text("ascii"))
    return PhoneSet(labels, groups)


# ---------------------------------------------------------------------------
# file readers and writers
# ---------------------------------------------------------------------------

def read_wav(path) -> Recording:
    """Read a 16-bit mono PCM WAV file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            count = fh.getnframes()
            raw = fh.readframes(count)
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a valid WAV file ({exc})") from exc
    if channels != 1:
        raise UnsupportedFormatError(
            f"{path}: expected mono audio, file has {channels} channels")
    if width != 2:
        raise UnsupportedFormatError(
            f"{path}: expected 16-bit samples, file has {8 * width}-bit")
    ints = np.frombuffer(raw, dtype="<i2")
    return Recording(ints.astype(np.float64) / PCM_SCALE, rate, path=str(path))


def write_wav(recording: Recording, path) -> None:
    """Write 16-bit mono PCM; inverse of read_wav up to int16 rounding."""
    ints = np.clip(np.rint(recording.samples * PCM_SCALE), -32768, 32767)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(recording.sample_rate)
        fh.writeframes(ints.astype("<i2").tobytes())


def read_segmentation(path, phone_set: PhoneSet | None = None,
                      allow_unlabeled: bool = False) -> list[PhoneSegment]:
    """Parse "start end label" lines into segments.

    Labels are validated against phone_set when one is given. With
    allow_unlabeled, two-field lines yield segments with label None (for
    classification of unannotated audio).
    """
    segments = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) == 2 and allow_unlabeled:
                label = None
            elif len(fields) == 3:
                label = fields[2]
            else:
                raise FormatError(
                    f"{path}:{lineno}: expected 'start end label', got {line!r}")
            try:
                start, end = int(fields[0]), int(fields[1])
            except ValueError as exc:
                raise FormatError(
                    f"{path}:{lineno}: non-integer sample index in {line!r}") from exc
            if not 0 <= start < end:
                raise FormatError(
                    f"{path}:{lineno}: need 0 <= start < end, got {start} {end}")
            if label is not None and phone_set is not None and label not in phone_set:
                raise FormatError(
                    f"{path}:{lineno}: unknown phone label {label!r}")
            segments.append(PhoneSegment(start, end, label))
    return segments


def write_segmentation(segments: list[PhoneSegment], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for seg in segments:
            fh.write(f"{seg.start} {seg.end} {seg.label}\n")


def _parse_labels(text: str) -> list[str]:
    return [line.strip() for line in text.splitlines() if line.strip()]


def _parse_groups(text: str) -> list[list[str]]:
    groups = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            groups.append([tok.strip() for tok in line.split(",") if tok.strip()])
    return groups


def read_phone_set(labels_path, groups_path=None) -> PhoneSet:
    """Load a phone set from a labels file and an optional groups file.

    Labels: one per line. Groups: one group per line, members comma-joined.
    """
    with open(labels_path, "r", encoding="ascii") as fh:
        labels = _parse_labels(fh.read())
    groups: list[list[str]] = []
    if groups_path is not None:
        with open(groups_path, "r", encoding="ascii") as fh:
            groups = _parse_groups(fh.read())
    return PhoneSet(labels, groups)


def write_phone_set(phone_set: PhoneSet, labels_path, groups_path) -> None:
    with open(labels_path, "w", encoding="ascii") as fh:
        fh.write("".join(lab + "\n" for lab in phone_set.labels))
    with open(groups_path, "w", encoding="ascii") as fh:
        fh.write("".join(",".join(g) + "\n" for g in phone_set.groups))


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

@dataclass
class ClassRecipe:
    """How to synthesize one phone class.

    formants: (center_hz, drift_hz_per_second) sinusoid tracks
    noise_band: optional (low_hz, high_hz) band-limited noise over the segment
    plosive_position: optional transient location as a fraction of duration
    duration_range: (low_s, high_s) uniform draw per sample
    jitter_hz: per-sample uniform shift applied to each formant center
    """

    formants: list[tuple[float, float]] = field(default_factory=list)
    noise_band: tuple[float, float] | None = None
    noise_level: float = 0.25
    plosive_position: float | None = None
    plosive_level: float = 0.6
    duration_range: tuple[float, float] = (0.06, 0.15)
    jitter_hz: float = 0.0
    amplitude: float = 0.3


@dataclass
class SynthSpec:
    """A full synthetic-corpus description: class recipes plus global knobs."""

    classes: dict[str, ClassRecipe]
    sample_rate: int = 16000
    seed: int = 0
    context: float = 0.15       # seconds of faint noise on each side of a phone

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValueError("synthesis spec needs at least one class")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        nyquist = self.sample_rate / 2.0
        for label, recipe in self.classes.items():
            lo, hi = recipe.duration_range
            if not 0 < lo <= hi:
                raise ValueError(
                    f"class {label!r}: bad duration range ({lo}, {hi})")
            for center, drift in recipe.formants:
                for endpoint in (center, center + drift * hi):
                    if not 0 < endpoint + recipe.jitter_hz < nyquist or \
                            not 0 < endpoint - recipe.jitter_hz < nyquist:
                        raise ValueError(
                            f"class {label!r}: formant track {center}+-"
                            f"{recipe.jitter_hz} drifting {drift}/s leaves "
                            f"(0, {nyquist})")
            if recipe.noise_band is not None:
                blo, bhi = recipe.noise_band
                if not 0 <= blo < bhi <= nyquist:
                    raise ValueError(
                        f"class {label!r}: noise band ({blo}, {bhi}) must sit "
                        f"inside [0, {nyquist}]")
            if recipe.plosive_position is not None and \
                    not 0.0 <= recipe.plosive_position <= 1.0:
                raise ValueError(
                    f"class {label!r}: plosive position must be in [0, 1]")

    def phone_set(self) -> PhoneSet:
        return PhoneSet(list(self.classes.keys()))


def _band_noise(n: int, rate: int, band: tuple[float, float],
                rng: np.random.Generator) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    spectrum[(freqs < band[0]) | (freqs > band[1])] = 0.0
    noise = np.fft.irfft(spectrum, n=n)
    peak = np.max(np.abs(noise))
    return noise / peak if peak > 0 else noise


def _synth_phone(recipe: ClassRecipe, rate: int,
                 rng: np.random.Generator) -> np.ndarray:
    lo, hi = recipe.duration_range
    duration = rng.uniform(lo, hi)
    n = max(int(round(duration * rate)), 8)
    t = np.arange(n) / rate
    signal = np.zeros(n)
    for center, drift in recipe.formants:
        f0 = center + rng.uniform(-recipe.jitter_hz, recipe.jitter_hz)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += np.sin(2.0 * np.pi * (f0 * t + 0.5 * drift * t * t) + phase)
    if recipe.formants:
        signal *= recipe.amplitude / len(recipe.formants)
    if recipe.noise_band is not None:
        signal += recipe.noise_level * _band_noise(n, rate, recipe.noise_band, rng)
    if recipe.plosive_position is not None:
        click_len = min(n, max(int(0.006 * rate), 4))
        pos = int(round(recipe.plosive_position * (n - click_len)))
        click = rng.standard_normal(click_len)
        click *= np.exp(-np.arange(click_len) / (0.002 * rate))
        signal[pos:pos + click_len] += recipe.plosive_level * click
    # short raised-cosine ramps kill onset/offset clicks
    ramp = min(n // 4, max(int(0.005 * rate), 2))
    window = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
    signal[:ramp] *= window
    signal[-ramp:] *= window[::-1]
    return np.clip(signal, -0.999, 0.999)


def generate_corpus(spec: SynthSpec,
                    n_per_class: int) -> list[tuple[Recording, PhoneSegment]]:
    """Synthesize n_per_class single-phone recordings per class.

    Deterministic: the stream for sample i of class k is seeded by
    (spec.seed, k, i), so the output is a pure function of (spec,
    n_per_class) and does not depend on generation order.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rate = spec.sample_rate
    n_context = int(round(spec.context * rate))
    corpus = []
    for ci, (label, recipe) in enumerate(spec.classes.items()):
        for si in range(n_per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence((spec.seed, ci, si)))
            phone = _synth_phone(recipe, rate, rng)
            context_l = 1e-3 * rng.standard_normal(n_context)
            context_r = 1e-3 * rng.standard_normal(n_context)
            samples = np.concatenate([context_l, phone, context_r])
            segment = PhoneSegment(n_context, n_context + phone.shape[0], label)
            corpus.append((Recording(samples, rate), segment))
    return corpus


def default_synth_spec(seed: int = 0) -> SynthSpec:
    """Four well-separated classes: two vowels, a fricative, a glide."""
    return SynthSpec(
        classes={
            "aa": ClassRecipe(formants=[(650.0, 0.0), (1100.0, 0.0)],
                              duration_range=(0.08, 0.16), jitter_hz=15.0),
            "iy": ClassRecipe(formants=[(320.0, 0.0), (2500.0, 0.0)],
                              duration_range=(0.08, 0.16), jitter_hz=15.0),
            "sh": ClassRecipe(noise_band=(2500.0, 6000.0), noise_level=0.3,
                              duration_range=(0.09, 0.18)),
            "ww": ClassRecipe(formants=[(420.0, 0.0), (900.0, 2600.0)],
                              duration_range=(0.08, 0.16), jitter_hz=15.0),
        },
        seed=seed,
    )


# ---------------------------------------------------------------------------
# synthesis specs and corpora on disk
# ---------------------------------------------------------------------------

def read_synth_spec(path) -> SynthSpec:
    """Load a synthesis spec from JSON."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    try:
        classes = {}
        for label, entry in raw["classes"].items():
            classes[label] = ClassRecipe(
                formants=[(float(c), float(d))
                          for c, d in entry.get("formants", [])],
                noise_band=(tuple(float(v) for v in entry["noise_band"])
                            if entry.get("noise_band") else None),
                noise_level=float(entry.get("noise_level", 0.25)),
                plosive_position=(float(entry["plosive_position"])
                                  if entry.get("plosive_position") is not None
                                  else None),
                plosive_level=float(entry.get("plosive_level", 0.6)),
                duration_range=tuple(float(v) for v in
                                     entry.get("duration_range", (0.06, 0.15))),
                jitter_hz=float(entry.get("jitter_hz", 0.0)),
                amplitude=float(entry.get("amplitude", 0.3)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed synthesis spec ({exc})") from exc
    return SynthSpec(
        classes=classes,
        sample_rate=int(raw.get("sample_rate", 16000)),
        seed=int(raw.get("seed", 0)),
        context=float(raw.get("context", 0.15)),
    )


def write_synth_spec(spec: SynthSpec, path) -> None:
    raw = {
        "sample_rate": spec.sample_rate,
        "seed": spec.seed,
        "context": spec.context,
        "classes": {
            label: {
                "formants": [list(f) for f in recipe.formants],
                "noise_band": (list(recipe.noise_band)
                               if recipe.noise_band else None),
                "noise_level": recipe.noise_level,
                "plosive_position": recipe.plosive_position,
                "plosive_level": recipe.plosive_level,
                "duration_range": list(recipe.duration_range),
                "jitter_hz": recipe.jitter_hz,
                "amplitude": recipe.amplitude,
            }
            for label, recipe in spec.classes.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_corpus(corpus: list[tuple[Recording, PhoneSegment]],
                 phone_set: PhoneSet, out_dir) -> None:
    """Lay a corpus out on disk: numbered wav/phn pairs plus the phone set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_phone_set(phone_set, out / "phones.txt", out / "groups.txt")
    for i, (recording, segment) in enumerate(corpus):
        stem = f"sample_{i:05d}"
        write_wav(recording, out / f"{stem}.wav")
        write_segmentation([segment], out / f"{stem}.phn")
    log.info("wrote %d clips to %s", len(corpus), out)


def load_corpus(corpus_dir) -> tuple[list[tuple[Recording, PhoneSegment]], PhoneSet]:
    """Read back a corpus directory: every wav with its phn, plus phones.txt."""
    root = Path(corpus_dir)
    labels_path = root / "phones.txt"
    if not labels_path.exists():
        raise FormatError(f"{root}: missing phones.txt")
    groups_path = root / "groups.txt"
    phone_set = read_phone_set(labels_path,
                               groups_path if groups_path.exists() else None)
    corpus = []
    for wav_path in sorted(root.glob("*.wav")):
        phn_path = wav_path.with_suffix(".phn")
        if not phn_path.exists():
            raise FormatError(f"{wav_path}: no matching segmentation file")
        recording = read_wav(wav_path)
        for segment in read_segmentation(phn_path, phone_set):
            if segment.end > recording.samples.shape[0]:
                raise FormatError(
                    f"{phn_path}: segment [{segment.start}, {segment.end}) "
                    f"exceeds recording length {recording.samples.shape[0]}")
            corpus.append((recording, segment))
    if not corpus:
        raise FormatError(f"{root}: no wav/phn pairs found")
    return corpus, phone_set

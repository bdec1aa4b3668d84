"""Pairwise classifier composition and N-way phone prediction.

A binary strong classifier is trained for every pair of phones; N-way
decisions come from voting schemes layered on top: all-vs-all (every
classifier votes, most votes wins), hierarchical elimination (repeatedly
drop the phone with the fewest votes among survivors, then run all-vs-all
on the remaining shortlist), and one-vs-all (argmax of per-phone scores).

The voting logic is kept separate from feature extraction: the helpers at
the top operate on a label list plus a decide(a, b) callable, so they can
be exercised directly on synthetic outcome tables. Classifier evaluation
enters only through the MulticlassModel wrappers below.

Pairwise label convention: for a pair (a, b) in phone-set order, a maps to
-1 and b to +1; a zero boosting score counts as -1 (so ties go to a).
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import boost, haar, hog, pipeline
from .ingest import PhoneSet

MODEL_TAG = "phoneboost-model"
PAIR_TAG = "phoneboost-pair"
OVA_TAG = "phoneboost-ova"
FORMAT_VERSION = 1

MANIFEST_NAME = "manifest.txt"


# ---------------------------------------------------------------------------
# voting


@dataclass
class VoteTally:
    """Per-phone vote counts from one round of pairwise voting."""

    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def vote_all_vs_all(labels, decide: Callable[[str, str], str]):
    """Consult every pair once; most votes wins, ties to the first label.

    decide(a, b) must return either a or b.
    """
    labels = list(labels)
    counts = {label: 0 for label in labels}
    if len(counts) != len(labels):
        raise ValueError("duplicate labels in vote")
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            winner = decide(a, b)
            if winner not in (a, b):
                raise ValueError(
                    f"decide({a!r}, {b!r}) returned {winner!r}, which is "
                    f"neither input")
            counts[winner] += 1
    best = labels[0]
    for label in labels[1:]:
        if counts[label] > counts[best]:
            best = label
    return best, VoteTally(counts)


def vote_hierarchical(labels, decide: Callable[[str, str], str],
                      n1: int) -> str:
    """Eliminate the weakest phone until n1 remain, then vote among those.

    Each iteration re-tallies votes among the survivors only and removes
    the single phone with the fewest votes (ties: the last such phone in
    label order). The shortlist of n1 is decided by plain all-vs-all.
    """
    labels = list(labels)
    if not 2 <= n1 <= len(labels):
        raise ValueError(
            f"survivor count must be in [2, {len(labels)}], got {n1}")
    survivors = labels
    while len(survivors) > n1:
        _, tally = vote_all_vs_all(survivors, decide)
        loser = survivors[0]
        for label in survivors[1:]:
            if tally.counts[label] <= tally.counts[loser]:
                loser = label
        survivors = [label for label in survivors if label != loser]
    winner, _ = vote_all_vs_all(survivors, decide)
    return winner


def vote_one_vs_all(labels, scores: dict[str, float]) -> str:
    """Argmax of per-phone scores; ties go to the first label in order."""
    labels = list(labels)
    if not labels:
        raise ValueError("no labels to vote over")
    for label in labels:
        if label not in scores:
            raise ValueError(f"no score for phone {label!r}")
    best = labels[0]
    for label in labels[1:]:
        if scores[label] > scores[best]:
            best = label
    return best


# ---------------------------------------------------------------------------
# pairwise training


@dataclass
class PairClassifier:
    """A trained pairwise (or phone-vs-rest) classifier.

    The strong classifier's stump indices refer to positions in the compact
    `features` list, not the full enumeration bank it was selected from.
    """

    classifier: boost.StrongClassifier
    features: list


@dataclass
class TrainingFeatures:
    """A fully featurized corpus, sliceable by phone pair.

    Feature extraction dominates training time, so it happens once for the
    whole corpus; per-pair training then just slices rows.
    """

    featurizer: pipeline.Featurizer
    rows: dict[str, np.ndarray]
    matrix: np.ndarray | None = None        # (n, F) for haar / mfcc-stump
    histograms: np.ndarray | None = None    # (n, P, 9) for hog-svm
    bank: list = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        source = self.matrix if self.matrix is not None else self.histograms
        return source.shape[0]


def featurize_corpus(featurizer: pipeline.Featurizer,
                     corpus) -> TrainingFeatures:
    if not corpus:
        raise ValueError("cannot featurize an empty corpus")
    rows: dict[str, list[int]] = {}
    for index, (_, segment) in enumerate(corpus):
        if segment.label is None:
            raise ValueError(f"corpus sample {index} has no phone label")
        rows.setdefault(segment.label, []).append(index)
    prepared = featurizer.prepare_corpus(corpus)
    row_arrays = {label: np.asarray(idx) for label, idx in rows.items()}
    if featurizer.config.family == "hog-svm":
        return TrainingFeatures(featurizer, row_arrays,
                                histograms=featurizer.histogram_tensor(prepared),
                                bank=featurizer.hog_patches())
    return TrainingFeatures(featurizer, row_arrays,
                            matrix=featurizer.feature_matrix(prepared),
                            bank=featurizer.descriptor_bank())


def _compact(classifier: boost.StrongClassifier,
             descriptor_of) -> PairClassifier:
    """Remap stump indices from bank space into a minimal descriptor list."""
    selected = sorted({stump.feature_index for stump, _ in classifier.rounds})
    remap = {bank_index: i for i, bank_index in enumerate(selected)}
    rounds = [(dataclasses.replace(stump,
                                   feature_index=remap[stump.feature_index]),
               vote)
              for stump, vote in classifier.rounds]
    compacted = boost.StrongClassifier(classifier.mode, rounds,
                                       labels=classifier.labels,
                                       terminated_early=classifier.terminated_early)
    return PairClassifier(compacted, [descriptor_of(j) for j in selected])


def fit_binary_raw(table: TrainingFeatures, indices: np.ndarray,
                   targets: np.ndarray, labels=None):
    """Train one binary classifier in bank index space.

    Returns (classifier, values, descriptor_of); values(rows) maps corpus
    row indices to the feature matrix the classifier's stump indices refer
    to. For hog-svm the patch SVMs are fit on `indices` only and then held
    fixed, so other rows (a test split, say) are scored without leakage.
    """
    config = table.featurizer.config
    train = (boost.train_gentle if config.boosting == "gentle"
             else boost.train_discrete)
    if config.family == "hog-svm":
        weights, biases = hog._svm_fit_batch(table.histograms[indices],
                                             targets, config.svm_c,
                                             config.svm_iterations)

        def values(rows) -> np.ndarray:
            return np.einsum("npd,pd->np", table.histograms[rows],
                             weights) + biases

        def descriptor_of(j: int) -> hog.HogSvmFeature:
            return hog.HogSvmFeature(table.bank[j], weights[j],
                                     float(biases[j]))
    else:
        def values(rows) -> np.ndarray:
            return table.matrix[rows]

        def descriptor_of(j: int):
            return table.bank[j]

    data = boost.SampleMatrix(values(indices), targets)
    classifier = train(data, config.rounds, labels=labels)
    return classifier, values, descriptor_of


def _train_binary(table: TrainingFeatures, indices: np.ndarray,
                  targets: np.ndarray, labels) -> PairClassifier:
    classifier, _, descriptor_of = fit_binary_raw(table, indices, targets,
                                                  labels)
    return _compact(classifier, descriptor_of)


def train_pair_from_features(table: TrainingFeatures,
                             pair: tuple[str, str]) -> PairClassifier:
    a, b = pair
    for phone in pair:
        if phone not in table.rows or len(table.rows[phone]) == 0:
            raise ValueError(f"corpus has no samples of phone {phone!r}")
    idx = np.concatenate([table.rows[a], table.rows[b]])
    targets = np.concatenate([-np.ones(len(table.rows[a])),
                              np.ones(len(table.rows[b]))])
    return _train_binary(table, idx, targets, (a, b))


def train_ova_from_features(table: TrainingFeatures,
                            phone: str) -> PairClassifier:
    if phone not in table.rows or len(table.rows[phone]) == 0:
        raise ValueError(f"corpus has no samples of phone {phone!r}")
    idx = np.arange(table.sample_count)
    targets = -np.ones(table.sample_count)
    targets[table.rows[phone]] = 1.0
    return _train_binary(table, idx, targets, ("rest", phone))


def train_pairwise(corpus, pair: tuple[str, str],
                   config: pipeline.PipelineConfig) -> PairClassifier:
    """Train one pairwise classifier: pair[0] maps to -1, pair[1] to +1."""
    a, b = pair
    if a == b:
        raise ValueError(f"pair must name two distinct phones, got {pair}")
    subset = [(rec, seg) for rec, seg in corpus if seg.label in (a, b)]
    present = {seg.label for _, seg in subset}
    for phone in pair:
        if phone not in present:
            raise ValueError(f"corpus has no samples of phone {phone!r}")
    featurizer = pipeline.Featurizer(config)
    if not config.has_stats():
        featurizer = featurizer.with_stats(subset)
    return train_pair_from_features(featurize_corpus(featurizer, subset),
                                    pair)


# ---------------------------------------------------------------------------
# the N-way model


@dataclass
class MulticlassModel:
    phone_set: PhoneSet
    config: pipeline.PipelineConfig
    pairwise: dict[tuple[str, str], PairClassifier]
    ova: dict[str, PairClassifier] = field(default_factory=dict)

    def pairs(self) -> list[tuple[str, str]]:
        labels = self.phone_set.labels
        return [(labels[i], labels[j])
                for i in range(len(labels))
                for j in range(i + 1, len(labels))]

    def validate_complete(self) -> None:
        for pair in self.pairs():
            if pair not in self.pairwise:
                raise ValueError(f"model has no classifier for pair {pair}")

    def featurizer(self) -> pipeline.Featurizer:
        return pipeline.Featurizer(self.config)


def train_model(corpus, phone_set: PhoneSet,
                config: pipeline.PipelineConfig, threads: int = 1,
                progress=None) -> MulticlassModel:
    """Train all N(N-1)/2 pairwise classifiers (plus per-phone one-vs-rest
    classifiers when config.train_ova is set).

    progress, if given, is called as progress(kind, name, classifier) after
    each classifier finishes, in deterministic label order regardless of
    threads.
    """
    featurizer = pipeline.Featurizer(config)
    if not config.has_stats():
        featurizer = featurizer.with_stats(corpus)
    table = featurize_corpus(featurizer, corpus)
    for phone in phone_set.labels:
        if phone not in table.rows:
            raise ValueError(f"corpus has no samples of phone {phone!r}")

    model = MulticlassModel(phone_set, featurizer.config, {})
    pairs = model.pairs()
    jobs: list[tuple[str, object]] = [("pair", pair) for pair in pairs]
    if config.train_ova:
        jobs += [("ova", phone) for phone in phone_set.labels]

    def run(job):
        kind, name = job
        if kind == "pair":
            return train_pair_from_features(table, name)
        return train_ova_from_features(table, name)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    for (kind, name), trained in zip(jobs, results):
        if kind == "pair":
            model.pairwise[name] = trained
        else:
            model.ova[name] = trained
        if progress is not None:
            progress(kind, name, trained)
    return model


def _decider(model: MulticlassModel, image,
             featurizer: pipeline.Featurizer | None):
    """decide(a, b) over the model's pairwise classifiers, memoized because
    hierarchical voting revisits pairs across iterations."""
    fz = featurizer if featurizer is not None else model.featurizer()
    cache: dict[tuple[str, str], str] = {}

    def decide(a: str, b: str) -> str:
        key = (a, b)
        if key not in cache:
            entry = model.pairwise.get(key)
            if entry is None:
                raise ValueError(f"model has no classifier for pair {key}")
            values = fz.evaluate_features(image, entry.features)
            raw = boost.score(entry.classifier, values)
            cache[key] = b if raw > 0 else a
        return cache[key]

    return decide


def classify_all_vs_all(model: MulticlassModel, image,
                        featurizer: pipeline.Featurizer | None = None):
    """(winning phone, VoteTally) from all N(N-1)/2 classifiers."""
    model.validate_complete()
    decide = _decider(model, image, featurizer)
    return vote_all_vs_all(model.phone_set.labels, decide)


def classify_hierarchical(model: MulticlassModel, image, n1: int,
                          featurizer: pipeline.Featurizer | None = None) -> str:
    model.validate_complete()
    decide = _decider(model, image, featurizer)
    return vote_hierarchical(model.phone_set.labels, decide, n1)


def classify_one_vs_all(model: MulticlassModel, image,
                        featurizer: pipeline.Featurizer | None = None) -> str:
    fz = featurizer if featurizer is not None else model.featurizer()
    scores = {}
    for phone in model.phone_set.labels:
        entry = model.ova.get(phone)
        if entry is None:
            raise ValueError(
                f"model has no one-vs-rest classifier for phone {phone!r}")
        values = fz.evaluate_features(image, entry.features)
        scores[phone] = boost.score(entry.classifier, values)
    return vote_one_vs_all(model.phone_set.labels, scores)


# ---------------------------------------------------------------------------
# persistence: a directory with a manifest plus one file per classifier


def _pair_filename(pair: tuple[str, str]) -> str:
    return f"{pair[0]}__{pair[1]}.clf"


def _ova_filename(phone: str) -> str:
    return f"ova_{phone}.clf"


def _format_descriptor(family: str, descriptor) -> str:
    if family == "haar":
        return haar.format_feature(descriptor)
    if family == "hog-svm":
        return hog.format_feature(descriptor)
    return pipeline.format_mfcc_coordinate(descriptor)


def _parse_descriptor(family: str, line: str):
    if family == "haar":
        return haar.parse_feature(line)
    if family == "hog-svm":
        return hog.parse_feature(line)
    return pipeline.parse_mfcc_coordinate(line)


def _classifier_lines(tag: str, head: str, family: str,
                      entry: PairClassifier) -> list[str]:
    lines = [f"{tag} {FORMAT_VERSION}", head, f"family {family}",
             f"features {len(entry.features)}"]
    lines += [_format_descriptor(family, d) for d in entry.features]
    lines += boost.format_classifier(entry.classifier)
    return lines


def _parse_classifier_file(lines: list[str], tag: str, family: str,
                           source: str) -> tuple[str, PairClassifier]:
    if len(lines) < 4:
        raise ValueError(f"{source}: truncated classifier file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != tag:
        raise ValueError(f"{source}: expected a {tag!r} header, "
                         f"got {lines[0]!r}")
    if int(head[1]) != FORMAT_VERSION:
        raise ValueError(f"{source}: unsupported format version {head[1]}")
    subject = lines[1]
    fam_fields = lines[2].split()
    if len(fam_fields) != 2 or fam_fields[0] != "family":
        raise ValueError(f"{source}: expected a family line, got {lines[2]!r}")
    if fam_fields[1] != family:
        raise ValueError(
            f"{source}: classifier family {fam_fields[1]!r} does not match "
            f"the model configuration ({family!r})")
    count_fields = lines[3].split()
    if len(count_fields) != 2 or count_fields[0] != "features":
        raise ValueError(f"{source}: expected a feature count line, "
                         f"got {lines[3]!r}")
    n_features = int(count_fields[1])
    if len(lines) < 4 + n_features + 1:
        raise ValueError(f"{source}: truncated feature table")
    descriptors = [_parse_descriptor(family, line)
                   for line in lines[4:4 + n_features]]
    classifier = boost.parse_classifier(lines[4 + n_features:])
    for stump, _ in classifier.rounds:
        if stump.feature_index >= n_features:
            raise ValueError(
                f"{source}: stump references feature "
                f"{stump.feature_index} but only {n_features} are listed")
    return subject, PairClassifier(classifier, descriptors)


def save_model(model: MulticlassModel, path) -> None:
    """Write the model as a directory: manifest plus one .clf per classifier."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = [f"{MODEL_TAG} {FORMAT_VERSION}",
             "labels " + " ".join(model.phone_set.labels)]
    lines += ["group " + ",".join(group) for group in model.phone_set.groups]
    lines.append("")
    lines.append(pipeline.format_config(model.config).rstrip("\n"))
    (root / MANIFEST_NAME).write_text("\n".join(lines) + "\n",
                                      encoding="utf-8")
    family = model.config.family
    for pair, entry in sorted(model.pairwise.items()):
        text = _classifier_lines(PAIR_TAG, f"pair {pair[0]} {pair[1]}",
                                 family, entry)
        (root / _pair_filename(pair)).write_text("\n".join(text) + "\n",
                                                 encoding="utf-8")
    for phone, entry in sorted(model.ova.items()):
        text = _classifier_lines(OVA_TAG, f"phone {phone}", family, entry)
        (root / _ova_filename(phone)).write_text("\n".join(text) + "\n",
                                                 encoding="utf-8")


def load_model(path) -> MulticlassModel:
    root = Path(path)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise ValueError(f"no model manifest at {manifest}")
    raw = manifest.read_text(encoding="utf-8").splitlines()
    if not raw or raw[0].split() != [MODEL_TAG, str(FORMAT_VERSION)]:
        raise ValueError(f"{manifest}: not a version-{FORMAT_VERSION} "
                         f"model manifest")
    labels: list[str] = []
    groups: list[list[str]] = []
    config_lines: list[str] = []
    for line in raw[1:]:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("labels "):
            labels = stripped.split()[1:]
        elif stripped.startswith("group "):
            groups.append(stripped[len("group "):].split(","))
        else:
            config_lines.append(stripped)
    if not labels:
        raise ValueError(f"{manifest}: no phone labels")
    phone_set = PhoneSet(labels, groups)
    config = pipeline.parse_config("\n".join(config_lines))

    model = MulticlassModel(phone_set, config, {})
    for pair in model.pairs():
        clf_path = root / _pair_filename(pair)
        if not clf_path.is_file():
            raise ValueError(
                f"model is missing the classifier file for pair "
                f"({pair[0]}, {pair[1]}): {clf_path.name}")
        lines = clf_path.read_text(encoding="utf-8").splitlines()
        subject, entry = _parse_classifier_file(lines, PAIR_TAG,
                                                config.family, clf_path.name)
        if subject.split() != ["pair", pair[0], pair[1]]:
            raise ValueError(
                f"{clf_path.name}: file is labeled {subject!r} but the "
                f"filename names pair {pair}")
        model.pairwise[pair] = entry
    for clf_path in sorted(root.glob("ova_*.clf")):
        lines = clf_path.read_text(encoding="utf-8").splitlines()
        subject, entry = _parse_classifier_file(lines, OVA_TAG,
                                                config.family, clf_path.name)
        fields = subject.split()
        if len(fields) != 2 or fields[0] != "phone":
            raise ValueError(f"{clf_path.name}: expected a phone line, "
                             f"got {subject!r}")
        if fields[1] not in phone_set:
            raise ValueError(f"{clf_path.name}: phone {fields[1]!r} is not "
                             f"in the model's phone set")
        model.ova[fields[1]] = entry
    return model

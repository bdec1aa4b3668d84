"""Command-line front end.

Four subcommands: `synth` writes a synthetic labeled corpus, `train` fits
a multiclass model from a corpus and a config file, `classify` labels the
segments of one recording, and `eval` runs the scoring and diagnostic
reports against a corpus. Every command is deterministic given its inputs
and the configured seed; PHONEBOOST_THREADS caps training parallelism
without changing any output.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import evaluate, ingest, multiclass, pipeline, plots

DEFAULT_MARGINS = "0.03,0.04,0.06,0.08"
DEFAULT_SIZES = "10,20,50"


def _threads() -> int:
    raw = os.environ.get("PHONEBOOST_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(
            f"PHONEBOOST_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _parse_voting(text: str) -> tuple[str, int | None]:
    if text == "ava":
        return "ava", None
    if text == "ova":
        return "ova", None
    if text.startswith("hier:"):
        try:
            return "hier", int(text[len("hier:"):])
        except ValueError:
            pass
    raise ValueError(f"--voting must be ava, ova or hier:N, got {text!r}")


def _parse_pair(text: str | None) -> tuple[str, str]:
    if not text:
        raise ValueError("this report needs --pair a,b")
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"--pair must name two phones like aa,iy, "
                         f"got {text!r}")
    return parts[0], parts[1]


def _predict(model: multiclass.MulticlassModel, featurizer, image,
             voting: tuple[str, int | None]) -> str:
    kind, n1 = voting
    if kind == "ava":
        return multiclass.classify_all_vs_all(model, image, featurizer)[0]
    if kind == "hier":
        return multiclass.classify_hierarchical(model, image, n1, featurizer)
    return multiclass.classify_one_vs_all(model, image, featurizer)


def cmd_synth(args) -> int:
    if args.spec:
        spec = ingest.read_synth_spec(args.spec)
    else:
        spec = ingest.default_synth_spec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    corpus = ingest.generate_corpus(spec, args.n_per_class)
    ingest.write_corpus(corpus, spec.phone_set(), args.out)
    print(f"wrote {len(corpus)} labeled clips "
          f"({len(spec.classes)} classes) to {args.out}")
    return 0


def cmd_train(args) -> int:
    corpus, phone_set = ingest.load_corpus(args.corpus)
    if args.config:
        config = pipeline.read_config(args.config)
    else:
        config = pipeline.PipelineConfig()

    def progress(kind, name, trained) -> None:
        tag = (f"{name[0]} vs {name[1]}" if kind == "pair"
               else f"{name} vs rest")
        classifier = trained.classifier
        note = " (terminated early)" if classifier.terminated_early else ""
        print(f"trained {tag}: {len(classifier)} rounds, "
              f"{len(trained.features)} features{note}")

    model = multiclass.train_model(corpus, phone_set, config,
                                   threads=_threads(), progress=progress)
    multiclass.save_model(model, args.out)
    print(f"model written to {args.out}")
    return 0


def cmd_classify(args) -> int:
    model = multiclass.load_model(args.model)
    voting = _parse_voting(args.voting)
    recording = ingest.read_wav(args.audio)
    segments = ingest.read_segmentation(args.segments, model.phone_set,
                                        allow_unlabeled=True)
    featurizer = model.featurizer()
    for segment in segments:
        image = featurizer.prepare(recording, segment)
        predicted = _predict(model, featurizer, image, voting)
        if segment.label is not None:
            print(f"{segment.start} {segment.end} {segment.label} {predicted}")
        else:
            print(f"{segment.start} {segment.end} {predicted}")
    return 0


def _corpus_predictions(model: multiclass.MulticlassModel, corpus,
                        voting) -> list[tuple[str, str]]:
    featurizer = model.featurizer()
    preds = []
    for recording, segment in corpus:
        image = featurizer.prepare(recording, segment)
        preds.append((segment.label,
                      _predict(model, featurizer, image, voting)))
    return preds


def cmd_eval(args) -> int:
    model = multiclass.load_model(args.model)
    corpus, _ = ingest.load_corpus(args.corpus)
    out_dir = Path(args.out)
    written: list[Path] = []

    if args.report == "accuracy":
        preds = _corpus_predictions(model, corpus, _parse_voting(args.voting))
        report = evaluate.ExperimentReport("accuracy", scalars={
            "scored_accuracy": evaluate.accuracy(preds, model.phone_set),
            "raw_accuracy": evaluate.raw_accuracy(preds, model.phone_set),
        })
        written += evaluate.write_report(report, out_dir)
        if args.figures:
            written.append(plots.render_report(report, out_dir / "accuracy.png"))
    elif args.report == "confusion":
        preds = _corpus_predictions(model, corpus, _parse_voting(args.voting))
        matrix = evaluate.confusion(preds, model.phone_set)
        written += evaluate.write_confusion(matrix, out_dir)
        if args.figures:
            written.append(plots.render_confusion(matrix,
                                                  out_dir / "confusion.png"))
    else:
        pair = _parse_pair(args.pair)
        if args.report == "rounds":
            classifier, train, test = evaluate.fit_pair_split(corpus, pair,
                                                              model.config)
            report = evaluate.rounds_curve(classifier, train, test)
        elif args.report == "learning":
            sizes = [int(s) for s in args.sizes.split(",")]
            report = evaluate.learning_curve(corpus, pair, model.config,
                                             sizes, args.trials)
        else:
            margins = [float(m) for m in args.margins.split(",")]
            report = evaluate.margin_sweep(corpus, pair, model.config,
                                           margins)
        written += evaluate.write_report(report, out_dir)
        if args.figures:
            written.append(plots.render_report(report,
                                               out_dir / f"{report.name}.png"))

    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phoneboost",
        description="Phone classification with boosted spectro-temporal "
                    "patch features.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", help="generate a synthetic labeled phone corpus")
    p_synth.add_argument("--spec", help="JSON synthesis spec "
                                        "(default: built-in 4-class spec)")
    p_synth.add_argument("--out", required=True, help="output corpus directory")
    p_synth.add_argument("--n-per-class", type=int, required=True,
                         help="clips to generate per class")
    p_synth.add_argument("--seed", type=int, help="override the spec's seed")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train a multiclass model")
    p_train.add_argument("--corpus", required=True, help="corpus directory")
    p_train.add_argument("--config",
                         help="pipeline config file (default: built-in "
                              "defaults: 14x15 warp, haar, gentle)")
    p_train.add_argument("--out", required=True, help="model directory to write")
    p_train.set_defaults(func=cmd_train)

    p_classify = sub.add_parser("classify",
                                help="label the segments of one recording")
    p_classify.add_argument("--model", required=True, help="model directory")
    p_classify.add_argument("--audio", required=True, help="wav file")
    p_classify.add_argument("--segments", required=True,
                            help="segmentation file (start end [label])")
    p_classify.add_argument("--voting", default="ava",
                            help="ava, ova, or hier:N (default ava)")
    p_classify.set_defaults(func=cmd_classify)

    p_eval = sub.add_parser("eval", help="score a model / run a diagnostic "
                                         "report against a corpus")
    p_eval.add_argument("--model", required=True, help="model directory")
    p_eval.add_argument("--corpus", required=True, help="corpus directory")
    p_eval.add_argument("--report", required=True,
                        choices=["accuracy", "confusion", "rounds",
                                 "learning", "margins"])
    p_eval.add_argument("--out", required=True, help="report directory")
    p_eval.add_argument("--voting", default="ava",
                        help="ava, ova, or hier:N (default ava)")
    p_eval.add_argument("--pair",
                        help="phone pair a,b for rounds/learning/margins")
    p_eval.add_argument("--sizes", default=DEFAULT_SIZES,
                        help="per-phone training sizes for the learning "
                             f"report (default {DEFAULT_SIZES})")
    p_eval.add_argument("--trials", type=int, default=3,
                        help="trials per size for the learning report")
    p_eval.add_argument("--margins", default=DEFAULT_MARGINS,
                        help="margin widths in seconds for the margins "
                             f"report (default {DEFAULT_MARGINS})")
    p_eval.add_argument("--no-figures", dest="figures", action="store_false",
                        help="skip rendering PNG figures next to the report")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: one subcommand per stage, shared config, manifests.

Exit codes: 0 success, 1 runtime error, 2 usage error. Every run writes a
machine-readable manifest (inputs, seeds, versions, output hashes) into its
output directory, so a run can be reproduced byte-for-byte from the manifest
alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import annotation, baseline, casestudy, corpus, evaluation, gold, keywords, prelabel
from .manifest import write_run_manifest


class CliError(Exception):
    pass


def load_config(path: Optional[str]) -> dict[str, str]:
    """Plain-text key=value config; blank lines and #-comments ignored."""
    if path is None:
        return {}
    config: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


def setting(args: argparse.Namespace, config: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _load_store(corpus_path: str, fmt: str) -> corpus.CorpusStore:
    return corpus.ingest_documents([corpus_path], format=fmt)


def _out_dir(args, config) -> Path:
    out = setting(args, config, "out", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(value, flag: str):
    if value is None:
        raise CliError(f"missing required option {flag} (flag or config)")
    return value


def cmd_ingest(args, config, argv) -> int:
    out = _out_dir(args, config)
    corpus_path = _require(setting(args, config, "corpus"), "--corpus")
    store = _load_store(corpus_path, setting(args, config, "format", "jsonl"))
    sentences_path = out / "sentences.jsonl"
    corpus.write_sentences_jsonl(store.sentences(), sentences_path)
    print(f"ingested {len(store)} documents, {len(store.sentences())} sentences")
    write_run_manifest(out, "ingest", argv, config, [corpus_path], [sentences_path])
    return 0


def cmd_stats(args, config, argv) -> int:
    out = _out_dir(args, config)
    corpus_path = _require(setting(args, config, "corpus"), "--corpus")
    store = _load_store(corpus_path, setting(args, config, "format", "jsonl"))
    kind = setting(args, config, "source-kind")
    kind = corpus.SourceKind(kind) if kind else None
    stats = corpus.corpus_stats(store, kind)
    for key, value in stats.as_dict().items():
        print(f"{key:>6}  {value}")
    csv_path = out / "sentence_stats.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(stats.as_dict().keys()))
        writer.writerow(list(stats.as_dict().values()))
    write_run_manifest(out, "stats", argv, config, [corpus_path], [csv_path])
    return 0


def _keyword_set(args, config) -> keywords.KeywordSet:
    dimension = _require(setting(args, config, "dimension"), "--dimension")
    keyword_file = setting(args, config, "keyword-file")
    if keyword_file:
        return keywords.load_keyword_file(keyword_file, dimension)
    return keywords.load_keyword_set(dimension)


def cmd_kwmatch(args, config, argv) -> int:
    out = _out_dir(args, config)
    corpus_path = _require(setting(args, config, "corpus"), "--corpus")
    store = _load_store(corpus_path, setting(args, config, "format", "jsonl"))
    kwset = _keyword_set(args, config)
    table = keywords.keyword_frequency_table(store, kwset)
    assignment = keywords.bucketize(table)
    rate = table.total_matched_sentences / table.total_sentences
    print(f"appearance rate: {rate:.4f} "
          f"({table.total_matched_sentences}/{table.total_sentences} sentences)")
    freq_path = out / f"keyword_frequency_{kwset.dimension.value}.csv"
    with freq_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pattern", "sentence_count", "bucket"])
        for raw in sorted(table.counts, key=lambda r: assignment.rank_of[r]):
            writer.writerow([raw, table.counts[raw], assignment.bucket_of[raw]])
    write_run_manifest(out, "kwmatch", argv, config, [corpus_path], [freq_path])
    return 0


def cmd_kwsample(args, config, argv) -> int:
    out = _out_dir(args, config)
    corpus_path = _require(setting(args, config, "corpus"), "--corpus")
    store = _load_store(corpus_path, setting(args, config, "format", "jsonl"))
    kwset = _keyword_set(args, config)
    seed = int(setting(args, config, "seed", 0))
    method = setting(args, config, "method", "bucket")
    if method == "bucket":
        n_total = int(_require(setting(args, config, "n-total"), "--n-total"))
        table = keywords.keyword_frequency_table(store, kwset)
        assignment = keywords.bucketize(table)
        sample = keywords.bucket_balanced_sample(store, kwset, assignment, n_total, seed)
    elif method == "filter":
        cap = int(_require(setting(args, config, "per-source-cap"), "--per-source-cap"))
        sample = keywords.keyword_filter_sample(store, kwset, cap, seed)
    else:
        raise CliError(f"unknown sampling method {method!r}")
    sample_path = out / f"sample_{kwset.dimension.value}.jsonl"
    corpus.write_sentences_jsonl(sample, sample_path)
    print(f"sampled {len(sample)} sentences -> {sample_path}")
    write_run_manifest(out, "kwsample", argv, config, [corpus_path], [sample_path], seed=seed)
    return 0


def _read_sentences_jsonl(path: str) -> list[corpus.Sentence]:
    sentences = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            sentences.append(
                corpus.Sentence(
                    sent_id=rec["sent_id"],
                    doc_id=rec.get("doc_id", ""),
                    ordinal=int(rec.get("ordinal", 0)),
                    text=rec["text"],
                    token_count=len(rec["text"].split()),
                )
            )
    return sentences


def cmd_prelabel(args, config, argv) -> int:
    out = _out_dir(args, config)
    sentences_path = _require(setting(args, config, "sentences"), "--sentences")
    dimension = _require(setting(args, config, "dimension"), "--dimension")
    budget = int(_require(setting(args, config, "budget"), "--budget"))
    backend_kind = setting(args, config, "backend", "mock")
    if backend_kind == "mock":
        backend = prelabel.MockBackend(dimension=dimension)
    elif backend_kind == "http":
        endpoint = _require(setting(args, config, "endpoint"), "--endpoint")
        model = setting(args, config, "model", "default")
        backend = prelabel.HttpBackend(endpoint=endpoint, model=model)
    else:
        raise CliError(f"unknown backend {backend_kind!r}")
    sentences = _read_sentences_jsonl(sentences_path)
    scores_path = out / f"prelabel_scores_{dimension}.jsonl"
    result = prelabel.prelabel_batch(
        sentences, dimension, backend, budget, store_path=scores_path
    )
    failures_path = out / f"prelabel_failures_{dimension}.json"
    failures_path.write_text(
        json.dumps([{"sent_id": f.sent_id, "error": f.error} for f in result.failures], indent=2)
        + "\n",
        encoding="utf-8",
    )
    print(f"scored {len(result.scores)} sentences, {len(result.failures)} failures")
    write_run_manifest(
        out, "prelabel", argv, config, [sentences_path], [scores_path, failures_path]
    )
    return 0


def cmd_bandsample(args, config, argv) -> int:
    out = _out_dir(args, config)
    scores_path = _require(setting(args, config, "scores"), "--scores")
    n_total = int(_require(setting(args, config, "n-total"), "--n-total"))
    seed = int(setting(args, config, "seed", 0))
    scores = prelabel.read_scores_jsonl(scores_path)
    sample = prelabel.band_balanced_sample(scores, n_total, seed)
    sample_path = out / "band_sample_ids.txt"
    sample_path.write_text("\n".join(sample) + "\n", encoding="utf-8")
    print(f"sampled {len(sample)} sent_ids -> {sample_path}")
    write_run_manifest(out, "bandsample", argv, config, [scores_path], [sample_path], seed=seed)
    return 0


def _load_tasks(path: str) -> list[tuple[str, str]]:
    tasks = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            sample_id = rec.get("sample_id") or rec.get("sent_id")
            tasks.append((sample_id, rec["text"]))
    return tasks


def cmd_annotate_serve(args, config, argv) -> int:
    tasks_path = _require(setting(args, config, "tasks"), "--tasks")
    annotators = _require(setting(args, config, "annotators"), "--annotators").split(",")
    journal = setting(args, config, "journal")
    store = annotation.AnnotationStore(
        tasks=_load_tasks(tasks_path),
        annotators=[a.strip() for a in annotators],
        journal_path=journal,
    )
    from .server import create_app

    static_dir = setting(args, config, "static-dir")
    app = create_app(store, static_dir=static_dir)
    import uvicorn

    host = setting(args, config, "host", "127.0.0.1")
    port = int(setting(args, config, "port", 8000))
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def cmd_agreement(args, config, argv) -> int:
    out = _out_dir(args, config)
    records_path = _require(setting(args, config, "records"), "--records")
    records = annotation.read_records_jsonl(records_path)
    report = annotation.build_agreement_report(records)
    payload = {}
    for dim, agreement in report.dimensions.items():
        payload[dim] = {
            "kappa": agreement.kappa,
            "status": "defined" if agreement.kappa is not None else "undefined",
            "agree_2of4": agreement.agree_2of4,
            "agree_3of4": agreement.agree_3of4,
            "agree_4of4": agreement.agree_4of4,
            "n_samples": agreement.n_samples,
        }
        kappa_text = "undefined" if agreement.kappa is None else f"{agreement.kappa:.3f}"
        print(
            f"{dim:>12}  kappa={kappa_text}  2/4={agreement.agree_2of4:.3f} "
            f"3/4={agreement.agree_3of4:.3f} 4/4={agreement.agree_4of4:.3f}"
        )
    report_path = out / "agreement.json"
    report_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    write_run_manifest(out, "agreement", argv, config, [records_path], [report_path])
    return 0


def cmd_export_gold(args, config, argv) -> int:
    out = _out_dir(args, config)
    tasks_path = _require(setting(args, config, "tasks"), "--tasks")
    journal = _require(setting(args, config, "journal"), "--journal")
    annotators = _require(setting(args, config, "annotators"), "--annotators").split(",")
    store = annotation.AnnotationStore(
        tasks=_load_tasks(tasks_path),
        annotators=[a.strip() for a in annotators],
        journal_path=journal,
    )
    csv_path = out / "gold.csv"
    jsonl_path = out / "gold.jsonl"
    _, distribution = store.export_gold(csv_path=csv_path, jsonl_path=jsonl_path)
    dist_path = out / "label_distribution.json"
    dist_path.write_text(json.dumps(distribution, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(distribution))
    write_run_manifest(
        out, "export-gold", argv, config, [tasks_path, journal],
        [csv_path, jsonl_path, dist_path],
    )
    return 0


def cmd_baseline_eval(args, config, argv) -> int:
    out = _out_dir(args, config)
    gold_path = _require(setting(args, config, "gold"), "--gold")
    target = _require(setting(args, config, "target"), "--target")
    rows = gold.load_gold(gold_path)
    report = baseline.evaluate_baseline(rows, target)
    report_path = Path(setting(args, config, "report", out / "report.json"))
    baseline.write_baseline_report(report, report_path)
    print(
        f"target={target} f1={report.metrics.f1:.4f} acc={report.metrics.accuracy:.4f} "
        f"p={report.metrics.precision:.4f} r={report.metrics.recall:.4f}"
    )
    print(baseline.confusion_text(report.confusion), end="")
    write_run_manifest(out, "baseline-eval", argv, config, [gold_path], [report_path])
    return 0


def cmd_folds(args, config, argv) -> int:
    out = _out_dir(args, config)
    gold_path = _require(setting(args, config, "gold"), "--gold")
    dimension = _require(setting(args, config, "dimension"), "--dimension")
    k = int(setting(args, config, "k", 5))
    seed = int(setting(args, config, "seed", 0))
    rows = gold.load_gold(gold_path)
    spec = evaluation.make_folds(rows, dimension, k=k, seed=seed)
    folds_path = out / f"folds_{dimension}.json"
    folds_path.write_text(spec.to_json() + "\n", encoding="utf-8")
    print(f"{k} folds of sizes {[len(f) for f in spec.folds]} -> {folds_path}")
    write_run_manifest(out, "folds", argv, config, [gold_path], [folds_path], seed=seed)
    return 0


def cmd_cv(args, config, argv) -> int:
    out = _out_dir(args, config)
    gold_path = _require(setting(args, config, "gold"), "--gold")
    folds_path = _require(setting(args, config, "folds"), "--folds")
    runner_kind = setting(args, config, "runner", "baseline")
    rows = gold.load_gold(gold_path)
    spec = evaluation.FoldSpec.from_json(Path(folds_path).read_text("utf-8"))
    if runner_kind == "baseline":
        two_layer = baseline.TwoLayerClassifier()

        class _BaselineRunner:
            name = "two-layer-keywords"

            def predict(self, train_rows, test_rows):
                return {r.sample_id: two_layer.classify(r.text) for r in test_rows}

        runner = _BaselineRunner()
    elif runner_kind == "predfiles":
        template = _require(setting(args, config, "pred-template"), "--pred-template")
        runner = evaluation.PredictionFileRunner(template)
    else:
        raise CliError(f"unknown runner {runner_kind!r}")
    report = evaluation.cross_validate(runner, rows, spec)
    report_path = out / "cv_report.json"
    report_path.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
    text, _ = evaluation.results_table([report])
    print(text, end="")
    write_run_manifest(out, "cv", argv, config, [gold_path, folds_path], [report_path])
    return 0


def cmd_casestudy(args, config, argv) -> int:
    out = _out_dir(args, config)
    labels_path = _require(setting(args, config, "labels"), "--labels")
    transcripts_path = _require(setting(args, config, "transcripts"), "--transcripts")
    industry_path = setting(args, config, "industry-map")
    top_n = int(setting(args, config, "top-n", 20))
    labeled = casestudy.load_labeled_sentences(labels_path)
    meta = casestudy.load_transcript_meta(transcripts_path)
    scores = casestudy.score_transcripts(labeled, meta)
    exposures = casestudy.company_yearly_exposure(scores)
    outputs = []
    long_path = out / "company_exposure_long.csv"
    casestudy.write_long_format_csv(exposures, long_path)
    outputs.append(long_path)
    if industry_path:
        industry_map = casestudy.load_industry_map(industry_path)
        rows, excluded = casestudy.industry_aggregate(exposures, industry_map, top_n=top_n)
        industry_csv = out / "industry_ranking.csv"
        casestudy.write_industry_csv(rows, industry_csv)
        outputs.append(industry_csv)
        if excluded:
            excluded_path = out / "excluded_companies.txt"
            excluded_path.write_text("\n".join(excluded) + "\n", encoding="utf-8")
            outputs.append(excluded_path)
            print(f"excluded (no industry mapping): {', '.join(excluded)}")
    country_rows = casestudy.country_mention_rate(scores, meta)
    country_csv = out / "country_mention_rate.csv"
    casestudy.write_country_csv(country_rows, country_csv)
    outputs.append(country_csv)
    for row in country_rows:
        print(f"{row.country:>12}  mention_rate={row.mention_rate:.4f}  calls={row.n_calls}")
    inputs = [labels_path, transcripts_path] + ([industry_path] if industry_path else [])
    write_run_manifest(out, "casestudy", argv, config, inputs, outputs)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "kwmatch": cmd_kwmatch,
    "kwsample": cmd_kwsample,
    "prelabel": cmd_prelabel,
    "bandsample": cmd_bandsample,
    "annotate-serve": cmd_annotate_serve,
    "agreement": cmd_agreement,
    "export-gold": cmd_export_gold,
    "baseline-eval": cmd_baseline_eval,
    "folds": cmd_folds,
    "cv": cmd_cv,
    "casestudy": cmd_casestudy,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="naturetext",
        description="Nature-disclosure corpus analytics pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, **flags) -> argparse.ArgumentParser:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        for flag, kwargs in flags.items():
            p.add_argument(flag, **kwargs)
        return p

    add("ingest", **{"--corpus": {}, "--format": {"choices": ["jsonl", "plain_text_dir"]}})
    add("stats", **{"--corpus": {}, "--format": {}, "--source-kind": {"choices": ["AR", "SR", "EC"]}})
    add("kwmatch", **{"--corpus": {}, "--format": {}, "--dimension": {}, "--keyword-file": {}})
    add(
        "kwsample",
        **{
            "--corpus": {},
            "--format": {},
            "--dimension": {},
            "--keyword-file": {},
            "--method": {"choices": ["bucket", "filter"]},
            "--n-total": {"type": int},
            "--per-source-cap": {"type": int},
        },
    )
    add(
        "prelabel",
        **{
            "--sentences": {},
            "--dimension": {},
            "--budget": {"type": int},
            "--backend": {"choices": ["mock", "http"]},
            "--endpoint": {},
            "--model": {},
        },
    )
    add("bandsample", **{"--scores": {}, "--n-total": {"type": int}})
    add(
        "annotate-serve",
        **{
            "--tasks": {},
            "--annotators": {},
            "--journal": {},
            "--static-dir": {},
            "--host": {},
            "--port": {"type": int},
        },
    )
    add("agreement", **{"--records": {}})
    add("export-gold", **{"--tasks": {}, "--journal": {}, "--annotators": {}})
    add(
        "baseline-eval",
        **{"--gold": {}, "--target": {"choices": ["biodiversity", "nature"]}, "--report": {}},
    )
    add("folds", **{"--gold": {}, "--dimension": {}, "--k": {"type": int}})
    add(
        "cv",
        **{
            "--gold": {},
            "--folds": {},
            "--runner": {"choices": ["baseline", "predfiles"]},
            "--pred-template": {},
        },
    )
    add(
        "casestudy",
        **{
            "--labels": {},
            "--transcripts": {},
            "--industry-map": {},
            "--top-n": {"type": int},
        },
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config, argv)
    except (
        CliError,
        corpus.CorpusError,
        keywords.KeywordError,
        prelabel.PreLabelError,
        annotation.AnnotationError,
        gold.GoldDataError,
        evaluation.EvaluationError,
        baseline.BaselineError,
        casestudy.CaseStudyError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

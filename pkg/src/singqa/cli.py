"""Batch command-line pipeline: extract features, train heads, correct,
fuse, predict and evaluate. Logs go to stderr; data goes to files and
stdout. Every subcommand is deterministic given identical inputs, flags
and seed."""

from __future__ import annotations

import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from .assembly import VARIANTS, FeatureAssembler, UtteranceInputs
from .audio import read_wav
from .bias import BiasCorrector
from .featureio import read_feature_file, write_feature_file
from .fusion import DEFAULT_TOP_K, ScoreCombiner, rank_predictors
from .heads import HeadPredictor, clamp_score
from .manifest import UtteranceRecord, load_manifest, write_manifest
from .metrics import format_report_table, full_report, write_report_csv
from .modelio import (
    file_digest,
    load_model,
    save_corrected_head,
    save_fusion,
    save_head,
    verify_members,
    write_training_log,
)
from .pitch import compute_histogram, features_to_pitch_track, histogram_sharpness, pitch_track_to_features, track_pitch
from .spectral import stft_amplitude_phase

log = logging.getLogger("singqa")

PREDICTIONS_COLUMNS = ["utt_id", "raw_score", "clamped_score"]

_VARIANT_NEEDS = {
    "plain": ("embedding",),
    "compressed_pitch": ("embedding", "pitch"),
    "pitch_histogram": ("embedding", "pitch"),
    "spectrum": ("embedding", "spectral"),
}


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _require_labels(records, manifest_path) -> np.ndarray:
    missing = [r.utt_id for r in records if r.mos_label is None]
    if missing:
        raise _fail(f"{manifest_path}: rows without mos labels: {', '.join(missing[:5])}")
    return np.array([r.mos_label for r in records], dtype=np.float64)


def _load_inputs(record: UtteranceRecord, variant: str) -> UtteranceInputs:
    loaded = {}
    for kind in _VARIANT_NEEDS[variant]:
        path = record.feature_paths.get(kind)
        if path is None:
            raise _fail(f"utterance {record.utt_id}: manifest has no {kind} feature path")
        try:
            seq = read_feature_file(path)
        except (OSError, ValueError) as exc:
            raise _fail(f"utterance {record.utt_id}: {exc}") from exc
        if seq.kind != kind:
            raise _fail(f"utterance {record.utt_id}: {path} holds {seq.kind!r} features, expected {kind!r}")
        loaded[kind] = seq
    return UtteranceInputs(
        embedding=loaded["embedding"],
        pitch=features_to_pitch_track(loaded["pitch"]) if "pitch" in loaded else None,
        spectral=loaded.get("spectral"),
    )


def _assemble(records, head: HeadPredictor, histogram_norm: str) -> np.ndarray:
    assembler = FeatureAssembler(
        variant=head.variant,
        histogram_norm=histogram_norm,
        use_layer_norm=head.use_layer_norm,
    )
    inputs = [_load_inputs(r, head.variant) for r in records]
    return assembler.transform(inputs)


def _predict_with_model(model, meta, records, member_paths=()) -> np.ndarray:
    if meta["kind"] == "fusion":
        if not member_paths:
            raise _fail("fusion models need --members with the member model files in order")
        verify_members(model, member_paths)
        columns = []
        for path in member_paths:
            member, member_meta = load_model(path)
            columns.append(_predict_with_model(member, member_meta, records))
        return np.column_stack(columns) @ model.weights + model.bias
    head = model.head if isinstance(model, BiasCorrector) else model
    X = _assemble(records, head, meta["histogram_norm"])
    return model.predict(X)


def _train_kwargs(lr, batch_size, max_epochs, patience, seed) -> dict:
    return {
        "learning_rate": lr,
        "batch_size": batch_size,
        "max_epochs": max_epochs,
        "patience": patience,
        "seed": seed,
    }


def _write_predictions(utt_ids, scores, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_COLUMNS)
        for utt_id, score in zip(utt_ids, scores):
            writer.writerow([utt_id, repr(float(score)), repr(float(clamp_score(score)))])


def _histogram_row(utt_id, track, norm):
    hist = compute_histogram(track, normalizer=norm)
    return [utt_id, *(repr(float(b)) for b in hist.bins), repr(histogram_sharpness(hist))]


def _write_histogram_csv(rows, path) -> None:
    header = ["utt_id", *(f"bin_{j:03d}" for j in range(1, 121)), "sharpness"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


train_options = [
    click.option("--lr", default=0.0001, show_default=True, help="SGD learning rate."),
    click.option("--batch-size", default=4, show_default=True),
    click.option("--max-epochs", default=1000, show_default=True),
    click.option("--patience", default=15, show_default=True, help="Early-stop patience in epochs."),
    click.option("--seed", default=0, show_default=True),
]


def _with_train_options(fn):
    for option in reversed(train_options):
        fn = option(fn)
    return fn


@click.group()
def main():
    """Singing-quality scoring pipeline over manifest-listed utterances."""
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")


@main.command("extract-pitch")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--frame-shift", default=0.02, show_default=True, help="Frame shift in seconds.")
@click.option("--f0-min", default=60.0, show_default=True)
@click.option("--f0-max", default=800.0, show_default=True)
@click.option("--norm", type=click.Choice(["voiced", "all"]), default="voiced", show_default=True,
              help="Histogram normalizer: voiced frames or all frames.")
@click.option("--jobs", default=1, show_default=True, envvar="SINGQA_JOBS",
              help="Parallel workers (also via SINGQA_JOBS).")
def extract_pitch(manifest_path, out_dir, frame_shift, f0_min, f0_max, norm, jobs):
    """Track pitch for every wav, write pitch feature files, a histogram
    CSV and a manifest copy pointing at the new files."""
    records = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(record: UtteranceRecord):
        if record.wav_path is None:
            raise ValueError("manifest row has no wav_path")
        clip = read_wav(record.wav_path)
        track = track_pitch(clip, frame_shift=frame_shift, f0_min=f0_min, f0_max=f0_max)
        path = out / f"{record.utt_id}.pitch.sqaf"
        seq = pitch_track_to_features(track)
        write_feature_file(seq, path)
        # histogram rows come from the persisted (float32) values so the
        # `histogram` subcommand reproduces them exactly
        return features_to_pitch_track(seq), path

    failures = 0
    rows = []
    updated = []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda r: _try(work, r), records))
    for record, outcome in zip(records, results):
        if isinstance(outcome, Exception):
            log.error("utterance %s failed: %s", record.utt_id, outcome)
            failures += 1
            updated.append(record)
            continue
        track, path = outcome
        rows.append(_histogram_row(record.utt_id, track, norm))
        updated.append(_with_feature(record, "pitch", path))
    _write_histogram_csv(rows, out / "histograms.csv")
    write_manifest(updated, out / "manifest.csv")
    log.info("wrote %d pitch tracks to %s (%d failed)", len(rows), out, failures)
    if failures:
        sys.exit(1)


@main.command("extract-spectral")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--frame-shift", default=0.02, show_default=True)
@click.option("--fft-size", default=1024, show_default=True)
@click.option("--jobs", default=1, show_default=True, envvar="SINGQA_JOBS")
def extract_spectral(manifest_path, out_dir, frame_shift, fft_size, jobs):
    """Extract amplitude+phase features for every wav."""
    records = load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(record: UtteranceRecord):
        if record.wav_path is None:
            raise ValueError("manifest row has no wav_path")
        clip = read_wav(record.wav_path)
        seq = stft_amplitude_phase(clip, frame_shift=frame_shift, fft_size=fft_size)
        path = out / f"{record.utt_id}.spectral.sqaf"
        write_feature_file(seq, path)
        return path

    failures = 0
    updated = []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda r: _try(work, r), records))
    for record, outcome in zip(records, results):
        if isinstance(outcome, Exception):
            log.error("utterance %s failed: %s", record.utt_id, outcome)
            failures += 1
            updated.append(record)
        else:
            updated.append(_with_feature(record, "spectral", outcome))
    write_manifest(updated, out / "manifest.csv")
    log.info("wrote %d spectral files to %s (%d failed)", len(records) - failures, out, failures)
    if failures:
        sys.exit(1)


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--norm", type=click.Choice(["voiced", "all"]), default="voiced", show_default=True)
def histogram(manifest_path, out, norm):
    """Write the histogram CSV for already-extracted pitch tracks."""
    records = load_manifest(manifest_path)
    rows = []
    for record in records:
        path = record.feature_paths.get("pitch")
        if path is None:
            raise _fail(f"utterance {record.utt_id}: manifest has no pitch feature path")
        track = features_to_pitch_track(read_feature_file(path))
        rows.append(_histogram_row(record.utt_id, track, norm))
    _write_histogram_csv(rows, out)


@main.command()
@click.argument("manifest_train", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_val", type=click.Path(exists=True, dir_okay=False))
@click.option("--variant", type=click.Choice(VARIANTS), default="plain", show_default=True)
@click.option("--norm", type=click.Choice(["voiced", "all"]), default="voiced", show_default=True,
              help="Histogram normalizer (pitch_histogram variant).")
@click.option("--use-layer-norm/--no-layer-norm", default=True, show_default=True,
              help="Layer normalization for the pitch_histogram variant.")
@click.option("--projection-dim", default=64, show_default=True,
              help="Learned spectral projection width (spectrum variant).")
@_with_train_options
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def train(manifest_train, manifest_val, variant, norm, use_layer_norm, projection_dim,
          lr, batch_size, max_epochs, patience, seed, out):
    """Train one scoring head; prints the best validation system SRCC."""
    train_records = load_manifest(manifest_train)
    val_records = load_manifest(manifest_val)
    y_train = _require_labels(train_records, manifest_train)
    y_val = _require_labels(val_records, manifest_val)

    probe = _load_inputs(train_records[0], variant) if train_records else None
    if probe is None:
        raise _fail(f"{manifest_train}: manifest is empty")
    head = HeadPredictor(
        variant=variant,
        embedding_dim=probe.embedding.dims if variant == "spectrum" else None,
        projection_dim=projection_dim,
        use_layer_norm=use_layer_norm,
        **_train_kwargs(lr, batch_size, max_epochs, patience, seed),
    )
    X_train = _assemble(train_records, head, norm)
    X_val = _assemble(val_records, head, norm)
    try:
        head.fit(X_train, y_train, X_val, y_val, [r.system_id for r in val_records])
    except ValueError as exc:
        raise _fail(str(exc)) from exc
    save_head(head, out, histogram_norm=norm)
    write_training_log(head.history_, Path(out).with_suffix(Path(out).suffix + ".trainlog.csv"))
    click.echo(f"best_val_system_srcc {head.best_val_srcc_!r}")


@main.command("bias-correct")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_train", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_val", type=click.Path(exists=True, dir_okay=False))
@click.option("--alpha", default=4.0, show_default=True, help="Upper threshold.")
@click.option("--beta", default=2.0, show_default=True, help="Lower threshold.")
@_with_train_options
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def bias_correct(model_path, manifest_train, manifest_val, alpha, beta,
                 lr, batch_size, max_epochs, patience, seed, out):
    """Train the add/subtract correction branches on a frozen head."""
    model, meta = load_model(model_path)
    if meta["kind"] != "head":
        raise _fail(f"{model_path}: bias-correct needs an uncorrected head model")
    train_records = load_manifest(manifest_train)
    val_records = load_manifest(manifest_val)
    y_train = _require_labels(train_records, manifest_train)
    y_val = _require_labels(val_records, manifest_val)
    X_train = _assemble(train_records, model, meta["histogram_norm"])
    X_val = _assemble(val_records, model, meta["histogram_norm"])
    corrector = BiasCorrector(
        head=model, alpha=alpha, beta=beta,
        **_train_kwargs(lr, batch_size, max_epochs, patience, seed),
    )
    try:
        corrector.fit(X_train, y_train, X_val, y_val, [r.system_id for r in val_records])
    except ValueError as exc:
        raise _fail(str(exc)) from exc
    save_corrected_head(corrector, out, histogram_norm=meta["histogram_norm"])
    write_training_log(corrector.history_, Path(out).with_suffix(Path(out).suffix + ".trainlog.csv"))
    click.echo(f"best_val_system_srcc {corrector.best_val_srcc_!r}")


@main.command()
@click.argument("manifest_train", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_val", type=click.Path(exists=True, dir_okay=False))
@click.option("--members", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False),
              help="Candidate member model files (repeatable).")
@click.option("--top-k", default=DEFAULT_TOP_K, show_default=True,
              help="How many members survive SRCC ranking.")
@_with_train_options
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def fuse(manifest_train, manifest_val, members, top_k, lr, batch_size, max_epochs, patience, seed, out):
    """Rank candidate predictors by validation system SRCC, keep the top k
    and train the linear combiner over their scores."""
    train_records = load_manifest(manifest_train)
    val_records = load_manifest(manifest_val)
    y_train = _require_labels(train_records, manifest_train)
    y_val = _require_labels(val_records, manifest_val)
    val_systems = [r.system_id for r in val_records]

    val_scores = {}
    reports = []
    for path in members:
        model, meta = load_model(path)
        scores = _predict_with_model(model, meta, val_records)
        val_scores[path] = scores
        reports.append((path, full_report(scores, y_val, val_systems)))
    try:
        selected = rank_predictors(reports, top_k)
    except ValueError as exc:
        raise _fail(str(exc)) from exc
    log.info("selected members: %s", ", ".join(Path(p).name for p in selected))

    train_columns = []
    for path in selected:
        model, meta = load_model(path)
        train_columns.append(_predict_with_model(model, meta, train_records))
    S_train = np.column_stack(train_columns)
    S_val = np.column_stack([val_scores[path] for path in selected])

    combiner = ScoreCombiner(**_train_kwargs(lr, batch_size, max_epochs, patience, seed))
    try:
        combiner.fit(S_train, y_train, S_val, y_val, val_systems)
    except ValueError as exc:
        raise _fail(str(exc)) from exc
    fusion_model = combiner.to_fusion_model(
        member_ids=[Path(p).name for p in selected],
        member_digests=[file_digest(p) for p in selected],
    )
    save_fusion(fusion_model, out)
    write_training_log(combiner.history_, Path(out).with_suffix(Path(out).suffix + ".trainlog.csv"))
    click.echo(f"best_val_system_srcc {combiner.best_val_srcc_!r}")


@main.command()
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--members", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Member model files, in fusion order (fusion models only).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def predict(model_path, manifest_path, members, out):
    """Score a manifest; writes (utt_id, raw_score, clamped_score)."""
    model, meta = load_model(model_path)
    records = load_manifest(manifest_path)
    try:
        scores = _predict_with_model(model, meta, records, member_paths=list(members))
    except ValueError as exc:
        raise _fail(str(exc)) from exc
    _write_predictions([r.utt_id for r in records], scores, out)


@main.command()
@click.argument("predictions_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Also write the metric CSV here.")
def evaluate(predictions_path, manifest_path, out):
    """Join predictions with manifest labels and print the metric table."""
    records = load_manifest(manifest_path)
    labels = _require_labels(records, manifest_path)
    predicted = {}
    with Path(predictions_path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PREDICTIONS_COLUMNS:
            raise _fail(f"{predictions_path}: header must be {','.join(PREDICTIONS_COLUMNS)}")
        for row in reader:
            predicted[row[0]] = float(row[1])
    missing = [r.utt_id for r in records if r.utt_id not in predicted]
    if missing:
        raise _fail(f"{predictions_path}: no prediction for: {', '.join(missing[:5])}")
    scores = np.array([predicted[r.utt_id] for r in records])
    report = full_report(scores, labels, [r.system_id for r in records])
    click.echo(format_report_table(report))
    if out:
        write_report_csv(report, out)


def _try(fn, record):
    try:
        return fn(record)
    except Exception as exc:  # per-utterance isolation; the run reports and continues
        return exc


def _with_feature(record: UtteranceRecord, kind: str, path: Path) -> UtteranceRecord:
    feature_paths = dict(record.feature_paths)
    feature_paths[kind] = path
    return UtteranceRecord(
        utt_id=record.utt_id,
        system_id=record.system_id,
        wav_path=record.wav_path,
        feature_paths=feature_paths,
        mos_label=record.mos_label,
    )


if __name__ == "__main__":
    main()

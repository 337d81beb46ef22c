"""Command-line surface: reproducible runs over the library.

Subcommands: synth, extract, embed-stub, convert-embeddings,
validate-manifest, train, predict, evaluate, ablate, timing.

Exit codes: 0 success, 1 data error, 2 config error. Every command that
writes an output directory echoes its fully resolved configuration there
as ``config.echo.json``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import audio, classifiers
from .config import (
    RunConfig,
    apply_overrides,
    config_to_dict,
    echo_config,
    load_config,
    synth_spec_from_dict,
)
from .embeddings import (
    EmbeddingTable,
    align,
    load_embeddings,
    save_embeddings,
    stub_embed_rows,
    table_from_matrix,
)
from .errors import ConfigError, DataError
from .evaluation import POPULATIONS, evaluate_pipeline, run_ablation, timing_comparison
from .manifest import SPLITS, load_manifest, save_manifest
from .pipeline import load_pipeline, predict_identities, save_pipeline, train_full
from .synth import generate_corpus, with_noise_fraction

EXTRACT_KINDS = ("mfcc", "dmfcc", "fbank", "spectrogram", "waveform")


def _load_run_config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    overrides = {
        name: getattr(args, name, None)
        for name in ("seed", "workers", "strategy", "modality",
                     "classifier_family", "gate_family")
    }
    return apply_overrides(cfg, overrides)


def _echo(args, out_dir, run_config: RunConfig | None = None, **extra) -> None:
    payload = {
        "command": args.command,
        "args": {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items())
            if k not in ("func", "command") and v is not None
        },
    }
    if run_config is not None:
        payload["run_config"] = config_to_dict(run_config)
    payload.update(extra)
    echo_config(payload, out_dir)


def _select_rows(manifest, split: str) -> np.ndarray:
    if split == "all" or not manifest.all_assigned():
        return np.arange(len(manifest))
    rows = manifest.split_indices(split)
    if rows.size == 0:
        raise DataError(f"manifest has no rows in split {split!r}")
    return rows


# -- synth ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    payload = {}
    if args.spec:
        try:
            payload = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.spec}: invalid JSON ({exc})") from None
    spec = synth_spec_from_dict(payload)
    replacements = {
        "n_speakers": args.speakers,
        "n_male": args.males,
        "samples_per_speaker": args.samples,
        "seed": args.seed,
    }
    spec = dataclasses.replace(
        spec, **{k: v for k, v in replacements.items() if v is not None}
    )
    if args.noise_fraction is not None:
        spec = with_noise_fraction(spec, args.noise_fraction)

    corpus = generate_corpus(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(corpus.manifest, out_dir / "manifest.csv")
    save_embeddings(corpus.face, out_dir / "face.msrf")
    save_embeddings(corpus.voice, out_dir / "voice.msrf")
    _echo(args, out_dir, spec=dataclasses.asdict(spec))
    print(
        f"wrote {len(corpus.manifest)} samples, {spec.n_speakers} speakers "
        f"(face dim {spec.face_dim}, voice dim {spec.voice_dim}) to {out_dir}"
    )
    return 0


# -- validate-manifest -----------------------------------------------------------

def cmd_validate_manifest(args) -> int:
    manifest = load_manifest(args.manifest)
    print(f"records: {len(manifest)}")
    print(f"speakers: {len(manifest.speaker_vocab)}")
    for gender, count in sorted(manifest.gender_counts.items()):
        print(f"  {gender} speakers: {count}")
    for split in SPLITS:
        print(f"  {split}: {len(manifest.split_indices(split))}")
    unassigned = sum(1 for r in manifest.records if r.split == "")
    print(f"  unassigned: {unassigned}")
    return 0


# -- extract -----------------------------------------------------------------------

def _extract_one(record, kinds, front_end, audio_root: Path):
    path = Path(record.audio_path)
    if not path.is_absolute():
        path = audio_root / path
    clip = audio.load_wav(path, front_end.sample_rate, front_end.duration_s)
    out = {}
    for kind in kinds:
        if kind == "mfcc":
            out[kind] = audio.mfcc_features(clip, front_end)
        elif kind == "dmfcc":
            out[kind] = audio.dmfcc_features(clip, front_end)
        elif kind == "fbank":
            out[kind] = audio.fbank_features(clip, front_end)
        elif kind == "spectrogram":
            out[kind] = audio.spectrogram_image(clip, front_end).values.ravel()
        elif kind == "waveform":
            raster = audio.waveform_raster(
                clip, front_end.raster_width, front_end.raster_height
            )
            out[kind] = raster.astype(np.float64).ravel()
    return out


def cmd_extract(args) -> int:
    run_config = _load_run_config(args)
    manifest = load_manifest(args.manifest)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    for kind in kinds:
        if kind not in EXTRACT_KINDS:
            raise ConfigError(
                f"unknown feature kind {kind!r}; choices: {', '.join(EXTRACT_KINDS)}"
            )
    audio_root = Path(args.audio_root) if args.audio_root else Path(args.manifest).parent
    front_end = run_config.front_end

    def job(record):
        try:
            return record.sample_id, _extract_one(record, kinds, front_end, audio_root), None
        except (DataError, FileNotFoundError, OSError) as exc:
            return record.sample_id, None, f"{type(exc).__name__}: {exc}"

    if run_config.workers <= 1:
        results = [job(r) for r in manifest.records]
    else:
        with ThreadPoolExecutor(max_workers=run_config.workers) as pool:
            results = list(pool.map(job, manifest.records))

    failures = [(sid, err) for sid, _, err in results if err is not None]
    if failures:
        for sid, err in failures:
            print(f"extract failed for {sid}: {err}", file=sys.stderr)
        return 1

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        entries = {sid: feats[kind] for sid, feats, _ in results}
        dim = len(next(iter(entries.values())))
        table = EmbeddingTable(
            dim=dim,
            entries={k: np.asarray(v, dtype=np.float32) for k, v in entries.items()},
            source_tag=kind,
        )
        save_embeddings(table, out_dir / f"features_{kind}.msrf")
        print(f"features_{kind}.msrf: {len(table)} rows x {dim}")
    if args.pgm:
        for sid, feats, _ in results:
            if "spectrogram" in feats:
                image = feats["spectrogram"].reshape(front_end.nfft // 2 + 1, -1)
                audio.write_pgm(image, out_dir / "pgm" / "spectrogram" / f"{sid}.pgm")
            if "waveform" in feats:
                image = feats["waveform"].reshape(front_end.raster_height, -1)
                audio.write_pgm(image, out_dir / "pgm" / "waveform" / f"{sid}.pgm")
    _echo(args, out_dir, run_config=run_config)
    return 0


# -- embed-stub ----------------------------------------------------------------------

def cmd_embed_stub(args) -> int:
    if (args.input is None) == (args.pgm_dir is None):
        raise ConfigError("provide exactly one of --input or --pgm-dir")
    if args.pgm_dir is not None:
        if args.manifest is None:
            raise ConfigError("--pgm-dir requires --manifest")
        manifest = load_manifest(args.manifest)
        ids = manifest.sample_ids()
        rows = [audio.read_pgm(Path(args.pgm_dir) / f"{sid}.pgm").ravel() for sid in ids]
        matrix = np.asarray(rows)
    else:
        table = load_embeddings(args.input)
        ids = list(table.entries)
        matrix = np.asarray([table.entries[sid] for sid in ids])
    embedded = stub_embed_rows(matrix, args.dim, args.seed)
    out = table_from_matrix(embedded.astype(np.float32), ids, source_tag="stub")
    save_embeddings(out, args.output)
    print(f"{args.output}: {len(out)} rows x {args.dim} (stub)")
    return 0


# -- convert-embeddings ----------------------------------------------------------------

def cmd_convert_embeddings(args) -> int:
    if args.mode == "to-csv":
        table = load_embeddings(args.input)
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sample_id"] + [f"v{i}" for i in range(table.dim)])
            for sid, vector in table.entries.items():
                writer.writerow([sid] + [repr(float(v)) for v in vector])
        print(f"{args.output}: {len(table)} rows x {table.dim}")
    else:
        entries = {}
        dim = None
        with open(args.input, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "sample_id":
                raise DataError(f"{args.input}: expected header sample_id,v0,...")
            dim = len(header) - 1
            for row in reader:
                if len(row) != dim + 1:
                    raise DataError(
                        f"{args.input}: row for {row[0]!r} has {len(row) - 1} values, "
                        f"expected {dim}"
                    )
                entries[row[0]] = np.asarray(row[1:], dtype=np.float32)
        table = EmbeddingTable(dim=dim, entries=entries, source_tag="csv")
        save_embeddings(table, args.output)
        print(f"{args.output}: {len(table)} rows x {dim}")
    return 0


# -- train ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    run_config = _load_run_config(args)
    manifest = load_manifest(args.manifest)
    face = load_embeddings(args.face) if args.face else None
    voice = load_embeddings(args.voice) if args.voice else None

    model = train_full(
        manifest, face, voice,
        strategy=run_config.strategy,
        selection_cfg=run_config.selection,
        classifier_family=run_config.classifier_family,
        classifier_cfg=run_config.classifier_cfg(run_config.classifier_family),
        gate_family=run_config.gate_family,
        gate_cfg=run_config.classifier_cfg(run_config.gate_family),
        seed=run_config.seed,
        genderless=args.genderless,
        modality=run_config.modality,
    )
    out_dir = Path(args.out_dir)
    save_pipeline(model, out_dir)

    widths = {}
    for name, branch in model.branches.items():
        concat_width = sum(
            mask.width if mask is not None else (dim or 0)
            for mask, dim in (
                (branch.face_mask, branch.face_dim),
                (branch.voice_mask, branch.voice_dim),
            )
            if dim is not None
        )
        widths[name] = {
            "face_dim": branch.face_dim,
            "voice_dim": branch.voice_dim,
            "face_kept": None if branch.face_mask is None else branch.face_mask.width,
            "voice_kept": None if branch.voice_mask is None else branch.voice_mask.width,
            "concatenated": concat_width,
            "fused": branch.fused_width,
            "speakers": len(branch.classifier.label_vocab),
        }
    run_log = {
        "seed": run_config.seed,
        "strategy": model.strategy,
        "modality": model.modality,
        "mode": "genderless" if model.genderless else "gated",
        "n_train_rows": int(len(manifest.split_indices("train"))
                            or len(manifest)),
        "widths": widths,
        "fit_seconds": {
            "gate": model.gate_seconds,
            **{name: b.fit_seconds for name, b in model.branches.items()},
        },
    }
    (out_dir / "run_log.json").write_text(
        json.dumps(run_log, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _echo(args, out_dir, run_config=run_config)
    print(f"model written to {out_dir} ({run_log['mode']}, {model.strategy})")
    return 0


# -- predict / evaluate -----------------------------------------------------------------

def _load_rows(args, manifest, model):
    face = voice = None
    if args.face:
        face = align(load_embeddings(args.face), manifest)
    if args.voice:
        voice = align(load_embeddings(args.voice), manifest)
    rows = _select_rows(manifest, args.split)
    face = None if face is None else face[rows]
    voice = None if voice is None else voice[rows]
    records = [manifest.records[i] for i in rows]
    return records, face, voice


def cmd_predict(args) -> int:
    model = load_pipeline(args.model_dir)
    manifest = load_manifest(args.manifest)
    records, face, voice = _load_rows(args, manifest, model)
    speakers, genders = predict_identities(model, face, voice)

    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["sample_id", "true_speaker", "true_gender", "predicted_speaker",
             "predicted_gender"]
        )
        for record, speaker, gender in zip(records, speakers, genders):
            writer.writerow(
                [record.sample_id, record.speaker_label, record.gender_label,
                 speaker, gender]
            )

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            emit(fh)
    else:
        emit(sys.stdout)
    return 0


def cmd_evaluate(args) -> int:
    from . import plots, reports

    model = load_pipeline(args.model_dir)
    manifest = load_manifest(args.manifest)
    records, face, voice = _load_rows(args, manifest, model)
    truth = [r.speaker_label for r in records]
    report = evaluate_pipeline(model, face, voice, truth)
    out_dir = Path(args.out_dir)
    reports.write_eval_report(report, out_dir)
    if not args.no_figures:
        plots.confusion_heatmap(report, out_dir / "confusion.png")
    _echo(args, out_dir)
    print(f"accuracy: {report.accuracy * 100:.2f}% on {report.n_samples} samples")
    return 0


# -- ablate ------------------------------------------------------------------------------

def _parse_sources(pairs, manifest):
    sources = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--source must look like name=path, got {pair!r}")
        name, path = pair.split("=", 1)
        sources[name.strip()] = align(load_embeddings(path.strip()), manifest)
    if not sources:
        raise ConfigError("ablate needs at least one --source name=path")
    return sources


def cmd_ablate(args) -> int:
    from . import plots, reports

    run_config = _load_run_config(args)
    manifest = load_manifest(args.manifest)
    sources = _parse_sources(args.source, manifest)
    extractors = (
        [s.strip() for s in args.extractors.split(",")] if args.extractors
        else list(sources)
    )
    families = (
        [s.strip() for s in args.families.split(",")] if args.families
        else list(classifiers.FAMILIES)
    )
    fs_options = {"both": [False, True], "on": [True], "off": [False]}[args.fs]
    populations = (
        [s.strip() for s in args.populations.split(",")] if args.populations
        else list(POPULATIONS)
    )
    grid = run_ablation(
        manifest, sources,
        extractors=extractors, families=families, fs_options=fs_options,
        populations=populations,
        selection_cfg=run_config.selection,
        classifier_cfgs=run_config.classifier_cfgs(),
        seed=run_config.seed,
        workers=run_config.workers,
    )
    out_dir = Path(args.out_dir)
    reports.write_ablation_grid(grid, out_dir)
    if not args.no_figures:
        plots.ablation_bars(grid, out_dir / "grid.png")
    _echo(args, out_dir, run_config=run_config)
    failed = [c for c in grid.cells if c.error is not None]
    print(f"{len(grid.cells)} cells ({len(failed)} failed) -> {out_dir}")
    return 0


# -- timing ------------------------------------------------------------------------------

def cmd_timing(args) -> int:
    from . import plots, reports

    run_config = _load_run_config(args)
    manifest = load_manifest(args.manifest)
    face = align(load_embeddings(args.face), manifest)
    voice = align(load_embeddings(args.voice), manifest)
    report = timing_comparison(
        manifest, face, voice,
        selection_cfg=run_config.selection,
        classifier_family=run_config.classifier_family,
        classifier_cfg=run_config.classifier_cfg(run_config.classifier_family),
        seed=run_config.seed,
    )
    out_dir = Path(args.out_dir)
    reports.write_timing_report(report, out_dir)
    if not args.no_figures:
        plots.timing_bars(report, out_dir / "timing.png")
    _echo(args, out_dir, run_config=run_config)
    print(f"(male+female)/genderless = {report.overall_ratio:.3f}")
    return 0


# -- parser -------------------------------------------------------------------------------

def _add_config_flags(sub):
    sub.add_argument("--config", type=Path, help="JSON run configuration")
    sub.add_argument("--seed", type=int, help="override config seed")
    sub.add_argument("--workers", type=int, help="override worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatefuse",
        description="Gender-gated dual-modality speaker identification.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("synth", help="generate a synthetic corpus")
    sub.add_argument("out_dir", type=Path)
    sub.add_argument("--spec", type=Path, help="JSON generator spec")
    sub.add_argument("--speakers", type=int)
    sub.add_argument("--males", type=int)
    sub.add_argument("--samples", type=int, help="samples per speaker")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--noise-fraction", type=float,
                     help="resize noise dims to this fraction of each modality")
    sub.set_defaults(func=cmd_synth)

    sub = commands.add_parser("validate-manifest", help="check a manifest CSV")
    sub.add_argument("manifest", type=Path)
    sub.set_defaults(func=cmd_validate_manifest)

    sub = commands.add_parser("extract", help="extract audio feature tables")
    sub.add_argument("manifest", type=Path)
    sub.add_argument("out_dir", type=Path)
    sub.add_argument("--kinds", default="mfcc,dmfcc,fbank",
                     help=f"comma list from: {', '.join(EXTRACT_KINDS)}")
    sub.add_argument("--audio-root", type=Path,
                     help="base directory for relative audio paths")
    sub.add_argument("--pgm", action="store_true",
                     help="also export per-sample PGM images for image kinds")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_extract)

    sub = commands.add_parser("embed-stub",
                              help="deterministic stand-in for CNN embeddings")
    sub.add_argument("--input", type=Path, help="table of flattened images")
    sub.add_argument("--pgm-dir", type=Path, help="directory of <sample_id>.pgm")
    sub.add_argument("--manifest", type=Path)
    sub.add_argument("--output", type=Path, required=True)
    sub.add_argument("--dim", type=int, default=4096)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=cmd_embed_stub)

    sub = commands.add_parser("convert-embeddings",
                              help="convert between the binary table format and CSV")
    sub.add_argument("mode", choices=["to-csv", "from-csv"])
    sub.add_argument("input", type=Path)
    sub.add_argument("output", type=Path)
    sub.set_defaults(func=cmd_convert_embeddings)

    sub = commands.add_parser("train", help="train the gated fusion pipeline")
    sub.add_argument("manifest", type=Path)
    sub.add_argument("out_dir", type=Path)
    sub.add_argument("--face", type=Path, help="face embedding table")
    sub.add_argument("--voice", type=Path, help="voice feature table")
    sub.add_argument("--strategy", choices=["simple-concat", "pre-fs", "post-fs",
                                            "pre-post-fs"])
    sub.add_argument("--modality", choices=["both", "face", "voice"])
    sub.add_argument("--classifier-family", dest="classifier_family",
                     choices=list(classifiers.FAMILIES))
    sub.add_argument("--gate-family", dest="gate_family",
                     choices=list(classifiers.FAMILIES))
    sub.add_argument("--genderless", action="store_true",
                     help="skip the gate; train one all-speaker branch")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_train)

    for name, func in (("predict", cmd_predict), ("evaluate", cmd_evaluate)):
        sub = commands.add_parser(name, help=f"{name} with a trained model")
        sub.add_argument("model_dir", type=Path)
        sub.add_argument("manifest", type=Path)
        sub.add_argument("--face", type=Path)
        sub.add_argument("--voice", type=Path)
        sub.add_argument("--split", default="test",
                         choices=["train", "val", "test", "all"])
        if name == "predict":
            sub.add_argument("--output", type=Path, help="CSV path (default stdout)")
        else:
            sub.add_argument("out_dir", type=Path)
            sub.add_argument("--no-figures", action="store_true")
        sub.set_defaults(func=func)

    sub = commands.add_parser("ablate", help="run the ablation grid")
    sub.add_argument("manifest", type=Path)
    sub.add_argument("out_dir", type=Path)
    sub.add_argument("--source", action="append",
                     help="name=path of a feature table (repeatable)")
    sub.add_argument("--extractors", help="comma list (default: all sources)")
    sub.add_argument("--families", help="comma list of classifier families")
    sub.add_argument("--fs", choices=["both", "on", "off"], default="both")
    sub.add_argument("--populations", help="comma list from male,female,all")
    sub.add_argument("--no-figures", action="store_true")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_ablate)

    sub = commands.add_parser("timing", help="per-gender step-3 timing comparison")
    sub.add_argument("manifest", type=Path)
    sub.add_argument("out_dir", type=Path)
    sub.add_argument("--face", type=Path, required=True)
    sub.add_argument("--voice", type=Path, required=True)
    sub.add_argument("--no-figures", action="store_true")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_timing)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

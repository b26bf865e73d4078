"""Command-line entry point for reproducible pipeline runs.

One binary, subcommands per pipeline stage. Every run takes a JSON config
(paths resolved relative to the config file) plus flag overrides, with flags
winning; the seed lands in every output manifest so reruns are byte-identical.
Errors print a machine-readable JSON summary on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from .corpus import Corpus, raw_clips_from_corpus, sample_moms
from .dsp import SourceSet, Waveform, read_wav, write_wav
from .errors import SepkitError
from .losses import LossConfig, mixit_loss, pit_loss, snr_loss
from .projection import estimate_fir, filter_to_wav

SCHEMA_VERSION = 1


@dataclass
class PipelineConfig:
    corpus_root: str = "corpus"
    annotations: str = ""            # defaults to corpus_root/annotations.tsv
    output_root: str = "out"
    seed: int = 0
    n_taps: int = 3200               # 200 ms at 16 kHz
    clip_len_s: float = 5.0
    mom_crop_len_s: float = 10.0
    raw_clip_len_s: float = 20.0
    gap_merge_s: float = 0.3
    regularization: float | None = None
    locations: tuple = ("Edinburgh", "TNO", "Idiap")


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    base = Path(".")
    if path:
        base = Path(path).resolve().parent
        data = json.loads(Path(path).read_text())
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise SepkitError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.corpus_root = str((base / cfg.corpus_root).resolve())
    cfg.annotations = str((base / (cfg.annotations or
                                   Path(cfg.corpus_root) / "annotations.tsv")).resolve())
    cfg.output_root = str((base / cfg.output_root).resolve())
    cfg.locations = tuple(cfg.locations)
    return cfg


def write_manifest(path, header: dict, rows) -> None:
    head = {"kind": "header", "schema_version": SCHEMA_VERSION}
    head.update(header)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_manifest(path):
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise SepkitError(f"{path}: not a manifest (missing header line)")
    return lines[0], lines[1:]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_make_fixture(args) -> int:
    from .fixture import make_fixture_corpus
    make_fixture_corpus(args.output, seed=args.seed, duration_s=args.duration)
    print(f"fixture corpus written to {args.output}")
    return 0


def cmd_estimate_filters(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "n_taps": args.n_taps,
                                    "regularization": args.regularization})
    corpus = Corpus(cfg.corpus_root)
    annotations = corpus_mod.read_annotations(cfg.annotations)
    segments = corpus_mod.segment_isolated_speech(annotations, cfg.gap_merge_s)
    sample_rate = corpus.load(corpus.headset_path(
        segments[0].meeting_id, segments[0].speaker_id)).sample_rate
    segments = [s for s in segments
                if round(s.duration * sample_rate) >= 4 * cfg.n_taps]
    out_dir = Path(cfg.output_root) / "filters"
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(item):
        index, seg = item
        headset = corpus.load(corpus.headset_path(seg.meeting_id, seg.speaker_id))
        distant = corpus.load(corpus.distant_path(seg.meeting_id))
        a = round(seg.start * sample_rate)
        b = round(seg.end * sample_rate)
        result = estimate_fir(headset.slice(a, b), distant.slice(a, b),
                              cfg.n_taps, cfg.regularization)
        seg_id = f"{seg.meeting_id}_{seg.speaker_id}_{index:04d}"
        filter_to_wav(result.filter, out_dir / f"{seg_id}_filter.wav")
        write_wav(result.filtered, out_dir / f"{seg_id}_filtered.wav", "float32")
        write_wav(result.residual, out_dir / f"{seg_id}_residual.wav", "float32")
        return {
            "segment_id": seg_id,
            "meeting_id": seg.meeting_id,
            "speaker_id": seg.speaker_id,
            "start_s": seg.start,
            "end_s": seg.end,
            "n_taps": cfg.n_taps,
            "residual_energy_ratio": result.residual_energy_ratio,
            "filter_wav": f"{seg_id}_filter.wav",
            "filtered_wav": f"{seg_id}_filtered.wav",
            "residual_wav": f"{seg_id}_residual.wav",
        }

    items = list(enumerate(segments))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run_one, items))
    else:
        rows = [run_one(item) for item in items]
    write_manifest(out_dir / "manifest.jsonl",
                   {"command": "estimate-filters", "seed": cfg.seed,
                    "n_taps": cfg.n_taps, "corpus_root": cfg.corpus_root},
                   rows)
    print(f"estimated {len(rows)} filters -> {out_dir}")
    return 0


def _headset_window(corpus, meta, sample_rate, n_window):
    """Raw close-talk audio for the S1 window of one synthetic example."""
    headset = corpus.load(corpus.headset_path(meta["s1_meeting"], meta["s1_speaker"]))
    start = round(meta["s1_start_s"] * sample_rate)
    return headset.slice(start, start + n_window)


def _headset_window_s2(corpus, meta, n_window):
    """S2's raw close-talk excerpt, placed at its window position."""
    headset = corpus.load(corpus.headset_path(meta["s2_meeting"], meta["s2_speaker"]))
    n_active = meta["s2_active_samples"]
    src = meta["s2_source_start_sample"]
    placed = np.zeros(n_window)
    placed[meta["s2_window_start"]:meta["s2_window_start"] + n_active] = \
        headset.samples[src:src + n_active]
    return Waveform(placed, headset.sample_rate)


def cmd_build_synthetic(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "n_taps": args.n_taps,
                                    "regularization": args.regularization})
    corpus = Corpus(cfg.corpus_root)
    dataset = corpus_mod.build_synthetic_set(
        corpus, count=args.count, seed=cfg.seed, n_taps=cfg.n_taps,
        regularization=cfg.regularization, gap_merge=cfg.gap_merge_s,
        clip_len=cfg.clip_len_s)
    out_dir = Path(cfg.output_root) / "synthetic"
    rows = []
    for example in dataset:
        ex_dir = out_dir / example.example_id
        ex_dir.mkdir(parents=True, exist_ok=True)
        write_wav(example.mixture, ex_dir / "mixture.wav", "float32")
        write_wav(example.s1, ex_dir / "s1.wav", "float32")
        write_wav(example.s2, ex_dir / "s2.wav", "float32")
        write_wav(example.noise, ex_dir / "noise.wav", "float32")
        sample_rate = example.mixture.sample_rate
        headset = _headset_window(corpus, example.meta, sample_rate,
                                  len(example.mixture))
        write_wav(headset, ex_dir / "s1_headset.wav", "float32")
        headset2 = _headset_window_s2(corpus, example.meta, len(example.mixture))
        write_wav(headset2, ex_dir / "s2_headset.wav", "float32")
        row = dict(example.meta)
        row.update({"dir": example.example_id,
                    "mixture_wav": "mixture.wav", "s1_wav": "s1.wav",
                    "s2_wav": "s2.wav", "noise_wav": "noise.wav",
                    "s1_headset_wav": "s1_headset.wav",
                    "s2_headset_wav": "s2_headset.wav"})
        rows.append(row)
    write_manifest(out_dir / "manifest.jsonl",
                   {"command": "build-synthetic", "seed": cfg.seed,
                    "count": args.count, "n_taps": cfg.n_taps,
                    "clip_len_s": cfg.clip_len_s,
                    "overlap_model": {"mu": dataset.model.mu,
                                      "sigma": dataset.model.sigma,
                                      "n_fitted": dataset.model.n_fitted}},
                   rows)
    print(f"built {len(rows)} synthetic examples -> {out_dir}")
    return 0


def cmd_sample_moms(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed})
    corpus = Corpus(cfg.corpus_root)
    raw = raw_clips_from_corpus(corpus, cfg.raw_clip_len_s)
    raw = [c for c in raw if c.location in cfg.locations]
    rng = np.random.default_rng(cfg.seed)
    out_dir = Path(cfg.output_root) / "moms"
    rows = []
    for index, mom in enumerate(sample_moms(raw, args.count, rng,
                                            cfg.mom_crop_len_s)):
        mom_dir = out_dir / f"mom{index:06d}"
        mom_dir.mkdir(parents=True, exist_ok=True)
        write_wav(mom.mixture1, mom_dir / "mixture1.wav", "float32")
        write_wav(mom.mixture2, mom_dir / "mixture2.wav", "float32")
        write_wav(mom.mom, mom_dir / "mom.wav", "float32")
        row = dict(mom.meta)
        row["dir"] = f"mom{index:06d}"
        rows.append(row)
    write_manifest(out_dir / "manifest.jsonl",
                   {"command": "sample-moms", "seed": cfg.seed,
                    "count": args.count, "crop_len_s": cfg.mom_crop_len_s},
                   rows)
    print(f"sampled {len(rows)} MoMs -> {out_dir}")
    return 0


def _load_estimates(est_root: Path, example_id: str) -> SourceSet:
    ex_dir = est_root / example_id
    paths = sorted(ex_dir.glob("source_*.wav"),
                   key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise SepkitError(f"no estimates under {ex_dir} (expected source_<k>.wav)")
    return SourceSet(tuple(read_wav(p) for p in paths))


def cmd_eval(args) -> int:
    if not args.baseline and not args.estimates:
        raise SepkitError("eval needs --estimates or --baseline")
    header, rows = read_manifest(args.manifest)
    dataset_dir = Path(args.manifest).parent
    report_rows = []
    summary = {}
    for row in rows:
        ex_dir = dataset_dir / row["dir"]
        mixture = read_wav(ex_dir / row["mixture_wav"])
        s1 = read_wav(ex_dir / row["s1_wav"])
        s2 = read_wav(ex_dir / row["s2_wav"])
        refs = SourceSet((s1, s2))
        if args.baseline == "identity":
            # distant-mic convention: the unprocessed mixture scores against
            # every reference, so SI-SNRi is identically zero
            records = [metrics_mod.si_snr_improvement(
                ref, mixture, mixture, args.cap_db,
                example_id=row["example_id"], reference_name=name,
                reference_kind="FH", estimate_index=0)
                for name, ref in (("s1", s1), ("s2", s2))]
        else:
            if args.baseline == "oracle":
                noise = read_wav(ex_dir / row["noise_wav"])
                ests = metrics_mod.baseline_separator(
                    mixture, "oracle", refs=SourceSet((s1, s2, noise))).estimates
            else:
                ests = _load_estimates(Path(args.estimates), row["example_id"])
            records = metrics_mod.evaluate_example(
                refs, mixture, ests, row["example_id"], cap_db=args.cap_db)
        for rec in records:
            report_rows.append(asdict(rec))
            key = f"si_snri_{rec.reference_name}_fh"
            summary.setdefault(key, []).append(rec.si_snr_improvement)
    summary_out = {key: {"mean_db": float(np.mean(vals)), "n": len(vals)}
                   for key, vals in sorted(summary.items())}
    if args.external_scores:
        external = {}
        for ex_id, system, metric, value in metrics_mod.read_external_scores(
                args.external_scores):
            external.setdefault(f"{metric}_{system}", []).append(value)
        for key, vals in sorted(external.items()):
            summary_out[key] = {"mean": float(np.mean(vals)), "n": len(vals)}
    out_path = Path(args.output or (dataset_dir / "report.jsonl"))
    write_manifest(out_path,
                   {"command": "eval", "manifest": str(args.manifest),
                    "baseline": args.baseline or "", "summary": summary_out},
                   report_rows)
    print(json.dumps(summary_out, indent=2, sort_keys=True))
    print(f"report -> {out_path}")
    return 0


def _read_sources(paths) -> SourceSet:
    return SourceSet(tuple(read_wav(p) for p in paths))


def cmd_loss(args) -> int:
    cfg = LossConfig(snr_max=args.snr_max)
    if args.loss == "snr":
        value = snr_loss(read_wav(args.ref), read_wav(args.est), cfg)
        out = {"loss_db": value, "snr_max": args.snr_max}
    elif args.loss == "pit":
        result = pit_loss(_read_sources(args.refs), _read_sources(args.ests),
                          cfg, backend=args.backend)
        out = {"total_loss_db": result.total_loss,
               "per_term_db": list(result.per_term),
               "permutation": list(result.assignment.mapping)}
    else:
        result = mixit_loss(read_wav(args.mix1), read_wav(args.mix2),
                            _read_sources(args.ests), cfg)
        out = {"total_loss_db": result.total_loss,
               "per_term_db": list(result.per_term),
               "assignment": list(result.assignment.assignment)}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_build_study(args) -> int:
    header, rows = read_manifest(args.manifest)
    dataset_dir = Path(args.manifest).parent
    systems = []
    for spec_item in args.system or []:
        name, _, directory = spec_item.partition("=")
        if not directory:
            raise SepkitError(f"--system wants name=dir, got {spec_item!r}")
        systems.append((name, Path(directory)))
    trials = []
    for row in rows[:args.trials] if args.trials else rows:
        ex_dir = dataset_dir / row["dir"]
        for target in args.targets.split(","):
            target = target.strip()
            ref_wav = ex_dir / (row["s1_headset_wav"] if target == "s1"
                                else row.get("s2_headset_wav", ""))
            if not ref_wav.exists():
                continue
            stimuli = [
                {"system": "headset_ref", "path": str(ref_wav)},
                {"system": "anchor_filtered_headset",
                 "path": str(ex_dir / row[f"{target}_wav"])},
                {"system": "anchor_distant_mic",
                 "path": str(ex_dir / row["mixture_wav"])},
            ]
            for name, directory in systems:
                path = directory / f"{row['example_id']}.wav"
                if not path.exists():
                    raise SepkitError(f"system {name}: missing {path}")
                stimuli.append({"system": name, "path": str(path)})
            trials.append({
                "id": f"{row['example_id']}_{target}",
                "reference": str(ref_wav),
                "hidden_reference": "headset_ref",
                "stimuli": stimuli,
                "prompt": args.prompt,
            })
    config = {"id": args.study_id, "protocol": args.protocol,
              "ratings_per_item": args.ratings_per_item,
              "prompt": args.prompt, "trials": trials}
    Path(args.output).write_text(json.dumps(config, indent=1, sort_keys=True))
    print(f"study config with {len(trials)} trials -> {args.output}")
    return 0


def cmd_serve(args) -> int:
    from .listening import create_app
    app = create_app(args.store)
    if args.study_config:
        config = json.loads(Path(args.study_config).read_text())
        study_id = app.state.store.create_study(config)
        print(f"created study {study_id}")
    import uvicorn
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_aggregate(args) -> int:
    text = Path(args.export).read_text().strip()
    records = []
    if text:
        try:
            data = json.loads(text)              # one JSON document
            records = data["records"] if isinstance(data, dict) else data
        except json.JSONDecodeError:
            records = [json.loads(line) for line in text.splitlines()
                       if line.strip()]          # JSONL fallback
    aggregates = metrics_mod.aggregate_all(records) if records else []
    print(f"{'system':<28} {'mean':>7} {'ci95':>7} {'n':>5}")
    for agg in aggregates:
        print(f"{agg.system_id:<28} {agg.mean:>7.2f} {agg.ci95_halfwidth:>7.2f} "
              f"{agg.n:>5d}")
    if args.output:
        Path(args.output).write_text(json.dumps(
            [asdict(a) for a in aggregates], indent=1, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepkit", description="separation-toolkit pipeline commands")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("make-fixture", help="generate the fixture corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=2002)
    p.add_argument("--duration", type=float, default=200.0)
    p.set_defaults(func=cmd_make_fixture)

    p = sub.add_parser("estimate-filters",
                       help="per-segment headset-to-distant FIR estimation")
    add_common(p)
    p.add_argument("--n-taps", dest="n_taps", type=int, default=None)
    p.add_argument("--regularization", type=float, default=None)
    p.set_defaults(func=cmd_estimate_filters)

    p = sub.add_parser("build-synthetic", help="build the synthetic overlap set")
    add_common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--n-taps", dest="n_taps", type=int, default=None)
    p.add_argument("--regularization", type=float, default=None)
    p.set_defaults(func=cmd_build_synthetic)

    p = sub.add_parser("sample-moms", help="sample mixture-of-mixture examples")
    add_common(p)
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=cmd_sample_moms)

    p = sub.add_parser("eval", help="SI-SNRi evaluation over a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimates", help="separator output dir (<id>/source_<k>.wav)")
    p.add_argument("--baseline", choices=["identity", "oracle"])
    p.add_argument("--cap-db", dest="cap_db", type=float, default=100.0)
    p.add_argument("--external-scores", dest="external_scores")
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", help="evaluate separation losses on WAV files")
    loss_sub = p.add_subparsers(dest="loss", required=True)
    q = loss_sub.add_parser("snr")
    q.add_argument("--ref", required=True)
    q.add_argument("--est", required=True)
    q.add_argument("--snr-max", dest="snr_max", type=float, default=30.0)
    q.set_defaults(func=cmd_loss)
    q = loss_sub.add_parser("pit")
    q.add_argument("--refs", nargs="+", required=True)
    q.add_argument("--ests", nargs="+", required=True)
    q.add_argument("--snr-max", dest="snr_max", type=float, default=30.0)
    q.add_argument("--backend", choices=["exhaustive", "assignment_solver"],
                   default="exhaustive")
    q.set_defaults(func=cmd_loss)
    q = loss_sub.add_parser("mixit")
    q.add_argument("--mix1", required=True)
    q.add_argument("--mix2", required=True)
    q.add_argument("--ests", nargs="+", required=True)
    q.add_argument("--snr-max", dest="snr_max", type=float, default=30.0)
    q.set_defaults(func=cmd_loss)

    p = sub.add_parser("build-study", help="study config from a synthetic manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--study-id", dest="study_id", required=True)
    p.add_argument("--protocol", choices=["MUSHRA", "MUSHIRA"], default="MUSHRA")
    p.add_argument("--targets", default="s1")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--ratings-per-item", dest="ratings_per_item", type=int, default=5)
    p.add_argument("--prompt", default="Rate the most prominent single speaker "
                                        "(the foreground speech) in each clip.")
    p.add_argument("--system", action="append",
                   help="name=dir with <example_id>.wav stimuli; repeatable")
    p.set_defaults(func=cmd_build_study)

    p = sub.add_parser("serve", help="run the listening-test service")
    p.add_argument("--store", required=True)
    p.add_argument("--study-config", dest="study_config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8351)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("aggregate", help="per-system rating table from an export")
    p.add_argument("--export", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_aggregate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SepkitError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

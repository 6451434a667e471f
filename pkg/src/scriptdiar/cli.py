"""Batch pipeline driver.

Subcommands: `synth` (write a synthetic episode), `extract` (script/ASR
alignment -> pseudo labels), `diarize` (unsupervised | unsupervised-kprime
| semi), `score` (DER + SCD between two RTTM files) and `sweep`
(pseudo-label-fraction ablation over a synthetic corpus).

Exit codes: 0 success, 1 internal failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import align as align_mod
from . import cluster as cluster_mod
from . import metrics as metrics_mod
from . import synth as synth_mod
from .core import (
    InvalidInput,
    SpeakerTimeline,
    project_labels,
    read_episode,
    read_pseudo_labels,
    read_rttm,
    write_pseudo_labels,
    write_rttm,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


@dataclass
class PipelineConfig:
    # clustering
    threshold_percentile: float = 0.95
    threshold_factor: float = 0.01
    k_max: int = 100
    normalize_rows: bool = True
    max_iters: int = 300
    # alignment
    max_span: int = 50
    deletion_percentile: float = 0.015
    confidence_threshold: float = 0.3
    min_overlap_fraction: float = 0.5
    # scoring
    collar: float = 0.0
    scd_tolerance: float = 0.1
    # shared
    subsegment_length: float = 1.0
    seed: int = 0

    @classmethod
    def load(cls, path: Optional[str], overrides: dict) -> "PipelineConfig":
        base = {}
        if path:
            base = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        bad = set(base) - known
        if bad:
            raise InvalidInput(f"unknown config keys: {sorted(bad)}")
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    def cluster_params(self) -> cluster_mod.ClusterParams:
        return cluster_mod.ClusterParams(
            threshold_percentile=self.threshold_percentile,
            threshold_factor=self.threshold_factor,
            k_max=self.k_max,
            normalize_rows=self.normalize_rows,
            max_iters=self.max_iters,
            subsegment_length=self.subsegment_length,
        )


def _read_script(path: Path) -> list[align_mod.DialogueLine]:
    lines = []
    for i, raw in enumerate(path.read_text().splitlines()):
        if not raw.strip():
            continue
        if "\t" in raw:
            speaker, text = raw.split("\t", 1)
        else:
            rec = json.loads(raw)
            speaker, text = rec["speaker"], rec["text"]
        lines.append(align_mod.DialogueLine(index=len(lines), speaker_name=speaker, text=text))
    return lines


def _read_asr(path: Path) -> list[align_mod.AsrWord]:
    payload = json.loads(path.read_text())
    return [
        align_mod.AsrWord(
            token=rec["word"],
            interval=align_mod.TimeInterval(float(rec["start"]), float(rec["end"])),
        )
        for rec in payload
    ]


def cmd_synth(args) -> int:
    config = synth_mod.SynthConfig(
        n_speakers=args.n_speakers,
        runtime=args.runtime,
        speaker_skew=args.speaker_skew,
        embedding_dim=args.embedding_dim,
        intra_speaker_noise=args.noise,
        script_edit_rate=args.script_edit_rate,
        seed=args.seed,
    )
    episode = synth_mod.generate_episode(config)
    synth_mod.write_synth_episode(args.out, episode, config)
    print(
        f"wrote episode to {args.out}: {episode.embeddings.n} sub-segments, "
        f"{len(episode.reference.speakers())} speakers, {len(episode.script)} lines"
    )
    return EXIT_OK


def cmd_extract(args, config: PipelineConfig) -> int:
    episode = read_episode(args.episode, config.subsegment_length)
    if episode.script_path is None or not episode.script_path.exists():
        print("no pseudo labels available: episode has no script", file=sys.stderr)
        return EXIT_INVALID
    if episode.asr_path is None or not episode.asr_path.exists():
        print("no pseudo labels available: episode has no ASR words", file=sys.stderr)
        return EXIT_INVALID
    lines = _read_script(episode.script_path)
    words = _read_asr(episode.asr_path)
    alignment = align_mod.align(
        lines, words, max_span=config.max_span,
        deletion_percentile=config.deletion_percentile,
    )
    ranges = align_mod.extract_ranges(
        alignment, lines, words, confidence_threshold=config.confidence_threshold
    )
    timeline = align_mod.ranges_to_timeline(ranges)
    pseudo = project_labels(
        timeline, episode.embeddings.subsegments, config.min_overlap_fraction
    )
    out = Path(args.out) if args.out else episode.root
    out.mkdir(parents=True, exist_ok=True)
    payload = [
        {
            "start": round(r.interval.start, 6),
            "end": round(r.interval.end, 6),
            "speaker": r.speaker_name,
            "cost": round(r.cost, 6),
        }
        for r in ranges
    ]
    (out / "labeled_ranges.json").write_text(json.dumps(payload, indent=2) + "\n")
    write_pseudo_labels(pseudo, out / "pseudo_labels.json")
    coverage, _ = align_mod.audit_pseudo_labels(ranges, total_lines=len(lines))
    print(
        f"coverage {coverage:.3f} ({len(ranges)}/{len(lines)} lines), "
        f"k'={pseudo.k_prime}, labeled sub-segments "
        f"{int((pseudo.labels > 0).sum())}/{pseudo.n}"
    )
    return EXIT_OK


def cmd_diarize(args, config: PipelineConfig) -> int:
    episode = read_episode(args.episode, config.subsegment_length)
    out = Path(args.out) if args.out else episode.root
    out.mkdir(parents=True, exist_ok=True)
    params = config.cluster_params()
    pseudo = None
    if args.method in ("semi", "unsupervised-kprime"):
        pseudo_path = Path(args.pseudo) if args.pseudo else episode.root / "pseudo_labels.json"
        if not pseudo_path.exists():
            print(
                f"method {args.method!r} needs pseudo labels; run the "
                f"`extract` subcommand first (missing {pseudo_path})",
                file=sys.stderr,
            )
            return EXIT_INVALID
        pseudo = read_pseudo_labels(pseudo_path)
    if args.method == "unsupervised":
        timeline, result = cluster_mod.diarize_unsupervised(
            episode.embeddings, params, seed=config.seed
        )
    elif args.method == "unsupervised-kprime":
        timeline, result = cluster_mod.diarize_unsupervised(
            episode.embeddings, params, k_override=pseudo.k_prime, seed=config.seed
        )
    else:
        timeline, result = cluster_mod.diarize_semisupervised(
            episode.embeddings, pseudo, params, seed=config.seed
        )
    file_id = episode.root.name or "episode"
    write_rttm(timeline, file_id, out / f"hypothesis_{args.method}.rttm")
    sizes = {int(j): int((result.labels == j).sum()) for j in range(1, result.k + 1)}
    dump = {
        "method": args.method,
        "k": result.k,
        "k_tilde": result.k_tilde,
        "k_prime": result.k_prime,
        "iterations": result.iterations,
        "cluster_sizes": sizes,
        "seed": config.seed,
    }
    (out / f"cluster_result_{args.method}.json").write_text(
        json.dumps(dump, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"{args.method}: k={result.k} (k~={result.k_tilde}, k'={result.k_prime}), "
        f"{result.iterations} iterations, wrote hypothesis_{args.method}.rttm"
    )
    return EXIT_OK


def _score(reference: SpeakerTimeline, hypothesis: SpeakerTimeline, config: PipelineConfig):
    breakdown = metrics_mod.der(reference, hypothesis, collar=config.collar)
    scd = metrics_mod.scd_f1(reference, hypothesis, tolerance=config.scd_tolerance)
    return breakdown, scd


def cmd_score(args, config: PipelineConfig) -> int:
    reference = read_rttm(args.reference)
    hypothesis = read_rttm(args.hypothesis)
    breakdown, scd = _score(reference, hypothesis, config)
    rows = [
        ("DER", f"{breakdown.der:.4f}"),
        ("  false alarm (s)", f"{breakdown.false_alarm:.3f}"),
        ("  missed (s)", f"{breakdown.missed:.3f}"),
        ("  speaker error (s)", f"{breakdown.speaker_error:.3f}"),
        ("  reference speech (s)", f"{breakdown.total_reference:.3f}"),
        ("SCD F1", f"{scd.f1:.4f}"),
        ("  precision", f"{scd.precision:.4f}"),
        ("  recall", f"{scd.recall:.4f}"),
    ]
    width = max(len(r[0]) for r in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    if args.out:
        record = {
            "der": breakdown.der,
            "false_alarm": breakdown.false_alarm,
            "missed": breakdown.missed,
            "speaker_error": breakdown.speaker_error,
            "total_reference": breakdown.total_reference,
            "scd_f1": scd.f1,
            "scd_precision": scd.precision,
            "scd_recall": scd.recall,
            "collar": config.collar,
            "scd_tolerance": config.scd_tolerance,
        }
        Path(args.out).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _corpus_episodes(corpus: Path) -> list[Path]:
    return sorted(p.parent for p in corpus.glob("*/episode.json"))


def run_sweep(
    corpus: Path,
    fractions: Sequence[float],
    seeds: Sequence[int],
    config: PipelineConfig,
    out: Path,
) -> dict:
    """Fraction ablation: semi-supervised at each pseudo-label coverage vs
    the unsupervised baselines, averaged over episodes and seeds."""
    episodes = _corpus_episodes(corpus)
    if not episodes:
        raise InvalidInput(f"no episodes under {corpus}")
    params = config.cluster_params()
    per_episode = []
    rows: dict[str, list[dict]] = {}
    for ep_dir in episodes:
        episode = read_episode(ep_dir, config.subsegment_length)
        synth_config = synth_mod.SynthConfig.from_json(ep_dir / "synth_config.json")
        reference = read_rttm(ep_dir / "reference.rttm")
        k_true = len(reference.speakers())
        for seed in seeds:
            run_cfg = PipelineConfig(**{**config.__dict__, "seed": seed})
            unsup_tl, unsup_res = cluster_mod.diarize_unsupervised(
                episode.embeddings, params, seed=seed
            )
            u_der, u_scd = _score(reference, unsup_tl, run_cfg)
            pseudo_full = synth_mod.generate_pseudo_labels(
                reference, synth_config, episode.embeddings.subsegments
            )
            kp_tl, kp_res = cluster_mod.diarize_unsupervised(
                episode.embeddings, params,
                k_override=max(1, pseudo_full.k_prime), seed=seed,
            )
            kp_der, kp_scd = _score(reference, kp_tl, run_cfg)
            rows.setdefault("unsupervised", []).append(
                {"episode": ep_dir.name, "seed": seed, "der": u_der.der,
                 "scd_f1": u_scd.f1, "k": unsup_res.k, "k_tilde": unsup_res.k_tilde,
                 "k_true": k_true}
            )
            rows.setdefault("unsupervised-kprime", []).append(
                {"episode": ep_dir.name, "seed": seed, "der": kp_der.der,
                 "scd_f1": kp_scd.f1, "k": kp_res.k, "k_true": k_true}
            )
            for frac in fractions:
                pseudo = synth_mod.generate_pseudo_labels(
                    reference, synth_config, episode.embeddings.subsegments,
                    coverage=frac,
                )
                semi_tl, semi_res = cluster_mod.diarize_semisupervised(
                    episode.embeddings, pseudo, params, seed=seed
                )
                s_der, s_scd = _score(reference, semi_tl, run_cfg)
                rows.setdefault(f"semi@{frac}", []).append(
                    {"episode": ep_dir.name, "seed": seed, "der": s_der.der,
                     "scd_f1": s_scd.f1, "k": semi_res.k,
                     "k_tilde": semi_res.k_tilde, "k_prime": semi_res.k_prime,
                     "k_true": k_true}
                )
    summary = {}
    for name, recs in rows.items():
        summary[name] = {
            "mean_der": float(np.mean([r["der"] for r in recs])),
            "mean_scd_f1": float(np.mean([r["scd_f1"] for r in recs])),
            "mean_k": float(np.mean([r["k"] for r in recs])),
            "mean_abs_k_error": float(
                np.mean([abs(r["k"] - r["k_true"]) for r in recs])
            ),
            "runs": len(recs),
        }
    report = {
        "fractions": list(fractions),
        "seeds": list(seeds),
        "episodes": [e.name for e in episodes],
        "summary": summary,
        "runs": rows,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    scatter = [
        {"episode": r["episode"], "seed": r["seed"], "k_true": r["k_true"],
         "k_pred": r["k"], "method": name}
        for name in rows
        for r in rows[name]
        if name == "unsupervised" or name.startswith("semi@")
    ]
    (out / "speaker_count_scatter.json").write_text(
        json.dumps(scatter, indent=2, sort_keys=True) + "\n"
    )
    lines = [f"{'method':<24} {'mean DER':>9} {'mean SCD':>9} {'mean k':>7} {'|k err|':>8}"]
    for name in sorted(summary):
        s = summary[name]
        lines.append(
            f"{name:<24} {s['mean_der']:>9.4f} {s['mean_scd_f1']:>9.4f} "
            f"{s['mean_k']:>7.2f} {s['mean_abs_k_error']:>8.2f}"
        )
    table = "\n".join(lines)
    (out / "sweep_report.txt").write_text(table + "\n")
    print(table)
    return report


def cmd_sweep(args, config: PipelineConfig) -> int:
    fractions = [float(x) for x in args.fractions.split(",") if x]
    seeds = [int(x) for x in args.seeds.split(",") if x != ""]
    run_sweep(Path(args.corpus), fractions, seeds, config, Path(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scriptdiar",
        description="Script-informed semi-supervised speaker diarization toolkit",
    )
    parser.add_argument("--config", help="JSON config file with PipelineConfig fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic episode directory")
    p.add_argument("--out", required=True)
    p.add_argument("--n-speakers", type=int, default=40)
    p.add_argument("--runtime", type=float, default=900.0)
    p.add_argument("--speaker-skew", type=float, default=1.0)
    p.add_argument("--embedding-dim", type=int, default=512)
    p.add_argument("--noise", type=float, default=0.9)
    p.add_argument("--script-edit-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("extract", help="align script to ASR and emit pseudo labels")
    p.add_argument("--episode", required=True)
    p.add_argument("--out")
    for flag, typ in (
        ("--max-span", int),
        ("--deletion-percentile", float),
        ("--confidence-threshold", float),
        ("--min-overlap-fraction", float),
    ):
        p.add_argument(flag, type=typ)

    p = sub.add_parser("diarize", help="run a diarization method on an episode")
    p.add_argument("--episode", required=True)
    p.add_argument(
        "--method",
        choices=["unsupervised", "unsupervised-kprime", "semi"],
        required=True,
    )
    p.add_argument("--pseudo", help="pseudo label file (default: episode dir)")
    p.add_argument("--out")
    for flag, typ in (
        ("--threshold-percentile", float),
        ("--threshold-factor", float),
        ("--k-max", int),
        ("--max-iters", int),
        ("--seed", int),
    ):
        p.add_argument(flag, type=typ)

    p = sub.add_parser("score", help="score a hypothesis RTTM against a reference")
    p.add_argument("--reference", required=True)
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--out")
    p.add_argument("--collar", type=float)
    p.add_argument("--scd-tolerance", type=float)

    p = sub.add_parser("sweep", help="pseudo-label fraction ablation over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fractions", default="0.01,0.03,0.10,1.0")
    p.add_argument("--seeds", default="0")
    p.add_argument("--seed", type=int)

    return parser


_OVERRIDE_KEYS = (
    "threshold_percentile", "threshold_factor", "k_max", "max_iters",
    "max_span", "deletion_percentile", "confidence_threshold",
    "min_overlap_fraction", "collar", "scd_tolerance", "seed",
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    try:
        config = PipelineConfig.load(args.config, overrides)
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "extract":
            return cmd_extract(args, config)
        if args.command == "diarize":
            return cmd_diarize(args, config)
        if args.command == "score":
            return cmd_score(args, config)
        if args.command == "sweep":
            return cmd_sweep(args, config)
        parser.error(f"unknown command {args.command}")
    except (InvalidInput, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

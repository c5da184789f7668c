"""Command-line entry points: generate, eval, identify, annotate-dump."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from adgen.config import ConfigError, RunConfig
from adgen.pipeline import run_annotate_dump, run_eval, run_identify, run_pipeline

log = logging.getLogger("adgen")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML-style config file")
    g = parser.add_argument_group("inputs")
    g.add_argument("--clips", type=Path, help="clip manifest (JSON-lines)")
    g.add_argument("--frames-root", dest="frames_root", type=Path)
    g.add_argument("--detections", type=Path, help="detection interchange file")
    g.add_argument("--subtitles", type=Path, help=".srt file or directory of <movie_id>.srt")
    g.add_argument("--cast", type=Path, help="cast list .json or directory")
    g.add_argument("--cast-embeddings", dest="cast_embeddings", type=Path)
    g.add_argument("--ground-truth", dest="ground_truth", type=Path)
    g.add_argument("--boundaries-dir", dest="boundaries_dir", type=Path)
    g.add_argument("--output-dir", dest="output_dir", type=Path)
    g.add_argument("--cache-dir", dest="cache_dir", type=Path)
    k = parser.add_argument_group("knobs")
    k.add_argument("--overlay-mode", dest="overlay_mode",
                   choices=("none", "bbox_only", "name_only", "bbox_and_name"))
    k.add_argument("--context-t", dest="context_t", type=int)
    k.add_argument("--context-ad", dest="context_ad", action="store_const", const=True)
    k.add_argument("--exemplar-k", dest="exemplar_k", type=int)
    k.add_argument("--tau", type=float)
    k.add_argument("--length-policy", dest="length_policy",
                   help='"none", "fixed:N", or "gt_length"')
    k.add_argument("--no-ad-style", dest="ad_style", action="store_const", const=False)
    k.add_argument("--mode", choices=("one-stage", "two-stage"))
    k.add_argument("--frame-level-only", dest="frame_level_only",
                   action="store_const", const=True)
    k.add_argument("--template-version", dest="template_version")
    b = parser.add_argument_group("backend")
    b.add_argument("--backend", choices=("mock-echo", "mock-fixed", "mock-fail", "http"))
    b.add_argument("--endpoint")
    b.add_argument("--model")
    b.add_argument("--api-key-env", dest="api_key_env")
    b.add_argument("--concurrency", type=int)
    b.add_argument("--retries", type=int)
    b.add_argument("--mock-fail-times", dest="mock_fail_times", type=int)
    b.add_argument("--dump-annotated", dest="dump_annotated", type=Path)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k in RunConfig.field_names() and v is not None
    }
    return cfg.apply_overrides(overrides)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="adgen", description="Audio description generation for movie clips"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="run the full AD generation pipeline")
    _add_common(p_gen)

    p_eval = sub.add_parser("eval", help="score generated ADs against ground truth")
    _add_common(p_eval)
    p_eval.add_argument("--outputs", type=Path, help="outputs.jsonl to score")

    p_id = sub.add_parser("identify", help="character recognition only")
    _add_common(p_id)

    p_dump = sub.add_parser("annotate-dump", help="save annotated prompt frames as PNG")
    _add_common(p_dump)
    p_dump.add_argument("--out", type=Path, required=True, help="directory for PNGs")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = _config_from_args(args)
        if args.command == "generate":
            manifest, outputs = run_pipeline(cfg)
            totals = manifest.to_dict()["totals"]
            log.info(
                "generated %d ADs (%d cached, %d failed) -> %s",
                totals["done"] + totals["cached"], totals["cached"], totals["failed"],
                Path(cfg.output_dir) / "outputs.jsonl",
            )
            return 1 if manifest.failed else 0
        if args.command == "eval":
            outputs_path = args.outputs or Path(cfg.output_dir) / "outputs.jsonl"
            report = run_eval(cfg, outputs_path)
            print(f"ROUGE-L        {report.rouge_l:.4f}")
            print(f"CIDEr-D        {report.cider_d:.4f}")
            print(f"char recall    {report.char_recall:.4f}")
            print(f"char precision {report.char_precision:.4f}")
            return 0
        if args.command == "identify":
            rows = run_identify(cfg)
            for row in rows:
                print(f"{row['clip_id']}: {', '.join(row['names']) or '-'}")
            return 0
        if args.command == "annotate-dump":
            n = run_annotate_dump(cfg, args.out)
            log.info("wrote %d annotated frames under %s", n, args.out)
            return 0
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

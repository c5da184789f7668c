"""Command-line entry: run extraction over a frames tree."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from adextract.extract import ExtractionJob, extract

log = logging.getLogger("adextract")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ad-extract",
        description="Produce detection/embedding interchange files from frames",
    )
    parser.add_argument("--frames-root", type=Path, required=True,
                        help="directory of per-clip frame directories")
    parser.add_argument("--out-detections", type=Path, required=True)
    parser.add_argument("--cast", type=Path, help="cast list JSON (for the gallery)")
    parser.add_argument("--cast-images-root", type=Path,
                        help="base directory for profile_image paths")
    parser.add_argument("--out-gallery", type=Path)
    parser.add_argument("--clip-ids", nargs="*", default=[])
    parser.add_argument("--person-detector", default="blob")
    parser.add_argument("--face-detector", default="topblob")
    parser.add_argument("--face-embedder", default="grid8x8")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if (args.cast is None) != (args.out_gallery is None):
        parser.error("--cast and --out-gallery must be used together")

    job = ExtractionJob(
        frames_root=args.frames_root,
        output_detections=args.out_detections,
        cast_file=args.cast,
        cast_images_root=args.cast_images_root,
        output_gallery=args.out_gallery,
        person_detector=args.person_detector,
        face_detector=args.face_detector,
        face_embedder=args.face_embedder,
        clip_ids=list(args.clip_ids),
    )
    counts = extract(job)
    log.info(
        "processed %(clips)d clips / %(frames)d frames: "
        "%(persons)d person detections, %(faces)d faces",
        counts,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Generate a small synthetic movie dataset for trying the CLI offline.

Writes frames, a detection/embedding interchange file, a cast list with
profile embeddings, subtitles, ground-truth ADs, a clip manifest, and a
ready-to-run TOML config under the target directory.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from conftest import build_dataset  # noqa: E402


CONFIG_TEMPLATE = """\
[paths]
clips = "{root}/clips.jsonl"
frames_root = "{root}/frames"
detections = "{root}/detections.jsonl"
subtitles = "{root}/movie.srt"
cast = "{root}/cast.json"
cast_embeddings = "{root}/gallery.jsonl"
ground_truth = "{root}/ground_truth.jsonl"
output_dir = "{root}/out"
cache_dir = "{root}/cache"

[prompt]
length_policy = "fixed:10"
ad_style = true
mode = "one-stage"

[context]
context_t = 2

[backend]
backend = "mock-echo"
concurrency = 3
"""


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("target", type=Path, help="directory to create")
    args = parser.parse_args()

    args.target.mkdir(parents=True, exist_ok=True)
    build_dataset(args.target)
    config_path = args.target / "demo.toml"
    config_path.write_text(CONFIG_TEMPLATE.format(root=args.target.resolve()))
    print(f"demo dataset written to {args.target}")
    print("try:")
    print(f"  adgen generate --config {config_path}")
    print(f"  adgen eval --config {config_path}")
    print(f"  adgen identify --config {config_path}")


if __name__ == "__main__":
    main()

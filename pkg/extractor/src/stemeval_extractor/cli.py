"""stemeval-extract: embed a WAV clip into an EMB1 file.

    stemeval-extract --model clap-laion-music --in clip.wav --out clip.emb

Exit code 1 covers bad input; 3 means the model weights are not
available locally (the message tells you how to fetch them).
"""

import argparse
import json
import sys

from .errors import ExtractorError, ModelUnavailableError
from .extract import extract
from .models import REGISTRY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stemeval-extract", description=__doc__)
    parser.add_argument("--model", required=True, choices=sorted(REGISTRY),
                        help="embedding model")
    parser.add_argument("--in", dest="input", required=True, help="input WAV")
    parser.add_argument("--out", dest="output", required=True,
                        help="output EMB1 path (sidecar written as <out>.json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sidecar = extract(args.input, args.model, args.output)
    except ModelUnavailableError as exc:
        print(json.dumps({"error": "ModelUnavailableError", "message": str(exc)}),
              file=sys.stderr)
        return 3
    except (ExtractorError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    print(json.dumps(sidecar, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())

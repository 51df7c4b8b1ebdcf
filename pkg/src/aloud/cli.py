"""Command-line interface: ``aloud convert`` and ``aloud drift``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import AloudError
from .pipeline import RunConfig, run_convert, run_drift


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aloud",
        description="Compile an EPUB into an EPUB 3 audiobook with "
                    "synchronized sentence highlighting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("convert", help="narrate an EPUB and emit Media Overlays")
    conv.add_argument("input", help="source EPUB file")
    conv.add_argument("--output", "-o", help="destination EPUB (default: <input>_readaloud.epub)")
    conv.add_argument("--voice", default="", help="reference voice sample (WAV) for cloning engines")
    conv.add_argument("--language", default="en", help="BCP-47 language code (default: en)")
    conv.add_argument("--engine", default="mock",
                      help='"mock" or a TTS bridge command line (default: mock)')
    conv.add_argument("--gpu", action="store_true",
                      help="ask the bridge process to use an accelerator")
    conv.add_argument("--skip-audio", action="store_true",
                      help="debug mode: build overlays with cheap placeholder audio")
    conv.add_argument("--delta", type=float, default=0.15, metavar="SECONDS",
                      help="silence between sentences (default: 0.15)")
    conv.add_argument("--fade-ms", type=float, default=50.0, metavar="N",
                      help="linear fade-out at each sentence end (default: 50)")
    conv.add_argument("--max-chars", type=int, default=200, metavar="N",
                      help="pre-split sentences longer than this (default: 200)")
    conv.add_argument("--min-chars", type=int, default=60, metavar="N",
                      help="merge adjacent sentences shorter than this (default: 60)")
    conv.add_argument("--jobs", type=int, default=0, metavar="N",
                      help="parallel chapter workers (default: logical processors)")
    conv.add_argument("--encoder", default=None, metavar="CMD",
                      help="external audio encoder template with {in} and {out} "
                           "placeholders (output becomes MP3)")

    dr = sub.add_parser("drift", help="compare two Media-Overlay EPUBs")
    dr.add_argument("reference", help="EPUB treated as ground truth")
    dr.add_argument("candidate", help="EPUB under evaluation")
    dr.add_argument("--csv", help="write per-sentence drift rows here")
    dr.add_argument("--json", help="write the summary report here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            output = args.output or _default_output(args.input)
            config = RunConfig(
                input_epub=args.input,
                output_epub=output,
                voice=args.voice,
                language=args.language,
                engine=args.engine,
                gpu=args.gpu,
                skip_audio=args.skip_audio,
                delta_s=args.delta,
                fade_ms=args.fade_ms,
                lambda_plus=args.max_chars,
                lambda_minus=args.min_chars,
                jobs=args.jobs,
                encoder_cmd=args.encoder,
            )
            result = run_convert(config)
            print(f"wrote {result.output_path}: {len(result.chapters)} chapter(s), "
                  f"{result.n_sentences} sentence(s), "
                  f"{result.total_duration_s:.1f}s of audio")
            return 0
        report = run_drift(args.reference, args.candidate,
                           csv_path=args.csv, json_path=args.json)
        return 0 if report.n_matched else 1
    except (AloudError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _default_output(input_path: str) -> str:
    p = Path(input_path)
    return str(p.with_name(f"{p.stem}_readaloud{p.suffix or '.epub'}"))


if __name__ == "__main__":
    sys.exit(main())

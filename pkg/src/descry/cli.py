"""Command-line front end: pyramid, profile, segment, describe, annotate.

Standard output carries machine-readable results only; diagnostics go to
standard error. Exit codes: 0 success, 1 bad arguments or config, 2 unreadable
or malformed input image, 3 malformed knowledge base.
"""

import argparse
import json
import sys
from pathlib import Path

from .density import density_curve, select_working_scale
from .knowledge import KnowledgeBaseError, annotate, annotation_to_document, read_knowledge_base
from .pgm import PgmError, read_pgm, write_pgm
from .pyramid import build_pyramid
from .registry import registry_to_document
from .segment import SegmentationConfig, run_pipeline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BAD_IMAGE = 2
EXIT_BAD_KB = 3

_CONFIG_KEYS = {
    "delta": float,
    "tau": float,
    "max_refine_iters": int,
    "stop_threshold": int,
    "drop_ratio": float,
    "scale_selection": str,
    "theta": float,
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser, with_out: bool):
    parser.add_argument("--input", "-i", required=True, help="input PGM image (P2 or P5)")
    if with_out:
        parser.add_argument("--out", "-o", required=True, help="output directory")
    parser.add_argument("--config", help="config file with 'key = value' lines")
    parser.add_argument("--delta", type=float, help="top-level region growing tolerance")
    parser.add_argument("--tau", type=float, help="descent deviation threshold")
    parser.add_argument("--max-refine-iters", type=int, help="refinement pass cap per level")
    parser.add_argument("--stop-threshold", type=int, help="pyramid top size in pixels")
    parser.add_argument("--scale-selection", choices=("fixed", "density"),
                        help="how the segmentation start level is chosen")
    parser.add_argument("--drop-ratio", type=float, help="density falloff ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="descry", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("pyramid", help="write every pyramid level as PGM")
    _add_common(p, with_out=True)

    p = commands.add_parser("profile", help="print the density curve as CSV")
    _add_common(p, with_out=False)

    p = commands.add_parser("segment", help="write per-level label maps")
    _add_common(p, with_out=True)
    p.add_argument("--dump-levels", action="store_true",
                   help="also write each pyramid level as PGM")

    p = commands.add_parser("describe", help="write the object registry as JSON")
    _add_common(p, with_out=True)

    p = commands.add_parser("annotate", help="label objects against a knowledge base")
    _add_common(p, with_out=True)
    p.add_argument("--kb", required=True, help="knowledge base JSON file")
    p.add_argument("--theta", type=float, help="context score threshold")

    return parser


def _parse_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: invalid value {value!r} for {key}") from None
    return values


def _resolve_settings(args) -> dict:
    settings = {
        "delta": 15.0,
        "tau": 25.0,
        "max_refine_iters": 10,
        "stop_threshold": 100,
        "drop_ratio": 0.8,
        "scale_selection": "fixed",
        "theta": 0.5,
    }
    if args.config:
        settings.update(_parse_config_file(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _make_config(settings) -> SegmentationConfig:
    try:
        return SegmentationConfig(
            delta=settings["delta"],
            tau=settings["tau"],
            max_refine_iters=settings["max_refine_iters"],
            stop_threshold=settings["stop_threshold"],
            drop_ratio=settings["drop_ratio"],
            scale_selection=settings["scale_selection"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load_image(path: str):
    try:
        return read_pgm(path)
    except OSError as exc:
        raise PgmError(f"cannot read image {path}: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, document) -> None:
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _write_label_csv(path: Path, label_map) -> None:
    h, w = label_map.shape
    flat = label_map.ravel().tolist()
    lines = ["row,col,label"]
    i = 0
    for r in range(h):
        for c in range(w):
            lines.append(f"{r},{c},{flat[i]}")
            i += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_pyramid(args) -> int:
    image = _load_image(args.input)
    settings = _resolve_settings(args)
    cfg = _make_config(settings)
    out = _out_dir(args)
    pyramid = build_pyramid(image, cfg.stop_threshold)
    for k, level in enumerate(pyramid.levels):
        write_pgm(out / f"level_{k:02d}.pgm", level)
    return EXIT_OK


def _cmd_profile(args) -> int:
    image = _load_image(args.input)
    settings = _resolve_settings(args)
    cfg = _make_config(settings)
    pyramid = build_pyramid(image, cfg.stop_threshold)
    curve = density_curve(pyramid)
    print("level,width,height,density_bits")
    for k, (level, density) in enumerate(zip(pyramid.levels, curve)):
        h, w = level.shape
        print(f"{k},{w},{h},{density:.6f}")
    print(f"selected_scale={select_working_scale(curve, cfg.drop_ratio)}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    image = _load_image(args.input)
    settings = _resolve_settings(args)
    cfg = _make_config(settings)
    out = _out_dir(args)
    result = run_pipeline(image, cfg)
    for level, label_map in sorted(result.label_maps.items(), reverse=True):
        _write_label_csv(out / f"labels_level_{level:02d}.csv", label_map)
        write_pgm(out / f"labels_level_{level:02d}.pgm", label_map % 256)
    if args.dump_levels:
        for k, level in enumerate(result.pyramid.levels):
            write_pgm(out / f"level_{k:02d}.pgm", level)
    return EXIT_OK


def _cmd_describe(args) -> int:
    image = _load_image(args.input)
    settings = _resolve_settings(args)
    cfg = _make_config(settings)
    out = _out_dir(args)
    result = run_pipeline(image, cfg)
    _write_json(out / "registry.json", registry_to_document(result.registry))
    return EXIT_OK


def _cmd_annotate(args) -> int:
    kb = _read_kb(args.kb)
    image = _load_image(args.input)
    settings = _resolve_settings(args)
    cfg = _make_config(settings)
    out = _out_dir(args)
    result = run_pipeline(image, cfg)
    annotation = annotate(result.registry, kb, theta=settings["theta"])
    _write_json(out / "annotation.json", annotation_to_document(annotation))
    return EXIT_OK


def _read_kb(path: str):
    try:
        return read_knowledge_base(path)
    except OSError as exc:
        raise KnowledgeBaseError(f"cannot read knowledge base {path}: {exc}") from None


_COMMANDS = {
    "pyramid": _cmd_pyramid,
    "profile": _cmd_profile,
    "segment": _cmd_segment,
    "describe": _cmd_describe,
    "annotate": _cmd_annotate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"descry: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PgmError as exc:
        print(f"descry: error: {exc}", file=sys.stderr)
        return EXIT_BAD_IMAGE
    except KnowledgeBaseError as exc:
        print(f"descry: error: {exc}", file=sys.stderr)
        return EXIT_BAD_KB


if __name__ == "__main__":
    sys.exit(main())

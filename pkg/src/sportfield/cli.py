"""Command-line driver.

Exit codes: 0 ok, 1 missing/unreadable file, 2 field-file format error,
3 scene schema error, 4 infeasible synthetic scene, 5 acceptance failure
(``roundtrip`` / ``loss --grad-check``), 64 bad command-line usage.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _kernels
from .core import DomainError
from .decode import DecodeConfig, decode
from .encode import encode
from .harness import fieldfile, scenefile
from .harness.evaluate import (
    breakdown_csv,
    default_jobs,
    evaluate,
    pr_csv,
    report_to_doc,
    roc_csv,
    summary_line,
)
from .harness.synth import InfeasibleError, SynthConfig, synth_scene
from .loss import LossWeights, finite_difference_check, loss_total

EXIT_OK = 0
EXIT_IO = 1
EXIT_FORMAT = 2
EXIT_SCHEMA = 3
EXIT_INFEASIBLE = 4
EXIT_ACCEPTANCE = 5
EXIT_USAGE = 64

OKS_TOL = 1e-6
QUALITY_TOL = 1e-9


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _jobs(args) -> int:
    return args.jobs if args.jobs is not None else default_jobs()


def cmd_synth(args):
    cfg = SynthConfig(
        seed=args.seed,
        n_players=args.players,
        ball=args.ball,
        min_separation=args.min_separation,
        width=args.width,
        height=args.height,
        stride=args.stride,
    )
    scene = synth_scene(cfg)
    _emit(scenefile.dumps(scenefile.scene_to_doc(scene)), args.output)
    return EXIT_OK


def cmd_encode(args):
    scene = scenefile.doc_to_scene(scenefile.load_doc(args.scene))
    data = fieldfile.dumps(encode(scene))
    if args.output in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(args.output).write_bytes(data)
    return EXIT_OK


def cmd_decode(args):
    fields = fieldfile.read(args.fields)
    result = decode(fields, DecodeConfig(keypoint_threshold=args.threshold, jobs=_jobs(args)))
    _emit(scenefile.dumps(scenefile.result_to_doc(result, fields.grid)), args.output)
    return EXIT_OK


def _pairs(pred_path, gt_path):
    pred_path, gt_path = Path(pred_path), Path(gt_path)
    if pred_path.is_dir() != gt_path.is_dir():
        raise FileNotFoundError("--pred and --gt must both be files or both be directories")
    if pred_path.is_dir():
        names = sorted(p.name for p in pred_path.glob("*.json"))
        files = [(pred_path / n, gt_path / n) for n in names]
    else:
        files = [(pred_path, gt_path)]
    pairs = []
    for p, g in files:
        pred = scenefile.doc_to_prediction(scenefile.load_doc(p))
        gt = scenefile.doc_to_scene(scenefile.load_doc(g))
        pairs.append((pred, gt))
    return pairs


def cmd_eval(args):
    pairs = _pairs(args.pred, args.gt)
    report, _ = evaluate(pairs, court=args.court, jobs=_jobs(args))
    _emit(_json(report_to_doc(report, len(pairs))), args.output)
    if args.roc:
        Path(args.roc).write_text(roc_csv(report))
    if args.pr:
        Path(args.pr).write_text(pr_csv(report))
    if args.output not in (None, "-"):
        print(summary_line(report))
    return EXIT_OK


def cmd_breakdown(args):
    pairs = _pairs(args.pred, args.gt)
    _, breakdown = evaluate(pairs, court=args.court, jobs=_jobs(args))
    _emit(breakdown_csv(breakdown), args.output)
    return EXIT_OK


def cmd_loss(args):
    pred = fieldfile.read(args.pred)
    target = fieldfile.read(args.gt)
    w = LossWeights()
    doc = {"loss": loss_total(pred, target, w).as_dict()}
    status = EXIT_OK
    if args.grad_check:
        errs = finite_difference_check(pred, target, w, max_entries=args.max_entries, seed=0)
        ok = max(errs.values()) <= args.tolerance
        doc["grad_check"] = {"max_rel_error": errs, "tolerance": args.tolerance, "pass": ok}
        status = EXIT_OK if ok else EXIT_ACCEPTANCE
    _emit(_json(doc), args.output)
    return status


def run_roundtrip(seed: int, players: int, ball: bool = True, jobs: int = 1):
    """synth -> encode -> field file bytes -> decode -> result doc -> eval."""
    scene = synth_scene(SynthConfig(seed=seed, n_players=players, ball=ball))
    fields = fieldfile.loads(fieldfile.dumps(encode(scene)))
    result = decode(fields, DecodeConfig(jobs=jobs))
    doc = scenefile.result_to_doc(result, fields.grid)
    pred = scenefile.doc_to_prediction(json.loads(scenefile.dumps(doc)))
    report, breakdown = evaluate([(pred, scene)], court=True, jobs=jobs)
    return scene, result, report


def roundtrip_ok(report, n_players: int) -> bool:
    return (
        abs(report.pSQ - 1.0) <= QUALITY_TOL
        and abs(report.pDQ - 1.0) <= QUALITY_TOL
        and len(report.oks) == n_players
        and all(abs(v - 1.0) <= OKS_TOL for v in report.oks)
    )


def cmd_roundtrip(args):
    scene, _, report = run_roundtrip(args.seed, args.players, args.ball, _jobs(args))
    _emit(_json(report_to_doc(report, 1)), args.output)
    print(summary_line(report), file=sys.stderr)
    if not roundtrip_ok(report, len(scene.players)):
        print("roundtrip: decoded scene does not reproduce the ground truth", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sportfield", description=__doc__.splitlines()[0])
    p.add_argument("--backend", action="store_true", help="print the kernel backend and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def jobs_arg(sp):
        sp.add_argument("--jobs", type=int, default=None, help="worker threads (default: $SPORTFIELD_JOBS or 1)")

    s = sub.add_parser("synth", help="generate a synthetic scene")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--players", type=int, required=True)
    s.add_argument("--ball", action="store_true")
    s.add_argument("--min-separation", type=float, default=24.0)
    s.add_argument("--width", type=int, default=320)
    s.add_argument("--height", type=int, default=320)
    s.add_argument("--stride", type=int, default=8)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("encode", help="scene -> target field file")
    s.add_argument("scene")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="field file -> result document")
    s.add_argument("fields")
    s.add_argument("--threshold", type=float, default=0.1)
    s.add_argument("-o", "--output")
    jobs_arg(s)
    s.set_defaults(func=cmd_decode)

    for name, func, help_ in (
        ("eval", cmd_eval, "quality report for results against ground truth"),
        ("breakdown", cmd_breakdown, "keypoint error categories as CSV"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--pred", required=True, help="result document or directory of them")
        s.add_argument("--gt", required=True, help="scene document or directory of them")
        s.add_argument("--court", action="store_true", help="drop items outside the gt court polygon")
        s.add_argument("-o", "--output")
        if name == "eval":
            s.add_argument("--roc")
            s.add_argument("--pr")
        jobs_arg(s)
        s.set_defaults(func=func)

    s = sub.add_parser("loss", help="training loss between two field files")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--grad-check", action="store_true")
    s.add_argument("--max-entries", type=int, default=200, help="entries sampled per tensor")
    s.add_argument("--tolerance", type=float, default=1e-4)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_loss)

    s = sub.add_parser("roundtrip", help="synth -> encode -> decode -> eval self-check")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--players", type=int, required=True)
    s.add_argument("--ball", action="store_true")
    s.add_argument("-o", "--output")
    jobs_arg(s)
    s.set_defaults(func=cmd_roundtrip)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend:
        print(_kernels.BACKEND)
        return EXIT_OK
    if args.command is None:
        parser.error("a subcommand is required")
    try:
        return args.func(args)
    except fieldfile.FormatError as exc:
        print(f"{args.command}: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except scenefile.SchemaError as exc:
        print(f"{args.command}: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleError as exc:
        print(f"{args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"{args.command}: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())

"""Batch command-line front end.

Subcommands: bank, decompose, anchors, stats, eval, schedule, simulate-train.
Every command is deterministic given its flags and seed. Exit codes: 0 on
success, 1 for usage errors, 2 for malformed input files, 3 for IO failures.
All outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import anchors as anchors_mod
from . import image_io, shearlets, svg, train_dynamics
from .boxes import (
    CsvFormatError,
    read_detections_csv,
    read_ground_truth_csv,
)
from .config import ConfigError, ToolConfig, load_config
from .evaluation import EvalConfig, evaluate
from .raster import combine_scale, decompose
from .train_dynamics import CosineSchedule, gamma_at, lr_at

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_IO = 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1, not argparse's default 2
        raise UsageError(message)


def _write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path: Path, text: str) -> None:
    _write_bytes(path, text.encode("utf-8"))


def _write_png(path: Path, image) -> None:
    import io as _io

    from PIL import Image as PILImage

    import numpy as np

    data = np.floor(image.pixels * 255.0 + 0.5).astype(np.uint8)
    pil = (
        PILImage.fromarray(data[..., 0], mode="L")
        if image.channels == 1
        else PILImage.fromarray(data, mode="RGB")
    )
    buf = _io.BytesIO()
    pil.save(buf, format="PNG")
    _write_bytes(path, buf.getvalue())


def _write_pgm(path: Path, image) -> None:
    import numpy as np

    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    body = np.floor(image.pixels[..., 0] * 255.0 + 0.5).astype(np.uint8).tobytes()
    _write_bytes(path, header + body)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_tool_config(args) -> ToolConfig:
    cfg = load_config(args.config) if args.config else ToolConfig()
    if args.seed is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "seed": args.seed})
    return cfg


def _bank_spec(cfg: ToolConfig) -> shearlets.ShearletSpec:
    return shearlets.ShearletSpec(
        num_scales=cfg.num_scales,
        dirs_per_scale=cfg.dirs_per_scale,
        kernel_size=cfg.kernel_size,
        freq_grid=cfg.freq_grid,
        normalize=cfg.normalize,
    )


def cmd_bank(args) -> int:
    cfg = _load_tool_config(args)
    out = _out_dir(args)
    bank = shearlets.build_bank(_bank_spec(cfg))
    _write_text(out / "bank.json", shearlets.bank_to_json(bank))
    for filt in bank.filters:
        name = f"s{filt.scale}_d{filt.direction}"
        _write_png(out / f"filter_{name}.png", image_io.render_gray(filt.weights))
        response = shearlets.frequency_response(filt, bank.spec.freq_grid)
        _write_png(out / f"response_{name}.png", image_io.render_gray(response))
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg = _load_tool_config(args)
    out = _out_dir(args)
    image = image_io.read_image(args.image)
    bank = shearlets.build_bank(_bank_spec(cfg))
    stack = decompose(image, bank)
    for plane, filt in zip(stack.planes, bank.filters):
        _write_pgm(
            out / f"plane_s{filt.scale}_d{filt.direction}.pgm", image_io.render_gray(plane)
        )
    for s in range(1, bank.spec.num_scales + 1):
        _write_png(out / f"combined_scale_{s}.png", combine_scale(stack, s))
    return EXIT_OK


def _parse_sweep_range(text: str) -> tuple[int, int]:
    try:
        lo_text, hi_text = text.split(":", 1)
        lo, hi = int(lo_text), int(hi_text)
    except ValueError as exc:
        raise UsageError(f"--sweep expects MIN:MAX, got '{text}'") from exc
    if not 1 <= lo <= hi:
        raise UsageError(f"--sweep needs 1 <= MIN <= MAX, got {text}")
    return lo, hi


def cmd_anchors(args) -> int:
    cfg = _load_tool_config(args)
    out = _out_dir(args)
    shapes = anchors_mod.shapes_from_ground_truth(read_ground_truth_csv(args.gt_csv))
    if not shapes:
        raise CsvFormatError(args.gt_csv, 2, "no annotation rows")
    if args.sweep:
        lo, hi = _parse_sweep_range(args.sweep)
        result = anchors_mod.sweep(shapes, lo, hi, seed=cfg.seed, restarts=cfg.restarts)
        lines = ["k,mean_iou"] + [f"{k},{miou!r}" for k, miou in result.entries]
        _write_text(out / "sweep.csv", "\n".join(lines) + "\n")
        if args.svg:
            chart = svg.line_chart(
                [(float(k), miou) for k, miou in result.entries],
                x_label="number of anchors",
                y_label="mean IoU",
            )
            _write_text(out / "sweep.svg", chart)
        return EXIT_OK
    k = args.k if args.k is not None else cfg.anchors_k
    if k < 1:
        raise UsageError(f"--k must be >= 1, got {k}")
    estimate = anchors_mod.kmeans_iou(shapes, k, seed=cfg.seed, restarts=cfg.restarts)
    import json

    doc = {
        "k": estimate.k,
        "anchors": [{"w": a.w, "h": a.h} for a in estimate.anchors],
        "mean_iou": estimate.mean_iou,
    }
    _write_text(out / "anchors.json", json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_stats(args) -> int:
    out = _out_dir(args)
    shapes = anchors_mod.shapes_from_ground_truth(read_ground_truth_csv(args.gt_csv))
    if not shapes:
        raise CsvFormatError(args.gt_csv, 2, "no annotation rows")
    stats = anchors_mod.box_stats(shapes)
    import json

    def series(s: anchors_mod.SeriesStats) -> dict:
        return {
            "min": s.minimum,
            "q1": s.q1,
            "median": s.median,
            "q3": s.q3,
            "max": s.maximum,
            "skewness": s.skewness,
        }

    doc = {"area": series(stats.area), "aspect_ratio": series(stats.aspect_ratio)}
    _write_text(out / "stats.json", json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_tool_config(args)
    out = _out_dir(args)
    detections = read_detections_csv(args.det_csv)
    ground_truths = read_ground_truth_csv(args.gt_csv)
    if not ground_truths:
        print(f"error: {args.gt_csv} holds no ground-truth rows", file=sys.stderr)
        return EXIT_FORMAT
    gt_ids = {g.image_id for g in ground_truths}
    orphans = sorted({d.image_id for d in detections} - gt_ids)
    if orphans:
        print(
            "warning: detections reference image ids without ground truth: "
            + ", ".join(orphans),
            file=sys.stderr,
        )
    report = evaluate(
        detections,
        ground_truths,
        EvalConfig(
            iou_threshold=cfg.iou_threshold,
            score_min=cfg.score_min,
            small_max=cfg.small_max,
            medium_max=cfg.medium_max,
            fppi_per_image=cfg.fppi_per_image,
            eleven_point_ap=cfg.eleven_point_ap,
        ),
    )
    _write_text(out / "report.json", report.to_json())
    pr_lines = ["recall,precision"] + [
        f"{r!r},{p!r}" for r, p in zip(report.pr_curve.recalls, report.pr_curve.precisions)
    ]
    _write_text(out / "pr_curve.csv", "\n".join(pr_lines) + "\n")
    mr_lines = ["fppi,mr"] + [f"{f!r},{m!r}" for f, m in report.mr_fppi_curve]
    _write_text(out / "mr_fppi.csv", "\n".join(mr_lines) + "\n")
    if args.svg:
        if report.pr_curve.recalls:
            _write_text(
                out / "pr_curve.svg",
                svg.line_chart(
                    list(zip(report.pr_curve.recalls, report.pr_curve.precisions)),
                    x_label="recall",
                    y_label="precision",
                ),
            )
        if report.mr_fppi_curve:
            _write_text(
                out / "mr_fppi.svg",
                svg.line_chart(
                    [(f, m) for f, m in report.mr_fppi_curve],
                    x_label="false positives per image",
                    y_label="miss rate",
                ),
            )
    return EXIT_OK


def cmd_schedule(args) -> int:
    cfg = _load_tool_config(args)
    out = _out_dir(args)
    eta_min = args.eta_min if args.eta_min is not None else cfg.eta_min
    eta_max = args.eta_max if args.eta_max is not None else cfg.eta_max
    total = args.iterations if args.iterations is not None else cfg.total_iterations
    try:
        schedule = CosineSchedule(eta_min=eta_min, eta_max=eta_max, total_iterations=total)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["t,lr,gamma"]
    for t in range(total + 1):
        lines.append(f"{t},{lr_at(schedule, t)!r},{gamma_at(total, t)!r}")
    _write_text(out / "schedule.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def _read_loss_csv(path: str) -> list[float]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CsvFormatError(path, 0, f"not UTF-8 text ({exc})") from exc
    losses = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        first = line.split(",", 1)[0].strip()
        try:
            value = float(first)
        except ValueError as exc:
            raise CsvFormatError(path, lineno, f"expected a loss value, got '{first}'") from exc
        if value < 0:
            raise CsvFormatError(path, lineno, f"loss must be >= 0, got {value}")
        losses.append(value)
    if not losses:
        raise CsvFormatError(path, 1, "no loss values")
    return losses


def cmd_simulate_train(args) -> int:
    cfg = _load_tool_config(args)
    out = _out_dir(args)
    losses = _read_loss_csv(args.loss_csv)
    zeta = args.zeta if args.zeta is not None else cfg.zeta
    total = args.iterations
    try:
        records = train_dynamics.simulate_decisions(
            losses, total_iterations=total, zeta=zeta, seed=cfg.seed
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["t,loss,gamma,decision"]
    for rec in records:
        lines.append(f"{rec.t},{rec.loss!r},{rec.gamma!r},{rec.decision.kind.value}")
    _write_text(out / "decisions.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file")
    common.add_argument("--seed", type=int, metavar="N", help="random seed override")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")

    parser = _Parser(prog="sheardet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("bank", parents=[common], help="write the filter bank and its renderings")

    p = sub.add_parser("decompose", parents=[common], help="multiscale image decomposition")
    p.add_argument("image", help="input PGM or PNG image")

    p = sub.add_parser("anchors", parents=[common], help="estimate anchor shapes")
    p.add_argument("gt_csv", help="ground-truth CSV (image_id,x,y,w,h,class)")
    p.add_argument("--k", type=int, help="number of anchors")
    p.add_argument("--sweep", metavar="MIN:MAX", help="sweep a range of anchor counts")
    p.add_argument("--svg", action="store_true", help="also write an SVG chart")

    p = sub.add_parser("stats", parents=[common], help="box-plot statistics of a shape set")
    p.add_argument("gt_csv", help="ground-truth CSV")

    p = sub.add_parser("eval", parents=[common], help="evaluate detections against ground truth")
    p.add_argument("det_csv", help="detections CSV (image_id,x,y,w,h,score,class)")
    p.add_argument("gt_csv", help="ground-truth CSV")
    p.add_argument("--svg", action="store_true", help="also write SVG curves")

    p = sub.add_parser("schedule", parents=[common], help="emit the cosine learning-rate table")
    p.add_argument("--eta-min", type=float, dest="eta_min")
    p.add_argument("--eta-max", type=float, dest="eta_max")
    p.add_argument("--iterations", "-T", type=int, dest="iterations")

    p = sub.add_parser(
        "simulate-train", parents=[common], help="replay a loss log through the batch gate"
    )
    p.add_argument("loss_csv", help="loss sequence, one value per row")
    p.add_argument("--zeta", type=float, help="augmentation emphasis threshold")
    p.add_argument("--iterations", "-T", type=int, dest="iterations")

    return parser


_HANDLERS = {
    "bank": cmd_bank,
    "decompose": cmd_decompose,
    "anchors": cmd_anchors,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "schedule": cmd_schedule,
    "simulate-train": cmd_simulate_train,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CsvFormatError, image_io.ImageFormatError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

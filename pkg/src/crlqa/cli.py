"""Command-line entry point: ``crlqa {score,compare,overlay,phantom}``.

Exit codes: 0 success, 1 bad input (unreadable directory or config, unpaired
tables, unscorable case), 2 when ``score`` found nothing it could score.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .agreement_stats import RaterTable, compare_tables
from .criteria import CriteriaConfig, ScoreCard, ScoreFailure, score_measurement
from .errors import CrlqaError, GeometryInfeasible, PairingError
from .geometry import measure
from .mask_io import case_id, find_cases, load_case_by_stem, save_case
from .overlay import render_svg
from .phantom import PhantomSpec, random_spec, render
from .serialize import dumps

log = logging.getLogger("crlqa")

SCORE_FIELDS = (
    "image_id",
    "c1_neutral",
    "c2_horizontal",
    "c3_midsagittal",
    "c4_magnification",
    "c5_left_caliper",
    "c6_right_caliper",
    "c7_face",
    "score",
    "acceptable",
    "crl_px",
    "crl_mm",
    "alpha_deg",
    "beta_deg",
    "magnification_fraction",
    "face_tag",
    "flags",
)


@dataclass(frozen=True)
class RunManifest:
    input_dir: Path
    output_dir: Path
    config_path: Optional[Path] = None
    emit_overlays: bool = False
    parallelism: int = 1

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("--jobs must be at least 1")


def scorecard_dict(card: ScoreCard) -> dict:
    out = {name: getattr(card, name) for name in SCORE_FIELDS}
    out["flags"] = list(card.flags)
    return out


def _score_one(args):
    """Worker: score a single case; never raises for per-image problems."""
    mask_path, cfg, want_svg = args
    stem = case_id(mask_path)
    try:
        mask, frame, meta = load_case_by_stem(mask_path)
        measurement = measure(mask)
        card = score_measurement(measurement, mask, frame, meta, cfg)
    except CrlqaError as exc:
        return ScoreFailure(stem, type(exc).__name__, str(exc)), None
    svg = render_svg(measurement, card, mask.width, mask.height, cfg) if want_svg else None
    return card, svg


def _load_config(path) -> CriteriaConfig:
    if path is None:
        return CriteriaConfig()
    return CriteriaConfig.from_json(path)


def cmd_score(manifest: RunManifest) -> int:
    if not manifest.input_dir.is_dir():
        log.error("input directory %s does not exist", manifest.input_dir)
        return 1
    try:
        cfg = _load_config(manifest.config_path)
    except (OSError, ValueError, TypeError) as exc:
        log.error("cannot load config %s: %s", manifest.config_path, exc)
        return 1
    try:
        cases = find_cases(manifest.input_dir)
    except OSError as exc:
        log.error("cannot read %s: %s", manifest.input_dir, exc)
        return 1

    jobs = [(path, cfg, manifest.emit_overlays) for path in cases]
    if manifest.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.parallelism) as pool:
            results = list(pool.map(_score_one, jobs, chunksize=4))
    else:
        results = [_score_one(job) for job in jobs]

    cards, failures, overlays = {}, [], {}
    for result, svg in results:
        if isinstance(result, ScoreFailure):
            failures.append(result)
        elif result.image_id in cards:
            failures.append(ScoreFailure(result.image_id, "DuplicateImageId",
                                         "another case already uses this image_id"))
        else:
            cards[result.image_id] = result
            overlays[result.image_id] = svg
    ordered = [cards[k] for k in sorted(cards)]
    failures.sort(key=lambda f: (f.image_id, f.error, f.message))

    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    RaterTable.from_scorecards(ordered, "ai").write_csv(out / "scores.csv")
    report = {
        "rater_id": "ai",
        "config": cfg.to_dict(),
        "n_cases": len(cases),
        "n_scored": len(ordered),
        "n_failed": len(failures),
        "scorecards": [scorecard_dict(c) for c in ordered],
        "failures": [
            {"image_id": f.image_id, "error": f.error, "message": f.message} for f in failures
        ],
    }
    (out / "scores.json").write_text(dumps(report), encoding="utf-8")
    if manifest.emit_overlays:
        svg_dir = out / "overlays"
        svg_dir.mkdir(exist_ok=True)
        for card in ordered:
            (svg_dir / f"{card.image_id}.svg").write_text(overlays[card.image_id], encoding="utf-8")

    for f in failures:
        log.warning("%s: %s: %s", f.image_id, f.error, f.message)
    log.info("scored %d of %d cases", len(ordered), len(cases))
    return 0 if ordered else 2


def cmd_compare(ai_csv, expert_csv, out_dir) -> int:
    try:
        ai = RaterTable.read_csv(ai_csv, rater_id="ai")
        expert = RaterTable.read_csv(expert_csv, rater_id="expert")
        report = compare_tables(ai, expert)
    except PairingError as exc:
        log.error("cannot pair tables: %s", exc)
        return 1
    except (OSError, ValueError) as exc:
        log.error("cannot read rater tables: %s", exc)
        return 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "agreement.json").write_text(dumps(report.to_dict()), encoding="utf-8")
    (out / "agreement.md").write_text(report.to_markdown(), encoding="utf-8")
    return 0


def cmd_overlay(mask_path, out_svg, config_path=None) -> int:
    try:
        cfg = _load_config(config_path)
    except (OSError, ValueError, TypeError) as exc:
        log.error("cannot load config %s: %s", config_path, exc)
        return 1
    card, svg = _score_one((Path(mask_path), cfg, True))
    if isinstance(card, ScoreFailure):
        log.error("%s: %s: %s", card.image_id, card.error, card.message)
        return 1
    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    out_svg.write_text(svg, encoding="utf-8")
    return 0


def cmd_phantom(out_dir, count: int, seed: int, config_path=None) -> int:
    """Write ``count`` random phantoms; ``--config`` may pin PhantomSpec fields."""
    fixed = {}
    if config_path is not None:
        try:
            fixed = json.loads(Path(config_path).read_text(encoding="utf-8"))
            if not isinstance(fixed, dict):
                raise ValueError("phantom config must be a JSON object")
            PhantomSpec(**fixed)
        except (OSError, ValueError, TypeError) as exc:
            log.error("cannot load phantom config %s: %s", config_path, exc)
            return 1
    rng = np.random.default_rng(seed)
    width = fixed.pop("width", 512)
    height = fixed.pop("height", 384)
    out = Path(out_dir)
    digits = max(3, len(str(count - 1)))
    for i in range(count):
        image_id = f"phantom_{i:0{digits}d}"
        try:
            spec = random_spec(rng, width=width, height=height, **fixed)
            mask, frame, meta, _truth = render(spec, image_id)
        except GeometryInfeasible as exc:
            log.error("%s: %s", image_id, exc)
            return 1
        save_case(out, meta, mask, frame)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crlqa", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every <id>.mask.png in a directory")
    p.add_argument("--input", required=True, type=Path, help="directory of cases")
    p.add_argument("--output", required=True, type=Path, help="directory for scores.csv/json")
    p.add_argument("--config", type=Path, help="criteria config JSON")
    p.add_argument("--overlays", action="store_true", help="also write one SVG per image")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    p = sub.add_parser("compare", help="agreement report between AI and expert tables")
    p.add_argument("--input", required=True, nargs=2, type=Path,
                   metavar=("AI_CSV", "EXPERT_CSV"))
    p.add_argument("--output", required=True, type=Path,
                   help="directory for agreement.json/md")

    p = sub.add_parser("overlay", help="annotated SVG for one case")
    p.add_argument("--input", required=True, type=Path, help="path to <id>.mask.png")
    p.add_argument("--output", required=True, type=Path, help="SVG file to write")
    p.add_argument("--config", type=Path, help="criteria config JSON")

    p = sub.add_parser("phantom", help="write a corpus of synthetic cases")
    p.add_argument("--output", required=True, type=Path, help="directory for the cases")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="JSON of PhantomSpec fields to pin")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    if args.command == "score":
        try:
            manifest = RunManifest(args.input, args.output, args.config, args.overlays, args.jobs)
        except ValueError as exc:
            log.error("%s", exc)
            return 1
        return cmd_score(manifest)
    if args.command == "compare":
        return cmd_compare(args.input[0], args.input[1], args.output)
    if args.command == "overlay":
        return cmd_overlay(args.input, args.output, args.config)
    if args.command == "phantom":
        if args.count < 1:
            log.error("--count must be at least 1")
            return 1
        return cmd_phantom(args.output, args.count, args.seed, args.config)
    return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: ``basetrack track | estimate | evaluate | simulate | ablate``.

Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import mot_io, models
from .ablation import run_ablation, to_csv
from .config import ConfigError, RunConfig, load_config
from .estimate import TrainingSequence, fit
from .evalkit.metrics import MetricsReport, combine, evaluate
from .evalkit.simulate import SimConfig, simulate
from .motion import MotionParams
from .pipeline import TrackerConfig, run

log = logging.getLogger("basetrack")

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _workers(n_jobs: int) -> int:
    try:
        cap = int(os.environ.get("BASE_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, n_jobs))


# -- track -------------------------------------------------------------------


def _track_one(spec: mot_io.SequenceSpec, cfg: RunConfig, fit_report, out_dir: Path) -> str:
    frames = mot_io.load_frames(spec)
    tcfg = cfg.tracker_config(fit_report, 1.0 / spec.framerate)
    cm = fit_report.confidence_model
    res = run(frames, tcfg, fit_report.clutter_model, cm) if frames else None
    out = out_dir / f"{spec.name}.txt"
    mot_io.write_results(res.boxes if res else [], out)
    with open(out_dir / f"{spec.name}_diagnostics.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "n_detections", "n_tracks", "n_confirmed", "n_matched", "n_spawned", "cmc_rejected", "seconds"])
        for d in res.diagnostics if res else []:
            w.writerow([d.frame, d.n_detections, d.n_tracks, d.n_confirmed, d.n_matched, d.n_spawned, int(d.cmc_rejected), f"{d.seconds:.6f}"])
    n_int = res.n_interpolated if res else 0
    return f"{spec.name}: {len(frames)} frames, {len(res.boxes) if res else 0} boxes ({n_int} interpolated) -> {out}"


def cmd_track(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    model_dir = Path(args.models) if args.models else cfg.model_dir
    if model_dir is None:
        raise UsageError("no model directory: pass --models or set [models] dir in the config")
    fit_report = models.load_fit(model_dir)
    out_dir = Path(args.out) if args.out else (cfg.output_dir or Path("results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = [mot_io.sequence_spec(s) for s in args.seq]
    n = _workers(len(specs))
    if n > 1:
        with ProcessPoolExecutor(n) as ex:
            msgs = list(ex.map(_track_one, specs, [cfg] * len(specs), [fit_report] * len(specs), [out_dir] * len(specs)))
    else:
        msgs = [_track_one(s, cfg, fit_report, out_dir) for s in specs]
    for m in msgs:
        print(m, file=sys.stderr)
    return 0


# -- estimate ----------------------------------------------------------------


def _sequence_dirs(root: Path) -> list[Path]:
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(f"directory not found: {root}")
    if (root / "det" / "det.txt").exists():
        return [root]
    dirs = sorted(p for p in root.iterdir() if (p / "det" / "det.txt").exists())
    if not dirs:
        raise FileNotFoundError(f"no sequence directories (with det/det.txt) under {root}")
    return dirs


def load_training(root) -> list[TrainingSequence]:
    out = []
    for d in _sequence_dirs(Path(root)):
        spec = mot_io.sequence_spec(d)
        if spec.gt_path is None:
            raise FileNotFoundError(f"missing ground truth {d / 'gt' / 'gt.txt'}")
        out.append(TrainingSequence(
            spec.name, mot_io.load_frames(spec), mot_io.parse_mot_gt(spec.gt_path),
            spec.framerate, spec.camera_stationary, spec.image_size,
        ))
    return out


def _base_config(cfg: RunConfig, dt: float) -> TrackerConfig:
    placeholder = MotionParams(1.0, 1.0, np.eye(4), np.eye(2), dt)
    return TrackerConfig(motion=placeholder, manage=cfg.manage_params(), **cfg.tracker, **cfg.strategy)


def cmd_estimate(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    train = load_training(args.train)
    base = _base_config(cfg, train[0].dt)
    report = fit(train, base, search=not args.no_search)
    models.save_fit(report, args.out)
    print(f"sigma_ca={report.sigma_ca:.4g} sigma_sr={report.sigma_sr:.4g} c_ex={report.clutter_model.c_ex:.4g}", file=sys.stderr)
    print(f"models written to {args.out}", file=sys.stderr)
    return 0


# -- evaluate ----------------------------------------------------------------


def _pairs(gt: Path, results: Path) -> list[tuple[str, Path, Path]]:
    if gt.is_file():
        if not results.is_file():
            raise FileNotFoundError(f"results file not found: {results}")
        return [(results.stem, gt, results)]
    out = []
    for d in _sequence_dirs(gt):
        g = d / "gt" / "gt.txt"
        name = mot_io.read_seqinfo(d)["name"]
        r = results / f"{name}.txt"
        if not r.exists():
            raise FileNotFoundError(f"results file not found: {r}")
        out.append((name, g, r))
    return out


def format_metrics(rep: MetricsReport) -> tuple[str, str]:
    cols = ["sequence", "MOTA", "IDF1", "FP", "FN", "IDSW", "GT"]
    rows = [(name, r) for name, r in rep.per_sequence.items()] + [("OVERALL", rep)]
    table = [f"{cols[0]:<20}" + "".join(f"{c:>9}" for c in cols[1:])]
    buf = []
    for name, r in rows:
        table.append(
            f"{name:<20}{100 * r.mota:>9.2f}{100 * r.idf1:>9.2f}{r.fp:>9d}{r.fn:>9d}{r.idsw:>9d}{r.n_gt:>9d}"
        )
        buf.append(f"{name},{r.mota:.6f},{r.idf1:.6f},{r.fp},{r.fn},{r.idsw},{r.n_gt}")
    return "\n".join(table), ",".join(cols) + "\n" + "\n".join(buf)


def cmd_evaluate(args) -> int:
    reports = {}
    for name, g, r in _pairs(Path(args.gt), Path(args.results)):
        gt = mot_io.parse_mot_gt(g, classes=None if args.all_classes else mot_io.PEDESTRIAN_CLASSES)
        res = [(f, i, cx, cy, w, h) for f, i, cx, cy, w, h, _ in mot_io.parse_mot_results(r)]
        reports[name] = evaluate(gt, res, args.iou)
    rep = combine(reports)
    table, csv_text = format_metrics(rep)
    print(table)
    print()
    print(csv_text)
    if args.csv:
        Path(args.csv).write_text(csv_text + "\n", encoding="utf-8")
    return 0


# -- simulate ----------------------------------------------------------------


def load_sim_config(path) -> SimConfig:
    """``[sim]`` section with SimConfig fields; tuples and matrices as whitespace lists."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(path, encoding="utf-8")
    extra = set(cp.sections()) - {"sim"}
    if extra:
        raise ConfigError(f"unknown section(s) {sorted(extra)}")
    defaults = SimConfig()
    kw = {}
    for key, raw in (cp["sim"].items() if "sim" in cp else []):
        if not hasattr(defaults, key):
            raise ConfigError(f"unknown key '{key}' in [sim]")
        ref = getattr(defaults, key)
        try:
            if isinstance(ref, np.ndarray):
                v = np.array([float(t) for t in raw.split()])
                kw[key] = np.diag(v) if v.size == ref.shape[0] else v.reshape(ref.shape)
            elif isinstance(ref, tuple):
                kw[key] = tuple(float(t) for t in raw.split())
            elif isinstance(ref, bool):
                kw[key] = raw.strip().lower() in ("1", "true", "yes")
            else:
                kw[key] = type(ref)(raw.strip())
        except ValueError as e:
            raise ConfigError(f"[sim] {key}: {e}") from None
    return SimConfig(**kw)


def write_sim(sim, seq_dir: Path, name: str) -> None:
    cfg = sim.config
    mot_io.write_seqinfo(seq_dir, name, cfg.framerate, cfg.n_frames, cfg.image_size, True)
    mot_io.write_detections(sim.frames, seq_dir / "det" / "det.txt")
    mot_io.write_gt(sim.gt, seq_dir / "gt" / "gt.txt")


def cmd_simulate(args) -> int:
    cfg = load_sim_config(args.config) if args.config else SimConfig()
    out = Path(args.out)
    for k in range(args.n_seqs):
        cfg.seed = args.seed + k
        name = f"{args.name}-{k + 1:02d}" if args.n_seqs > 1 else args.name
        write_sim(simulate(cfg), out / name, name)
        print(f"wrote {out / name}", file=sys.stderr)
    return 0


# -- ablate ------------------------------------------------------------------


def cmd_ablate(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    train = load_training(args.train)
    val = load_training(args.val)
    base = _base_config(cfg, train[0].dt)
    results = run_ablation(train, val, base, search=not args.no_search)
    text = to_csv(results)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="basetrack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("track", help="run the tracker on sequence directories")
    t.add_argument("--config")
    t.add_argument("--models", help="fitted model directory (overrides the config)")
    t.add_argument("--seq", nargs="+", required=True, help="MOTChallenge-style sequence directories")
    t.add_argument("--out", help="output directory (overrides the config)")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("estimate", help="fit model parameters on training sequences")
    e.add_argument("--train", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--config")
    e.add_argument("--no-search", action="store_true", help="skip the c_EX search")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("evaluate", help="MOTA / IDF1 of result files against ground truth")
    v.add_argument("--gt", required=True, help="gt.txt file or directory of sequences")
    v.add_argument("--results", required=True, help="result file or directory of <name>.txt")
    v.add_argument("--iou", type=float, default=0.5)
    v.add_argument("--csv")
    v.add_argument("--all-classes", action="store_true")
    v.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="write synthetic sequences in MOT format")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--name", default="SIM")
    s.add_argument("--n-seqs", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("ablate", help="run the 8-row strategy grid")
    a.add_argument("--train", required=True)
    a.add_argument("--val", required=True)
    a.add_argument("--config")
    a.add_argument("--out")
    a.add_argument("--no-search", action="store_true")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as e:
        print(f"basetrack: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError, OSError) as e:
        print(f"basetrack: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

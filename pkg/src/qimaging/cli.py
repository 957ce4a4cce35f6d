"""Batch command-line front end: simulate, analyze, correlate, detect."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .coincidence import (accidental_baseline, and_accumulate,
                          classical_accumulate, correlation_peak_stats,
                          cross_correlate)
from .metrics import (cut_profiles, michelson_contrast, noise_rejection_ratio,
                      presence_ber, qi_advantage)
from .model import (AnalysisError, AnalysisReport, CorrelationGeometry, Roi,
                    ValidationError, load_scene, scene_to_dict)
from .oracle import expected_rates
from .pipeline_io import (FormatError, read_stack, write_image,
                          write_profiles, write_report, write_stack)
from .simulate import SimulationError, generate_stack


def _load_rois(path):
    with open(path) as f:
        spec = json.load(f)
    rois = {}
    for entry in spec.get("rois", []):
        label = entry["label"]
        if "rect" in entry:
            rois[label] = Roi(label=label, rect=tuple(entry["rect"]))
        else:
            rois[label] = Roi(label=label,
                              pixels=tuple(map(tuple, entry["pixels"])))
    center = tuple(spec["center"]) if "center" in spec else None
    cuts = spec.get("cuts")
    return rois, center, cuts


def _geometry_for(stack, center):
    if center is None:
        center = (stack.width - 1, stack.height - 1)
    return CorrelationGeometry(center=tuple(int(c) for c in center))


def cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    probe, ref = generate_stack(scene, args.frames, workers=args.workers)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    probe_path = prefix.with_name(prefix.name + ".probe.qifs")
    ref_path = prefix.with_name(prefix.name + ".ref.qifs")
    write_stack(probe, probe_path)
    write_stack(ref, ref_path)
    npix = scene.width * scene.height
    rate_p = classical_accumulate(probe).counts.sum() / (args.frames * npix)
    rate_r = classical_accumulate(ref).counts.sum() / (args.frames * npix)
    meta = {
        "config": scene_to_dict(scene),
        "frames": args.frames,
        "workers": args.workers,
        "probe_events_per_px_per_frame": float(rate_p),
        "ref_events_per_px_per_frame": float(rate_r),
        "software_version": __version__,
    }
    with open(prefix.with_name(prefix.name + ".meta.json"), "w") as f:
        json.dump(meta, f, indent=2)
    print(f"wrote {probe_path} and {ref_path}: {args.frames} frames, "
          f"probe {rate_p:.6f} ev/px/frame, ref {rate_r:.6f} ev/px/frame")
    return 0


def _analyze_stacks(probe, ref, rois, center, cuts, out_dir, tolerance,
                    config_echo):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = _geometry_for(probe, center)
    classical = classical_accumulate(probe)
    and_img = and_accumulate(probe, ref, geometry, tolerance=tolerance)
    baseline = accidental_baseline(probe, ref, geometry)
    for stem, img in (("classical", classical), ("and", and_img),
                      ("baseline", baseline)):
        write_image(img, out_dir / f"{stem}.pgm")
        write_image(img, out_dir / f"{stem}.png")

    v_c = v_q = advantage = rejection = None
    if "bright" in rois and "dark" in rois:
        v_c = michelson_contrast(classical, rois["bright"], rois["dark"])
        v_q = michelson_contrast(and_img, rois["bright"], rois["dark"])
        advantage = qi_advantage(v_q, v_c)
    if "object" in rois and "mask" in rois:
        rejection = noise_rejection_ratio(classical, and_img,
                                          rois["object"], rois["mask"])
    totals = {
        "classical_events": int(classical.counts.sum()),
        "and_events": int(and_img.counts.sum()),
        "baseline_expected": float(baseline.counts.sum()),
        "n_frames": probe.n_frames,
        "tolerance": tolerance,
        "roi_means": {
            label: {
                "classical": float(classical.counts[
                    roi.mask(probe.width, probe.height)].mean()),
                "and": float(and_img.counts[
                    roi.mask(probe.width, probe.height)].mean()),
            }
            for label, roi in rois.items()
        },
    }
    report = AnalysisReport(v_classical=v_c, v_quantum=v_q,
                            advantage=advantage, noise_rejection=rejection,
                            totals=totals, config=config_echo)
    write_report(report, out_dir / "report.json")

    if cuts is not None:
        rows = range(cuts["rows"][0], cuts["rows"][1] + 1)
        cols = range(cuts["cols"][0], cuts["cols"][1] + 1)
    else:
        rows, cols = range(probe.height), range(probe.width)
    for stem, img in (("classical", classical), ("and", and_img)):
        write_profiles(cut_profiles(img, rows, cols),
                       out_dir / f"cuts_{stem}.csv")
    # combined cuts file expected by downstream tooling
    rp_c, cp_c = cut_profiles(classical, rows, cols)
    rp_a, cp_a = cut_profiles(and_img, rows, cols)
    with open(out_dir / "cuts.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["index", "classical_row", "classical_col",
                     "and_row", "and_col"])
        for i in range(max(len(rp_c), len(cp_c))):
            wr.writerow([
                i,
                rp_c[i] if i < len(rp_c) else "",
                cp_c[i] if i < len(cp_c) else "",
                rp_a[i] if i < len(rp_a) else "",
                cp_a[i] if i < len(cp_a) else "",
            ])
    return report


def cmd_analyze(args) -> int:
    rois, center, cuts = _load_rois(args.rois)
    if args.sweep:
        return _cmd_sweep(args, rois, center, cuts)
    probe = read_stack(args.probe)
    ref = read_stack(args.ref)
    config_echo = {
        "probe": str(args.probe),
        "ref": str(args.ref),
        "rois": str(args.rois),
        "tolerance": args.tolerance,
    }
    report = _analyze_stacks(probe, ref, rois, center, cuts, args.out_dir,
                             args.tolerance, config_echo)
    def fmt(x):
        return "n/a" if x is None else f"{x:.4f}"
    print(f"V_C={fmt(report.v_classical)} V_Q={fmt(report.v_quantum)} "
          f"A={fmt(report.advantage)} R={fmt(report.noise_rejection)}")
    return 0


def _cmd_sweep(args, rois, center, cuts) -> int:
    """Re-simulate and analyze one (eta, thermal_scale) condition per entry."""
    if args.scene is None or args.frames is None:
        raise ValidationError("--sweep requires --scene and --frames")
    scene = load_scene(args.scene)
    with open(args.sweep) as f:
        conditions = json.load(f)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for i, cond in enumerate(conditions):
        cond_scene = replace(
            scene,
            probe_loss_eta=float(cond.get("probe_loss_eta",
                                          scene.probe_loss_eta)),
            thermal_scale=float(cond.get("thermal_scale",
                                         scene.thermal_scale)),
        )
        probe, ref = generate_stack(cond_scene, args.frames,
                                    workers=args.workers)
        config_echo = {"scene": scene_to_dict(cond_scene),
                       "frames": args.frames, "condition_index": i}
        report = _analyze_stacks(probe, ref, rois, center, cuts,
                                 out_dir / f"condition_{i}", args.tolerance,
                                 config_echo)
        summary.append((cond_scene.probe_loss_eta, cond_scene.thermal_scale,
                        report.v_classical, report.v_quantum,
                        report.advantage, report.noise_rejection))
    with open(out_dir / "summary.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["probe_loss_eta", "thermal_scale", "v_classical",
                     "v_quantum", "advantage", "noise_rejection"])
        for row in summary:
            wr.writerow(["" if v is None else v for v in row])
    print(f"wrote {len(summary)} condition reports to {out_dir}")
    return 0


def cmd_correlate(args) -> int:
    probe = read_stack(args.probe)
    ref = read_stack(args.ref)
    geometry = _geometry_for(probe, None)
    cmap = cross_correlate(probe, ref, geometry, args.max_disp)
    d = cmap.max_disp
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["dx", "dy", "value"])
        for dy in range(-d, d + 1):
            for dx in range(-d, d + 1):
                wr.writerow([dx, dy, cmap.value(dx, dy)])
    stats = correlation_peak_stats(cmap)
    print(f"peak at ({stats['peak_dx']}, {stats['peak_dy']}): "
          f"{stats['peak_value']:.6g}, background std "
          f"{stats['background_std']:.6g}")
    return 0


def cmd_detect(args) -> int:
    scene = load_scene(args.scene)
    rois, _, _ = _load_rois(args.rois)
    if args.roi not in rois:
        raise ValidationError(f"ROI '{args.roi}' not found in {args.rois}")
    strategies = (("classical", "quantum", "combined")
                  if args.strategy == "all" else (args.strategy,))
    result = presence_ber(scene, rois[args.roi], args.block_frames,
                          args.trials, strategies=strategies)
    payload = {
        "config": scene_to_dict(scene),
        "roi": args.roi,
        "block_frames": args.block_frames,
        "trials": args.trials,
        "strategies": {s: result[s] for s in strategies},
        "software_version": __version__,
    }
    if args.out:
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2)
    for s in strategies:
        r = result[s]
        print(f"{s}: BER={r['ber']:.4f} "
              f"(95% CI {r['ci95'][0]:.4f}-{r['ci95'][1]:.4f}, "
              f"{r['errors']}/{r['trials']} errors)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qimaging",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate probe/ref QIFS stacks")
    s.add_argument("--scene", required=True)
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--out-prefix", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate, check=_check_simulate)

    a = sub.add_parser("analyze", help="accumulate images and write a report")
    a.add_argument("--probe")
    a.add_argument("--ref")
    a.add_argument("--rois", required=True)
    a.add_argument("--out-dir", required=True)
    a.add_argument("--tolerance", type=int, default=0)
    a.add_argument("--sweep", help="JSON list of (eta, thermal) conditions")
    a.add_argument("--scene", help="scene file (sweep mode)")
    a.add_argument("--frames", type=int, help="frames per condition (sweep)")
    a.add_argument("--workers", type=int, default=1)
    a.set_defaults(func=cmd_analyze, check=_check_analyze)

    c = sub.add_parser("correlate", help="displacement cross-correlation map")
    c.add_argument("--probe", required=True)
    c.add_argument("--ref", required=True)
    c.add_argument("--max-disp", type=int, required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_correlate, check=_check_correlate)

    t = sub.add_parser("detect", help="presence/absence bit-error rates")
    t.add_argument("--scene", required=True)
    t.add_argument("--rois", required=True)
    t.add_argument("--roi", default="object")
    t.add_argument("--block-frames", type=int, required=True)
    t.add_argument("--trials", type=int, required=True)
    t.add_argument("--strategy", default="all",
                   choices=["classical", "quantum", "combined", "all"])
    t.add_argument("--out")
    t.set_defaults(func=cmd_detect, check=_check_detect)
    return p


def _check_simulate(parser, args):
    if args.frames < 1:
        parser.error("--frames must be >= 1")
    if args.workers < 1:
        parser.error("--workers must be >= 1")


def _check_analyze(parser, args):
    if args.tolerance < 0:
        parser.error("--tolerance must be >= 0")
    if args.sweep is None and (args.probe is None or args.ref is None):
        parser.error("--probe and --ref are required without --sweep")
    if args.sweep is not None and args.frames is not None and args.frames < 1:
        parser.error("--frames must be >= 1")


def _check_correlate(parser, args):
    if args.max_disp < 0:
        parser.error("--max-disp must be >= 0")


def _check_detect(parser, args):
    if args.block_frames < 1:
        parser.error("--block-frames must be >= 1")
    if args.trials < 100:
        parser.error("--trials must be >= 100")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.check(parser, args)
        return args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except (ValidationError, AnalysisError, SimulationError, FormatError,
            OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands mirror the pipeline stages: simulate, encode, classify,
select, sweep, fit, heatmap.  Exit codes: 0 success, 1 configuration or
input error, 2 numerical failure (stage named on stderr).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import classify, encoding, harness, sspoc
from .fields import load_field, save_field


def _config(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    if args.seed is not None:
        import dataclasses
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    cell = (args.flap_std, args.rotation_std)
    sf_flap, sf_rot = harness.simulate_pair(cfg, cell, args.trial)
    save_field(sf_flap, os.path.join(out, "strain_flap"))
    save_field(sf_rot, os.path.join(out, "strain_rotation"))
    print(f"wrote strain_flap / strain_rotation under {out}")
    return 0


def cmd_encode(args) -> int:
    cfg = _config(args)
    fields = [load_field(p) for p in args.inputs]
    norm = encoding.joint_norm_constant(fields, cfg.sta) \
        if len(fields) > 1 else None
    out = _out_dir(args)
    for path, f in zip(args.inputs, fields):
        enc = encoding.encode_field(f, cfg.sta, cfg.nla, norm_constant=norm)
        base = os.path.join(out, os.path.basename(path) + "_encoded")
        save_field(enc, base, kind="encoded")
        print(f"wrote {base}")
    return 0


def cmd_classify(args) -> int:
    data = classify.assemble(load_field(args.inputs[0]), load_field(args.inputs[1]))
    parts = classify.split(data)
    model = classify.fit_lda(parts)
    acc = classify.evaluate(model, parts.X_test, parts.y_test)
    print(f"accuracy {acc:.4f}")
    if args.out:
        classify.save_model(model, data.sensor_ids, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_select(args) -> int:
    data = classify.assemble(load_field(args.inputs[0]), load_field(args.inputs[1]))
    parts = classify.split(data)
    sensors = sspoc.sspoc_select(parts, args.q)
    acc = sspoc.classify_with_sensors(sensors, data)
    print(f"q {sensors.q} accuracy {acc:.4f}")
    if args.out:
        sspoc.save_sensor_set(sensors, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    if args.grid == "disturbance":
        results = harness.sweep_disturbances(cfg)
        harness.write_accuracy_csv(results, cfg,
                                   os.path.join(out, "accuracy.csv"))
        harness.write_sigmoids_csv(harness.fit_cells(results, cfg.q_list), cfg,
                                   os.path.join(out, "sigmoids.csv"))
        heatmaps = []
        by_cell = {}
        for r in results:
            by_cell.setdefault(r.cell, []).append(r)
        for cell_trials in by_cell.values():
            try:
                heatmaps.extend(harness.aggregate_heatmap(cell_trials, cfg.heatmap_q))
            except ValueError:
                pass
        harness.write_heatmap_csv(heatmaps, cfg, os.path.join(out, "heatmap.csv"))
        print(f"wrote accuracy.csv, sigmoids.csv, heatmap.csv under {out}")
    else:
        kind = {"encoder-sta": "sta", "encoder-nla": "nla"}[args.grid]
        rows = harness.sweep_encoder(cfg, kind)
        path = os.path.join(out, f"encoder_{kind}.csv")
        harness.write_encoder_csv(rows, cfg, kind, path)
        print(f"wrote {path}")
    return 0


def cmd_fit(args) -> int:
    qs, accs = [], []
    with open(args.input) as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            if row["provenance"] != "sspoc":
                continue
            if args.cell and row["cell"] != args.cell:
                continue
            qs.append(int(row["q"]))
            accs.append(float(row["accuracy"]))
    if len(set(qs)) < 4:
        print("fit: need at least 4 distinct q values", file=sys.stderr)
        return 1
    fit = harness.fit_sigmoid(qs, accs)
    q75 = "never" if fit.q_at_75 is None else f"{fit.q_at_75:.4f}"
    print(f"c1 {fit.c1:.4f} c2 {fit.c2:.4f} c3 {fit.c3:.4f} "
          f"q75 {q75} residual {fit.residual:.4f}")
    return 0


def cmd_heatmap(args) -> int:
    cfg = _config(args)
    sets = [sspoc.load_sensor_set(p) for p in args.inputs]
    qs = {s.q for s in sets}
    if len(qs) != 1:
        print("heatmap: sensor sets disagree on q", file=sys.stderr)
        return 1
    q = qs.pop()
    trials = []
    for i, s in enumerate(sets):
        t = harness.TrialResult(cell=(0.0, 0.0), trial=i)
        t.sensor_sets[q] = s
        t.sspoc_acc[q] = 1.0
        trials.append(t)
    heatmaps = harness.aggregate_heatmap(trials, q)
    harness.write_heatmap_csv(heatmaps, cfg, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wingsense",
                                description="Flapping-plate strain simulation, "
                                "neural encoding, and sparse sensor selection.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="master seed override")
        if out_required:
            sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("simulate", help="strain fields for both conditions")
    common(sp)
    sp.add_argument("--flap-std", type=float, default=0.31)
    sp.add_argument("--rotation-std", type=float, default=0.1)
    sp.add_argument("--trial", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("encode", help="encode strain field files")
    common(sp)
    sp.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="strain field base paths (normalization is shared)")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("classify", help="full-state LDA accuracy")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--in", dest="inputs", nargs=2, required=True,
                    help="flap and rotation field base paths")
    sp.add_argument("--out", help="optional model file")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("select", help="one SSPOC sensor selection")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--in", dest="inputs", nargs=2, required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--out", help="optional sensor-set file")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("sweep", help="disturbance or encoder grid")
    common(sp)
    sp.add_argument("--grid", required=True,
                    choices=["disturbance", "encoder-sta", "encoder-nla"])
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="sigmoid fit from accuracy.csv")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--cell", help="restrict to one cell, e.g. 0.31:0.1")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("heatmap", help="selection frequencies from sensor sets")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="sensor-set files sharing one q")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_heatmap)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:            # argparse usage error -> config error
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

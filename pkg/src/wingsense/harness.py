"""Experiment orchestration: trials, disturbance/encoder sweeps, sigmoid
fits, sensor heatmaps, and CSV persistence.

Result tables (written with a leading comment line carrying the config hash
and master seed):

  accuracy.csv   cell,trial,q,provenance,accuracy
  sigmoids.csv   cell,c1,c2,c3,q75,residual
  heatmap.csv    cell,q,x,y,frequency

`cell` is "<flap_std>:<rotation_std>" in rad/s.  `provenance` is one of
raw_full, encoded_full, sspoc, random.  `q75` is a number or "never".
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from . import classify, encoding, kinematics, plate, sspoc
from .classify import SplitData
from .fields import N_SENSORS, GridField, grid_coordinates

DEFAULT_Q_LIST = (1, 2, 3, 5, 8, 11, 16, 23, 33, N_SENSORS)
DEFAULT_FLAP_LEVELS = (0.031, 0.31, 3.1, 31.0)
DEFAULT_ROTATION_LEVELS = (0.01, 0.1, 1.0, 10.0)


@dataclass
class ExperimentConfig:
    """Everything that determines a run; (config, master_seed) fixes all
    trial seeds, so any result file can be regenerated bit-identically."""

    flap_levels: tuple = DEFAULT_FLAP_LEVELS          # flap disturbance stds, rad/s
    rotation_levels: tuple = DEFAULT_ROTATION_LEVELS  # rotation disturbance stds, rad/s
    q_list: tuple = DEFAULT_Q_LIST
    n_trials: int = 20
    master_seed: int = 0
    rotation_rate: float = 10.0                       # rad/s for the "with rotation" class
    duration_ms: float = 4000.0
    discard_ms: float = 960.0
    heatmap_q: int = 11
    shared_disturbance_seeds: bool = False            # same noise draw for both classes
    sta: encoding.StaParams = field(default_factory=encoding.StaParams)
    nla: encoding.NlaParams = field(default_factory=encoding.NlaParams)
    plate_params: plate.PlateParams = field(default_factory=plate.PlateParams)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        for name in ("flap_levels", "rotation_levels", "q_list"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("flap_levels", "rotation_levels", "q_list"):
            d[key] = list(d[key])
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    for key in ("flap_levels", "rotation_levels", "q_list"):
        if key in d:
            d[key] = tuple(d[key])
    for key, cls in (("sta", encoding.StaParams), ("nla", encoding.NlaParams),
                     ("plate_params", plate.PlateParams)):
        if key in d and isinstance(d[key], dict):
            d[key] = cls(**d[key])
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**d)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def trial_seed(master_seed: int, cell: tuple, trial: int, stream: int) -> int:
    """Deterministic per-(cell, trial, stream) seed so any single trial is
    reproducible in isolation.  Cell levels are keyed by their mantissas."""
    key = [int(master_seed), trial, stream]
    for level in cell:
        key.append(int(round(level * 1000)))
    return int(np.random.SeedSequence(key).generate_state(1)[0])


@dataclass
class TrialResult:
    cell: tuple                          # (flap_std, rotation_std)
    trial: int
    raw_full_acc: Optional[float] = None
    encoded_full_acc: Optional[float] = None
    sspoc_acc: dict = field(default_factory=dict)     # q -> accuracy
    random_acc: dict = field(default_factory=dict)    # q -> accuracy
    sensor_sets: dict = field(default_factory=dict)   # q -> SensorSet
    failed_stage: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    def rows(self):
        """accuracy.csv rows for this trial."""
        cell = format_cell(self.cell)
        out = []
        if self.raw_full_acc is not None:
            out.append((cell, self.trial, N_SENSORS, "raw_full", self.raw_full_acc))
        if self.encoded_full_acc is not None:
            out.append((cell, self.trial, N_SENSORS, "encoded_full", self.encoded_full_acc))
        for q in sorted(self.sspoc_acc):
            out.append((cell, self.trial, q, "sspoc", self.sspoc_acc[q]))
        for q in sorted(self.random_acc):
            out.append((cell, self.trial, q, "random", self.random_acc[q]))
        return out


def format_cell(cell: tuple) -> str:
    return f"{cell[0]:g}:{cell[1]:g}"


def simulate_condition(config: ExperimentConfig, cell: tuple, trial: int,
                       rotating: bool, system: plate.SystemMatrices,
                       basis: plate.ShapeBasis) -> GridField:
    """One strain field: flapping only (rotating=False) or with rotation."""
    flap_std, rot_std = cell
    # stream ids 0/1: flap-noise draw per class; 2/3: rotation-noise draw
    offset = 0 if (rotating is False or config.shared_disturbance_seeds) else 1
    flap_dist = kinematics.realize_disturbance(kinematics.DisturbanceSpec(
        target_std=flap_std, seed=trial_seed(config.master_seed, cell, trial, 0 + offset)))
    rot_dist = kinematics.realize_disturbance(kinematics.DisturbanceSpec(
        target_std=rot_std, seed=trial_seed(config.master_seed, cell, trial, 2 + offset)))
    drive = kinematics.KinematicDrive(
        flap=kinematics.FlapProfile(),
        rotation=kinematics.RotationSpec(config.rotation_rate if rotating else 0.0),
        flap_disturbance=flap_dist,
        rotation_disturbance=rot_dist,
    )
    traj = plate.integrate(system, drive, t_span=(1.0, config.duration_ms))
    return plate.strain_field(traj, basis, config.plate_params,
                              discard=config.discard_ms)


def simulate_pair(config: ExperimentConfig, cell: tuple, trial: int,
                  system=None, basis=None):
    """Strain fields for both classes of one trial."""
    if basis is None:
        basis = plate.build_shape_basis(config.plate_params)
    if system is None:
        system = plate.assemble_matrices(basis, config.plate_params)
    return (simulate_condition(config, cell, trial, False, system, basis),
            simulate_condition(config, cell, trial, True, system, basis))


def _sspoc_q_sweep(parts: SplitData, q_list, alpha=sspoc.DEFAULT_ALPHA):
    """Sensor sets for every q, sharing the SVD and per-rank discriminant
    across q.  The truncation rank is picked per q on a held-out slice of
    the training block, exactly as in sspoc.sspoc_select(r=None)."""
    X, y = parts.X_train, parts.y_train
    tr_idx, va_idx = [], []
    for lab in np.unique(y):
        idx = np.flatnonzero(y == lab)
        n_va = max(1, int(round(sspoc.VALIDATION_FRACTION * idx.size)))
        tr_idx.append(idx[:-n_va])
        va_idx.append(idx[-n_va:])
    tr = np.concatenate(tr_idx)
    va = np.concatenate(va_idx)
    X_tr, y_tr = X[:, tr], y[tr]
    X_va, y_va = X[:, va], y[va]

    small_qs = [q for q in q_list if q < min(X_tr.shape)]
    out = {}
    if small_qs:
        ranks = sorted({max(min(g, min(X_tr.shape)), max(small_qs))
                        for g in sspoc.RANK_GRID})
        full_basis = sspoc.svd_truncate(X_tr, ranks[-1])
        directions = {}
        for rank in ranks:
            b = sspoc._truncate_basis(full_basis, rank)
            directions[rank] = sspoc.lda_direction(b.project(X_tr), y_tr)
        for q in small_qs:
            best_acc, best_set = -1.0, None
            for rank in ranks:
                if rank < q:
                    continue
                b = sspoc._truncate_basis(full_basis, rank)
                sel = sspoc.select_features(b, directions[rank], q)
                cand = sspoc.extract_sensors(
                    sspoc.solve_sparse(sel, alpha=alpha), q)
                sub = SplitData(X_train=X_tr[cand.indices], y_train=y_tr,
                                X_test=X_va[cand.indices], y_test=y_va)
                acc = classify.evaluate(classify.fit_lda(sub),
                                        sub.X_test, sub.y_test)
                if acc > best_acc:
                    best_acc, best_set = acc, cand
            out[q] = best_set
    for q in q_list:
        if q not in out:               # q at or beyond the data rank: keep all
            out[q] = sspoc.SensorSet(indices=np.arange(min(q, X.shape[0])),
                                     provenance="sspoc", truncated=q > X.shape[0])
    return out


def run_trial(config: ExperimentConfig, cell: tuple, trial: int,
              strain_pair=None, sta: Optional[encoding.StaParams] = None,
              nla: Optional[encoding.NlaParams] = None,
              system=None, basis=None) -> TrialResult:
    """One end-to-end trial: simulate both conditions, classify raw and
    encoded full state, then run the q sweep (SSPOC + random baseline).

    A precomputed strain_pair lets encoder sweeps reuse one simulation.
    Stage failures mark the trial rather than aborting the sweep.
    """
    sta = config.sta if sta is None else sta
    nla = config.nla if nla is None else nla
    result = TrialResult(cell=cell, trial=trial)
    stage = "simulate"
    try:
        if strain_pair is None:
            strain_pair = simulate_pair(config, cell, trial, system, basis)
        sf_flap, sf_rot = strain_pair

        stage = "classify_raw"
        raw_parts = classify.split(classify.assemble(sf_flap, sf_rot))
        result.raw_full_acc = classify.evaluate(
            classify.fit_lda(raw_parts), raw_parts.X_test, raw_parts.y_test)

        stage = "encode"
        norm = encoding.joint_norm_constant([sf_flap, sf_rot], sta)
        data = classify.assemble(
            encoding.encode_field(sf_flap, sta, nla, norm_constant=norm),
            encoding.encode_field(sf_rot, sta, nla, norm_constant=norm))

        stage = "classify_encoded"
        parts = classify.split(data)
        result.encoded_full_acc = classify.evaluate(
            classify.fit_lda(parts), parts.X_test, parts.y_test)

        stage = "select"
        qs = [q for q in config.q_list if q < N_SENSORS]
        sets = _sspoc_q_sweep(parts, qs)
        for q in qs:
            result.sensor_sets[q] = sets[q]
            result.sspoc_acc[q] = sspoc.classify_with_sensors(sets[q], data)
            rand = sspoc.random_sensors(
                q, trial_seed(config.master_seed, cell, trial, 100 + q))
            result.random_acc[q] = sspoc.classify_with_sensors(rand, data)
        if N_SENSORS in config.q_list:
            result.sspoc_acc[N_SENSORS] = result.encoded_full_acc
            result.random_acc[N_SENSORS] = result.encoded_full_acc
    except Exception as exc:             # noqa: BLE001 - sweep must continue
        result.failed_stage = f"{stage}: {exc}"
    return result


def run_cell(config: ExperimentConfig, cell: tuple, system=None, basis=None):
    """All trials of one disturbance cell."""
    if basis is None:
        basis = plate.build_shape_basis(config.plate_params)
    if system is None:
        system = plate.assemble_matrices(basis, config.plate_params)
    return [run_trial(config, cell, t, system=system, basis=basis)
            for t in range(config.n_trials)]


def sweep_disturbances(config: ExperimentConfig):
    """Trials on the full flap x rotation disturbance grid, sorted cell
    order; independent trials, deterministic aggregation."""
    basis = plate.build_shape_basis(config.plate_params)
    system = plate.assemble_matrices(basis, config.plate_params)
    results = []
    for flap_std in config.flap_levels:
        for rot_std in config.rotation_levels:
            results.extend(run_cell(config, (flap_std, rot_std), system, basis))
    return results


@dataclass
class SigmoidFit:
    c1: float
    c2: float
    c3: float
    q_at_75: Optional[float]             # None when the plateau stays below 0.75
    residual: float
    flagged: bool = False                # degenerate (near-constant) samples


def _sigmoid(q, c1, c2, c3):
    return 0.5 + c1 / (1.0 + np.exp(-(q - c2) / c3))


def sigmoid_q75(c1: float, c2: float, c3: float) -> Optional[float]:
    """q where the fitted curve crosses 0.75, or None when it never does."""
    if 0.5 + c1 <= 0.75:
        return None
    return c2 - c3 * np.log(4.0 * c1 - 1.0)


def fit_sigmoid(q_values, accuracies) -> SigmoidFit:
    """Least-squares sigmoid accuracy-curve fit by multi-start local
    optimization; the 75% crossing is solved analytically from the fit."""
    q = np.asarray(q_values, dtype=float)
    a = np.asarray(accuracies, dtype=float)
    if np.unique(q).size < 4:
        raise ValueError("need at least 4 distinct q values")
    flagged = np.ptp(a) < 1e-3
    best = None
    spread = max(np.ptp(q) / 4.0, 1.0)
    for c2_0 in np.quantile(q, [0.15, 0.5, 0.85]):
        for c3_0 in (spread / 4.0, spread):
            try:
                popt, _ = curve_fit(
                    _sigmoid, q, a, p0=[max(a.max() - 0.5, 0.01), c2_0, c3_0],
                    bounds=([0.0, -q.max(), 1e-3], [0.5, 2 * q.max(), 10 * spread]),
                    maxfev=20000)
            except RuntimeError:
                continue
            res = float(np.linalg.norm(a - _sigmoid(q, *popt)))
            if best is None or res < best[0]:
                best = (res, popt)
    if best is None:
        return SigmoidFit(c1=0.0, c2=float(np.median(q)), c3=1.0,
                          q_at_75=None, residual=float(np.linalg.norm(a - 0.5)),
                          flagged=True)
    res, (c1, c2, c3) = best
    return SigmoidFit(c1=float(c1), c2=float(c2), c3=float(c3),
                      q_at_75=sigmoid_q75(c1, c2, c3), residual=res,
                      flagged=flagged)


@dataclass
class SensorHeatmap:
    cell: tuple
    q: int
    frequency: np.ndarray                # (N_SENSORS,), selection frequency
    group: str = "all"                   # "all", "good", or "bad"
    empty: bool = False


def aggregate_heatmap(trials, q: int, partition_threshold: Optional[float] = None):
    """Per-location selection frequency over trials at fixed q; with a
    threshold, split into good/bad accuracy groups."""
    trials = [t for t in trials if t.ok and q in t.sensor_sets]
    if not trials:
        raise ValueError(f"no successful trials carry q={q}")
    cell = trials[0].cell

    def freq(group_trials):
        counts = np.zeros(N_SENSORS)
        for t in group_trials:
            counts[t.sensor_sets[q].indices] += 1.0
        return counts / max(len(group_trials), 1)

    if partition_threshold is None:
        return [SensorHeatmap(cell=cell, q=q, frequency=freq(trials))]
    good = [t for t in trials if t.sspoc_acc[q] >= partition_threshold]
    bad = [t for t in trials if t.sspoc_acc[q] < partition_threshold]
    return [
        SensorHeatmap(cell=cell, q=q, frequency=freq(good), group="good",
                      empty=not good),
        SensorHeatmap(cell=cell, q=q, frequency=freq(bad), group="bad",
                      empty=not bad),
    ]


def _open_result_csv(path: str, config: ExperimentConfig, header):
    fh = open(path, "w", newline="")
    fh.write(f"# config={config.hash()} master_seed={config.master_seed}\n")
    writer = csv.writer(fh)
    writer.writerow(header)
    return fh, writer


def write_accuracy_csv(results, config: ExperimentConfig, path: str) -> None:
    fh, w = _open_result_csv(path, config,
                             ["cell", "trial", "q", "provenance", "accuracy"])
    with fh:
        for r in sorted(results, key=lambda r: (format_cell(r.cell), r.trial)):
            for row in r.rows():
                w.writerow([row[0], row[1], row[2], row[3], f"{row[4]:.6f}"])


def write_sigmoids_csv(fits, config: ExperimentConfig, path: str) -> None:
    """fits: list of (cell_string, SigmoidFit)."""
    fh, w = _open_result_csv(path, config,
                             ["cell", "c1", "c2", "c3", "q75", "residual"])
    with fh:
        for cell, f in sorted(fits, key=lambda cf: cf[0]):
            q75 = "never" if f.q_at_75 is None else f"{f.q_at_75:.4f}"
            w.writerow([cell, f"{f.c1:.6f}", f"{f.c2:.6f}", f"{f.c3:.6f}",
                        q75, f"{f.residual:.6f}"])


def write_heatmap_csv(heatmaps, config: ExperimentConfig, path: str) -> None:
    x_mm, y_mm = grid_coordinates()
    fh, w = _open_result_csv(path, config, ["cell", "q", "x", "y", "frequency"])
    with fh:
        for hm in heatmaps:
            cell = format_cell(hm.cell)
            if hm.group != "all":
                cell = f"{cell}:{hm.group}"
            for i in np.flatnonzero(hm.frequency):
                w.writerow([cell, hm.q, f"{x_mm[i]:.3f}", f"{y_mm[i]:.3f}",
                            f"{hm.frequency[i]:.6f}"])


def fit_cells(results, q_list):
    """Per-cell sigmoid fits of SSPOC accuracy vs q."""
    by_cell = {}
    for r in results:
        if r.ok:
            by_cell.setdefault(format_cell(r.cell), []).append(r)
    fits = []
    for cell, trials in by_cell.items():
        qs, accs = [], []
        for t in trials:
            for q in q_list:
                if q in t.sspoc_acc:
                    qs.append(q)
                    accs.append(t.sspoc_acc[q])
        if len(set(qs)) >= 4:
            fits.append((cell, fit_sigmoid(qs, accs)))
    return fits


def sweep_encoder(config: ExperimentConfig, grid: str, cell=(0.31, 0.1)):
    """q_at_75 heatmap over one encoder-parameter grid, strains shared
    across encoder cells.  grid: "sta" varies (f_sta, width); "nla" varies
    (slope, half_max); the other stage stays at defaults."""
    if grid == "sta":
        axis_a = [config.sta.f_sta * s for s in (0.25, 0.5, 1.0, 2.0)]
        axis_b = [config.sta.width * s for s in (0.5, 1.0, 2.0, 4.0)]
    elif grid == "nla":
        axis_a = [config.nla.slope * s for s in (0.25, 0.5, 1.0, 2.0)]
        axis_b = [config.nla.half_max * s for s in (0.5, 1.0, 2.0, 4.0)]
    else:
        raise ValueError("grid must be 'sta' or 'nla'")

    basis = plate.build_shape_basis(config.plate_params)
    system = plate.assemble_matrices(basis, config.plate_params)
    pairs = [simulate_pair(config, cell, t, system, basis)
             for t in range(config.n_trials)]
    rows = []
    for a in axis_a:
        for b in axis_b:
            if grid == "sta":
                sta = dataclasses.replace(config.sta, f_sta=a, width=b)
                nla = config.nla
            else:
                sta = config.sta
                nla = dataclasses.replace(config.nla, slope=a, half_max=b)
            results = [run_trial(config, cell, t, strain_pair=pairs[t],
                                 sta=sta, nla=nla)
                       for t in range(config.n_trials)]
            qs, accs = [], []
            for r in results:
                if r.ok:
                    for q, acc in r.sspoc_acc.items():
                        qs.append(q)
                        accs.append(acc)
            fit = fit_sigmoid(qs, accs) if len(set(qs)) >= 4 else None
            q75 = None if fit is None else fit.q_at_75
            rows.append((a, b, q75, fit))
    return rows


def write_encoder_csv(rows, config: ExperimentConfig, grid: str, path: str) -> None:
    names = ("f_sta", "width") if grid == "sta" else ("slope", "half_max")
    fh, w = _open_result_csv(path, config, [names[0], names[1], "q75"])
    with fh:
        for a, b, q75, _fit in rows:
            w.writerow([f"{a:.6g}", f"{b:.6g}",
                        "never" if q75 is None else f"{q75:.4f}"])

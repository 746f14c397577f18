"""End-to-end validation suite.

Run with -v for one pass/fail line per criterion.  The heavy shared fixture
simulates the four rotation-disturbance cells (20 trials each) at the
moderate flapping-noise level; the remaining criteria use cheap dedicated
oracles.
"""

import dataclasses
import itertools
import time

import numpy as np
import pytest

from wingsense import classify as cls
from wingsense import encoding, harness, kinematics as kin, plate, sspoc
from wingsense.fields import GridField, N_SENSORS

MODERATE = (0.31, 0.1)
ROTATION_LEVELS = (0.01, 0.1, 1.0, 10.0)
SPARSE_BAND = (8, 11)        # sensor counts inside the 8..13 efficiency band
FIXED_Q = 11


def _report(name, ok, detail):
    line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared heavy fixtures


@dataclasses.dataclass
class SweepData:
    config: harness.ExperimentConfig
    results: dict                  # (flap_std, rot_std) -> [TrialResult]
    pair_paths: dict               # trial -> npz path (moderate cell strains)
    moderate_elapsed_s: float


def _save_pair(path, pair):
    np.savez(path,
             flap=pair[0].values, flap_t0=pair[0].t_start_ms,
             rot=pair[1].values, rot_t0=pair[1].t_start_ms)


def _load_pair(path):
    with np.load(path) as z:
        return (GridField(values=z["flap"], t_start_ms=float(z["flap_t0"])),
                GridField(values=z["rot"], t_start_ms=float(z["rot_t0"])))


@pytest.fixture(scope="session")
def sweep(tmp_path_factory):
    cache = tmp_path_factory.mktemp("strain_cache")
    config = harness.ExperimentConfig(flap_levels=(MODERATE[0],),
                                      rotation_levels=ROTATION_LEVELS)
    basis = plate.build_shape_basis(config.plate_params)
    system = plate.assemble_matrices(basis, config.plate_params)

    pair_paths = {}
    moderate = []
    t0 = time.perf_counter()
    for t in range(config.n_trials):
        pair = harness.simulate_pair(config, MODERATE, t, system, basis)
        path = str(cache / f"pair_{t}.npz")
        _save_pair(path, pair)
        pair_paths[t] = path
        moderate.append(harness.run_trial(config, MODERATE, t, strain_pair=pair))
    moderate_elapsed = time.perf_counter() - t0

    results = {MODERATE: moderate}
    side_config = dataclasses.replace(config, q_list=(FIXED_Q, N_SENSORS))
    for rot in ROTATION_LEVELS:
        cell = (MODERATE[0], rot)
        if cell == MODERATE:
            continue
        results[cell] = harness.run_cell(side_config, cell, system, basis)
    return SweepData(config=config, results=results, pair_paths=pair_paths,
                     moderate_elapsed_s=moderate_elapsed)


@pytest.fixture(scope="session")
def quiet_pair():
    """Disturbance-free strain fields without and with body rotation."""
    params = plate.PlateParams()
    basis = plate.build_shape_basis(params)
    system = plate.assemble_matrices(basis, params)
    fields = []
    for rate in (0.0, 10.0):
        drive = kin.KinematicDrive(rotation=kin.RotationSpec(rate))
        traj = plate.integrate(system, drive, t_span=(1.0, 4000.0))
        fields.append(plate.strain_field(traj, basis, params, discard=960.0))
    return fields


def _ok_trials(trials):
    out = [t for t in trials if t.ok]
    assert len(out) >= 0.9 * len(trials), \
        f"too many failed trials: {[t.failed_stage for t in trials if not t.ok]}"
    return out


# ---------------------------------------------------------------------------
# criteria


def test_01_raw_vs_encoded_full_state(sweep):
    """Raw full-state accuracy near chance, encoded full-state high, within
    the runtime budget."""
    trials = _ok_trials(sweep.results[MODERATE])
    raw = np.mean([t.raw_full_acc for t in trials])
    enc = np.mean([t.encoded_full_acc for t in trials])
    minutes = sweep.moderate_elapsed_s / 60.0
    ok = 0.40 <= raw <= 0.60 and enc >= 0.80 and minutes <= 30.0
    _report("criterion 1 raw-vs-encoded",
            ok, f"raw={raw:.3f} encoded={enc:.3f} runtime={minutes:.1f} min")


def test_02_sparse_efficiency(sweep):
    """Few selected sensors reach near-full encoded accuracy on most trials;
    random placement needs at least twice as many sensors on average."""
    trials = _ok_trials(sweep.results[MODERATE])
    near = [min(t.encoded_full_acc - t.sspoc_acc[q] for q in SPARSE_BAND) <= 0.05
            for t in trials]
    frac = np.mean(near)

    qs = sorted(trials[0].sspoc_acc)
    mean_sspoc = {q: np.mean([t.sspoc_acc[q] for t in trials]) for q in qs}
    mean_rand = {q: np.mean([t.random_acc[q] for t in trials]) for q in qs}
    band = np.mean([t.encoded_full_acc for t in trials]) - 0.05
    q_sspoc = next((q for q in SPARSE_BAND if mean_sspoc[q] >= band), None)
    q_rand = next((q for q in qs if mean_rand[q] >= band), N_SENSORS)
    ok = frac >= 0.70 and q_sspoc is not None and q_rand >= 2 * q_sspoc
    _report("criterion 2 sparse-efficiency", ok,
            f"near-full on {frac:.0%} of trials, "
            f"q_select={q_sspoc} q_random={q_rand}")


def test_03_rotation_strain_scale(quiet_pair):
    """Rotation-induced strain is about three orders of magnitude below the
    flapping strain."""
    flap, rot = quiet_pair
    ratio = np.max(np.abs(rot.values - flap.values)) / np.max(np.abs(flap.values))
    ok = 1e-4 <= ratio <= 1e-2
    _report("criterion 3 rotation-strain-scale", ok, f"ratio={ratio:.2e}")


def test_04_coriolis_frequency(quiet_pair):
    """Both the analytic rotating-frame forcing product and the simulated
    strain difference peak at twice the flapping frequency."""
    flap, rot = quiet_pair
    profile = kin.FlapProfile()
    t = np.arange(961.0, 4000.0)
    product = np.array([2.0 * np.sin(kin.flap_angle(profile, ti))
                        * kin.flap_velocity(profile, ti) * 10.0 for ti in t])

    def peak_hz(signal_matrix):
        spec = np.abs(np.fft.rfft(signal_matrix, axis=-1))
        if spec.ndim == 2:
            spec = spec.mean(axis=0)
        spec[0] = 0.0
        freqs = np.fft.rfftfreq(signal_matrix.shape[-1], d=1e-3)
        return freqs[np.argmax(spec)], freqs[1]

    p1, bin1 = peak_hz(product)
    p2, bin2 = peak_hz(rot.values - flap.values)
    ok = abs(p1 - 50.0) <= bin1 and abs(p2 - 50.0) <= bin2
    _report("criterion 4 coriolis-frequency", ok,
            f"analytic={p1:.2f} Hz, strain-difference={p2:.2f} Hz")


def test_05_sigmoid_fit_exactness():
    """Known constants give the expected 75% crossing; parameters recover
    from clean synthetic samples."""
    q75 = harness.sigmoid_q75(0.378, 6.904, 0.583)
    ref_ok = abs(q75 - 7.29) <= 0.01

    true = (0.4, 9.0, 1.2)
    q = np.repeat([1, 2, 3, 5, 8, 11, 16, 23, 33], 3).astype(float)
    fit = harness.fit_sigmoid(q, harness._sigmoid(q, *true))
    err = max(abs(fit.c1 - true[0]), abs(fit.c2 - true[1]), abs(fit.c3 - true[2]))
    ok = ref_ok and err <= 1e-4
    _report("criterion 5 sigmoid-fit", ok,
            f"q75={q75:.4f}, recovery error={err:.2e}")


def _planted_instance(rng, n=8, r=3):
    support = rng.choice(n, size=3, replace=False)
    s_true = np.zeros(n)
    s_true[support] = rng.normal(size=3) + np.sign(rng.normal(size=3))
    Psi = np.linalg.qr(rng.normal(size=(n, r)))[0]
    return Psi, Psi.T @ s_true


def _best_subset_support(Psi, w, k, lam, alpha):
    best, best_obj = None, np.inf
    for sub in itertools.combinations(range(Psi.shape[0]), k):
        _, _, hist = sspoc._proximal_gradient(Psi[list(sub)], w, lam, alpha,
                                              max_iter=5000)
        if hist[-1] < best_obj - 1e-10:
            best_obj = hist[-1]
            best = np.array(sub)
    return best


def test_06_elastic_net_oracle():
    """Solver support matches the exhaustive best same-size subset under the
    identical objective; the ridge limit matches its closed form."""
    rng = np.random.default_rng(10)
    trials, hits = 100, 0
    for _ in range(trials):
        Psi, w = _planted_instance(rng)
        sel = sspoc.FeatureSelection(indices=np.arange(3), Psi_rho=Psi, w_rho=w)
        sol = sspoc.solve_sparse(sel)
        got = np.sort(np.flatnonzero(np.abs(sol.s) > 1e-6 * np.abs(sol.s).max()))
        if np.array_equal(got, _best_subset_support(Psi, w, got.size,
                                                    sol.lam, sol.alpha)):
            hits += 1

    worst = 0.0
    for _ in range(20):
        A = rng.normal(size=(8, 3))
        w = rng.normal(size=3)
        lam = 10 ** rng.uniform(-2, 0)
        sel = sspoc.FeatureSelection(indices=np.arange(3), Psi_rho=A, w_rho=w)
        sol = sspoc.solve_sparse(sel, alpha=0.0, lam=lam, max_iter=500000,
                                 tol=0.0)
        ref = np.linalg.solve(A @ A.T + 2.0 * lam * np.eye(8), A @ w)
        worst = max(worst, float(np.max(np.abs(sol.s - ref))))
    ok = hits >= 0.95 * trials and worst < 1e-8
    _report("criterion 6 elastic-net-oracle", ok,
            f"support {hits}/{trials}, ridge error={worst:.2e}")


def test_07_lda_oracle():
    """Discriminant direction and threshold match their closed forms."""
    from scipy.optimize import brentq
    from scipy.stats import norm

    rng = np.random.default_rng(0)
    worst_cos = 1.0
    for _ in range(100):
        n_feat, n_per = 5, 200
        cov = rng.normal(size=(n_feat, n_feat))
        cov = cov @ cov.T + n_feat * np.eye(n_feat)
        mu = rng.normal(size=n_feat) * 2.0
        X = np.hstack([rng.multivariate_normal(np.zeros(n_feat), cov, n_per).T,
                       rng.multivariate_normal(mu, cov, n_per).T])
        y = np.concatenate([np.zeros(n_per), np.ones(n_per)]).astype(int)
        S_w, _ = cls.scatter_matrices(X, y)
        ref = np.linalg.solve(S_w, X[:, y == 1].mean(axis=1)
                              - X[:, y == 0].mean(axis=1))
        ref /= np.linalg.norm(ref)
        w = cls.fit_lda(cls.SplitData(X_train=X, y_train=y,
                                      X_test=X, y_test=y)).w
        worst_cos = min(worst_cos, abs(float(w @ ref)))

    worst_thr = 0.0
    rng = np.random.default_rng(2)
    for _ in range(100):
        m0, m1 = np.sort(rng.normal(size=2) * 3)
        s0, s1 = 0.5 + rng.random(2) * 2
        if abs(s0 - s1) < 1e-3:
            continue
        eta = np.concatenate([rng.normal(m0, s0, 4000), rng.normal(m1, s1, 4000)])
        y = np.concatenate([np.zeros(4000), np.ones(4000)]).astype(int)
        thr = cls.gaussian_threshold(eta, y)
        e0, e1 = eta[y == 0], eta[y == 1]
        f = lambda x: (norm.pdf(x, e0.mean(), e0.std())
                       - norm.pdf(x, e1.mean(), e1.std()))
        if f(e0.mean()) * f(e1.mean()) > 0:
            continue
        ref = brentq(f, e0.mean(), e1.mean(), xtol=1e-12)
        worst_thr = max(worst_thr, abs(thr - ref))
    ok = worst_cos > 0.999 and worst_thr < 1e-6
    _report("criterion 7 lda-oracle", ok,
            f"cosine={worst_cos:.5f}, threshold error={worst_thr:.2e}")


def test_08_nonlinearity_necessity(sweep):
    """The linear-activation encoder variant never reaches 0.75 accuracy at
    any sensor count."""
    linear = encoding.NlaParams(linear=True)
    peak = 0.0
    for t in range(sweep.config.n_trials):
        pair = _load_pair(sweep.pair_paths[t])
        result = harness.run_trial(sweep.config, MODERATE, t,
                                   strain_pair=pair, nla=linear)
        assert result.ok, result.failed_stage
        peak = max(peak, result.encoded_full_acc,
                   max(result.sspoc_acc.values()))
    ok = peak < 0.75
    _report("criterion 8 nonlinearity-necessity", ok, f"peak accuracy={peak:.3f}")


def _two_cluster_silhouette(values):
    """Mean silhouette of the best 1-D two-cluster split."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    best_cut, best_ss = None, np.inf
    for cut in range(1, n):
        ss = ((v[:cut] - v[:cut].mean()) ** 2).sum() \
             + ((v[cut:] - v[cut:].mean()) ** 2).sum()
        if ss < best_ss:
            best_ss, best_cut = ss, cut
    labels = np.zeros(n, dtype=int)
    labels[best_cut:] = 1
    scores = []
    for i in range(n):
        same = v[labels == labels[i]]
        other = v[labels != labels[i]]
        a = np.abs(same - v[i]).sum() / max(same.size - 1, 1)
        b = np.abs(other - v[i]).mean()
        scores.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(scores))


def test_09_robustness_trend(sweep):
    """Mean accuracy at fixed sensor count does not increase with rotation
    noise; at the strongest level the trial accuracies split in two."""
    means = []
    for rot in ROTATION_LEVELS:
        trials = _ok_trials(sweep.results[(MODERATE[0], rot)])
        means.append(np.mean([t.sspoc_acc[FIXED_Q] for t in trials]))
    isotone = all(means[i] >= means[i + 1] - 1e-12 for i in range(len(means) - 1))

    noisy = _ok_trials(sweep.results[(MODERATE[0], ROTATION_LEVELS[-1])])
    sil = _two_cluster_silhouette([t.sspoc_acc[FIXED_Q] for t in noisy])
    ok = isotone and sil > 0.5
    _report("criterion 9 robustness-trend", ok,
            f"means={np.round(means, 3).tolist()}, silhouette={sil:.3f}")


def test_10_determinism(tmp_path):
    """Result files regenerate bit-identically from (config, master seed)."""
    config = harness.ExperimentConfig(
        flap_levels=(0.31,), rotation_levels=(0.1,), q_list=(3, 5),
        n_trials=1, duration_ms=1800.0, heatmap_q=3)

    def produce(tag):
        results = harness.sweep_disturbances(config)
        acc = str(tmp_path / f"accuracy_{tag}.csv")
        hm = str(tmp_path / f"heatmap_{tag}.csv")
        harness.write_accuracy_csv(results, config, acc)
        harness.write_heatmap_csv(
            harness.aggregate_heatmap(results, config.heatmap_q), config, hm)
        return open(acc, "rb").read(), open(hm, "rb").read()

    first = produce("a")
    second = produce("b")
    ok = first[0] == second[0] and first[1] == second[1]
    _report("criterion 10 determinism", ok,
            f"accuracy.csv {len(first[0])} bytes, heatmap.csv {len(first[1])} bytes")

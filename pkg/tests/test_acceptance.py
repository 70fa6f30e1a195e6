"""Acceptance criteria; each test records one pass/fail line."""

import math
import time

import numpy as np

from horizonlab import csvio
from horizonlab.classical import (
    DEFAULT_MAPS, FitKind, PhaseMap, classical_cost_curve, divergence_growth, tangent_lyapunov,
)
from horizonlab.costmeter import Classification, cost_exponent, linear_fit, prediction_cost_curve
from horizonlab.evolution import FULL, OverlapSeries, linear_grid, log_grid, overlap_series, unitarity_check
from horizonlab.harness import ExperimentConfig, SpectrumCache, run
from horizonlab.horizon import amplitude_theory, horizon_report
from horizonlab.perturbation import ErrorDistribution, rayleigh_energy_error, sample_perturbed
from horizonlab.ritz import ModelHamiltonian, convergence_study, ritz_solve
from horizonlab.spectral_core import SpectralModel

from conftest import random_state, record

QUARTIC = ModelHamiltonian.coupled_quartic(0.1)
STUDY_DIMS = [6, 7, 8, 9, 10, 11, 12, 13, 14]


def test_c01_unitarity(rng):
    start = time.perf_counter()
    dim = 64
    times = np.linspace(0.0, 1e6, 1000)
    drift = 0.0
    for _ in range(100):
        model = SpectralModel.equal_coefficients(np.sort(rng.uniform(0.0, 10.0, dim)))
        a, b = random_state(rng, dim), random_state(rng, dim)
        drift = max(drift, unitarity_check(model, a, b, times))
    elapsed = time.perf_counter() - start
    ok = drift <= 1e-10 and elapsed < 10
    assert record(1, ok, f"max drift {drift:.2e} (<= 1e-10), {elapsed:.2f} s (< 10 s)")


def test_c02_deviation_identity():
    worst = 0.0
    count = 0
    for dim, seed in ((10, 0), (200, 1), (1000, 2)):
        model = SpectralModel.oscillator_ladder(dim)
        dist = ErrorDistribution.uniform_with_dispersion(1e-3, seed)
        cases = [
            (sample_perturbed(model, dist), "diagonal", log_grid(1e-2, 1e6, 2000)),
            (sample_perturbed(model, dist, dE_coeff=1e-2), "diagonal", linear_grid(1e5, 2000)),
        ]
        if dim <= 200:
            cases.append((sample_perturbed(model, dist, 1e-3, residual_eps=1e-3), FULL,
                          linear_grid(1e4, 200)))
        for pert, mode, times in cases:
            s = overlap_series(model, pert, times, mode)
            ident = np.sqrt(np.maximum(0.0, 2.0 * (1.0 - s.overlap_re)))
            worst = max(worst, float(np.abs(s.deviation - ident).max()))
            count += len(s)
    ok = worst <= 1e-10
    assert record(2, ok, f"{count} samples, max |deviation - identity| {worst:.1e} (<= 1e-10)")


def test_c03_eigenvalue_error_identity(rng):
    start = time.perf_counter()
    worst_rel = 0.0
    violations = 0
    for _ in range(1000):
        A = rng.normal(size=(16, 16))
        H = (A + A.T) / 2
        w, U = np.linalg.eigh(H)
        k = rng.integers(16)
        eps = 10.0 ** rng.uniform(-6, -1)
        d = rng.normal(size=16)
        d *= eps / np.linalg.norm(d)
        r = rayleigh_energy_error(H, U[:, k], d)
        phi = U[:, k] + d
        direct = phi @ H @ phi - w[k]
        # relative to the magnitude of the quantities being subtracted
        scale = np.linalg.norm(H, 2) * (1.0 + eps) ** 2
        worst_rel = max(worst_rel, abs(r.delta_E - direct) / scale)
        violations += abs(r.delta_E) > r.bound * (1 + 1e-12)
    elapsed = time.perf_counter() - start
    ok = worst_rel <= 1e-12 and violations == 0 and elapsed < 5
    assert record(3, ok, f"max rel diff {worst_rel:.1e} (<= 1e-12), bound violations "
                         f"{violations}, {elapsed:.2f} s (< 5 s)")


def test_c04_horizon_law():
    start = time.perf_counter()
    model = SpectralModel.equal_coefficients(SpectralModel.oscillator_ladder(200).energies)
    ratios, inv_dE, tps = [], [], []
    for dE in (1e-2, 1e-3, 1e-4):
        for seed in range(8):
            pert = sample_perturbed(model, ErrorDistribution.uniform_with_dispersion(dE, seed))
            r = horizon_report(model, pert, tail_samples=200, tail=(10.0, 12.0))
            ratios.append(r.t_p_empirical / r.t_p_theory)
            inv_dE.append(1.0 / dE)
            tps.append(r.t_p_empirical)
    slope, _, _ = linear_fit(np.log(inv_dE), np.log(tps))
    elapsed = time.perf_counter() - start
    ratios = np.array(ratios)
    ok = (np.all((ratios > 0.5) & (ratios < 2.0)) and abs(slope - 1.0) <= 0.1 and elapsed < 60)
    assert record(4, ok, f"T_p/(pi hbar/dE_measured) in [{ratios.min():.3f}, {ratios.max():.3f}] "
                         f"(factor 2), slope {slope:.4f} (1 +- 0.1), {elapsed:.1f} s (< 60 s)")


def test_c05_amplitude_law():
    start = time.perf_counter()
    dims = [50, 200, 800]
    pooled, per_seed = [], []
    for dim in dims:
        model = SpectralModel.oscillator_ladder(dim)
        squares = []
        for seed in range(8):
            pert = sample_perturbed(model, ErrorDistribution.uniform_with_dispersion(1e-3, seed))
            r = horizon_report(model, pert, tail=(10.0, 100.0))
            per_seed.append(r.amplitude_empirical / amplitude_theory(dim))
            squares.append(r.amplitude_empirical ** 2)
        pooled.append(math.sqrt(np.mean(squares)))
    pooled_ratio = np.array(pooled) / np.array([amplitude_theory(d) for d in dims])
    slope, _, _ = linear_fit(np.log(dims), np.log(pooled))
    per_seed = np.array(per_seed)
    elapsed = time.perf_counter() - start
    ok = (np.all(np.abs(per_seed - 1) <= 0.2) and abs(slope + 0.5) <= 0.05 and elapsed < 60)
    assert record(5, ok, f"RMS/A per run in [{per_seed.min():.3f}, {per_seed.max():.3f}], "
                         f"pooled {np.round(pooled_ratio, 3).tolist()} (within 20%), "
                         f"slope {slope:.4f} (-0.5 +- 0.05), {elapsed:.1f} s (< 60 s)")


def _coarse_decay_ok(times, values, tp, ceiling):
    """Block RMS over T_p/4 windows on [0, 2 T_p]: falls until inside the band, then stays."""
    blocks = []
    for k in range(8):
        mask = (times >= k * tp / 4) & (times < (k + 1) * tp / 4)
        blocks.append(math.sqrt(np.mean(values[mask] ** 2)))
    inside = next((k for k, b in enumerate(blocks) if b < ceiling), None)
    if inside is None:
        return False, blocks
    falling = all(blocks[k + 1] <= blocks[k] for k in range(inside))
    return falling and all(b < ceiling for b in blocks[inside:]), blocks


def test_c06_fig1_morphology(tmp_path):
    params = {"dim": 200, "dE": 1e-3, "dE_coeff": 1e-3, "overlap_tp": 20.0,
              "overlap_samples": 4001, "deviation_tp": 200.0, "deviation_samples": 20001}
    ceiling = 3 * amplitude_theory(params["dim"])
    details, ok = [], True
    for seed in range(5):
        out = tmp_path / f"fig1_{seed}"
        run(ExperimentConfig("fig1", dict(params, seed=seed), out))
        short = OverlapSeries.from_csv(out / "fig1_overlap.csv")
        long = OverlapSeries.from_csv(out / "fig1_deviation.csv")
        tp = short.times[-1] / params["overlap_tp"]
        start_gap = 1.0 - short.overlap_re[0]
        decays, _ = _coarse_decay_ok(short.times, short.overlap_re, tp, ceiling)
        mean_dev = float(long.deviation[long.times >= 10 * tp].mean())
        dev_ok = abs(mean_dev / math.sqrt(2) - 1) <= 0.05
        run_ok = 0 <= start_gap <= 10 * params["dE_coeff"] and decays and dev_ok
        ok &= run_ok
        details.append(f"seed {seed}: 1-ov(0)={start_gap:.1e} decay={'ok' if decays else 'no'} "
                       f"<dev>/sqrt2={mean_dev / math.sqrt(2):.4f}")
    assert record(6, ok, "; ".join(details))


def test_c07_ritz_sanity_and_monotonicity():
    h = ModelHamiltonian.harmonic(omega=1.3, hbar=0.7)
    values = ritz_solve(h, 32).eigenvalues
    harmonic_err = float(np.abs(values - 0.7 * 1.3 * (np.arange(32) + 0.5)).max())
    levels = 10
    dims = list(range(4, 25))
    tracked = np.array([ritz_solve(QUARTIC, D).eigenvalues[:levels] for D in dims[2:]])
    violations = int(np.sum(np.diff(tracked, axis=0) > 1e-10))
    ok = harmonic_err <= 1e-10 and violations == 0
    assert record(7, ok, f"harmonic max error {harmonic_err:.1e} (<= 1e-10); quartic levels "
                         f"over D=6..24: {violations} increases (0)")


def test_c08_convergence_power_law(tmp_path):
    start = time.perf_counter()
    out = tmp_path / "ritz"
    run(ExperimentConfig("ritz", {"dims": STUDY_DIMS, "levels": 10, "reference_D": 24}, out),
        cache=SpectrumCache(tmp_path / "cold"))
    study = convergence_study(QUARTIC, STUDY_DIMS, 10, 24)
    errors = np.asarray(study.errors)
    # a unit step in D adds basis functions of one parity only, so levels of the
    # other parity sector repeat exactly; a step of two enlarges every sector
    strictly = bool(np.all(np.diff(errors[0::2], axis=0) < 0)
                    and np.all(np.diff(errors[1::2], axis=0) < 0))
    unit_steps = np.diff(errors, axis=0)
    never_up = bool(np.all(unit_steps <= 0))
    repeats = int(np.sum(unit_steps == 0))
    summary = csvio.read_csv(out / "study_summary.csv", csvio.STUDY_SUMMARY_HEADER)
    alpha = float(summary["alpha_hat"][0])
    r2 = float(summary["r2"][0])
    elapsed = time.perf_counter() - start
    ok = strictly and never_up and r2 >= 0.9 and alpha > 0 and elapsed < 300
    assert record(8, ok, f"errors strictly decreasing per parity chain: {strictly}, never "
                         f"increasing per unit step: {never_up} ({repeats} exact repeats "
                         f"from parity); alpha_hat {alpha:.2f} (> 0), "
                         f"r2 {r2:.4f} (>= 0.9), {elapsed:.1f} s (< 300 s)")


def _classify_both(T, study, cache):
    return {system: prediction_cost_curve(system, T, study=study, cache=cache).fit
            for system in ("integrable", "nonintegrable")}


def test_c09_cost_scaling(cache):
    study = convergence_study(QUARTIC, STUDY_DIMS, 10, 24, cache=cache)
    prediction_cost_curve("nonintegrable", np.logspace(2, 12, 11), study=study, cache=cache)
    start = time.perf_counter()
    base = _classify_both(np.logspace(2, 12, 11), study, cache)
    dense = _classify_both(np.logspace(2, 12, 21), study, cache)
    beta, beta_r2, _ = cost_exponent(QUARTIC, [8, 16, 32], cache=cache)
    elapsed = time.perf_counter() - start
    expected = {"integrable": Classification.COMPRESSIBLE,
                "nonintegrable": Classification.INCOMPRESSIBLE}
    stable = all(base[s].classification is expected[s] and dense[s].classification is expected[s]
                 for s in expected)
    ok = stable and beta > 2 and elapsed < 600
    parts = [f"{s}: {base[s].classification.value}/{dense[s].classification.value} "
             f"(power r2 {base[s].power_r2:.3f}, polylog r2 {base[s].polylog_r2:.3f})"
             for s in expected]
    assert record(9, ok, "; ".join(parts) + f"; beta {beta:.2f} (> 2), warm {elapsed:.1f} s")


def test_c10_classical_dichotomy():
    start = time.perf_counter()
    chaotic = PhaseMap("standard", 7.0, 1.0, 0.0)
    lam_tangent = tangent_lyapunov(chaotic)
    delta0 = 1e-60
    steps = int(math.log(0.1 / delta0) / lam_tangent * 1.2)
    growth = divergence_growth(chaotic, delta0, steps, 256)
    lam_ok = (growth.fit_kind is FitKind.EXPONENTIAL and growth.r2 >= 0.95
              and abs(growth.rate / lam_tangent - 1) <= 0.2)
    rotor = divergence_growth(DEFAULT_MAPS["integrable"], delta0, 200, 256)
    rotation = divergence_growth(PhaseMap("rotation", (math.sqrt(5) - 1) / 2, 1.0), delta0,
                                 200, 256)
    poly_ok = all(g.fit_kind is FitKind.POLYNOMIAL and g.rate <= 1 for g in (rotor, rotation))
    T = np.logspace(3, 30, 28)
    chaos_cost = classical_cost_curve(chaotic, T, 1e-3, growth=growth, delta0=delta0)
    rotor_cost = classical_cost_curve(DEFAULT_MAPS["integrable"], T, 1e-3, growth=rotor,
                                      delta0=delta0)
    cost_ok = (chaos_cost.mantissa_model.model_kind.value == "power_law"
               and rotor_cost.mantissa_model.model_kind.value == "poly_log"
               and chaos_cost.mantissa_model.classification is Classification.INCOMPRESSIBLE
               and rotor_cost.mantissa_model.classification is Classification.COMPRESSIBLE)
    elapsed = time.perf_counter() - start
    ok = lam_ok and poly_ok and cost_ok and elapsed < 60
    assert record(10, ok,
                  f"K=7 lambda {growth.rate:.4f} vs tangent {lam_tangent:.4f} "
                  f"(r2 {growth.r2:.4f}); rotor degree {rotor.rate:.3f}, rotation degree "
                  f"{rotation.rate:.3f}; cost model chaotic {chaos_cost.mantissa_model.model_kind.value}"
                  f", integrable {rotor_cost.mantissa_model.model_kind.value}; {elapsed:.1f} s (< 60 s)")


SMALL = {
    "evolve": {"seed": 11, "dim": 64, "samples": 500, "dE_coeff": 1e-3, "residual_eps": 1e-3,
               "mode": "full"},
    "horizon": {"seed": 11, "dim": 100, "dE": [1e-2, 1e-3], "seeds": 3},
    "amplitude": {"seed": 11, "dims": [50, 100], "seeds": 2, "tail_samples": 500},
    "ritz": {"dims": [6, 8, 10, 12], "levels": 6, "reference_D": 16},
    "cost_scan": {"dims": [6, 8, 10, 12], "levels": 6, "reference_D": 16, "beta_dims": [4, 6, 8]},
    "classical": {"delta0": 1e-30, "n_bits": 128},
    "fig1": {"seed": 11, "dim": 100, "overlap_samples": 500, "deviation_samples": 2000},
}


def test_c11_determinism(tmp_path):
    mismatched = []
    total = 0
    for name, params in SMALL.items():
        outputs = []
        for attempt in ("a", "b"):
            out = tmp_path / name / attempt
            run(ExperimentConfig(name, params, out), threads=2 if attempt == "b" else 1,
                cache=SpectrumCache(tmp_path / "cache" / name / attempt))
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        total += len(outputs[0])
        if outputs[0] != outputs[1] or not outputs[0]:
            mismatched.append(name)
    ok = not mismatched
    assert record(11, ok, f"{len(SMALL)} experiments, {total} CSV files byte-identical; "
                          f"mismatches: {mismatched or 'none'}")

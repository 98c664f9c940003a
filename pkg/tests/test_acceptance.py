"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""
import json
import subprocess
import sys
import time
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np

import kmsgreen as kg
from kmsgreen.cumulants import subsets
from kmsgreen.greens import equal_argument_moments, growth_probe, moment_by_differentiation
from kmsgreen.sampler import empirical_green, empirical_moment, k_statistic, sample_gaussian, sample_mixture
from kmsgreen.verify import (
    CorruptedKernel,
    invariance_audit,
    kernel_positivity,
    reflection_positivity,
    s_positivity,
)

from conftest import ACCEPTANCE_LINES, NR, REL, coth
from oracles import bell_triangle

TWO_ATOM_CONFIG = Path(__file__).resolve().parents[1] / "demos" / "configs" / "two_atom.json"


def record(number, title, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _kernel_grid():
    # 100 (h, t, beta) triples: h log-spaced in [0.5, 20], t covering [0, beta] including both ends
    rng = np.random.default_rng(1001)
    betas = np.resize([1.0, 2.0, 8.0], 100)
    hs = np.geomspace(0.5, 20.0, 100)
    rng.shuffle(hs)
    fracs = rng.uniform(0.0, 1.0, 100)
    fracs[:6] = [0.0, 1.0, 0.5, 0.0, 1.0, 0.5]
    return [(float(h), float(f * b), float(b)) for h, f, b in zip(hs, fracs, betas)]


def test_criterion_01_closed_form_vs_matsubara():
    start = time.perf_counter()
    worst = 0.0
    for h, t, beta in _kernel_grid():
        closed = kg.covariance_scalar(h, t, kg.ThermalCircle(beta))
        # 1e5 explicit modes plus the exact Bernoulli sum of the series tail
        series = kg.matsubara_covariance(h, t, beta, n_modes=100_000, resum_order=24, dps=150)
        worst = max(worst, abs(closed - series) / closed)
    elapsed = time.perf_counter() - start
    record(1, "closed form vs Matsubara series", worst < 1e-6 and elapsed < 10.0,
           f"max rel err {worst:.2e} (< 1e-6), {elapsed:.2f} s (< 10 s)")


def test_criterion_02_periodicity_symmetry():
    worst = 0.0
    for h, t, beta in _kernel_grid():
        c = kg.ThermalCircle(beta)
        k = kg.covariance_scalar(h, t, c)
        worst = max(worst, abs(k - kg.covariance_scalar(h, beta - t, c)) / k,
                    abs(k - kg.covariance_scalar(h, -t, c)) / k)
    record(2, "K(t) = K(beta - t) = K(-t)", worst < 1e-12, f"max rel dev {worst:.2e} (< 1e-12)")


def test_criterion_03_bell_counts():
    start = time.perf_counter()
    counts = [sum(1 for _ in kg.enumerate_partitions(n)) for n in range(1, 11)]
    elapsed = time.perf_counter() - start
    expected = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]
    ok = counts == bell_triangle(10) == expected and elapsed < 5.0
    record(3, "partition counts are Bell numbers", ok, f"B_1..B_10 = {counts}, {elapsed:.2f} s (< 5 s)")


def test_criterion_04_round_trip():
    rng = np.random.default_rng(1004)
    worst = 0.0
    for trial in range(100):
        n = 1 + trial % 6
        g = {frozenset(s): complex(*rng.normal(size=2)) for s in subsets(n)}
        cum = {}
        for s in subsets(n):
            sub = {frozenset(t): g[frozenset(s[i] for i in t)] for t in subsets(len(s))}
            cum[frozenset(s)] = kg.truncate(sub, len(s))
        worst = max(worst, abs(kg.untruncate(cum, n) - g[frozenset(range(n))]))
    record(4, "untruncate(truncate(G)) = G", worst < 1e-12, f"100 families, max err {worst:.2e} (< 1e-12)")


def _packets(rng, k):
    return [kg.gaussian_packet(1, 0.0, float(w), n_nodes=33, cutoff=8.0) for w in rng.uniform(0.3, 2.0, k)]


def test_criterion_05_dirac_cumulants_vanish():
    rng = np.random.default_rng(1005)
    worst = 0.0
    for trial in range(20):
        n = 3 + trial % 4
        beta = float(rng.choice([1.0, 2.0, 4.0]))
        kind = NR if trial % 2 else REL
        mu = float(rng.uniform(0.5, 3.0))
        circle = kg.ThermalCircle(beta)
        fs = _packets(rng, n)
        pts = [(float(t), f) for t, f in zip(rng.uniform(-beta, beta, n), fs)]
        model = kg.Mixture(kg.SpectralMeasure.dirac(mu), kind, circle)
        # every product of moments in the expansion is bounded by prod sqrt(S_ii)
        diag = np.real(np.diag(model.gaussian_parts(pts)[0][1]))
        scale = float(np.prod(np.sqrt(diag)))
        worst = max(worst, abs(kg.cumulant(model, pts)) / scale)
    record(5, "Dirac-measure cumulants of order 3-6 vanish", worst < 1e-10,
           f"20 sets, max |cumulant| / prod sqrt(S_ii) = {worst:.2e} (< 1e-10)")


def test_criterion_06_two_atom_cumulant():
    circle = kg.ThermalCircle(2.0)
    node = kg.single_node()
    pts = [(0.0, node)] * 4
    closed = 0.75 * (coth(1.0) - coth(2.0)) ** 2
    val = kg.mixture_cumulant(kg.SpectralMeasure.two_atom(1.0, 2.0), NR, circle, pts)
    control = kg.mixture_cumulant(kg.SpectralMeasure([(1.0, 0.5), (1.0, 0.5)], floor=0.5), NR, circle, pts)
    err = abs(val - closed)
    ok = err < 1e-10 and val.real > 0 and abs(control) < 1e-12
    record(6, "two-atom 4-point cumulant", ok,
           f"value {val.real:.15f} vs (3/4)(coth1-coth2)^2 = {closed:.15f}, err {err:.1e}; "
           f"equal-atom control {abs(control):.1e}")


def _family(rng, grid, beta, size, half):
    fam = []
    for _ in range(size):
        k = int(rng.integers(1, 4))
        lo, hi = (0.0, beta / 2) if half else (-beta / 2, beta / 2 - 1e-9)
        phase = np.exp(1j * rng.normal() * grid.k[:, 0])
        f = grid.with_values(grid.v * phase * complex(*rng.normal(size=2)))
        fam.append(kg.Argument.of(kg.DeltaComb(rng.uniform(lo, hi, k), rng.normal(size=k)), f))
    return fam


def test_criterion_07_positivity_audits():
    rng = np.random.default_rng(1007)
    start = time.perf_counter()
    beta = 2.0
    circle = kg.ThermalCircle(beta)
    grid = kg.gaussian_packet(1, 0.0, 1.0, n_nodes=33, cutoff=6.0)
    failures, checks, min_rel = [], 0, np.inf
    for trial in range(50):
        mu1, mu2 = rng.uniform(0.5, 4.0, 2)
        measure = kg.SpectralMeasure.two_atom(float(mu1), float(mu2), float(rng.uniform(0.1, 0.9)), floor=0.5)
        kind = NR if trial % 2 else REL
        free_kernel = kg.FreeKernel(kg.Dispersion(kind, measure.atoms[0][0]), circle)
        mixed_kernel = kg.MixedKernel(measure, kind, circle)
        models = {
            "free": (kg.QuasiFreeSpec(free_kernel), free_kernel),
            "generalized_free": (kg.generalized_free(measure, kind, circle), mixed_kernel),
            "mixture": (kg.Mixture(measure, kind, circle), mixed_kernel),
        }
        size = int(rng.integers(2, 9))
        fam = _family(rng, grid, beta, size, half=False)
        half = _family(rng, grid, beta, size, half=True)
        for name, (functional, kernel) in models.items():
            reports = {
                "G1": s_positivity(functional, fam),
                "G2": reflection_positivity(functional, half, circle),
            }
            if name != "mixture":
                reports["qf1"] = kernel_positivity(kernel, fam)
                reports["qf2"] = kernel_positivity(kernel, half, reflect=True)
            for label, r in reports.items():
                checks += 1
                min_rel = min(min_rel, r.min_eigenvalue / max(1.0, r.eigenvalues[-1]))
                if not r.psd:
                    failures.append((trial, name, label))
    base = kg.FreeKernel(kg.Dispersion(NR, 1.0), circle)
    node = kg.single_node()
    control = kernel_positivity(CorruptedKernel(base), [kg.Argument.of(kg.DeltaComb.single(t), node)
                                                        for t in (0.0, 0.3, 0.6)])
    elapsed = time.perf_counter() - start
    ok = not failures and control.verdict == "indefinite" and elapsed < 60.0
    record(7, "positivity audits (functional, reflected, kernel, reflected kernel)", ok,
           f"{checks} Gram matrices over 50 families, {len(failures)} non-psd, min lambda/max(1,lambda_max) "
           f"{min_rel:.2e}; corrupted control {control.verdict}; {elapsed:.1f} s (< 60 s)")


def test_criterion_08_invariance():
    rng = np.random.default_rng(1008)
    worst = 0.0
    for trial in range(20):
        beta = float(rng.choice([1.0, 2.0, 5.0]))
        circle = kg.ThermalCircle(beta)
        fs = _packets(rng, 3)
        pts = [(float(t), f) for t, f in zip(rng.uniform(-beta, beta, 3), fs)]
        model = [kg.QuasiFreeSpec.free(kg.Dispersion(REL, 1.0), circle),
                 kg.Mixture(kg.SpectralMeasure.two_atom(1.0, 2.5), NR, circle),
                 kg.generalized_free(kg.SpectralMeasure.two_atom(0.7, 3.0, 0.2), REL, circle)][trial % 3]
        r = invariance_audit(model, pts, rng.uniform(-3 * beta, 3 * beta, 8), circle, tol=1e-11)
        worst = max(worst, r.shift_deviation, r.reflection_deviation, r.periodicity_deviation)
    record(8, "shift / reflection / periodicity invariance", worst < 1e-11,
           f"20 trials, max deviation {worst:.2e} (< 1e-11)")


def test_criterion_09_derivative_consistency():
    rng = np.random.default_rng(1009)
    worst = 0.0
    for trial in range(10):
        n = 1 + trial % 4
        circle = kg.ThermalCircle(2.0)
        fs = _packets(rng, n)
        pts = [(float(t), f) for t, f in zip(rng.uniform(-1, 1, n), fs)]
        mean = fs[0].with_values(fs[0].v * rng.uniform(0.2, 0.6))
        models = [kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), circle, mean=mean),
                  kg.Mixture(kg.SpectralMeasure.two_atom(1.0, 2.0), NR, circle)]
        for model in models:
            wick = kg.schwinger_moment(model, pts)
            fd = moment_by_differentiation(model, pts)
            if abs(wick) > 0:
                worst = max(worst, abs(wick - fd) / abs(wick))
            else:
                # odd moments of a centred law: compare against the natural scale
                diag = np.real(np.diag(model.gaussian_parts(pts)[0][1]))
                worst = max(worst, abs(fd) / float(np.prod(np.sqrt(diag))))
    record(9, "Wick moments vs finite-difference derivatives", worst < 1e-6,
           f"10 configs x 2 models, n <= 4, max rel err {worst:.2e} (< 1e-6)")


def test_criterion_10_monte_carlo():
    start = time.perf_counter()
    N = 1_000_000
    circle = kg.ThermalCircle(2.0)
    node = kg.single_node()
    pts = [(0.0, node), (0.4, node), (-0.7, node)]
    measure = kg.SpectralMeasure.two_atom(1.0, 2.0)
    gauss_model = kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), circle)
    mix_model = kg.Mixture(measure, NR, circle)
    batches = {
        "gaussian": (gauss_model, sample_gaussian(gauss_model, pts, N, seed=101)),
        "mixture": (mix_model, sample_mixture(measure, NR, circle, pts, N, seed=102)),
    }
    coeffs = [np.eye(3)[0], np.eye(3)[1], np.array([1.0, -1.0, 0.5]), np.array([0.3, 0.3, 0.3])]
    worst_z, n_checks = 0.0, 0
    for model, batch in batches.values():
        for c in coeffs:
            exact = model.multitime([(t, float(ci) * f) for (t, f), ci in zip(pts, c)])
            est = empirical_green(batch, c)
            worst_z = max(worst_z, abs(est.value - exact) / est.stderr)
            n_checks += 1
        for order in range(1, 5):
            for index in combinations_with_replacement(range(3), order):
                exact = kg.schwinger_moment(model, [pts[i] for i in index])
                est = empirical_moment(batch, index)
                worst_z = max(worst_z, abs(est.value - exact) / est.stderr)
                n_checks += 1
    k4 = k_statistic(batches["mixture"][1], column=0, order=4)
    closed = 0.75 * (coth(1.0) - coth(2.0)) ** 2
    k4_z = abs(k4.value - closed) / k4.stderr
    elapsed = time.perf_counter() - start
    ok = worst_z <= 4.0 and k4.value > 0 and k4_z <= 4.0 and elapsed < 120.0
    record(10, "Monte Carlo validation, N = 1e6", ok,
           f"{n_checks} characteristic/moment checks, max |z| {worst_z:.2f} (<= 4); "
           f"k4 = {k4.value:.5f} +- {k4.stderr:.5f} vs {closed:.5f} (|z| {k4_z:.2f}); {elapsed:.1f} s (< 120 s)")


def test_criterion_11_growth_probe():
    a = coth(1.0)
    report = growth_probe(equal_argument_moments([a], orders=range(2, 17, 2)), gamma=0.6)
    rec = report.to_record()
    record(11, "growth bound |S_n| <= C (n!)^0.6 R^n", report.holds,
           f"C = {rec['C']:.4f}, R = {rec['R']:.4f}, fit on orders {rec['fit_orders']}, "
           f"rms log residual {rec['fit_residual_rms_log']:.3f}, max ratio on {rec['check_orders']} "
           f"= {rec['max_ratio_on_check_orders']:.3f}")


def test_criterion_12_cli_reproducibility(tmp_path):
    outs, codes = [], []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        proc = subprocess.run([sys.executable, "-m", "kmsgreen", "full-report", "--config", str(TWO_ATOM_CONFIG),
                               "--seed", "20261018", "--out", str(out)], capture_output=True, text=True)
        codes.append(proc.returncode)
        outs.append(out.read_bytes() if out.exists() else b"")
    stripped = [b"\n".join(line for line in o.split(b"\n") if b'"timestamp"' not in line) for o in outs]
    identical = stripped[0] == stripped[1] and len(stripped[0]) > 0
    status = json.loads(outs[0])["status"] if outs[0] else "missing"
    ok = identical and codes == [0, 0] and status == "pass"
    record(12, "CLI report reproducible", ok,
           f"exit codes {codes}, status {status}, byte-identical modulo timestamp: {identical}")

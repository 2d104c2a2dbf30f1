"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Criterion 5 is a known
red: the alternating loop's eta = 1e-5 trigger lands at outer iteration
117-356 at the pinned problem size (see the assertion message), beyond the
required 100; all its other clauses hold.
"""

import time

import numpy as np

import dfrcwave as dw
from dfrcwave.cli import main
from dfrcwave.manifold import (
    metric_inner,
    project_to_tangent,
    random_point,
    retract,
    riemannian_gradient,
)
from dfrcwave.sim import (
    Method,
    Scenario,
    gen_channel,
    gen_symbols,
    run_radar_experiment,
    run_ser_experiment,
    tradeoff_samples,
)
from dfrcwave.solvers import (
    SolverConfig,
    altmin,
    build_stacked,
    rcg_solve,
    solve_mui_orthogonal,
    vectorize_problem,
)
from oracles import (
    dft_matrix,
    fd_gradient,
    grid_phase_descent,
    qpsk_awgn_ser_theory,
    random_feasible_waveforms,
)

EXPERIMENT_SOLVER = SolverConfig(eta=1e-3, k_max=2000)


def _report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num:2d} {status}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _random_objective(rng, k, n, l):
    h = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
    s = dw.QPSK[rng.integers(0, 4, (k, l))]
    g = rng.standard_normal((n, l)) + 1j * rng.standard_normal((n, l))
    u, _, vh = np.linalg.svd(g, full_matrices=False)
    uu = np.sqrt(l / n) * (u @ vh)
    rho = float(rng.uniform(0.1, 0.9))
    return vectorize_problem(build_stacked(h, s, uu, rho, 1.0))


def test_criterion_01_manifold_geometry():
    started = time.time()
    rng = np.random.default_rng(1001)
    worst = {"tangency": 0.0, "idem": 0.0, "orth": 0.0, "modulus": 0.0}
    for _ in range(1000):
        n = int(rng.integers(1, 48))
        x = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        p = project_to_tangent(x, w)
        worst["tangency"] = max(worst["tangency"], np.max(np.abs(np.real(p * x.conj()))))
        worst["idem"] = max(worst["idem"], np.max(np.abs(project_to_tangent(x, p) - p)))
        worst["orth"] = max(worst["orth"], abs(metric_inner(w - p, p)))
        r = retract(x, 0.3 * w)
        worst["modulus"] = max(worst["modulus"], np.max(np.abs(np.abs(r) - 1.0)))
    elapsed = time.time() - started
    ok = (worst["tangency"] < 1e-12 and worst["idem"] < 1e-12
          and worst["orth"] < 1e-10 and worst["modulus"] < 1e-12 and elapsed < 5.0)
    _report(1, ok, f"manifold geometry over 1000 samples, worst errors "
                   f"tangency={worst['tangency']:.1e} idem={worst['idem']:.1e} "
                   f"orth={worst['orth']:.1e} modulus={worst['modulus']:.1e} "
                   f"({elapsed:.1f}s)")


def test_criterion_02_gradient_correctness():
    started = time.time()
    rng = np.random.default_rng(1002)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(2, 9))
        l = int(rng.integers(n, 17))
        obj = _random_objective(rng, k, n, l)
        x = np.exp(1j * rng.uniform(0, 2 * np.pi, obj.dim))
        g = riemannian_gradient(obj, x)
        g_fd = project_to_tangent(x, fd_gradient(obj.value, x, h=1e-6))
        worst = max(worst, np.linalg.norm(g - g_fd) / np.linalg.norm(g_fd))
    elapsed = time.time() - started
    ok = worst < 1e-5 and elapsed < 30.0
    _report(2, ok, f"Riemannian gradient vs central differences on 100 instances, "
                   f"worst relative error {worst:.2e} ({elapsed:.1f}s)")


def test_criterion_03_opp_optimality():
    started = time.time()
    rng = np.random.default_rng(1003)
    worst_resid = 0.0
    violations = 0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        l = int(rng.integers(n, 9))
        h = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
        s = dw.QPSK[rng.integers(0, 4, (k, l))]
        x = solve_mui_orthogonal(h, s, 1.0)
        worst_resid = max(worst_resid, dw.orthogonality_error(x, 1.0))
        samples = random_feasible_waveforms(rng, n, l, 1.0 / n, 10_000)
        sampled = np.linalg.norm(
            np.einsum("kn,fnl->fkl", h, samples) - s, axis=(1, 2)) ** 2
        if dw.mui_energy(h, x, s) > np.min(sampled) + 1e-12:
            violations += 1
    elapsed = time.time() - started
    ok = violations == 0 and worst_resid < 1e-10 and elapsed < 60.0
    _report(3, ok, f"closed-form design beat 10^4 random feasible waveforms on "
                   f"50/50 instances (violations={violations}), worst feasibility "
                   f"residual {worst_resid:.1e} ({elapsed:.1f}s)")


def test_criterion_04_rcg_vs_grid_oracle():
    started = time.time()
    rng = np.random.default_rng(1004)
    worst_ratio = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 3))
        obj = _random_objective(rng, k, 2, 2)  # manifold dimension n = 4
        a_dense = obj.amplitude * np.kron(np.eye(2), obj.a_matrix)
        b_vec = obj.b_matrix.ravel(order="F")
        best_rcg = np.inf
        best_oracle = np.inf
        for trial in range(8):
            x0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
            x, _, _ = rcg_solve(obj, x0, SolverConfig(epsilon=1e-7, k_max=3000))
            best_rcg = min(best_rcg, obj.value(x))
            _, val = grid_phase_descent(a_dense, b_vec, x0, bins=256)
            best_oracle = min(best_oracle, val)
        worst_ratio = max(worst_ratio, best_rcg / best_oracle)
    elapsed = time.time() - started
    ok = worst_ratio <= 1.01 and elapsed < 120.0
    _report(4, ok, f"RCG within 1% of the 256-bin phase-grid oracle on 20 "
                   f"instances, worst objective ratio {worst_ratio:.4f} "
                   f"({elapsed:.1f}s)")


def test_criterion_05_altmin_convergence():
    started = time.time()
    cfg = SolverConfig(eta=1e-5, n_max=100)
    monotone_ok = True
    cm_ok = True
    n_converged = 0
    runs = 0
    for rho in (0.1, 0.5, 0.9):
        for seed in range(20):
            h = gen_channel(4, 16, np.random.SeedSequence([51, seed]))
            s = gen_symbols(4, 32, np.random.SeedSequence([52, seed]))
            rng = np.random.default_rng(np.random.SeedSequence([53, seed]))
            x0 = np.sqrt(1 / 16) * np.exp(1j * rng.uniform(0, 2 * np.pi, (16, 32)))
            res = altmin(h, s, rho, 1.0, cfg, x0=x0)
            runs += 1
            monotone_ok &= bool(np.all(np.diff(res.objective_trace) <= 1e-9))
            cm_ok &= dw.constant_modulus_error(res.waveform, 1.0) < 1e-12
            n_converged += int(res.converged and res.iterations <= 100)
    elapsed = time.time() - started
    ok = monotone_ok and cm_ok and n_converged == runs and elapsed < 300.0
    _report(5, ok, f"AltMin at eta=1e-5 within 100 outer iterations: "
                   f"{n_converged}/{runs} converged (known red: the "
                   f"eta trigger lands at outer iteration 117-356 at this size, "
                   f"an intrinsic alternation rate), monotone={monotone_ok}, "
                   f"constant-modulus={cm_ok} ({elapsed:.1f}s)")


def test_criterion_06_zero_objective_fixed_point():
    started = time.time()
    n, p = 16, 1.0
    x0 = np.sqrt(p / n) * dft_matrix(n)
    h = gen_channel(4, n, np.random.SeedSequence([61]))
    s = h @ x0
    res = altmin(h, s, 0.5, p, SolverConfig(), x0=x0)
    elapsed = time.time() - started
    ok = (res.objective_trace[0] < 1e-10 and res.objective_trace[-1] < 1e-10
          and res.converged and elapsed < 1.0)
    _report(6, ok, f"DFT fixed point: f0={res.objective_trace[0]:.1e}, "
                   f"final={res.objective_trace[-1]:.1e}, "
                   f"iterations={res.iterations} ({elapsed:.2f}s)")


def test_criterion_07_ser_ordering():
    started = time.time()
    grid = tuple(float(v) for v in range(0, 23, 2))
    frames = 7813  # 7813 * 4 * 32 > 1e6 symbol decisions per point
    curves = {}
    for method in (Method.CLOSED_FORM, Method.CM_ALTMIN, Method.CM_ZF):
        sc = Scenario(n_antennas=16, n_users=4, frame_length=32, rho=0.1,
                      snr_grid_db=grid, n_frames=frames, method=method,
                      solver=EXPERIMENT_SOLVER)
        curves[method] = np.array([p.value for p in run_ser_experiment(sc)])
    cf = curves[Method.CLOSED_FORM]
    am = curves[Method.CM_ALTMIN]
    zf = curves[Method.CM_ZF]
    below = np.nonzero(cf < 1e-3)[0]
    crossing_exists = below.size > 0
    if crossing_exists:
        j = int(below[0])
        ordered = am[j] < cf[j] and am[j] < zf[j]
        detail = (f"at {grid[j]:.0f} dB (first ClosedForm SER < 1e-3): "
                  f"AltMin {am[j]:.2e} < ClosedForm {cf[j]:.2e} and "
                  f"< CM-ZF {zf[j]:.2e}")
    else:
        ordered = False
        detail = f"ClosedForm never dropped below 1e-3 on the grid (min {cf.min():.2e})"
    elapsed = time.time() - started
    ok = crossing_exists and ordered and elapsed < 1200.0
    _report(7, ok, f"SER-curve ordering with {frames * 128} decisions/point: "
                   f"{detail} ({elapsed:.0f}s)")


def test_criterion_08_awgn_ser_sanity():
    started = time.time()
    rng = np.random.default_rng(1008)
    ok = True
    details = []
    for gamma_db in (4.0, 10.0):
        gamma = 10 ** (gamma_db / 10)
        n = 1_000_000
        s = dw.QPSK[rng.integers(0, 4, n)]
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        p_hat = dw.ser(dw.demodulate(s + noise / np.sqrt(gamma)), s)
        p = qpsk_awgn_ser_theory(gamma)
        sigma = np.sqrt(p * (1 - p) / n)
        ok &= abs(p_hat - p) < 3 * sigma
        details.append(f"{gamma_db:.0f}dB: {p_hat:.4e} vs {p:.4e} "
                       f"({abs(p_hat - p) / sigma:.2f} sigma)")
    elapsed = time.time() - started
    ok &= elapsed < 60.0
    _report(8, ok, "AWGN QPSK Monte-Carlo vs 2Q-Q^2: " + "; ".join(details)
            + f" ({elapsed:.1f}s)")


def test_criterion_09_omni_beampattern():
    started = time.time()
    h = gen_channel(4, 16, np.random.SeedSequence([91]))
    s = gen_symbols(4, 32, np.random.SeedSequence([92]))
    p = 1.0
    x = solve_mui_orthogonal(h, s, p)
    curve = dw.beampattern(dw.covariance(x))
    deviation = np.max(np.abs(curve.power_watts - p)) / p
    elapsed = time.time() - started
    ok = curve.angles_deg.size == 181 and deviation < 1e-9 and elapsed < 1.0
    _report(9, ok, f"closed-form beampattern flat at P_T over 181 angles, "
                   f"max relative deviation {deviation:.1e} ({elapsed:.2f}s)")


def test_criterion_10_tradeoff_monotonicity():
    started = time.time()
    sc = Scenario(n_antennas=16, n_users=4, frame_length=32, n_frames=20,
                  method=Method.CM_ALTMIN, solver=EXPERIMENT_SOLVER)
    rho_grid = (0.1, 0.3, 0.5, 0.7, 0.9)
    mui, orth = tradeoff_samples(sc, rho_grid)
    ok = True
    for r in range(len(rho_grid) - 1):
        d_mui = mui[r + 1] - mui[r]      # should fall as rho rises
        d_orth = orth[r] - orth[r + 1]   # should fall as rho falls
        ok &= np.mean(d_mui) <= np.std(d_mui, ddof=1) / np.sqrt(sc.n_frames)
        ok &= np.mean(d_orth) <= np.std(d_orth, ddof=1) / np.sqrt(sc.n_frames)
    elapsed = time.time() - started
    ok &= elapsed < 600.0
    _report(10, ok, f"20 paired seeds, mean MUI {np.mean(mui, axis=1).round(3).tolist()} "
                    f"falls with rho; mean orthogonality error "
                    f"{np.mean(orth, axis=1).round(4).tolist()} rises ({elapsed:.0f}s)")


def test_criterion_11_detection_properties():
    started = time.time()
    # detector operating point and monotonicity
    pd0 = dw.detection_probability(0.0, 1e-7)
    grid_snr = np.linspace(0.0, 60.0, 200)
    pd_curve = dw.detection_probability(grid_snr, 1e-7)
    detector_ok = pd0 == 1e-7 and bool(np.all(np.diff(pd_curve) >= 0))
    # method ordering under shared seeds
    curves = {}
    for method in (Method.CLOSED_FORM, Method.CM_ALTMIN, Method.CM_ZF):
        sc = Scenario(n_antennas=16, n_users=4, frame_length=32, rho=0.1,
                      snr_grid_db=tuple(range(0, 21, 2)), n_frames=120,
                      method=method, solver=EXPERIMENT_SOLVER)
        curves[method] = np.array([p.value for p in run_radar_experiment(sc)])
    cf = curves[Method.CLOSED_FORM]
    am = curves[Method.CM_ALTMIN]
    zf = curves[Method.CM_ZF]
    ordering_ok = bool(np.all(cf >= am) and np.all(am >= zf))
    bounds_ok = all(np.all((c >= 1e-7) & (c <= 1.0)) and np.all(np.diff(c) >= 0)
                    for c in curves.values())
    elapsed = time.time() - started
    ok = detector_ok and ordering_ok and bounds_ok and elapsed < 300.0
    _report(11, ok, f"Pd(0)=P_FA exactly ({pd0:.1e}), detector monotone, and "
                    f"ClosedForm >= CM-AltMin >= CM-ZF at all 11 grid SNRs "
                    f"(e.g. 10dB: {cf[5]:.3e} >= {am[5]:.3e} >= {zf[5]:.3e}) "
                    f"({elapsed:.0f}s)")


def test_criterion_12_complexity_scaling():
    started = time.time()
    shapes = [(8, 2, 16), (16, 4, 32), (32, 8, 64)]
    cfg = SolverConfig(epsilon=1e-12, k_max=80)
    medians = []
    for n, k, l in shapes:
        per = []
        for seed in range(4):
            h = gen_channel(k, n, np.random.SeedSequence([121, seed]))
            s = gen_symbols(k, l, np.random.SeedSequence([122, seed]))
            rng = np.random.default_rng(np.random.SeedSequence([123, seed]))
            g = rng.standard_normal((n, l)) + 1j * rng.standard_normal((n, l))
            u, _, vh = np.linalg.svd(g, full_matrices=False)
            uu = np.sqrt(l / n) * (u @ vh)
            obj = vectorize_problem(build_stacked(h, s, uu, 0.5, 1.0))
            x0 = random_point(n * l, seed)
            rcg_solve(obj, x0, cfg)  # warm the jit and the caches
            for _ in range(9):
                t = time.perf_counter()
                _, iters, _ = rcg_solve(obj, x0, cfg)
                per.append((time.perf_counter() - t) / max(iters, 1))
        medians.append(float(np.median(per)))
    nkl = np.array([np.prod(s) for s in shapes], float)
    slope = float(np.polyfit(np.log(nkl), np.log(medians), 1)[0])
    elapsed = time.time() - started
    ok = 0.8 <= slope <= 1.3 and elapsed < 300.0
    per_iter = ", ".join(f"{s}: {m * 1e6:.1f}us" for s, m in zip(shapes, medians))
    _report(12, ok, f"per-iteration RCG time {per_iter}; log-log exponent vs "
                    f"N*K*L = {slope:.3f} in [0.8, 1.3] ({elapsed:.0f}s)")


def test_criterion_13_cli_determinism(tmp_path):
    started = time.time()
    base = ["--n", "8", "--k", "3", "--l", "16", "--frames", "6",
            "--snr-db", "0,6,12", "--eta", "1e-3", "--seed", "5"]
    artifacts = {}
    for command, files in (("ser", ["ser.csv"]),
                           ("radar", ["radar.csv", "beampattern.csv"])):
        for workers in (1, 4):
            for repeat in (0, 1):
                out = tmp_path / f"{command}-w{workers}-r{repeat}"
                code = main([command, *base, "--workers", str(workers),
                             "--out", str(out)])
                assert code == 0
                for name in files:
                    artifacts.setdefault((command, name), []).append(
                        (out / name).read_bytes())
    identical = all(len(set(blobs)) == 1 for blobs in artifacts.values())
    elapsed = time.time() - started
    ok = identical and elapsed < 300.0
    _report(13, ok, f"ser/radar CSVs byte-identical across repeats and worker "
                    f"counts 1 and 4 ({elapsed:.0f}s)")

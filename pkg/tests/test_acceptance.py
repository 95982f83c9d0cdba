"""Desk-scale certification battery for the package's headline guarantees.

Each test prints one machine-greppable verdict line; run with ``pytest -s``
to see them.  Tolerances are pinned, not tuned: statistical checks carry
their 3-sigma allowance and deterministic checks their discretization
budget.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from fbmflow import (
    ExperimentConfig,
    SampledFunction,
    TimeGrid,
    fbm_covariance,
    gram_hadamard_check,
    hausdorff_measure,
    integrate_flow,
    make_field,
    make_manifold,
    rl_integral,
    run_bound_experiment,
    sample_paths,
    weyl_derivative,
    zahle_integral,
)
from fbmflow.bounds import (
    check_flow_windows,
    compute_constants,
    default_params,
    k1_constant,
)
from fbmflow.cli import main as cli_main


def verdict(index: int, name: str, ok: bool, detail: str) -> bool:
    print(f"[acceptance {index:02d}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


# ---------------------------------------------------------------------------
# 1. sampler covariance
# ---------------------------------------------------------------------------


def test_01_fbm_covariance_exactness():
    started = time.perf_counter()
    grid = TimeGrid(1.0, 256)
    draws = 10_000
    worst = 0.0
    rng = np.random.Generator(np.random.Philox(key=424242))
    for hurst in (0.6, 0.75, 0.9):
        block = sample_paths(grid, hurst, channels=draws, seed=2024, method="cholesky")
        nodes = rng.integers(1, 257, size=(10, 2))
        for i, j in nodes:
            products = block.values[i] * block.values[j]
            empirical = float(np.mean(products))
            true = fbm_covariance(grid.nodes[i], grid.nodes[j], hurst)
            sigma = float(np.std(products)) / math.sqrt(draws)
            tol = max(0.05 * abs(true), 3.0 * sigma)
            worst = max(worst, abs(empirical - true) / tol)
    elapsed = time.perf_counter() - started
    ok = worst < 1.0 and elapsed < 60.0
    assert verdict(
        1,
        "fBm covariance, 3 Hurst values, 1e4 draws",
        ok,
        f"max |err|/tol = {worst:.3f}, {elapsed:.1f} s",
    )


# ---------------------------------------------------------------------------
# 2. fractional-calculus operator laws
# ---------------------------------------------------------------------------


def test_02_fractional_calculus_laws():
    grid = TimeGrid(1.0, 2048)
    t = grid.nodes.copy()
    cases = {"one": np.ones_like(t), "identity": t.copy(), "sine": np.sin(t)}
    worst_comp = 0.0
    worst_inv = 0.0
    for values in cases.values():
        f = SampledFunction(t.copy(), values.copy())
        two_step = rl_integral(rl_integral(f, 0.4), 0.3)
        one_step = rl_integral(f, 0.7)
        scale = np.max(np.abs(one_step.values))
        worst_comp = max(
            worst_comp, np.max(np.abs(two_step.values - one_step.values)) / scale
        )
        back = weyl_derivative(rl_integral(f, 0.4), 0.4)
        worst_inv = max(
            worst_inv, np.max(np.abs(back.values - values)) / np.max(np.abs(values))
        )
    golden = abs(
        rl_integral(SampledFunction(t.copy(), np.ones_like(t)), 0.5).values[-1]
        - 1.0 / gamma_fn(1.5)
    )
    golden = max(
        golden,
        abs(rl_integral(SampledFunction(t.copy(), t.copy()), 0.7).values[-1] - 1.0 / gamma_fn(2.7)),
        abs(weyl_derivative(SampledFunction(t.copy(), t.copy()), 0.5).values[-1] - 1.0 / gamma_fn(1.5)),
    )
    ok = worst_comp < 1e-3 and worst_inv < 1e-2 and golden < 1e-4
    assert verdict(
        2,
        "composition, inversion, power-rule goldens",
        ok,
        f"comp {worst_comp:.2e} < 1e-3, inv {worst_inv:.2e} < 1e-2, golden {golden:.2e} < 1e-4",
    )


# ---------------------------------------------------------------------------
# 3. pathwise Stieltjes integral against the classical value
# ---------------------------------------------------------------------------


def test_03_stieltjes_coincidence():
    grid = TimeGrid(1.0, 2048)
    t = grid.nodes.copy()
    f = SampledFunction(t.copy(), t.copy())
    g = SampledFunction(t.copy(), t**2)
    values = [float(zahle_integral(f, g, a)) for a in (0.2, 0.3, 0.4)]
    err = max(abs(v - 2.0 / 3.0) / (2.0 / 3.0) for v in values)
    spread = max(values) - min(values)
    ok = err < 1e-3 and spread < 2e-3
    assert verdict(
        3,
        "int x d(x^2) = 2/3, order-invariant",
        ok,
        f"rel err {err:.2e} < 1e-3, spread {spread:.2e} < 2e-3",
    )


# ---------------------------------------------------------------------------
# 4. flow oracles
# ---------------------------------------------------------------------------


def test_04_flow_oracles():
    started = time.perf_counter()
    grid = TimeGrid(1.0, 256)

    value = np.array([[1.0, 0.0], [0.0, 2.0]])
    drift = make_field("constant", dim=2, channels=2, value=value)
    path = sample_paths(grid, 0.75, channels=2, seed=31)
    traj = integrate_flow(drift, path, np.array([0.3, -0.1]))
    exact_err = float(np.max(np.abs(traj.states - (traj.initial + path.values @ value))))

    linear = make_field("linear_test", dim=1, channels=1, rate=1.0)
    orders = []
    for r in range(20):
        path = sample_paths(grid, 0.75, channels=1, seed=9000 + r, refinement=8)
        closed = math.exp(path.values[-1, 0])
        errors = []
        for refinement in (1, 2, 4, 8):
            out = integrate_flow(linear, path, np.ones(1), refinement=refinement)
            errors.append(abs(out.final[0] - closed))
        levels = np.log2(np.array([1, 2, 4, 8], dtype=float))
        orders.append(-np.polyfit(levels, np.log2(np.maximum(errors, 1e-300)), 1)[0])
    median_order = float(np.median(orders))
    elapsed = time.perf_counter() - started
    ok = exact_err < 1e-12 and 0.2 <= median_order <= 1.0 and elapsed < 120.0
    assert verdict(
        4,
        "constant-field exactness, exponential convergence order",
        ok,
        f"exact err {exact_err:.1e}, median order {median_order:.3f} in [0.2, 1.0], {elapsed:.1f} s",
    )


# ---------------------------------------------------------------------------
# 5. window-by-window increment estimate
# ---------------------------------------------------------------------------


def test_05_flow_increment_estimate_certification():
    hurst = 0.75
    params = default_params(hurst)
    fields = make_field("sine", dim=2, channels=2, amplitude=0.2, frequency=(1.0, 1.0))
    grid = TimeGrid(1.0, 1024)
    violations = 0
    windows = 0
    worst = 0.0
    for r in range(50):
        path = sample_paths(grid, hurst, channels=2, seed=40_000 + r)
        constants = compute_constants(params, fields, path.holder_norms(params.beta), 1.0)
        traj = integrate_flow(fields, path, np.zeros(2))
        report = check_flow_windows(traj, constants)
        violations += report.increment_violations
        windows += report.windows
        worst = max(worst, report.max_increment_ratio)
    ok = violations == 0 and windows > 0
    assert verdict(
        5,
        "singular increment integral under K* on every window",
        ok,
        f"{violations} violations over {windows} windows, max ratio {worst:.3f}",
    )


# ---------------------------------------------------------------------------
# 6. interval-length solver
# ---------------------------------------------------------------------------


def test_06_interval_solver_identities():
    rng = np.random.Generator(np.random.Philox(key=606060))
    field_sets = [
        make_field("sine", dim=2, channels=2, amplitude=0.2, frequency=(1.0, 1.0)),
        make_field("gaussian_bump", dim=2, channels=2, amplitude=0.2, width=1.0),
        make_field("sine", dim=3, channels=1, amplitude=0.5),
    ]
    worst_rel = 0.0
    worst_s = 0.0
    checked = 0
    for hurst in (0.55, 0.6, 0.65, 0.75, 0.85, 0.95):
        params = default_params(hurst)
        for fields in field_sets:
            for _ in range(10):
                norms = rng.uniform(0.05, 6.0, size=fields.channels)
                c = compute_constants(params, fields, norms, 1.0)
                lhs = c.delta ** (-params.beta)
                rhs = 3.0 * c.n * c.k1 * max(
                    c.c_alpha * c.m_tilde1_alpha, c.a_delta2 + c.b2
                )
                worst_rel = max(worst_rel, abs(lhs - rhs) / lhs)
                worst_s = max(worst_s, c.s)
                checked += 1
    ok = worst_rel <= 1e-10 and worst_s <= 2.0
    assert verdict(
        6,
        "Delta equation to 1e-10, amplification at most 2",
        ok,
        f"{checked} configs, worst rel {worst_rel:.1e}, max S {worst_s:.4f}",
    )


# ---------------------------------------------------------------------------
# 7. tangent growth certificates
# ---------------------------------------------------------------------------


def test_07_tangent_growth_certification():
    violations = 0
    failures = 0
    medians = {}
    for hurst in (0.6, 0.75):
        config = ExperimentConfig(
            field_spec="sine2d",
            hurst=hurst,
            horizon=1.0,
            grid_steps=1024,
            replications=100,
            seed=1100,
            workers=0,
            make_plots=False,
        )
        result = run_bound_experiment(config, quiet=True)
        failures += result.summary.failures
        violations += sum(row.tangent_violation for row in result.rows)
        medians[hurst] = float(
            np.median([row.tangent_slack_log2 for row in result.rows if row.ok])
        )
    ok = violations == 0 and failures == 0
    assert verdict(
        7,
        "sup |v_t|_1 within S^ceil(p) |v0|_1, 100 paths per Hurst",
        ok,
        f"0.60: median slack log2 {medians[0.6]:.1f}; "
        f"0.75: median slack log2 {medians[0.75]:.1f}; "
        f"{violations} violations, {failures} failures",
    )


# ---------------------------------------------------------------------------
# 8. pushforward measure certificates on the unit circle
# ---------------------------------------------------------------------------


def test_08_measure_growth_certification():
    started = time.perf_counter()
    violations = 0
    failures = 0
    identity_gap = 0.0
    for hurst in (0.6, 0.75):
        config = ExperimentConfig(
            field_spec="sine2d",
            hurst=hurst,
            horizon=1.0,
            grid_steps=1024,
            replications=100,
            seed=2200,
            manifold_spec="circle:r=1,n=2",
            manifold_points=500,
            workers=0,
            make_plots=False,
        )
        result = run_bound_experiment(config, quiet=True)
        failures += result.summary.failures
        violations += sum(row.measure_violation for row in result.rows)
        row = next(row for row in result.rows if row.ok)
        # the certified bound is exactly sqrt(2) * 1! * S^ceil(p) * 2 pi
        claimed = (
            0.5
            + math.ceil(row.p) * math.log2(row.s)
            + math.log2(row.measure_initial)
        )
        identity_gap = max(identity_gap, abs(row.measure_bound_log2 - claimed))
    elapsed = time.perf_counter() - started
    ok = violations == 0 and failures == 0 and identity_gap < 1e-9 and elapsed < 900.0
    assert verdict(
        8,
        "circle pushforward measure within sqrt(2) S^ceil(p) 2pi",
        ok,
        f"{violations} violations, bound-form gap {identity_gap:.1e}, {elapsed:.0f} s < 900 s",
    )


# ---------------------------------------------------------------------------
# 9. geometry exactness
# ---------------------------------------------------------------------------


def test_09_geometry_exactness():
    mesh = make_manifold("circle", 1000, radius=1.0)
    circle_err = abs(mesh.reference_measure - 2.0 * math.pi) / (2.0 * math.pi)

    rng = np.random.Generator(np.random.Philox(key=909090))
    q, r = np.linalg.qr(rng.normal(size=(2, 2)))
    q *= np.sign(np.diag(r))
    rotated = hausdorff_measure(mesh, np.tile(q, (1000, 1, 1)))
    rotation_err = abs(rotated - mesh.reference_measure) / mesh.reference_measure

    fuzz_ok = True
    for m, n in ((1, 2), (2, 3), (2, 4), (3, 3)):
        frames = rng.normal(size=(2500, m, n)) * 10.0 ** rng.integers(-2, 3)
        fuzz_ok = fuzz_ok and gram_hadamard_check(frames)

    ok = circle_err < 1e-6 and rotation_err < 1e-12 and fuzz_ok
    assert verdict(
        9,
        "circle quadrature, rotation invariance, Hadamard fuzz",
        ok,
        f"circle {circle_err:.1e} < 1e-6, rotation {rotation_err:.1e} < 1e-12, "
        f"1e4 frames {'ok' if fuzz_ok else 'violated'}",
    )


# ---------------------------------------------------------------------------
# 10. deterministic reports
# ---------------------------------------------------------------------------


def test_10_reports_are_byte_identical_across_workers(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "field = sine2d\n"
        "fbm.hurst = 0.75\n"
        "fbm.grid = 256\n"
        "mc.replications = 6\n"
        "mc.seed = 77\n"
        "manifold = circle:r=1,n=2\n"
        "manifold.points = 64\n"
    )
    blobs = []
    for workers in (1, 2, 3):
        out = tmp_path / f"report_w{workers}.csv"
        code = cli_main(
            [
                "verify-bound",
                "--config",
                str(cfg),
                "--workers",
                str(workers),
                "--out",
                str(out),
                "--no-plot",
            ]
        )
        assert code == 0
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2] and len(blobs[0]) > 0
    assert verdict(
        10,
        "verify-bound reports byte-identical at 1, 2, 3 workers",
        ok,
        f"{len(blobs[0])} bytes each",
    )

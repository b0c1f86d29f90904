"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
The synthetic-data criteria pin their configuration (record shape, embedding
grids, rank policies) so results are reproducible; comparative thresholds are
stated inline next to each assertion.
"""

import hashlib

import numpy as np
import pytest

from battdmd import (
    AgingSpec,
    CellSpec,
    EmbeddingSpec,
    RankPolicy,
    SnapshotSet,
    SplitSpec,
    build_hankel,
    build_snapshots,
    fit_dmd,
    fit_dmdc_full,
    fit_dmdc_reduced,
    hppc_protocol,
    pinv_apply,
    simulate_cell,
    simulate_dmd,
    simulate_dmdc,
    spectrum,
    split,
    sweep_input_embedding,
    sweep_output_embedding,
    transfer,
    truncated_svd,
)
from battdmd.cli import main
from conftest import poles_to_coeffs, recurrence_series, series_of

# shared configuration for the synthetic-data criteria
SWEEP_POLICY = RankPolicy.relative(1e-5)
M_GRID = list(range(4, 84, 4))          # 20 points
ELL_GRID = list(range(1, 13))           # 1..12
TRANSFER_M, TRANSFER_ELL = 30, 8


def report(cid, text):
    print(f"[acceptance] criterion {cid}: PASS - {text}")


@pytest.fixture(scope="module")
def sweep_record():
    cell = CellSpec()
    script = hppc_protocol(cell, repetitions=5)
    return simulate_cell(cell, AgingSpec(), script, dt=1.0)


@pytest.fixture(scope="module")
def cycle_records():
    cell = CellSpec()
    script = hppc_protocol(cell, repetitions=5)
    return {
        cycles: simulate_cell(cell, AgingSpec(cycles=cycles), script, dt=1.0)
        for cycles in (20, 80, 200, 340)
    }


def test_c01_hankel_laws():
    rng = np.random.default_rng(101)
    checked = 0
    for _ in range(1000):
        length = int(rng.integers(2, 120))
        tau = int(rng.integers(1, 5))
        m_max = (length - 1) // tau + 1
        m = int(rng.integers(1, m_max + 1))
        sig = rng.standard_normal(length)
        H = build_hankel(sig, m, tau)
        assert H.shape == (m, length - (m - 1) * tau)
        if m > 1 and H.shape[1] > tau:
            assert np.array_equal(H[1:, :-tau], H[:-1, tau:])
        checked += 1
    assert checked == 1000
    report(1, f"shape law and anti-diagonal constancy exact on {checked} random (L, m, tau)")


def test_c02_dmd_exact_recovery():
    cases = {
        1: [0.9],
        2: [0.95 * np.exp(0.3j), 0.95 * np.exp(-0.3j)],
        3: [0.9, 0.8 * np.exp(0.5j), 0.8 * np.exp(-0.5j)],
    }
    for d, poles in cases.items():
        coeffs = poles_to_coeffs(poles)
        rng = np.random.default_rng(200 + d)
        sig = recurrence_series(coeffs, rng.standard_normal(d), 400)
        for m in (d, d + 2):
            snap = build_snapshots(series_of(sig), EmbeddingSpec(m=m))
            model = fit_dmd(snap)
            assert model.fit_residual <= 1e-8 * np.linalg.norm(snap.Xp)
            states = simulate_dmd(model, sig[:m].copy(), 100)
            np.testing.assert_allclose(states[:, -1], sig[m - 1 : m + 100], atol=1e-6)
            eigs = spectrum(model).eigenvalues[:d]
            np.testing.assert_allclose(np.sort_complex(eigs),
                                       np.sort_complex(np.asarray(poles)), atol=1e-8)
    report(2, "order 1-3 recurrences: residual <= 1e-8, rollout 1e-6, poles 1e-8")


def _direct_snapshots(states, u):
    X, Xp = states[:, :-1], states[:, 1:]
    return SnapshotSet(X=X, Xp=Xp, U=u[:, : X.shape[1]], n=X.shape[1],
                       spec=EmbeddingSpec(m=states.shape[0], ell=u.shape[0]), t0_index=0)


def _simulate_reference(A, B, x0, u, steps):
    x = np.asarray(x0, dtype=float).copy()
    out = [x.copy()]
    for k in range(steps):
        x = A @ x + B @ u[:, k]
        out.append(x.copy())
    return np.array(out)


def test_c03_dmdc_exact_recovery():
    for n in (2, 3, 4):
        rng = np.random.default_rng(300 + n)
        A0 = rng.standard_normal((n, n))
        A0 *= 0.85 / max(np.abs(np.linalg.eigvals(A0)))
        B0 = rng.standard_normal((n, 1))
        u = rng.standard_normal((1, 500))
        states = _simulate_reference(A0, B0, rng.standard_normal(n), u, 499).T
        model = fit_dmdc_full(_direct_snapshots(states, u))
        err = np.linalg.norm(model.A - A0) + np.linalg.norm(model.B - B0)
        assert err <= 1e-6
        u_fresh = rng.standard_normal((1, 200))
        x0 = rng.standard_normal(n)
        expected = _simulate_reference(A0, B0, x0, u_fresh, 200)
        got = simulate_dmdc(model, x0, u_fresh, 200)
        np.testing.assert_allclose(got, expected, atol=1e-5)
    report(3, "2x2..4x4 systems recovered to 1e-6; fresh-input rollouts within 1e-5")


def test_c04_reduced_full_consistency():
    for n in (2, 3, 4):
        rng = np.random.default_rng(400 + n)
        A0 = rng.standard_normal((n, n))
        A0 *= 0.8 / max(np.abs(np.linalg.eigvals(A0)))
        B0 = rng.standard_normal((n, 1))
        u = rng.standard_normal((1, 300))
        states = _simulate_reference(A0, B0, rng.standard_normal(n), u, 299).T
        snap = _direct_snapshots(states, u)
        full = fit_dmdc_full(snap, RankPolicy.fixed(n + 1))
        red = fit_dmdc_reduced(snap, RankPolicy.fixed(n + 1), RankPolicy.fixed(n))
        u_fresh = rng.standard_normal((1, 100))
        x0 = rng.standard_normal(n)
        roll_full = simulate_dmdc(full, x0, u_fresh, 100)
        roll_red = simulate_dmdc(red, x0, u_fresh, 100)
        np.testing.assert_allclose(roll_red, roll_full, atol=1e-8)
    report(4, "truncation-free reduced rollouts match full rollouts within 1e-8 per step")


def test_c05_zero_input_degeneracy():
    coeffs = poles_to_coeffs([0.9, 0.6])
    sig = recurrence_series(coeffs, [1.0, 0.7], 300)
    ts = series_of(sig)  # zero current channel
    snap_u = build_snapshots(ts, EmbeddingSpec(m=4, ell=2), with_input=True)
    snap_0 = build_snapshots(ts, EmbeddingSpec(m=4), with_input=False)
    controlled = fit_dmdc_full(snap_u)
    autonomous = fit_dmd(snap_0)
    assert np.linalg.norm(controlled.B) <= 1e-10
    assert np.linalg.norm(controlled.A - autonomous.A) <= 1e-8
    report(5, "u == 0 gives ||B||_F <= 1e-10 and the autonomous operator to 1e-8")


def test_c06_pseudoinverse_oracle():
    rng = np.random.default_rng(600)
    for trial in range(100):
        p = int(rng.integers(2, 24))
        q = int(rng.integers(2, 24))
        full = min(p, q)
        rank = int(rng.integers(1, full + 1))  # includes rank-deficient cases
        M = rng.standard_normal((p, rank)) @ rng.standard_normal((rank, q))
        M2 = rng.standard_normal((int(rng.integers(1, 8)), q))
        f = truncated_svd(M, RankPolicy.relative(1e-10))
        expected = M2 @ np.linalg.pinv(M, rcond=1e-10)
        np.testing.assert_allclose(pinv_apply(f, M2), expected, atol=1e-8)
    report(6, "pinv application matches the reference pseudoinverse on 100 random matrices")


def test_c07_synthetic_cell_fidelity():
    cell = CellSpec()
    script = hppc_protocol(cell, repetitions=1)
    coarse = simulate_cell(cell, AgingSpec(), script, dt=1.0)
    fine = simulate_cell(cell, AgingSpec(), script, dt=0.01)
    n = min(len(coarse), len(fine.v[::100]))
    rms = float(np.sqrt(np.mean((fine.v[::100][:n] - coarse.v[:n]) ** 2)))
    assert rms <= 1e-3  # 1 mV
    integral = float(np.sum(coarse.i[:-1])) * 1.0
    expected = 3600.0 * coarse.meta["capacity_ah_effective"] * (
        coarse.meta["soc_initial"] - coarse.meta["soc_final"])
    assert integral == pytest.approx(expected, rel=1e-6)
    report(7, f"dt=1 s record within {rms * 1000:.2e} mV RMS of the dt=0.01 s oracle; "
              "charge conserved to 1e-6")


def test_c08_qualitative_sweep_claims(sweep_record):
    split_spec = SplitSpec(0.6)
    sweep_dmd = sweep_output_embedding(sweep_record, M_GRID, ell=1, kind="dmd",
                                       split_spec=split_spec, policy=SWEEP_POLICY)
    sweep_dmdc = sweep_output_embedding(sweep_record, M_GRID, ell=TRANSFER_ELL, kind="dmdc",
                                        split_spec=split_spec, policy=SWEEP_POLICY)
    assert sweep_dmd.points and sweep_dmdc.points
    best_dmd = min(p.rss for p in sweep_dmd.points)
    best_dmdc = min(p.rss for p in sweep_dmdc.points)
    # (a) controlled model beats the autonomous one at the best configuration
    assert best_dmdc < best_dmd

    ell_sweep = sweep_input_embedding(sweep_record, m=TRANSFER_M, ell_grid=ELL_GRID,
                                      split_spec=split_spec, policy=SWEEP_POLICY)
    by_ell = {p.param: p.rss for p in ell_sweep.points}
    assert 1 in by_ell
    # (b) some deeper input embedding does at least as well as ell = 1
    assert min(v for e, v in by_ell.items() if e > 1) <= by_ell[1]

    # (c) argmin deterministic and reproducible
    sweep_dmdc_again = sweep_output_embedding(sweep_record, M_GRID, ell=TRANSFER_ELL,
                                              kind="dmdc", split_spec=split_spec,
                                              policy=SWEEP_POLICY)
    ell_again = sweep_input_embedding(sweep_record, m=TRANSFER_M, ell_grid=ELL_GRID,
                                      split_spec=split_spec, policy=SWEEP_POLICY)
    assert sweep_dmdc_again == sweep_dmdc
    assert ell_again == ell_sweep
    report(8, f"best DMDc rss {best_dmdc:.3g} < best DMD rss {best_dmd:.3g}; "
              f"ell>1 improves on ell=1 ({min(by_ell.values()):.3g} vs {by_ell[1]:.3g}); "
              "argmins reproducible")


# first-run regression baselines for criterion 9 (cycle -> rss), pinned with a
# [x0.5, x2] window to absorb BLAS-level variation while catching regressions
TRANSFER_BASELINES = {
    "dmd": {80: 177.660, 200: 180.678, 340: 184.300},
    "dmdc": {80: 8.17648, 200: 10.1991, 340: 14.5771},
}


def test_c09_fixed_operator_transfer(cycle_records):
    base = cycle_records[20]
    train, _ = split(base, SplitSpec(0.6))
    snap_c = build_snapshots(train, EmbeddingSpec(m=TRANSFER_M, ell=TRANSFER_ELL),
                             with_input=True)
    model_c = fit_dmdc_full(snap_c, SWEEP_POLICY)
    snap_d = build_snapshots(train, EmbeddingSpec(m=TRANSFER_M), with_input=False)
    model_d = fit_dmd(snap_d, SWEEP_POLICY)

    results = {"dmd": {}, "dmdc": {}}
    for cycles in (80, 200, 340):
        aged = cycle_records[cycles]
        for kind, model in (("dmd", model_d), ("dmdc", model_c)):
            _, rep = transfer(model, aged)  # raises DivergenceError on blow-up
            assert np.isfinite(rep.rss)
            results[kind][cycles] = rep.rss

    for cycles in (80, 200, 340):
        assert results["dmdc"][cycles] <= results["dmd"][cycles]
    for kind in ("dmd", "dmdc"):
        values = [results[kind][c] for c in (80, 200, 340)]
        assert values == sorted(values)  # rss non-decreasing with degradation
        for cycles, baseline in TRANSFER_BASELINES[kind].items():
            assert 0.5 * baseline <= results[kind][cycles] <= 2.0 * baseline
    report(9, "no divergence; DMDc <= DMD at every cycle; rss non-decreasing; "
              f"dmdc rss {[round(results['dmdc'][c], 2) for c in (80, 200, 340)]}")


def _tree_digest(root):
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def test_c10_cli_determinism(tmp_path):
    data = tmp_path / "data"
    synth_args = ["synth", "--out", str(data), "--repetitions", "1", "--cycles", "20",
                  "--seed", "11", "--noise-sigma", "0.0002"]
    assert main(synth_args) == 0
    first = _tree_digest(data)
    assert main(synth_args) == 0
    assert _tree_digest(data) == first

    fit_dir = tmp_path / "fit"
    fit_args = ["fit", "--input", str(data / "hppc_healthy.csv"), "--kind", "dmdc",
                "--m", "10", "--ell", "3", "--rank-policy", "relative:1e-5",
                "--out", str(fit_dir)]
    assert main(fit_args) == 0
    first = _tree_digest(fit_dir)
    assert main(fit_args) == 0
    assert _tree_digest(fit_dir) == first

    sim_dir = tmp_path / "sim"
    sim_args = ["simulate", "--model", str(fit_dir / "model.json"),
                "--input", str(data / "hppc_cycle_0020.csv"), "--out", str(sim_dir)]
    assert main(sim_args) == 0
    first = _tree_digest(sim_dir)
    assert main(sim_args) == 0
    assert _tree_digest(sim_dir) == first

    sweep_dir = tmp_path / "sweep"
    sweep_args = ["sweep", "--input", str(data / "hppc_healthy.csv"), "--sweep", "m",
                  "--m-grid", "6,10", "--kind", "dmdc", "--ell", "2",
                  "--rank-policy", "relative:1e-5", "--out", str(sweep_dir)]
    assert main(sweep_args) == 0
    first = _tree_digest(sweep_dir)
    assert main(sweep_args) == 0
    assert _tree_digest(sweep_dir) == first

    tr_dir = tmp_path / "tr"
    tr_args = ["transfer", "--model", str(fit_dir / "model.json"),
               str(data / "hppc_cycle_0020.csv"), "--out", str(tr_dir)]
    assert main(tr_args) == 0
    first = _tree_digest(tr_dir)
    assert main(tr_args) == 0
    assert _tree_digest(tr_dir) == first

    report(10, "synth/fit/simulate/sweep/transfer re-runs byte-identical (figures included)")

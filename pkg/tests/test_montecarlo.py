import math

import numpy as np
import pytest

from eemimo.montecarlo import (
    McEstimate,
    RankDeficientError,
    combiner,
    equal_rate_power_allocation,
    estimate_ee,
    generate_block,
    sinr,
    sweep_ee,
    wishart_inverse_trace_check,
)
from eemimo.rates import DesignPoint, evaluate_ee, gross_rate_zf_imperfect, pa_power_zf

RHO_OPT = 0.8746854835


def test_block_entry_variance_matches_attenuation(disc):
    ratios = []
    for b in range(2000):
        blk = generate_block(disc, 50, 2, seed=1, index=b)
        ratios.append(np.abs(blk.H) ** 2 / blk.attenuations)
    r = np.concatenate(ratios)
    np.testing.assert_allclose(r.mean(axis=0), 1.0, rtol=0.01)


def test_block_columns_uncorrelated(disc):
    acc = []
    for b in range(500):
        blk = generate_block(disc, 64, 3, seed=2, index=b)
        Z = blk.H / np.sqrt(blk.attenuations)
        acc.append(Z[:, 0] * np.conj(Z[:, 1]))
    x = np.concatenate(acc)
    sigma = 1.0 / math.sqrt(len(x))
    assert abs(x.mean()) < 3 * sigma * math.sqrt(2)


def test_block_prefix_stable(disc):
    small = generate_block(disc, 20, 3, seed=4, index=7)
    big = generate_block(disc, 40, 5, seed=4, index=7)
    np.testing.assert_array_equal(big.H[:20, :3], small.H)
    np.testing.assert_array_equal(big.attenuations[:3], small.attenuations)


def test_block_locations_in_cell(disc):
    for b in range(200):
        lk = generate_block(disc, 4, 8, seed=3, index=b).attenuations
        d = (disc.dbar / lk) ** (1 / disc.kappa)
        assert np.all((d >= 35 - 1e-9) & (d <= 250 + 1e-9))


def test_imperfect_estimate_statistics(disc):
    rho, K, tau = 0.3, 4, 1.0
    share = 1 / (1 + 1 / (rho * K * tau))
    est, err = [], []
    for b in range(1500):
        blk = generate_block(disc, 40, K, seed=5, index=b, mode="imperfect", rho=rho, tau_ul=tau)
        est.append(np.abs(blk.H_hat) ** 2 / blk.attenuations)
        err.append(np.abs(blk.H - blk.H_hat) ** 2 / blk.attenuations)
    np.testing.assert_allclose(np.concatenate(est).mean(axis=0), share, rtol=0.02)
    np.testing.assert_allclose(np.concatenate(err).mean(axis=0), 1 - share, rtol=0.02)


def test_imperfect_estimate_tends_to_channel(disc):
    blk = generate_block(disc, 30, 3, seed=6, mode="imperfect", rho=1.0, tau_ul=1e12)
    assert np.linalg.norm(blk.H - blk.H_hat) <= 1e-5 * np.linalg.norm(blk.H)


def test_block_mode_errors(disc):
    with pytest.raises(ValueError):
        generate_block(disc, 4, 2, mode="imperfect")
    with pytest.raises(ValueError):
        generate_block(disc, 4, 2, mode="other")
    with pytest.raises(ValueError):
        generate_block(disc, 0, 2)


def test_zf_combiner_inverts(disc):
    H = generate_block(disc, 12, 5, seed=7).H
    G = combiner(H, "zf")
    np.testing.assert_allclose(G.conj().T @ H, np.eye(5), atol=1e-10)


def test_zf_rank_deficient(disc):
    H = generate_block(disc, 6, 3, seed=8).H
    H[:, 2] = H[:, 1]
    with pytest.raises(RankDeficientError):
        combiner(H, "zf")
    with pytest.raises(ValueError):
        combiner(H[:, :3][:2], "zf")


def test_mrc_single_user(disc):
    H = generate_block(disc, 8, 1, seed=9).H
    np.testing.assert_array_equal(combiner(H, "mrc"), H)


def test_mmse_high_noise_tends_to_mrc(disc):
    H = generate_block(disc, 8, 3, seed=10).H
    s2 = 1e8 * np.linalg.norm(H) ** 2
    G = combiner(H, "mmse", np.ones(3), s2)
    for k in range(3):
        cos = abs(np.vdot(G[:, k], H[:, k])) / (np.linalg.norm(G[:, k]) * np.linalg.norm(H[:, k]))
        assert cos == pytest.approx(1.0, abs=1e-12)


def test_mmse_combiner_definition(disc):
    H = generate_block(disc, 8, 3, seed=11).H
    p = np.array([1.0, 2.0, 0.5])
    G = combiner(H, "mmse", p, 1e-13)
    ref = np.linalg.solve(H @ np.diag(p) @ H.conj().T + 1e-13 * np.eye(8), H)
    # Columns may be rescaled; compare directions.
    for k in range(3):
        cos = abs(np.vdot(G[:, k], ref[:, k])) / (np.linalg.norm(G[:, k]) * np.linalg.norm(ref[:, k]))
        assert cos == pytest.approx(1.0, abs=1e-9)


def test_zf_allocation_exact_sinr(hw, disc):
    H = generate_block(disc, 20, 6, seed=12).H
    G = combiner(H, "zf")
    rate = 3.0 * hw.B
    alloc = equal_rate_power_allocation(G, H, rate, hw.noise_power, bandwidth=hw.B)
    assert alloc.feasible
    got = sinr(G, H, alloc.powers, hw.noise_power)
    np.testing.assert_allclose(got, 7.0, rtol=1e-12)


def test_mrc_single_user_power(hw, disc):
    H = generate_block(disc, 10, 1, seed=13).H
    alloc = equal_rate_power_allocation(H, H, 2 * hw.B, hw.noise_power, bandwidth=hw.B)
    expected = hw.noise_power * 3.0 / np.linalg.norm(H[:, 0]) ** 2
    assert alloc.powers[0] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("scheme", ["mrt", "zf", "mmse"])
@pytest.mark.parametrize("direction", ["uplink", "downlink"])
def test_allocation_hits_target(hw, disc, scheme, direction):
    target = 1.5 * hw.B
    hit = 0
    for b in range(30):
        H = generate_block(disc, 16, 4, seed=14, index=b).H
        G = combiner(H, scheme, np.ones(4), hw.noise_power)
        alloc = equal_rate_power_allocation(G, H, target, hw.noise_power, direction, bandwidth=hw.B)
        if alloc.feasible:
            hit += 1
            assert np.all(alloc.powers > 0)
            rates = hw.B * np.log2(1 + sinr(G, H, alloc.powers, hw.noise_power, direction))
            np.testing.assert_allclose(rates, target, rtol=1e-9)
    assert hit >= 20


def test_duality_totals(hw, disc):
    for b in range(100):
        H = generate_block(disc, 12, 4, seed=15, index=b).H
        for scheme in ("mrt", "zf"):
            G = combiner(H, scheme)
            ul = equal_rate_power_allocation(G, H, 0.5 * hw.B, hw.noise_power, "uplink", bandwidth=hw.B)
            dl = equal_rate_power_allocation(G, H, 0.5 * hw.B, hw.noise_power, "downlink", bandwidth=hw.B)
            assert ul.feasible == dl.feasible
            if ul.feasible:
                assert ul.total == pytest.approx(dl.total, rel=1e-9)


def test_infeasible_target_reported(hw, disc):
    H = generate_block(disc, 5, 5, seed=16).H
    alloc = equal_rate_power_allocation(H, H, 20 * hw.B, hw.noise_power, bandwidth=hw.B)
    assert not alloc.feasible and alloc.powers is None


def test_mmse_fixed_point_no_worse_than_zf(hw, disc):
    worse = 0
    for b in range(20):
        H = generate_block(disc, 20, 8, seed=17, index=b).H
        zf = equal_rate_power_allocation(combiner(H, "zf"), H, 2 * hw.B, hw.noise_power, bandwidth=hw.B)
        mm = equal_rate_power_allocation(
            combiner(H, "zf"), H, 2 * hw.B, hw.noise_power, bandwidth=hw.B, mmse_iterations=3
        )
        assert mm.feasible
        worse += mm.total > zf.total * (1 + 1e-9)
    assert worse == 0


def test_zf_estimate_close_to_analytic(hw, disc):
    est = estimate_ee(hw, disc, "zf", 165, 104, RHO_OPT, trials=500, seed=3)
    ref = evaluate_ee(hw, disc, "zf", DesignPoint(165, 104, RHO_OPT))
    assert est.mean == pytest.approx(ref.ee, rel=0.02)
    assert est.pa_power == pytest.approx(ref.pa_power, rel=0.03)
    assert est.net_sum_rate == pytest.approx(ref.net_sum_rate, rel=1e-12)
    assert est.feasibility_rate == 1.0


def test_estimate_deterministic(hw, disc):
    a = estimate_ee(hw, disc, "mmse", 40, 10, 0.5, trials=1, seed=9)
    b = estimate_ee(hw, disc, "mmse", 40, 10, 0.5, trials=1, seed=9)
    assert a == b
    assert math.isinf(a.half_width_95)


def test_estimate_independent_of_threads(hw, disc, monkeypatch):
    monkeypatch.setenv("EE_MIMO_THREADS", "1")
    a = estimate_ee(hw, disc, "zf", 60, 20, 0.5, trials=300, seed=2)
    monkeypatch.setenv("EE_MIMO_THREADS", "4")
    b = estimate_ee(hw, disc, "zf", 60, 20, 0.5, trials=300, seed=2)
    assert a == b


def test_estimate_input_errors(hw, disc):
    with pytest.raises(ValueError):
        estimate_ee(hw, disc, "zf", 10, 10, 1.0)
    with pytest.raises(ValueError):
        estimate_ee(hw, disc, "zf", 20, 10, 1.0, gross_rate=1e6)
    with pytest.raises(ValueError):
        estimate_ee(hw, disc, "zf", 20, 10, trials=0, rho=1.0)


def test_estimate_low_feasibility_warns(hw, disc):
    with pytest.warns(RuntimeWarning):
        est = estimate_ee(hw, disc, "mrt", 20, 18, gross_rate=8 * hw.B, trials=64)
    assert est.feasibility_rate < 0.5


def test_imperfect_rate_matches_per_block_simulation(hw, disc):
    """ZF on the estimates with the error interference solved per block.

    At the gross rate of the closed form the average PA power must match
    the analytic PA power, i.e. both give the same rate at equal power.
    """
    M, K, rho, tau = 60, 20, 0.5, 1.0
    gamma = 2 ** (gross_rate_zf_imperfect(hw, M, K, rho, tau) / hw.B) - 1
    share = 1 / (1 + 1 / (rho * K * tau))
    power = []
    for b in range(10_000):
        blk = generate_block(disc, M, K, seed=5, index=b, mode="imperfect", rho=rho, tau_ul=tau)
        n = np.real(np.diag(np.linalg.inv(blk.H_hat.conj().T @ blk.H_hat)))
        x = np.sum(n * (1 - share) * blk.attenuations)
        power.append(gamma * hw.noise_power / (1 - gamma * x) * np.sum(n) / hw.eta)
    assert np.mean(power) == pytest.approx(pa_power_zf(hw, disc, K, rho), rel=0.03)
    est = estimate_ee(hw, disc, "zf", M, K, rho, trials=2000, mode="imperfect", tau_ul=tau)
    assert est.pa_power == pytest.approx(np.mean(power), rel=0.03)


def test_wishart_identity_attenuations(disc):
    emp, ana = wishart_inverse_trace_check(disc, 20, 10, 5000, seed=1, attenuations=np.ones(10))
    assert ana == 1.0
    assert emp == pytest.approx(1.0, rel=0.02)


@pytest.mark.slow
def test_wishart_heavy_tail(disc):
    emp, ana = wishart_inverse_trace_check(disc, 3, 2, 10**6, seed=2)
    assert emp == pytest.approx(ana, rel=0.05)


def test_mc_estimate_fields():
    e = McEstimate(1.0, 0.1, 10)
    assert e.feasibility_rate == 1.0 and math.isnan(e.pa_power)


def test_sweep_mrt_prefers_small_system(hw, disc):
    small = sweep_ee(hw, disc, "mrt", [81], [77], trials=100, seed=1)
    large = sweep_ee(hw, disc, "mrt", [165], [104], trials=100, seed=1)
    assert small.best_ee > large.best_ee


def test_sweep_rejects_zf_and_empty(hw, disc):
    with pytest.raises(ValueError):
        sweep_ee(hw, disc, "zf", [10], [2])
    with pytest.raises(ValueError):
        sweep_ee(hw, disc, "mrt", [], [2])


def test_sweep_mmse_cell_consistent_with_estimate(hw, disc):
    res = sweep_ee(hw, disc, "mmse", [40], [10], trials=64, seed=0, rtol=1e-4)
    est = estimate_ee(hw, disc, "mmse", 40, 10, float(res.rho[0, 0]), trials=64, seed=0)
    assert est.mean == pytest.approx(res.best_ee, rel=0.05)

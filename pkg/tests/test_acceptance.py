"""End-to-end physics checks at production trajectory counts.

Every capability is pinned against an independent reference: the
closed-form Ising solution, state-vector propagation, the collective
(all-to-all) limit, or a planted synthetic signal. These runs take tens
of minutes serially; the per-module unit tests cover the fast paths.
"""

import numpy as np
import pytest

import dtwa_quench as dq

BENCH_TIMES = np.arange(0.0, 1.0 + 1e-9, 0.02)  # grid spacing 0.02/J
CHAIN_TIMES = np.arange(0.0, 4.0 + 1e-9, 0.02)
THRESHOLD = 0.05


def _chain_correlations(lattice, reference):
    partners = dq.axis_partners(lattice, reference, "y")
    return dq.CorrelationRequest(
        reference=reference, axis="y", partners=partners, components=("yy",)
    )


# ---------------------------------------------------------------------------
# shared heavy runs


@pytest.fixture(scope="module")
def chain16_crossover():
    """DTWA contour fits on a 1x16 chain over the coupling-range sweep."""
    lattice = dq.build_lattice(1, 16)
    reference = dq.center_site(lattice)
    corr = _chain_correlations(lattice, reference)
    out = {}
    for alpha in (0.5, 1.0, 2.0, 3.0):
        couplings = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=alpha)
        run = dq.RunConfig(
            n_t=20_000, master_seed=17, sample_times=CHAIN_TIMES, correlations=corr
        )
        res = dq.run_dtwa(run, couplings)
        contour = dq.extract_contour(res.fields["yy"], THRESHOLD)
        fit = dq.fit_power_law(contour, j_min=1)
        sums = res.chunk_sums
        stderr, _ = dq.bootstrap_eta(
            sums.counts,
            sums.site_sum["yy"],
            sums.pair_sum["yy"],
            CHAIN_TIMES,
            res.fields["yy"].separations,
            "yy",
            THRESHOLD,
            1,
            seed=3,
        )
        out[alpha] = (fit, stderr, res.diagnostics)
    return out


@pytest.fixture(scope="module")
def chain16_exact_alpha3():
    """State-vector contour fit for the same chain at alpha = 3."""
    lattice = dq.build_lattice(1, 16)
    reference = dq.center_site(lattice)
    partners = dq.axis_partners(lattice, reference, "y")
    couplings = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=3.0)
    res = dq.ed_run(
        couplings,
        CHAIN_TIMES,
        collective_x=False,
        reference=reference,
        partners=partners,
        components=("yy",),
    )
    contour = dq.extract_contour(res.fields["yy"], THRESHOLD)
    return dq.fit_power_law(contour, j_min=1)


@pytest.fixture(scope="module")
def xy45_benchmark():
    """4x5 XY runs at n_t = 1e5 with matching state-vector references.

    The alpha = 3 entry also carries corner correlation fields for the
    contour comparison; alpha = 1 only needs the contrast.
    """
    lattice = dq.build_lattice(4, 5)
    corner = dq.site_index(lattice, 1, 1)
    partners = dq.axis_partners(lattice, corner, "y")
    out = {}
    for alpha, seed in ((1.0, 29), (3.0, 31)):
        couplings = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=alpha)
        corr = None
        if alpha == 3.0:
            corr = dq.CorrelationRequest(
                reference=corner, axis="y", partners=partners, components=("yy",)
            )
        run = dq.RunConfig(
            n_t=100_000, master_seed=seed, sample_times=BENCH_TIMES, correlations=corr
        )
        res = dq.run_dtwa(run, couplings)
        ed = dq.ed_run(
            couplings,
            BENCH_TIMES,
            reference=corner if corr else None,
            partners=partners if corr else (),
            components=("yy",) if corr else (),
        )
        out[alpha] = (res, ed)
    return out


@pytest.fixture(scope="module")
def grid15_flat_contour():
    """15x15 XY run at alpha = 1.5 with center correlations."""
    lattice = dq.build_lattice(15, 15)
    reference = dq.center_site(lattice)
    corr = _chain_correlations(lattice, reference)
    couplings = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=1.5)
    run = dq.RunConfig(
        n_t=10_000,
        master_seed=41,
        sample_times=BENCH_TIMES,
        # the default ladder settles at 2.5e-4 here; pin it to skip the reruns
        integrator=dq.IntegratorControl(step=2.5e-4),
        correlations=corr,
    )
    res = dq.run_dtwa(run, couplings)
    return res


# ---------------------------------------------------------------------------
# contrast against the closed-form Ising solution


def test_ising_contrast_is_exact_on_a_7x7_grid():
    lattice = dq.build_lattice(7, 7)
    times = np.linspace(0.0, 2.0, 40)
    for alpha, seed in ((1.0, 101), (3.0, 103)):
        couplings = dq.coupling_matrix(lattice, "ising", J=1.0, alpha=alpha)
        run = dq.RunConfig(n_t=20_000, master_seed=seed, sample_times=times)
        res = dq.run_dtwa(run, couplings)
        exact = dq.ising_series(couplings, times)
        diff = np.abs(res.series.mean("S_x") - exact.mean("S_x"))
        stderr = res.series.stderr("S_x")
        assert diff[0] == 0.0  # t = 0 is deterministic
        z = diff[1:] / stderr[1:]
        assert z.max() <= 3.0, f"alpha={alpha}: max |S_x - exact| = {z.max():.2f} stderr"


# ---------------------------------------------------------------------------
# the two exact oracles agree with each other


def test_closed_form_and_state_vector_oracles_agree():
    times = np.linspace(0.0, 1.0, 20)
    for nx, ny in ((1, 8), (2, 4), (3, 3), (3, 4)):
        lattice = dq.build_lattice(nx, ny)
        n = lattice.n_sites
        for alpha in (0.5, 1.0, 2.0, 3.0):
            couplings = dq.coupling_matrix(lattice, "ising", J=1.0, alpha=alpha)
            states = dq.evolve_ed(dq.prepare_plus_x(n), couplings, times)
            mags = np.array(
                [dq.ising_magnetization(couplings, i, times) for i in range(n)]
            )
            pairs = {
                (i, j): dq.ising_pair(couplings, i, j, times)
                for i in range(n)
                for j in range(i + 1, n)
            }
            for k, psi in enumerate(states):
                for i in range(n):
                    assert abs(dq.expect_sigma_x(psi, i) - mags[i, k]) < 1e-8
                for (i, j), (pp, pm) in pairs.items():
                    pp_ed, pm_ed = dq.expect_pair_ladder(psi, i, j)
                    assert abs(pp_ed - pp[k]) < 1e-8
                    assert abs(pm_ed - pm[k]) < 1e-8


# ---------------------------------------------------------------------------
# the sampled pair error follows its predicted law


def test_sampled_pair_error_follows_the_cosine_squared_law():
    lattice = dq.build_lattice(1, 16)
    reference = dq.center_site(lattice)
    partners = dq.axis_partners(lattice, reference, "y", j_max=4)
    times = np.arange(0.05, 0.5001, 0.05)
    couplings = dq.coupling_matrix(lattice, "ising", J=1.0, alpha=2.0)
    run = dq.RunConfig(
        n_t=20_000,
        master_seed=23,
        sample_times=times,
        correlations=dq.CorrelationRequest(
            reference=reference, axis="y", partners=partners, components=("yy",)
        ),
    )
    res = dq.run_dtwa(run, couplings)
    field = res.fields["yy"]
    for jidx, site_j in enumerate(partners):
        _, c_yy = dq.ising_connected(couplings, reference, site_j, times)
        law = dq.dtwa_error_prediction(couplings, reference, site_j, times)
        observed = dq.relative_deviation(field.values[:, jidx], c_yy)
        propagated = field.stderr[:, jidx] / np.abs(c_yy)
        z = np.abs(observed - law) / propagated
        assert z.max() <= 4.0, f"j={jidx + 1}: deviation {z.max():.2f} propagated stderr"


# ---------------------------------------------------------------------------
# XY contrast and light-cone shape against state-vector propagation


def test_xy_contrast_tracks_exact_propagation_on_4x5(xy45_benchmark):
    n_sites = 20
    for alpha, bound in ((1.0, 0.05), (3.0, 0.15)):
        res, ed = xy45_benchmark[alpha]
        gap = np.abs(res.series.mean("S_x") - ed.series.mean("S_x")).max()
        assert gap <= bound * n_sites, f"alpha={alpha}: max |dS_x| = {gap:.3f}"


def test_lightcone_contours_match_exact_propagation_on_4x5(xy45_benchmark):
    res, ed = xy45_benchmark[3.0]
    sampled = dq.extract_contour(res.fields["yy"], THRESHOLD)
    exact = dq.extract_contour(ed.fields["yy"], THRESHOLD)
    assert sampled.crossed.all() and exact.crossed.all()
    js, delta = dq.contour_difference(sampled, exact, j_min=2)
    assert len(js) == 4
    worst = np.abs(delta).max()
    assert worst <= 0.1, f"fitted contours disagree by {worst:.3f}/J"


# ---------------------------------------------------------------------------
# contour-shape crossover on a chain


def _crossover_rows(chain16_crossover):
    return [
        dq.CrossoverRow(alpha=a, eta=fit.eta, eta_stderr=stderr, ok=fit.ok)
        for a, (fit, stderr, _) in sorted(chain16_crossover.items())
    ]


def test_chain_crossover_exponent_rises_monotonically(chain16_crossover):
    rows = _crossover_rows(chain16_crossover)
    assert all(row.ok for row in rows)
    assert dq.monotonic_within_error(rows, sigmas=2.0), [
        (row.alpha, round(row.eta, 3)) for row in rows
    ]


def test_chain_crossover_is_nearly_flat_for_weakly_decaying_couplings(
    chain16_crossover,
):
    fit, stderr, _ = chain16_crossover[0.5]
    assert fit.ok
    assert fit.eta < 0.4, f"eta = {fit.eta:.3f} +- {stderr:.3f}"


def test_chain_crossover_exact_exponent_is_nearly_linear_at_alpha_three(
    chain16_exact_alpha3,
):
    fit = chain16_exact_alpha3
    assert fit.ok
    assert 0.7 <= fit.eta <= 1.3, f"exact eta = {fit.eta:.3f}"


def test_chain_crossover_sampled_exponent_is_nearly_linear_at_alpha_three(
    chain16_crossover, chain16_exact_alpha3
):
    # The sampled contour is steeper than the exact one on this short
    # chain: crossings come early at j = 1-2 and late near the open
    # boundary, and both effects steepen the whole-range fit.
    fit, stderr, _ = chain16_crossover[3.0]
    assert fit.ok
    assert 0.7 <= fit.eta <= 1.3, (
        f"sampled eta = {fit.eta:.3f} +- {stderr:.3f} "
        f"(exact propagation on this geometry gives {chain16_exact_alpha3.eta:.3f})"
    )


# ---------------------------------------------------------------------------
# flat contour on a 2D grid with slowly decaying couplings


def test_grid_contour_is_flat_when_couplings_decay_slowly(grid15_flat_contour):
    res = grid15_flat_contour
    field = res.fields["yy"]
    contour = dq.extract_contour(field, THRESHOLD)
    fit = dq.fit_power_law(contour, j_min=2)
    assert fit.ok
    sums = res.chunk_sums
    stderr, _ = dq.bootstrap_eta(
        sums.counts,
        sums.site_sum["yy"],
        sums.pair_sum["yy"],
        BENCH_TIMES,
        field.separations,
        "yy",
        THRESHOLD,
        2,
        seed=5,
    )
    assert np.isfinite(stderr) and stderr > 0.0
    assert abs(fit.eta) <= 2.0 * stderr, f"eta = {fit.eta:.3f} +- {stderr:.3f}"


# ---------------------------------------------------------------------------
# collective limit


def test_collective_limit_contrast_follows_the_effective_coupling_curve():
    lattice = dq.build_lattice(5, 5)
    couplings = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=0.1)
    j_eff = dq.effective_coupling(couplings, dq.center_site(lattice))
    times = np.linspace(0.0, 0.5, 21) / j_eff
    run = dq.RunConfig(n_t=20_000, master_seed=53, sample_times=times)
    res = dq.run_dtwa(run, couplings)
    predicted = dq.collective_contrast(25, j_eff, times)
    gap = np.abs(res.series.mean("S_x") - predicted).max()
    assert gap <= 0.1 * 25, f"max |S_x - collective| = {gap:.3f}"


def test_xy_and_ising_dynamics_coincide_for_nearly_uniform_couplings():
    lattice = dq.build_lattice(3, 3)
    xy = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=0.1)
    ising = dq.coupling_matrix(lattice, "ising", J=1.0, alpha=0.1)
    j_eff = dq.effective_coupling(xy, dq.center_site(lattice))
    times = np.linspace(0.0, 0.5, 21) / j_eff
    s_xy = dq.ed_run(xy, times).series.mean("S_x")
    s_ising = dq.ed_run(ising, times).series.mean("S_x")
    gap = np.abs(s_xy - s_ising).max()
    assert gap <= 0.02 * 9, f"max |S_x_xy - S_x_ising| = {gap:.4f}"


# ---------------------------------------------------------------------------
# conservation and determinism at production settings


def test_trajectory_conservation_laws_hold_at_production_settings(
    chain16_crossover, xy45_benchmark, grid15_flat_contour
):
    runs = [diag for _, _, diag in chain16_crossover.values()]
    runs += [res.diagnostics for res, _ in xy45_benchmark.values()]
    runs.append(grid15_flat_contour.diagnostics)
    for diag in runs:
        assert diag["max_norm_deviation"] <= 1e-8
        assert diag["max_energy_rel_drift"] <= 1e-6
        assert diag["max_sz_drift"] <= 1e-8


def test_state_vector_propagation_stays_unitary(xy45_benchmark):
    for _, ed in xy45_benchmark.values():
        assert ed.diagnostics["max_norm_deviation"] <= 1e-9


def test_ensemble_statistics_do_not_depend_on_worker_count():
    lattice = dq.build_lattice(1, 8)
    reference = dq.site_index(lattice, 1, 1)
    couplings = dq.coupling_matrix(lattice, "xy", J=1.0, alpha=1.5)
    run = dq.RunConfig(
        n_t=3 * dq.CHUNK_SIZE + 100,  # force a partial chunk
        master_seed=11,
        sample_times=np.array([0.0, 0.3, 0.6]),
        correlations=_chain_correlations(lattice, reference),
    )
    results = [dq.run_dtwa(run, couplings, workers=w) for w in (1, 2, 8)]
    base = results[0]
    for res in results[1:]:
        assert np.array_equal(res.series.mean("S_x"), base.series.mean("S_x"))
        assert np.array_equal(res.series.stderr("S_x"), base.series.stderr("S_x"))
        assert np.array_equal(res.fields["yy"].values, base.fields["yy"].values)
        assert np.array_equal(res.chunk_sums.pair_sum["yy"], base.chunk_sums.pair_sum["yy"])


# ---------------------------------------------------------------------------
# the contour fit recovers planted exponents


def test_power_law_fit_recovers_planted_exponents():
    rng = np.random.default_rng(7)
    separations = np.arange(1, 13, dtype=np.float64)
    for eta0 in (0.0, 0.5, 1.0, 1.5):
        tau = 0.3 * separations**eta0
        tau = tau * (1.0 + 0.01 * rng.standard_normal(tau.shape))
        contour = dq.Contour(
            threshold=THRESHOLD,
            separations=separations,
            tau=tau,
            crossed=np.ones(tau.shape, dtype=bool),
        )
        fit = dq.fit_power_law(contour, j_min=1)
        assert fit.ok
        assert abs(fit.eta - eta0) <= 0.05, f"planted {eta0}, got {fit.eta:.4f}"

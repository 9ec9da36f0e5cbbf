import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obslab.errors import CouplingSingular, DimensionGuard, EnergyNotPD, SequenceNotAveraging, ValidationError
from obslab.evolution import EvolutionSpec, simpson_weights
from obslab.observability import (
    Gramian,
    assemble_gramian,
    cone_feasible,
    free_layout,
    geometric_weights,
    kernel_scan,
    observability_constants,
    observation_integral,
    simultaneous_constants,
    superposition_constants,
    weak_constant_sweep,
)
from obslab.scenario import Component, DataCoupling, Scenario

from conftest import evolution, make_scenario, wave


def test_single_wave_full_window_closed_form():
    M = 5
    sc = make_scenario([wave()], a=0.0, b=1.0, T=1.3, cutoff=M, nt=4001)
    g = assemble_gramian(sc)
    om = np.sqrt(sc.bases[0].eigenvalues)
    T = sc.T
    cc = T / 2 + np.sin(2 * om * T) / (4 * om)
    ss = (T / 2 - np.sin(2 * om * T) / (4 * om)) / om**2
    cs = np.sin(om * T) ** 2 / (2 * om**2)
    expected = np.block([[np.diag(cc), np.diag(cs)], [np.diag(cs), np.diag(ss)]])
    off = ~np.kron(np.ones((2, 2)), np.eye(M)).astype(bool)
    assert np.abs(g.G[off]).max() <= 1e-10
    np.testing.assert_allclose(g.G, expected, atol=1e-8)


def test_single_wave_one_period_sigma():
    sc0 = make_scenario([wave()], a=0.0, b=1.0, T=1.0, cutoff=1)
    T = 2 * np.pi / np.sqrt(sc0.bases[0].eigenvalues[0])
    sc = make_scenario([wave()], a=0.0, b=1.0, T=T, cutoff=1)
    rep = observability_constants(assemble_gramian(sc))
    assert abs(rep.sigma_min - T / 2) <= 1e-8
    assert abs(rep.sigma_max - T / 2) <= 1e-8


def test_zero_weight_reduces_to_single_component():
    two = assemble_gramian(make_scenario([wave(), evolution(1, weight=0.0)]))
    one = assemble_gramian(make_scenario([wave()], nt=make_scenario([wave(), evolution(1)]).n_times))
    np.testing.assert_allclose(two.G, one.G, atol=1e-14)


def test_identical_waves_zero_gramian():
    g = assemble_gramian(make_scenario([wave(1, 1.0), wave(1, -1.0)]))
    assert np.all(g.G == 0)
    rep = observability_constants(g)
    assert rep.sigma_min == 0 and rep.c_obs == np.inf


def test_identity_energy_gives_unit_constant():
    layout = free_layout(make_scenario([wave()], cutoff=3))
    g = Gramian(np.diag(np.arange(1.0, 7.0)), np.arange(1.0, 7.0), np.zeros(6), layout, cutoff=3)
    rep = observability_constants(g)
    assert rep.sigma_min == pytest.approx(1.0, abs=1e-14) and rep.c_obs == pytest.approx(1.0, abs=1e-14)


def test_energy_not_pd():
    layout = free_layout(make_scenario([wave()], cutoff=2))
    g = Gramian(np.eye(4), np.array([1.0, 0.0, 1.0, 1.0]), np.zeros(4), layout, cutoff=2)
    with pytest.raises(EnergyNotPD):
        observability_constants(g)


def test_gramian_hermitian_psd_and_report_invariants():
    for sc in (
        make_scenario([wave(), evolution(1)]),
        make_scenario([wave(), Component(EvolutionSpec("schrodinger"), 0.5)], T=0.2, cutoff=10),
        make_scenario([wave(), evolution(2, scale=4.0)], mode="independent"),
    ):
        g = assemble_gramian(sc)
        assert np.abs(g.G - g.G.conj().T).max() <= 1e-12 * np.abs(g.G).max()
        ev = np.linalg.eigvalsh(g.G)
        assert ev[0] >= -1e-10 * np.abs(ev).max()
        rep = observability_constants(g)
        assert rep.sigma_min <= rep.sigma_max
        if np.isfinite(rep.c_obs):
            assert rep.c_obs * rep.sigma_min == pytest.approx(1.0, rel=1e-14)


def test_rayleigh_oracle(rng):
    sc = make_scenario([wave(), evolution(1)])
    g = assemble_gramian(sc)
    for _ in range(5):
        v = rng.standard_normal(g.layout.dim)
        v /= np.sqrt(np.sum(g.E * v * v))
        direct = observation_integral(sc, v)
        assert abs(g.rayleigh(v) - direct) <= 1e-8 * direct


def test_rayleigh_oracle_independent_basis_change(rng):
    """Components with different coefficients use their own eigenbases."""
    sc = make_scenario([wave(1.0), wave(2.0, weight=0.5)], cutoff=12)
    g = assemble_gramian(sc)
    v = rng.standard_normal(g.layout.dim)
    assert abs(g.rayleigh(v) - observation_integral(sc, v)) <= 1e-8 * observation_integral(sc, v)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.2, 5.0))
def test_weight_scaling_covariance(s):
    base = make_scenario([wave(1, 1.0), wave(4, -0.7)], cutoff=10)
    r1 = observability_constants(assemble_gramian(base))
    scaled = base.with_(components=tuple(Component(c.spec, s * c.weight) for c in base.components))
    r2 = observability_constants(assemble_gramian(scaled))
    assert r2.sigma_min == pytest.approx(s * s * r1.sigma_min, rel=1e-9)
    u1 = r1.vector / np.linalg.norm(r1.vector)
    u2 = r2.vector / np.linalg.norm(r2.vector)
    u2 = u2 * np.sign(np.vdot(u1, u2).real)
    assert np.linalg.norm(u2 - np.vdot(u1, u2) * u1) <= 1e-8  # sine of the angle


def test_window_monotonicity():
    comps = [wave(1, 1.0), wave(4, -1.0)]
    s_small = observability_constants(assemble_gramian(make_scenario(comps, a=0.6, cutoff=12))).sigma_min
    s_wide = observability_constants(assemble_gramian(make_scenario(comps, a=0.4, cutoff=12))).sigma_min
    assert s_wide >= s_small
    nt = 2001
    s_short = observability_constants(assemble_gramian(make_scenario(comps, T=2.0, nt=nt, cutoff=12))).sigma_min
    s_long = observability_constants(assemble_gramian(make_scenario(comps, T=3.0, nt=nt, cutoff=12))).sigma_min
    assert s_long >= s_short


def test_compact_terms_bound():
    sc = make_scenario([wave(), evolution(1)], compact_terms=True)
    g = assemble_gramian(sc)
    ratio = np.max(g.K / g.E)
    for m0 in range(1, 11):
        on = observability_constants(g, m0, compact=True).sigma_min
        off = observability_constants(g, m0, compact=False).sigma_min
        assert off <= on <= off + ratio + 1e-12


def test_weak_sweep_positive_floor_and_identical_zero():
    rows = weak_constant_sweep(make_scenario([wave(), evolution(1)]), range(1, 11))
    assert len(rows) == 10 and min(r[1] for r in rows) > 0.1
    rows = weak_constant_sweep(make_scenario([wave(1, 1.0), wave(1, -1.0)]), range(1, 11))
    assert all(r[1] == 0 and r[2] == np.inf for r in rows)


def test_sweep_needs_headroom():
    with pytest.raises(ValidationError):
        weak_constant_sweep(make_scenario([wave()], cutoff=12), range(1, 11))


def test_sweep_is_thread_count_independent(monkeypatch):
    sc = make_scenario([wave(), evolution(1)])
    monkeypatch.setenv("OBSLAB_THREADS", "1")
    a = weak_constant_sweep(sc, range(1, 6))
    monkeypatch.setenv("OBSLAB_THREADS", "4")
    assert weak_constant_sweep(sc, range(1, 6)) == a


def test_simultaneous():
    sc = make_scenario([wave(), evolution(2, scale=4.0)], mode="independent")
    simul = simultaneous_constants(sc)
    assert simul.sigma_min > 0
    averaged = observability_constants(assemble_gramian(sc.with_(coupling=DataCoupling("linked_identity"))))
    assert simul.sigma_min <= averaged.sigma_min
    same = make_scenario([wave(), wave()], mode="independent")
    assert simultaneous_constants(same).sigma_min == 0
    with pytest.raises(ValidationError):
        simultaneous_constants(make_scenario([wave(), wave()]))


def test_kernel_scan_cases():
    # The dissipative first-order component loses conditioning geometrically
    # with the cutoff, so emptiness is asserted at a moderate cutoff.
    odd = kernel_scan(make_scenario([wave(), evolution(1)], mode="independent", cutoff=8))
    assert odd.empty and odd.lemma_case == "a"
    even = kernel_scan(make_scenario([wave(), evolution(2, scale=4.0)], mode="independent"))
    assert even.empty and even.lemma_case == "b" and even.matches == []
    same = kernel_scan(make_scenario([wave(1, 1.0), wave(1, -1.0)], mode="independent"))
    assert len(same.vectors) == same.sigma.size > 0
    assert max(same.residuals) <= 1e-10 * max(1.0, max(np.abs(v).max() for v in same.vectors))
    M = 24
    for v in same.vectors:
        d1, d2 = v[: 2 * M], v[2 * M:]
        scale = np.abs(v).max()
        assert np.abs(d1 - d2).max() <= 1e-6 * scale


def test_first_order_component_conditioning_decays_with_cutoff():
    ratios = []
    for M in (4, 6, 8, 10):
        r = simultaneous_constants(make_scenario([wave(), evolution(1)], mode="independent", cutoff=M))
        ratios.append(r.sigma_min_raw / r.sigma_max)
    assert all(b < a / 4 for a, b in zip(ratios, ratios[1:]))


def test_linked_operator_and_singular_coupling(tmp_path):
    M = 10
    R = np.eye(M)
    good = Scenario(grid=make_scenario([wave()]).grid, a=0.6, b=1.0, T=3.0,
                    components=(wave(1, 1.0), wave(4, 1.0)),
                    coupling=DataCoupling("linked_operator", (2 * R, R)), cutoff=M)
    ident = make_scenario([wave(1, 1.0), wave(4, 1.0)], cutoff=M)
    g = assemble_gramian(good)
    assert g.G.shape == assemble_gramian(ident).G.shape
    bad = good.with_(components=(wave(1, 1.0), wave(1, -0.5)), coupling=DataCoupling("linked_operator", (2 * R, 2 * R)))
    with pytest.raises(CouplingSingular):
        assemble_gramian(bad)


def test_dimension_guard():
    sc = make_scenario([wave(), evolution(1)], mode="independent", N=1199, a=0.6, cutoff=700)
    with pytest.raises(DimensionGuard):
        assemble_gramian(sc)


def test_cone():
    sc = make_scenario([wave(1, 1.0), wave(4, 1.0)], mode="independent").with_(
        coupling=DataCoupling("cone", cone_c=0.5))
    d1 = np.zeros((2, 24))
    d1[0, 0] = 1.0
    assert cone_feasible(sc, d1, 0.1 * d1)
    assert not cone_feasible(sc, d1, d1)
    with pytest.raises(ValidationError):
        make_scenario([wave(1, 1.0), wave(4, 1.0)]).with_(coupling=DataCoupling("cone", cone_c=1.0))


def _super_scenario(weights):
    comps = [wave(4.0, weights[0])] + [wave(2 - i / 6, w) for i, w in enumerate(weights[1:])]
    return make_scenario(comps, mode="linked_identity", cutoff=16).with_(mode="super")


def test_superposition_reductions():
    th = geometric_weights(0.4, 2)
    sc = _super_scenario(th)
    res = superposition_constants(sc, [th], [1, 2])
    single = observability_constants(assemble_gramian(make_scenario([wave(4.0, 1.0)], cutoff=16, nt=sc.n_times)))
    row1 = [r for r in res.table if r[0] == 1][0]
    assert row1[3] == pytest.approx(single.sigma_min, rel=1e-12)
    pair = observability_constants(assemble_gramian(sc.with_(mode="averaged")))
    row2 = [r for r in res.table if r[0] == 2][0]
    assert row2[3] == pytest.approx(pair.sigma_min, rel=1e-12)
    assert res.report.sigma_min == pytest.approx(pair.sigma_min, rel=1e-12)


def test_superposition_needs_averaging_sequence():
    with pytest.raises(SequenceNotAveraging):
        _super_scenario([0.5, 0.499])
    sc = _super_scenario(geometric_weights(0.5, 3))
    with pytest.raises(SequenceNotAveraging):
        superposition_constants(sc, [[0.5, -0.2, 0.7]], [3])


def test_simpson_exact_for_cubics():
    t = np.linspace(0, 2, 9)
    assert simpson_weights(9, t[1] - t[0]) @ t**3 == pytest.approx(4.0, rel=1e-14)


def test_cone_reports_minimiser_feasibility():
    # Identical waves with weights (1, 1/4): the unobservable data is u2 = -4 u1.
    # Any admissible cone (c on either side of theta1/theta2 = 4) excludes it.
    base = make_scenario([wave(), wave(weight=0.25)], mode="independent", cutoff=8)
    for c in (2.0, 8.0):
        rep = simultaneous_constants(base.with_(coupling=DataCoupling("cone", (), c)))
        assert rep.sigma_min == 0
        assert rep.diagnostics["cone_feasible_minimiser"] is False

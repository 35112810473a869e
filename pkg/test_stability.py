"""
Test Suite for the Stability Analysis

Covers the system matrix, the per-mode cubic and its factorization of eig(A), the
Jordan chains, the parameter conditions and tau bounds, the closed-form Hurwitz test
against root finding, and the analytic versus spectral verdicts on random graphs.

Dependencies:
    - Pytest for unit testing
    - Hypothesis for the closed-form test properties
    - numpy for seeded random instances
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.exceptions import ParameterConditionError, StabilityInputError
from app.stability import (assemble_system_matrix, check_parameter_conditions, companion_roots,
                           full_stability_report, hermite_biehler_details, hermite_biehler_schur_test, jordan_chain,
                           jordan_residuals, lemma1_check, mode_polynomial, nu_bound, predict_fixed_point,
                           schur_by_roots, topology_free_tau_bound)
from app.topology import (GRAPH_FAMILIES, build_laplacian, default_weights, gershgorin_bound, make_chain, make_star,
                          make_two_client_loop, make_wheel,
                          random_topology)
from models.models import Edge, ProtocolParams, Topology, Verdict


def random_params(rng: np.random.Generator, tau_max: float = 1.5) -> ProtocolParams:
    """Gains drawn around the working range, with both signs of kappa1 - kappa2."""
    kappa1 = rng.uniform(0.1, 2.0)
    return ProtocolParams(
        kappa1=kappa1,
        kappa2=rng.uniform(0.05, 1.2 * kappa1),
        p=rng.uniform(0.05, 1.95),
        tau=rng.uniform(0.05, tau_max),
        c=rng.uniform(0.2, 1.0),
    )


def random_instance(rng: np.random.Generator, n_max: int = 8, tau_max: float = 1.5):
    family = rng.choice(sorted(GRAPH_FAMILIES))
    n = int(rng.integers(2, n_max + 1))
    params = random_params(rng, tau_max)
    graph = default_weights(random_topology(family, n, rng), params.c)
    r = 1.0 + rng.uniform(-1e-4, 1e-4, size=n)
    return graph, r, params

###############################################################################
#                         System Matrix and Modes                             #
###############################################################################
def test_system_matrix_blocks(loop, eq15):
    """Test the block layout of A."""
    L = build_laplacian(loop)
    r = [1.0, 1.00002, 0.999985]
    system = assemble_system_matrix(L, r, eq15)
    assert system.matrix.shape == (9, 9)
    np.testing.assert_allclose(system.block(1, 2), eq15.tau * np.diag(r))
    np.testing.assert_allclose(system.block(2, 1), -1.1 * L)
    np.testing.assert_allclose(system.block(3, 1), -0.99 * L)
    np.testing.assert_allclose(system.block(3, 3), 0.01 * np.eye(3), atol=1e-15)

def test_system_matrix_rejects_bad_skews(star, eq15):
    """Test that mismatched or non-positive skews are refused."""
    L = build_laplacian(star)
    with pytest.raises(StabilityInputError):
        assemble_system_matrix(L, [1.0], eq15)
    with pytest.raises(StabilityInputError):
        assemble_system_matrix(L, [1.0, -1.0], eq15)

def test_zero_mode_roots(eq15):
    """Test that nu = 0 gives the roots 1, 1 and 1 - p."""
    roots = np.sort_complex(companion_roots(0.0, eq15))
    np.testing.assert_allclose(roots.real, [0.01, 1.0, 1.0], atol=1e-9)

def test_equal_gains_put_a_root_at_one():
    """Test that kappa1 = kappa2 gives every mode a root at lambda = 1."""
    params = ProtocolParams(kappa1=1.0, kappa2=1.0, p=0.5, tau=1.0)
    assert mode_polynomial(0.4, params)(0.0) == 0.0
    assert np.min(np.abs(companion_roots(0.4, params) - 1.0)) < 1e-12

def test_lemma1_star(star, eq15):
    """Test that eig(A) of the star is the union of its two mode cubics."""
    result = lemma1_check(build_laplacian(star), [1.0, 1.00002], eq15)
    assert result.matches
    assert result.multiplicity_of_one == 2
    assert result.eigenvalues.shape == result.mode_roots.shape == (6,)

@pytest.mark.parametrize("seed", [11, 23, 37])
def test_lemma1_random_instances(seed):
    """Test the factorization and the double eigenvalue 1 on 200 random connected graphs."""
    rng = np.random.default_rng(seed)
    for _ in range(200):
        graph, r, params = random_instance(rng, n_max=6)
        result = lemma1_check(build_laplacian(graph), r, params)
        assert result.matches, result.factorization_residual
        assert result.multiplicity_of_one == 2

def test_lemma1_clustered_chain(eq15):
    """Test that a chain whose modes nearly coincide still factors, whatever eig(A) drifts by."""
    chain = default_weights(make_chain(6), eq15.c)
    r = 1.0 + 1e-4 * np.array([0.0, 1.0, -1.0, 1.0, -1.0, 1.0])
    result = lemma1_check(build_laplacian(chain), r, eq15.model_copy(update={"tau": 0.5}))
    assert result.matches, (result.factorization_residual, result.pair_distance)
    assert result.multiplicity_of_one == 2

@pytest.mark.parametrize("graph", [make_star(3), make_two_client_loop()])
def test_equal_gains_lose_the_double_one(graph):
    """Test that kappa1 = kappa2 puts every mode on lambda = 1, four roots for three nodes."""
    params = ProtocolParams(kappa1=1.0, kappa2=1.0, p=0.5, tau=0.5, c=0.7)
    weighted = default_weights(graph, params.c)
    result = lemma1_check(build_laplacian(weighted), np.full(3, 1.00001), params)
    assert result.matches
    assert np.count_nonzero(np.abs(result.mode_roots - 1.0) < 1e-7) == 4

def test_disconnected_graph_has_extra_ones(eq15):
    """Test that two leaders give a zero mode each, so 1 appears four times."""
    graph = default_weights(Topology(n=3, edges=(Edge(source=2, target=1),), leader_ids=frozenset({1, 3})), eq15.c)
    result = lemma1_check(build_laplacian(graph), [1.0, 1.00002, 0.99999], eq15)
    assert result.matches
    assert np.count_nonzero(np.abs(result.mode_roots - 1.0) < 1e-7) == 4


###############################################################################
#                        Jordan Chains and Fixed Point                        #
###############################################################################
def test_jordan_chain_relations_random():
    """Test the six chain relations and biorthogonality to 1e-9 on 200 random graphs."""
    rng = np.random.default_rng(12)
    for _ in range(200):
        graph, r, params = random_instance(rng, n_max=6)
        L = build_laplacian(graph)
        chain = jordan_chain(L, r, params)
        residuals = jordan_residuals(assemble_system_matrix(L, r, params).matrix, chain, params.p)
        assert max(residuals.values()) < 1e-9, residuals

def test_jordan_chain_needs_distinct_gains(star):
    """Test that kappa1 = kappa2 is refused."""
    params = ProtocolParams(kappa1=1.0, kappa2=1.0, p=0.5, tau=1.0)
    with pytest.raises(StabilityInputError):
        jordan_chain(build_laplacian(star), [1.0, 1.0], params)

def test_fixed_point_leader_initialization(star, eq15):
    """Test that a leader started at t0 with r = 1 fixes x* = t0 and r* = 1."""
    L = build_laplacian(star)
    r = [1.0, 1.00002]
    chain = jordan_chain(L, r, eq15)
    assert chain.gamma == pytest.approx(1.0)
    prediction = predict_fixed_point([0.0, 0.001], [1.0, 1.0], [0.0, 0.0], chain.xi, chain.gamma, eq15, r)
    assert prediction.x_star == pytest.approx(0.0, abs=1e-15)
    assert prediction.r_star == pytest.approx(1.0)

def test_fixed_point_ignores_node_order():
    """Test that relabelling the nodes leaves x* and r* unchanged on random graphs."""
    rng = np.random.default_rng(31)
    for _ in range(50):
        graph, r, params = random_instance(rng, n_max=7)
        L = build_laplacian(graph)
        n = graph.n
        x0, s0, y0 = rng.normal(0, 1e-3, n), 1.0 + rng.normal(0, 1e-5, n), rng.normal(0, 1e-6, n)
        chain = jordan_chain(L, r, params)
        expected = predict_fixed_point(x0, s0, y0, chain.xi, chain.gamma, params, r)

        order = rng.permutation(n)
        L_perm, r_perm = L[np.ix_(order, order)], r[order]
        chain_perm = jordan_chain(L_perm, r_perm, params)
        actual = predict_fixed_point(x0[order], s0[order], y0[order], chain_perm.xi, chain_perm.gamma, params, r_perm)
        assert actual.x_star == pytest.approx(expected.x_star, rel=1e-8, abs=1e-12)
        assert actual.r_star == pytest.approx(expected.r_star, rel=1e-10)

###############################################################################
#                       Parameter Conditions and Bounds                       #
###############################################################################
def test_nu_bound_eq15(eq15):
    """Test the nu bound of the kappa1=1.1, kappa2=1.0, p=0.99 gains."""
    assert nu_bound(eq15) == pytest.approx(0.8902, abs=1e-4)

def test_nu_bound_eq17():
    """Test the nu bound of the kappa1=1.388, kappa2=1.374, p=1.98 gains."""
    params = ProtocolParams(kappa1=1.388, kappa2=1.374, p=1.98, tau=16.0, c=0.05)
    assert nu_bound(params) == pytest.approx(1.44, abs=0.01)

def test_star_tau_bound(star, eq15):
    """Test the 1.2717 s bound of the star within 0.1%."""
    report = full_stability_report(star, [1.0, 1.00002], eq15)
    assert report.tau_bound == pytest.approx(1.2717, rel=1e-3)
    assert report.verdict is Verdict.STABLE
    assert report.verdicts_agree

def test_loop_tau_bound_and_verdicts(loop, eq15):
    """Test the 847.8 ms loop bound, instability at 1 s and stability at 500 ms."""
    r = [1.0, 1.00002, 0.999985]
    unstable = full_stability_report(loop, r, eq15)
    assert unstable.tau_bound == pytest.approx(0.8478, rel=1e-3)
    assert unstable.verdict is Verdict.UNSTABLE
    assert unstable.cond_iii is False

    fixed = full_stability_report(loop, r, eq15.model_copy(update={"tau": 0.5}))
    assert fixed.verdict is Verdict.STABLE
    assert fixed.spectral_margin < 1.0

def test_condition_i_fails_for_large_p(star):
    """Test that p = 2.5 violates condition (i) and is unstable."""
    params = ProtocolParams(kappa1=1.1, kappa2=1.0, p=2.5, tau=1.0)
    report = full_stability_report(star, [1.0, 1.0], params)
    assert report.cond_i is False
    assert report.verdict is Verdict.UNSTABLE

def test_conditions_need_positive_mu(eq15):
    """Test that mu_max <= 0 with edges is refused."""
    with pytest.raises(StabilityInputError):
        check_parameter_conditions(eq15, 0.0)

def test_edgeless_graph_conditions(eq15):
    """Test that condition (iii) holds vacuously without edges."""
    conditions = check_parameter_conditions(eq15, 0.0, has_edges=False)
    assert conditions.cond_iii and conditions.tau_bound is None

def test_topology_free_bound(eq15):
    """Test the topology-free bound for alpha_max = 0.7 and a 100 ppm skew bound."""
    bound = topology_free_tau_bound(eq15, 0.7, 1.0001)
    assert bound == pytest.approx(0.6359, rel=1e-3)

def test_topology_free_bound_needs_condition_ii():
    """Test that kappa2 - dk p <= 0 is refused."""
    params = ProtocolParams(kappa1=3.0, kappa2=0.1, p=1.0, tau=1.0)
    with pytest.raises(ParameterConditionError):
        topology_free_tau_bound(params, 0.7, 1.0)

def test_topology_free_bound_covers_wheels(eq15):
    """Test that every wheel at a tau under the topology-free bound is stable."""
    for K in range(5):
        wheel = default_weights(make_wheel(9, K), 0.7)
        L = build_laplacian(wheel)
        tau = 0.99 * topology_free_tau_bound(eq15, gershgorin_bound(L) / 2, 1.0001)
        report = full_stability_report(wheel, np.full(10, 1.0001), eq15.model_copy(update={"tau": tau}))
        assert report.verdict is Verdict.STABLE

def test_topology_free_bound_never_exceeds_graph_bound():
    """Test that the topology-free bound sits at or below the graph's own tau bound on random graphs."""
    rng = np.random.default_rng(41)
    compared = 0
    for _ in range(200):
        graph, r, params = random_instance(rng)
        report = full_stability_report(graph, r, params)
        if report.tau_bound is None or report.tau_bound_topology_free is None:
            continue
        assert report.tau_bound_topology_free <= report.tau_bound * (1 + 1e-12)
        compared += 1
    assert compared > 20

###############################################################################
#                          Closed-form Hurwitz Test                           #
###############################################################################
def test_closed_form_matches_roots_random():
    """Test closed-form and root-based Schur tests agree on 10^4 samples off the boundary."""
    rng = np.random.default_rng(13)
    compared = 0
    for _ in range(10_000):
        params = random_params(rng)
        nu = rng.uniform(0.01, 3.0)
        bound = nu_bound(params)
        if np.isfinite(bound) and abs(nu - bound) < 1e-8:
            continue
        if abs(np.abs(companion_roots(nu, params)).max() - 1.0) < 1e-8:
            continue
        assert hermite_biehler_schur_test(nu, params) == schur_by_roots(nu, params), (params, nu)
        compared += 1
    assert compared > 9_900

@settings(max_examples=200, deadline=None)
@given(nu=st.floats(min_value=0.05, max_value=0.85))
def test_eq15_modes_inside_bound_are_schur(nu):
    """Test that every eq15 mode below the nu bound is Schur with interlaced frequencies."""
    params = ProtocolParams(kappa1=1.1, kappa2=1.0, p=0.99, tau=1.0)
    details = hermite_biehler_details(nu, params)
    assert details.schur and details.interlaced
    assert all(a > 0 for a in details.coefficients)

def test_closed_form_needs_positive_nu(eq15):
    """Test that nu <= 0 is refused."""
    with pytest.raises(StabilityInputError):
        hermite_biehler_schur_test(0.0, eq15)

def test_details_without_gain_gap():
    """Test that equal gains leave the leading condition undefined."""
    params = ProtocolParams(kappa1=1.0, kappa2=1.0, p=0.5, tau=1.0)
    details = hermite_biehler_details(0.5, params)
    assert details.leading_condition is None
    assert not details.schur

###############################################################################
#                    Analytic Versus Spectral Verdicts                        #
###############################################################################
def test_analytic_matches_spectral_random():
    """Test that both verdicts agree on 1000 random graphs off the unit-circle band."""
    rng = np.random.default_rng(14)
    compared = 0
    while compared < 1000:
        graph, r, params = random_instance(rng)
        report = full_stability_report(graph, r, params)
        if abs(report.spectral_margin - 1.0) < 1e-6:
            continue
        assert report.all_real_spectrum
        assert report.analytic_verdict is report.spectral_verdict, report.diagnostics
        compared += 1

def test_disconnected_graph_unstable(eq15):
    """Test that two free-running leaders are reported unstable and not connected."""
    graph = Topology(n=3, edges=(Edge(source=2, target=1),), leader_ids=frozenset({1, 3}))
    report = full_stability_report(graph, [1.0, 1.0, 1.0], eq15)
    assert not report.connected
    assert report.verdict is Verdict.UNSTABLE

def test_complex_spectrum_not_covered(eq15):
    """Test that a directed cycle is not covered by the parameter conditions."""
    cycle = Topology(n=3, edges=(Edge(source=1, target=2), Edge(source=2, target=3), Edge(source=3, target=1)))
    report = full_stability_report(cycle, [1.0, 1.0, 1.0], eq15.model_copy(update={"tau": 0.2}))
    assert report.verdict is Verdict.NOT_COVERED
    assert report.analytic_verdict is None

def test_unweighted_graph_gets_commit_weights(eq15):
    """Test that an unweighted star is analysed with c / |N_i| weights."""
    report = full_stability_report(make_star(2), [1.0, 1.00002], eq15)
    assert report.mu_max == pytest.approx(0.7 * 1.00002)

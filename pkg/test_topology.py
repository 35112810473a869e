"""
Test Suite for Measurement Graphs

Covers the Laplacian, the commit-factor weights, the standard and random graphs, the
connectivity checks, the left null vector and the spectral helpers.

Dependencies:
    - Pytest for unit testing
    - numpy for the matrix checks, scipy for pairing eigenvalues
"""
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.optimize import linear_sum_assignment

from app.exceptions import DisconnectedGraphError, TopologyError
from app.topology import (GRAPH_FAMILIES, build_laplacian, connectivity, default_weights, gershgorin_bound,
                          left_null_vector, make_chain, make_star, make_two_client_loop, make_wheel, random_topology,
                          real_eigenvalues)
from models.models import Edge, Topology

###############################################################################
#                         Laplacian and Weights                               #
###############################################################################
def test_star_laplacian(star):
    """Test the Laplacian of a leader and one client with c = 0.7."""
    L = build_laplacian(star)
    np.testing.assert_allclose(L, [[0.0, 0.0], [-0.7, 0.7]])

def test_rows_sum_to_zero(loop):
    """Test that every Laplacian row sums to zero."""
    L = build_laplacian(loop)
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-15)
    assert L[1, 1] == pytest.approx(0.7) and L[1, 0] == pytest.approx(-0.35)

def test_default_weights_split_commit_factor():
    """Test alpha = c / |N_i| for every edge."""
    wheel = default_weights(make_wheel(9, 2), 0.7)
    for node in range(2, 11):
        out = wheel.out_edges(node)
        assert len(out) == 5
        assert sum(edge.alpha for edge in out) == pytest.approx(0.7)

def test_default_weights_need_leader_or_neighbors():
    """Test that an isolated node that is not a leader is refused."""
    graph = Topology(n=3, edges=(Edge(source=2, target=1),), leader_ids=frozenset({1}))
    with pytest.raises(TopologyError):
        default_weights(graph, 0.7)

def test_default_weights_reject_commit_factor():
    """Test that a non-positive commit factor is refused."""
    with pytest.raises(TopologyError):
        default_weights(make_star(3), 0.0)

def test_laplacian_needs_weights():
    """Test that an unweighted graph has no Laplacian."""
    with pytest.raises(TopologyError):
        build_laplacian(make_star(3))

###############################################################################
#                            Graph Validation                                 #
###############################################################################
@pytest.mark.parametrize("edges, leaders", [
    ([(1, 1)], set()),
    ([(2, 1), (2, 1)], {1}),
    ([(2, 4)], set()),
    ([(1, 2)], {1}),
])
def test_invalid_graphs(edges, leaders):
    """Test that self-loops, duplicates, unknown nodes and leaders with edges are refused."""
    with pytest.raises(ValidationError):
        Topology(n=3, edges=tuple(Edge(source=i, target=j) for i, j in edges), leader_ids=frozenset(leaders))

def test_edge_aliases():
    """Test that edges accept the file keys from / to."""
    edge = Edge.model_validate({"from": 2, "to": 1, "alpha": 0.5})
    assert (edge.source, edge.target, edge.alpha) == (2, 1, 0.5)

###############################################################################
#                            Standard Graphs                                  #
###############################################################################
def test_wheel_reach():
    """Test that K=0 is a star and K=4 links every pair of the 9 clients."""
    assert len(make_wheel(9, 0).edges) == 9
    assert len(make_wheel(9, 4).edges) == 9 + 9 * 8

@pytest.mark.parametrize("K", [-1, 5])
def test_wheel_rejects_reach(K):
    """Test that K outside 0..(n-1)/2 is refused."""
    with pytest.raises(TopologyError):
        make_wheel(9, K)

def test_chain_and_loop_shapes():
    """Test the chain and the two-client loop."""
    assert {(e.source, e.target) for e in make_chain(4).edges} == {(2, 1), (3, 2), (4, 3)}
    assert {(e.source, e.target) for e in make_two_client_loop().edges} == {(2, 1), (3, 1), (2, 3), (3, 2)}

@pytest.mark.parametrize("family", sorted(GRAPH_FAMILIES))
def test_random_families_connected_with_real_spectra(family, rng):
    """Test that every random family yields connected graphs with a real L R spectrum."""
    for n in range(2, 9):
        graph = default_weights(random_topology(family, n, rng), 0.7)
        assert connectivity(graph).connected
        r = 1.0 + rng.uniform(-1e-4, 1e-4, size=n)
        assert real_eigenvalues(build_laplacian(graph) @ np.diag(r)).all_real

def test_unknown_family(rng):
    """Test that an unknown family name is refused."""
    with pytest.raises(TopologyError):
        random_topology("ring", 4, rng)

###############################################################################
#                        Connectivity and Spectra                             #
###############################################################################
def test_two_leaders_not_connected():
    """Test that two free-running leaders fail the rooted spanning tree check."""
    graph = Topology(n=3, edges=(Edge(source=2, target=1),), leader_ids=frozenset({1, 3}))
    report = connectivity(graph)
    assert not report.connected
    assert report.sink_components == 2
    assert report.failed == "rooted-spanning-tree"

def test_left_null_vector_star(star):
    """Test that all influence sits on the leader of a star."""
    np.testing.assert_allclose(left_null_vector(build_laplacian(star)), [1.0, 0.0], atol=1e-12)

def test_left_null_vector_symmetric():
    """Test that a symmetric graph with equal degrees has uniform influence."""
    graph = default_weights(Topology(n=3, edges=tuple(
        Edge(source=i, target=j) for i in (1, 2, 3) for j in (1, 2, 3) if i != j
    )), 0.7)
    xi = left_null_vector(build_laplacian(graph))
    np.testing.assert_allclose(xi, [1 / 3] * 3, atol=1e-12)
    assert xi.sum() == pytest.approx(1.0)

def test_left_null_vector_disconnected():
    """Test that a repeated zero eigenvalue raises DisconnectedGraphError."""
    graph = default_weights(Topology(n=3, edges=(Edge(source=2, target=1),), leader_ids=frozenset({1, 3})), 0.7)
    with pytest.raises(DisconnectedGraphError):
        left_null_vector(build_laplacian(graph))

@pytest.mark.parametrize("family", sorted(GRAPH_FAMILIES))
def test_left_null_vector_residual_random(family, rng):
    """Test xi^T L = 0 and sum(xi) = 1 on random connected graphs of up to 12 nodes."""
    for n in range(3, 13):
        L = build_laplacian(default_weights(random_topology(family, n, rng), 0.7))
        xi = left_null_vector(L)
        assert np.abs(xi @ L).max() < 1e-10
        assert xi.sum() == pytest.approx(1.0)


def characteristic_roots(M: np.ndarray) -> np.ndarray:
    """Roots of det(lambda I - M), coefficients from the power traces by Newton's identities."""
    n = M.shape[0]
    traces = [np.trace(np.linalg.matrix_power(M, k)) for k in range(1, n + 1)]
    e = [1.0]
    for k in range(1, n + 1):
        e.append(sum((-1) ** (i - 1) * e[k - i] * traces[i - 1] for i in range(1, k + 1)) / k)
    return np.roots([(-1) ** k * e[k] for k in range(n + 1)])

def test_real_eigenvalues_match_characteristic_polynomial():
    """Test the spectrum of 200 random 4 x 4 matrices against the roots of their characteristic polynomial."""
    rng = np.random.default_rng(17)
    for _ in range(200):
        M = rng.normal(size=(4, 4))
        values = real_eigenvalues(M).values
        oracle = characteristic_roots(M)
        cost = np.abs(values[:, None] - oracle[None, :])
        rows, cols = linear_sum_assignment(cost)
        assert cost[rows, cols].max() < 1e-7

def test_gershgorin_bounds_spectrum(loop):
    """Test that every eigenvalue of L lies below 2 max L_ii."""
    L = build_laplacian(loop)
    assert gershgorin_bound(L) == pytest.approx(1.4)
    assert real_eigenvalues(L).max_real <= gershgorin_bound(L)

def test_complex_spectrum_flagged():
    """Test that a directed 3-cycle has a complex Laplacian spectrum."""
    cycle = default_weights(Topology(n=3, edges=(
        Edge(source=1, target=2), Edge(source=2, target=3), Edge(source=3, target=1),
    )), 1.0)
    assert not real_eigenvalues(build_laplacian(cycle)).all_real

"""
Topology Module

Measurement graphs and their spectral quantities: the weighted Laplacian, the
default commit-factor weights, the standard star / loop / chain / wheel graphs,
random graph families with real Laplacian spectra, connectivity checks, the left
null vector xi, the Gershgorin bound and dense eigenvalue lists.

Edge (i, j) means node i measures its offset to node j. Node ids are 1-based;
matrix rows are indexed by id - 1.

Dependencies:
    - numpy and scipy.linalg for dense linear algebra
    - networkx for graph construction and the rooted connectivity check
    - Logging for residual warnings
"""
import logging
import numpy as np
import networkx as nx
from scipy import linalg
from config import IMAG_TOLERANCE, NULL_VECTOR_RESIDUAL
from app.exceptions import DisconnectedGraphError, TopologyError
from models.models import ConnectivityReport, Edge, Spectrum, Topology

LaplacianMatrix = np.ndarray

# -----------------------------------
# Laplacian and Weights
# -----------------------------------
def build_laplacian(t: Topology) -> LaplacianMatrix:
    """
    Dense Laplacian: L_ii = sum_j alpha_ij and L_ij = -alpha_ij.

    Leader rows, and the rows of any node without edges, are zero.

    Raises:
        TopologyError: If an edge has no weight assigned.
    """
    if not t.is_weighted:
        raise TopologyError("cannot build a Laplacian before weights are assigned")
    L = np.zeros((t.n, t.n))
    for edge in t.edges:
        i, j = edge.source - 1, edge.target - 1
        L[i, j] -= edge.alpha
        L[i, i] += edge.alpha
    return L


def default_weights(t: Topology, c: float) -> Topology:
    """
    Assign alpha_ij = c / |N_i| on every edge, so each non-leader puts total weight c
    on its neighbors.

    Args:
        t (Topology): Graph, weighted or not; existing weights are replaced.
        c (float): Commit factor.

    Returns:
        Topology: The same graph with the commit-factor weights.

    Raises:
        TopologyError: If c is not positive or a non-leader has no neighbors.
    """
    if not c > 0:
        raise TopologyError(f"commit factor must be positive, got {c}")

    out_degree = {node: 0 for node in t.nodes}
    for edge in t.edges:
        out_degree[edge.source] += 1

    isolated = [node for node, degree in out_degree.items() if degree == 0 and node not in t.leader_ids]
    if isolated:
        raise TopologyError(f"node(s) {isolated} measure no neighbor and are not declared leaders")

    edges = tuple(
        Edge(source=edge.source, target=edge.target, alpha=c / out_degree[edge.source])
        for edge in t.edges
    )
    return t.model_copy(update={"edges": edges})


# -----------------------------------
# Standard Graphs
# -----------------------------------
def _topology(n: int, pairs, leaders=(1,)) -> Topology:
    edges = tuple(Edge(source=int(i), target=int(j)) for i, j in sorted(pairs))
    return Topology(n=n, edges=edges, leader_ids=frozenset(leaders))


def make_star(n: int) -> Topology:
    """Leader 1 and clients 2..n, each measuring only the leader."""
    if n < 1:
        raise TopologyError(f"a star needs at least one node, got {n}")
    return _topology(n, [(i, 1) for i in range(2, n + 1)])


def make_two_client_loop() -> Topology:
    """Two clients that measure the leader and each other, closing a timing loop."""
    return _topology(3, [(2, 1), (3, 1), (2, 3), (3, 2)])


def make_chain(n: int) -> Topology:
    """Node i measures node i - 1; node 1 leads."""
    if n < 1:
        raise TopologyError(f"a chain needs at least one node, got {n}")
    return _topology(n, [(i, i - 1) for i in range(2, n + 1)])


def make_wheel(n_clients: int, K: int) -> Topology:
    """
    Clients 2..n_clients+1 each measure the leader and, in both directions, the K nearest
    clients on either side of a ring.

    Args:
        n_clients (int): Number of clients.
        K (int): Ring reach; 0 gives a star, (n_clients - 1) / 2 a complete client graph.

    Raises:
        TopologyError: If K is outside 0..(n_clients - 1) / 2.
    """
    if n_clients < 1:
        raise TopologyError(f"a wheel needs at least one client, got {n_clients}")
    if not 0 <= K <= (n_clients - 1) / 2:
        raise TopologyError(f"K must satisfy 0 <= K <= (n_clients - 1) / 2, got K={K} for {n_clients} clients")

    ring = nx.circulant_graph(n_clients, range(1, K + 1))
    pairs = [(i + 2, 1) for i in range(n_clients)]
    for u, v in ring.edges():
        pairs += [(u + 2, v + 2), (v + 2, u + 2)]
    return _topology(n_clients + 1, pairs)


# -----------------------------------
# Random Graph Families
# -----------------------------------
def _nx_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**32))


def _connected_gnp(nodes: int, rng: np.random.Generator, edge_probability: float) -> nx.Graph:
    while True:
        graph = nx.gnp_random_graph(nodes, edge_probability, seed=_nx_seed(rng))
        if nodes == 1 or nx.is_connected(graph):
            return graph


def random_tree(n: int, rng: np.random.Generator) -> Topology:
    """Random tree rooted at leader 1; every other node measures a randomly chosen earlier node."""
    pairs = [(i, int(rng.integers(1, i))) for i in range(2, n + 1)]
    return _topology(n, pairs)


def random_symmetric(n: int, rng: np.random.Generator, edge_probability: float = 0.5) -> Topology:
    """Connected undirected graph measured in both directions; there is no leader."""
    graph = _connected_gnp(n, rng, edge_probability)
    pairs = []
    for u, v in graph.edges():
        pairs += [(u + 1, v + 1), (v + 1, u + 1)]
    return _topology(n, pairs, leaders=())


def random_symmetric_with_leader(n: int, rng: np.random.Generator, edge_probability: float = 0.5) -> Topology:
    """Leader 1 plus a connected symmetric client graph; a random nonempty subset of clients measures the leader."""
    if n < 2:
        raise TopologyError("a graph with a leader and clients needs n >= 2")
    graph = _connected_gnp(n - 1, rng, edge_probability)
    pairs = []
    for u, v in graph.edges():
        pairs += [(u + 2, v + 2), (v + 2, u + 2)]

    linked = rng.random(n - 1) < 0.5
    linked[int(rng.integers(n - 1))] = True
    pairs += [(i + 2, 1) for i in np.flatnonzero(linked)]
    return _topology(n, pairs)


GRAPH_FAMILIES = {
    "tree": random_tree,
    "symmetric": random_symmetric,
    "symmetric-with-leader": random_symmetric_with_leader,
}


def random_topology(family: str, n: int, rng: np.random.Generator) -> Topology:
    """Draw an unweighted graph from one of the real-spectrum families."""
    try:
        return GRAPH_FAMILIES[family](n, rng)
    except KeyError:
        raise TopologyError(f"unknown graph family '{family}'") from None


# -----------------------------------
# Connectivity and Spectra
# -----------------------------------
def connectivity(t: Topology) -> ConnectivityReport:
    """
    Check both readings of "connected": a single sink component in the condensation of the
    measurement graph (a spanning tree rooted at the leader set), and a simple zero
    eigenvalue of L. Unweighted graphs get the commit-factor weights with c = 1 for the
    spectral check.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(t.nodes)
    graph.add_edges_from((edge.source, edge.target) for edge in t.edges)
    condensed = nx.condensation(graph)
    sinks = sum(1 for _, degree in condensed.out_degree() if degree == 0)

    weighted = t if t.is_weighted else default_weights(t.model_copy(update={
        "leader_ids": frozenset(node for node in t.nodes if not t.out_edges(node))
    }), 1.0)
    nullity = linalg.null_space(build_laplacian(weighted)).shape[1]

    rooted, simple = sinks == 1, nullity == 1
    failed = None
    if not rooted:
        failed = "rooted-spanning-tree"
    elif not simple:
        failed = "simple-zero-eigenvalue"
    return ConnectivityReport(
        connected=rooted and simple,
        rooted_spanning_tree=rooted,
        simple_zero_eigenvalue=simple,
        sink_components=sinks,
        failed=failed,
    )


def left_null_vector(L: LaplacianMatrix) -> np.ndarray:
    """
    The unique normalized left eigenvector of the zero eigenvalue of L.

    Args:
        L (LaplacianMatrix): Laplacian of a connected graph.

    Returns:
        np.ndarray: xi with xi^T L = 0 and sum(xi) = 1.

    Raises:
        DisconnectedGraphError: If the zero eigenvalue is not simple.
    """
    basis = linalg.null_space(L.T)
    if basis.shape[1] != 1:
        raise DisconnectedGraphError(
            f"zero eigenvalue of L has multiplicity {basis.shape[1]}; the graph is not connected"
        )
    xi = basis[:, 0] / basis[:, 0].sum()

    residual = float(np.abs(xi @ L).max()) if L.size else 0.0
    if residual >= NULL_VECTOR_RESIDUAL:
        logging.warning(f"Left null vector residual {residual:.3e} exceeds {NULL_VECTOR_RESIDUAL:.0e}")
    return xi


def gershgorin_bound(L: LaplacianMatrix) -> float:
    """Upper bound 2 * max_i L_ii on every real eigenvalue of L."""
    if L.size == 0:
        return 0.0
    return float(2.0 * np.diag(L).max())


def real_eigenvalues(M: np.ndarray) -> Spectrum:
    """
    All eigenvalues of a dense real matrix, flagging whether they are real.

    Imaginary parts below 1e-9 * ||M|| (Frobenius) count as zero. Complex spectra are
    reported, not rejected.
    """
    M = np.asarray(M, dtype=float)
    tolerance = IMAG_TOLERANCE * float(np.linalg.norm(M))
    values = np.sort_complex(linalg.eigvals(M)) if M.size else np.zeros(0, dtype=complex)
    all_real = bool(np.all(np.abs(values.imag) <= tolerance))
    if all_real:
        values = np.sort(values.real).astype(complex)
    return Spectrum(values=values, all_real=all_real, tolerance=tolerance)

"""
Stability Analysis Module

Analytic side of the skewless protocol: the system matrix A acting on z = (x, s, y),
the per-mode cubic whose roots make up the spectrum of A, the Jordan chains of the
eigenvalues 1 and 1 - p, the synchronized fixed point, the parameter conditions and
tau bounds, the closed-form Hurwitz test of the transformed cubic, and a report that
cross-checks the analytic verdict against the eigenvalues of A.

With w = lambda - 1 the per-mode cubic is

    g(lambda; nu) = w^3 + p w^2 + kappa1 nu w + p (kappa1 - kappa2) nu,

where nu runs over the eigenvalues of tau * L * R.

Dependencies:
    - numpy (including numpy.polynomial) for matrices and the cubic
    - scipy.linalg for eigenvalues, scipy.optimize for eigenvalue pairing
    - Logging for disagreements between analytic and spectral verdicts
"""
import logging
import math
import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg
from scipy.optimize import linear_sum_assignment
from config import EIGEN_ONE_RADIUS, JORDAN_RESIDUAL, MATCH_TOLERANCE, SCHUR_SLACK
from app.exceptions import ParameterConditionError, StabilityInputError
from app.topology import build_laplacian, connectivity, default_weights, gershgorin_bound, left_null_vector, real_eigenvalues
from models.models import (FixedPointPrediction, HermiteBiehlerDetails, JordanChain, Lemma1Result,
                           ParameterConditions, ProtocolParams, StabilityReport, SystemMatrix, Topology, Verdict)

# -----------------------------------
# System Matrix
# -----------------------------------
def _skews(r, n: int | None = None) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or (n is not None and r.shape[0] != n):
        raise StabilityInputError(f"expected {n} skews, got shape {r.shape}")
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise StabilityInputError("skews must be finite and positive")
    return r


def assemble_system_matrix(L: np.ndarray, r, params: ProtocolParams) -> SystemMatrix:
    """
    Build A = [[I, tau R, 0], [-kappa1 L, I, -kappa2 I], [-p L, 0, (1 - p) I]].

    Args:
        L (np.ndarray): n x n Laplacian.
        r: The n true skews (diagonal of R).
        params (ProtocolParams): Gains and poll interval.

    Returns:
        SystemMatrix: A with its blocks.

    Raises:
        StabilityInputError: If the dimensions do not agree.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if L.shape != (n, n):
        raise StabilityInputError(f"L must be square, got shape {L.shape}")
    r = _skews(r, n)

    I, Z = np.eye(n), np.zeros((n, n))
    A = np.block([
        [I, params.tau * np.diag(r), Z],
        [-params.kappa1 * L, I, -params.kappa2 * I],
        [-params.p * L, Z, (1.0 - params.p) * I],
    ])
    return SystemMatrix(matrix=A, n=n)


def mode_values(L: np.ndarray, r, params: ProtocolParams) -> np.ndarray:
    """Eigenvalues nu_l of tau * L * R."""
    L = np.asarray(L, dtype=float)
    r = _skews(r, L.shape[0])
    if L.size == 0:
        return np.zeros(0, dtype=complex)
    return linalg.eigvals(params.tau * L @ np.diag(r))


# -----------------------------------
# Per-mode Cubic
# -----------------------------------
def mode_polynomial(nu: complex, params: ProtocolParams) -> Polynomial:
    """The per-mode cubic in w = lambda - 1, coefficients in ascending order."""
    p, k1, dk = params.p, params.kappa1, params.delta_kappa
    return Polynomial([p * dk * nu, k1 * nu, p, 1.0])


def companion_roots(nu: complex, params: ProtocolParams) -> np.ndarray:
    """
    The three roots lambda of g(lambda; nu).

    Roots come from the companion matrix in the shifted variable w and are refined by
    Newton steps that are kept only when they reduce |g|.

    Args:
        nu (complex): Mode value, complex allowed.
        params (ProtocolParams): Gains.

    Returns:
        np.ndarray: Three complex roots in lambda.
    """
    poly = mode_polynomial(nu, params)
    slope = poly.deriv()
    roots = poly.roots().astype(complex)

    for idx, w in enumerate(roots):
        for _ in range(3):
            d = slope(w)
            if d == 0:
                break
            candidate = w - poly(w) / d
            if abs(poly(candidate)) >= abs(poly(w)):
                break
            w = candidate
        roots[idx] = w

    scale = float(np.abs(poly.coef).sum())
    residual = float(np.abs(poly(roots)).max()) / scale
    if residual >= 1e-9:
        logging.warning(f"Per-mode cubic residual {residual:.3e} for nu={nu}")
    return roots + 1.0


def lemma1_check(L: np.ndarray, r, params: ProtocolParams) -> Lemma1Result:
    """
    Check that the spectrum of A is the union of the per-mode cubic roots and count the
    eigenvalues equal to 1.

    The two multisets of 3n values are paired one to one by a minimum-cost assignment on
    their distances. A pair is accepted on the backward error of the mode root rho,
    sigma_min(A - rho I) / ||A||, which must stay within the matching tolerance. Inside
    near-multiple clusters eig(A) is ill conditioned and moves far more than that, so
    the paired distance is reported but does not decide the match.
    """
    A = assemble_system_matrix(L, r, params).matrix
    eigenvalues = linalg.eigvals(A)
    nus = mode_values(L, r, params)
    mode_roots = np.concatenate([companion_roots(nu, params) for nu in nus]) if nus.size else np.zeros(0, complex)

    cost = np.abs(eigenvalues[:, None] - mode_roots[None, :])
    rows, cols = linear_sum_assignment(cost)
    distance = float(cost[rows, cols].max()) if rows.size else 0.0

    residual = 0.0
    if mode_roots.size:
        scale = float(np.linalg.norm(A, 2))
        identity = np.eye(A.shape[0])
        residual = max(float(linalg.svdvals(A - rho * identity)[-1]) for rho in mode_roots) / scale

    multiplicity = int(np.count_nonzero(np.abs(eigenvalues - 1.0) < EIGEN_ONE_RADIUS))
    return Lemma1Result(
        multiplicity_of_one=multiplicity,
        eigenvalues=eigenvalues,
        mode_roots=mode_roots,
        factorization_residual=residual,
        pair_distance=distance,
        matches=residual <= MATCH_TOLERANCE,
    )


# -----------------------------------
# Jordan Chains and Fixed Point
# -----------------------------------
def jordan_chain(L: np.ndarray, r, params: ProtocolParams, xi: np.ndarray | None = None) -> JordanChain:
    """
    Right and left Jordan vectors for the eigenvalue 1 (chain of two) and 1 - p.

    Args:
        L (np.ndarray): Laplacian of a connected graph.
        r: True skews.
        params (ProtocolParams): Needs p > 0 and kappa1 != kappa2.
        xi (np.ndarray, optional): Normalized left null vector of L; computed when omitted.

    Returns:
        JordanChain: zeta1..3, eta1..3, gamma and xi.

    Raises:
        StabilityInputError: If p <= 0 or kappa1 == kappa2.
        DisconnectedGraphError: If L has a repeated zero eigenvalue.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    r = _skews(r, n)
    if params.p <= 0 or params.delta_kappa == 0:
        raise StabilityInputError("Jordan chains need p > 0 and kappa1 != kappa2")
    if xi is None:
        xi = left_null_vector(L)

    tau, p, k2 = params.tau, params.p, params.kappa2
    ones, zeros, r_inv = np.ones(n), np.zeros(n), 1.0 / r
    gamma = 1.0 / float(np.sum(xi * r_inv))

    return JordanChain(
        zeta1=np.concatenate([ones, zeros, zeros]),
        zeta2=np.concatenate([ones, r_inv / tau, zeros]),
        zeta3=np.concatenate([-tau * k2 / p**2 * ones, k2 / p * r_inv, r_inv]),
        eta1=gamma * np.concatenate([r_inv * xi, -tau * xi, tau * k2 * (1 / p + 1 / p**2) * xi]),
        eta2=gamma * tau * np.concatenate([zeros, xi, -k2 / p * xi]),
        eta3=gamma * np.concatenate([zeros, zeros, xi]),
        gamma=gamma,
        xi=np.asarray(xi, dtype=float),
    )


def jordan_residuals(A: np.ndarray, chain: JordanChain, p: float) -> dict[str, float]:
    """
    Infinity-norm residuals of the six defining relations and of biorthogonality.

    Keys: right1, right2, right3, left1, left2, left3, biorthogonality.
    """
    I = np.eye(A.shape[0])
    shifted = A - (1.0 - p) * I
    residuals = {
        "right1": (A - I) @ chain.zeta1,
        "right2": (A - I) @ chain.zeta2 - chain.zeta1,
        "right3": shifted @ chain.zeta3,
        "left2": chain.eta2 @ (A - I),
        "left1": chain.eta1 @ (A - I) - chain.eta2,
        "left3": chain.eta3 @ shifted,
    }
    out = {name: float(np.abs(vec).max()) for name, vec in residuals.items()}

    gram = np.array([[eta @ zeta for zeta in chain.right] for eta in chain.left])
    out["biorthogonality"] = float(np.abs(gram - np.eye(3)).max())

    worst = max(out.values())
    if worst >= JORDAN_RESIDUAL:
        logging.warning(f"Jordan chain residual {worst:.3e} exceeds {JORDAN_RESIDUAL:.0e}")
    return out


def predict_fixed_point(x0, s0, y0, xi, gamma: float, params: ProtocolParams, r) -> FixedPointPrediction:
    """
    Synchronized line x_i(t_k) = r_star * (t_k - t_0) + x_star, with t_0 the step-0 epoch.

    x_star = gamma * sum_i xi_i (x_i(0) / r_i + tau kappa2 / p^2 * y_i(0))
    r_star = gamma * sum_i xi_i (s_i(0) - kappa2 / p * y_i(0))
    """
    x0, s0, y0, xi = (np.asarray(v, dtype=float) for v in (x0, s0, y0, xi))
    r = _skews(r, xi.shape[0])
    tau, p, k2 = params.tau, params.p, params.kappa2

    x_star = gamma * float(np.sum(xi * (x0 / r + tau * k2 / p**2 * y0)))
    r_star = gamma * float(np.sum(xi * (s0 - k2 / p * y0)))
    return FixedPointPrediction(x_star=x_star, r_star=r_star)


# -----------------------------------
# Parameter Conditions and Bounds
# -----------------------------------
def nu_bound(params: ProtocolParams) -> float:
    """Largest admissible mode value p (kappa2 - p dk) / (kappa1 - p dk)^2; nan when undefined."""
    p, dk = params.p, params.delta_kappa
    denominator = (params.kappa1 - p * dk) ** 2
    if denominator == 0:
        return math.nan
    return p * (params.kappa2 - p * dk) / denominator


def check_parameter_conditions(params: ProtocolParams, mu_max: float, has_edges: bool = True) -> ParameterConditions:
    """
    Evaluate conditions (i)-(iii) for a graph whose L R has largest eigenvalue mu_max.

    Args:
        params (ProtocolParams): Gains and poll interval.
        mu_max (float): Largest eigenvalue of L R.
        has_edges (bool): False for edgeless graphs, where (iii) holds vacuously.

    Returns:
        ParameterConditions: The three flags, the nu bound and the tau bound.

    Raises:
        StabilityInputError: If mu_max <= 0 while edges are present.
    """
    p, dk = params.p, params.delta_kappa
    if has_edges and not mu_max > 0:
        raise StabilityInputError(f"largest eigenvalue of L R must be positive when edges exist, got {mu_max}")

    cond_i = 0 < p < 2
    cond_ii = p > 0 and 2 * params.kappa1 / (3 * p) > dk > 0
    bound = nu_bound(params)

    if not has_edges:
        return ParameterConditions(cond_i=cond_i, cond_ii=cond_ii, cond_iii=True, mu_max=0.0,
                                   nu_bound=bound, tau_bound=None)

    tau_bound = bound / mu_max if math.isfinite(bound) else None
    cond_iii = tau_bound is not None and tau_bound > 0 and params.tau < tau_bound
    return ParameterConditions(cond_i=cond_i, cond_ii=cond_ii, cond_iii=cond_iii, mu_max=mu_max,
                               nu_bound=bound, tau_bound=tau_bound)


def topology_free_tau_bound(params: ProtocolParams, alpha_max: float, r_max_hat: float) -> float:
    """
    Poll-interval bound that holds for every connected graph with real Laplacian spectrum.

    Args:
        params (ProtocolParams): Gains.
        alpha_max (float): Largest diagonal entry of L.
        r_max_hat (float): Operator-supplied upper bound on the skews.

    Returns:
        float: p (kappa2 - dk p) / (2 alpha_max r_max_hat (kappa1 - dk p)^2), in seconds.

    Raises:
        ParameterConditionError: If the numerator or denominator is not positive.
    """
    p, dk = params.p, params.delta_kappa
    numerator = p * (params.kappa2 - dk * p)
    denominator = 2.0 * alpha_max * r_max_hat * (params.kappa1 - dk * p) ** 2
    if denominator <= 0:
        raise ParameterConditionError(f"tau bound denominator is {denominator:.6g}; condition (ii) does not hold")
    if numerator <= 0:
        raise ParameterConditionError(f"kappa2 - dk p = {params.kappa2 - dk * p:.6g} is not positive")
    return numerator / denominator


def _transformed_coefficients(nu: float, params: ProtocolParams) -> tuple[float, float, float, float]:
    p, k1 = params.p, params.kappa1
    b = p * params.delta_kappa
    return (
        b * nu,
        nu * (2 * k1 - 3 * b),
        4 * p - nu * (4 * k1 - 3 * b),
        8 - 4 * p + nu * (2 * k1 - b),
    )


def hermite_biehler_schur_test(nu: float, params: ProtocolParams) -> bool:
    """
    Closed-form Schur test of g(lambda; nu) for a real mode nu > 0.

    After lambda = (s + 1) / (s - 1) the cubic is Hurwitz iff 2 kappa1 / (dk p) - 3 > 0 and
    the real-part zero lies below the imaginary-part zero, which reduces to nu < nu_bound.
    No roots are computed.

    Raises:
        StabilityInputError: If nu is not positive.
    """
    if not nu > 0:
        raise StabilityInputError(f"the closed-form test needs nu > 0, got {nu}")
    p, dk = params.p, params.delta_kappa
    if not 0 < p < 2 or dk <= 0:
        return False
    if 2 * params.kappa1 / (dk * p) - 3 <= 0:
        return False
    return nu < nu_bound(params)


def hermite_biehler_details(nu: float, params: ProtocolParams) -> HermiteBiehlerDetails:
    """Coefficients, interlacing frequencies and verdict of the transformed cubic."""
    schur = hermite_biehler_schur_test(nu, params)
    a3, a2, a1, a0 = _transformed_coefficients(nu, params)
    dk_p = params.delta_kappa * params.p
    leading = 2 * params.kappa1 / dk_p - 3 if dk_p != 0 else None

    omega_real = math.sqrt(a0 / a2) if a2 != 0 and a0 / a2 > 0 else None
    omega_imag = math.sqrt(a1 / a3) if a3 != 0 and a1 / a3 > 0 else None
    interlaced = omega_real is not None and omega_imag is not None and 0 < omega_real < omega_imag
    return HermiteBiehlerDetails(
        nu=nu,
        coefficients=[a3, a2, a1, a0],
        leading_condition=leading,
        omega_real=omega_real,
        omega_imag=omega_imag,
        interlaced=interlaced,
        schur=schur,
    )


def schur_by_roots(nu: complex, params: ProtocolParams) -> bool:
    """Root-based Schur check of one per-mode cubic."""
    return bool(np.all(np.abs(companion_roots(nu, params)) < 1.0))


# -----------------------------------
# Full Report
# -----------------------------------
def full_stability_report(topology: Topology, r, params: ProtocolParams) -> StabilityReport:
    """
    Run every check on one configuration and reconcile the verdicts.

    The spectral verdict from eig(A) is authoritative. The analytic verdict from the
    parameter conditions is computed when L and L R have real spectra; disagreement is
    logged and recorded in the diagnostics. Unweighted graphs get the commit-factor weights.

    Args:
        topology (Topology): Measurement graph.
        r: True skews, one per node.
        params (ProtocolParams): Gains, poll interval and commit factor.

    Returns:
        StabilityReport: Verdicts, margins, bounds and diagnostics.
    """
    if not topology.is_weighted:
        topology = default_weights(topology, params.c)
    L = build_laplacian(topology)
    r = _skews(r, topology.n)
    diagnostics: list[str] = []

    conn = connectivity(topology)
    lemma = lemma1_check(L, r, params)
    if not lemma.matches:
        diagnostics.append(f"per-mode root off the spectrum of A, backward error {lemma.factorization_residual:.3e}")

    away = lemma.eigenvalues[np.abs(lemma.eigenvalues - 1.0) >= EIGEN_ONE_RADIUS]
    margin = float(np.abs(away).max()) if away.size else 0.0
    spectral = Verdict.STABLE if lemma.multiplicity_of_one == 2 and margin < 1.0 else Verdict.UNSTABLE
    if abs(margin - 1.0) <= SCHUR_SLACK:
        diagnostics.append(f"spectral margin {margin:.12f} lies within {SCHUR_SLACK:.0e} of the unit circle")

    spectrum_L = real_eigenvalues(L)
    spectrum_LR = real_eigenvalues(L @ np.diag(r))
    all_real = spectrum_L.all_real and spectrum_LR.all_real
    mu_max = spectrum_LR.max_real
    has_edges = len(topology.edges) > 0

    alpha_max = gershgorin_bound(L) / 2.0
    tau_free = None
    if has_edges:
        try:
            tau_free = topology_free_tau_bound(params, alpha_max, float(r.max()))
        except ParameterConditionError as err:
            diagnostics.append(f"topology-free bound unavailable: {err.detail}")

    report = dict(
        connected=conn.connected,
        connectivity=conn,
        multiplicity_of_one=lemma.multiplicity_of_one,
        spectral_margin=margin,
        stability_slack=1.0 - margin,
        all_real_spectrum=all_real,
        mu_max=mu_max,
        tau=params.tau,
        tau_bound_topology_free=tau_free,
        spectral_verdict=spectral,
        verdict=spectral,
        diagnostics=diagnostics,
    )

    if not all_real:
        logging.info("Laplacian spectrum is complex; the parameter conditions do not apply")
        diagnostics.append("complex Laplacian spectrum: parameter conditions not applicable")
        report["verdict"] = Verdict.NOT_COVERED
        return StabilityReport(**report)

    conditions = check_parameter_conditions(params, mu_max, has_edges)
    analytic = Verdict.STABLE if conn.connected and conditions.all_hold else Verdict.UNSTABLE
    agree = analytic == spectral
    if not agree:
        logging.warning(f"Analytic verdict {analytic.value} disagrees with spectral verdict {spectral.value} "
                        f"(margin {margin:.9f})")
        diagnostics.append(f"analytic verdict {analytic.value} disagrees with spectral verdict {spectral.value}")

    nu_max = params.tau * mu_max
    report.update(
        cond_i=conditions.cond_i,
        cond_ii=conditions.cond_ii,
        cond_iii=conditions.cond_iii,
        tau_bound=conditions.tau_bound,
        analytic_verdict=analytic,
        verdicts_agree=agree,
        hermite_biehler=hermite_biehler_details(nu_max, params) if nu_max > 0 else None,
    )
    logging.info(f"Stability verdict {spectral.value}: margin={margin:.6f}, mu_max={mu_max:.6f}")
    return StabilityReport(**report)

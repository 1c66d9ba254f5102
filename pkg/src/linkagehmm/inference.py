"""Maximum-likelihood fits and CLT-based uncertainty for both models.

Fits run multi-start quasi-Newton (L-BFGS-B) in unconstrained coordinates
(log-ratio q, logit-survival r) with the package's own central-difference
gradients.  The linkage fit always evaluates the marker-independence
boundary r = INFINITY via the closed-form admixture fit as candidate 0, so
the nested-model inequality ell_linkage >= ell_admixture holds by
construction and a boundary win reports r_hat = INFINITY exactly.

The covariance of the MLE comes from the observed information: J is the
negated numerical Hessian of the normalized log-likelihood at the optimum
and the covariance is J^{-1} / M_total, reported both in free coordinates
and chain-rule-transformed to (q, r) coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NumericError,
    StructuralError,
)
from .likelihood import (
    LoglikEvaluator,
    numerical_gradient,
    numerical_hessian,
)
from .model import (
    EMISSION_STANDARD,
    INFINITY,
    AlleleFrequencySet,
    GeneticMap,
    GenotypeData,
    ParameterPoint,
)
from .reparam import (
    free_to_rate,
    free_to_simplex,
    pack,
    project_simplex,
    rate_to_free,
    simplex_to_free,
    theta_jacobian,
)

ADMIXTURE = "admixture"
LINKAGE = "linkage"

METHOD_QUASI_NEWTON = "quasi-newton"
METHOD_PROJECTED = "projected-gradient"

#: r grid of the deterministic starts; random starts draw log-uniform rates.
R_START_GRID = (0.1, 1.0, 10.0, 100.0)

GRAD_TOL = 1e-6
MAX_ITER = 500
BOUNDARY_EPS = 1e-4
FLAT_SPREAD = 1e-12

#: rate at which the information in the r direction is probed when the MLE
#: sits on the r = INFINITY boundary (the surface is flat there, so the
#: pseudo-inverse path reports zero information for r).
R_EVAL_AT_BOUNDARY = 40.0


@dataclass(frozen=True)
class ModelFit:
    """Result of one multi-start maximum-likelihood fit."""

    theta_hat: ParameterPoint
    ell_hat: float
    model: str
    n_starts: int
    converged: bool
    start_ells: tuple[float, ...]
    start_thetas: tuple[ParameterPoint, ...]
    M_total: int
    mode: str
    boundary: bool
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class CovarianceEstimate:
    """Asymptotic covariance of the MLE, J^{-1} / M_total.

    ``matrix`` lives in (q_1..q_K[, r]) coordinates (singular along the
    simplex constraint by construction), ``free_matrix`` in the free
    coordinates the Hessian was taken in.  ``reliable`` is False when the
    MLE sits on the parameter boundary or the information matrix had to be
    pseudo-inverted.
    """

    matrix: np.ndarray
    free_matrix: np.ndarray
    names: tuple[str, ...]
    free_names: tuple[str, ...]
    M_total: int
    parameterization: str
    boundary: bool
    reliable: bool
    warnings: tuple[str, ...] = ()

    @property
    def stderrs(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


@dataclass(frozen=True)
class PopulationFit:
    """Joint fit of N individuals sharing one recombination rate.

    N*(K-1) + 1 free parameters: one ancestry vector per individual plus
    the shared rate.  ``ell`` is the total log-likelihood divided by the
    pooled marker count.
    """

    q_hats: tuple[np.ndarray, ...]
    r_hat: float
    ell: float
    n_individuals: int
    M_total: int
    converged: bool
    boundary: bool
    n_outer: int

    @property
    def K(self) -> int:
        return self.q_hats[0].size

    @property
    def n_parameters(self) -> int:
        return self.n_individuals * (self.K - 1) + 1


def _check_method(method: str) -> str:
    if method not in (METHOD_QUASI_NEWTON, METHOD_PROJECTED):
        raise InvalidParameterError(f"unknown optimizer method {method!r}")
    return method


def _maximize_lbfgs(fun, z0, start_index):
    try:
        res = minimize(
            lambda z: -fun(z),
            np.asarray(z0, dtype=float),
            method="L-BFGS-B",
            jac=lambda z: -numerical_gradient(fun, z),
            options={"maxiter": MAX_ITER, "ftol": 1e-11, "gtol": 1e-7},
        )
    except NumericError as exc:
        raise NumericError(f"start {start_index}: {exc}") from exc
    if not np.isfinite(res.fun):
        raise NumericError(f"start {start_index}: optimizer reached a non-finite value")
    return np.asarray(res.x, dtype=float), float(-res.fun)


def _maximize_projected(fun, theta0, project, start_index,
                        max_iter=4000, tol=1e-11):
    """Projected gradient ascent with Armijo backtracking.

    ``fun`` must be defined on a neighbourhood of the feasible set (it is
    evaluated at projected points only).  Kept as an independent fallback
    route for cross-checking the quasi-Newton path.
    """
    theta = project(np.asarray(theta0, dtype=float))
    f_cur = fun(theta)
    if not np.isfinite(f_cur):
        raise NumericError(f"start {start_index}: non-finite objective at start")
    stall = 0
    for _ in range(max_iter):
        g = numerical_gradient(lambda t: fun(project(t)), theta)
        alpha = 1.0
        improved = False
        while alpha > 1e-14:
            cand = project(theta + alpha * g)
            f_cand = fun(cand)
            if np.isfinite(f_cand) and f_cand > f_cur + 1e-4 * alpha * float(g @ g):
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
        if f_cand - f_cur < tol:
            stall += 1
            if stall >= 2:
                theta, f_cur = cand, f_cand
                break
        else:
            stall = 0
        theta, f_cur = cand, f_cand
    return theta, float(f_cur)


def _admixture_q_starts(K: int, n_starts: int, rng) -> list[np.ndarray]:
    starts = [np.full(K, 1.0 / K)]
    for _ in range(max(0, n_starts - len(R_START_GRID))):
        starts.append(rng.dirichlet(np.ones(K)))
    return starts


def _linkage_starts(K: int, n_starts: int, rng) -> list[tuple[np.ndarray, float]]:
    uniform = np.full(K, 1.0 / K)
    starts = [(uniform, r0) for r0 in R_START_GRID]
    while len(starts) < n_starts:
        starts.append((rng.dirichlet(np.ones(K)), 10.0 ** rng.uniform(-2.0, 2.0)))
    return starts[:n_starts]


def _q_boundary(q: np.ndarray) -> bool:
    return bool(q.min() < BOUNDARY_EPS or q.max() > 1.0 - BOUNDARY_EPS)


def fit_admixture(data: GenotypeData, freqs: AlleleFrequencySet,
                  mode: str = EMISSION_STANDARD, n_starts: int = 8,
                  seed: int = 0,
                  method: str = METHOD_QUASI_NEWTON) -> ModelFit:
    """Maximize the marker-independent likelihood over the ancestry simplex."""
    _check_method(method)
    ev = LoglikEvaluator(data, freqs, None, mode)
    if ev.observed == 0:
        raise InvalidInputError("every marker is missing")
    if ev.K < 2:
        raise InvalidInputError("need at least two ancestral populations")
    notes = []
    if freqs.spread() < FLAT_SPREAD:
        notes.append(
            "flat likelihood: frequencies are identical across populations, "
            "every ancestry vector is equally likely"
        )

    def objective(y):
        return ev.admixture_ell(free_to_simplex(y))

    rng = np.random.default_rng(seed)
    ells, thetas = [], []
    for i, q0 in enumerate(_admixture_q_starts(ev.K, n_starts, rng)):
        if method == METHOD_QUASI_NEWTON:
            y_hat, ell = _maximize_lbfgs(objective, simplex_to_free(q0), i)
            q_hat = free_to_simplex(y_hat)
        else:
            q_hat, ell = _maximize_projected(
                lambda q: ev.admixture_ell(q / q.sum()), q0, project_simplex, i
            )
        ells.append(ell)
        thetas.append(ParameterPoint(q_hat, INFINITY))
    best = int(np.argmax(ells))
    q_best = thetas[best].q
    grad = numerical_gradient(objective, simplex_to_free(q_best))
    return ModelFit(
        theta_hat=thetas[best],
        ell_hat=ells[best],
        model=ADMIXTURE,
        n_starts=len(ells),
        converged=bool(np.linalg.norm(grad) < GRAD_TOL),
        start_ells=tuple(ells),
        start_thetas=tuple(thetas),
        M_total=ev.M_total,
        mode=mode,
        boundary=_q_boundary(q_best),
        warnings=tuple(notes),
    )


def fit_linkage(data: GenotypeData, freqs: AlleleFrequencySet, gmap: GeneticMap,
                mode: str = EMISSION_STANDARD, n_starts: int = 8, seed: int = 0,
                method: str = METHOD_QUASI_NEWTON,
                null_fit: ModelFit | None = None) -> ModelFit:
    """Maximize the linkage likelihood over simplex x [0, INFINITY].

    Candidate 0 is always the admixture fit (the r = INFINITY boundary);
    an interior start must strictly beat it to yield a finite r_hat.
    """
    _check_method(method)
    ev = LoglikEvaluator(data, freqs, gmap, mode)
    if ev.observed == 0:
        raise InvalidInputError("every marker is missing")
    if null_fit is None:
        null_fit = fit_admixture(data, freqs, mode, n_starts, seed, method)
    elif null_fit.M_total != ev.M_total or null_fit.mode != mode:
        raise StructuralError("null fit does not match this dataset")

    def objective(z):
        return ev.linkage_ell(free_to_simplex(z[:-1]), free_to_rate(z[-1]))

    rng = np.random.default_rng(seed)
    ells = [null_fit.ell_hat]
    thetas = [ParameterPoint(null_fit.theta_hat.q, INFINITY)]
    for i, (q0, r0) in enumerate(_linkage_starts(ev.K, n_starts, rng), start=1):
        if method == METHOD_QUASI_NEWTON:
            z_hat, ell = _maximize_lbfgs(objective, pack(q0, r0), i)
            q_hat, r_hat = free_to_simplex(z_hat[:-1]), free_to_rate(z_hat[-1])
        else:
            def proj(t):
                return np.append(project_simplex(t[:-1]), min(max(t[-1], 0.0), 1.0))

            def obj_theta(t):
                qn = t[:-1] / t[:-1].sum()
                s = t[-1]
                r = INFINITY if s <= 0.0 else -math.log(s) if s < 1.0 else 0.0
                return ev.linkage_ell(qn, r)

            t_hat, ell = _maximize_projected(
                obj_theta, np.append(q0, math.exp(-r0)), proj, i
            )
            q_hat = project_simplex(t_hat[:-1])
            s = t_hat[-1]
            r_hat = INFINITY if s <= 0.0 else (-math.log(s) if s < 1.0 else 0.0)
        ells.append(ell)
        thetas.append(ParameterPoint(q_hat, r_hat))

    best = int(np.argmax(ells))
    theta_best = thetas[best]
    if best == 0:
        converged = null_fit.converged
    else:
        grad = numerical_gradient(objective, pack(theta_best.q, theta_best.r))
        converged = bool(np.linalg.norm(grad) < GRAD_TOL)
    return ModelFit(
        theta_hat=theta_best,
        ell_hat=ells[best],
        model=LINKAGE,
        n_starts=len(ells),
        converged=converged,
        start_ells=tuple(ells),
        start_thetas=tuple(thetas),
        M_total=ev.M_total,
        mode=mode,
        boundary=theta_best.is_admixture or _q_boundary(theta_best.q),
        warnings=null_fit.warnings,
    )


def covariance_from_objective(objective, z_hat, M_total: int):
    """Covariance J^{-1} / M_total from the negated Hessian of a normalized
    log-likelihood given in free coordinates.  Returns (cov, warnings)."""
    J = -numerical_hessian(objective, z_hat)
    eigs = np.linalg.eigvalsh(J)
    scale = max(float(np.abs(eigs).max()), 1e-300)
    notes = []
    if float(eigs.min()) <= 1e-10 * scale:
        notes.append(
            "information matrix singular or indefinite; pseudo-inverse used"
        )
        cov = np.linalg.pinv(J, rcond=1e-10) / M_total
    else:
        cov = np.linalg.inv(J) / M_total
    return 0.5 * (cov + cov.T), notes


def covariance_mle(fit: ModelFit, data: GenotypeData, freqs: AlleleFrequencySet,
                   gmap: GeneticMap | None = None) -> CovarianceEstimate:
    """Asymptotic covariance of a fitted model's MLE.

    Needs the fit to be converged and interior; a boundary MLE (any q_hat
    component within 1e-4 of 0/1, or r_hat = INFINITY) still produces an
    estimate but it is flagged unreliable.
    """
    ev = LoglikEvaluator(data, freqs, gmap if fit.model == LINKAGE else None,
                         fit.mode)
    if ev.M_total != fit.M_total:
        raise StructuralError("fit does not match this dataset")
    q_hat = fit.theta_hat.q
    notes = []
    if not fit.converged:
        notes.append("fit did not converge; covariance may be meaningless")

    if fit.model == LINKAGE:
        boundary = fit.theta_hat.is_admixture or _q_boundary(q_hat)
        r_eval = fit.theta_hat.r
        if not np.isfinite(r_eval):
            r_eval = R_EVAL_AT_BOUNDARY
            notes.append(
                "r_hat is INFINITY; information probed at the boundary "
                f"(r = {R_EVAL_AT_BOUNDARY:g}), estimate unreliable"
            )
        z_hat = pack(q_hat, r_eval)

        def objective(z):
            return ev.linkage_ell(free_to_simplex(z[:-1]), free_to_rate(z[-1]))

        free_names = tuple(f"y{k + 1}" for k in range(ev.K - 1)) + ("t",)
        names = tuple(f"q{k + 1}" for k in range(ev.K)) + ("r",)
        G = theta_jacobian(free_to_simplex(z_hat[:-1]), free_to_rate(z_hat[-1]))
        note = ("free coordinates: log-ratio q (last component reference) "
                "and logit of exp(-r); matrix is chain-rule transformed to "
                "(q, r)")
    else:
        boundary = _q_boundary(q_hat)
        z_hat = pack(q_hat)

        def objective(y):
            return ev.admixture_ell(free_to_simplex(y))

        free_names = tuple(f"y{k + 1}" for k in range(ev.K - 1))
        names = tuple(f"q{k + 1}" for k in range(ev.K))
        G = theta_jacobian(free_to_simplex(z_hat))
        note = ("free coordinates: log-ratio q (last component reference); "
                "matrix is chain-rule transformed to q")

    if boundary:
        notes.append(
            "MLE on the parameter boundary; the interior CLT does not "
            "apply, estimate flagged unreliable"
        )
    cov_free, extra = covariance_from_objective(objective, z_hat, ev.M_total)
    notes.extend(extra)
    matrix = G @ cov_free @ G.T
    matrix = 0.5 * (matrix + matrix.T)
    return CovarianceEstimate(
        matrix=matrix,
        free_matrix=cov_free,
        names=names,
        free_names=free_names,
        M_total=ev.M_total,
        parameterization=note,
        boundary=boundary,
        reliable=not boundary and not extra and fit.converged,
        warnings=tuple(notes),
    )


def _golden_max(g, lo: float, hi: float, tol: float = 1e-10):
    """Golden-section maximization of g on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    x = 0.5 * (a + b)
    return x, g(x)


POP_R_BRACKET = (1e-3, 1e4)


def fit_population(individuals, freqs: AlleleFrequencySet, gmap: GeneticMap,
                   mode: str = EMISSION_STANDARD, n_starts: int = 8,
                   seed: int = 0, max_outer: int = 50, tol: float = 1e-9,
                   null_fits: tuple[ModelFit, ...] | None = None) -> PopulationFit:
    """Joint MLE over N ancestry vectors and one shared rate.

    Block-coordinate scheme: per-individual ancestry updates at fixed rate
    (warm-started quasi-Newton), then a golden-section rate update over
    log r, until the joint normalized log-likelihood improves by less than
    ``tol``; a final joint quasi-Newton polish tightens the optimum.  The
    all-admixture solution is the r = INFINITY boundary candidate.
    """
    individuals = tuple(individuals)
    if len(individuals) < 1:
        raise InvalidInputError("need at least one individual")
    evs = [LoglikEvaluator(ind, freqs, gmap, mode) for ind in individuals]
    if null_fits is None:
        null_fits = tuple(
            fit_admixture(ind, freqs, mode, n_starts, seed) for ind in individuals
        )
    elif len(null_fits) != len(individuals):
        raise StructuralError("one null fit per individual required")
    n = len(individuals)
    m_pop = sum(ev.M_total for ev in evs)
    null_total = sum(nf.ell_hat * nf.M_total for nf in null_fits)

    q_list = [nf.theta_hat.q.copy() for nf in null_fits]

    def joint_total(qs, r):
        return sum(ev.linkage_total(q, r) for ev, q in zip(evs, qs))

    r = max(R_START_GRID, key=lambda r0: joint_total(q_list, r0))
    prev = joint_total(q_list, r)
    n_outer = 0
    for n_outer in range(1, max_outer + 1):
        for i, ev in enumerate(evs):
            y_hat, _ = _maximize_lbfgs(
                lambda y, ev=ev: ev.linkage_ell(free_to_simplex(y), r),
                simplex_to_free(q_list[i]), i,
            )
            q_list[i] = free_to_simplex(y_hat)
        lo, hi = POP_R_BRACKET
        u, _ = _golden_max(lambda u: joint_total(q_list, math.exp(u)),
                           math.log(lo), math.log(hi))
        r = math.exp(u)
        cur = joint_total(q_list, r)
        if (cur - prev) / m_pop < tol:
            prev = cur
            break
        prev = cur

    # joint polish over all free coordinates at once
    K = evs[0].K
    z0 = np.concatenate([simplex_to_free(q) for q in q_list] + [[rate_to_free(r)]])

    def joint_objective(z):
        qs = [free_to_simplex(z[i * (K - 1):(i + 1) * (K - 1)]) for i in range(n)]
        return joint_total(qs, free_to_rate(z[-1])) / m_pop

    z_hat, ell_polish = _maximize_lbfgs(joint_objective, z0, -1)
    alt_total = ell_polish * m_pop
    if alt_total >= prev:
        q_list = [free_to_simplex(z_hat[i * (K - 1):(i + 1) * (K - 1)])
                  for i in range(n)]
        r = free_to_rate(z_hat[-1])
    else:
        alt_total = prev

    if null_total >= alt_total:
        return PopulationFit(
            q_hats=tuple(nf.theta_hat.q for nf in null_fits),
            r_hat=INFINITY,
            ell=null_total / m_pop,
            n_individuals=n,
            M_total=m_pop,
            converged=all(nf.converged for nf in null_fits),
            boundary=True,
            n_outer=n_outer,
        )
    grad = numerical_gradient(joint_objective, z_hat)
    return PopulationFit(
        q_hats=tuple(q_list),
        r_hat=r,
        ell=alt_total / m_pop,
        n_individuals=n,
        M_total=m_pop,
        converged=bool(np.linalg.norm(grad) < GRAD_TOL),
        boundary=any(_q_boundary(q) for q in q_list),
        n_outer=n_outer,
    )

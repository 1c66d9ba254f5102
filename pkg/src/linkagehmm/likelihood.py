"""Normalized log-likelihood of the linkage HMM and its admixture limit.

The forward recursion exploits the rank-one structure of the transition
kernel: with the filtered distribution f normalized to sum to 1, one step
with survival probability a = exp(-d*r) is simply a*f + (1-a)*q.  Each step
records the log normalizer

    D_{c,m} = log P(X_{c,m} = x_{c,m} | x of earlier markers on c),

and the normalized log-likelihood is the sum of all D terms divided by the
total marker count.  Phased-diploid data contributes two independent tracks
per chromosome that share (q, r); the normalizer still counts markers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericError, SizeGuardError
from .model import (
    EMISSION_PAPER_LITERAL,
    EMISSION_STANDARD,
    INFINITY,
    MISSING,
    AlleleFrequencySet,
    GeneticMap,
    GenotypeData,
    ParameterPoint,
    check_layout,
    emission_vector,
    transition_matrix,
    validate_emission_mode,
)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def decorator(func):
            return func

        return decorator


@njit(cache=True)
def _scan_track(x, p, q, surv, literal):  # pragma: no cover - compiled
    """Scaled forward pass over one haplotype track of one chromosome.

    x:    (M,) int8 alleles, -1 for missing
    p:    (M, K) allele frequencies
    q:    (K,) ancestry proportions
    surv: (M,) survival probabilities exp(-d_m * r); entry 0 is ignored
    Returns the (M,) vector of per-marker log normalizers.
    """
    m_count = x.shape[0]
    k_count = q.shape[0]
    d_terms = np.empty(m_count)
    f = np.empty(k_count)

    total = 0.0
    for k in range(k_count):
        pe = p[0, k]
        if literal:
            pe *= q[k]
        if x[0] == 1:
            e = pe
        elif x[0] == 0:
            e = 1.0 - pe
        else:
            e = 1.0
        f[k] = q[k] * e
        total += f[k]
    d_terms[0] = np.log(total)
    for k in range(k_count):
        f[k] /= total

    for m in range(1, m_count):
        a = surv[m]
        total = 0.0
        for k in range(k_count):
            pred = a * f[k] + (1.0 - a) * q[k]
            pe = p[m, k]
            if literal:
                pe *= q[k]
            if x[m] == 1:
                e = pe
            elif x[m] == 0:
                e = 1.0 - pe
            else:
                e = 1.0
            f[k] = pred * e
            total += f[k]
        d_terms[m] = np.log(total)
        for k in range(k_count):
            f[k] /= total
    return d_terms


@dataclass(frozen=True)
class LikelihoodResult:
    """Normalized log-likelihood with its per-marker decomposition.

    ``per_marker[i]`` is the conditional log-probability of marker i given
    the earlier markers of its chromosome (both tracks summed for diploid
    data), in (chromosome, marker) order; ``ell`` is their sum divided by
    M_total.
    """

    ell: float
    per_marker: np.ndarray
    M_total: int


class LoglikEvaluator:
    """Precomputed views of one dataset for repeated likelihood evaluation.

    Construction checks the layout once; the per-call methods then avoid
    all validation so optimizers can hammer them.
    """

    def __init__(self, data: GenotypeData, freqs: AlleleFrequencySet,
                 gmap: GeneticMap | None = None,
                 mode: str = EMISSION_STANDARD):
        validate_emission_mode(mode)
        check_layout(data, freqs, gmap)
        self.literal = mode == EMISSION_PAPER_LITERAL
        self.mode = mode
        self.K = freqs.K
        self.M_total = data.M_total
        self.n_tracks = data.n_tracks
        self.observed = data.observed_count()
        self.tracks = data.tracks
        self.p_by_chrom = tuple(np.ascontiguousarray(p) for p in freqs.freqs)
        self.d_by_chrom = gmap.distances if gmap is not None else None
        if self.M_total == 0:
            raise InvalidInputError("no markers")
        # flattened per-marker counts of 0/1 observations for the closed form
        self._n1 = np.concatenate([(x == 1).sum(axis=0) for x in self.tracks]).astype(float)
        self._n0 = np.concatenate([(x == 0).sum(axis=0) for x in self.tracks]).astype(float)
        self._P = np.vstack(self.p_by_chrom)

    def _surv(self, d: np.ndarray, r: float) -> np.ndarray:
        if r == INFINITY:
            return np.zeros_like(d)
        return np.exp(-d * r)

    def linkage_d_terms(self, q: np.ndarray, r: float) -> np.ndarray:
        """Per-marker log normalizers, tracks summed, (c, m) order."""
        if self.d_by_chrom is None:
            raise InvalidInputError("linkage likelihood needs a genetic map")
        parts = []
        for x2d, p, d in zip(self.tracks, self.p_by_chrom, self.d_by_chrom):
            surv = self._surv(d, r)
            acc = _scan_track(x2d[0], p, q, surv, self.literal)
            for t in range(1, x2d.shape[0]):
                acc = acc + _scan_track(x2d[t], p, q, surv, self.literal)
            parts.append(acc)
        return np.concatenate(parts)

    def linkage_total(self, q: np.ndarray, r: float) -> float:
        """Unnormalized log-likelihood (sum of all D terms)."""
        if self.d_by_chrom is None:
            raise InvalidInputError("linkage likelihood needs a genetic map")
        total = 0.0
        for x2d, p, d in zip(self.tracks, self.p_by_chrom, self.d_by_chrom):
            surv = self._surv(d, r)
            for t in range(x2d.shape[0]):
                total += _scan_track(x2d[t], p, q, surv, self.literal).sum()
        return total

    def linkage_ell(self, q: np.ndarray, r: float) -> float:
        return self.linkage_total(q, r) / self.M_total

    def _marker_success(self, q: np.ndarray) -> np.ndarray:
        w = q * q if self.literal else q
        return self._P @ w

    def admixture_d_terms(self, q: np.ndarray) -> np.ndarray:
        pi = self._marker_success(q)
        return self._n1 * np.log(pi) + self._n0 * np.log1p(-pi)

    def admixture_total(self, q: np.ndarray) -> float:
        return float(self.admixture_d_terms(q).sum())

    def admixture_ell(self, q: np.ndarray) -> float:
        return self.admixture_total(q) / self.M_total


def forward_loglik(data: GenotypeData, freqs: AlleleFrequencySet,
                   gmap: GeneticMap, theta: ParameterPoint,
                   mode: str = EMISSION_STANDARD) -> LikelihoodResult:
    """Normalized log-likelihood of the linkage HMM via the scaled forward
    recursion, together with the per-marker conditional log-probabilities."""
    ev = LoglikEvaluator(data, freqs, gmap, mode)
    d_terms = ev.linkage_d_terms(theta.q, theta.r)
    return LikelihoodResult(float(d_terms.sum()) / ev.M_total, d_terms, ev.M_total)


def admixture_loglik(data: GenotypeData, freqs: AlleleFrequencySet, q,
                     mode: str = EMISSION_STANDARD) -> LikelihoodResult:
    """Closed-form normalized log-likelihood of the marker-independent
    (r = INFINITY) model: each marker is Bernoulli(<q, p_m>)."""
    theta = ParameterPoint(q, INFINITY)
    ev = LoglikEvaluator(data, freqs, None, mode)
    d_terms = ev.admixture_d_terms(theta.q)
    return LikelihoodResult(float(d_terms.sum()) / ev.M_total, d_terms, ev.M_total)


BRUTE_FORCE_MAX_MARKERS = 12
BRUTE_FORCE_MAX_K = 3


def brute_force_loglik(data: GenotypeData, freqs: AlleleFrequencySet,
                       gmap: GeneticMap, theta: ParameterPoint,
                       mode: str = EMISSION_STANDARD) -> LikelihoodResult:
    """Exact marginal likelihood by enumerating every hidden state path.

    Test oracle only; refuses instances beyond M_total <= 12, K <= 3.  The
    per-marker terms come from enumerated prefix marginals, so nothing here
    shares code with the forward recursion.
    """
    validate_emission_mode(mode)
    check_layout(data, freqs, gmap)
    K = freqs.K
    if data.M_total > BRUTE_FORCE_MAX_MARKERS or K > BRUTE_FORCE_MAX_K:
        raise SizeGuardError(
            f"enumeration oracle limited to M_total <= {BRUTE_FORCE_MAX_MARKERS} "
            f"and K <= {BRUTE_FORCE_MAX_K}"
        )
    if data.M_total == 0:
        raise InvalidInputError("no markers")

    per_marker = []
    total = 0.0
    for x2d, p, d in zip(data.tracks, freqs.freqs, gmap.distances):
        M = x2d.shape[1]
        chrom_terms = np.zeros(M)
        for t in range(x2d.shape[0]):
            E = np.vstack([
                emission_vector(int(x2d[t, m]), p[m], theta.q, mode)
                for m in range(M)
            ])
            T = [None] + [transition_matrix(theta.q, theta.r, d[m]) for m in range(1, M)]
            prev_log = 0.0
            for m_stop in range(1, M + 1):
                paths = np.array(
                    list(itertools.product(range(K), repeat=m_stop)), dtype=np.intp
                ).reshape(-1, m_stop)
                prob = theta.q[paths[:, 0]] * E[0][paths[:, 0]]
                for j in range(1, m_stop):
                    prob = prob * T[j][paths[:, j - 1], paths[:, j]] * E[j][paths[:, j]]
                log_l = float(np.log(prob.sum()))
                chrom_terms[m_stop - 1] += log_l - prev_log
                prev_log = log_l
            total += prev_log
        per_marker.append(chrom_terms)
    per_marker = np.concatenate(per_marker)
    return LikelihoodResult(total / data.M_total, per_marker, data.M_total)


GRAD_STEP = 1e-5


def _step(x_i: float) -> float:
    return max(GRAD_STEP, GRAD_STEP * abs(x_i))


def numerical_gradient(f, x) -> np.ndarray:
    """Central-difference gradient with per-coordinate step
    max(1e-5, 1e-5*|x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = _step(x[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite objective near coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def numerical_hessian(f, x) -> np.ndarray:
    """Hessian from central differences of numerical gradients,
    symmetrized as (H + H^T) / 2."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        h = _step(x[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        H[:, i] = (numerical_gradient(f, xp) - numerical_gradient(f, xm)) / (2.0 * h)
    return 0.5 * (H + H.T)

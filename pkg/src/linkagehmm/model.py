"""Core model objects: parameters, genetic maps, allele frequencies, genotypes.

The hidden ancestry process of one haplotype moves along the markers of a
chromosome as a Markov chain on the K ancestral populations.  Between two
markers at genetic distance d (centiMorgan) the chain either survives with
probability exp(-d*r) or is redrawn from the ancestry proportions q, so the
transition kernel is

    T(q, r, d) = exp(-d*r) * I + (1 - exp(-d*r)) * 1 q^T.

The first marker of every chromosome is drawn from q directly.  ``r`` is the
recombination rate per centiMorgan; ``r = INFINITY`` makes every marker an
independent draw from q (the admixture limit).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidGenotypeError,
    InvalidMapError,
    InvalidParameterError,
    StructuralError,
)

#: Distinguished value selecting the marker-independent (admixture) limit.
INFINITY = math.inf

#: Genotype code for a missing observation.
MISSING = -1

#: Tolerance for "sums to one" checks on ancestry vectors.
SIMPLEX_ATOL = 1e-12

#: Allele emitted with probability p_{c,k,m} given ancestry k.
EMISSION_STANDARD = "standard"
#: Allele emitted with probability q_k * p_{c,k,m} given ancestry k
#: (the literal product form; kept for fidelity experiments only).
EMISSION_PAPER_LITERAL = "paper-literal"

EMISSION_MODES = (EMISSION_STANDARD, EMISSION_PAPER_LITERAL)

HAPLOID = "haploid"
DIPLOID = "diploid"


def validate_simplex(q, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """Return q as a float array, raising unless it lies on the simplex."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 1:
        raise InvalidParameterError("ancestry vector must be one-dimensional")
    if not np.all(np.isfinite(q)) or np.any(q < 0.0):
        raise InvalidParameterError(
            f"ancestry proportions must be finite and nonnegative, got {q!r}"
        )
    total = float(q.sum())
    if abs(total - 1.0) > atol:
        raise InvalidParameterError(
            f"ancestry proportions must sum to 1 (got sum {total!r})"
        )
    return q


def validate_rate(r) -> float:
    """Return r as a float, raising unless r >= 0 or r is INFINITY."""
    r = float(r)
    if r == INFINITY:
        return r
    if not (math.isfinite(r) and r >= 0.0):
        raise InvalidParameterError(f"rate must be >= 0 or INFINITY, got {r!r}")
    return r


def validate_emission_mode(mode: str) -> str:
    if mode not in EMISSION_MODES:
        raise InvalidParameterError(
            f"unknown emission mode {mode!r}; expected one of {EMISSION_MODES}"
        )
    return mode


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ParameterPoint:
    """Ancestry proportions q together with the recombination rate r."""

    q: np.ndarray
    r: float

    def __post_init__(self):
        q = _freeze(validate_simplex(self.q).copy())
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", validate_rate(self.r))

    @property
    def K(self) -> int:
        return self.q.shape[0]

    @property
    def is_admixture(self) -> bool:
        return self.r == INFINITY

    def __repr__(self):  # keep array noise out of test failure output
        qs = ", ".join(f"{v:.6g}" for v in self.q)
        return f"ParameterPoint(q=({qs}), r={self.r:.6g})"


@dataclass(frozen=True)
class GeneticMap:
    """Inter-marker distances in centiMorgan, one array per chromosome.

    ``distances[c][m]`` is the distance between markers m-1 and m on
    chromosome c; entry 0 of every chromosome has no left neighbour and is
    stored as 0.
    """

    distances: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.distances) == 0:
            raise InvalidMapError("map needs at least one chromosome")
        cleaned = []
        for c, d in enumerate(self.distances):
            d = np.asarray(d, dtype=float).copy()
            if d.ndim != 1 or d.size < 1:
                raise InvalidMapError(
                    f"chromosome {c + 1}: distances must be a nonempty 1-d array"
                )
            d[0] = 0.0
            if not np.all(np.isfinite(d)) or np.any(d[1:] < 0.0):
                raise InvalidMapError(
                    f"chromosome {c + 1}: distances must be finite and >= 0"
                )
            cleaned.append(_freeze(d))
        object.__setattr__(self, "distances", tuple(cleaned))

    @classmethod
    def constant(cls, d: float, markers_per_chromosome) -> "GeneticMap":
        """Equally spaced markers, d centiMorgan apart, on each chromosome."""
        if d < 0:
            raise InvalidMapError(f"distance must be >= 0, got {d!r}")
        return cls(tuple(np.full(int(m), float(d)) for m in markers_per_chromosome))

    @property
    def num_chromosomes(self) -> int:
        return len(self.distances)

    @property
    def markers_per_chromosome(self) -> tuple[int, ...]:
        return tuple(d.size for d in self.distances)

    @property
    def M_total(self) -> int:
        return int(sum(self.markers_per_chromosome))


@dataclass(frozen=True)
class AlleleFrequencySet:
    """Allele-one frequencies, one (M_c, K) matrix per chromosome.

    Entries are clamped into [kappa_p, kappa_p_hi] on construction so that
    emission probabilities stay bounded away from 0 and 1; ``clamped_count``
    records how many raw entries were moved.
    """

    freqs: tuple[np.ndarray, ...]
    populations: tuple[str, ...] = ()
    kappa_p: float = 1e-6
    kappa_p_hi: float = 1.0 - 1e-6
    clamped_count: int = 0

    def __post_init__(self):
        if not (0.0 < self.kappa_p < self.kappa_p_hi < 1.0):
            raise InvalidParameterError(
                "frequency bounds must satisfy 0 < kappa_p < kappa_p_hi < 1"
            )
        if len(self.freqs) == 0:
            raise StructuralError("frequency set needs at least one chromosome")
        cleaned = []
        K = None
        clamped = 0
        for c, p in enumerate(self.freqs):
            p = np.asarray(p, dtype=float).copy()
            if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
                raise StructuralError(
                    f"chromosome {c + 1}: frequencies must be a (markers, K) matrix"
                )
            if K is None:
                K = p.shape[1]
            elif p.shape[1] != K:
                raise StructuralError(
                    f"chromosome {c + 1}: population count {p.shape[1]} != {K}"
                )
            if not np.all(np.isfinite(p)):
                raise InvalidParameterError(
                    f"chromosome {c + 1}: frequencies must be finite"
                )
            out = (p < self.kappa_p) | (p > self.kappa_p_hi)
            clamped += int(out.sum())
            np.clip(p, self.kappa_p, self.kappa_p_hi, out=p)
            cleaned.append(_freeze(p))
        if clamped:
            warnings.warn(
                f"clamped {clamped} allele frequencies into "
                f"[{self.kappa_p:g}, {self.kappa_p_hi:g}]",
                stacklevel=2,
            )
        pops = tuple(self.populations) or tuple(f"pop{k + 1}" for k in range(K))
        if len(pops) != K:
            raise StructuralError(
                f"{len(pops)} population names for {K} frequency columns"
            )
        object.__setattr__(self, "freqs", tuple(cleaned))
        object.__setattr__(self, "populations", pops)
        object.__setattr__(self, "clamped_count", clamped)

    @property
    def K(self) -> int:
        return self.freqs[0].shape[1]

    @property
    def num_chromosomes(self) -> int:
        return len(self.freqs)

    @property
    def markers_per_chromosome(self) -> tuple[int, ...]:
        return tuple(p.shape[0] for p in self.freqs)

    @property
    def M_total(self) -> int:
        return int(sum(self.markers_per_chromosome))

    def spread(self) -> float:
        """Largest between-population frequency difference over all markers."""
        return max(float((p.max(axis=1) - p.min(axis=1)).max()) for p in self.freqs)


@dataclass(frozen=True)
class GenotypeData:
    """Observed alleles for one individual, one (tracks, M_c) int8 matrix
    per chromosome.

    Haploid data has one track per chromosome, phased-diploid data two (the
    maternal and paternal haplotypes).  Missing observations are stored as
    MISSING (-1).  ``M_total`` counts markers, not haplotype tracks.
    """

    tracks: tuple[np.ndarray, ...]
    ploidy: str = HAPLOID

    def __post_init__(self):
        if self.ploidy not in (HAPLOID, DIPLOID):
            raise InvalidGenotypeError(f"unknown ploidy {self.ploidy!r}")
        want_tracks = 1 if self.ploidy == HAPLOID else 2
        if len(self.tracks) == 0:
            raise StructuralError("genotype data needs at least one chromosome")
        cleaned = []
        for c, x in enumerate(self.tracks):
            x = np.asarray(x)
            if x.ndim == 1:
                x = x[np.newaxis, :]
            if x.ndim != 2 or x.shape[1] < 1:
                raise StructuralError(
                    f"chromosome {c + 1}: tracks must be a (tracks, markers) matrix"
                )
            if x.shape[0] != want_tracks:
                raise StructuralError(
                    f"chromosome {c + 1}: {self.ploidy} data needs "
                    f"{want_tracks} track(s), got {x.shape[0]}"
                )
            x = np.ascontiguousarray(x, dtype=np.int8)
            bad = ~np.isin(x, (0, 1, MISSING))
            if bad.any():
                raise InvalidGenotypeError(
                    f"chromosome {c + 1}: alleles must be 0, 1 or MISSING"
                )
            cleaned.append(_freeze(x))
        object.__setattr__(self, "tracks", tuple(cleaned))

    @classmethod
    def haploid(cls, chromosomes) -> "GenotypeData":
        return cls(tuple(np.atleast_2d(x) for x in chromosomes), HAPLOID)

    @classmethod
    def phased_diploid(cls, chromosomes) -> "GenotypeData":
        return cls(tuple(np.atleast_2d(x) for x in chromosomes), DIPLOID)

    @property
    def num_chromosomes(self) -> int:
        return len(self.tracks)

    @property
    def n_tracks(self) -> int:
        return self.tracks[0].shape[0]

    @property
    def markers_per_chromosome(self) -> tuple[int, ...]:
        return tuple(x.shape[1] for x in self.tracks)

    @property
    def M_total(self) -> int:
        return int(sum(self.markers_per_chromosome))

    def observed_count(self) -> int:
        return int(sum((x != MISSING).sum() for x in self.tracks))


@dataclass(frozen=True)
class AssumptionConfig:
    """Bounds defining the compact parameter region used by the diagnostics.

    kappa_q/kappa_q_hi box the ancestry proportions, kappa_p/kappa_p_hi the
    allele frequencies, r_lb is the smallest admissible recombination rate
    and kappa_d the smallest admissible inter-marker distance.
    """

    kappa_q: float = 1e-4
    kappa_q_hi: float = 1.0 - 1e-4
    kappa_p: float = 1e-6
    kappa_p_hi: float = 1.0 - 1e-6
    r_lb: float = 0.01
    kappa_d: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.kappa_q < self.kappa_q_hi < 1.0):
            raise InvalidParameterError("need 0 < kappa_q < kappa_q_hi < 1")
        if not (0.0 < self.kappa_p < self.kappa_p_hi < 1.0):
            raise InvalidParameterError("need 0 < kappa_p < kappa_p_hi < 1")
        if self.r_lb < 0.0:
            raise InvalidParameterError("need r_lb >= 0")
        if self.kappa_d <= 0.0:
            raise InvalidParameterError("need kappa_d > 0")


def survival(r, d) -> float:
    """Probability exp(-d*r) that the ancestry survives a gap of d cM.

    Returns exactly 0 for r = INFINITY (independent of d), so the admixture
    limit never goes through the exponential.
    """
    r = validate_rate(r)
    if d < 0:
        raise InvalidMapError(f"distance must be >= 0, got {d!r}")
    if r == INFINITY:
        return 0.0
    return math.exp(-float(d) * r)


def transition_matrix(q, r, d) -> np.ndarray:
    """Row-stochastic K x K kernel exp(-d*r)*I + (1-exp(-d*r))*1 q^T.

    Rows index the source state, columns the target state; q is the unique
    invariant distribution of the kernel for every r and d.
    """
    q = validate_simplex(q)
    a = survival(r, d)
    K = q.size
    return a * np.eye(K) + (1.0 - a) * np.broadcast_to(q, (K, K))


def second_eigenvalue(q, r, d) -> float:
    """Second-largest eigenvalue of transition_matrix(q, r, d).

    The kernel's spectrum is {1} plus exp(-d*r) with multiplicity K-1, so
    this is exp(-d*r); it is 0 in the admixture limit r = INFINITY.
    """
    q = validate_simplex(q)
    if q.size < 2:
        raise InvalidParameterError("second eigenvalue needs K >= 2")
    return survival(r, d)


def emission_vector(x, p_col, q=None, mode: str = EMISSION_STANDARD) -> np.ndarray:
    """P(X = x | Z = k) for each ancestral population k.

    ``p_col`` holds the K allele frequencies of the marker (already clamped
    away from 0 and 1).  A MISSING observation returns the all-ones vector,
    which marginalizes the marker while keeping the transitions intact.
    """
    validate_emission_mode(mode)
    p_col = np.asarray(p_col, dtype=float)
    if mode == EMISSION_PAPER_LITERAL:
        if q is None:
            raise InvalidParameterError("literal emission mode needs q")
        success = validate_simplex(q) * p_col
    else:
        success = p_col
    if x == MISSING:
        return np.ones_like(p_col)
    if x == 1:
        return success.copy()
    if x == 0:
        return 1.0 - success
    raise InvalidGenotypeError(f"observation must be 0, 1 or MISSING, got {x!r}")


def check_layout(data: GenotypeData | None, freqs: AlleleFrequencySet,
                 gmap: GeneticMap | None = None) -> None:
    """Raise StructuralError unless genotypes, frequencies and map agree on
    the chromosome count and the per-chromosome marker counts."""
    parts = [("frequencies", freqs.markers_per_chromosome)]
    if data is not None:
        parts.append(("genotypes", data.markers_per_chromosome))
    if gmap is not None:
        parts.append(("map", gmap.markers_per_chromosome))
    _, ref = parts[0]
    for name, counts in parts[1:]:
        if len(counts) != len(ref):
            raise StructuralError(
                f"{name} has {len(counts)} chromosomes, frequencies have {len(ref)}"
            )
        if counts != ref:
            raise StructuralError(
                f"marker counts differ between {name} {counts} "
                f"and frequencies {ref}"
            )


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostics for the compactness/identifiability conditions.

    Purely informational: violations are reported as warnings, nothing is
    raised.  ``mixing_log10`` is log10 of the product of second eigenvalues
    exp(-d*r_lb) over all inter-marker gaps, evaluated at the configured
    lower rate bound; the more negative, the faster the chain forgets its
    start (-inf means some gap alone already mixes completely).
    """

    clamped_frequencies: int
    degenerate_markers: int
    distance_violations: tuple[tuple[int, int, float], ...]
    min_distance: float
    mixing_log10: float
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.warnings


def validate_assumptions(data: GenotypeData | None, freqs: AlleleFrequencySet,
                         gmap: GeneticMap,
                         config: AssumptionConfig = AssumptionConfig(),
                         ) -> AssumptionReport:
    """Diagnose how far a dataset is from the regularity conditions.

    Checks the frequency bounds (clamp counts), markers whose frequencies
    coincide between two populations, inter-marker distances below kappa_d,
    and the overall mixing rate of the hidden chain at r = r_lb.
    """
    check_layout(data, freqs, gmap)
    notes = []

    clamped = freqs.clamped_count
    tight = sum(
        int(((p <= config.kappa_p) | (p >= config.kappa_p_hi)).any(axis=1).sum())
        for p in freqs.freqs
    )
    if clamped:
        notes.append(f"{clamped} frequencies were clamped on construction")
    if tight:
        notes.append(f"{tight} markers sit on the frequency bounds")

    degenerate = 0
    for p in freqs.freqs:
        for m in range(p.shape[0]):
            row = p[m]
            if np.any(np.abs(row[:, None] - row[None, :])[np.triu_indices(row.size, 1)] < 1e-12):
                degenerate += 1
    if degenerate:
        notes.append(
            f"{degenerate} markers have coinciding frequencies for some "
            "population pair (uninformative for separating those populations)"
        )

    violations = []
    min_d = math.inf
    total_d = 0.0
    for c, d in enumerate(gmap.distances):
        gaps = d[1:]
        if gaps.size:
            min_d = min(min_d, float(gaps.min()))
        total_d += float(gaps.sum())
        for m in np.nonzero(gaps < config.kappa_d)[0]:
            violations.append((c + 1, int(m) + 2, float(gaps[m])))
    if violations:
        notes.append(
            f"{len(violations)} inter-marker distances below kappa_d="
            f"{config.kappa_d:g}"
        )
    if min_d == math.inf:
        min_d = math.nan

    # product over all gaps of exp(-d * r_lb), in log10
    mixing_log10 = -config.r_lb * total_d / math.log(10.0)
    if mixing_log10 > -1.0:
        notes.append(
            "hidden chain mixes slowly at r_lb: product of second "
            f"eigenvalues is 1e{mixing_log10:.2f}"
        )

    return AssumptionReport(
        clamped_frequencies=clamped,
        degenerate_markers=degenerate,
        distance_violations=tuple(violations),
        min_distance=min_d,
        mixing_log10=mixing_log10,
        warnings=tuple(notes),
    )

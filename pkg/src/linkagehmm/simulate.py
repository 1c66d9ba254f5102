"""Data generation under the linkage model and its admixture limit.

Randomness comes from numpy's counter-based Philox generator keyed by
(seed, stream): every replicate owns an independent, platform-stable
stream, so experiments are reproducible draw for draw.  Within a stream
the draw order is fixed: frequencies (when generated), then per chromosome
and per haplotype track the resample uniforms, the fresh ancestries and
the allele uniforms, each of length M_c regardless of parameter values.

The hidden chain is sampled through its regeneration structure: at every
gap the ancestry either survives (probability exp(-d*r)) or is replaced by
a fresh draw from q, so the state at marker m is the fresh draw at the
most recent regeneration.  The admixture simulator is exactly the linkage
simulator with r = INFINITY (every gap regenerates), sharing the same
draw pipeline, so equal seeds give byte-equal output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .model import (
    DIPLOID,
    EMISSION_PAPER_LITERAL,
    EMISSION_STANDARD,
    HAPLOID,
    INFINITY,
    AlleleFrequencySet,
    GeneticMap,
    GenotypeData,
    validate_emission_mode,
    validate_rate,
    validate_simplex,
)


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent counter-based generator for (seed, stream)."""
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _categorical(rng: np.random.Generator, q: np.ndarray, n: int) -> np.ndarray:
    """n i.i.d. draws from q via inverse CDF (stable across numpy versions)."""
    edges = np.cumsum(q)
    edges[-1] = 1.0
    return np.searchsorted(edges, rng.random(n), side="right").astype(np.intp)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything one replicate needs to be drawn.

    ``distance`` is either a constant spacing in centiMorgan or an explicit
    GeneticMap; ``freqs`` is either an explicit AlleleFrequencySet or None,
    in which case frequencies are drawn i.i.d. uniform on
    [freq_low, freq_high] per population and marker (re-drawn per marker
    until the populations differ by at least ``freq_separation``).
    """

    q0: tuple[float, ...]
    r0: float
    markers_per_chromosome: tuple[int, ...] = (100,)
    distance: float | GeneticMap = 1.0
    freqs: AlleleFrequencySet | None = None
    freq_low: float = 0.1
    freq_high: float = 0.9
    freq_separation: float = 0.0
    ploidy: str = HAPLOID
    emission_mode: str = EMISSION_STANDARD
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        try:
            q0 = validate_simplex(self.q0)
            validate_rate(self.r0)
            validate_emission_mode(self.emission_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "q0", tuple(float(v) for v in q0))
        if self.ploidy not in (HAPLOID, DIPLOID):
            raise ConfigError(f"unknown ploidy {self.ploidy!r}")
        counts = tuple(int(m) for m in self.markers_per_chromosome)
        if len(counts) == 0 or any(m < 1 for m in counts):
            raise ConfigError("every chromosome needs at least one marker")
        object.__setattr__(self, "markers_per_chromosome", counts)
        if isinstance(self.distance, GeneticMap):
            if self.distance.markers_per_chromosome != counts:
                raise ConfigError("explicit map does not match the marker counts")
        elif not (float(self.distance) >= 0.0):
            raise ConfigError(f"distance must be >= 0, got {self.distance!r}")
        if self.freqs is not None:
            if self.freqs.markers_per_chromosome != counts:
                raise ConfigError("explicit frequencies do not match the marker counts")
            if self.freqs.K != len(self.q0):
                raise ConfigError("explicit frequencies do not match K")
        elif not (0.0 < self.freq_low < self.freq_high < 1.0):
            raise ConfigError("need 0 < freq_low < freq_high < 1")

    @property
    def K(self) -> int:
        return len(self.q0)

    @property
    def C(self) -> int:
        return len(self.markers_per_chromosome)


def config_map(config: SimulationConfig) -> GeneticMap:
    """The genetic map a configuration simulates on."""
    if isinstance(config.distance, GeneticMap):
        return config.distance
    return GeneticMap.constant(float(config.distance),
                               config.markers_per_chromosome)


def _draw_frequencies(config: SimulationConfig,
                      rng: np.random.Generator) -> AlleleFrequencySet:
    mats = []
    for m_c in config.markers_per_chromosome:
        p = rng.uniform(config.freq_low, config.freq_high, size=(m_c, config.K))
        if config.freq_separation > 0.0:
            for m in range(m_c):
                while (np.abs(p[m, :, None] - p[m, None, :]).max()
                       < config.freq_separation):
                    p[m] = rng.uniform(config.freq_low, config.freq_high,
                                       size=config.K)
        mats.append(p)
    return AlleleFrequencySet(tuple(mats))


def generate_frequencies(config: SimulationConfig) -> AlleleFrequencySet:
    """The frequencies a configuration simulates with.

    For generated frequencies this replays the leading draws of the
    configuration's stream, so it agrees exactly with what the simulators
    use internally.
    """
    if config.freqs is not None:
        return config.freqs
    return _draw_frequencies(config, rng_stream(config.seed, config.stream))


def simulate_linkage(config: SimulationConfig):
    """Draw one individual under the linkage model.

    Returns (GenotypeData, hidden) where ``hidden`` holds the ancestral
    origins as one (tracks, M_c) array per chromosome, for white-box tests.
    """
    rng = rng_stream(config.seed, config.stream)
    freqs = config.freqs if config.freqs is not None else _draw_frequencies(config, rng)
    gmap = config_map(config)
    q0 = np.asarray(config.q0)
    literal = config.emission_mode == EMISSION_PAPER_LITERAL
    n_tracks = 1 if config.ploidy == HAPLOID else 2

    chrom_x = []
    chrom_z = []
    for p, d in zip(freqs.freqs, gmap.distances):
        m_c = p.shape[0]
        surv = np.zeros(m_c) if config.r0 == INFINITY else np.exp(-d * config.r0)
        x_rows = np.empty((n_tracks, m_c), dtype=np.int8)
        z_rows = np.empty((n_tracks, m_c), dtype=np.intp)
        for t in range(n_tracks):
            u_gap = rng.random(m_c)
            fresh = _categorical(rng, q0, m_c)
            u_allele = rng.random(m_c)
            regen = np.empty(m_c, dtype=bool)
            regen[0] = True  # chromosome start draws from q0
            regen[1:] = u_gap[1:] >= surv[1:]
            last = np.where(regen, np.arange(m_c), -1)
            np.maximum.accumulate(last, out=last)
            z = fresh[last]
            p_eff = p[np.arange(m_c), z]
            if literal:
                p_eff = p_eff * q0[z]
            x_rows[t] = (u_allele < p_eff).astype(np.int8)
            z_rows[t] = z
        chrom_x.append(x_rows)
        chrom_z.append(z_rows)
    data = GenotypeData(tuple(chrom_x), config.ploidy)
    return data, tuple(chrom_z)


def simulate_admixture(config: SimulationConfig) -> GenotypeData:
    """Draw one individual with independent markers (r = INFINITY).

    Identical draw pipeline to simulate_linkage, so with the same seed and
    stream the output matches simulate_linkage at r0 = INFINITY byte for
    byte."""
    data, _ = simulate_linkage(replace(config, r0=INFINITY))
    return data

"""Tab-separated file formats and the panel workflow.

Three formats, all TSV with a header line:

* frequencies: ``chrom  marker  <pop_1> ... <pop_K>`` with one row per
  (chromosome, marker) and allele-1 frequencies per population column;
* map: ``chrom  marker  dist_cM`` where the distance is to the previous
  marker of the same chromosome; the first marker of a chromosome is
  written as 0 and ignored on read;
* genotypes: ``id  chrom  marker  hap1 [hap2]`` with alleles 0, 1 or "."
  for missing; one hap column means haploid data, two means phased-diploid.

Rows of one chromosome (and, in genotype files, one individual) must be
contiguous; floats are written with shortest round-trip precision so that
write(load(x)) is byte-identical for files this module wrote.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, ParseError, StructuralError
from .model import (
    DIPLOID,
    HAPLOID,
    MISSING,
    AlleleFrequencySet,
    GeneticMap,
    GenotypeData,
)

MISSING_TOKEN = "."


def _split(line: str) -> list[str]:
    return line.rstrip("\n").split("\t")


def _parse_float(path, lineno, token, what) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(path, lineno, f"cannot parse {what} {token!r}") from None


def _group_chromosomes(path, rows):
    """Group (chrom, payload) rows into contiguous chromosome blocks."""
    order: list[str] = []
    blocks: dict[str, list] = {}
    for lineno, chrom, payload in rows:
        if chrom not in blocks:
            if order and order[-1] != chrom and chrom in order:
                raise ParseError(path, lineno,
                                 f"chromosome {chrom!r} rows are not contiguous")
            order.append(chrom)
            blocks[chrom] = []
        elif order[-1] != chrom:
            raise ParseError(path, lineno,
                             f"chromosome {chrom!r} rows are not contiguous")
        blocks[chrom].append(payload)
    return order, blocks


def load_frequencies(path) -> AlleleFrequencySet:
    """Parse a frequencies TSV; out-of-range values are clamped with a
    warning by the AlleleFrequencySet constructor."""
    with open(path, "r", encoding="utf-8") as fh:
        header = _split(fh.readline())
        if len(header) < 3 or header[:2] != ["chrom", "marker"]:
            raise ParseError(path, 1, "expected header 'chrom\\tmarker\\t<populations...>'")
        pops = tuple(header[2:])
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = _split(line)
            if len(parts) != len(header):
                raise ParseError(path, lineno,
                                 f"expected {len(header)} columns, got {len(parts)}")
            vals = [_parse_float(path, lineno, t, "frequency") for t in parts[2:]]
            rows.append((lineno, parts[0], vals))
    if not rows:
        raise ParseError(path, 2, "no frequency rows")
    order, blocks = _group_chromosomes(path, rows)
    return AlleleFrequencySet(tuple(np.array(blocks[c]) for c in order),
                              populations=pops)


def write_frequencies(freqs: AlleleFrequencySet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("chrom\tmarker\t" + "\t".join(freqs.populations) + "\n")
        for c, p in enumerate(freqs.freqs, start=1):
            for m in range(p.shape[0]):
                vals = "\t".join(repr(float(v)) for v in p[m])
                fh.write(f"{c}\t{m + 1}\t{vals}\n")


def load_map(path) -> GeneticMap:
    with open(path, "r", encoding="utf-8") as fh:
        header = _split(fh.readline())
        if header != ["chrom", "marker", "dist_cM"]:
            raise ParseError(path, 1, "expected header 'chrom\\tmarker\\tdist_cM'")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = _split(line)
            if len(parts) != 3:
                raise ParseError(path, lineno, f"expected 3 columns, got {len(parts)}")
            d = _parse_float(path, lineno, parts[2], "distance")
            if not np.isfinite(d) or (d < 0.0):
                raise ParseError(path, lineno, f"distance must be finite and >= 0, got {parts[2]}")
            rows.append((lineno, parts[0], d))
    if not rows:
        raise ParseError(path, 2, "no map rows")
    order, blocks = _group_chromosomes(path, rows)
    return GeneticMap(tuple(np.array(blocks[c]) for c in order))


def write_map(gmap: GeneticMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("chrom\tmarker\tdist_cM\n")
        for c, d in enumerate(gmap.distances, start=1):
            for m in range(d.size):
                fh.write(f"{c}\t{m + 1}\t{repr(float(d[m])) if m else '0'}\n")


@dataclass(frozen=True)
class PanelDataset:
    """A set of individuals sharing one marker layout.

    ``labels`` maps individual id to a population label (needed for the
    leave-one-out workflow); layout identity across files is positional.
    """

    ids: tuple[str, ...]
    genotypes: tuple[GenotypeData, ...]
    labels: dict[str, str] | None = None

    def __post_init__(self):
        if len(self.ids) != len(set(self.ids)):
            raise StructuralError("individual identifiers must be unique")
        if len(self.ids) != len(self.genotypes):
            raise StructuralError("one genotype set per identifier required")
        if self.genotypes:
            ref = self.genotypes[0].markers_per_chromosome
            for i, g in enumerate(self.genotypes):
                if g.markers_per_chromosome != ref:
                    raise StructuralError(
                        f"individual {self.ids[i]!r} has a different marker layout"
                    )

    @property
    def n_individuals(self) -> int:
        return len(self.ids)

    @property
    def ploidy(self) -> str:
        return self.genotypes[0].ploidy

    def individual(self, target_id: str) -> GenotypeData:
        try:
            return self.genotypes[self.ids.index(target_id)]
        except ValueError:
            raise InvalidInputError(f"no individual {target_id!r} in panel") from None

    def with_labels(self, labels: dict[str, str]) -> "PanelDataset":
        missing = [i for i in self.ids if i not in labels]
        if missing:
            raise InvalidInputError(f"no population label for {missing[:5]!r}")
        return replace(self, labels={i: labels[i] for i in self.ids})


def _parse_allele(path, lineno, token):
    if token == MISSING_TOKEN:
        return MISSING
    if token in ("0", "1"):
        return int(token)
    raise ParseError(path, lineno, f"allele must be 0, 1 or '.', got {token!r}")


def load_genotypes(path) -> PanelDataset:
    """Parse a genotypes TSV into a panel (possibly of one individual)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = _split(fh.readline())
        if header[:3] != ["id", "chrom", "marker"] or len(header) not in (4, 5):
            raise ParseError(
                path, 1, "expected header 'id\\tchrom\\tmarker\\thap1[\\thap2]'"
            )
        n_tracks = len(header) - 3
        per_id: dict[str, list] = {}
        order: list[str] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = _split(line)
            if len(parts) != len(header):
                raise ParseError(path, lineno,
                                 f"expected {len(header)} columns, got {len(parts)}")
            ind = parts[0]
            alleles = [_parse_allele(path, lineno, t) for t in parts[3:]]
            if ind not in per_id:
                per_id[ind] = []
                order.append(ind)
            per_id[ind].append((lineno, parts[1], alleles))
    if not order:
        raise ParseError(path, 2, "no genotype rows")

    genotypes = []
    layout = None
    for ind in order:
        chrom_order, blocks = _group_chromosomes(path, per_id[ind])
        this_layout = tuple((c, len(blocks[c])) for c in chrom_order)
        if layout is None:
            layout = this_layout
        elif this_layout != layout:
            raise StructuralError(
                f"individual {ind!r} has marker layout {this_layout}, "
                f"expected {layout}"
            )
        tracks = tuple(
            np.array(blocks[c], dtype=np.int8).T for c in chrom_order
        )
        genotypes.append(GenotypeData(tracks,
                                      HAPLOID if n_tracks == 1 else DIPLOID))
    return PanelDataset(tuple(order), tuple(genotypes))


def write_genotypes(panel: PanelDataset, path) -> None:
    n_tracks = 1 if panel.ploidy == HAPLOID else 2
    hap_cols = "".join(f"\thap{t + 1}" for t in range(n_tracks))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tchrom\tmarker" + hap_cols + "\n")
        for ind, g in zip(panel.ids, panel.genotypes):
            for c, x in enumerate(g.tracks, start=1):
                for m in range(x.shape[1]):
                    cells = "\t".join(
                        MISSING_TOKEN if v == MISSING else str(int(v))
                        for v in x[:, m]
                    )
                    fh.write(f"{ind}\t{c}\t{m + 1}\t{cells}\n")


def load_labels(path) -> dict[str, str]:
    """Parse an ``id\\tpop`` TSV into a label mapping."""
    with open(path, "r", encoding="utf-8") as fh:
        header = _split(fh.readline())
        if header != ["id", "pop"]:
            raise ParseError(path, 1, "expected header 'id\\tpop'")
        labels = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = _split(line)
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 2 columns, got {len(parts)}")
            if parts[0] in labels:
                raise ParseError(path, lineno, f"duplicate id {parts[0]!r}")
            labels[parts[0]] = parts[1]
    return labels


def write_labels(labels: dict[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tpop\n")
        for ind, pop in labels.items():
            fh.write(f"{ind}\t{pop}\n")


def leave_one_out_frequencies(panel: PanelDataset, target_id: str,
                              labels: dict[str, str] | None = None,
                              kappa_p: float = 1e-6) -> AlleleFrequencySet:
    """Relative allele frequencies per labeled population, excluding the
    tested individual's haplotypes, clamped into [kappa_p, 1 - kappa_p].

    Population order is first appearance in the panel's id order.  Markers
    a population has no observed alleles for fall back to 0.5 with a
    warning.
    """
    if labels is None:
        labels = panel.labels
    if labels is None:
        raise InvalidInputError("leave-one-out frequencies need population labels")
    panel = panel.with_labels(labels)
    if target_id not in panel.ids:
        raise InvalidInputError(f"no individual {target_id!r} in panel")

    pops: list[str] = []
    for ind in panel.ids:
        pop = panel.labels[ind]
        if pop not in pops:
            pops.append(pop)
    members = {
        pop: [i for i in panel.ids if panel.labels[i] == pop and i != target_id]
        for pop in pops
    }
    for pop, ids in members.items():
        if not ids:
            raise InvalidInputError(
                f"population {pop!r} is empty after excluding {target_id!r}"
            )

    shape = panel.genotypes[0].markers_per_chromosome
    mats = [np.empty((m_c, len(pops))) for m_c in shape]
    empty = 0
    for k, pop in enumerate(pops):
        for c in range(len(shape)):
            ones = np.zeros(shape[c])
            seen = np.zeros(shape[c])
            for ind in members[pop]:
                x = panel.individual(ind).tracks[c]
                ones += (x == 1).sum(axis=0)
                seen += (x != MISSING).sum(axis=0)
            none_seen = seen == 0
            empty += int(none_seen.sum())
            seen[none_seen] = 1.0
            p = ones / seen
            p[none_seen] = 0.5
            mats[c][:, k] = p
    if empty:
        warnings.warn(
            f"{empty} population/marker cells had no observed alleles; "
            "frequency 0.5 assumed",
            stacklevel=2,
        )
    return AlleleFrequencySet(tuple(mats), populations=tuple(pops),
                              kappa_p=kappa_p, kappa_p_hi=1.0 - kappa_p)


@dataclass(frozen=True)
class PanelSummary:
    """Non-rejection fractions of a panel run, overall and per label."""

    overall_non_rejection: float
    per_population: dict[str, tuple[int, int]]  # label -> (non-rejections, count)
    n_individuals: int

    def population_fraction(self, pop: str) -> float:
        kept, count = self.per_population[pop]
        return kept / count


def summarize_panel(decisions) -> PanelSummary:
    """Aggregate (label, reject) pairs into non-rejection fractions.

    The overall fraction is exactly the count-weighted average of the
    per-population fractions.
    """
    decisions = list(decisions)
    if not decisions:
        raise InvalidInputError("no test decisions to summarize")
    per_pop: dict[str, list[int]] = {}
    for label, reject in decisions:
        per_pop.setdefault(label, []).append(int(not reject))
    return PanelSummary(
        overall_non_rejection=sum(int(not r) for _, r in decisions) / len(decisions),
        per_population={pop: (sum(v), len(v)) for pop, v in per_pop.items()},
        n_individuals=len(decisions),
    )

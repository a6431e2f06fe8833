"""Synthetic genome/read generation with ground truth, plus the evaluation
metrics used to judge mapping output."""

from dataclasses import dataclass

import numpy as np

from .cluster_engine import CLASS_ANCHOR
from .readio import decode_seq
from .samio import (
    FLAG_FIRST,
    FLAG_MATE_REVERSE,
    FLAG_MATE_UNMAPPED,
    FLAG_PAIRED,
    FLAG_REVERSE,
    FLAG_SECOND,
    FLAG_SECONDARY,
    FLAG_SUPPLEMENTARY,
    SamRecord,
    cigar_items,
    qname_to_read_id,
    read_sam,
)

DEFAULT_REF_NAME = "sim0"


@dataclass
class SimParams:
    genome_len: int
    read_len: int = 100
    coverage: float | None = None
    n_reads: int | None = None
    epsilon: float = 0.01
    paired: bool = False
    insert_mean: float = 300.0
    insert_sd: float = 30.0
    seed: int = 0
    ref_name: str = DEFAULT_REF_NAME

    def resolve_n(self):
        if self.n_reads is not None:
            return self.n_reads
        if self.coverage is None:
            raise ValueError("need coverage or n_reads")
        n = int(round(self.coverage * self.genome_len / self.read_len))
        if self.paired and n % 2:
            n += 1
        return n


@dataclass
class Truth:
    """Per-read originating position on the reference (0-based, leftmost)."""

    ref: str
    pos: np.ndarray
    strand: np.ndarray  # 0 forward, 1 reverse
    mate: np.ndarray  # -1 for single-end
    insert: np.ndarray  # 0 for single-end

    @property
    def n_reads(self):
        return len(self.pos)


def generate_genome(genome_len, seed, read_len=31):
    """Uniform i.i.d. ACGT sequence as a code array, deterministic per seed."""
    if genome_len < read_len:
        raise ValueError(
            f"genome length {genome_len} shorter than read length {read_len}"
        )
    rng = np.random.default_rng(seed)
    return rng.integers(0, 4, genome_len, dtype=np.uint8)


def _apply_errors(reads, epsilon, rng):
    if epsilon <= 0:
        return reads
    mask = rng.random(reads.shape) < epsilon
    bump = rng.integers(1, 4, reads.shape, dtype=np.uint8)
    reads[mask] = (reads[mask] + bump[mask]) % 4
    return reads


def _windows(genome, starts, read_len):
    return genome[starts[:, None] + np.arange(read_len)]


def _orient(reads, strands):
    rev = strands == 1
    if rev.any():
        reads[rev] = 3 - reads[rev, ::-1]
    return reads


def sample_reads(genome, params):
    """Sample reads with substitution errors; returns (reads NxL codes, Truth).

    Paired mode draws the insert from a Normal clipped to [2L, G]; mate 2 is
    the reverse complement of the fragment's right end (roles swap with
    probability one half so either mate can be the forward one).
    """
    rng = np.random.default_rng(params.seed)
    g = len(genome)
    L = params.read_len
    n = params.resolve_n()
    if not params.paired:
        starts = rng.integers(0, g - L + 1, n)
        strands = rng.integers(0, 2, n).astype(np.uint8)
        reads = _orient(_windows(genome, starts, L).copy(), strands)
        reads = _apply_errors(reads, params.epsilon, rng)
        truth = Truth(
            ref=params.ref_name,
            pos=starts.astype(np.int64),
            strand=strands,
            mate=np.full(n, -1, dtype=np.int64),
            insert=np.zeros(n, dtype=np.int64),
        )
        return reads, truth

    if n % 2:
        raise ValueError("paired simulation needs an even read count")
    npairs = n // 2
    ins = rng.normal(params.insert_mean, params.insert_sd, npairs)
    ins = np.clip(np.rint(ins), 2 * L, g).astype(np.int64)
    u = np.floor(rng.random(npairs) * (g - ins + 1)).astype(np.int64)
    flip = rng.integers(0, 2, npairs).astype(bool)
    left = _windows(genome, u, L).copy()
    right_start = u + ins - L
    right = _windows(genome, right_start, L).copy()
    right = 3 - right[:, ::-1]  # reverse-complemented right end

    reads = np.empty((n, L), dtype=np.uint8)
    pos = np.empty(n, dtype=np.int64)
    strand = np.empty(n, dtype=np.uint8)
    # mate1 forward-left unless flipped, in which case mate1 is the right end
    reads[0::2] = np.where(flip[:, None], right, left)
    reads[1::2] = np.where(flip[:, None], left, right)
    pos[0::2] = np.where(flip, right_start, u)
    pos[1::2] = np.where(flip, u, right_start)
    strand[0::2] = np.where(flip, 1, 0)
    strand[1::2] = np.where(flip, 0, 1)
    reads = _apply_errors(reads, params.epsilon, rng)
    mate = np.arange(n, dtype=np.int64) ^ 1
    truth = Truth(
        ref=params.ref_name,
        pos=pos,
        strand=strand,
        mate=mate,
        insert=np.repeat(ins, 2),
    )
    return reads, truth


# --- file emission ----------------------------------------------------------

def write_genome_fasta(genome, path, ref_name=DEFAULT_REF_NAME, width=70):
    seq = decode_seq(genome)
    with open(path, "w") as fh:
        fh.write(f">{ref_name}\n")
        for i in range(0, len(seq), width):
            fh.write(seq[i : i + width] + "\n")


def sim_read_name(read_id, paired):
    return f"sim:{read_id & ~1}" if paired else f"sim:{read_id}"


def write_reads_fastq(reads, paths, paired, qual_char="I"):
    """Write simulated reads; one path for SE, two (mate files) for PE."""
    n, L = reads.shape
    q = qual_char * L
    if not paired:
        with open(paths[0], "w") as fh:
            for i in range(n):
                fh.write(f"@{sim_read_name(i, False)}\n{decode_seq(reads[i])}\n+\n{q}\n")
        return
    with open(paths[0], "w") as f1, open(paths[1], "w") as f2:
        for t in range(n // 2):
            name = sim_read_name(2 * t, True)
            f1.write(f"@{name}\n{decode_seq(reads[2 * t])}\n+\n{q}\n")
            f2.write(f"@{name}\n{decode_seq(reads[2 * t + 1])}\n+\n{q}\n")


def write_truth(truth, path):
    with open(path, "w") as fh:
        for i in range(truth.n_reads):
            fh.write(
                f"{i}\t{truth.ref}\t{truth.pos[i]}\t"
                f"{'+-'[truth.strand[i]]}\t{truth.mate[i]}\t{truth.insert[i]}\n"
            )


def read_truth(path):
    pos, strand, mate, insert = [], [], [], []
    ref = DEFAULT_REF_NAME
    with open(path) as fh:
        for line in fh:
            _, ref, p, s, m, ins = line.split()
            pos.append(int(p))
            strand.append(0 if s == "+" else 1)
            mate.append(int(m))
            insert.append(int(ins))
    return Truth(
        ref=ref,
        pos=np.array(pos, dtype=np.int64),
        strand=np.array(strand, dtype=np.uint8),
        mate=np.array(mate, dtype=np.int64),
        insert=np.array(insert, dtype=np.int64),
    )


def oracle_place_anchors(table, truth, library=None, genome_len=None):
    """Truth-exact SAM for the anchor reads (MAPQ 60), for mapper tests that
    need no external readmapper."""
    L = table.read_len
    header = ["@HD\tVN:1.6\tSO:unsorted"]
    if genome_len is not None:
        header.append(f"@SQ\tSN:{truth.ref}\tLN:{genome_len}")
    lines = list(header)
    anchor_ids = np.flatnonzero(table.cls == CLASS_ANCHOR)
    anchor_set = set(int(i) for i in anchor_ids)
    for i in anchor_ids:
        i = int(i)
        strand = int(truth.strand[i])
        flag = FLAG_REVERSE if strand else 0
        qname = f"treq:{i}"
        rnext, pnext, tlen = "*", 0, 0
        if table.paired:
            mate = i ^ 1
            qname = f"treq:{i & ~1}"
            flag |= FLAG_PAIRED | (FLAG_SECOND if i % 2 else FLAG_FIRST)
            if mate in anchor_set:
                if truth.strand[mate]:
                    flag |= FLAG_MATE_REVERSE
                rnext = "="
                pnext = int(truth.pos[mate]) + 1
                left = min(int(truth.pos[i]), int(truth.pos[mate]))
                right = max(int(truth.pos[i]), int(truth.pos[mate])) + L
                tlen = right - left
                if int(truth.pos[i]) > int(truth.pos[mate]) or (
                    truth.pos[i] == truth.pos[mate] and i % 2
                ):
                    tlen = -tlen
            else:
                flag |= FLAG_MATE_UNMAPPED
        seq = "*"
        qual = "*"
        if library is not None:
            s = library.seqs[i]
            if strand:
                from .readio import revcomp_str

                s = revcomp_str(s)
            seq = s
            qual = library.quals[i][::-1] if strand else library.quals[i]
        rec = SamRecord(
            qname=qname,
            flag=flag,
            rname=truth.ref,
            pos=int(truth.pos[i]) + 1,
            mapq=60,
            cigar=f"{L}M",
            rnext=rnext,
            pnext=pnext,
            tlen=tlen,
            seq=seq,
            qual=qual,
        )
        lines.append(rec.line())
    return lines


# --- metrics ----------------------------------------------------------------

def _load_records(sam):
    if isinstance(sam, str):
        _, records = read_sam(sam)
    elif isinstance(sam, tuple):
        records = sam[1]
    else:
        records = sam
    out = {}
    for rec in records:
        if isinstance(rec, str):
            continue
        if rec.flag & (FLAG_SECONDARY | FLAG_SUPPLEMENTARY):
            continue
        rid = qname_to_read_id(rec.qname, rec.flag)
        if rid in out:
            raise ValueError(f"duplicate primary record for read {rid}")
        out[rid] = rec
    return out


def reference_span(cigar):
    return sum(n for n, op in cigar_items(cigar) if op in "MDN=X")


def accuracy(sam, truth, read_len, read_ids=None):
    """Fraction of reads mapped within +-L of the true position; unmapped
    reads count against."""
    recs = _load_records(sam)
    ids = range(truth.n_reads) if read_ids is None else read_ids
    ids = list(ids)
    if not ids:
        return 1.0
    good = 0
    for i in ids:
        rec = recs.get(int(i))
        if rec is None or not rec.mapped:
            continue
        if rec.rname != truth.ref:
            continue
        if abs(rec.pos0 - int(truth.pos[i])) <= read_len:
            good += 1
    return good / len(ids)


def alternate_mapping_rate(sam_a, sam_b, mapq_threshold, read_len):
    """Percentage of reads where the two inputs disagree: only one maps, or
    both map more than +-L apart. Records below the MAPQ threshold count as
    unmapped."""
    a = _load_records(sam_a)
    b = _load_records(sam_b)
    if set(a) != set(b):
        raise ValueError("SAM inputs cover different read sets")
    if not a:
        return 0.0

    def usable(rec):
        return rec.mapped and rec.mapq >= mapq_threshold

    n_alt = 0
    for rid, ra in a.items():
        rb = b[rid]
        ua, ub = usable(ra), usable(rb)
        if ua != ub:
            n_alt += 1
        elif ua and ub:
            if ra.rname != rb.rname or abs(ra.pos0 - rb.pos0) > read_len:
                n_alt += 1
    return 100.0 * n_alt / len(a)


def concordance(sam, insert_model):
    """Proportion of read pairs mapped to one reference on opposite strands
    with the insert within mean +- 5 sd (closed interval)."""
    recs = _load_records(sam)
    pair_ids = sorted({rid & ~1 for rid in recs})
    if not pair_ids:
        return 0.0
    lo = insert_model.mean - 5 * insert_model.sd
    hi = insert_model.mean + 5 * insert_model.sd
    n_conc = 0
    for pid in pair_ids:
        r1 = recs.get(pid)
        r2 = recs.get(pid + 1)
        if r1 is None or r2 is None or not (r1.mapped and r2.mapped):
            continue
        if r1.rname != r2.rname or r1.reverse == r2.reverse:
            continue
        start = min(r1.pos0, r2.pos0)
        end = max(
            r1.pos0 + reference_span(r1.cigar),
            r2.pos0 + reference_span(r2.cigar),
        )
        if lo <= end - start <= hi:
            n_conc += 1
    return n_conc / len(pair_ids)

"""Recover alignments for all reads from the anchor SAM and cluster table."""

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .align import (
    DEFAULT_SCHEME,
    AlignmentResult,
    min_score,
    smith_waterman,
)
from ._kernels import hamming_codes
from .cluster_engine import (
    CLASS_ANCHOR,
    CLASS_BAD,
    CLASS_MEMBER,
    revcomp_match,
)
from .readio import encode_seq, revcomp_str
from .samio import (
    FLAG_FIRST,
    FLAG_MATE_REVERSE,
    FLAG_MATE_UNMAPPED,
    FLAG_PAIRED,
    FLAG_REVERSE,
    FLAG_SECOND,
    FLAG_SECONDARY,
    FLAG_SUPPLEMENTARY,
    FLAG_UNMAPPED,
    SamRecord,
    cigar_items,
    qname_to_read_id,
    read_sam,
)

SW_TRIGGER_COST = 40  # one gap opening; mismatches cost 6 score points each


@dataclass
class InsertModel:
    mean: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            self.sd = 1.0


@dataclass
class AnchorPlacement:
    anchor_id: int
    rname: str
    pos: int  # 0-based leftmost
    reverse: bool
    mapq: int
    cigar: str
    mapped: bool
    record: SamRecord


def load_genome_fasta(path):
    """Multi-sequence FASTA as an ordered dict of name -> code arrays."""
    genomes = {}
    name = None
    chunks = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith(">"):
                if name is not None:
                    genomes[name] = encode_seq("".join(chunks))
                name = line[1:].split()[0]
                chunks = []
            elif line:
                chunks.append(line)
    if name is not None:
        genomes[name] = encode_seq("".join(chunks))
    if not genomes:
        raise ValueError(f"{path}: no FASTA sequences")
    return genomes


def parse_anchor_sam(sam, table):
    """Map every anchor id in the table to its placement.

    Missing anchors and duplicate primary records are fatal.
    """
    if isinstance(sam, (str, tuple)):
        header, records = read_sam(sam) if isinstance(sam, str) else sam
    else:
        header, records = read_sam(sam)
    placements = {}
    for rec in records:
        if rec.flag & (FLAG_SECONDARY | FLAG_SUPPLEMENTARY):
            continue
        rid = qname_to_read_id(rec.qname, rec.flag)
        if rid in placements:
            raise ValueError(f"duplicate primary SAM record for anchor {rid}")
        placements[rid] = AnchorPlacement(
            anchor_id=rid,
            rname=rec.rname,
            pos=rec.pos0,
            reverse=rec.reverse,
            mapq=rec.mapq,
            cigar=rec.cigar,
            mapped=rec.mapped,
            record=rec,
        )
    missing = [int(i) for i in table.anchor_ids() if int(i) not in placements]
    if missing:
        shown = ", ".join(str(i) for i in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise ValueError(f"anchors missing from SAM: {shown}{more}")
    return header, placements


@dataclass
class _Candidate:
    """A member placement implied by one anchor's mapping."""

    rname: str
    start: int  # 0-based implied leftmost
    g_reverse: bool  # member orientation on the genome
    g_codes: np.ndarray  # member match codes oriented to the genome
    anchor_id: int


def place_member(member_match, shift, member_reverse, placement, genomes):
    """Implied genomic placement of a member given its anchor's mapping.

    Returns (_Candidate, hamming, score) or None when the anchor is unmapped
    or the implied window leaves the chromosome.
    """
    if not placement.mapped:
        return None
    genome = genomes.get(placement.rname)
    if genome is None:
        return None
    L = member_match.shape[0]
    if placement.reverse:
        start = placement.pos - shift
        g_reverse = not member_reverse
    else:
        start = placement.pos + shift
        g_reverse = member_reverse
    if start < 0 or start + L > genome.shape[0]:
        return None
    g_codes = revcomp_match(member_match) if g_reverse else member_match
    h = int(hamming_codes(g_codes, genome[start : start + L]))
    score = 3 * (L - h) - 3 * h
    cand = _Candidate(placement.rname, start, g_reverse, g_codes, placement.anchor_id)
    return cand, h, score


def refine(candidate, h, score, genomes, scheme=DEFAULT_SCHEME):
    """Gap-aware rescoring: run Smith-Waterman over the anchor-implied window
    (+-L bases) when the mismatch cost exceeds one gap opening."""
    L = candidate.g_codes.shape[0]
    if (scheme.match - scheme.mismatch) * h <= SW_TRIGGER_COST:
        return AlignmentResult(
            score=score,
            ref_start=candidate.start,
            ref_end=candidate.start + L,
            strand="-" if candidate.g_reverse else "+",
            cigar=[(L, "M")],
        )
    genome = genomes[candidate.rname]
    lo = max(0, candidate.start - L)
    hi = min(genome.shape[0], candidate.start + 2 * L)
    result = smith_waterman(candidate.g_codes, genome[lo:hi], scheme)
    result.ref_start += lo
    result.ref_end += lo
    result.strand = "-" if candidate.g_reverse else "+"
    return result


def _evaluate(member_match, shift, member_reverse, placement, genomes, scheme):
    placed = place_member(member_match, shift, member_reverse, placement, genomes)
    if placed is None:
        return None
    cand, h, score = placed
    result = refine(cand, h, score, genomes, scheme)
    if not result.mapped:
        return None
    result_rname = cand.rname
    return result, result_rname, cand.anchor_id


def compose_shift(inner_shift, inner_reverse, outer_shift, outer_reverse):
    """Relocate a member's (shift, strand) through an anchor-anchor edge."""
    if outer_reverse:
        return outer_shift - inner_shift, not inner_reverse
    return outer_shift + inner_shift, inner_reverse


def invert_edge(shift, reverse):
    """Edge transform for following an anchor-anchor link backwards."""
    return (shift, True) if reverse else (-shift, False)


class EdgeGraph:
    """Red (member->anchor) and green (anchor->anchor) sub-optimal links."""

    def __init__(self, edges=None):
        self.red = defaultdict(list)
        self.green = defaultdict(list)
        if edges is not None:
            for src, dst, shift, strand in edges.member_edges:
                self.red[src].append((dst, shift, bool(strand)))
            for src, dst, shift, strand in edges.anchor_edges:
                self.green[src].append((dst, shift, bool(strand)))
                inv_shift, inv_rev = invert_edge(shift, bool(strand))
                self.green[dst].append((src, inv_shift, inv_rev))

    def candidate_anchors(self, read_id, anchor_id, shift, reverse):
        """All (anchor, shift, reverse) reachable within two hops.

        The assigned anchor comes first, then red edges, then one green hop
        from each of those anchors.
        """
        out = []
        seen = set()

        def add(a, s, r):
            key = (a, s, r)
            if key not in seen:
                seen.add(key)
                out.append(key)

        first = []
        if anchor_id >= 0:
            first.append((anchor_id, shift, reverse))
        for dst, es, er in self.red.get(read_id, ()):
            first.append((dst, es, er))
        for a, s, r in first:
            add(a, s, r)
        for a, s, r in first:
            for dst, gs, gr in self.green.get(a, ()):
                cs, cr = compose_shift(s, r, gs, gr)
                add(dst, cs, cr)
        return out


def search_suboptimal(
    member_match,
    read_id,
    anchor_id,
    shift,
    member_reverse,
    graph,
    placements,
    genomes,
    scheme=DEFAULT_SCHEME,
):
    """Best-scoring candidate across the assigned anchor and the sub-optimal
    edge anchors (depth <= 2); ties prefer the lower genomic coordinate,
    then the forward strand. Returns (AlignmentResult, rname, anchor_id) or
    None."""
    best = None
    best_key = None
    for a, s, r in graph.candidate_anchors(read_id, anchor_id, shift, member_reverse):
        placement = placements.get(a)
        if placement is None:
            continue
        hit = _evaluate(member_match, s, r, placement, genomes, scheme)
        if hit is None:
            continue
        result, rname, src_anchor = hit
        key = (-result.score, rname, result.ref_start, result.strand == "-")
        if best_key is None or key < best_key:
            best_key = key
            best = (result, rname, src_anchor)
    return best


def finalize(
    read_id,
    qname,
    seq,
    qual,
    best,
    placements,
    anchor_id,
    min_sc,
    paired=False,
):
    """Build the SAM record for a member read (or an unmapped record)."""
    base_flag = 0
    if paired:
        base_flag |= FLAG_PAIRED | (FLAG_SECOND if read_id % 2 else FLAG_FIRST)
    if best is not None:
        result, rname, src_anchor = best
        if result.score >= min_sc:
            mapq = 0
            placement = placements.get(anchor_id)
            if placement is not None and placement.mapped:
                mapq = placement.mapq
            else:
                src = placements.get(src_anchor)
                if src is not None and src.mapped:
                    mapq = src.mapq
            flag = base_flag | (FLAG_REVERSE if result.strand == "-" else 0)
            out_seq = revcomp_str(seq) if result.strand == "-" else seq
            out_qual = qual[::-1] if result.strand == "-" else qual
            return SamRecord(
                qname=qname,
                flag=flag,
                rname=rname,
                pos=result.ref_start + 1,
                mapq=mapq,
                cigar=result.cigar_string(),
                seq=out_seq,
                qual=out_qual,
            )
    return SamRecord(
        qname=qname,
        flag=base_flag | FLAG_UNMAPPED,
        rname="*",
        pos=0,
        mapq=0,
        cigar="*",
        seq=seq,
        qual=qual,
    )


def estimate_insert(placements, min_pairs=1000):
    """Robust insert model from concordantly oriented mapped anchor pairs:
    median insert, 1.4826 x the median absolute deviation (clamped >= 1)."""
    inserts = []
    for rid, p1 in placements.items():
        if rid % 2:
            continue
        p2 = placements.get(rid + 1)
        if p2 is None or not (p1.mapped and p2.mapped):
            continue
        if p1.rname != p2.rname or p1.reverse == p2.reverse:
            continue
        span1 = sum(n for n, op in cigar_items(p1.cigar) if op in "MDN=X")
        span2 = sum(n for n, op in cigar_items(p2.cigar) if op in "MDN=X")
        start = min(p1.pos, p2.pos)
        end = max(p1.pos + span1, p2.pos + span2)
        inserts.append(end - start)
    if len(inserts) < min_pairs:
        raise ValueError(
            f"only {len(inserts)} concordant anchor pairs (need {min_pairs}); "
            "pass --insert-mean/--insert-sd explicitly"
        )
    arr = np.array(inserts, dtype=np.float64)
    med = float(np.median(arr))
    sd = 1.4826 * float(np.median(np.abs(arr - med)))
    return InsertModel(mean=med, sd=max(sd, 1.0))


def _pair_concordant(r1, r2, model):
    if not (r1.mapped and r2.mapped):
        return False
    if r1.rname != r2.rname or r1.reverse == r2.reverse:
        return False
    span1 = sum(n for n, op in cigar_items(r1.cigar) if op in "MDN=X")
    span2 = sum(n for n, op in cigar_items(r2.cigar) if op in "MDN=X")
    start = min(r1.pos0, r2.pos0)
    end = max(r1.pos0 + span1, r2.pos0 + span2)
    return abs((end - start) - model.mean) <= 5 * model.sd


def _rescue_window(kept, model, read_len, genomes):
    genome = genomes.get(kept.rname)
    if genome is None:
        return None
    if kept.reverse:
        implied = kept.pos0 + read_len - model.mean  # mate leftmost, forward
        mate_reverse = False
    else:
        implied = kept.pos0 + model.mean - read_len
        mate_reverse = True
    half = 5 * model.sd + read_len
    lo = int(max(0, implied - half))
    hi = int(min(genome.shape[0], implied + half + read_len))
    if hi - lo < 1:
        return None
    return lo, hi, mate_reverse


def resolve_pair(
    rec1,
    rec2,
    scores,
    match1,
    match2,
    model,
    genomes,
    min_sc,
    scheme=DEFAULT_SCHEME,
    rescuable=(True, True),
):
    """Concordant pairs pass through; discordant or half-mapped pairs get a
    rescue attempt: the other end is Smith-Waterman scanned in the window
    implied by the better end's position and the insert model, and the rescue
    is adopted only when it clears min_score and makes the pair concordant.
    """
    if _pair_concordant(rec1, rec2, model):
        return rec1, rec2
    recs = [rec1, rec2]
    matches = [match1, match2]
    # keep the better end, try to move the other
    order = [0, 1] if scores[0] >= scores[1] else [1, 0]
    for keep in order:
        other = 1 - keep
        kept = recs[keep]
        if not kept.mapped or not rescuable[other]:
            continue
        read_len = matches[other].shape[0]
        win = _rescue_window(kept, model, read_len, genomes)
        if win is None:
            continue
        lo, hi, mate_reverse = win
        g_codes = revcomp_match(matches[other]) if mate_reverse else matches[other]
        genome = genomes[kept.rname]
        result = smith_waterman(g_codes, genome[lo:hi], scheme)
        if not result.mapped or result.score < min_sc:
            continue
        result.ref_start += lo
        old = recs[other]
        base_seq, base_qual = _forward_seq(old)
        flag = old.flag & (FLAG_PAIRED | FLAG_FIRST | FLAG_SECOND)
        if mate_reverse:
            flag |= FLAG_REVERSE
        new = SamRecord(
            qname=old.qname,
            flag=flag,
            rname=kept.rname,
            pos=result.ref_start + 1,
            mapq=kept.mapq,
            cigar=result.cigar_string(),
            seq=revcomp_str(base_seq) if mate_reverse else base_seq,
            qual=base_qual[::-1] if mate_reverse else base_qual,
        )
        if _pair_concordant(kept, new, model):
            recs[other] = new
            return recs[0], recs[1]
    return rec1, rec2


def _forward_seq(rec):
    """Original (as-sequenced) seq/qual of a record."""
    if rec.mapped and rec.reverse:
        return revcomp_str(rec.seq), rec.qual[::-1]
    return rec.seq, rec.qual


def set_mate_fields(r1, r2):
    """Fill RNEXT/PNEXT/TLEN and mate flags for a constructed pair."""
    for a, b in ((r1, r2), (r2, r1)):
        if a.raw is not None:
            continue
        a.flag &= ~(FLAG_MATE_UNMAPPED | FLAG_MATE_REVERSE)
        if not b.mapped:
            a.flag |= FLAG_MATE_UNMAPPED
            a.rnext, a.pnext, a.tlen = "*", 0, 0
            continue
        if b.reverse:
            a.flag |= FLAG_MATE_REVERSE
        a.rnext = "=" if a.mapped and a.rname == b.rname else b.rname
        a.pnext = b.pos
        a.tlen = 0
    if (
        r1.raw is None
        and r2.raw is None
        and r1.mapped
        and r2.mapped
        and r1.rname == r2.rname
    ):
        span1 = sum(n for n, op in cigar_items(r1.cigar) if op in "MDN=X")
        span2 = sum(n for n, op in cigar_items(r2.cigar) if op in "MDN=X")
        start = min(r1.pos0, r2.pos0)
        end = max(r1.pos0 + span1, r2.pos0 + span2)
        tlen = end - start
        first, second = (r1, r2) if r1.pos0 <= r2.pos0 else (r2, r1)
        if r1.pos0 == r2.pos0:
            first, second = r1, r2
        first.tlen = tlen
        second.tlen = -tlen


def map_all(
    library,
    table,
    edges,
    anchor_sam,
    genomes,
    insert_model=None,
    scheme=DEFAULT_SCHEME,
    threads=1,
):
    """Produce the full output SAM: anchors verbatim, members recovered from
    their anchors, bad reads unmapped; paired ends resolved at the end.

    Returns (header_lines, records ordered by read id).
    """
    header, placements = parse_anchor_sam(anchor_sam, table)
    graph = EdgeGraph(edges)
    L = table.read_len
    min_sc = min_score(L)
    paired = table.paired
    if paired and insert_model is None:
        insert_model = estimate_insert(placements)

    def out_qname(i):
        return f"treq:{i & ~1}" if paired else f"treq:{i}"

    n = table.n_reads
    records = [None] * n
    scores = np.full(n, -(10**9), dtype=np.int64)
    match = library.match

    member_ids = table.member_ids()

    def work(chunk):
        for i in chunk:
            i = int(i)
            anchor_id = int(table.anchor[i])
            best = search_suboptimal(
                match[i],
                i,
                anchor_id,
                int(table.shift[i]),
                bool(table.strand[i]),
                graph,
                placements,
                genomes,
                scheme,
            )
            rec = finalize(
                i,
                out_qname(i),
                library.seqs[i],
                library.quals[i],
                best,
                placements,
                anchor_id,
                min_sc,
                paired,
            )
            records[i] = rec
            if best is not None:
                scores[i] = best[0].score

    if threads > 1 and len(member_ids) > 1:
        chunks = np.array_split(member_ids, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, [c for c in chunks if len(c)]))
    else:
        work(member_ids)

    for i in range(n):
        cls = table.cls[i]
        if cls == CLASS_ANCHOR:
            records[i] = placements[i].record
        elif cls == CLASS_BAD:
            flag = FLAG_UNMAPPED
            if paired:
                flag |= FLAG_PAIRED | (FLAG_SECOND if i % 2 else FLAG_FIRST)
            records[i] = SamRecord(
                qname=out_qname(i),
                flag=flag,
                rname="*",
                pos=0,
                mapq=0,
                cigar="*",
                seq=library.seqs[i],
                qual=library.quals[i],
            )

    if paired:
        for t in range(n // 2):
            i1, i2 = 2 * t, 2 * t + 1
            if table.cls[i1] == CLASS_ANCHOR:
                continue  # anchor pairs pass through verbatim
            rescuable = (
                table.cls[i1] == CLASS_MEMBER,
                table.cls[i2] == CLASS_MEMBER,
            )
            if any(rescuable):
                r1, r2 = resolve_pair(
                    records[i1],
                    records[i2],
                    (scores[i1], scores[i2]),
                    match[i1],
                    match[i2],
                    insert_model,
                    genomes,
                    min_sc,
                    scheme,
                    rescuable,
                )
                records[i1], records[i2] = r1, r2
            set_mate_fields(records[i1], records[i2])

    out_header = list(header)
    out_header.append("@PG\tID:treq-map\tPN:treq-map")
    return out_header, records

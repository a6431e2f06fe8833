"""Greedy two-phase read clustering: first-fit assignment, optimal
reassignment, and sub-optimal edge recording."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .kmer_index import DEFAULT_CAP, DEFAULT_K, PostingArray, indexed_positions
from .readio import AMBIG, classify_bad_read

CLASS_ANCHOR = 0
CLASS_MEMBER = 1
CLASS_BAD = 2
CLASS_CHARS = "AMB"

STRAND_CHARS = "+-"

_EPS = 1e-9


def int_ceil(x):
    """Ceiling that forgives float noise just above an integer."""
    return math.ceil(x - _EPS)


def int_floor(x):
    return math.floor(x + _EPS)


@dataclass
class ClusterParams:
    """Thresholds and caps controlling the clustering."""

    alpha: float | None = None  # None -> max(0.5, 31/L)
    beta: float = 0.95
    beta_prime: float = 0.8
    k: int = DEFAULT_K
    f: int = 10
    s_m: int = 16
    s_a: int = 256
    cap: int = DEFAULT_CAP
    threads: int = 1

    def __post_init__(self):
        if not (0 < self.beta_prime <= self.beta <= 1):
            raise ValueError("need 0 < beta_prime <= beta <= 1")
        if not 8 <= self.k <= 16:
            raise ValueError(f"k={self.k} outside the supported range [8, 16]")

    def resolve(self, read_len):
        alpha = self.alpha
        if alpha is None:
            alpha = max(0.5, 31.0 / read_len)
        min_overlap = int_ceil(alpha * read_len)
        if min_overlap < 31:
            raise ValueError(
                f"alpha={alpha} gives minimum overlap {min_overlap} < 31"
            )
        return _Resolved(self, alpha, read_len, min_overlap)


class _Resolved:
    """Parameters specialised to one read length, with integer thresholds."""

    def __init__(self, params, alpha, read_len, min_overlap):
        self.params = params
        self.alpha = alpha
        self.L = read_len
        self.k = params.k
        self.min_overlap = min_overlap
        self.min_overlap_half = int_ceil(alpha * read_len / 2)
        ls = np.arange(read_len + 1)
        self.beta_min = np.array(
            [int_ceil(params.beta * l) for l in ls], dtype=np.int32
        )
        self.betap_min = np.array(
            [int_ceil(params.beta_prime * l) for l in ls], dtype=np.int32
        )
        self.index_positions = indexed_positions(read_len, self.k, min_overlap)
        self.phase2_positions = phase2_seed_positions(read_len, self.k)


def phase2_seed_positions(read_len, k):
    """Equally spaced k-mer starts for the second-phase budgeted scan."""
    budget = (read_len - k + 1) // 4
    if budget <= 1:
        return np.array([0], dtype=np.int64)
    span = read_len - k
    return np.array(
        sorted({int(i * span / (budget - 1) + 0.5) for i in range(budget)}),
        dtype=np.int64,
    )


@dataclass
class Assignment:
    read_id: int
    cls: str  # 'A', 'M' or 'B'
    anchor_id: int
    shift: int
    strand: str
    overlap_len: int
    matches: int


@dataclass
class SubOptimalEdges:
    """(src, dst_anchor, shift, strand) tuples below the strict threshold."""

    member_edges: list = field(default_factory=list)
    anchor_edges: list = field(default_factory=list)


class ClusterIndex:
    """Anchor store plus posting array, grown as phase 1 creates anchors."""

    def __init__(self, read_len, resolved, cap):
        self.resolved = resolved
        self.read_len = read_len
        self.array = PostingArray(resolved.k, cap)
        self.anchors_match = np.empty((1024, read_len), dtype=np.uint8)
        self.ord2id = []
        self.id2ord = {}
        self.phase1_anchor_edges = []

    @property
    def n_anchors(self):
        return len(self.ord2id)

    def add_anchor(self, read_id, match_codes):
        aord = len(self.ord2id)
        if aord >= self.anchors_match.shape[0]:
            grown = np.empty(
                (2 * self.anchors_match.shape[0], self.read_len), dtype=np.uint8
            )
            grown[:aord] = self.anchors_match[:aord]
            self.anchors_match = grown
        self.anchors_match[aord] = match_codes
        self.ord2id.append(read_id)
        self.id2ord[read_id] = aord
        self.array.insert_anchor(aord, match_codes, self.resolved.index_positions)
        return aord


class ClusterTable:
    """Per-read classification produced by the clustering phases."""

    def __init__(self, n_reads, read_len, paired, params):
        self.n_reads = n_reads
        self.read_len = read_len
        self.paired = paired
        self.params = params
        self.cls = np.full(n_reads, CLASS_BAD, dtype=np.uint8)
        self.anchor = np.full(n_reads, -1, dtype=np.int64)
        self.shift = np.zeros(n_reads, dtype=np.int32)
        self.strand = np.zeros(n_reads, dtype=np.uint8)
        self.olen = np.full(n_reads, -1, dtype=np.int32)
        self.matches = np.full(n_reads, -1, dtype=np.int32)
        self.forced = np.zeros(n_reads, dtype=bool)
        self.index = None  # ClusterIndex, set by the clustering entry points

    def set_anchor(self, i):
        self.cls[i] = CLASS_ANCHOR
        self.anchor[i] = i
        self.shift[i] = 0
        self.strand[i] = 0
        self.olen[i] = self.read_len
        self.matches[i] = self.read_len

    def set_member(self, i, anchor_id, shift, strand, olen, matches, forced=False):
        self.cls[i] = CLASS_MEMBER
        self.anchor[i] = anchor_id
        self.shift[i] = shift
        self.strand[i] = strand
        self.olen[i] = olen
        self.matches[i] = matches
        self.forced[i] = forced

    def set_bad(self, i):
        self.cls[i] = CLASS_BAD
        self.anchor[i] = -1
        self.shift[i] = -1
        self.strand[i] = 0
        self.olen[i] = -1
        self.matches[i] = -1

    def assignment(self, i):
        cls = CLASS_CHARS[self.cls[i]]
        return Assignment(
            i,
            cls,
            int(self.anchor[i]),
            int(self.shift[i]),
            STRAND_CHARS[self.strand[i]],
            int(self.olen[i]),
            int(self.matches[i]),
        )

    def class_counts(self):
        n_a = int((self.cls == CLASS_ANCHOR).sum())
        n_m = int((self.cls == CLASS_MEMBER).sum())
        n_b = int((self.cls == CLASS_BAD).sum())
        return n_a, n_m, n_b

    def anchor_ids(self):
        return np.flatnonzero(self.cls == CLASS_ANCHOR)

    def member_ids(self):
        return np.flatnonzero(self.cls == CLASS_MEMBER)


def revcomp_match(match):
    """Reverse complement of match codes; bad bases (4) stay bad."""
    out = match[::-1].copy()
    good = out < AMBIG
    out[good] = 3 - out[good]
    return out


def overlap_similarity(a, b, shift, strand="+"):
    """(l, matches) for a fixed-shift overlap of b (oriented) against a.

    `a` and `b` are match-code arrays or Read objects; returns None when the
    shift leaves no overlap. Bad bases count as mismatches; reverse strand
    compares against the reverse complement of b.
    """
    a = _as_match(a)
    b = _as_match(b)
    if abs(shift) >= a.shape[0]:
        return None
    if strand in ("-", 1):
        b = revcomp_match(b)
    l, m = _kernels.overlap_matches(a, b, shift)
    return int(l), int(m)


def _as_match(x):
    if hasattr(x, "bad_mask"):
        return np.where(x.bad_mask, np.uint8(AMBIG), x.seq)
    return np.asarray(x, dtype=np.uint8)


class _ScanBuffers:
    def __init__(self, s_a):
        self.edge_anchor = np.empty(max(s_a, 1), dtype=np.int64)
        self.edge_shift = np.empty(max(s_a, 1), dtype=np.int32)
        cap = 16384
        self.cand_anchor = np.empty(cap, dtype=np.int64)
        self.cand_shift = np.empty(cap, dtype=np.int32)
        self.cand_l = np.empty(cap, dtype=np.int32)
        self.cand_matches = np.empty(cap, dtype=np.int32)


def _scan_read(q_fwd, index, res, buffers):
    """Run the phase-1 first-fit scan on both orientations of one read.

    Returns (aord, shift, strand, l, matches, n_edges, n_fwd_edges); aord is
    -1 when no anchor accepted the read.
    """
    arr = index.array
    args = (
        res.k,
        res.min_overlap,
        res.beta_min,
        res.betap_min,
        index.anchors_match,
        arr.code2slot,
        arr.slot_head,
        arr.post_anchor,
        arr.post_pos,
        arr.post_next,
        buffers.edge_anchor,
        buffers.edge_shift,
    )
    edge_cap = res.params.s_a
    aord, shift, l, m, n_e = _kernels.scan_orientation(
        q_fwd, *args, 0, edge_cap
    )
    if aord >= 0:
        return aord, shift, 0, l, m, n_e, n_e
    n_fwd = n_e
    q_rev = revcomp_match(q_fwd)
    aord, shift, l, m, n_e = _kernels.scan_orientation(
        q_rev, *args, n_fwd, edge_cap
    )
    if aord >= 0:
        return aord, shift, 1, l, m, n_e, n_fwd
    return -1, 0, 0, 0, 0, n_e, n_fwd


def try_assign(read, index, params=None, resolved=None):
    """First-fit phase-1 membership test for one read against a built index.

    Returns an Assignment (class Member) or None.
    """
    res = resolved if resolved is not None else params.resolve(index.read_len)
    q = _as_match(read)
    buffers = _ScanBuffers(res.params.s_a)
    aord, shift, strand, l, m, _, _ = _scan_read(q, index, res, buffers)
    if aord < 0:
        return None
    rid = getattr(read, "id", -1)
    return Assignment(
        rid, "M", index.ord2id[aord], int(shift), STRAND_CHARS[strand], l, m
    )


def _record_anchor_edges(index, read_id, buffers, n_edges, n_fwd):
    edges = []
    for e in range(n_edges):
        strand = 0 if e < n_fwd else 1
        edges.append(
            (
                read_id,
                index.ord2id[int(buffers.edge_anchor[e])],
                int(buffers.edge_shift[e]),
                strand,
            )
        )
    index.phase1_anchor_edges.extend(edges[: index.resolved.params.s_a])


def cluster_single_end(library, params):
    """Phase-1 greedy clustering of a single-end library (sequential)."""
    res = params.resolve(library.read_len)
    table = ClusterTable(library.n_reads, library.read_len, False, params)
    index = ClusterIndex(library.read_len, res, params.cap)
    table.index = index
    table._lib_match = library.match
    buffers = _ScanBuffers(params.s_a)
    match = library.match
    for i in range(library.n_reads):
        if classify_bad_read(library.bad[i], params.k):
            table.set_bad(i)
            continue
        aord, shift, strand, l, m, n_e, n_fwd = _scan_read(
            match[i], index, res, buffers
        )
        if aord >= 0:
            table.set_member(i, index.ord2id[aord], shift, strand, l, m)
        else:
            table.set_anchor(i)
            _record_anchor_edges(index, i, buffers, n_e, n_fwd)
            index.add_anchor(i, match[i])
    return table


def _relaxed_overlap(q_match, anchor_row, min_l, beta_min):
    """Search all shifts/strands for a relaxed-length qualifying overlap.

    Longest overlaps are tried first (positive shift before negative), the
    forward orientation before the reverse complement.
    """
    L = q_match.shape[0]
    for strand in (0, 1):
        q = q_match if strand == 0 else revcomp_match(q_match)
        for dl in range(0, L - min_l + 1):
            shifts = (0,) if dl == 0 else (dl, -dl)
            for shift in shifts:
                l, m = _kernels.overlap_matches(anchor_row, q, shift)
                if m >= beta_min[l]:
                    return shift, strand, int(l), int(m)
    return None


def cluster_paired_end(library, params):
    """Phase-1 greedy clustering of a paired-end library.

    Pairs are processed atomically; a pair never ends up with one Anchor end
    and one Member end. Mixed outcomes are resolved in order: a bad mate of an
    anchor is forced to anchor; an anchor end is demoted to member of its
    mate-anchor's partner when a relaxed half-length overlap qualifies; else
    the member end is forced to anchor.
    """
    if not library.meta.paired or library.n_reads % 2:
        raise ValueError("paired clustering needs an interleaved paired library")
    res = params.resolve(library.read_len)
    table = ClusterTable(library.n_reads, library.read_len, True, params)
    index = ClusterIndex(library.read_len, res, params.cap)
    table.index = index
    table._lib_match = library.match
    buffers = [_ScanBuffers(params.s_a), _ScanBuffers(params.s_a)]
    match = library.match

    def make_anchor(i, scan):
        table.set_anchor(i)
        if scan is not None:
            _, _, _, _, _, n_e, n_fwd = scan
            _record_anchor_edges(index, i, buffers[i % 2], n_e, n_fwd)
        index.add_anchor(i, match[i])

    for t in range(library.n_reads // 2):
        ids = (2 * t, 2 * t + 1)
        bad = [classify_bad_read(library.bad[i], params.k) for i in ids]
        scans = [None, None]
        prelim = []
        for e, i in enumerate(ids):
            if bad[e]:
                prelim.append("B")
                continue
            scans[e] = _scan_read(match[i], index, res, buffers[e])
            prelim.append("M" if scans[e][0] >= 0 else "A")

        if prelim == ["B", "B"]:
            table.set_bad(ids[0])
            table.set_bad(ids[1])
            continue
        if "B" in prelim:
            other = prelim[1 - prelim.index("B")]
            if other == "A":
                # a bad mate of an anchor is itself forced to anchor
                for e, i in enumerate(ids):
                    make_anchor(i, scans[e])
            else:  # (M, B): no anchor/member conflict, keep both
                for e, i in enumerate(ids):
                    if prelim[e] == "B":
                        table.set_bad(i)
                    else:
                        aord, shift, strand, l, m, _, _ = scans[e]
                        table.set_member(
                            i, index.ord2id[aord], shift, strand, l, m
                        )
            continue
        if prelim == ["M", "M"]:
            for e, i in enumerate(ids):
                aord, shift, strand, l, m, _, _ = scans[e]
                table.set_member(i, index.ord2id[aord], shift, strand, l, m)
            continue
        if prelim == ["A", "A"]:
            for e, i in enumerate(ids):
                make_anchor(i, scans[e])
            continue

        # mixed anchor/member pair
        ea = prelim.index("A")
        em = 1 - ea
        ia, im = ids[ea], ids[em]
        aord, shift, strand, l, m, _, _ = scans[em]
        member_anchor = index.ord2id[aord]
        mate_anchor = member_anchor ^ 1
        hit = None
        mate_ord = index.id2ord.get(mate_anchor)
        if mate_ord is not None:
            hit = _relaxed_overlap(
                match[ia],
                index.anchors_match[mate_ord],
                res.min_overlap_half,
                res.beta_min,
            )
        if hit is not None:
            fshift, fstrand, fl, fm = hit
            table.set_member(
                ia, mate_anchor, fshift, fstrand, fl, fm, forced=True
            )
            table.set_member(im, member_anchor, shift, strand, l, m)
        else:
            # the member end is forced to anchor; both ends become anchors
            for e, i in enumerate(ids):
                make_anchor(i, scans[e])
    return table


def _budget_scan(q_fwd, index, res, buffers, seeds):
    """Collect phase-2 candidates for both orientations of one read.

    Returns (n_candidates, n_forward) into the shared candidate buffers.
    """
    arr = index.array
    args = (
        res.k,
        seeds,
        res.min_overlap,
        res.betap_min,
        index.anchors_match,
        arr.code2slot,
        arr.slot_head,
        arr.post_anchor,
        arr.post_pos,
        arr.post_next,
        buffers.cand_anchor,
        buffers.cand_shift,
        buffers.cand_l,
        buffers.cand_matches,
    )
    n_fwd = _kernels.scan_budgeted(q_fwd, *args, 0)
    n_all = _kernels.scan_budgeted(revcomp_match(q_fwd), *args, n_fwd)
    return n_all, n_fwd


def _parallel_over(ids, worker, threads):
    if threads <= 1 or len(ids) < 2:
        worker(ids)
        return
    chunks = np.array_split(ids, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(worker, [c for c in chunks if len(c)]))


def reassign_optimal(table, index=None, params=None):
    """Phase 2: move members to the qualifying anchor with the longest
    overlap, scanning a budget of equally spaced k-mer seeds.

    Ties keep the current anchor, otherwise prefer the lowest anchor id.
    Forced paired-end members are exempt. Returns the table, updated in
    place.
    """
    index = index if index is not None else table.index
    params = params if params is not None else table.params
    res = index.resolved
    members = [i for i in table.member_ids() if not table.forced[i]]
    lib_match = table._lib_match

    def work(chunk):
        buffers = _ScanBuffers(params.s_a)
        for i in chunk:
            n, n_fwd = _budget_scan(
                lib_match[i], index, res, buffers, res.phase2_positions
            )
            cur_l = int(table.olen[i])
            best = None  # (l, aord, shift, strand)
            for c in range(n):
                l = int(buffers.cand_l[c])
                if l <= cur_l:
                    continue
                if buffers.cand_matches[c] < res.beta_min[l]:
                    continue
                cand = (
                    -l,
                    int(buffers.cand_anchor[c]),
                    int(buffers.cand_shift[c]),
                    0 if c < n_fwd else 1,
                    int(buffers.cand_matches[c]),
                )
                if best is None or cand[:4] < best[:4]:
                    best = cand
            if best is not None:
                neg_l, aord, shift, strand, m = best
                table.set_member(
                    i, index.ord2id[aord], shift, strand, -neg_l, m
                )

    _parallel_over(np.array(members, dtype=np.int64), work, params.threads)
    return table


def record_suboptimal(table, index=None, params=None):
    """Collect sub-optimal edges: per member up to s_m extra anchors at the
    relaxed similarity floor (phase-2 scan), per anchor the similar anchors
    seen during phase 1 (up to s_a)."""
    index = index if index is not None else table.index
    params = params if params is not None else table.params
    res = index.resolved
    members = table.member_ids()
    lib_match = table._lib_match
    results = {}

    def work(chunk):
        buffers = _ScanBuffers(params.s_a)
        for i in chunk:
            n, n_fwd = _budget_scan(
                lib_match[i], index, res, buffers, res.phase2_positions
            )
            assigned = int(table.anchor[i])
            out = []
            for c in range(n):
                dst = index.ord2id[int(buffers.cand_anchor[c])]
                if dst == assigned:
                    continue
                out.append(
                    (
                        int(i),
                        dst,
                        int(buffers.cand_shift[c]),
                        0 if c < n_fwd else 1,
                    )
                )
                if len(out) >= params.s_m:
                    break
            if out:
                results[int(i)] = out

    _parallel_over(np.asarray(members, dtype=np.int64), work, params.threads)
    edges = SubOptimalEdges()
    for i in sorted(results):
        edges.member_edges.extend(results[i])
    per_anchor = {}
    for src, dst, shift, strand in index.phase1_anchor_edges:
        if table.cls[src] != CLASS_ANCHOR:
            continue
        lst = per_anchor.setdefault(src, [])
        if len(lst) < params.s_a:
            lst.append((src, dst, shift, strand))
    for src in sorted(per_anchor):
        edges.anchor_edges.extend(per_anchor[src])
    return edges


# --- persistence -----------------------------------------------------------

def write_clusters(table, path, mode=None):
    mode = mode or ("PE" if table.paired else "SE")
    res = table.params.resolve(table.read_len)
    with open(path, "w") as fh:
        fh.write(
            f"#treq-cg v1 k={table.params.k} alpha={res.alpha:g} "
            f"beta={table.params.beta:g} mode={mode} "
            f"n_reads={table.n_reads} read_len={table.read_len}\n"
        )
        for i in range(table.n_reads):
            cls = CLASS_CHARS[table.cls[i]]
            fh.write(
                f"{i}\t{cls}\t{table.anchor[i]}\t{table.shift[i]}\t"
                f"{STRAND_CHARS[table.strand[i]]}\t{table.olen[i]}\t"
                f"{table.matches[i]}\n"
            )


def read_clusters(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#treq-cg v1 "):
            raise ValueError(f"{path}: not a cluster table")
        kv = dict(part.split("=", 1) for part in header.split()[2:])
        params = ClusterParams(
            alpha=float(kv["alpha"]), beta=float(kv["beta"]), k=int(kv["k"])
        )
        n = int(kv["n_reads"])
        table = ClusterTable(n, int(kv["read_len"]), kv["mode"] == "PE", params)
        for line in fh:
            parts = line.split()
            i = int(parts[0])
            table.cls[i] = CLASS_CHARS.index(parts[1])
            table.anchor[i] = int(parts[2])
            table.shift[i] = int(parts[3])
            table.strand[i] = STRAND_CHARS.index(parts[4])
            table.olen[i] = int(parts[5])
            table.matches[i] = int(parts[6])
    return table


def write_edges(edges, path):
    with open(path, "w") as fh:
        for kind, rows in (("M", edges.member_edges), ("A", edges.anchor_edges)):
            for src, dst, shift, strand in rows:
                fh.write(
                    f"{kind}\t{src}\t{dst}\t{shift}\t{STRAND_CHARS[strand]}\n"
                )


def read_edges(path):
    edges = SubOptimalEdges()
    with open(path) as fh:
        for line in fh:
            kind, src, dst, shift, strand = line.split()
            row = (int(src), int(dst), int(shift), STRAND_CHARS.index(strand))
            if kind == "M":
                edges.member_edges.append(row)
            else:
                edges.anchor_edges.append(row)
    return edges

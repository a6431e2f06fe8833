"""Numba kernels for the clustering scan and local alignment.

All kernels operate on uint8 base-code arrays where 0..3 are A,C,G,T and 4
marks a bad/ambiguous base that never matches anything.
"""

import numba
import numpy as np
from numba import njit
from numba.typed import Dict

INT64 = numba.int64

NEG_INF = -(10**9)


def new_code_dict():
    return Dict.empty(key_type=numba.int64, value_type=numba.int64)


@njit(cache=True, nogil=True)
def kmer_codes(match, k):
    """Rolling 2k-bit codes for every window; -1 where a window has a bad base."""
    n = match.shape[0] - k + 1
    out = np.empty(n, dtype=np.int64)
    if n <= 0:
        return out[:0]
    mask = np.int64(1) << np.int64(2 * k)
    code = np.int64(0)
    last_bad = -1
    for j in range(match.shape[0]):
        b = match[j]
        if b > 3:
            last_bad = j
            code = (code << 2) % mask
        else:
            code = ((code << 2) | np.int64(b)) % mask
        p = j - k + 1
        if p >= 0:
            out[p] = code if last_bad < p else -1
    return out


@njit(cache=True, nogil=True)
def insert_postings(
    aord,
    match,
    k,
    positions,
    code2slot,
    slot_head,
    slot_tail,
    slot_len,
    post_anchor,
    post_pos,
    post_next,
    counters,
    cap,
):
    """Append (anchor, position) postings for the given window starts."""
    codes = kmer_codes(match, k)
    for pi in range(positions.shape[0]):
        p = positions[pi]
        c = codes[p]
        if c < 0:
            continue
        if c in code2slot:
            slot = code2slot[c]
        else:
            slot = counters[0]
            counters[0] += 1
            code2slot[c] = slot
            slot_head[slot] = -1
            slot_tail[slot] = -1
            slot_len[slot] = 0
        if slot_len[slot] >= cap:
            continue
        idx = counters[1]
        counters[1] += 1
        post_anchor[idx] = aord
        post_pos[idx] = p
        post_next[idx] = -1
        tail = slot_tail[slot]
        if tail < 0:
            slot_head[slot] = idx
        else:
            post_next[tail] = idx
        slot_tail[slot] = idx
        slot_len[slot] += 1


@njit(cache=True, nogil=True)
def overlap_matches(anchor_row, q_match, shift):
    """(l, matches) for a fixed-shift overlap; bad bases count as mismatches."""
    L = q_match.shape[0]
    l = L - abs(shift)
    if shift >= 0:
        a_ofs = shift
        q_ofs = 0
    else:
        a_ofs = 0
        q_ofs = -shift
    m = 0
    for t in range(l):
        av = anchor_row[a_ofs + t]
        if av < 4 and av == q_match[q_ofs + t]:
            m += 1
    return l, m


@njit(cache=True, nogil=True)
def scan_orientation(
    q_match,
    k,
    min_overlap,
    beta_min,
    betap_min,
    anchors,
    code2slot,
    slot_head,
    post_anchor,
    post_pos,
    post_next,
    edge_anchor,
    edge_shift,
    n_edges_in,
    edge_cap,
):
    """Greedy first-fit scan of one read orientation against the index.

    Walks query k-mers left to right and posting lists in insertion order; a
    candidate (anchor, shift) is evaluated once it has been seen through two
    distinct shared k-mers. Returns (anchor_ord, shift, l, matches, n_edges);
    anchor_ord is -1 when no candidate passed. Failed evaluations that still
    clear the relaxed similarity floor are appended to the edge buffers.
    """
    L = q_match.shape[0]
    codes = kmer_codes(q_match, k)
    counts = Dict.empty(key_type=numba.int64, value_type=numba.int64)
    n_edges = n_edges_in
    for qpos in range(codes.shape[0]):
        c = codes[qpos]
        if c < 0:
            continue
        if c not in code2slot:
            continue
        slot = code2slot[c]
        node = slot_head[slot]
        while node >= 0:
            nxt = post_next[node]
            aord = post_anchor[node]
            shift = int(post_pos[node]) - qpos
            l = L - abs(shift)
            if l >= min_overlap:
                key = INT64(aord) * 2048 + INT64(shift + 1024)
                cnt = counts[key] if key in counts else 0
                if cnt == 0:
                    counts[key] = 1
                elif cnt == 1:
                    counts[key] = 2
                    _, m = overlap_matches(anchors[aord], q_match, shift)
                    if m >= beta_min[l]:
                        return aord, shift, l, m, n_edges
                    if m >= betap_min[l] and n_edges < edge_cap:
                        edge_anchor[n_edges] = aord
                        edge_shift[n_edges] = shift
                        n_edges += 1
            node = nxt
    return -1, 0, 0, 0, n_edges


@njit(cache=True, nogil=True)
def scan_budgeted(
    q_match,
    k,
    seed_positions,
    min_overlap,
    betap_min,
    anchors,
    code2slot,
    slot_head,
    post_anchor,
    post_pos,
    post_next,
    cand_anchor,
    cand_shift,
    cand_l,
    cand_matches,
    n_in,
):
    """Second-phase scan over a budget of equally spaced k-mer seeds.

    Every distinct (anchor, shift) candidate reaching the relaxed similarity
    floor is recorded; no first-fit halt. Returns the candidate count.
    """
    L = q_match.shape[0]
    codes = kmer_codes(q_match, k)
    seen = Dict.empty(key_type=numba.int64, value_type=numba.int64)
    n = n_in
    cap = cand_anchor.shape[0]
    for si in range(seed_positions.shape[0]):
        qpos = seed_positions[si]
        c = codes[qpos]
        if c < 0:
            continue
        if c not in code2slot:
            continue
        slot = code2slot[c]
        node = slot_head[slot]
        while node >= 0:
            nxt = post_next[node]
            aord = post_anchor[node]
            shift = int(post_pos[node]) - qpos
            l = L - abs(shift)
            if l >= min_overlap:
                key = INT64(aord) * 2048 + INT64(shift + 1024)
                if key not in seen:
                    seen[key] = 1
                    _, m = overlap_matches(anchors[aord], q_match, shift)
                    if m >= betap_min[l] and n < cap:
                        cand_anchor[n] = aord
                        cand_shift[n] = shift
                        cand_l[n] = l
                        cand_matches[n] = m
                        n += 1
            node = nxt
    return n


@njit(cache=True, nogil=True)
def hamming_codes(a, b):
    """Count of differing positions; any bad/ambiguous base differs."""
    h = 0
    for t in range(a.shape[0]):
        av = a[t]
        if av > 3 or av != b[t]:
            h += 1
    return h


@njit(cache=True, nogil=True)
def sw_kernel(q, w, match, mismatch, gap_open, gap_ext, steps):
    """Smith-Waterman with affine gaps (first gap base costs gap_open alone).

    Traceback tie order: diagonal, then query-consuming gap, then
    reference-consuming gap; the best cell is the first maximum in row-major
    order. `steps` receives ops (0=M, 1=I, 2=D) in reverse path order.
    Returns (score, q_start, q_end, w_start, w_end, n_steps).
    """
    n = q.shape[0]
    m = w.shape[0]
    H = np.zeros((n + 1, m + 1), dtype=np.int32)
    E = np.full((n + 1, m + 1), NEG_INF, dtype=np.int32)
    F = np.full((n + 1, m + 1), NEG_INF, dtype=np.int32)
    dirH = np.zeros((n + 1, m + 1), dtype=np.uint8)
    dirE = np.zeros((n + 1, m + 1), dtype=np.uint8)
    dirF = np.zeros((n + 1, m + 1), dtype=np.uint8)
    best = 0
    bi = 0
    bj = 0
    for i in range(1, n + 1):
        qi = q[i - 1]
        for j in range(1, m + 1):
            e_open = H[i, j - 1] - gap_open
            e_ext = E[i, j - 1] - gap_ext
            if e_ext > e_open:
                E[i, j] = e_ext
                dirE[i, j] = 1
            else:
                E[i, j] = e_open
                dirE[i, j] = 0
            f_open = H[i - 1, j] - gap_open
            f_ext = F[i - 1, j] - gap_ext
            if f_ext > f_open:
                F[i, j] = f_ext
                dirF[i, j] = 1
            else:
                F[i, j] = f_open
                dirF[i, j] = 0
            wj = w[j - 1]
            if qi < 4 and qi == wj:
                sub = match
            else:
                sub = mismatch
            diag = H[i - 1, j - 1] + sub
            h = diag
            d = 1
            if F[i, j] > h:
                h = F[i, j]
                d = 2
            if E[i, j] > h:
                h = E[i, j]
                d = 3
            if h <= 0:
                h = 0
                d = 0
            H[i, j] = h
            dirH[i, j] = d
            if h > best:
                best = h
                bi = i
                bj = j
    # traceback
    i = bi
    j = bj
    ns = 0
    state = 0
    while True:
        if state == 0:
            d = dirH[i, j]
            if d == 0:
                break
            if d == 1:
                steps[ns] = 0
                ns += 1
                i -= 1
                j -= 1
            elif d == 2:
                state = 2
            else:
                state = 3
        elif state == 2:
            d = dirF[i, j]
            steps[ns] = 1
            ns += 1
            i -= 1
            if d == 0:
                state = 0
        else:
            d = dirE[i, j]
            steps[ns] = 2
            ns += 1
            j -= 1
            if d == 0:
                state = 0
    return best, i, bi, j, bj, ns

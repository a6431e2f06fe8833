"""2k-bit k-mer codes and the capped posting-list index over anchor reads."""

import numpy as np

from . import _kernels
from .readio import AMBIG, encode_seq

DEFAULT_K = 15
DEFAULT_CAP = 256
UNCAPPED = 1 << 62


def kmer_code(window, k=None):
    """Radix-4 code of a k-base window (A=0,C=1,G=2,T=3, MSB first).

    Returns None when any base is bad/ambiguous. `window` may be a string or
    a code array.
    """
    codes = encode_seq(window) if isinstance(window, str) else np.asarray(window)
    if k is not None and codes.shape[0] != k:
        raise ValueError(f"window length {codes.shape[0]} != k={k}")
    if (codes >= AMBIG).any():
        return None
    value = 0
    for c in codes:
        value = (value << 2) | int(c)
    return value


def indexed_positions(read_len, k, min_overlap):
    """Window starts wholly inside the length-min_overlap prefix or suffix."""
    prefix = range(0, min_overlap - k + 1)
    suffix = range(max(0, read_len - min_overlap), read_len - k + 1)
    return np.array(sorted(set(prefix) | set(suffix)), dtype=np.int64)


class PostingArray:
    """Capped posting lists mapping each k-mer code to anchor occurrences.

    The conceptual address space has 4^k heads; occupied codes are held in a
    hash map with postings in per-list linked order (anchor insertion order,
    positions ascending within an anchor). Lists at the cap silently drop
    further insertions.
    """

    def __init__(self, k=DEFAULT_K, cap=DEFAULT_CAP):
        if not 8 <= k <= 16:
            raise ValueError(f"k={k} outside the supported range [8, 16]")
        self.k = k
        self.cap = UNCAPPED if cap is None else cap
        self.code2slot = _kernels.new_code_dict()
        n0 = 1 << 16
        self.slot_head = np.empty(n0, dtype=np.int64)
        self.slot_tail = np.empty(n0, dtype=np.int64)
        self.slot_len = np.empty(n0, dtype=np.int32)
        self.post_anchor = np.empty(n0, dtype=np.int32)
        self.post_pos = np.empty(n0, dtype=np.int16)
        self.post_next = np.empty(n0, dtype=np.int64)
        self.counters = np.zeros(2, dtype=np.int64)

    @property
    def n_slots(self):
        return int(self.counters[0])

    @property
    def n_postings(self):
        return int(self.counters[1])

    def _ensure(self, new_slots, new_posts):
        need = self.counters[0] + new_slots
        if need > self.slot_head.shape[0]:
            cap = max(need, 2 * self.slot_head.shape[0])
            for name in ("slot_head", "slot_tail", "slot_len"):
                old = getattr(self, name)
                arr = np.empty(int(cap), dtype=old.dtype)
                arr[: old.shape[0]] = old
                setattr(self, name, arr)
        need = self.counters[1] + new_posts
        if need > self.post_anchor.shape[0]:
            cap = max(need, 2 * self.post_anchor.shape[0])
            for name in ("post_anchor", "post_pos", "post_next"):
                old = getattr(self, name)
                arr = np.empty(int(cap), dtype=old.dtype)
                arr[: old.shape[0]] = old
                setattr(self, name, arr)

    def insert_anchor(self, anchor_ord, match_codes, positions):
        """Insert postings for one anchor at the given window starts."""
        positions = np.asarray(positions, dtype=np.int64)
        self._ensure(positions.shape[0], positions.shape[0])
        _kernels.insert_postings(
            anchor_ord,
            match_codes,
            self.k,
            positions,
            self.code2slot,
            self.slot_head,
            self.slot_tail,
            self.slot_len,
            self.post_anchor,
            self.post_pos,
            self.post_next,
            self.counters,
            self.cap,
        )

    def postings(self, code):
        """Postings for a code as (anchor_ord, position) in insertion order."""
        slot = self.code2slot.get(code)
        if slot is None:
            return []
        out = []
        node = int(self.slot_head[slot])
        while node >= 0:
            out.append((int(self.post_anchor[node]), int(self.post_pos[node])))
            node = int(self.post_next[node])
        return out

    def candidates(self, code, position_in_query):
        """Postings plus the shift each one implies for the query position."""
        return [
            (a, p, p - position_in_query) for a, p in self.postings(code)
        ]

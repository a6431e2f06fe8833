"""Alignment kernels: Hamming distance and affine-gap Smith-Waterman."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .readio import encode_seq


@dataclass(frozen=True)
class ScoreScheme:
    match: int = 3
    mismatch: int = -3
    gap_open: int = -40
    gap_extend: int = -3


DEFAULT_SCHEME = ScoreScheme()


@dataclass
class AlignmentResult:
    score: int
    ref_start: int
    strand: str = "+"
    cigar: list = field(default_factory=list)  # [(length, op)] with op M/I/D/S
    mapped: bool = True
    ref_end: int = 0

    def cigar_string(self):
        if not self.mapped or not self.cigar:
            return "*"
        return "".join(f"{n}{op}" for n, op in self.cigar)


def _as_codes(x):
    if isinstance(x, str):
        return encode_seq(x)
    return np.asarray(x, dtype=np.uint8)


def hamming(a, b):
    """Differing positions between equal-length sequences; bad or ambiguous
    bases always differ."""
    a = _as_codes(a)
    b = _as_codes(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return int(_kernels.hamming_codes(a, b))


def min_score(read_len):
    """Score floor below which an alignment is reported unmapped."""
    if read_len < 31:
        raise ValueError(f"read length {read_len} below minimum 31")
    return read_len // 3


def _rle(ops):
    out = []
    for op in ops:
        if out and out[-1][1] == op:
            out[-1][0] += 1
        else:
            out.append([1, op])
    return [(n, op) for n, op in out]


def smith_waterman(read, window, scheme=DEFAULT_SCHEME, clip=True):
    """Best local alignment of read against a genomic window.

    Affine gaps: the first gap base costs -gap_open alone, each further base
    adds -gap_extend (a gap of length g costs 40 + 3*(g-1) at the defaults).
    Traceback ties prefer diagonal, then the query-consuming gap, then the
    window-consuming gap. With clip=True the unaligned read ends are recorded
    as soft clips so cigar query lengths (M+I+S) sum to the read length.
    """
    q = _as_codes(read)
    w = _as_codes(window)
    if w.shape[0] < 1:
        raise ValueError("window must be non-empty")
    steps = np.empty(q.shape[0] + w.shape[0] + 2, dtype=np.uint8)
    score, qs, qe, ws, we, ns = _kernels.sw_kernel(
        q,
        w,
        scheme.match,
        scheme.mismatch,
        -scheme.gap_open,
        -scheme.gap_extend,
        steps,
    )
    ops = [("M", "I", "D")[s] for s in steps[:ns][::-1]]
    cigar = _rle(ops)
    if clip:
        if qs > 0:
            cigar.insert(0, (qs, "S"))
        if qe < q.shape[0]:
            cigar.append((q.shape[0] - qe, "S"))
    return AlignmentResult(
        score=int(score),
        ref_start=int(ws),
        ref_end=int(we),
        cigar=cigar,
        mapped=ns > 0,
    )


def score_cigar(read, window, ref_start, cigar, scheme=DEFAULT_SCHEME):
    """Replay a cigar against the window and recompute the alignment score."""
    q = _as_codes(read)
    w = _as_codes(window)
    qi, wi = 0, ref_start
    score = 0
    for n, op in cigar:
        if op == "S":
            qi += n
        elif op == "M":
            for t in range(n):
                qc = q[qi + t]
                if qc < 4 and qc == w[wi + t]:
                    score += scheme.match
                else:
                    score += scheme.mismatch
            qi += n
            wi += n
        elif op == "I":
            score += scheme.gap_open + (n - 1) * scheme.gap_extend
            qi += n
        elif op == "D":
            score += scheme.gap_open + (n - 1) * scheme.gap_extend
            wi += n
        else:
            raise ValueError(f"unsupported cigar op {op}")
    return score

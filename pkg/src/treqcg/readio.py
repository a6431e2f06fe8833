"""FASTQ parsing into fixed-length encoded reads with bad-base masks."""

import gzip
from dataclasses import dataclass

import numpy as np

MIN_READ_LEN = 31

# base codes: A=0 C=1 G=2 T=3, anything ambiguous = 4
AMBIG = 4

_CODE = np.full(256, AMBIG, dtype=np.uint8)
for _i, _b in enumerate("ACGT"):
    _CODE[ord(_b)] = _i
    _CODE[ord(_b.lower())] = _i

_DECODE = np.frombuffer(b"ACGTN", dtype=np.uint8)


class FastqError(ValueError):
    pass


def encode_seq(seq):
    """Encode a nucleotide string as uint8 codes (A=0,C=1,G=2,T=3, other=4)."""
    return _CODE[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]


def decode_seq(codes):
    return _DECODE[np.minimum(codes, AMBIG)].tobytes().decode("ascii")


def revcomp_codes(codes):
    """Reverse complement of a code array; ambiguous bases stay ambiguous."""
    out = codes[::-1].copy()
    good = out < 4
    out[good] = 3 - out[good]
    return out


def revcomp_str(seq):
    return decode_seq(revcomp_codes(encode_seq(seq)))


def pack_bases(codes):
    """Pack 2-bit base codes (values 0..3) into bytes, 4 bases per byte."""
    codes = np.asarray(codes, dtype=np.uint8)
    if codes.size and codes.max() > 3:
        raise ValueError("pack_bases requires unambiguous bases (codes 0..3)")
    n = codes.size
    padded = np.zeros((n + 3) // 4 * 4, dtype=np.uint8)
    padded[:n] = codes
    shaped = padded.reshape(-1, 4)
    return (
        (shaped[:, 0] << 6) | (shaped[:, 1] << 4) | (shaped[:, 2] << 2) | shaped[:, 3]
    ).astype(np.uint8)


def unpack_bases(packed, n):
    packed = np.asarray(packed, dtype=np.uint8)
    out = np.empty(packed.size * 4, dtype=np.uint8)
    out[0::4] = packed >> 6
    out[1::4] = (packed >> 4) & 3
    out[2::4] = (packed >> 2) & 3
    out[3::4] = packed & 3
    return out[:n]


@dataclass
class Read:
    """A single fixed-length read: codes, Phred scores and the bad-base mask."""

    id: int
    seq: np.ndarray
    qual: np.ndarray
    bad_mask: np.ndarray

    def __len__(self):
        return len(self.seq)


@dataclass
class LibraryMeta:
    n_reads: int
    read_len: int
    paired: bool
    phred_offset: int
    quality_threshold: int


class ReadLibrary:
    """Immutable store of all reads in a library.

    Bases, qualities and bad masks live in N x L arrays; original names and
    raw strings are kept for downstream FASTQ/SAM emission.
    """

    def __init__(self, base, qual, bad, names, seqs, quals, meta):
        self.base = base
        self.qual = qual
        self.bad = bad
        self.names = names
        self.seqs = seqs
        self.quals = quals
        self.meta = meta
        # matching codes: bad bases never match anything
        self.match = np.where(bad, np.uint8(AMBIG), base)

    @property
    def n_reads(self):
        return self.meta.n_reads

    @property
    def read_len(self):
        return self.meta.read_len

    def read(self, i):
        return Read(i, self.base[i], self.qual[i], self.bad[i])


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt")
    return open(path, "rt")


def _fastq_records(src):
    """Yield (name, seq, qual) from a 4-line FASTQ stream or path."""
    close = False
    if isinstance(src, (str, bytes)):
        fh = _open_maybe_gzip(src)
        close = True
    else:
        fh = src
    try:
        recno = 0
        while True:
            header = fh.readline()
            if not header:
                return
            recno += 1
            seq = fh.readline().rstrip("\n")
            plus = fh.readline()
            qual = fh.readline().rstrip("\n")
            header = header.rstrip("\n")
            if not header.startswith("@") or not plus.startswith("+") or not qual:
                raise FastqError(f"malformed FASTQ record {recno}")
            if len(seq) != len(qual):
                raise FastqError(
                    f"record {recno}: sequence and quality lengths differ"
                )
            yield header[1:].split()[0], seq, qual
    finally:
        if close:
            fh.close()


def parse_fastq(src, phred_offset=33, quality_threshold=10):
    """Parse one FASTQ stream into (names, seqs, quals) lists.

    All records must share one length L >= 31.
    """
    names, seqs, quals = [], [], []
    length = None
    for recno, (name, seq, qual) in enumerate(_fastq_records(src), start=1):
        if length is None:
            length = len(seq)
            if length < MIN_READ_LEN:
                raise FastqError(
                    f"read length {length} below the minimum of {MIN_READ_LEN}"
                )
        elif len(seq) != length:
            raise FastqError(
                f"record {recno}: length {len(seq)} differs from {length}"
            )
        names.append(name)
        seqs.append(seq)
        quals.append(qual)
    if length is None:
        raise FastqError("empty FASTQ input")
    return names, seqs, quals


def _build_arrays(seqs, quals, phred_offset, quality_threshold):
    n = len(seqs)
    length = len(seqs[0])
    base = np.empty((n, length), dtype=np.uint8)
    q = np.empty((n, length), dtype=np.uint8)
    for i, (s, qs) in enumerate(zip(seqs, quals)):
        base[i] = _CODE[np.frombuffer(s.encode("ascii"), dtype=np.uint8)]
        q[i] = np.frombuffer(qs.encode("ascii"), dtype=np.uint8)
    q = q.astype(np.int16) - phred_offset
    if q.min() < 0:
        raise FastqError("quality score below Phred offset; wrong --phred64 flag?")
    bad = (base == AMBIG) | (q < quality_threshold)
    return base, np.clip(q, 0, 255).astype(np.uint8), bad


def load_library(paths, phred_offset=33, quality_threshold=10):
    """Load a library from one (single-end) or two (paired-end) FASTQ files.

    Paired files are interleaved: mate 1 of pair t at index 2t, mate 2 at 2t+1.
    """
    if len(paths) not in (1, 2):
        raise FastqError("expected one or two FASTQ files")
    parsed = [parse_fastq(p, phred_offset, quality_threshold) for p in paths]
    if len(parsed) == 1:
        names, seqs, quals = parsed[0]
        paired = False
    else:
        (n1, s1, q1), (n2, s2, q2) = parsed
        if len(s1) != len(s2):
            raise FastqError(
                f"paired files differ in record count ({len(s1)} vs {len(s2)})"
            )
        if len(s1[0]) != len(s2[0]):
            raise FastqError("paired files differ in read length")
        names, seqs, quals = [], [], []
        for i in range(len(s1)):
            names += [n1[i], n2[i]]
            seqs += [s1[i], s2[i]]
            quals += [q1[i], q2[i]]
        paired = True
    base, qual, bad = _build_arrays(seqs, quals, phred_offset, quality_threshold)
    meta = LibraryMeta(
        n_reads=len(seqs),
        read_len=base.shape[1],
        paired=paired,
        phred_offset=phred_offset,
        quality_threshold=quality_threshold,
    )
    return ReadLibrary(base, qual, bad, names, seqs, quals, meta)


def library_from_strings(seqs, paired=False, quality_threshold=10, quals=None):
    """Build a library directly from sequence strings (testing / simulation)."""
    n = len(seqs)
    length = len(seqs[0])
    if quals is None:
        quals = ["I" * length] * n
    names = [f"r{i}" for i in range(n)]
    base, qual, bad = _build_arrays(seqs, quals, 33, quality_threshold)
    meta = LibraryMeta(n, length, paired, 33, quality_threshold)
    return ReadLibrary(base, qual, bad, names, list(seqs), list(quals), meta)


def max_good_run(bad_mask):
    """Length of the longest contiguous stretch of non-bad bases."""
    best = cur = 0
    for b in np.asarray(bad_mask):
        if b:
            cur = 0
        else:
            cur += 1
            if cur > best:
                best = cur
    return best


def classify_bad_read(read, k):
    """True iff the read is too low-quality to take part in clustering.

    A read is bad when its good bases span fewer than 2k positions, or no
    contiguous good stretch reaches k/2 bases, or it has no good base at all.
    """
    bad = read.bad_mask if isinstance(read, Read) else np.asarray(read)
    good = np.flatnonzero(~bad)
    if good.size == 0:
        return True
    s, e = int(good[0]), int(good[-1])
    if e - s + 1 < 2 * k:
        return True
    if 2 * max_good_run(bad) < k:
        return True
    return False

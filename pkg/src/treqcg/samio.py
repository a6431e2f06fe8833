"""Minimal SAM reading/writing used by the mapper and the evaluation kit."""

from dataclasses import dataclass

FLAG_PAIRED = 0x1
FLAG_PROPER = 0x2
FLAG_UNMAPPED = 0x4
FLAG_MATE_UNMAPPED = 0x8
FLAG_REVERSE = 0x10
FLAG_MATE_REVERSE = 0x20
FLAG_FIRST = 0x40
FLAG_SECOND = 0x80
FLAG_SECONDARY = 0x100
FLAG_SUPPLEMENTARY = 0x800


@dataclass
class SamRecord:
    qname: str
    flag: int
    rname: str
    pos: int  # 1-based leftmost, 0 when unmapped
    mapq: int
    cigar: str
    rnext: str = "*"
    pnext: int = 0
    tlen: int = 0
    seq: str = "*"
    qual: str = "*"
    raw: str | None = None  # original line, for verbatim passthrough

    @property
    def mapped(self):
        return not self.flag & FLAG_UNMAPPED

    @property
    def reverse(self):
        return bool(self.flag & FLAG_REVERSE)

    @property
    def paired(self):
        return bool(self.flag & FLAG_PAIRED)

    @property
    def pos0(self):
        """0-based leftmost position."""
        return self.pos - 1

    def line(self):
        if self.raw is not None:
            return self.raw
        return "\t".join(
            str(x)
            for x in (
                self.qname,
                self.flag,
                self.rname,
                self.pos,
                self.mapq,
                self.cigar,
                self.rnext,
                self.pnext,
                self.tlen,
                self.seq,
                self.qual,
            )
        )


def parse_sam_line(line, lineno=None):
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 11:
        where = f" at line {lineno}" if lineno is not None else ""
        raise ValueError(f"malformed SAM record{where}")
    return SamRecord(
        qname=parts[0],
        flag=int(parts[1]),
        rname=parts[2],
        pos=int(parts[3]),
        mapq=int(parts[4]),
        cigar=parts[5],
        rnext=parts[6],
        pnext=int(parts[7]),
        tlen=int(parts[8]),
        seq=parts[9],
        qual=parts[10],
        raw=line.rstrip("\n"),
    )


def read_sam(src):
    """Return (header_lines, records) from a path or an open text stream."""
    close = isinstance(src, str)
    fh = open(src) if close else src
    try:
        header = []
        records = []
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if line.startswith("@"):
                header.append(line.rstrip("\n"))
            else:
                records.append(parse_sam_line(line, lineno))
        return header, records
    finally:
        if close:
            fh.close()


def cigar_items(cigar):
    out = []
    n = ""
    for ch in cigar:
        if ch.isdigit():
            n += ch
        else:
            out.append((int(n), ch))
            n = ""
    return out


def qname_to_read_id(qname, flag):
    """Recover the library read index from a query name.

    Query names carry the read id (the first mate's id for pairs) as the
    trailing colon-separated integer; the second-in-pair flag selects the
    odd mate.
    """
    tail = qname.rsplit(":", 1)[-1]
    base = int(tail)
    if flag & FLAG_PAIRED and flag & FLAG_SECOND:
        return base + 1
    return base

import numpy as np
import pytest

from conftest import simulate_library
from treqcg.align import min_score, score_cigar
from treqcg.cluster_engine import (
    CLASS_ANCHOR,
    ClusterParams,
    SubOptimalEdges,
    cluster_paired_end,
    cluster_single_end,
    reassign_optimal,
    record_suboptimal,
    revcomp_match,
)
from treqcg.clustered_mapper import (
    AnchorPlacement,
    EdgeGraph,
    InsertModel,
    _Candidate,
    compose_shift,
    estimate_insert,
    finalize,
    invert_edge,
    map_all,
    parse_anchor_sam,
    place_member,
    refine,
    resolve_pair,
)
from treqcg.readio import decode_seq
from treqcg.samio import (
    FLAG_FIRST,
    FLAG_PAIRED,
    FLAG_REVERSE,
    FLAG_SECOND,
    FLAG_UNMAPPED,
    SamRecord,
    cigar_items,
    parse_sam_line,
    qname_to_read_id,
)
from treqcg.simkit import accuracy, concordance, oracle_place_anchors
from treqcg.align import AlignmentResult


def _placement(aid, pos, reverse=False, rname="sim0", mapq=60, cigar="100M"):
    flag = FLAG_REVERSE if reverse else 0
    rec = SamRecord(
        qname=f"treq:{aid}", flag=flag, rname=rname, pos=pos + 1, mapq=mapq,
        cigar=cigar, seq="*", qual="*",
    )
    return AnchorPlacement(
        anchor_id=aid, rname=rname, pos=pos, reverse=reverse, mapq=mapq,
        cigar=cigar, mapped=True, record=rec,
    )


@pytest.fixture(scope="module")
def se_pipeline():
    """Clustered + oracle-anchored single-end simulation."""
    genome, lib, truth = simulate_library(100_000, coverage=10, epsilon=0.01, seed=21)
    table = cluster_single_end(lib, ClusterParams())
    reassign_optimal(table)
    edges = record_suboptimal(table)
    sam = oracle_place_anchors(table, truth, library=lib, genome_len=100_000)
    header = [l for l in sam if l.startswith("@")]
    recs = [parse_sam_line(l) for l in sam if not l.startswith("@")]
    return genome, lib, truth, table, edges, (header, recs)


class TestParseAnchorSam:
    def test_round_trip(self, se_pipeline):
        _, _, truth, table, _, sam = se_pipeline
        header, placements = parse_anchor_sam(sam, table)
        assert set(placements) == set(int(i) for i in table.anchor_ids())
        some = int(table.anchor_ids()[0])
        assert placements[some].pos == truth.pos[some]

    def test_missing_anchor_fatal(self, se_pipeline):
        _, _, _, table, _, sam = se_pipeline
        header, recs = sam
        with pytest.raises(ValueError, match="missing"):
            parse_anchor_sam((header, recs[1:]), table)

    def test_duplicate_fatal(self, se_pipeline):
        _, _, _, table, _, sam = se_pipeline
        header, recs = sam
        with pytest.raises(ValueError, match="duplicate"):
            parse_anchor_sam((header, recs + [recs[0]]), table)


class TestPlaceMember:
    def _setup(self):
        rng = np.random.default_rng(31)
        genome = rng.integers(0, 4, 2000, dtype=np.uint8)
        member = genome[540:640].copy()
        return {"sim0": genome}, member

    def test_forward_anchor_forward_member(self):
        genomes, member = self._setup()
        # anchor at 500, member shift 40 -> genomic start 540
        cand, h, score = place_member(member, 40, False, _placement(0, 500), genomes)
        assert (cand.start, cand.g_reverse, h, score) == (540, False, 0, 300)

    def test_reverse_anchor_flips_geometry(self):
        # anchor occupies genome[500:600] on the reverse strand; a member
        # agreeing with the anchor's forward coordinates (strand '+', shift
        # -40) sits at genome start 500 - (-40) = 540, reverse strand
        genomes, member = self._setup()
        stored = revcomp_match(member)
        cand, h, score = place_member(
            stored, -40, False, _placement(0, 500, reverse=True), genomes
        )
        assert (cand.start, cand.g_reverse, h, score) == (540, True, 0, 300)

    def test_strand_xor(self):
        # member matched the anchor's reverse complement; on a reverse
        # anchor the two flips cancel and the member is genome-forward
        genomes, member = self._setup()
        cand, h, _ = place_member(
            member, -40, True, _placement(0, 500, reverse=True), genomes
        )
        assert (cand.start, cand.g_reverse, h) == (540, False, 0)

    def test_out_of_bounds_rejected(self):
        genomes, member = self._setup()
        assert place_member(member, -501, False, _placement(0, 500), genomes) is None
        assert place_member(member, 1500, False, _placement(0, 500), genomes) is None

    def test_unmapped_anchor_rejected(self):
        genomes, member = self._setup()
        p = _placement(0, 500)
        p.mapped = False
        assert place_member(member, 0, False, p, genomes) is None

    def test_mismatches_scored(self):
        genomes, member = self._setup()
        member[10] = (member[10] + 1) % 4
        _, h, score = place_member(member, 40, False, _placement(0, 500), genomes)
        assert (h, score) == (1, 99 * 3 - 3)


class TestRefineTrigger:
    """Gap-aware rescoring starts when mismatch cost exceeds one gap opening:
    at 6 points per mismatch that is 7 mismatches, not 6."""

    def _candidate(self, n_mismatch):
        rng = np.random.default_rng(41)
        genome = rng.integers(0, 4, 1000, dtype=np.uint8)
        member = genome[400:500].copy()
        # cluster the mismatches at the tail: a real SW would clip them
        for t in range(n_mismatch):
            member[99 - t] = (member[99 - t] + 1) % 4
        cand = _Candidate("sim0", 400, False, member, 0)
        h = n_mismatch
        return cand, h, 3 * (100 - h) - 3 * h, {"sim0": genome}

    def test_h6_keeps_ungapped(self):
        cand, h, score, genomes = self._candidate(6)
        r = refine(cand, h, score, genomes)
        assert r.cigar == [(100, "M")]
        assert r.score == 300 - 36

    def test_h7_reruns_alignment(self):
        cand, h, score, genomes = self._candidate(7)
        r = refine(cand, h, score, genomes)
        # SW clips the mismatching tail instead of paying 7 mismatches
        assert r.cigar != [(100, "M")]
        assert r.cigar[-1][1] == "S"
        assert r.score == 93 * 3

    def test_recovers_deletion(self):
        rng = np.random.default_rng(42)
        genome = rng.integers(0, 4, 1000, dtype=np.uint8)
        member = np.concatenate([genome[400:450], genome[455:505]])
        h = int((member != genome[400:500]).sum())
        assert h > 7
        cand = _Candidate("sim0", 400, False, member, 0)
        r = refine(cand, h, 3 * (100 - h) - 3 * h, {"sim0": genome})
        assert (5, "D") in r.cigar
        assert r.score == 300 - (40 + 3 * 4)


class TestShiftComposition:
    def test_forward_edge(self):
        assert compose_shift(10, False, 30, False) == (40, False)

    def test_reverse_edge_flips(self):
        shift, rev = compose_shift(10, False, 30, True)
        assert (shift, rev) == (20, True)

    def test_inversion_round_trip(self):
        for s, r in [(12, False), (12, True), (-7, False), (-7, True)]:
            inv_s, inv_r = invert_edge(s, r)
            # composing an edge with its inverse is the identity
            assert compose_shift(inv_s, inv_r, s, r) == (0, False)

    def test_composition_consistent_with_sequences(self):
        rng = np.random.default_rng(43)
        g = rng.integers(0, 4, 400, dtype=np.uint8)
        a0 = g[100:200]  # anchor A0 at genome 100
        aj = g[130:230]  # anchor Aj at genome 130
        member = g[120:220]  # member at genome 120
        # member in A0: shift 20; A0 in Aj: shift -30
        shift, rev = compose_shift(20, False, -30, False)
        assert (shift, rev) == (-10, False)
        genomes = {"sim0": g}
        cand, h, _ = place_member(member, shift, rev, _placement(1, 130), genomes)
        assert (cand.start, h) == (120, 0)


class TestEdgeGraph:
    def test_candidates_order_and_dedup(self):
        edges = SubOptimalEdges(
            member_edges=[(5, 2, 7, 0)],
            anchor_edges=[(2, 9, 3, 0)],
        )
        g = EdgeGraph(edges)
        cands = g.candidate_anchors(5, 1, 0, False)
        assert cands[0] == (1, 0, False)  # assigned anchor first
        assert (2, 7, False) in cands
        # green hop from the red anchor 2 to anchor 9, shift composed
        assert (9, 10, False) in cands

    def test_green_edges_walk_both_ways(self):
        edges = SubOptimalEdges(anchor_edges=[(2, 9, 3, 0)])
        g = EdgeGraph(edges)
        # member assigned to 9 can reach 2 through the inverted edge
        cands = g.candidate_anchors(0, 9, 0, False)
        assert (2, -3, False) in cands


class TestFinalize:
    def _best(self, score):
        r = AlignmentResult(score=score, ref_start=1000, cigar=[(100, "M")])
        return (r, "sim0", 3)

    def test_score_floor_boundary(self):
        # L=100: floor(100/3)=33 -> mapped at 33, unmapped at 32
        placements = {3: _placement(3, 990)}
        rec = finalize(0, "treq:0", "A" * 100, "I" * 100, self._best(33), placements, 3, 33)
        assert rec.mapped and rec.pos == 1001
        rec = finalize(0, "treq:0", "A" * 100, "I" * 100, self._best(32), placements, 3, 33)
        assert not rec.mapped and rec.cigar == "*"

    def test_mapq_copied_from_anchor(self):
        placements = {3: _placement(3, 990, mapq=37)}
        rec = finalize(0, "treq:0", "A" * 100, "I" * 100, self._best(50), placements, 3, 33)
        assert rec.mapq == 37

    def test_reverse_emits_oriented_seq(self):
        placements = {3: _placement(3, 990)}
        best = self._best(50)
        best[0].strand = "-"
        rec = finalize(0, "treq:0", "AACG" * 25, "ABCD" * 25, best, placements, 3, 33)
        assert rec.reverse
        assert rec.seq == "CGTT" * 25
        assert rec.qual == "DCBA" * 25

    def test_none_is_unmapped(self):
        rec = finalize(0, "treq:0", "A" * 100, "I" * 100, None, {}, -1, 33)
        assert not rec.mapped
        assert rec.rname == "*" and rec.pos == 0


class TestEstimateInsert:
    def _pairs(self, inserts, rname="sim0"):
        placements = {}
        for t, ins in enumerate(inserts):
            placements[2 * t] = _placement(2 * t, 1000)
            placements[2 * t + 1] = _placement(
                2 * t + 1, 1000 + int(ins) - 100, reverse=True
            )
        return placements

    def test_robust_recovery(self):
        rng = np.random.default_rng(51)
        ins = rng.normal(300, 30, 5000)
        model = estimate_insert(self._pairs(ins))
        assert model.mean == pytest.approx(300, abs=2)
        assert model.sd == pytest.approx(30, abs=2)

    def test_outliers_ignored(self):
        rng = np.random.default_rng(52)
        ins = list(rng.normal(300, 30, 2000)) + [50000] * 100
        model = estimate_insert(self._pairs(ins))
        assert model.mean == pytest.approx(300, abs=4)

    def test_degenerate_sd_clamped(self):
        model = estimate_insert(self._pairs([310] * 1500))
        assert (model.mean, model.sd) == (310, 1.0)

    def test_too_few_pairs_fatal(self):
        with pytest.raises(ValueError, match="999"):
            estimate_insert(self._pairs([300] * 999))


class TestResolvePair:
    def _genome(self):
        rng = np.random.default_rng(61)
        return rng.integers(0, 4, 3000, dtype=np.uint8)

    def _mapped(self, rid, pos, reverse=False, genome=None, L=100):
        g_codes = genome[pos : pos + L]
        seq = decode_seq(g_codes if not reverse else (3 - g_codes[::-1]))
        flag = FLAG_REVERSE if reverse else 0
        flag |= FLAG_PAIRED | (FLAG_SECOND if rid % 2 else FLAG_FIRST)
        return SamRecord(
            qname=f"treq:{rid & ~1}", flag=flag, rname="sim0", pos=pos + 1,
            mapq=60, cigar=f"{L}M", seq=seq, qual="I" * L,
        )

    def test_concordant_untouched(self):
        g = self._genome()
        r1 = self._mapped(0, 1000, genome=g)
        r2 = self._mapped(1, 1200, reverse=True, genome=g)
        m1 = g[1000:1100].copy()
        m2 = 3 - g[1200:1300][::-1].copy()
        out1, out2 = resolve_pair(
            r1, r2, (300, 300), m1, m2, InsertModel(300, 30), {"sim0": g}, 33
        )
        assert out1 is r1 and out2 is r2

    def test_rescues_unmapped_mate(self):
        g = self._genome()
        r1 = self._mapped(0, 1000, genome=g)
        # true mate position 1200, reverse; currently unmapped
        m2 = (3 - g[1200:1300][::-1]).copy()
        r2 = SamRecord(
            qname="treq:0", flag=FLAG_UNMAPPED | FLAG_PAIRED | FLAG_SECOND,
            rname="*", pos=0, mapq=0,
            cigar="*", seq=decode_seq(m2), qual="I" * 100,
        )
        model = InsertModel(300, 30)
        out1, out2 = resolve_pair(
            r1, r2, (300, -(10**9)), g[1000:1100].copy(), m2, model, {"sim0": g}, 33
        )
        assert out2.mapped
        assert out2.pos0 == 1200
        assert out2.reverse
        assert concordance([out1, out2], model) == 1.0

    def test_rescue_requires_concordance(self):
        g = self._genome()
        r1 = self._mapped(0, 1000, genome=g)
        # mate sequence exists nowhere near the implied window
        rng = np.random.default_rng(62)
        m2 = rng.integers(0, 4, 100, dtype=np.uint8)
        r2 = SamRecord(
            qname="treq:0", flag=FLAG_UNMAPPED | FLAG_PAIRED | FLAG_SECOND,
            rname="*", pos=0, mapq=0,
            cigar="*", seq=decode_seq(m2), qual="I" * 100,
        )
        out1, out2 = resolve_pair(
            r1, r2, (300, -(10**9)), g[1000:1100].copy(), m2,
            InsertModel(300, 30), {"sim0": g}, 33,
        )
        assert not out2.mapped

    def test_bad_read_never_rescued(self):
        g = self._genome()
        r1 = self._mapped(0, 1000, genome=g)
        m2 = (3 - g[1200:1300][::-1]).copy()
        r2 = SamRecord(
            qname="treq:0", flag=FLAG_UNMAPPED | FLAG_PAIRED | FLAG_SECOND,
            rname="*", pos=0, mapq=0,
            cigar="*", seq=decode_seq(m2), qual="#" * 100,
        )
        out1, out2 = resolve_pair(
            r1, r2, (300, -(10**9)), g[1000:1100].copy(), m2,
            InsertModel(300, 30), {"sim0": g}, 33, rescuable=(True, False),
        )
        assert not out2.mapped


class TestMapAll:
    def test_every_read_once_in_id_order(self, se_pipeline):
        genome, lib, truth, table, edges, sam = se_pipeline
        header, records = map_all(lib, table, edges, sam, {"sim0": genome})
        assert len(records) == lib.n_reads
        ids = [qname_to_read_id(r.qname, r.flag) for r in records]
        assert ids == list(range(lib.n_reads))

    def test_anchors_verbatim(self, se_pipeline):
        genome, lib, truth, table, edges, sam = se_pipeline
        _, in_recs = sam
        raw_by_id = {qname_to_read_id(r.qname, r.flag): r.raw for r in in_recs}
        _, records = map_all(lib, table, edges, sam, {"sim0": genome})
        for i in table.anchor_ids():
            assert records[int(i)].line() == raw_by_id[int(i)]

    def test_pg_line_appended(self, se_pipeline):
        genome, lib, truth, table, edges, sam = se_pipeline
        header, _ = map_all(lib, table, edges, sam, {"sim0": genome})
        assert header[-1].startswith("@PG\t")
        assert header[:-1] == sam[0]

    def test_member_scores_recomputable(self, se_pipeline):
        genome, lib, truth, table, edges, sam = se_pipeline
        _, records = map_all(lib, table, edges, sam, {"sim0": genome})
        min_sc = min_score(lib.read_len)
        checked = 0
        for i in table.member_ids()[:300]:
            rec = records[int(i)]
            if not rec.mapped:
                continue
            codes = lib.match[int(i)]
            if rec.reverse:
                codes = revcomp_match(codes)
            score = score_cigar(
                codes, genome, rec.pos0, cigar_items(rec.cigar)
            )
            assert score >= min_sc
            checked += 1
        assert checked > 100

    def test_accuracy_on_clean_sim(self):
        genome, lib, truth = simulate_library(80_000, coverage=10, epsilon=0.0, seed=22)
        table = cluster_single_end(lib, ClusterParams())
        reassign_optimal(table)
        edges = record_suboptimal(table)
        sam = oracle_place_anchors(table, truth, library=lib, genome_len=80_000)
        header = [l for l in sam if l.startswith("@")]
        recs = [parse_sam_line(l) for l in sam if not l.startswith("@")]
        _, records = map_all(lib, table, edges, (header, recs), {"sim0": genome})
        assert accuracy((header, records), truth, 100) == 1.0

    def test_threads_agree(self, se_pipeline):
        genome, lib, truth, table, edges, sam = se_pipeline
        _, r1 = map_all(lib, table, edges, sam, {"sim0": genome}, threads=1)
        _, r4 = map_all(lib, table, edges, sam, {"sim0": genome}, threads=4)
        assert [r.line() for r in r1] == [r.line() for r in r4]

    def test_paired_pipeline(self):
        genome, lib, truth = simulate_library(
            100_000, coverage=10, epsilon=0.01, paired=True, seed=23
        )
        table = cluster_paired_end(lib, ClusterParams())
        reassign_optimal(table)
        edges = record_suboptimal(table)
        sam = oracle_place_anchors(table, truth, library=lib, genome_len=100_000)
        header = [l for l in sam if l.startswith("@")]
        recs = [parse_sam_line(l) for l in sam if not l.startswith("@")]
        model = InsertModel(300, 30)
        h, records = map_all(
            lib, table, edges, (header, recs), {"sim0": genome}, insert_model=model
        )
        assert len(records) == lib.n_reads
        assert accuracy((h, records), truth, 100) > 0.99
        assert concordance((h, records), model) > 0.99
        # mate fields filled for constructed pairs
        for t in range(table.n_reads // 2):
            i1, i2 = 2 * t, 2 * t + 1
            if table.cls[i1] == CLASS_ANCHOR:
                continue
            r1, r2 = records[i1], records[i2]
            if r1.mapped and r2.mapped:
                assert r1.rnext == "=" and r2.rnext == "="
                assert r1.pnext == r2.pos and r2.pnext == r1.pos
                assert r1.tlen == -r2.tlen != 0

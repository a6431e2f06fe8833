"""Command-line front-ends: cluster, split, map, predict, sim, eval.

All diagnostics go to standard error; data goes to files or standard output.
Exit codes: 0 success, 1 runtime failure, 2 usage error / unreadable input.
"""

import argparse
import sys

from .cluster_engine import (
    CLASS_ANCHOR,
    ClusterParams,
    cluster_paired_end,
    cluster_single_end,
    read_clusters,
    read_edges,
    reassign_optimal,
    record_suboptimal,
    write_clusters,
    write_edges,
)
from .clustered_mapper import (
    InsertModel,
    load_genome_fasta,
    map_all,
)
from .predictor import PredictorInputs, expected_clusters
from .readio import load_library
from .samio import read_sam
from .simkit import (
    SimParams,
    accuracy,
    alternate_mapping_rate,
    concordance,
    generate_genome,
    read_truth,
    sample_reads,
    write_genome_fasta,
    write_reads_fastq,
    write_truth,
)


def _run(fn):
    try:
        return fn() or 0
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _add_common_cluster_args(p):
    p.add_argument("-q", type=int, default=10, metavar="Q", dest="quality",
                   help="quality threshold; 0 disables filtering (default 10)")
    p.add_argument("-t", type=int, default=1, metavar="T", dest="threads",
                   help="worker threads (default 1)")
    p.add_argument("-s", type=float, default=0.95, metavar="BETA", dest="beta",
                   help="similarity cutoff beta (default 0.95)")
    p.add_argument("-a", type=float, default=None, metavar="ALPHA", dest="alpha",
                   help="minimum overlap fraction (default max(0.5, 31/L))")
    p.add_argument("-k", type=int, default=15, help="k-mer size (default 15)")


def main_cluster(argv=None):
    p = argparse.ArgumentParser(
        prog="treq-cluster",
        description="Cluster a read library; writes "
        "<prefix>.clusters.tsv and <prefix>.edges.tsv.",
    )
    _add_common_cluster_args(p)
    p.add_argument("prefix", help="output file prefix")
    p.add_argument("fastq", nargs="+", help="one (SE) or two (PE) FASTQ files")
    args = p.parse_args(argv)
    if len(args.fastq) > 2:
        p.error("expected one or two FASTQ files")

    def run():
        library = load_library(args.fastq, quality_threshold=args.quality)
        params = ClusterParams(
            alpha=args.alpha, beta=args.beta, k=args.k, f=args.quality,
            threads=max(1, args.threads),
        )
        if library.meta.paired:
            table = cluster_paired_end(library, params)
        else:
            table = cluster_single_end(library, params)
        reassign_optimal(table)
        edges = record_suboptimal(table)
        write_clusters(table, f"{args.prefix}.clusters.tsv")
        write_edges(edges, f"{args.prefix}.edges.tsv")
        n_a, n_m, n_b = table.class_counts()
        tau = n_a / max(n_a + n_m, 1)
        print(
            f"n_anchors={n_a} n_members={n_m} n_bad={n_b} tau={tau:.4f}",
            file=sys.stderr,
        )

    return _run(run)


def main_split(argv=None):
    p = argparse.ArgumentParser(
        prog="treq-split",
        description="Extract anchor reads as FASTQ with treq:<id> names.",
    )
    p.add_argument("-q", type=int, default=10, metavar="Q", dest="quality")
    p.add_argument("cluster_prefix", help="prefix used by treq-cluster")
    p.add_argument("anchor_prefix", help="output FASTQ prefix")
    p.add_argument("fastq", nargs="+", help="the original FASTQ file(s)")
    args = p.parse_args(argv)
    if len(args.fastq) > 2:
        p.error("expected one or two FASTQ files")

    def run():
        table = read_clusters(f"{args.cluster_prefix}.clusters.tsv")
        library = load_library(args.fastq, quality_threshold=args.quality)
        if library.n_reads != table.n_reads:
            raise ValueError(
                f"cluster table has {table.n_reads} reads but the FASTQ input "
                f"has {library.n_reads}"
            )
        if table.paired != library.meta.paired:
            raise ValueError("cluster table and FASTQ input disagree on pairing")
        n_out = 0
        if table.paired:
            f1 = open(f"{args.anchor_prefix}_1.fq", "w")
            f2 = open(f"{args.anchor_prefix}_2.fq", "w")
            with f1, f2:
                for t in range(table.n_reads // 2):
                    i, j = 2 * t, 2 * t + 1
                    if table.cls[i] != CLASS_ANCHOR:
                        continue
                    name = f"treq:{i}"
                    f1.write(f"@{name}\n{library.seqs[i]}\n+\n{library.quals[i]}\n")
                    f2.write(f"@{name}\n{library.seqs[j]}\n+\n{library.quals[j]}\n")
                    n_out += 2
        else:
            with open(f"{args.anchor_prefix}.fq", "w") as fh:
                for i in table.anchor_ids():
                    i = int(i)
                    fh.write(
                        f"@treq:{i}\n{library.seqs[i]}\n+\n{library.quals[i]}\n"
                    )
                    n_out += 1
        print(f"anchors_out={n_out}", file=sys.stderr)

    return _run(run)


def main_map(argv=None):
    p = argparse.ArgumentParser(
        prog="treq-map",
        description="Recover alignments for all reads from the anchor SAM.",
    )
    p.add_argument("-q", type=int, default=10, metavar="Q", dest="quality")
    p.add_argument("-t", type=int, default=1, metavar="T", dest="threads")
    p.add_argument("-o", default=None, metavar="OUT.sam",
                   help="output SAM (default standard output)")
    p.add_argument("--insert-mean", type=float, default=None)
    p.add_argument("--insert-sd", type=float, default=None)
    p.add_argument("genome", help="reference FASTA")
    p.add_argument("cluster_prefix", help="prefix used by treq-cluster")
    p.add_argument("anchor_sam", help="SAM of the mapped anchor reads")
    p.add_argument("fastq", nargs="+", help="the original FASTQ file(s)")
    args = p.parse_args(argv)
    if len(args.fastq) > 2:
        p.error("expected one or two FASTQ files")
    if (args.insert_mean is None) != (args.insert_sd is None):
        p.error("--insert-mean and --insert-sd must be given together")

    def run():
        genomes = load_genome_fasta(args.genome)
        table = read_clusters(f"{args.cluster_prefix}.clusters.tsv")
        edges = read_edges(f"{args.cluster_prefix}.edges.tsv")
        library = load_library(args.fastq, quality_threshold=args.quality)
        if library.n_reads != table.n_reads:
            raise ValueError(
                f"cluster table has {table.n_reads} reads but the FASTQ input "
                f"has {library.n_reads}"
            )
        model = None
        if args.insert_mean is not None:
            model = InsertModel(mean=args.insert_mean, sd=args.insert_sd)
        header, records = map_all(
            library,
            table,
            edges,
            args.anchor_sam,
            genomes,
            insert_model=model,
            threads=max(1, args.threads),
        )
        out = open(args.o, "w") if args.o else sys.stdout
        try:
            for line in header:
                out.write(line + "\n")
            for rec in records:
                out.write(rec.line() + "\n")
        finally:
            if args.o:
                out.close()
        print(f"records_out={len(records)}", file=sys.stderr)

    return _run(run)


def main_predict(argv=None):
    p = argparse.ArgumentParser(
        prog="treq-predict",
        description="Forecast the expected cluster count; TSV `i T_i P_i*`.",
    )
    p.add_argument("-N", type=int, required=True, dest="n_reads")
    p.add_argument("-L", type=int, required=True, dest="read_len")
    p.add_argument("-G", type=int, required=True, dest="genome_len")
    p.add_argument("-a", type=float, default=0.5, dest="alpha")
    p.add_argument("-b", type=float, default=0.95, dest="beta")
    p.add_argument("-e", type=float, default=0.01, dest="epsilon")
    p.add_argument("--every", type=int, default=1, metavar="STEP",
                   help="emit every STEP-th row (default 1)")
    args = p.parse_args(argv)

    def run():
        inputs = PredictorInputs(
            n_reads=args.n_reads,
            read_len=args.read_len,
            genome_len=args.genome_len,
            alpha=args.alpha,
            beta=args.beta,
            epsilon=args.epsilon,
        )
        fc = expected_clusters(inputs)
        step = max(1, args.every)
        rows = sorted(set(range(1, args.n_reads + 1, step)) | {args.n_reads})
        for i in rows:
            sys.stdout.write(f"{i}\t{fc.t[i]:.6f}\t{fc.p[i]:.6e}\n")
        sys.stdout.write(f"tau={fc.tau():.6f}\n")

    return _run(run)


def main_sim(argv=None):
    p = argparse.ArgumentParser(
        prog="treq-sim",
        description="Simulate a genome and an error-bearing read library; "
        "writes <prefix>.fa, <prefix>.fq (or _1/_2) and <prefix>.truth.tsv.",
    )
    p.add_argument("-G", "--genome-len", type=int, required=True)
    p.add_argument("-L", "--read-len", type=int, default=100)
    p.add_argument("-c", "--coverage", type=float, default=None)
    p.add_argument("-N", "--n-reads", type=int, default=None)
    p.add_argument("-e", "--epsilon", type=float, default=0.01)
    p.add_argument("--paired", action="store_true")
    p.add_argument("--insert-mean", type=float, default=300.0)
    p.add_argument("--insert-sd", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("prefix", help="output file prefix")
    args = p.parse_args(argv)
    if (args.coverage is None) == (args.n_reads is None):
        p.error("give exactly one of --coverage and --n-reads")

    def run():
        params = SimParams(
            genome_len=args.genome_len,
            read_len=args.read_len,
            coverage=args.coverage,
            n_reads=args.n_reads,
            epsilon=args.epsilon,
            paired=args.paired,
            insert_mean=args.insert_mean,
            insert_sd=args.insert_sd,
            seed=args.seed,
        )
        genome = generate_genome(params.genome_len, params.seed, params.read_len)
        reads, truth = sample_reads(genome, params)
        write_genome_fasta(genome, f"{args.prefix}.fa", params.ref_name)
        if args.paired:
            paths = [f"{args.prefix}_1.fq", f"{args.prefix}_2.fq"]
        else:
            paths = [f"{args.prefix}.fq"]
        write_reads_fastq(reads, paths, args.paired)
        write_truth(truth, f"{args.prefix}.truth.tsv")
        print(
            f"n_reads={len(reads)} read_len={params.read_len} "
            f"genome_len={params.genome_len}",
            file=sys.stderr,
        )

    return _run(run)


def main_eval(argv=None):
    p = argparse.ArgumentParser(
        prog="treq-eval", description="Mapping evaluation metrics."
    )
    sub = p.add_subparsers(dest="metric", required=True)

    pa = sub.add_parser("acc", help="accuracy against a truth table")
    pa.add_argument("sam")
    pa.add_argument("truth")
    pa.add_argument("-L", type=int, required=True, dest="read_len")

    pb = sub.add_parser("alt", help="alternate mapping rate between two SAMs")
    pb.add_argument("sam_a")
    pb.add_argument("sam_b")
    pb.add_argument("--mapq", type=int, default=0)
    pb.add_argument("-L", type=int, required=True, dest="read_len")

    pc = sub.add_parser("conc", help="pair concordance of one SAM")
    pc.add_argument("sam")
    pc.add_argument("--insert-mean", type=float, required=True)
    pc.add_argument("--insert-sd", type=float, required=True)

    args = p.parse_args(argv)

    def run():
        if args.metric == "acc":
            truth = read_truth(args.truth)
            val = accuracy(args.sam, truth, args.read_len)
            sys.stdout.write(f"accuracy\t{val:.6f}\n")
        elif args.metric == "alt":
            val = alternate_mapping_rate(
                args.sam_a, args.sam_b, args.mapq, args.read_len
            )
            sys.stdout.write(f"alternate_mapping_rate\t{val:.4f}\n")
        else:
            model = InsertModel(mean=args.insert_mean, sd=args.insert_sd)
            val = concordance(read_sam(args.sam), model)
            sys.stdout.write(f"concordance\t{val:.6f}\n")

    return _run(run)

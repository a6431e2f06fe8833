import numpy as np
import pytest

from treqcg.readio import decode_seq, library_from_strings
from treqcg.simkit import SimParams, generate_genome, sample_reads


def library_from_codes(reads, paired=False, quals=None):
    return library_from_strings(
        [decode_seq(r) for r in reads], paired=paired, quals=quals
    )


def simulate_library(
    genome_len,
    coverage=None,
    n_reads=None,
    read_len=100,
    epsilon=0.01,
    paired=False,
    seed=0,
    insert_mean=300.0,
    insert_sd=30.0,
):
    genome = generate_genome(genome_len, seed, read_len)
    params = SimParams(
        genome_len=genome_len,
        read_len=read_len,
        coverage=coverage,
        n_reads=n_reads,
        epsilon=epsilon,
        paired=paired,
        insert_mean=insert_mean,
        insert_sd=insert_sd,
        seed=seed + 1,
    )
    reads, truth = sample_reads(genome, params)
    return genome, library_from_codes(reads, paired=paired), truth


@pytest.fixture(scope="session")
def small_se():
    """Small single-end simulation shared across unit tests."""
    return simulate_library(50_000, coverage=8, epsilon=0.01, seed=11)


@pytest.fixture(scope="session")
def small_pe():
    return simulate_library(50_000, coverage=8, epsilon=0.01, paired=True, seed=12)


def random_reads(rng, n, L):
    return rng.integers(0, 4, (n, L), dtype=np.uint8)

"""Cluster a simulated library and compare the result with the forecast.

Walks through the core loop of the toolkit: simulate reads from a random
genome, run the greedy clustering, and check the measured cluster fraction
against the numerical forecast computed from (N, L, G, alpha, beta, epsilon)
alone -- no reads required.

Run with:  python3 demos/cluster_and_forecast.py
"""

import numpy as np

from treqcg.cluster_engine import ClusterParams, cluster_single_end
from treqcg.predictor import PredictorInputs, expected_clusters
from treqcg.readio import decode_seq, library_from_strings
from treqcg.simkit import SimParams, generate_genome, sample_reads

GENOME_LEN = 200_000
READ_LEN = 100
COVERAGE = 25
EPSILON = 0.03

# --- simulate -------------------------------------------------------------
genome = generate_genome(GENOME_LEN, seed=1, read_len=READ_LEN)
params = SimParams(
    genome_len=GENOME_LEN,
    read_len=READ_LEN,
    coverage=COVERAGE,
    epsilon=EPSILON,
    seed=2,
)
reads, truth = sample_reads(genome, params)
library = library_from_strings([decode_seq(r) for r in reads])
print(f"simulated {library.n_reads} reads of length {READ_LEN} "
      f"({COVERAGE}x coverage, {EPSILON:.0%} error rate)")

# --- cluster --------------------------------------------------------------
table = cluster_single_end(library, ClusterParams(alpha=0.5, beta=0.95))
n_anchors, n_members, n_bad = table.class_counts()
tau = n_anchors / library.n_reads
print(f"clustering: {n_anchors} anchors, {n_members} members, {n_bad} bad "
      f"(tau = {tau:.4f})")

# --- forecast -------------------------------------------------------------
forecast = expected_clusters(
    PredictorInputs(
        library.n_reads, READ_LEN, GENOME_LEN,
        alpha=0.5, beta=0.95, epsilon=EPSILON,
    )
)
rel = (forecast.total - n_anchors) / n_anchors
print(f"forecast: {forecast.total:.0f} clusters expected "
      f"(tau = {forecast.tau():.4f}, {rel:+.1%} vs measured)")

# a few milestones along the forecast curve
for i in np.linspace(1, library.n_reads, 5, dtype=int):
    print(f"  after {i:>6} reads: T = {forecast.t[i]:9.1f}  "
          f"P* = {forecast.p[i]:.4f}")

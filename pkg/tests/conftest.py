import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scriptdiar.cluster import (
    ClusterParams,
    diarize_semisupervised,
    diarize_unsupervised,
)
from scriptdiar.metrics import der, scd_f1
from scriptdiar.synth import SynthConfig, generate_episode, generate_pseudo_labels

OPERATING_COVERAGE = 0.109
OPERATING_ACCURACY = 0.745
SWEEP_FRACTIONS = (0.01, 0.03, 0.10, 1.0)


@dataclass
class EpisodeRuns:
    k_true: int
    unsup_der: float
    unsup_scd: float
    unsup_k: int
    semi: dict  # coverage -> dict(der, scd, k)


@pytest.fixture(scope="session")
def corpus_runs() -> list[EpisodeRuns]:
    """20-episode synthetic corpus (30-60 speakers, Zipf skew) with the
    unsupervised baseline and semi-supervised runs at the reference operating
    coverage plus the ablation fractions.  Shared by the trend criteria."""
    rng = np.random.default_rng(2024)
    params = ClusterParams()
    out = []
    for ep_idx in range(20):
        n_speakers = int(rng.integers(30, 61))
        config = SynthConfig(
            n_speakers=n_speakers,
            seed=1000 + ep_idx,
            pseudo_coverage=OPERATING_COVERAGE,
            pseudo_accuracy=OPERATING_ACCURACY,
        )
        episode = generate_episode(config)
        k_true = len(episode.reference.speakers())
        utl, ures = diarize_unsupervised(episode.embeddings, params, seed=0)
        u_der = der(episode.reference, utl).der
        u_scd = scd_f1(episode.reference, utl).f1
        semi = {}
        for cov in sorted(set(SWEEP_FRACTIONS) | {OPERATING_COVERAGE}):
            pseudo = generate_pseudo_labels(
                episode.reference, config, episode.embeddings.subsegments, coverage=cov
            )
            stl, sres = diarize_semisupervised(episode.embeddings, pseudo, params, seed=0)
            semi[cov] = {
                "der": der(episode.reference, stl).der,
                "scd": scd_f1(episode.reference, stl).f1,
                "k": sres.k,
            }
        out.append(
            EpisodeRuns(
                k_true=k_true,
                unsup_der=u_der,
                unsup_scd=u_scd,
                unsup_k=ures.k,
                semi=semi,
            )
        )
    return out

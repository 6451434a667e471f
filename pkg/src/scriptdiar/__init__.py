"""Semi-supervised speaker diarization from production scripts."""

from .core import (
    EmbeddingSet,
    PseudoLabeling,
    SpeakerTimeline,
    SpeechRegion,
    SubSegment,
    TimeInterval,
    Turn,
    project_labels,
    subsegment,
)
# the `align` function stays namespaced (scriptdiar.align.align) so the
# submodule attribute is not shadowed
from .align import extract_ranges, normalize_text, span_cost
from .cluster import (
    ClusterParams,
    constrained_kmeans,
    cosine_affinity,
    diarize_semisupervised,
    diarize_unsupervised,
    estimate_k,
    kmeans,
    refine,
    spectral_embed,
)
from .metrics import corpus_significance, der, hungarian_map, scd_f1
from .synth import SynthConfig, generate_episode, generate_pseudo_labels

__version__ = "0.1.0"

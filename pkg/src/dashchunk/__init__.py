"""Compress audio-video token streams using segments found in the audio.

Audio token embeddings are segmented at cosine-similarity drops, the
segments are projected onto video token indices, audio tokens are ranked by
a fusion of boundary, uniqueness and attention signals, and each video
segment is pruned with interleaved spatial/temporal passes.
"""

from .boundary import (
    BoundaryProfile,
    BoundarySet,
    DegenerateTokenError,
    SimilarityMetric,
    adjacent_similarity,
    boundary_probabilities,
    boundary_profile,
    detect_boundaries,
)
from .pipeline import (
    DashConfig,
    DashResult,
    RetentionStats,
    SequenceResult,
    StageError,
    compute_stats,
    load_config,
    run_sequence,
    run_stream,
    run_window,
    split_windows,
)
from .projection import (
    ProjectedBoundaries,
    SegmentMap,
    audio_range_of_segment,
    project_boundaries,
    refine_boundaries,
)
from .scoring import (
    AudioRetention,
    FusionWeights,
    ImportanceScores,
    Turnover,
    attention_signal,
    boundary_signal,
    fuse_and_select,
    multiscale_uniqueness,
    select_low_variance_channels,
)
from .token_io import (
    FrameGrid,
    SyntheticSpec,
    generate_piecewise,
    read_attention_logits,
    read_token_dump,
    write_attention_logits,
    write_token_dump,
)
from .video_compress import (
    SegmentCompressionPlan,
    adaptive_ratio,
    boundary_frame_retention,
    compress_segment,
    segment_audio_retention,
    spatial_prune_frame,
    temporal_prune_frame,
)

__version__ = "0.1.0"

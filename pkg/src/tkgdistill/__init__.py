"""Cross-lingual temporal knowledge graph completion by teacher/student
distillation: a teacher trained on a complete source graph guides a student
on an incomplete target graph through an adaptive alignment module, with
pseudo-alignment generation and temporal event transfer paced over training.
"""

__version__ = "0.1.0"

from .alignment import (
    AlignParams,
    alignment_loss,
    alignment_strength,
    correspondence,
    init_align_params,
    temporal_integrate,
)
from .encoder import (
    NetworkParams,
    encode_entity,
    encode_trajectory,
    init_network_params,
    time_encode,
)
from .evaluation import (
    DiagnosticConfig,
    MetricsReport,
    evaluate,
    metrics_from_ranks,
    nce_deviation_sweep,
    rank_query,
    transfer_ratio,
)
from .distill import (
    PseudoGenConfig,
    TransferRecord,
    generate_pseudo_alignments,
    mean_similarity,
    transfer_events,
)
from .numerics import (
    AdamState,
    GradCheckReport,
    adam_step,
    cosine,
    grad_check,
    softmax_masked,
)
from .scoring import NegativeSamplerConfig, reasoning_loss, score_quadruple
from .tkg import (
    AlignmentPair,
    AlignmentSet,
    GeneratorConfig,
    Quadruple,
    SplitSpec,
    TemporalKG,
    Vocabulary,
    expand_intervals,
    generate_synthetic_pair,
    inject_alignment_noise,
    load_quadruples,
    split_by_time,
    subsample_events,
)
from .trainer import (
    TrainConfig,
    TrainState,
    combined_loss,
    init_student_from_teacher,
    pretrain_teacher,
    train_mpkd,
)

__all__ = [name for name in dir() if not name.startswith("_")]

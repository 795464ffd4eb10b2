from .vfl_system import (
    Batch,
    PassiveClient,
    RoundRecord,
    VflSystem,
    accuracy,
    build_vfl_system,
    honest_round,
    iterate_batches,
    predict,
    predict_logits,
    run_honest_training,
)

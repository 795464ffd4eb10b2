from .models import AttackModels, DacLabelMap, PlainLabelMap, build_attack_models
from .urvfl import (
    VARIANTS,
    AttackTrace,
    EmbeddingDistances,
    clean_embeddings,
    embedding_distances,
    encoder_embeddings,
    malicious_round,
    observed_embeddings,
    plain_discriminator_round,
    pretrain,
    pretrain_epoch,
    probe_accuracy,
    reconstruct,
    reconstruct_rows,
    reconstruction_step,
    run_attack,
    sample_aux_batch,
    sync_round,
)

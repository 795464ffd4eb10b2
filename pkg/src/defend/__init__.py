from .defenses import (
    DefenseConfig,
    DefensePipeline,
    dcor,
    dcor_tensor,
    dp_laplace_gradients,
    nopeek_loss,
    obfuscate_embeddings,
)

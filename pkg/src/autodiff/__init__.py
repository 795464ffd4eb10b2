from .tensor import Tensor, as_tensor, backward, concat_features, pairwise_distances
from .network import Activation, Affine, Network
from .optim import Optimizer, OptimizerState, optimizer_step
from .losses import cross_entropy_loss, log_softmax, mse_loss, softmax


def network_forward(net: Network, x) -> Tensor:
    return net.forward(x)

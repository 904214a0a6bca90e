"""pairlab: paired-autoencoder inversion with latent-space inference.

Library layout:
    linalg       spectral primitives (SVD, truncation, pseudoinverse, eigen sqrt)
    forward      tomography operator, phantoms, Gaussian sampling, noise
    masks        missing-data operators
    dataset      paired-sample container and normalization statistics
    linear_pair  closed-form optimal linear pairs and their latent inversions
    autodiff     reverse-mode tape for the dense networks
    pair_net     trainable paired autoencoders, loss, gradients, Adam training
    lbfgs        L-BFGS with strong Wolfe line search
    lsi          latent-space inference drivers and the Tikhonov baseline
    diagnostics  RRE/SSIM, OOD indicators, stability-bound certificates
    config, cli  experiment configuration and the `pairlab` command
"""

from .dataset import Dataset, Normalization, compute_normalization, load_dataset, save_dataset
from .forward import (
    ForwardOperator,
    GaussianModelSpec,
    build_radon,
    generate_phantoms,
    sample_gaussian_models,
    simulate_observations,
)
from .lbfgs import LbfgsConfig, LbfgsResult, lbfgs_minimize
from .linear_pair import (
    LinearPair,
    closed_form_lsi_zx,
    closed_form_lsi_zy,
    mmse_oracle,
    optimal_linear_pair,
    pair_inverse_linear,
)
from .lsi import LsiResult, lsi_observation_space, lsi_parameter_space, model_space_lsi, tikhonov_baseline
from .masks import MaskOperator, apply_mask, make_mask
from .pair_net import (
    MlpSpec,
    PairModel,
    PairSpec,
    TrainConfig,
    init_model,
    load_model,
    pair_loss,
    pair_loss_grad,
    save_model,
    train,
)

__version__ = "0.1.0"

"""Latent-variable models fit by variational inference."""

from .divergence import entropy_categorical, kl_gaussian_diag, xlogx
from .gmm import (GmmState, KMeansResult, gmm_e_step, gmm_elbo, gmm_fit, gmm_log_density,
                  gmm_m_step, gmm_minibatch_step, kmeans_best_of, kmeans_fit, sq_dists, wcss)
from .importance import ISResult, is_log_marginal, log_mean_exp
from .mdn import MdnModel, mdn_credible_set, mdn_loss, mdn_loss_value
from .ppca import (PpcaState, ppca_e_step, ppca_elbo, ppca_fit, ppca_m_step,
                   ppca_minibatch_step, principal_angles)
from .vae import (VaeModel, linear_gaussian_elbo, linear_gaussian_log_marginal,
                  linear_gaussian_posterior, vae_loss, vae_loss_var)

__all__ = [
    "entropy_categorical", "kl_gaussian_diag", "xlogx", "GmmState", "KMeansResult", "gmm_e_step",
    "gmm_elbo", "gmm_fit", "gmm_log_density", "gmm_m_step", "gmm_minibatch_step",
    "kmeans_best_of", "kmeans_fit", "sq_dists", "wcss", "ISResult", "is_log_marginal",
    "log_mean_exp", "MdnModel", "mdn_credible_set", "mdn_loss", "mdn_loss_value", "PpcaState",
    "ppca_e_step", "ppca_elbo", "ppca_fit", "ppca_m_step", "ppca_minibatch_step",
    "principal_angles", "VaeModel", "linear_gaussian_elbo", "linear_gaussian_log_marginal",
    "linear_gaussian_posterior", "vae_loss", "vae_loss_var",
]

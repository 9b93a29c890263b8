"""Energy-based models: RBMs, Markov chain samplers, kernel discrepancies, adversarial training."""

from .ebgan import (AutoencoderEnergy, MlpEnergy, ebgan_losses, ebgan_train, generator_samples,
                    inflated_gaussian)
from .mcmc import (MarkovChainState, Proposal, gaussian_random_walk, independence_proposal,
                   mh_step, run_chain, run_chains_gaussian_rw)
from .mmd import (gaussian_gram, gaussian_kernel, median_heuristic, mmd2, mmd2_permutation_null,
                  mmd2_permutation_test, mmd2_terms, mmd2_var, sq_dist_matrix)
from .rbm import (PcdBuffer, RbmParams, cd_k_gradient, enumerate_states, free_energy_grad,
                  gibbs_sweep, pcd_update, rbm_cond_hidden, rbm_cond_visible, rbm_energy,
                  rbm_free_energy, rbm_log_likelihood, rbm_log_partition, rbm_train,
                  rbm_unnorm_logp, rbm_visible_probs, state_index)

__all__ = [
    "AutoencoderEnergy", "MlpEnergy", "ebgan_losses", "ebgan_train", "generator_samples",
    "inflated_gaussian", "MarkovChainState", "Proposal", "gaussian_random_walk",
    "independence_proposal", "mh_step", "run_chain", "run_chains_gaussian_rw", "gaussian_gram",
    "gaussian_kernel", "median_heuristic", "mmd2", "mmd2_permutation_null", "mmd2_permutation_test", "mmd2_terms", "mmd2_var", "sq_dist_matrix",
    "PcdBuffer", "RbmParams", "cd_k_gradient", "enumerate_states", "free_energy_grad",
    "gibbs_sweep", "pcd_update", "rbm_cond_hidden", "rbm_cond_visible", "rbm_energy",
    "rbm_free_energy", "rbm_log_likelihood", "rbm_log_partition", "rbm_train",
    "rbm_unnorm_logp", "rbm_visible_probs", "state_index",
]

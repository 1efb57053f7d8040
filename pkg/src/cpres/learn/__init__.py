from .adversarial import AdversarialConfig, ModeCollapse, airl_reward, airl_train, gail_train
from .imitation import BCConfig, DaggerConfig, DaggerSchedule, bc_train, bc_train_dataset, dagger_train
from .losses import airl_disc_loss, airl_discriminator, bc_loss, gail_disc_loss, ppo_loss
from .mlp import Adam, MlpArch, MlpParams, mlp_backward, mlp_forward, mlp_grad
from .policy import PolicyNet, ValueNet, entropy_estimate, factor_indices, flat_actions, one_hot_factors
from .ppo import PPOConfig, PPOLearner, RolloutBatch, Sampler, TrainResult, compute_gae, ppo_train, ppo_update
from .reward import LinearRewardHead, RewardNet, feature_expectation, linear_reward, reward_eval

__all__ = [
    "Adam", "AdversarialConfig", "BCConfig", "DaggerConfig", "DaggerSchedule", "LinearRewardHead",
    "MlpArch", "MlpParams", "ModeCollapse", "PPOConfig", "PPOLearner", "PolicyNet", "RewardNet",
    "RolloutBatch", "Sampler", "TrainResult", "ValueNet", "airl_disc_loss", "airl_discriminator",
    "airl_reward", "airl_train", "bc_loss", "bc_train", "bc_train_dataset", "compute_gae", "dagger_train",
    "entropy_estimate", "factor_indices", "feature_expectation", "flat_actions", "gail_disc_loss",
    "gail_train", "linear_reward", "mlp_backward", "mlp_forward", "mlp_grad", "one_hot_factors",
    "ppo_loss", "ppo_train", "ppo_update", "reward_eval",
]

"""Losses with analytic parameter gradients: BC negative log-likelihood,
PPO clipped surrogate and the two discriminator cross-entropies."""
from __future__ import annotations

import numpy as np

from .policy import PolicyNet, factor_indices
from .reward import RewardNet


def softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def airl_discriminator(f, log_pi):
    """D = exp(f) / (exp(f) + pi), computed as sigmoid(f - log pi)."""
    return sigmoid(np.asarray(f, dtype=float) - np.asarray(log_pi, dtype=float))


def bc_loss(policy: PolicyNet, obs, acts):
    """Mean negative log-likelihood of expert actions."""
    logits, cache = policy.logits(obs, return_cache=True)
    n = logits.shape[0]
    lps = policy.log_probs_per_factor(logits)
    idx = factor_indices(np.atleast_1d(acts), policy.action_dims)
    rows = np.arange(n)
    logp = sum(lp[rows, idx[:, k]] for k, lp in enumerate(lps))
    loss = -float(np.mean(logp))
    g = policy.logit_grads(logits, acts, np.full(n, -1.0 / n))
    return loss, policy.backward(cache, g)


def ppo_loss(policy: PolicyNet, obs, acts, old_logp, adv, clip: float = 0.2, ent_coef: float = 0.0):
    """Negative clipped surrogate minus the entropy bonus; returns (loss, grads, stats)."""
    logits, cache = policy.logits(obs, return_cache=True)
    n = logits.shape[0]
    lps = policy.log_probs_per_factor(logits)
    idx = factor_indices(np.atleast_1d(acts), policy.action_dims)
    rows = np.arange(n)
    logp = sum(lp[rows, idx[:, k]] for k, lp in enumerate(lps))
    ent = sum(-(np.exp(lp) * lp).sum(axis=1) for lp in lps)
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    s1, s2 = ratio * adv, clipped * adv
    surr = np.minimum(s1, s2)
    loss = -float(np.mean(surr)) - ent_coef * float(np.mean(ent))
    # gradient flows through the unclipped branch unless the ratio sits on or past the bound
    # that the advantage pushes it toward; a ratio on the bound counts as clipped
    active = ~(((adv > 0) & (ratio >= 1.0 + clip)) | ((adv < 0) & (ratio <= 1.0 - clip)))
    coef_logp = np.where(active, -ratio * adv, 0.0) / n
    coef_ent = np.full(n, -ent_coef / n) if ent_coef else None
    g = policy.logit_grads(logits, acts, coef_logp, coef_ent)
    stats = {
        "approx_kl": float(np.mean(old_logp - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip)),
        "entropy": float(np.mean(ent)),
    }
    return loss, policy.backward(cache, g), stats


def bce_terms(u_e, u_g):
    """Cross-entropy on logits u = logit P(expert); returns (loss, dL/du_e, dL/du_g, accuracy)."""
    ne, ng = len(u_e), len(u_g)
    loss = float(np.mean(softplus(-u_e)) + np.mean(softplus(u_g)))
    acc = 0.5 * (float(np.mean(u_e > 0)) + float(np.mean(u_g < 0)))
    return loss, (sigmoid(u_e) - 1.0) / ne, sigmoid(u_g) / ng, acc


def gail_disc_loss(disc: RewardNet, obs_e, acts_e, obs_g, acts_g):
    """Cross-entropy for D = sigmoid(net) = P(sample came from the generator)."""
    z_e, c_e = disc.forward_cache(obs_e, acts_e)
    z_g, c_g = disc.forward_cache(obs_g, acts_g)
    loss, du_e, du_g, acc = bce_terms(-z_e, -z_g)
    grads = [a + b for a, b in zip(disc.backward(c_e, -du_e), disc.backward(c_g, -du_g))]
    return loss, grads, acc


def airl_disc_loss(f_net: RewardNet, obs_e, acts_e, logpi_e, obs_g, acts_g, logpi_g):
    """Cross-entropy for D = exp(f)/(exp(f)+pi) = P(sample came from the expert)."""
    f_e, c_e = f_net.forward_cache(obs_e, acts_e)
    f_g, c_g = f_net.forward_cache(obs_g, acts_g)
    loss, du_e, du_g, acc = bce_terms(f_e - logpi_e, f_g - logpi_g)
    grads = [a + b for a, b in zip(f_net.backward(c_e, du_e), f_net.backward(c_g, du_g))]
    return loss, grads, acc

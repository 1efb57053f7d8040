import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpres.errors import EmptyDataset, ShapeMismatch
from cpres.experts import collect_transitions, make_expert
from cpres.learn import (Adam, AdversarialConfig, BCConfig, DaggerConfig, DaggerSchedule, LinearRewardHead,
                         MlpArch, MlpParams, PPOConfig, PPOLearner, PolicyNet, RewardNet, Sampler, ValueNet,
                         airl_disc_loss, airl_discriminator, bc_loss, bc_train, dagger_train, entropy_estimate,
                         feature_expectation, gail_disc_loss, gail_train, linear_reward, mlp_forward, mlp_grad,
                         ppo_loss, ppo_train, ppo_update, reward_eval)
from cpres.learn.adversarial import Discriminator
from cpres.netsim import NetSimEnv
from cpres.simcore import Env, MdpSpec, StepResult


# ---- tiny environments -----------------------------------------------------------

class Bandit(Env):
    """One state, two arms; arm 0 pays 1, arm 1 pays 0, every episode lasts one step."""

    env_id = "bandit"

    def __init__(self):
        super().__init__()
        self.spec = MdpSpec(1, (2,), gamma=0.9, max_steps=1)

    def _reset(self, seed):
        return StepResult(np.ones(1), 0.0, False)

    def _step(self, action):
        return StepResult(np.ones(1), 1.0 if action == 0 else 0.0, True)


class Absorbing(Env):
    """A single state that never ends."""

    env_id = "absorbing"

    def __init__(self, gamma=0.9):
        super().__init__()
        self.spec = MdpSpec(1, (1,), gamma=gamma, max_steps=10_000)

    def _reset(self, seed):
        return StepResult(np.ones(1), 0.0, False)

    def _step(self, action):
        return StepResult(np.ones(1), 0.0, False, {"goal_reached": False})


# ---- finite-difference oracle ------------------------------------------------------

def numeric_grad(params, loss_fn, h=1e-5):
    v = params.flat()
    g = np.zeros_like(v)
    for i in range(len(v)):
        w = v.copy()
        w[i] += h
        params.set_flat(w)
        a = loss_fn()
        w[i] -= 2 * h
        params.set_flat(w)
        b = loss_fn()
        g[i] = (a - b) / (2 * h)
    params.set_flat(v)
    return g


def flat(grads):
    return np.concatenate([g.ravel() for g in grads])


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def random_policy(rng, obs_dim=4, dims=(3, 2), hidden=(6, 6)):
    pol = PolicyNet(obs_dim, dims, hidden, rng=1)
    pol.params.set_flat(rng.normal(size=pol.params.n_params))
    return pol


# ---- mlp -------------------------------------------------------------------------

def naive_forward(params, x):
    """Loop-based forward pass."""
    h = list(x)
    n = len(params.weights)
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        out = []
        for j in range(w.shape[1]):
            s = b[j]
            for i in range(w.shape[0]):
                s += h[i] * w[i, j]
            out.append(math.tanh(s) if li < n - 1 else s)
        h = out
    return np.array(h)


def test_zero_params_give_zero_output():
    p = MlpParams.zeros(MlpArch(5, (4, 4), 3))
    np.testing.assert_array_equal(mlp_forward(p, np.arange(5.0)), np.zeros(3))


def test_identity_single_layer_is_activation():
    arch = MlpArch(3, (3,), 3)
    p = MlpParams.zeros(arch)
    p.weights[0][...] = np.eye(3)
    p.weights[1][...] = np.eye(3)
    x = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(mlp_forward(p, x), np.tanh(x), atol=1e-15)


def test_forward_matches_naive_oracle():
    rng = np.random.default_rng(0)
    p = MlpParams.init(MlpArch(6, (7, 5), 3), rng)
    p.set_flat(rng.normal(size=p.n_params))
    for _ in range(10):
        x = rng.normal(size=6)
        np.testing.assert_allclose(mlp_forward(p, x), naive_forward(p, x), rtol=0, atol=1e-12)


def test_forward_shape_mismatch():
    p = MlpParams.zeros(MlpArch(5, (4,), 1))
    with pytest.raises(ShapeMismatch):
        mlp_forward(p, np.zeros(4))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["tanh", "relu", "linear"]))
def test_mlp_grad_matches_finite_differences(seed, act):
    rng = np.random.default_rng(seed)
    p = MlpParams.init(MlpArch(4, (6, 5), 2, act), rng)
    p.set_flat(rng.normal(size=p.n_params))
    assert p.n_params <= 200
    x = rng.normal(size=(3, 4))
    up = rng.normal(size=(3, 2))
    analytic = mlp_grad(p, x, up).flat()
    numeric = numeric_grad(p, lambda: float(np.sum(up * mlp_forward(p, x))))
    assert rel_err(analytic, numeric) < 1e-4


def test_zero_upstream_zero_grad():
    rng = np.random.default_rng(1)
    p = MlpParams.init(MlpArch(4, (6,), 2), rng)
    assert not mlp_grad(p, rng.normal(size=(5, 4)), np.zeros((5, 2))).flat().any()


def test_linear_net_weight_gradient_closed_form():
    rng = np.random.default_rng(2)
    p = MlpParams.init(MlpArch(3, (), 2, "linear"), rng)
    x = rng.normal(size=3)
    up = rng.normal(size=2)
    g = mlp_grad(p, x, up)
    np.testing.assert_array_equal(g.weights[0], np.outer(x, up))


# ---- loss gradients --------------------------------------------------------------

def test_bc_loss_gradient():
    rng = np.random.default_rng(0)
    pol = random_policy(rng)
    obs, acts = rng.normal(size=(7, 4)), rng.integers(6, size=7)
    _, g = bc_loss(pol, obs, acts)
    assert rel_err(flat(g), numeric_grad(pol.params, lambda: bc_loss(pol, obs, acts)[0])) < 1e-4


@pytest.mark.parametrize("clip,ent", [(0.2, 0.0), (0.2, 0.05), (10.0, 0.01)])
def test_ppo_loss_gradient(clip, ent):
    rng = np.random.default_rng(1)
    pol = random_policy(rng)
    obs, acts = rng.normal(size=(7, 4)), rng.integers(6, size=7)
    old = pol.log_prob(obs, acts) + rng.normal(scale=0.3, size=7)
    adv = rng.normal(size=7)
    _, g, _ = ppo_loss(pol, obs, acts, old, adv, clip, ent)
    num = numeric_grad(pol.params, lambda: ppo_loss(pol, obs, acts, old, adv, clip, ent)[0])
    assert rel_err(flat(g), num) < 1e-4


@pytest.mark.parametrize("mode", ["state_action", "state_only"])
def test_discriminator_loss_gradients(mode):
    rng = np.random.default_rng(2)
    d = RewardNet(4, (3, 2), mode, hidden=(6, 6), rng=2)
    d.params.set_flat(rng.normal(size=d.params.n_params))
    assert d.params.n_params <= 200
    oe, ae = rng.normal(size=(5, 4)), rng.integers(6, size=5)
    og, ag = rng.normal(size=(7, 4)), rng.integers(6, size=7)
    _, g, _ = gail_disc_loss(d, oe, ae, og, ag)
    assert rel_err(flat(g), numeric_grad(d.params, lambda: gail_disc_loss(d, oe, ae, og, ag)[0])) < 1e-4
    le, lg = rng.normal(size=5), rng.normal(size=7)
    _, g, _ = airl_disc_loss(d, oe, ae, le, og, ag, lg)
    num = numeric_grad(d.params, lambda: airl_disc_loss(d, oe, ae, le, og, ag, lg)[0])
    assert rel_err(flat(g), num) < 1e-4


def test_airl_identity_half():
    rng = np.random.default_rng(3)
    pol = random_policy(rng)
    obs = rng.normal(size=(1000, 4))
    acts = rng.integers(6, size=1000)
    lp = pol.log_prob(obs, acts)
    d = airl_discriminator(lp, lp)
    assert np.max(np.abs(d - 0.5)) < 1e-9


# ---- policy ----------------------------------------------------------------------

def test_heads_normalized():
    rng = np.random.default_rng(4)
    pol = random_policy(rng, dims=(3, 3, 4))
    for p in pol.probs(rng.normal(size=(1000, 4)) * 3):
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)


def test_sampled_log_prob_finite_and_consistent():
    rng = np.random.default_rng(5)
    pol = random_policy(rng)
    obs = rng.normal(size=(50, 4))
    a, lp = pol.sample(obs, rng)
    assert np.all(np.isfinite(lp))
    np.testing.assert_allclose(lp, pol.log_prob(obs, a), atol=1e-12)


def test_entropy_closed_forms():
    uniform = PolicyNet(2, (3, 3), (4,), params=MlpParams.zeros(MlpArch(2, (4,), 6)))
    assert entropy_estimate(uniform, np.zeros((5, 2))) == pytest.approx(2 * np.log(3), abs=1e-12)
    det = PolicyNet(2, (3, 3), (4,), params=MlpParams.zeros(MlpArch(2, (4,), 6)))
    det.params.biases[-1][[0, 3]] = 800.0
    assert entropy_estimate(det, np.zeros((5, 2))) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        entropy_estimate(uniform, np.zeros((0, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_entropy_bound(seed):
    rng = np.random.default_rng(seed)
    pol = random_policy(rng, dims=(3, 2, 4))
    assert entropy_estimate(pol, rng.normal(size=(20, 4))) <= np.log(24) + 1e-12


# ---- PPO ------------------------------------------------------------------------

def bandit_batch(policy, rng, n=64):
    env = Bandit()
    sampler = Sampler(env, int(rng.integers(2**31)))
    return sampler.collect(policy, n)


def test_ppo_bandit_monotone_to_optimum():
    env = Bandit()
    learner = PPOLearner(1, (2,), PPOConfig(n_steps=64, epochs=4, minibatch=32, lr=1e-2, ent_coef=0.0), seed=0)
    sampler = Sampler(env, 0)
    probs = [learner.policy.probs(np.ones(1))[0][0, 0]]
    for _ in range(30):
        batch = sampler.collect(learner.policy, 64)
        learner.prepare(batch, gamma=env.spec.gamma)
        learner.update(batch)
        probs.append(learner.policy.probs(np.ones(1))[0][0, 0])
    assert all(b >= a - 1e-9 for a, b in zip(probs, probs[1:]))
    assert probs[-1] > 0.9


def make_update_parts(config, seed=0):
    rng = np.random.default_rng(seed)
    pol = PolicyNet(1, (2,), (8,), rng=seed)
    val = ValueNet(1, (8,), rng=seed)
    batch = bandit_batch(pol, rng)
    batch.ret = batch.env_rewards.copy()
    opt_pi = Adam(pol.params.arrays(), lr=1e-2)
    opt_v = Adam(val.params.arrays(), lr=1e-2)
    return pol, val, batch, opt_pi, opt_v, rng


def test_zero_advantage_leaves_policy_unchanged():
    cfg = PPOConfig(epochs=3, minibatch=16, ent_coef=0.0)
    pol, val, batch, opt_pi, opt_v, rng = make_update_parts(cfg)
    batch.adv = np.zeros(len(batch))
    before = pol.params.flat()
    ppo_update(pol, val, batch, cfg, opt_pi, opt_v, rng)
    np.testing.assert_array_equal(pol.params.flat(), before)


def test_zero_clip_range_freezes_policy():
    cfg = PPOConfig(epochs=3, minibatch=16, clip=0.0, ent_coef=0.0)
    pol, val, batch, opt_pi, opt_v, rng = make_update_parts(cfg)
    batch.adv = rng.normal(size=len(batch))
    before = pol.params.flat()
    st = ppo_update(pol, val, batch, cfg, opt_pi, opt_v, rng)
    np.testing.assert_array_equal(pol.params.flat(), before)
    assert {"approx_kl", "clip_frac"} <= set(st)


# ---- BC and DAgger ---------------------------------------------------------------

def test_bc_memorizes_single_pair():
    pol = PolicyNet(3, (3, 3), rng=0)
    s = np.array([[0.2, -0.4, 1.0]])
    pol, loss = bc_train(s, [7], pol, BCConfig(epochs=500, lr=1e-2))
    assert np.exp(pol.log_prob(s, [7])[0]) > 0.99


def test_bc_empty_dataset():
    with pytest.raises(EmptyDataset):
        bc_train(np.zeros((0, 3)), [], PolicyNet(3, (2,), rng=0))


def test_bc_beats_uniform_on_held_out_expert_data():
    env = NetSimEnv("N6")
    train = collect_transitions(env, make_expert(env, 0), 2000, seed=0)
    test = collect_transitions(env, make_expert(env, 1), 500, seed=1)
    obs, acts, _, _ = train.arrays()
    pol, _ = bc_train(obs, acts, PolicyNet(env.spec.obs_dim, env.spec.action_dims, rng=0))
    to, ta, _, _ = test.arrays()
    held_out, _ = bc_loss(pol, to, ta)
    assert held_out <= np.log(env.spec.n_actions)


class RecordingEnv:
    """Forwards to an environment and logs every (expert label, executed action) pair."""

    def __init__(self, env):
        self.env, self.spec, self.pairs, self.pending = env, env.spec, [], None

    def reset(self, seed=None):
        self.pending = None
        return self.env.reset(seed=seed)

    def step(self, a):
        if self.pending is not None:
            self.pairs.append((self.pending, int(a)))
            self.pending = None
        return self.env.step(a)


class LabelRecorder:
    def __init__(self, expert, env):
        self.expert, self.env = expert, env

    def __call__(self, obs):
        a = self.expert(obs)
        self.env.pending = int(a)
        return a


def test_dagger_beta_one_follows_expert_and_aggregates():
    base = NetSimEnv("N6")
    env = RecordingEnv(base)
    expert = LabelRecorder(make_expert(base, 0), env)
    cfg = DaggerConfig(iterations=4, val_episodes=3, bc=BCConfig(epochs=2))
    res = dagger_train(env, expert, 400, DaggerSchedule("constant", 1.0), cfg, seed=0)
    assert env.pairs and all(label == act for label, act in env.pairs)
    sizes = [h["dataset_size"] for h in res.history]
    assert sizes == [100, 200, 300, 400]


def test_dagger_schedules():
    assert DaggerSchedule().betas(3) == [1.0, 0.0, 0.0]
    assert DaggerSchedule("decay", 0.5).betas(3) == [1.0, 0.5, 0.25]
    with pytest.raises(ValueError):
        DaggerSchedule("constant", 1.5)


# ---- adversarial ------------------------------------------------------------------

def train_disc(kind, sample_e, sample_g, steps=400, seed=0):
    rng = np.random.default_rng(seed)
    net = RewardNet(2, (2,), hidden=(16, 16), rng=seed)
    disc = Discriminator(kind, net, 3e-3, 0.5)
    for _ in range(steps):
        oe, ae = sample_e(rng, 128)
        og, ag = sample_g(rng, 128)
        lp = None if kind == "gail" else np.full(128, np.log(0.5))
        disc.step((oe, ae, lp, 0), (og, ag, lp, 0))
    oe, ae = sample_e(rng, 4000)
    og, ag = sample_g(rng, 4000)
    lp = None if kind == "gail" else np.full(4000, np.log(0.5))
    return 0.5 * (np.mean(disc.logits(oe, ae, lp) > 0) + np.mean(disc.logits(og, ag, lp) < 0))


def gaussian(center):
    return lambda rng, n: (rng.normal(loc=center, size=(n, 2)), rng.integers(2, size=n))


@pytest.mark.parametrize("kind", ["gail", "airl"])
def test_identical_distributions_give_chance_accuracy(kind):
    acc = train_disc(kind, gaussian(0.0), gaussian(0.0))
    assert 0.45 <= acc <= 0.55


@pytest.mark.parametrize("kind", ["gail", "airl"])
def test_separated_clusters_are_classified(kind):
    acc = train_disc(kind, gaussian(3.0), gaussian(-3.0))
    assert acc > 0.95


def test_state_only_reward_ignores_action():
    rng = np.random.default_rng(0)
    net = RewardNet(4, (3, 3), "state_only", rng=0)
    s = rng.normal(size=4)
    assert reward_eval(net, s, 0) == reward_eval(net, s, 8)


def test_reward_eval_equals_forward_on_concatenation():
    rng = np.random.default_rng(1)
    net = RewardNet(4, (3, 3), rng=0)
    s = rng.normal(size=4)
    x = np.concatenate([s, [0, 1, 0], [0, 0, 1]])    # action 1 + 3*2 = 7
    assert reward_eval(net, s, 7) == pytest.approx(float(mlp_forward(net.params, x)[0]), abs=1e-15)


def test_reward_eval_shape_mismatch():
    net = RewardNet(4, (3,), rng=0)
    with pytest.raises(ShapeMismatch):
        reward_eval(net, np.zeros(3), 0)


# ---- feature expectation and linear head ----------------------------------------------

def test_feature_expectation_geometric_series():
    mu = feature_expectation(lambda obs: 0, Absorbing(0.9), n_rollouts=3)
    assert mu[0] == pytest.approx(10.0, abs=0.01)


def test_feature_expectation_gamma_zero_is_initial_mean():
    env = NetSimEnv("N6")
    mu = feature_expectation(lambda obs: 0, env, gamma=0.0, n_rollouts=20, seed=3)
    seeds = np.random.SeedSequence(3).generate_state(20, dtype=np.uint64)
    expect = np.mean([env.reset(seed=int(s)).obs for s in seeds], axis=0)
    np.testing.assert_allclose(mu, expect, atol=1e-15)


def test_feature_expectation_rejects_zero_rollouts():
    with pytest.raises(ValueError):
        feature_expectation(lambda obs: 0, Absorbing(), n_rollouts=0)


def test_feature_expectation_bc_closer_to_expert_than_random():
    env = NetSimEnv("N6")
    expert = make_expert(env, 0)
    data = collect_transitions(env, expert, 3000, seed=0)
    obs, acts, _, _ = data.arrays()
    pol, _ = bc_train(obs, acts, PolicyNet(env.spec.obs_dim, env.spec.action_dims, rng=0))
    rng = np.random.default_rng(0)
    mu_e = feature_expectation(expert, env, n_rollouts=200, seed=1)
    mu_bc = feature_expectation(pol.actor(), env, n_rollouts=200, seed=1)
    mu_r = feature_expectation(lambda obs: int(rng.integers(env.spec.n_actions)), env, n_rollouts=200, seed=1)
    assert np.max(np.abs(mu_e - mu_bc)) < np.max(np.abs(mu_e - mu_r))


def test_linear_reward_cases():
    r1 = lambda t, s: 2.0
    r2 = lambda t, s: -1.0
    zero = LinearRewardHead([r1, r2], obs_dim=2)
    assert linear_reward(3, [0.1, 0.2], zero) == 0.0
    ident = LinearRewardHead([lambda t, s: t + s[0]], obs_dim=2, bias=np.array([1.0]))
    assert linear_reward(4, [0.5, 9.0], ident) == 4.5
    half = LinearRewardHead([r1, r2], obs_dim=2, bias=np.array([0.5, 1.0]))
    assert linear_reward(0, [0.0, 0.0], half) == 0.0


def test_linear_head_fit_recovers_weights():
    rng = np.random.default_rng(0)
    metrics = [lambda t, s: s[0] - s[1], lambda t, s: 1.0]
    truth = LinearRewardHead(metrics, 2, weight=rng.normal(size=(2, 3)), bias=rng.normal(size=2))
    ts = rng.integers(0, 10, size=60)
    ss = rng.normal(size=(60, 2))
    y = [linear_reward(t, s, truth) for t, s in zip(ts, ss)]
    fit = LinearRewardHead(metrics, 2).fit(ts, ss, y, ridge=1e-12)
    for t, s in zip(ts[:5], ss[:5]):
        assert linear_reward(t, s, fit) == pytest.approx(linear_reward(t, s, truth), abs=1e-8)


# ---- determinism and update safety --------------------------------------------------

def test_training_stats_deterministic_and_finite():
    def stats(fn):
        hist = []
        fn(lambda st: hist.append(st))
        return hist

    env = NetSimEnv("N6")
    data = collect_transitions(env, make_expert(env, 0), 300, seed=0)
    cfg = PPOConfig(n_steps=128, epochs=2)
    runs = [stats(lambda cb: ppo_train(NetSimEnv("N6"), 256, cfg, seed=2, callback=cb)) for _ in range(2)]
    assert runs[0] == runs[1]
    acfg = AdversarialConfig(ppo=cfg)
    runs = [stats(lambda cb: gail_train(NetSimEnv("N6"), data, 256, acfg, seed=2, callback=cb)) for _ in range(2)]
    assert runs[0] == runs[1]
    assert all(np.isfinite(v) for h in runs[0] for v in h.values())

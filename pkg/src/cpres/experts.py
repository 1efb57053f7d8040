"""Expert demonstrators: heuristic rerouting and spanning-tree switching.

Experts are privileged: they hold a reference to the environment they label and
read its current routing table / switch states in addition to the observation.
"""
from __future__ import annotations

import logging
from collections import deque
from functools import lru_cache

import networkx as nx
import numpy as np

from .cpenv import CyberPhysicalEnv
from .dataset import Trajectory, TrajectoryDataset
from .errors import CpresError, NoAlternatePath, Unrestorable
from .feedersim import FeederEnv, check_radiality, count_unrestored, solve_power_flow
from .netsim import NetSimEnv
from .simcore import RngStream, as_generator, encode_action

log = logging.getLogger(__name__)

COMPROMISE_THRESHOLD = 0.5


# ---------------------------------------------------------------------------
# rerouting
# ---------------------------------------------------------------------------
class ReroutingExpert:
    """Pick a (router, next hop) pair that steers traffic around a suspected DoS router.

    Routers whose last-interval drop rate exceeds ``threshold`` are treated as
    compromised. For each of them, the controllable routers whose current
    forward path to the DA crosses it are the candidates to act on; each
    candidate proposes the interface, among first hops of DA paths that avoid
    the compromised router, with the lowest observed drop rate (ties: shorter
    detour, then interface order). One proposal is sampled uniformly.
    """

    def __init__(self, env: NetSimEnv, seed=0, threshold: float = COMPROMISE_THRESHOLD):
        self.env = env
        self.threshold = threshold
        self.rng = as_generator(seed)
        spec = env.net.spec
        self._graph = spec.graph()
        self._da = spec.da_router

    def reseed(self, seed):
        self.rng = as_generator(seed)

    @lru_cache(maxsize=None)
    def detour_hops(self, router: str, avoid: str) -> dict[str, int]:
        """First hops of simple router->DA paths avoiding ``avoid``, with the shortest length via each."""
        if router == avoid:
            return {}
        g = self._graph.copy()
        g.remove_node(avoid)
        out: dict[str, int] = {}
        for path in nx.all_simple_paths(g, router, self._da):
            hop = path[1]
            out[hop] = min(out.get(hop, len(path)), len(path))
        return out

    def forward_path(self, router: str) -> list[str]:
        net = self.env.net
        table = net.routing_table()
        path, cur = [router], router
        for _ in range(net.ttl):
            if cur == self._da:
                break
            cur = table[cur]
            if cur is None or cur in path:
                break
            path.append(cur)
        return path

    def inferred_compromised(self, obs) -> list[str]:
        net = self.env.net
        drop = np.asarray(obs)[: net.n_routers]
        return [net.ids[i] for i in np.flatnonzero(drop > self.threshold)]

    def candidate_policies(self, obs) -> list[tuple[str, str]]:
        net = self.env.net
        drop = np.asarray(obs)[: net.n_routers]
        pi: list[tuple[str, str]] = []
        stuck = []
        for r in self.inferred_compromised(obs):
            parents = [p for p in net.spec.controllable if p != r and r in self.forward_path(p)]
            for p in parents:
                hops = self.detour_hops(p, r)
                usable = [h for h in net.spec.interfaces[p] if h in hops]
                if not usable:
                    stuck.append((p, r))
                    continue
                best = min(usable, key=lambda h: (drop[net.index[h]], hops[h],
                                                  net.spec.interfaces[p].index(h)))
                if (p, best) not in pi:
                    pi.append((p, best))
        if not pi and stuck:
            raise NoAlternatePath(f"no detour for {stuck}")
        return pi

    def factors_for(self, router: str, hop: str) -> tuple[int, ...]:
        net = self.env.net
        spec = net.spec
        iface = spec.interfaces[router].index(hop)
        if spec.action_model == "single":
            return (spec.controllable.index(router), iface)
        factors = list(self.env.current_action_factors())
        factors[spec.controllable.index(router)] = iface
        return tuple(factors)

    def act_factors(self, obs) -> tuple[int, ...]:
        pi = self.candidate_policies(obs)
        if not pi:
            return self.env.current_action_factors()
        router, hop = pi[int(self.rng.integers(len(pi)))]
        return self.factors_for(router, hop)

    def __call__(self, obs) -> int:
        return encode_action(self.act_factors(obs), self.env.spec.action_dims)


# ---------------------------------------------------------------------------
# spanning-tree switching
# ---------------------------------------------------------------------------
def _restoration_state(model, in_service_fn, p, q, states):
    """(n_res, min critical voltage) of a switch state, or None when it is not radial."""
    mask = in_service_fn(states)
    if not check_radiality(model, mask).radial:
        return None
    v = solve_power_flow(model, mask, p, q)
    crit = v[model.critical]
    return count_unrestored(crit, model.v_bounds), float(crit.min())


def spanning_tree_plan(model, contingency, p_load=None, q_load=None, switch_states=None) -> list[int]:
    """Shortest sequence of single-switch toggles that restores every critical bus.

    Each toggle moves from one spanning forest to another: switches are only
    closed when the energized island stays a tree, so a tie is closed after the
    edge it replaces has been opened. Among shortest plans the one ending with
    the highest minimum critical-bus voltage is chosen (ties: lowest switch ids).
    """
    p = model.p_load if p_load is None else p_load
    q = model.q_load if q_load is None else q_load
    outaged = contingency.outaged_lines if hasattr(contingency, "outaged_lines") else tuple(contingency)
    start = tuple(bool(s) for s in (model.default_switch_states() if switch_states is None else switch_states))

    def in_service(states):
        return model.in_service(states, outaged)

    first = _restoration_state(model, in_service, p, q, start)
    if first is not None and first[0] == 0:
        return []
    parent = {start: None}
    frontier = deque([start])
    best = None
    depth = {start: 0}
    while frontier:
        s = frontier.popleft()
        if best is not None and depth[s] >= best[0]:
            break
        for i in range(model.n_sw):
            nxt = list(s)
            nxt[i] = not nxt[i]
            nxt = tuple(nxt)
            if nxt in parent:
                continue
            res = _restoration_state(model, in_service, p, q, nxt)
            if res is None:
                continue
            parent[nxt] = (s, i)
            depth[nxt] = depth[s] + 1
            if res[0] == 0:
                path = _unwind(parent, nxt)
                key = (depth[nxt], -res[1], path)
                if best is None or key < best:
                    best = key
            else:
                frontier.append(nxt)
    if best is None:
        raise Unrestorable(f"no switch configuration restores all critical buses under {outaged}")
    return list(best[2])


def _unwind(parent, state) -> tuple[int, ...]:
    path = []
    while parent[state] is not None:
        state, i = parent[state]
        path.append(i)
    return tuple(reversed(path))


class SpanningTreeExpert:
    """Follow a spanning-tree switching plan; replan when the state drifts from it."""

    def __init__(self, env: FeederEnv):
        self.env = env
        self._key = None
        self._plan: list[int] = []
        self._states: list[tuple] = []

    def _episode_key(self):
        return (self.env.contingency, self.env.profile)

    def _replan(self):
        env = self.env
        cur = tuple(bool(s) for s in env.switch_states)
        self._plan = spanning_tree_plan(env.model, env.contingency, env._p, env._q, cur)
        states = [cur]
        for i in self._plan:
            s = list(states[-1])
            s[i] = not s[i]
            states.append(tuple(s))
        self._states = states
        self._key = self._episode_key()

    @property
    def plan(self) -> list[int]:
        return list(self._plan)

    def noop(self) -> int:
        """A toggle that leaves the restoration state unchanged."""
        env = self.env
        for i in range(env.model.n_sw):
            if not env.toggle_allowed(i):
                return i
        base = env.n_res
        for i in range(env.model.n_sw):
            s = env.switch_states.copy()
            s[i] = not s[i]
            v = env.solve(s)
            if count_unrestored(v[env.model.critical], env.model.v_bounds) == base:
                return i
        return 0

    def __call__(self, obs=None) -> int:
        cur = tuple(bool(s) for s in self.env.switch_states)
        if self._key != self._episode_key() or cur not in self._states:
            self._replan()
        pos = self._states.index(cur)
        if pos < len(self._plan):
            return self._plan[pos]
        return self.noop()


class CombinedExpert:
    """Rerouting expert on the cyber factors plus spanning-tree expert on the switch factor."""

    def __init__(self, env: CyberPhysicalEnv, seed=0):
        self.env = env
        self.cyber = ReroutingExpert(env.cyber, seed)
        self.phys = SpanningTreeExpert(env.phys)

    def reseed(self, seed):
        self.cyber.reseed(seed)

    def __call__(self, obs) -> int:
        n = self.env.cyber.spec.obs_dim
        factors = self.cyber.act_factors(np.asarray(obs)[:n]) + (self.phys(),)
        return encode_action(factors, self.env.spec.action_dims)


def make_expert(env, seed=0):
    if isinstance(env, CyberPhysicalEnv):
        return CombinedExpert(env, seed)
    if isinstance(env, NetSimEnv):
        return ReroutingExpert(env, seed)
    if isinstance(env, FeederEnv):
        return SpanningTreeExpert(env)
    raise TypeError(f"no expert for {type(env).__name__}")


def episode_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint64)]


def run_episode(env, policy, seed, reset_kwargs=None):
    """Roll out ``policy`` (obs -> flat action) for one episode; returns (steps, info)."""
    r = env.reset(seed=seed, **(reset_kwargs or {}))
    steps = []
    while not r.done:
        obs = r.obs
        a = int(policy(obs))
        r = env.step(a)
        steps.append((obs, a, r.obs, r.reward, r.done))
    return steps, r.info


def _record_episode(env, expert, i: int, seed: int) -> Trajectory:
    if hasattr(expert, "reseed"):
        expert.reseed(RngStream(seed, 7))
    meta = {"episode_id": i, "seed": seed, "env_id": env.env_id, "failed": False, "error": None}
    r = env.reset(seed=seed)
    steps = []
    try:
        while not r.done:
            obs = r.obs
            a = int(expert(obs))
            r = env.step(a)
            steps.append((obs, a, r.obs, r.reward, r.done))
        meta["goal_reached"] = bool(r.info.get("goal_reached"))
    except CpresError as exc:
        log.warning("expert failed on episode %d: %s", i, exc)
        meta.update(failed=True, error=f"{type(exc).__name__}: {exc}", goal_reached=False)
    return Trajectory.from_steps(steps, env.spec.obs_dim, meta)


def _seed_int(seed) -> int:
    return int(seed.seed if isinstance(seed, RngStream) else seed)


def collect_demonstrations(env, expert, n_episodes: int, seed=0, path=None) -> TrajectoryDataset:
    """Record ``n_episodes`` expert episodes; failures are kept but flagged."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    ds = TrajectoryDataset(env_spec_hash=env.spec_hash(), env=env.describe())
    for i, s in enumerate(episode_seeds(_seed_int(seed), n_episodes)):
        ds.add(_record_episode(env, expert, i, s))
    if path is not None:
        ds.save(path)
    return ds


def collect_transitions(env, expert, n_transitions: int, seed=0, path=None) -> TrajectoryDataset:
    """Record whole expert episodes until at least ``n_transitions`` usable transitions exist."""
    if n_transitions < 1:
        raise ValueError("n_transitions must be >= 1")
    ds = TrajectoryDataset(env_spec_hash=env.spec_hash(), env=env.describe())
    ss = np.random.SeedSequence(_seed_int(seed))
    usable, i, failures = 0, 0, 0
    while usable < n_transitions:
        for s in ss.spawn(1)[0].generate_state(256, dtype=np.uint64):
            traj = _record_episode(env, expert, i, int(s))
            ds.add(traj)
            i += 1
            if traj.meta["failed"]:
                failures += 1
                if failures > 1000 and usable == 0:
                    raise CpresError("expert fails on every episode")
            else:
                usable += len(traj)
            if usable >= n_transitions:
                break
    if path is not None:
        ds.save(path)
    return ds

"""Clipped-surrogate PPO with GAE over independent simulator instances."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .errors import NonFiniteLoss, TrainingError
from .fileio import atomic_write_text
from .nn import MLP, Adam
from .reward import RewardProgram, check_success, evaluate
from .scene import SceneSpec
from .sim import OBS_DIM, ActionCommand, DefaultInit, SceneKinematics, SimConfig, Simulator, TerminalBuffer

log = logging.getLogger(__name__)

ACT_DIM = 7
LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
CHECKPOINT_SCHEMA = 1
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    learning_rate: float = 3e-4
    epochs: int = 4
    minibatches: int = 4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    num_envs: int = 16
    horizon: int = 128
    max_env_steps: int = 300_000
    grad_clip: float = 0.5
    seed: int = 0
    hidden: tuple = (64, 64)
    init_log_std: float = -0.5
    max_episode_steps: int = 256
    eval_episodes: int = 50
    success_threshold: float = 0.9
    eval_trigger: float = 0.5  # training success rate that triggers an evaluation
    min_terminal_states: int = 200
    buffer_capacity: int = 1000
    normalize_obs: bool = True
    normalize_rewards: bool = True

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        self.hidden = tuple(self.hidden)


# ---------------------------------------------------------------- normalization

class RunningMeanStd:
    """Streaming mean/variance (parallel-merge form)."""

    def __init__(self, shape=(), epsilon=1e-4):
        self.mean = np.zeros(shape)
        self.var = np.ones(shape)
        self.count = epsilon

    def update(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if n == 0:
            return
        b_mean, b_var = x.mean(axis=0), x.var(axis=0)
        delta = b_mean - self.mean
        tot = self.count + n
        self.mean = self.mean + delta * n / tot
        m2 = self.var * self.count + b_var * n + delta ** 2 * self.count * n / tot
        self.var = m2 / tot
        self.count = tot

    def state(self):
        return {"mean": self.mean.tolist(), "var": np.atleast_1d(self.var).tolist(), "count": self.count}

    @classmethod
    def from_state(cls, doc, shape=()):
        r = cls(shape)
        r.mean = np.asarray(doc["mean"], dtype=float).reshape(shape)
        r.var = np.asarray(doc["var"], dtype=float).reshape(shape)
        r.count = float(doc["count"])
        return r


class RewardScaler:
    """Divides rewards by the running std of the discounted return."""

    def __init__(self, n, gamma):
        self.gamma = gamma
        self.ret = np.zeros(n)
        self.rms = RunningMeanStd()

    def __call__(self, rewards, dones):
        self.ret = self.ret * self.gamma + rewards
        self.rms.update(self.ret)
        self.ret[dones > 0] = 0.0
        return rewards / np.sqrt(self.rms.var + 1e-8)


# ---------------------------------------------------------------- policy

class PolicyNet:
    """Diagonal Gaussian actor (tanh-squashed mean) and a value critic.

    ``params`` is a single flat vector ``[actor | log_std | critic]``; the
    sub-networks hold views into it.
    """

    def __init__(self, obs_dim=OBS_DIM, act_dim=ACT_DIM, hidden=(64, 64), rng=None, init_log_std=-0.5,
                 params=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim, self.act_dim, self.hidden = obs_dim, act_dim, tuple(hidden)
        actor = MLP((obs_dim, *hidden, act_dim), rng, out_gain=0.01)
        critic = MLP((obs_dim, *hidden, 1), rng, out_gain=1.0)
        self.n_actor, self.n_critic = actor.size, critic.size
        if params is None:
            params = np.concatenate([actor.params, np.full(act_dim, float(init_log_std)), critic.params])
        self.params = np.array(params, dtype=float)
        if self.params.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {self.params.shape}")
        self.actor = MLP(actor.sizes, params=self.params[:self.n_actor])
        self.critic = MLP(critic.sizes, params=self.params[self.n_actor + act_dim:])
        self.obs_rms = None  # optional RunningMeanStd applied to raw observations

    def normalize(self, obs):
        if self.obs_rms is None:
            return obs
        return np.clip((obs - self.obs_rms.mean) / np.sqrt(self.obs_rms.var + 1e-8), -10.0, 10.0)

    @property
    def size(self):
        return self.n_actor + self.act_dim + self.n_critic

    def split(self, params=None):
        p = self.params if params is None else params
        a = self.n_actor
        return p[:a], p[a:a + self.act_dim], p[a + self.act_dim:]

    @property
    def log_std(self):
        return self.params[self.n_actor:self.n_actor + self.act_dim]

    def clamp_log_std(self):
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def mean(self, obs, params=None):
        """Deterministic action for raw observations."""
        pa = None if params is None else self.split(params)[0]
        out, _ = self.actor.forward(self.normalize(obs), pa)
        return np.tanh(out)

    def value(self, obs, params=None):
        pc = None if params is None else self.split(params)[2]
        out, _ = self.critic.forward(self.normalize(obs), pc)
        return out[..., 0]

    def act(self, obs, rng, normalized=False):
        """Sample actions; returns ``(action, log_prob, value)``."""
        x = obs if normalized else self.normalize(obs)
        out, _ = self.actor.forward(x)
        mean = np.tanh(out)
        action = mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)
        logp = gaussian_log_prob(action, mean, self.log_std)
        v, _ = self.critic.forward(x)
        return action, logp, v[..., 0]

    def copy(self):
        out = PolicyNet(self.obs_dim, self.act_dim, self.hidden, params=self.params.copy())
        if self.obs_rms is not None:
            out.obs_rms = RunningMeanStd.from_state(self.obs_rms.state(), (self.obs_dim,))
        return out


def gaussian_log_prob(x, mean, log_std):
    z = (x - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * x.shape[-1] * _LOG_2PI


def gaussian_entropy(log_std):
    return float(np.sum(log_std) + 0.5 * len(log_std) * (1.0 + _LOG_2PI))


# ---------------------------------------------------------------- environments

class TaskEnv:
    """One simulator bound to a reward program, with episode bookkeeping and auto-reset."""

    def __init__(self, scene: SceneSpec, program: RewardProgram, sim_cfg: SimConfig = None, init=None,
                 seed=0, max_steps=256, grasp_programs=None, kin=None):
        self.sim = Simulator(scene, sim_cfg, kin=kin)
        self.program = program
        self.sim.set_programs(list(grasp_programs) if grasp_programs else [program], program)
        self.init = init if init is not None else DefaultInit()
        self.rng = np.random.default_rng(seed)
        self.max_steps = max_steps
        self.t = 0
        self.state = None

    def reset(self):
        self.state = self.sim.reset(self.rng, self.init)
        self.t = 0
        return self.sim.observe(self.state)

    def step(self, action):
        """Returns ``(next_obs, reward, done, info)``; on ``done`` the env has already reset."""
        self.state = self.sim.step(ActionCommand.from_normalized(action, self.sim.cfg))
        self.t += 1
        success = check_success(self.program, self.state)
        reward = evaluate(self.program, self.state)
        truncated = not success and self.t >= self.max_steps
        info = {"success": success, "truncated": truncated}
        if success or truncated:
            info["terminal_state"] = self.state
            info["terminal_obs"] = self.sim.observe(self.state)
            return self.reset(), reward, True, info
        return self.sim.observe(self.state), reward, False, info


def make_envs(scene, program, sim_cfg, init, n, seed, max_steps=256, grasp_programs=None):
    kin = SceneKinematics(scene)
    return [TaskEnv(scene, program, sim_cfg, init, seed=seed * 1000 + i, max_steps=max_steps,
                    grasp_programs=grasp_programs, kin=kin) for i in range(n)]


# ---------------------------------------------------------------- rollouts

@dataclass
class RolloutBuffer:
    obs: np.ndarray          # (T, N, obs_dim)
    actions: np.ndarray      # (T, N, act_dim)
    log_probs: np.ndarray    # (T, N)
    rewards: np.ndarray      # (T, N)
    values: np.ndarray       # (T, N)
    dones: np.ndarray        # (T, N)
    successes: np.ndarray    # (T, N)
    last_values: np.ndarray  # (N,)
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    success_states: list = field(default_factory=list)
    episode_returns: list = field(default_factory=list)
    episode_successes: list = field(default_factory=list)

    @property
    def size(self):
        return self.rewards.size


def collect_rollouts(policy: PolicyNet, envs: List[TaskEnv], horizon: int, rng: np.random.Generator,
                     obs: np.ndarray = None, gamma: float = 0.99, ep_returns: np.ndarray = None,
                     reward_scaler: RewardScaler = None):
    """Step every env ``horizon`` times; returns ``(buffer, next_obs, running_returns)``.

    The buffer stores observations after the policy's normalization so the
    update sees exactly what the behaviour policy saw. Episodes cut by the
    step cap are marked done; their reward is augmented with the discounted
    value of the final observation so truncation does not look like
    termination.
    """
    n = len(envs)
    if obs is None:
        obs = np.stack([e.reset() for e in envs])
    if ep_returns is None:
        ep_returns = np.zeros(n)
    T = horizon
    b_obs = np.zeros((T, n, policy.obs_dim))
    b_raw = np.zeros((T, n, policy.obs_dim))
    b_act = np.zeros((T, n, policy.act_dim))
    b_logp, b_rew, b_val = np.zeros((T, n)), np.zeros((T, n)), np.zeros((T, n))
    b_done, b_succ = np.zeros((T, n)), np.zeros((T, n))
    success_states, ep_rets, ep_succ = [], [], []
    for t in range(T):
        b_raw[t] = obs
        nobs = policy.normalize(obs)
        action, logp, value = policy.act(nobs, rng, normalized=True)
        b_obs[t], b_act[t], b_logp[t], b_val[t] = nobs, action, logp, value
        next_obs = np.empty_like(obs)
        truncated = []
        for i, env in enumerate(envs):
            o, r, d, info = env.step(action[i])
            next_obs[i] = o
            b_rew[t, i] = r
            ep_returns[i] += r
            if d:
                b_done[t, i] = 1.0
                ep_rets.append(float(ep_returns[i]))
                ep_returns[i] = 0.0
                ep_succ.append(bool(info["success"]))
                if info["success"]:
                    b_succ[t, i] = 1.0
                    success_states.append(info["terminal_state"])
                else:
                    truncated.append((i, info["terminal_obs"]))
        if reward_scaler is not None:
            b_rew[t] = reward_scaler(b_rew[t], b_done[t])
        if truncated:
            idx = [i for i, _ in truncated]
            b_rew[t, idx] += gamma * policy.value(np.stack([o for _, o in truncated]))
        obs = next_obs
    if policy.obs_rms is not None:
        policy.obs_rms.update(b_raw.reshape(-1, policy.obs_dim))
    buf = RolloutBuffer(b_obs, b_act, b_logp, b_rew, b_val, b_done, b_succ, policy.value(obs),
                        success_states=success_states, episode_returns=ep_rets, episode_successes=ep_succ)
    return buf, obs, ep_returns


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float) -> RolloutBuffer:
    T = buffer.rewards.shape[0]
    adv = np.zeros_like(buffer.rewards)
    last = np.zeros_like(buffer.last_values)
    for t in range(T - 1, -1, -1):
        next_value = buffer.last_values if t == T - 1 else buffer.values[t + 1]
        nonterminal = 1.0 - buffer.dones[t]
        delta = buffer.rewards[t] + gamma * next_value * nonterminal - buffer.values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    buffer.advantages = adv
    buffer.returns = adv + buffer.values
    return buffer


def normalize_advantages(adv):
    std = adv.std()
    return (adv - adv.mean()) / (std if std > 1e-12 else 1.0)


# ---------------------------------------------------------------- update

@dataclass
class TrainStats:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def ppo_loss_and_grad(policy: PolicyNet, obs, actions, old_logp, advantages, returns, cfg: PPOConfig,
                      params=None):
    """Minibatch loss ``-surrogate + c_v * value_loss - c_e * entropy`` and its exact gradient.

    ``obs`` are network inputs, i.e. already normalized.
    """
    p = policy.params if params is None else params
    pa, log_std, pc = policy.split(p)
    B = len(obs)
    out, acts_a = policy.actor.forward(obs, pa)
    mean = np.tanh(out)
    inv_std = np.exp(-log_std)
    z = (actions - mean) * inv_std
    logp = -0.5 * np.sum(z * z, axis=1) - np.sum(log_std) - 0.5 * policy.act_dim * _LOG_2PI
    ratio = np.exp(logp - old_logp)
    eps = cfg.clip_eps
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    unclipped_obj = ratio * advantages
    clipped_obj = clipped * advantages
    surrogate = np.minimum(unclipped_obj, clipped_obj)
    # gradient flows only where the unclipped branch is the active minimum
    active = (unclipped_obj <= clipped_obj).astype(float)
    values, acts_c = policy.critic.forward(obs, pc)
    values = values[:, 0]
    value_loss = np.mean((values - returns) ** 2)
    entropy = gaussian_entropy(log_std)
    loss = -np.mean(surrogate) + cfg.value_coef * value_loss - cfg.entropy_coef * entropy

    dlogp = -(advantages * ratio * active) / B
    dmean = dlogp[:, None] * z * inv_std
    dout = dmean * (1.0 - mean * mean)
    g_actor = policy.actor.backward(acts_a, dout, pa)
    g_logstd = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0) - cfg.entropy_coef
    dvalue = (cfg.value_coef * 2.0 / B) * (values - returns)
    g_critic = policy.critic.backward(acts_c, dvalue[:, None], pc)
    grad = np.concatenate([g_actor, g_logstd, g_critic])

    log_ratio = logp - old_logp
    stats = {
        "policy_loss": float(-np.mean(surrogate)),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "approx_kl": float(np.mean(ratio - 1.0 - log_ratio)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
    }
    return float(loss), grad, stats


def clip_grad_norm(grad, max_norm):
    norm = float(np.sqrt(grad @ grad))
    if max_norm is not None and norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def ppo_update(policy: PolicyNet, buffer: RolloutBuffer, cfg: PPOConfig, optimizer: Adam,
               rng: np.random.Generator) -> TrainStats:
    D = policy.obs_dim
    obs = buffer.obs.reshape(-1, D)
    actions = buffer.actions.reshape(-1, policy.act_dim)
    old_logp = buffer.log_probs.ravel()
    adv = normalize_advantages(buffer.advantages.ravel())
    ret = buffer.returns.ravel()
    n = len(obs)
    mb = max(1, n // cfg.minibatches)
    acc = {k: [] for k in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_fraction")}
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, mb):
            idx = perm[start:start + mb]
            loss, grad, stats = ppo_loss_and_grad(policy, obs[idx], actions[idx], old_logp[idx], adv[idx],
                                                  ret[idx], cfg)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise NonFiniteLoss(f"non-finite loss/gradient: loss={loss}, stats={stats}")
            grad, _ = clip_grad_norm(grad, cfg.grad_clip)
            optimizer.step(policy.params, grad)
            policy.clamp_log_std()
            for k, v in stats.items():
                acc[k].append(v)
    return TrainStats(**{k: float(np.mean(v)) for k, v in acc.items()})


# ---------------------------------------------------------------- evaluation

def run_episodes(policy: PolicyNet, scene: SceneSpec, program: RewardProgram, sim_cfg: SimConfig, init,
                 episodes: int, seed: int, max_steps=256, grasp_programs=None):
    """Deterministic mean-action episodes, all stepped in lockstep.

    Returns ``(successes, terminal_states)`` with one entry per episode.
    """
    kin = SceneKinematics(scene)
    rng = np.random.default_rng(seed)
    sims = []
    for _ in range(episodes):
        sim = Simulator(scene, sim_cfg, kin=kin)
        sim.set_programs(list(grasp_programs) if grasp_programs else [program], program)
        sim.reset(rng, init)
        sims.append(sim)
    done = [False] * episodes
    success = [False] * episodes
    finals = [s.state for s in sims]
    for _ in range(max_steps):
        live = [i for i in range(episodes) if not done[i]]
        if not live:
            break
        obs = np.stack([sims[i].observe() for i in live])
        actions = policy.mean(obs)
        for i, a in zip(live, actions):
            st = sims[i].step(ActionCommand.from_normalized(a, sims[i].cfg))
            finals[i] = st
            if check_success(program, st):
                done[i] = success[i] = True
    return success, finals


# ---------------------------------------------------------------- training loop

@dataclass
class SubtaskResult:
    policy: PolicyNet
    terminal_buffer: TerminalBuffer
    metrics: list
    env_steps: int
    eval_success: float
    converged: bool

    @property
    def budget_exhausted(self):
        return not self.converged


def train_subtask(scene: SceneSpec, program: RewardProgram, init=None, cfg: PPOConfig = None,
                  sim_cfg: SimConfig = None, grasp_programs=None, max_episode_steps=None,
                  on_metrics=None) -> SubtaskResult:
    """Train one policy until evaluation success reaches the threshold or the budget runs out."""
    cfg = cfg or PPOConfig()
    sim_cfg = sim_cfg or SimConfig()
    init = init if init is not None else DefaultInit()
    max_steps = max_episode_steps or cfg.max_episode_steps
    rng = np.random.default_rng(cfg.seed)
    policy = PolicyNet(OBS_DIM, ACT_DIM, cfg.hidden, rng=np.random.default_rng(cfg.seed + 1),
                       init_log_std=cfg.init_log_std)
    if cfg.normalize_obs:
        policy.obs_rms = RunningMeanStd((OBS_DIM,))
    scaler = RewardScaler(cfg.num_envs, cfg.gamma) if cfg.normalize_rewards else None
    optimizer = Adam(policy.size, lr=cfg.learning_rate)
    envs = make_envs(scene, program, sim_cfg, init, cfg.num_envs, cfg.seed, max_steps, grasp_programs)
    buffer_out = TerminalBuffer(cfg.buffer_capacity)
    metrics = []
    steps, update = 0, 0
    obs, ep_ret = None, None
    best_eval, best = -1.0, None
    converged = False
    eval_seed = cfg.seed + 7919
    batch = cfg.num_envs * cfg.horizon
    # only whole batches that fit, so the step budget is a hard cap
    while steps + batch <= cfg.max_env_steps:
        buf, obs, ep_ret = collect_rollouts(policy, envs, cfg.horizon, rng, obs, cfg.gamma, ep_ret,
                                            reward_scaler=scaler)
        steps += buf.size
        update += 1
        for s in buf.success_states:
            buffer_out.add(s)
        compute_gae(buf, cfg.gamma, cfg.gae_lambda)
        stats = ppo_update(policy, buf, cfg, optimizer, rng)
        n_ep = len(buf.episode_successes)
        train_success = float(np.mean(buf.episode_successes)) if n_ep else 0.0
        record = {"update": update, "env_steps": steps,
                  "mean_return": float(np.mean(buf.episode_returns)) if n_ep else None,
                  "success_rate": train_success, "episodes": n_ep, **asdict(stats)}
        if n_ep and train_success >= cfg.eval_trigger:
            succ, finals = run_episodes(policy, scene, program, sim_cfg, init, cfg.eval_episodes, eval_seed,
                                        max_steps, grasp_programs)
            rate = float(np.mean(succ))
            record["eval_success"] = rate
            if rate > best_eval:
                best_eval, best = rate, policy.copy()
            if rate >= cfg.success_threshold:
                for ok, st in zip(succ, finals):
                    if ok:
                        buffer_out.add(st)
                converged = True
        metrics.append(record)
        log.debug("update %d steps %d success %.2f eval %s", update, steps, train_success,
                 record.get("eval_success"))
        if on_metrics is not None:
            on_metrics(record)
        if converged:
            break
    if not converged and best is not None:
        policy = best
    eval_rate = best_eval if best_eval >= 0 else 0.0
    if converged:
        _top_up(buffer_out, policy, scene, program, sim_cfg, init, cfg, max_steps, grasp_programs)
    return SubtaskResult(policy, buffer_out, metrics, steps, eval_rate, converged)


def _top_up(buffer, policy, scene, program, sim_cfg, init, cfg, max_steps, grasp_programs):
    seed = cfg.seed + 104729
    rounds = 0
    while len(buffer) < cfg.min_terminal_states and rounds < 20:
        succ, finals = run_episodes(policy, scene, program, sim_cfg, init, cfg.eval_episodes, seed + rounds,
                                    max_steps, grasp_programs)
        for ok, st in zip(succ, finals):
            if ok:
                buffer.add(st)
        rounds += 1


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, policy: PolicyNet, cfg: PPOConfig, extra=None):
    doc = {
        "schema_version": CHECKPOINT_SCHEMA,
        "obs_dim": policy.obs_dim,
        "act_dim": policy.act_dim,
        "hidden": list(policy.hidden),
        "config": asdict(cfg),
        "extra": extra or {},
        "params": [repr(float(v)) for v in policy.params],
        "obs_rms": None if policy.obs_rms is None else policy.obs_rms.state(),
    }
    text = json.dumps(doc, sort_keys=True, indent=1)
    return atomic_write_text(path, text)


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise TrainingError(f"checkpoint {path} has schema_version {doc.get('schema_version')!r}")
    cfg_doc = dict(doc["config"])
    cfg_doc["hidden"] = tuple(cfg_doc.get("hidden", (64, 64)))
    cfg = PPOConfig(**cfg_doc)
    policy = PolicyNet(doc["obs_dim"], doc["act_dim"], doc["hidden"],
                       params=np.array([float(v) for v in doc["params"]]))
    if doc.get("obs_rms") is not None:
        policy.obs_rms = RunningMeanStd.from_state(doc["obs_rms"], (policy.obs_dim,))
    return policy, cfg, doc.get("extra", {})

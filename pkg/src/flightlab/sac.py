"""Soft Actor-Critic: squashed-Gaussian actor, twin critics with target
networks, automatic entropy-temperature tuning, uniform replay.

All gradients come from the hand-derived backward passes in nn.py; the
reparameterized actor path is written out explicitly (see update()).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .nn import AdamState, Mlp, ShapeMismatch, adam_step

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQUASH_EPS = 1e-6  # keeps log(1 - tanh^2) finite at the rails


class BufferTooSmall(Exception):
    """Sampling or updating requested before enough transitions exist."""


@dataclass(frozen=True)
class SacConfig:
    learning_rate: float = 7e-4
    buffer_capacity: int = 1_000_000
    learning_starts: int = 10_000
    batch_size: int = 256
    tau: float = 0.005
    gamma: float = 0.99
    target_entropy: float | None = None   # None -> -action_dim
    updates_per_step: int = 1
    hidden: tuple[int, int] = (400, 300)
    leaky_slope: float = 0.01
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    final_init: float = 3e-3
    dtype: str = "float32"                # network dtype; physics stays float64

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("need 0 < tau <= 1")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("need 0 < gamma < 1")
        if not (self.batch_size <= self.learning_starts <= self.buffer_capacity):
            raise ValueError("need batch_size <= learning_starts <= buffer_capacity")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass(frozen=True)
class Transition:
    s: np.ndarray       # observation
    a: np.ndarray       # raw action in [-1, 1]^d (pre-decode)
    r: float
    s2: np.ndarray      # next observation
    done: bool          # physical failure only; timeouts bootstrap


class ReplayBuffer:
    """Ring storage with FIFO eviction and uniform sampling (with replacement)."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, dtype=np.float32):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.dtype = np.dtype(dtype)
        self._allocated = 0
        self._cursor = 0      # next physical write slot
        self._count = 0       # total pushes ever
        self._s = self._a = self._r = self._s2 = self._done = None

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def _grow(self, need: int) -> None:
        new_alloc = min(self.capacity, max(1024, need, 2 * self._allocated))
        if new_alloc <= self._allocated:
            return

        def resize(old, shape):
            arr = np.zeros(shape, dtype=self.dtype)
            if old is not None:
                arr[: self._allocated] = old
            return arr

        self._s = resize(self._s, (new_alloc, self.obs_dim))
        self._a = resize(self._a, (new_alloc, self.act_dim))
        self._r = resize(self._r, (new_alloc,))
        self._s2 = resize(self._s2, (new_alloc, self.obs_dim))
        self._done = resize(self._done, (new_alloc,))
        self._allocated = new_alloc

    def push(self, tr: Transition) -> None:
        i = self._cursor
        if i >= self._allocated:
            self._grow(i + 1)
        self._s[i] = tr.s
        self._a[i] = tr.a
        self._r[i] = tr.r
        self._s2[i] = tr.s2
        self._done[i] = 1.0 if tr.done else 0.0
        self._cursor = (i + 1) % self.capacity
        self._count += 1

    def transition(self, i: int) -> Transition:
        """i-th stored transition in FIFO order (0 = oldest)."""
        size = len(self)
        if not 0 <= i < size:
            raise IndexError(i)
        start = self._cursor - size  # oldest slot (mod capacity)
        j = (start + i) % self.capacity
        return Transition(
            self._s[j].copy(), self._a[j].copy(), float(self._r[j]), self._s2[j].copy(),
            bool(self._done[j] > 0.5),
        )

    def sample(self, n: int, rng: np.random.Generator) -> dict:
        size = len(self)
        if size < n:
            raise BufferTooSmall(f"buffer holds {size} < {n} transitions")
        idx = rng.integers(0, size, size=n)
        if size < self.capacity:
            j = idx  # physical layout is already FIFO before wraparound
        else:
            j = (self._cursor + idx) % self.capacity
        return {
            "s": self._s[j],
            "a": self._a[j],
            "r": self._r[j],
            "s2": self._s2[j],
            "done": self._done[j],
        }


def soft_update(target: list[np.ndarray], online: list[np.ndarray], tau: float) -> list[np.ndarray]:
    """Polyak step theta' <- tau*theta + (1-tau)*theta', elementwise."""
    if len(target) != len(online):
        raise ShapeMismatch("parameter counts disagree")
    out = []
    for t, o in zip(target, online):
        if t.shape != o.shape:
            raise ShapeMismatch(f"{t.shape} vs {o.shape}")
        out.append(tau * o + (1.0 - tau) * t)
    return out


class SacAgent:
    """Actor + twin critics + targets + learnable temperature."""

    def __init__(self, obs_dim: int, act_dim: int, cfg: SacConfig,
                 actor: Mlp, q1: Mlp, q2: Mlp, q1_target: Mlp, q2_target: Mlp,
                 log_alpha: float = 0.0,
                 opt_actor: AdamState | None = None,
                 opt_q1: AdamState | None = None,
                 opt_q2: AdamState | None = None,
                 opt_alpha: AdamState | None = None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.cfg = cfg
        self.actor = actor
        self.q1 = q1
        self.q2 = q2
        self.q1_target = q1_target
        self.q2_target = q2_target
        self._log_alpha = np.asarray(log_alpha, dtype=cfg.np_dtype)
        lr = cfg.learning_rate
        self.opt_actor = opt_actor or AdamState.create(actor.params, lr)
        self.opt_q1 = opt_q1 or AdamState.create(q1.params, lr)
        self.opt_q2 = opt_q2 or AdamState.create(q2.params, lr)
        self.opt_alpha = opt_alpha or AdamState.create([self._log_alpha], lr)

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, cfg: SacConfig, rng: np.random.Generator) -> "SacAgent":
        dt = cfg.np_dtype
        kw = dict(hidden=cfg.hidden, leaky_slope=cfg.leaky_slope, dtype=dt,
                  final_init=cfg.final_init)
        actor = Mlp.create(obs_dim, act_dim, nn.HEAD_GAUSSIAN, rng,
                           log_std_min=cfg.log_std_min, log_std_max=cfg.log_std_max, **kw)
        q1 = Mlp.create(obs_dim + act_dim, 1, nn.HEAD_LINEAR, rng, **kw)
        q2 = Mlp.create(obs_dim + act_dim, 1, nn.HEAD_LINEAR, rng, **kw)
        return cls(obs_dim, act_dim, cfg, actor, q1, q2, q1.copy(), q2.copy())

    # -- temperature ---------------------------------------------------------

    @property
    def log_alpha(self) -> float:
        return float(self._log_alpha)

    @property
    def alpha(self) -> float:
        return float(np.exp(self._log_alpha))

    @property
    def target_entropy(self) -> float:
        if self.cfg.target_entropy is not None:
            return self.cfg.target_entropy
        return -float(self.act_dim)

    # -- policy --------------------------------------------------------------

    def _squash(self, mean, log_std, noise):
        """tanh(mean + std*noise) with its change-of-variables log-density."""
        std = np.exp(log_std)
        u = mean + std * noise
        a = np.tanh(u)
        gauss = -0.5 * noise * noise - log_std - LOG_SQRT_2PI
        corr = np.log(1.0 - a * a + SQUASH_EPS)
        log_prob = (gauss - corr).sum(axis=-1)
        return a, u, log_prob

    def sample_action(self, obs: np.ndarray, rng: np.random.Generator):
        """Stochastic squashed-Gaussian action and its log-probability."""
        out, _ = self.actor.forward(np.asarray(obs, dtype=self.actor.dtype))
        mean, log_std = out[: self.act_dim], out[self.act_dim:]
        noise = rng.standard_normal(self.act_dim).astype(self.actor.dtype)
        a, _, log_prob = self._squash(mean, log_std, noise)
        return a, float(log_prob)

    def deterministic_action(self, obs: np.ndarray) -> np.ndarray:
        """Evaluation policy: tanh of the Gaussian mean."""
        out, _ = self.actor.forward(np.asarray(obs, dtype=self.actor.dtype))
        return np.tanh(out[: self.act_dim])

    # -- learning ------------------------------------------------------------

    def critic_targets(self, batch: dict, rng: np.random.Generator) -> np.ndarray:
        """y = r + gamma*(1-done)*(min(Q1', Q2') - alpha*log pi(a'|s'))."""
        s2 = batch["s2"]
        out, _ = self.actor.forward(s2)
        mean, log_std = out[:, : self.act_dim], out[:, self.act_dim:]
        noise = rng.standard_normal(mean.shape).astype(self.actor.dtype)
        a2, _, log_prob2 = self._squash(mean, log_std, noise)
        x2 = np.concatenate([s2, a2], axis=1)
        q1t, _ = self.q1_target.forward(x2)
        q2t, _ = self.q2_target.forward(x2)
        q_min = np.minimum(q1t[:, 0], q2t[:, 0])
        return batch["r"] + self.cfg.gamma * (1.0 - batch["done"]) * (
            q_min - self.alpha * log_prob2
        )

    def _critic_update(self, net: Mlp, opt: AdamState, x, y):
        q, cache = net.forward(x)
        err = q[:, 0] - y
        loss = float(np.mean(err * err))
        gout = (2.0 / err.shape[0]) * err
        grads, _ = net.backward(cache, gout[:, None])
        net.params, _ = adam_step(net.params, grads, opt)
        return loss

    def actor_loss_and_grads(self, s: np.ndarray, noise: np.ndarray):
        """Reparameterized actor objective E[alpha*logp - min(Q1,Q2)] and its
        gradients, with the exploration noise held fixed (testable against
        finite differences)."""
        n = s.shape[0]
        out, cache = self.actor.forward(s)
        mean, log_std = out[:, : self.act_dim], out[:, self.act_dim:]
        std = np.exp(log_std)
        a, _, log_prob = self._squash(mean, log_std, noise)

        x = np.concatenate([s, a], axis=1)
        q1, c1 = self.q1.forward(x)
        q2, c2 = self.q2.forward(x)
        q_min = np.minimum(q1[:, 0], q2[:, 0])
        alpha = self.alpha
        loss = float(np.mean(alpha * log_prob - q_min))

        # dL/da through the argmin critic, input slice [obs_dim:]
        pick1 = (q1[:, 0] <= q2[:, 0]).astype(self.actor.dtype)
        gq = -(1.0 / n)
        g1 = (gq * pick1)[:, None]
        g2 = (gq * (1.0 - pick1))[:, None]
        dl_da = self.q1.input_gradient(c1, g1)[:, self.obs_dim:]
        dl_da += self.q2.input_gradient(c2, g2)[:, self.obs_dim:]

        # d logp / du from the tanh correction; the Gaussian density term is
        # constant in the mean and contributes -1 per dim w.r.t. log_std
        one_m_a2 = 1.0 - a * a
        dlogp_du = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS)
        du_dls = std * noise
        scale = alpha / n
        d_mean = scale * dlogp_du + dl_da * one_m_a2
        d_ls = scale * (dlogp_du * du_dls - 1.0) + dl_da * one_m_a2 * du_dls

        head_grad = np.concatenate([d_mean, d_ls], axis=1)
        grads, _ = self.actor.backward(cache, head_grad)
        return loss, grads, log_prob

    def update(self, buffer: ReplayBuffer, rng: np.random.Generator) -> dict:
        """One gradient step on critics, actor, and temperature, then Polyak
        updates of both targets. Returns the loss report."""
        cfg = self.cfg
        if len(buffer) < cfg.learning_starts:
            raise BufferTooSmall(
                f"buffer holds {len(buffer)} < learning_starts {cfg.learning_starts}"
            )
        batch = buffer.sample(cfg.batch_size, rng)
        y = self.critic_targets(batch, rng)

        x = np.concatenate([batch["s"], batch["a"]], axis=1)
        c1_loss = self._critic_update(self.q1, self.opt_q1, x, y)
        c2_loss = self._critic_update(self.q2, self.opt_q2, x, y)

        noise = rng.standard_normal((cfg.batch_size, self.act_dim)).astype(self.actor.dtype)
        a_loss, a_grads, log_prob = self.actor_loss_and_grads(batch["s"], noise)
        self.actor.params, _ = adam_step(self.actor.params, a_grads, self.opt_actor)

        # temperature: minimize E[-alpha*(logp + H*)] in log space
        ent_gap = float(np.mean(log_prob)) + self.target_entropy
        alpha = self.alpha
        alpha_loss = -alpha * ent_gap
        alpha_grad = np.asarray(-alpha * ent_gap, dtype=self._log_alpha.dtype)
        new_la, _ = adam_step([self._log_alpha], [alpha_grad], self.opt_alpha)
        self._log_alpha = new_la[0]

        self.q1_target.params = soft_update(self.q1_target.params, self.q1.params, cfg.tau)
        self.q2_target.params = soft_update(self.q2_target.params, self.q2.params, cfg.tau)

        return {
            "critic1_loss": c1_loss,
            "critic2_loss": c2_loss,
            "actor_loss": a_loss,
            "alpha_loss": float(alpha_loss),
            "alpha": self.alpha,
        }


# ---------------------------------------------------------------------------
# checkpointing: all five networks + temperature + optimizer states + config


def save_agent(agent: SacAgent, path, extra: dict | None = None) -> None:
    nets = [agent.actor, agent.q1, agent.q2, agent.q1_target, agent.q2_target]
    names = ["actor", "q1", "q2", "q1_target", "q2_target"]
    opts = [agent.opt_actor, agent.opt_q1, agent.opt_q2, agent.opt_alpha]
    opt_names = ["actor", "q1", "q2", "alpha"]

    arrays: list[np.ndarray] = []
    layout = []
    for name, net in zip(names, nets):
        layout.append({"net": name, **nn.mlp_header(net), "n_params": len(net.params)})
        arrays.extend(net.params)
    for name, opt in zip(opt_names, opts):
        layout.append({"opt": name, "step": opt.step, "lr": opt.lr,
                       "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
                       "n_params": len(opt.m)})
        arrays.extend(opt.m)
        arrays.extend(opt.v)
    arrays.append(agent._log_alpha)

    cfg = asdict(agent.cfg)
    cfg["hidden"] = list(agent.cfg.hidden)
    header = {
        "kind": "sac_agent",
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "config": cfg,
        "layout": layout,
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        nn.write_blob(fh, header, arrays)


def load_agent(path) -> tuple[SacAgent, dict]:
    with open(path, "rb") as fh:
        header, arrays = nn.read_blob(fh)
    if header.get("kind") != "sac_agent":
        raise ValueError("checkpoint does not hold a SAC agent")
    cfg_d = dict(header["config"])
    cfg_d["hidden"] = tuple(cfg_d["hidden"])
    cfg = SacConfig(**cfg_d)

    pos = 0
    nets: dict[str, Mlp] = {}
    opts: dict[str, AdamState] = {}
    for item in header["layout"]:
        n = item["n_params"]
        if "net" in item:
            nets[item["net"]] = nn.mlp_from_header(item, arrays[pos: pos + n])
            pos += n
        else:
            m = arrays[pos: pos + n]
            v = arrays[pos + n: pos + 2 * n]
            pos += 2 * n
            opts[item["opt"]] = AdamState(
                lr=item["lr"], m=m, v=v, step=item["step"],
                beta1=item["beta1"], beta2=item["beta2"], eps=item["eps"],
            )
    log_alpha = arrays[pos]

    agent = SacAgent(
        header["obs_dim"], header["act_dim"], cfg,
        nets["actor"], nets["q1"], nets["q2"], nets["q1_target"], nets["q2_target"],
        log_alpha=float(log_alpha),
        opt_actor=opts["actor"], opt_q1=opts["q1"], opt_q2=opts["q2"], opt_alpha=opts["alpha"],
    )
    agent._log_alpha = np.asarray(log_alpha, dtype=cfg.np_dtype)
    return agent, header.get("extra", {})

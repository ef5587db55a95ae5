"""Maximum-entropy IRL over a grid MDP with an absorbing goal.

The MDP: 8 king moves per cell (in-bounds only), plus STAY at the goal.
Reward is linear in per-cell features and attaches to the departed state;
the goal is absorbing at reward zero, so a path's score is the sum of
rewards over its cells excluding the final goal cell.

Soft value iteration runs the finite-horizon backward recursion

    V_0(goal) = 0,  V_0(s != goal) = -inf
    V_{t+1}(s) = logsumexp_a [ r(s) + V_t(next(s, a)) ]

so exp(V_H(start)) is the partition sum over all goal-reaching action
sequences of at most H steps. Training ascends the exact log-likelihood
gradient: demo feature counts (goal excluded, since the goal earns no
reward) minus expected departure counts under the time-indexed soft
policy pi_t(a|s) proportional to exp(V_{H-1-t}(next(s, a))).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DemoValidationError, DivergenceError
from .rasters import SemanticRaster
from .rng import SplitMix64

# 8 king moves; index 8 is STAY (goal only).
MOVES = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
STAY = 8
N_ACTIONS = 9

COST_FLOOR = 1e-3


@dataclass
class GridMdp:
    width: int
    height: int
    features: np.ndarray  # (height, width, F)
    goal: tuple[int, int]
    horizon: int
    next_states: np.ndarray = field(init=False, repr=False)  # (n, 9), -1 invalid

    def __post_init__(self):
        gr, gc = self.goal
        if not (0 <= gr < self.height and 0 <= gc < self.width):
            raise ValueError(f"goal {self.goal} out of bounds")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.features.shape[:2] != (self.height, self.width):
            raise ValueError("features must be (height, width, F)")
        self.next_states = self._transition_table()

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def n_features(self) -> int:
        return self.features.shape[2]

    def cell_index(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.width + cell[1]

    def _transition_table(self) -> np.ndarray:
        rows, cols = np.divmod(np.arange(self.n_cells), self.width)
        table = np.full((self.n_cells, N_ACTIONS), -1, dtype=np.int64)
        for a, (dr, dc) in enumerate(MOVES):
            nr, nc = rows + dr, cols + dc
            ok = (0 <= nr) & (nr < self.height) & (0 <= nc) & (nc < self.width)
            table[ok, a] = nr[ok] * self.width + nc[ok]
        goal = self.cell_index(self.goal)
        table[goal, :] = -1
        table[goal, STAY] = goal
        return table

    def rewards(self, w: np.ndarray) -> np.ndarray:
        """Per-cell reward vector r(s) = w . phi(s), flat layout."""
        return self.features.reshape(self.n_cells, -1) @ np.asarray(w, dtype=np.float64)


def mdp_from_semantic(
    semantic: SemanticRaster,
    n_classes: int,
    goal: tuple[int, int],
    horizon: int | None = None,
    extra_features: np.ndarray | None = None,
) -> GridMdp:
    """One-hot class features, optionally concatenated with extractor features."""
    eye = np.eye(n_classes, dtype=np.float64)
    features = eye[semantic.data]
    if extra_features is not None:
        features = np.concatenate([features, extra_features], axis=2)
    if horizon is None:
        horizon = 4 * (semantic.width + semantic.height)
    return GridMdp(
        width=semantic.width,
        height=semantic.height,
        features=features,
        goal=goal,
        horizon=horizon,
    )


@dataclass(frozen=True)
class Demonstration:
    path: tuple[tuple[int, int], ...]


@dataclass
class RewardWeights:
    w: np.ndarray
    feature_names: list[str] | None = None

    def to_json(self) -> str:
        doc = {"weights": self.w.tolist()}
        if self.feature_names is not None:
            doc["feature_names"] = self.feature_names
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "RewardWeights":
        doc = json.loads(text)
        return RewardWeights(
            w=np.asarray(doc["weights"], dtype=np.float64),
            feature_names=doc.get("feature_names"),
        )


@dataclass(frozen=True)
class CostMap:
    width: int
    height: int
    cost: np.ndarray  # (height, width), >= COST_FLOOR (or +inf barrier)

    def __post_init__(self):
        if self.cost.shape != (self.height, self.width):
            raise ValueError("cost shape mismatch")


@dataclass
class IrlConfig:
    learning_rate: float = 0.05
    iterations: int = 80
    l2: float = 0.0
    seed: int = 0
    horizon: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class SoftValues:
    values: np.ndarray  # (height, width) V_H
    policy: np.ndarray  # (n_cells, 9), stationary, from the final backup
    value_table: np.ndarray = field(repr=False)  # (H+1, n_cells)


def _logsumexp_rows(q: np.ndarray) -> np.ndarray:
    m = q.max(axis=1)
    out = np.full(q.shape[0], -np.inf)
    finite = m > -np.inf
    if finite.any():
        stable = q[finite] - m[finite, None]
        with np.errstate(invalid="ignore"):
            out[finite] = m[finite] + np.log(np.exp(stable).sum(axis=1))
    return out


def _softmax_rows(q: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Row softmax treating -inf as zero mass; all -inf rows fall back to
    uniform over valid actions (unreachable states, visited with mass 0)."""
    m = q.max(axis=1)
    p = np.zeros_like(q)
    finite = m > -np.inf
    if finite.any():
        stable = np.exp(q[finite] - m[finite, None])
        p[finite] = stable / stable.sum(axis=1, keepdims=True)
    if (~finite).any():
        fallback = valid[~finite].astype(np.float64)
        p[~finite] = fallback / fallback.sum(axis=1, keepdims=True)
    return p


def _q_values(mdp: GridMdp, r_step: np.ndarray, values: np.ndarray) -> np.ndarray:
    """(n, 9) action values r(s) + V(next); invalid actions -inf."""
    nxt = mdp.next_states
    q = values[np.maximum(nxt, 0)]
    q[nxt < 0] = -np.inf
    with np.errstate(invalid="ignore"):
        q = r_step[:, None] + q
    return q


def soft_value_iteration(mdp: GridMdp, w: np.ndarray | RewardWeights) -> SoftValues:
    if isinstance(w, RewardWeights):
        w = w.w
    goal = mdp.cell_index(mdp.goal)
    r_step = mdp.rewards(w)
    r_step[goal] = 0.0  # absorbing at reward zero

    table = np.full((mdp.horizon + 1, mdp.n_cells), -np.inf)
    table[0, goal] = 0.0
    q = None
    for t in range(1, mdp.horizon + 1):
        q = _q_values(mdp, r_step, table[t - 1])
        table[t] = _logsumexp_rows(q)
    policy = _softmax_rows(q, mdp.next_states >= 0)
    return SoftValues(
        values=table[mdp.horizon].reshape(mdp.height, mdp.width),
        policy=policy,
        value_table=table,
    )


def expected_svf(
    mdp: GridMdp, policy: np.ndarray, start_distribution: np.ndarray
) -> np.ndarray:
    """Expected cell residence D = sum_t D_t over t = 0..H under a
    stationary policy; goal mass accumulates at the goal."""
    d = np.asarray(start_distribution, dtype=np.float64).ravel().copy()
    if abs(d.sum() - 1.0) > 1e-9:
        raise ValueError("start distribution must sum to 1")
    total = d.copy()
    nxt = mdp.next_states
    for _ in range(mdp.horizon):
        nd = np.zeros_like(d)
        for a in range(N_ACTIONS):
            ok = nxt[:, a] >= 0
            np.add.at(nd, nxt[ok, a], d[ok] * policy[ok, a])
        d = nd
        total += d
    return total.reshape(mdp.height, mdp.width)


def _validate_demo(mdp: GridMdp, demo: Demonstration, index: int) -> None:
    path = demo.path
    if len(path) < 1:
        raise DemoValidationError(f"demo {index}: empty path")
    goal = mdp.goal
    for step, (r, c) in enumerate(path):
        if not (0 <= r < mdp.height and 0 <= c < mdp.width):
            raise DemoValidationError(f"demo {index}: cell {(r, c)} at step {step} out of bounds")
        if (r, c) == tuple(goal) and step != len(path) - 1:
            raise DemoValidationError(
                f"demo {index}: goal visited at step {step} before the end"
            )
    for step in range(len(path) - 1):
        dr = path[step + 1][0] - path[step][0]
        dc = path[step + 1][1] - path[step][1]
        if (dr, dc) not in MOVES:
            raise DemoValidationError(
                f"demo {index}: step {step} -> {step + 1} is not 8-adjacent"
            )
    if tuple(path[-1]) != tuple(goal):
        raise DemoValidationError(f"demo {index}: final cell {path[-1]} is not the goal {goal}")
    if len(path) - 1 > mdp.horizon:
        raise DemoValidationError(
            f"demo {index}: {len(path) - 1} steps exceed horizon {mdp.horizon}"
        )


def demo_feature_expectations(
    demos: list[Demonstration], mdp: GridMdp
) -> np.ndarray:
    """Mean over demos of the feature sum over all path cells."""
    if not demos:
        raise DemoValidationError("need at least one demonstration")
    total = np.zeros(mdp.n_features)
    for i, demo in enumerate(demos):
        _validate_demo(mdp, demo, i)
        for cell in demo.path:
            total += mdp.features[cell[0], cell[1]]
    return total / len(demos)


def _masked_demo_expectations(demos: list[Demonstration], mdp: GridMdp) -> np.ndarray:
    """Feature counts excluding goal cells (the goal earns no reward)."""
    goal = tuple(mdp.goal)
    total = np.zeros(mdp.n_features)
    for demo in demos:
        for cell in demo.path:
            if tuple(cell) != goal:
                total += mdp.features[cell[0], cell[1]]
    return total / len(demos)


def start_distribution_of(demos: list[Demonstration], mdp: GridMdp) -> np.ndarray:
    starts = np.zeros(mdp.n_cells)
    for demo in demos:
        starts[mdp.cell_index(demo.path[0])] += 1.0
    return starts / len(demos)


def expected_departure_counts(
    mdp: GridMdp, value_table: np.ndarray, start_distribution: np.ndarray
) -> np.ndarray:
    """Exact expected feature counts of departed (non-goal) states under the
    MaxEnt path distribution, i.e. the gradient of mean V_H(start) in w."""
    goal = mdp.cell_index(mdp.goal)
    nxt = mdp.next_states
    valid = nxt >= 0
    features_flat = mdp.features.reshape(mdp.n_cells, -1)
    d = np.asarray(start_distribution, dtype=np.float64).ravel().copy()
    counts = np.zeros(mdp.n_features)
    for t in range(mdp.horizon):
        departures = d.copy()
        departures[goal] = 0.0
        counts += departures @ features_flat
        # Exact kernel at time t: softmax over V_{H-1-t}(next); r(s) cancels.
        q = value_table[mdp.horizon - 1 - t][np.maximum(nxt, 0)]
        q[~valid] = -np.inf
        p = _softmax_rows(q, valid)
        nd = np.zeros_like(d)
        for a in range(N_ACTIONS):
            ok = valid[:, a]
            np.add.at(nd, nxt[ok, a], d[ok] * p[ok, a])
        d = nd
    return counts


def maxent_log_likelihood(
    mdp: GridMdp, demos: list[Demonstration], w: np.ndarray
) -> float:
    """Mean per-demo log-likelihood: reward of the demo path (goal excluded)
    minus the log partition V_H at its start."""
    values = soft_value_iteration(mdp, w).value_table[mdp.horizon]
    goal = tuple(mdp.goal)
    rewards = mdp.rewards(w)
    total = 0.0
    for demo in demos:
        score = sum(
            rewards[mdp.cell_index(cell)] for cell in demo.path if tuple(cell) != goal
        )
        total += score - values[mdp.cell_index(demo.path[0])]
    return total / len(demos)


def irl_train(
    mdp: GridMdp, demos: list[Demonstration], config: IrlConfig
) -> tuple[RewardWeights, list[float]]:
    """Gradient ascent on the MaxEnt log-likelihood from w = 0.

    Returns the learned weights and the per-iteration gradient norms.
    """
    demo_feature_expectations(demos, mdp)  # runs full validation
    mu_hat = _masked_demo_expectations(demos, mdp)
    starts = start_distribution_of(demos, mdp)
    w = np.zeros(mdp.n_features)
    trace: list[float] = []
    for iteration in range(config.iterations):
        soft = soft_value_iteration(mdp, w)
        model_counts = expected_departure_counts(mdp, soft.value_table, starts)
        gradient = mu_hat - model_counts - config.l2 * w
        if not np.isfinite(gradient).all():
            raise DivergenceError(f"non-finite IRL gradient at iteration {iteration}")
        w = w + config.learning_rate * gradient
        trace.append(float(np.linalg.norm(gradient)))
    return RewardWeights(w=w), trace


def cost_map(mdp: GridMdp, w: np.ndarray | RewardWeights) -> CostMap:
    """cost(s) = max_s' r(s') - r(s) + floor: positive, reward order reversed."""
    if isinstance(w, RewardWeights):
        w = w.w
    rewards = mdp.rewards(w).reshape(mdp.height, mdp.width)
    return CostMap(
        width=mdp.width,
        height=mdp.height,
        cost=rewards.max() - rewards + COST_FLOOR,
    )


def sample_demonstrations(
    mdp: GridMdp,
    w: np.ndarray | RewardWeights,
    starts: list[tuple[int, int]],
    rng: SplitMix64,
) -> list[Demonstration]:
    """Sample goal-reaching paths from the exact MaxEnt path distribution."""
    if isinstance(w, RewardWeights):
        w = w.w
    soft = soft_value_iteration(mdp, w)
    table = soft.value_table
    nxt = mdp.next_states
    goal = mdp.cell_index(mdp.goal)
    demos = []
    for start in starts:
        s = mdp.cell_index(start)
        if not np.isfinite(table[mdp.horizon][s]):
            raise DemoValidationError(f"start {start} cannot reach the goal in horizon")
        path = [tuple(start)]
        t = 0
        while s != goal:
            q = np.full(N_ACTIONS, -np.inf)
            ok = nxt[s] >= 0
            q[ok] = table[mdp.horizon - 1 - t][nxt[s][ok]]
            probs = np.exp(q - q.max())
            probs /= probs.sum()
            u = rng.next_float()
            a = int(np.searchsorted(np.cumsum(probs), u, side="right"))
            a = min(a, N_ACTIONS - 1)
            s = int(nxt[s][a])
            path.append((s // mdp.width, s % mdp.width))
            t += 1
        demos.append(Demonstration(path=tuple(path)))
    return demos


# ---------------------------------------------------------------------------
# Demonstrations file format
# ---------------------------------------------------------------------------


def demos_to_json(goal: tuple[int, int], demos: list[Demonstration]) -> str:
    return json.dumps(
        {
            "goal": list(goal),
            "paths": [[list(cell) for cell in demo.path] for demo in demos],
        }
    )


def demos_from_json(text: str) -> tuple[tuple[int, int], list[Demonstration]]:
    doc = json.loads(text)
    goal = (int(doc["goal"][0]), int(doc["goal"][1]))
    demos = [
        Demonstration(path=tuple((int(r), int(c)) for r, c in path))
        for path in doc["paths"]
    ]
    return goal, demos

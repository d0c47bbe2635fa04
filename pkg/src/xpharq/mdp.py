"""Average-reward MDP for adaptive cross-packet rate selection.

States are ``(Isig, Rsig)`` pairs (plus the number of rounds used for truncated
HARQ) and a single restart state.  ``Isig`` lives on the MI lattice
``m * grid_step``, ``Rsig`` on multiples of the action step.  States sharing
``(k, Rsig)`` form a *layer*; all per-layer quantities are arrays indexed by
``m = 0 .. Rsig / grid_step``.

Without the restart state the transition graph is acyclic (``Rsig`` or ``k``
increases, or ``Isig`` increases for a zero action), so a policy is evaluated
exactly by a backward recursion over the layers.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, sparse
from scipy.sparse import linalg as sparse_linalg

from .exceptions import ConfigurationError, ResourceError, SolverError
from .validation import check_grid_multiple, check_k_max, check_positive

__all__ = [
    "ActionGrid", "Persistent", "Truncated", "as_mode", "StateSpace", "build_states",
    "TabularPolicy", "SolveResult", "evaluate_policy", "evaluate_policy_sparse",
    "policy_iteration", "greedy_policy", "fixed_schedule_policy", "ir_policy",
]

log = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 5_000_000
MAX_ITERATIONS = 1000
IMPROVE_TOL = 1e-10


@dataclass(frozen=True)
class ActionGrid:
    """Rates ``{0, step, 2 step, ...}`` with ``Rsig + a <= max_total``.

    ``max_rate`` optionally caps a single round's rate (strictly below it).
    Zero is admissible everywhere except in the restart state.
    """

    step: float = 0.25
    max_total: float = 8.0
    max_rate: float = None

    def __post_init__(self):
        check_positive(self.step, "step")
        check_grid_multiple(self.max_total, self.step, "max_total", "step")
        if self.max_total <= 0:
            raise ConfigurationError("max_total must be > 0")
        if self.max_rate is not None:
            check_positive(self.max_rate, "max_rate")

    @property
    def n_total(self):
        return int(round(self.max_total / self.step))

    def actions(self, r_idx, restart=False):
        """Feasible action indices (multiples of ``step``) from a layer at ``r_idx``."""
        lo = 1 if restart else 0
        a = np.arange(lo, self.n_total - r_idx + 1)
        if self.max_rate is not None:
            a = a[(a == 0) | (a * self.step < self.max_rate - 1e-12)]
        return a


@dataclass(frozen=True)
class Persistent:
    k_max = None


@dataclass(frozen=True)
class Truncated:
    k_max: int

    def __post_init__(self):
        object.__setattr__(self, "k_max", check_k_max(self.k_max))


def as_mode(mode):
    """``None``, ``inf`` or ``"persistent"`` give :class:`Persistent`; an int gives :class:`Truncated`."""
    if isinstance(mode, (Persistent, Truncated)):
        return mode
    if mode is None or mode == "persistent" or (isinstance(mode, float) and math.isinf(mode)):
        return Persistent()
    return Truncated(mode)


class StateSpace:
    """Lattice state space with precomputed per-round MI masses.

    Parameters
    ----------
    dist : MiDistribution
        Per-round MI.  Atom distributions must sit on the ``grid_step`` lattice.
    grid : ActionGrid
    mode : Persistent or Truncated
    state_cap : int
        Maximum number of states before :class:`ResourceError` is raised.
    """

    def __init__(self, dist, grid, mode, state_cap=DEFAULT_STATE_CAP):
        self.dist = dist
        self.grid = grid
        self.mode = as_mode(mode)
        self.delta = dist.grid_step
        self.ratio = check_grid_multiple(grid.step, self.delta, "action step", "grid_step")
        self.n_lat = grid.n_total * self.ratio
        p_full = dist.lattice_masses()
        self.tie_w = 0.0 if dist.is_atomic else 0.5
        length = max(p_full.size, self.n_lat + 1)
        p_full = np.pad(p_full, (0, length - p_full.size))
        above = np.concatenate((np.cumsum(p_full[::-1])[::-1][1:], [0.0]))
        # Pr{I >= n delta} under the distribution's tie convention
        self.ccdf_lat = np.clip(above + (1.0 - self.tie_w) * p_full, 0.0, 1.0)[: self.n_lat + 1]
        self.p = p_full[: self.n_lat + 1]

        if isinstance(self.mode, Truncated):
            ks = range(1, self.mode.k_max)
        else:
            ks = (0,)
        self.layers = [(k, r) for k in ks for r in range(1, grid.n_total + 1)]
        self.n_states = 1 + sum(self.layer_size(key) for key in self.layers)
        if self.n_states > state_cap:
            raise ResourceError(
                f"{self.n_states} states exceed the cap of {state_cap}; "
                "use a coarser MI grid, a larger action step or a smaller R_max")
        log.debug("state space: %d layers, %d states", len(self.layers), self.n_states)

    @property
    def persistent(self):
        return isinstance(self.mode, Persistent)

    @property
    def k_max(self):
        return self.mode.k_max

    def layer_size(self, key):
        return key[1] * self.ratio + 1

    def next_key(self, key, a):
        """Layer reached on failure; ``None`` means the failure ends the cycle."""
        k, r = key
        if self.persistent:
            return (0, r + a)
        if k + 1 >= self.mode.k_max:
            return None
        return (k + 1, r + a)

    def restart_next(self, a):
        if self.persistent:
            return (0, a)
        return (1, a) if self.mode.k_max > 1 else None

    def fail_lat(self, t):
        """Failure weight of the lattice points ``0..t`` against threshold ``t``."""
        w = np.ones(t + 1)
        w[t] = self.tie_w
        return w

    def success(self, r_idx, a):
        """Success probability for every ``m`` of a layer at ``r_idx`` playing ``a``."""
        t = (r_idx + a) * self.ratio
        m = np.arange(r_idx * self.ratio + 1)
        return self.ccdf_lat[t - m]

    def reward(self, r_idx, a):
        """Expected bits ``(Rsig + a) * Pr{Isig + I >= Rsig + a}`` for every ``m``."""
        return (r_idx + a) * self.grid.step * self.success(r_idx, a)

    def expect_next(self, w_next, r_idx, a):
        """``sum_j p_j fail(m + j) w_next[m + j]`` for every ``m`` of a layer at ``r_idx``."""
        t = (r_idx + a) * self.ratio
        vw = w_next[: t + 1] * self.fail_lat(t)
        corr = signal.convolve(vw[::-1], self.p[: t + 1])[: t + 1][::-1]
        return corr[: r_idx * self.ratio + 1]

    def transitions(self, key, m, a):
        """Sparse next-state distribution ``{state: prob}`` from state ``(key, m)``.

        ``key=None`` denotes the restart state; the restart state is keyed
        ``"restart"`` and lattice states ``(k, r_idx, m)``.
        """
        r_idx = 0 if key is None else key[1]
        nk = self.restart_next(a) if key is None else self.next_key(key, a)
        t = (r_idx + a) * self.ratio
        out = {}
        succ = float(self.ccdf_lat[t - m])
        j = np.arange(0, t - m + 1)
        w = self.p[j] * self.fail_lat(t)[m + j]
        fail = float(w.sum())
        if nk is None:
            out["restart"] = succ + fail
            return out
        out["restart"] = succ
        for jj, pj in zip(j[w > 0], w[w > 0]):
            out[(nk[0], nk[1], int(m + jj))] = out.get((nk[0], nk[1], int(m + jj)), 0.0) + float(pj)
        return out

    def fingerprint(self):
        h = hashlib.sha256(np.ascontiguousarray(self.p).tobytes())
        h.update(repr((self.delta, self.grid, self.mode, self.tie_w)).encode())
        return h.hexdigest()[:16]

    def reachable(self, first_rates=None):
        """Boolean masks of states reachable from restart under some action sequence.

        ``first_rates`` restricts the restart action (in bits).
        """
        support = self.p > 0
        masks = {key: np.zeros(self.layer_size(key), dtype=bool) for key in self.layers}
        if first_rates is None:
            first = self.grid.actions(0, restart=True)
        else:
            first = [check_grid_multiple(r, self.grid.step, "first rate", "step") for r in first_rates]

        def spread(src_mask, r_idx, a, nk):
            t = (r_idx + a) * self.ratio
            ind = signal.convolve(src_mask.astype(float), support[: t + 1].astype(float))[: t + 1]
            hit = ind > 0.5
            hit &= self.fail_lat(t) > 0
            masks[nk][: t + 1] |= hit

        for a in first:
            nk = self.restart_next(int(a))
            if nk is not None:
                spread(np.ones(1, dtype=bool), 0, int(a), nk)
        for key in self.layers:
            mk = masks[key]
            if self.persistent:
                # zero actions stay in the layer: close under + I
                while mk.any():
                    before = mk.copy()
                    spread(mk, key[1], 0, key)
                    if np.array_equal(before, masks[key]):
                        break
                    mk = masks[key]
            if not mk.any():
                continue
            for a in self.grid.actions(key[1]):
                a = int(a)
                nk = self.next_key(key, a)
                if nk is None or (self.persistent and a == 0):
                    continue
                spread(mk, key[1], a, nk)
        return masks

    def reachable_counts(self, first_rates=None):
        return {key: int(m.sum()) for key, m in self.reachable(first_rates).items()}


def build_states(dist, grid=None, mode=None, state_cap=DEFAULT_STATE_CAP):
    """Enumerate the lattice state space; see :class:`StateSpace`."""
    return StateSpace(dist, grid if grid is not None else ActionGrid(), mode, state_cap)


@dataclass
class TabularPolicy:
    """Action table: ``restart_action`` and one integer action array per layer.

    Actions are stored as multiples of ``action_step``.
    """

    restart_action: int
    actions: dict
    grid_step: float
    action_step: float
    k_max: int = None
    metadata: dict = field(default_factory=dict)

    kind = "tabular"

    @property
    def ratio(self):
        return int(round(self.action_step / self.grid_step))

    def action(self, key, m):
        if key is None:
            return self.restart_action
        return int(self.actions[key][m])

    def rates(self, k, isig, rsig):
        """Rate of round ``k`` (1-based) given the exact accumulated ``isig`` and ``rsig``."""
        isig = np.atleast_1d(np.asarray(isig, dtype=float))
        if k == 1:
            return np.full(isig.shape, self.restart_action * self.action_step)
        rsig = np.broadcast_to(np.asarray(rsig, dtype=float), isig.shape)
        r_idx = np.rint(rsig / self.action_step).astype(np.int64)
        m = np.floor(isig / self.grid_step + 0.5).astype(np.int64)
        layer_k = 0 if self.k_max is None else k - 1
        out = np.empty(isig.shape)
        for r in np.unique(r_idx):
            sel = r_idx == r
            acts = self.actions[(layer_k, int(r))]
            out[sel] = acts[np.clip(m[sel], 0, acts.size - 1)] * self.action_step
        return out

    def to_json(self, dense=True):
        states = []
        for (k, r), acts in sorted(self.actions.items()):
            for m, a in enumerate(acts.tolist()):
                if a < 0 and not dense:
                    continue
                states.append({
                    "isig": round(m * self.grid_step, 12),
                    "rsig": round(r * self.action_step, 12),
                    "k": None if self.k_max is None else k,
                    "action": round(a * self.action_step, 12),
                })
        meta = dict(self.metadata)
        meta.update(grid_step=self.grid_step, action_step=self.action_step,
                    mode="persistent" if self.k_max is None else "truncated", k_max=self.k_max)
        return json.dumps({
            "metadata": meta,
            "restart_action": round(self.restart_action * self.action_step, 12),
            "states": states,
        }, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        meta = obj["metadata"]
        grid_step, step = float(meta["grid_step"]), float(meta["action_step"])
        ratio = int(round(step / grid_step))
        persistent = meta.get("mode") == "persistent"
        rows = {}
        for s in obj["states"]:
            r = int(round(s["rsig"] / step))
            key = (0 if persistent else int(s["k"]), r)
            rows.setdefault(key, np.zeros(r * ratio + 1, dtype=np.int64))
            rows[key][int(round(s["isig"] / grid_step))] = int(round(s["action"] / step))
        return cls(int(round(obj["restart_action"] / step)), rows, grid_step, step,
                   None if persistent else int(meta["k_max"]), meta)


@dataclass
class SolveResult:
    policy: TabularPolicy
    gain: float
    h: dict
    iterations: int
    gain_history: list
    residual: float


def _make_policy(space, restart_action, actions, **meta):
    meta.setdefault("fingerprint", space.fingerprint())
    return TabularPolicy(int(restart_action), actions, space.delta, space.grid.step,
                         space.k_max, meta)


def fixed_schedule_policy(space, rates):
    """Tabular policy playing the fixed XP schedule ``rates`` (truncated mode)."""
    if space.persistent:
        raise ConfigurationError("a fixed schedule is only defined for truncated HARQ")
    idx = [check_grid_multiple(r, space.grid.step, "rate", "step") for r in rates]
    if len(idx) != space.k_max:
        raise ConfigurationError(f"schedule has {len(idx)} rates, expected K={space.k_max}")
    if idx[0] < 1 or sum(idx) > space.grid.n_total:
        raise ConfigurationError("schedule infeasible on the action grid")
    actions = {}
    for key in space.layers:
        k, r = key
        a = idx[k] if r + idx[k] <= space.grid.n_total else 0
        actions[key] = np.full(space.layer_size(key), a, dtype=np.int64)
    return _make_policy(space, idx[0], actions, origin="fixed_schedule")


def ir_policy(space, r):
    """IR-HARQ as a policy: rate ``r`` at restart, zero added rate afterwards."""
    a0 = check_grid_multiple(r, space.grid.step, "rate", "step")
    actions = {key: np.zeros(space.layer_size(key), dtype=np.int64) for key in space.layers}
    return _make_policy(space, a0, actions, origin="ir")


def _restart_actions(space, first_rate):
    if first_rate is None:
        return space.grid.actions(0, restart=True)
    a = check_grid_multiple(first_rate, space.grid.step, "first_rate", "step")
    if not 1 <= a <= space.grid.n_total:
        raise ConfigurationError(f"first_rate {first_rate} outside the action grid")
    return np.array([a])


def evaluate_policy(policy, space):
    """Gain and differential rewards of ``policy`` with ``h(restart) = 0``.

    Returns ``(gain, h)`` where ``h`` maps each layer key to an array and
    ``h[None] = 0`` is the restart state.
    """
    big_a, big_b = {}, {}
    order = sorted(space.layers, key=lambda key: (-key[0], -key[1]))
    for key in order:
        k, r = key
        acts = policy.actions[key]
        n = space.layer_size(key)
        va, vb = np.zeros(n), np.zeros(n)
        for a in np.unique(acts):
            a = int(a)
            if space.persistent and a == 0:
                continue
            sel = acts == a
            rew = space.reward(r, a)
            nk = space.next_key(key, a)
            if nk is None:
                va[sel], vb[sel] = rew[sel], 1.0
            else:
                va[sel] = rew[sel] + space.expect_next(big_a[nk], r, a)[sel]
                vb[sel] = 1.0 + space.expect_next(big_b[nk], r, a)[sel]
        if space.persistent and np.any(acts == 0):
            _solve_zero_actions(space, r, acts, va, vb)
        big_a[key], big_b[key] = va, vb

    a0 = policy.restart_action
    nk = space.restart_next(a0)
    r0 = float(space.reward(0, a0)[0])
    if nk is None:
        ea, eb = 0.0, 0.0
    else:
        ea = float(space.expect_next(big_a[nk], 0, a0)[0])
        eb = float(space.expect_next(big_b[nk], 0, a0)[0])
    gain = (r0 + ea) / (1.0 + eb)
    h = {key: big_a[key] - gain * big_b[key] for key in space.layers}
    h[None] = 0.0
    return gain, h


def _solve_zero_actions(space, r, acts, va, vb):
    # states playing 0 stay in the layer and only move to larger m:
    # solve the triangular system from the top
    t = r * space.ratio
    p = space.p
    fail = space.fail_lat(t)
    reward = r * space.grid.step * space.success(r, 0)
    for m in np.nonzero(acts == 0)[0][::-1]:
        jmax = t - m
        w = p[1: jmax + 1] * fail[m + 1: t + 1]
        denom = 1.0 - p[0] * fail[m]
        if denom <= 1e-15:
            raise SolverError(
                f"zero-rate state (isig={m * space.delta}, rsig={r * space.grid.step}) never "
                "leaves itself: the policy does not return to the restart state (not unichain)")
        va[m] = (reward[m] + w @ va[m + 1: t + 1]) / denom
        vb[m] = (1.0 + w @ vb[m + 1: t + 1]) / denom


def _state_index(space):
    idx = {"restart": 0}
    for key in space.layers:
        for m in range(space.layer_size(key)):
            idx[(key[0], key[1], m)] = len(idx)
    return idx


def evaluate_policy_sparse(policy, space, reference="restart"):
    """Reference evaluation by a direct sparse solve of the Bellman system.

    Solves ``g + h(s) = R(s) + sum_s' P(s, s') h(s')`` with ``h(reference) = 0``.
    Only meant for small spaces.  Returns ``(gain, h)`` with ``h`` keyed like
    :func:`evaluate_policy`.
    """
    idx = _state_index(space)
    n = len(idx)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)

    def add_state(i, key, m, a):
        r_idx = 0 if key is None else key[1]
        rhs[i] = float(space.reward(r_idx, a)[m])
        rows.append(i), cols.append(i), vals.append(1.0)
        for nxt, pr in space.transitions(key, m, a).items():
            rows.append(i), cols.append(idx[nxt]), vals.append(-pr)

    add_state(0, None, 0, policy.restart_action)
    for key in space.layers:
        for m, a in enumerate(policy.actions[key]):
            add_state(idx[(key[0], key[1], m)], key, m, int(a))
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n)).tolil()
    ref = idx[reference]
    # the pinned h(ref) = 0 frees its column for the gain
    mat[:, ref] = np.ones((n, 1))
    sol = sparse_linalg.spsolve(mat.tocsc(), rhs)
    if not np.all(np.isfinite(sol)):
        raise SolverError("singular Bellman system: the policy is not unichain")
    gain = float(sol[ref])
    sol[ref] = 0.0
    h = {None: float(sol[0])}
    for key in space.layers:
        h[key] = np.array([sol[idx[(key[0], key[1], m)]] for m in range(space.layer_size(key))])
    return gain, h


def _q_values(space, key, h):
    """Q-values ``R(s, a) + E[h(s')]`` for every state of a layer and every feasible action.

    Returns ``(actions, q)`` with ``q`` of shape ``(len(actions), layer_size)``.
    """
    k, r = key
    acts = space.grid.actions(r)
    q = np.empty((acts.size, space.layer_size(key)))
    for i, a in enumerate(acts):
        a = int(a)
        nk = space.next_key(key, a)
        q[i] = space.reward(r, a)
        if nk is not None:
            q[i] += space.expect_next(h[nk], r, a)
    return acts, q


def _q_restart(space, h, restart_actions):
    q = np.empty(len(restart_actions))
    for i, a in enumerate(restart_actions):
        a = int(a)
        nk = space.restart_next(a)
        q[i] = float(space.reward(0, a)[0])
        if nk is not None:
            q[i] += float(space.expect_next(h[nk], 0, a)[0])
    return q


def _pick(acts, q, current=None):
    best = np.argmax(q, axis=0)
    if current is None:
        return acts[best]
    cur_pos = np.searchsorted(acts, current)
    cols = np.arange(q.shape[1])
    q_cur = q[cur_pos, cols]
    q_best = q[best, cols]
    keep = q_best <= q_cur + IMPROVE_TOL * np.maximum(1.0, np.abs(q_cur))
    return np.where(keep, current, acts[best])


def greedy_policy(space, h=None, first_rate=None, current=None):
    """Greedy policy w.r.t. ``h`` (``h = 0`` gives the myopic policy).

    With ``current`` given, an action is only replaced by a strictly better one.
    """
    if h is None:
        h = {key: np.zeros(space.layer_size(key)) for key in space.layers}
        h[None] = 0.0
    actions = {}
    for key in space.layers:
        acts, q = _q_values(space, key, h)
        actions[key] = _pick(acts, q, None if current is None else current.actions[key]).astype(np.int64)
    r_acts = _restart_actions(space, first_rate)
    qr = _q_restart(space, h, r_acts)
    restart = int(_pick(r_acts, qr[:, None], None if current is None else
                        np.array([current.restart_action]))[0])
    return _make_policy(space, restart, actions)


def bellman_residual(space, gain, h, first_rate=None):
    res = 0.0
    for key in space.layers:
        _, q = _q_values(space, key, h)
        res = max(res, float(np.max(np.abs(q.max(axis=0) - gain - h[key]))))
    qr = _q_restart(space, h, _restart_actions(space, first_rate))
    return max(res, abs(float(qr.max()) - gain))


def policy_iteration(space, init_policy=None, first_rate=None, max_iter=MAX_ITERATIONS):
    """Howard policy iteration for the average-reward criterion.

    Parameters
    ----------
    space : StateSpace
    init_policy : TabularPolicy, optional
        Defaults to the myopic (immediate-reward greedy) policy.
    first_rate : float, optional
        Pins the restart action to this rate.

    Returns
    -------
    SolveResult
    """
    policy = init_policy if init_policy is not None else greedy_policy(space, first_rate=first_rate)
    if first_rate is not None and init_policy is not None:
        policy = TabularPolicy(_restart_actions(space, first_rate)[0], policy.actions,
                               policy.grid_step, policy.action_step, policy.k_max, policy.metadata)
    history = []
    for it in range(1, max_iter + 1):
        gain, h = evaluate_policy(policy, space)
        if history and gain < history[-1] - 1e-10 * max(1.0, abs(history[-1])):
            raise SolverError(f"gain decreased from {history[-1]} to {gain} at iteration {it}")
        history.append(gain)
        log.debug("policy iteration %d: gain %.12f", it, gain)
        new = greedy_policy(space, h, first_rate, current=policy)
        stable = new.restart_action == policy.restart_action and all(
            np.array_equal(new.actions[key], policy.actions[key]) for key in space.layers)
        policy = new
        if stable:
            residual = bellman_residual(space, gain, h, first_rate)
            policy.metadata.update(gain=gain)
            return SolveResult(policy, gain, h, it, history, residual)
    gain, h = evaluate_policy(policy, space)
    raise SolverError(
        f"policy iteration did not converge in {max_iter} iterations; last gain {gain}, "
        f"Bellman residual {bellman_residual(space, gain, h, first_rate)}")

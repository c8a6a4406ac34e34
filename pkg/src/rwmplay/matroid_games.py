"""Congestion and security games whose players choose matroid bases.

Both games are linear: a basis earns the sum of per-vertex rewards, and a
vertex's reward depends on the opponents only when they touch that vertex.
:class:`VertexLossState` exploits this by storing a piecewise no-collision
reward shared by all rounds plus a sparse overlay for touched vertices.
"""

import math

import numpy as np

from .errors import ValidationError
from .game import Game
from .matroid import StructuredField, UniformMatroid, matroid_from_dict
from .piecewise import PiecewiseFn


class VertexLossState:
    """Cumulative per-vertex rewards of one matroid player.

    ``total(v) = rounds * nc(v) + overlay[v]`` where ``nc`` is the
    no-collision reward (stored as a :class:`PiecewiseFn` whose log values
    are the rewards) and ``overlay[v]`` sums, over rounds in which an
    opponent touched ``v``, the difference from the no-collision value.
    ``const`` collects reward earned by every basis alike; a basis ``S``
    has total ``const + sum_{v in S} total(v)``.
    """

    def __init__(self, nc_rewards):
        nc = np.asarray(nc_rewards, dtype=np.float64)
        self.nc = PiecewiseFn.from_dense_log(nc)
        self.rounds = 0
        self.const = 0.0
        self.overlay = {}
        self.counts = {}

    @property
    def n(self):
        return self.nc.domain_max + 1

    def observe(self, touched, const=0.0):
        """One round; ``touched`` maps vertex -> this round's reward there."""
        self.rounds += 1
        self.const += const
        for v, r in touched.items():
            v = int(v)
            self.overlay[v] = self.overlay.get(v, 0.0) + (r - self.nc.log_eval(v))
            self.counts[v] = self.counts.get(v, 0) + 1

    def total(self, v):
        """Vertex total excluding ``const``."""
        return self.rounds * self.nc.log_eval(v) + self.overlay.get(int(v), 0.0)

    def dense_rewards(self):
        """Per-vertex totals without ``const`` (which every basis earns once)."""
        out = self.rounds * self.nc.dense_log()
        for v, d in self.overlay.items():
            out[v] += d
        return out

    def basis_total(self, S):
        return self.const + float(self.dense_rewards()[list(S)].sum())

    def field(self, beta):
        """External field ``w(v) = beta ** (-total(v))`` (the constant dropped)."""
        rate = -math.log(beta)
        base = self.nc.power(self.rounds * rate)
        return StructuredField(base, {v: d * rate for v, d in self.overlay.items()})

    def n_pieces(self):
        return self.nc.n_pieces + len(self.overlay)


def observe_collision_sensitive(state, touched, const=0.0):
    state.observe(touched, const)
    return state


class CongestionSpec(Game):
    """Matroid congestion game.

    ``rewards[e, c - 1]`` is the reward of element ``e`` to each of the ``c``
    players selecting it.  Player ``i`` picks a basis of ``matroids[i]``.
    """

    family = "congestion"

    def __init__(self, matroids, rewards):
        self.matroids = list(matroids)
        self.n_players = len(self.matroids)
        self.c = np.asarray(rewards, dtype=np.float64)
        n = self.matroids[0].n
        if any(M.n != n for M in self.matroids):
            raise ValidationError("all players need the same ground set")
        if self.c.shape != (n, self.n_players):
            raise ValidationError(f"rewards must be n x m = {n} x {self.n_players}")
        self.n = n

    def matroid(self, i):
        return self.matroids[i]

    def validate_action(self, action, i):
        return self.matroids[i].check_basis(action)

    def loads(self, actions):
        load = np.zeros(self.n, dtype=np.int64)
        for s in actions:
            load[list(s)] += 1
        return load

    def reward(self, actions, i):
        return congestion_reward(self, actions, i)

    def vertex_rewards(self, actions, i):
        """Reward player ``i`` would get at every vertex against the others."""
        load = self.loads([s for j, s in enumerate(actions) if j != i])
        return self.c[np.arange(self.n), load]

    def L_max(self, i):
        return float(self.matroids[i].rank * np.abs(self.c).max())

    def N_log(self, i):
        return self.matroids[i].log_count()

    def make_profile(self, i, beta=None):
        return VertexLossState(self.c[:, 0])

    def observe(self, state, actions, i):
        touched = {}
        load = self.loads([s for j, s in enumerate(actions) if j != i])
        for v in np.flatnonzero(load):
            touched[int(v)] = float(self.c[v, load[v]])
        state.observe(touched)

    def to_dict(self):
        return {"type": "congestion", "matroids": [M.to_dict() for M in self.matroids],
                "rewards": self.c.tolist()}


def congestion_reward(spec, actions, i):
    actions = [spec.validate_action(s, j) for j, s in enumerate(actions)]
    load = spec.loads(actions)
    s = list(actions[i])
    return float(spec.c[s, load[s] - 1].sum())


class SecuritySpec(Game):
    """Security game: player 0 defends a basis, player 1 attacks targets.

    Defender gets ``r(i)`` for a defended attacked target, ``c(i)``
    otherwise; attacker gets ``zeta(i)`` or ``rho(i)``.  With several
    attacked targets rewards add up.  The attacker picks a basis of
    ``attacker`` (default: a single target).
    """

    family = "security"

    def __init__(self, defender, r, zeta, c, rho, attacker=None):
        self.defender = defender
        n = defender.n
        self.r, self.zeta, self.c, self.rho = (np.asarray(a, dtype=np.float64)
                                               for a in (r, zeta, c, rho))
        for a in (self.r, self.zeta, self.c, self.rho):
            if a.shape != (n,):
                raise ValidationError(f"reward vectors need length {n}")
        self.attacker = attacker if attacker is not None else UniformMatroid(n, 1)
        if self.attacker.n != n:
            raise ValidationError("attacker ground set must be the targets")
        self.n = n
        self.n_players = 2
        self.zero_sum = bool(np.array_equal(self.r, -self.zeta)
                             and np.array_equal(self.c, -self.rho))

    def matroid(self, i):
        return self.defender if i == 0 else self.attacker

    def validate_action(self, action, i):
        return self.matroid(i).check_basis(action)

    def reward(self, actions, i):
        return security_rewards(self, actions[0], actions[1])[i]

    def L_max(self, i):
        ka = self.attacker.rank
        vals = (self.r, self.c) if i == 0 else (self.zeta, self.rho)
        return float(ka * max(np.abs(v).max() for v in vals))

    def N_log(self, i):
        return self.matroid(i).log_count()

    def make_profile(self, i, beta=None):
        if i == 0:
            return VertexLossState(np.zeros(self.n))
        return VertexLossState(self.rho)

    def vertex_rewards(self, actions, i):
        """Linearized per-vertex rewards (constants included) for player ``i``."""
        if i == 0:
            k = self.defender.rank
            out = np.zeros(self.n)
            for a in actions[1]:
                out += self.c[a] / k if k else 0.0
                out[a] += self.r[a] - self.c[a]
            return out
        out = self.rho.copy()
        S = list(actions[0])
        out[S] = self.zeta[S]
        return out

    def observe(self, state, actions, i):
        if i == 0:
            touched = {}
            for a in actions[1]:
                touched[a] = touched.get(a, 0.0) + self.r[a] - self.c[a]
            state.observe(touched, const=float(sum(self.c[a] for a in actions[1])))
        else:
            state.observe({int(v): float(self.zeta[v]) for v in actions[0]})

    def to_dict(self):
        return {"type": "security", "defender": self.defender.to_dict(),
                "attacker": self.attacker.to_dict(), "r": self.r.tolist(),
                "zeta": self.zeta.tolist(), "c": self.c.tolist(), "rho": self.rho.tolist()}


def security_rewards(spec, S, attacked):
    """(defender, attacker) rewards; ``attacked`` is a target or a tuple of them."""
    S = set(spec.defender.check_basis(S))
    if np.isscalar(attacked):
        attacked = (int(attacked),)
    attacked = spec.attacker.check_basis(attacked)
    d = sum(spec.r[a] if a in S else spec.c[a] for a in attacked)
    t = sum(spec.zeta[a] if a in S else spec.rho[a] for a in attacked)
    return float(d), float(t)


def congestion_from_dict(d):
    return CongestionSpec([matroid_from_dict(m) for m in d["matroids"]], d["rewards"])

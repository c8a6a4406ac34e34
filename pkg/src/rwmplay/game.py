"""Common surface of every game family."""

import hashlib
import json

import numpy as np


class Game:
    """An m-player normal-form game with structured action sets.

    Subclasses provide ``reward``, ``L_max``, ``N_log`` and action validation.
    Actions are plain tuples so histories serialize directly to JSON.
    """

    family = "abstract"
    zero_sum = False
    n_players = 0

    def reward(self, actions, i):
        raise NotImplementedError

    def rewards(self, actions):
        return np.array([self.reward(actions, i) for i in range(self.n_players)])

    def L_max(self, i):
        raise NotImplementedError

    def N_log(self, i):
        """Natural log of the number of actions of player ``i``."""
        raise NotImplementedError

    def validate_action(self, action, i):
        return tuple(action)

    def to_dict(self):
        raise NotImplementedError

    def game_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

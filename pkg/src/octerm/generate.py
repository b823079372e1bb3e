"""Seeded random models for sweeps and property tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .model import OcSsg, Owner, Rule


def random_model(rng: np.random.Generator, n_states: int, max_out: int = 3, owners=(Owner.MAX, Owner.RANDOM), max_weight: int = 4) -> OcSsg:
    """A valid model with ``n_states`` states and 1..max_out distinct rules per state.

    Chance probabilities are normalized integer weights in 1..max_weight.
    """
    states = tuple((f"q{i}", owners[int(rng.integers(len(owners)))]) for i in range(n_states))
    rules = []
    moves = [(d, r) for d in (-1, 0, 1) for r in range(n_states)]
    for q, (_, owner) in enumerate(states):
        k = int(rng.integers(1, min(max_out, len(moves)) + 1))
        picks = sorted(rng.choice(len(moves), size=k, replace=False).tolist())
        weights = [int(w) for w in rng.integers(1, max_weight + 1, size=k)]
        total = sum(weights)
        for p, w in zip(picks, weights):
            d, r = moves[p]
            prob = Fraction(w, total) if owner is Owner.RANDOM else None
            rules.append(Rule(q, d, r, prob))
    return OcSsg(states, tuple(rules))


def random_models(seed: int, count: int, max_states: int = 4, **kw) -> list[OcSsg]:
    rng = np.random.default_rng(seed)
    return [random_model(rng, int(rng.integers(1, max_states + 1)), **kw) for _ in range(count)]

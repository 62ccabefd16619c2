"""Truncated Gaussian link noise with one reproducible stream per directed link.

Each stream draws standard normals in fixed-size chunks from its own
generator, rejects values outside ``[-3, 3]`` and serves the survivors in
order.  Because the chunking is fixed, ``sample`` one at a time and
``take(n)`` in bulk produce exactly the same sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TRUNCATION = 3.0
_CHUNK = 512


def truncated_variance_factor(bound: float = TRUNCATION) -> float:
    """Variance of a standard normal conditioned on ``|w| <= bound``."""
    phi = math.exp(-0.5 * bound * bound) / math.sqrt(2.0 * math.pi)
    mass = math.erf(bound / math.sqrt(2.0))  # 2*Phi(bound) - 1
    return 1.0 - 2.0 * bound * phi / mass


def _check_variance(sigma2: float) -> float:
    sigma2 = float(sigma2)
    if not sigma2 >= 0.0:
        raise ValueError(f"noise variance must be >= 0, got {sigma2}")
    return sigma2


@dataclass(frozen=True)
class LinkNoiseModel:
    sigma2: float
    seed: int = 0

    def __post_init__(self) -> None:
        _check_variance(self.sigma2)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def bound(self) -> float:
        return TRUNCATION * self.sigma


class NoiseStream:
    """Standardized truncated-normal draws for one (realization, link, channel)."""

    def __init__(self, entropy: tuple[int, ...]):
        self.entropy = entropy
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))
        self._buf = np.empty(0)
        self._pos = 0

    def _refill(self, need: int) -> None:
        parts = [self._buf[self._pos:]]
        have = parts[0].size
        while have < need:
            z = self._rng.standard_normal(_CHUNK)
            z = z[np.abs(z) <= TRUNCATION]
            parts.append(z)
            have += z.size
        self._buf = np.concatenate(parts)
        self._pos = 0

    def standard(self, n: int) -> np.ndarray:
        """Next ``n`` draws at unit scale (before multiplying by sigma)."""
        if self._buf.size - self._pos < n:
            self._refill(n)
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out

    def take(self, n: int, sigma2: float) -> np.ndarray:
        sigma2 = _check_variance(sigma2)
        z = self.standard(n)
        if sigma2 == 0.0:
            return np.zeros(n)
        return math.sqrt(sigma2) * z


def sample(stream: NoiseStream, sigma2: float) -> float:
    return float(stream.take(1, sigma2)[0])


def stream_for(
    model: LinkNoiseModel, realization: int, sender: int, receiver: int, channel: int = 0
) -> NoiseStream:
    """Deterministic stream for the directed link ``sender -> receiver``.

    ``channel`` separates independent transmissions on the same link within
    a round (used only by the D-MC redraw variant).
    """
    if sender == receiver:
        raise ValueError(f"no link from agent {sender} to itself")
    if min(realization, sender, receiver, channel) < 0:
        raise ValueError("realization, agent ids and channel must be non-negative")
    return NoiseStream((int(model.seed), int(realization), int(sender), int(receiver), int(channel)))


def link_noise_block(
    model: LinkNoiseModel,
    links: tuple[tuple[int, int], ...],
    realizations: list[int],
    rounds: int,
    channel: int = 0,
) -> np.ndarray:
    """Noise for every round and link, shape (len(realizations), rounds, len(links))."""
    out = np.zeros((len(realizations), rounds, len(links)))
    if model.sigma2 == 0.0 or rounds == 0:
        return out
    for b, r in enumerate(realizations):
        for l, (snd, rcv) in enumerate(links):
            out[b, :, l] = stream_for(model, r, snd, rcv, channel).take(rounds, model.sigma2)
    return out

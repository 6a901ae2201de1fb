"""Gauss rule for the Chebyshev (arcsine) measure and affine rescaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class ChebyshevRule:
    """``G`` nodes ``cos((2l-1)pi/(2G))`` (decreasing in ``l``), weights ``1/G``."""

    G: int
    nodes: np.ndarray
    weights: np.ndarray


def chebyshev_nodes(G: int) -> np.ndarray:
    if G < 1:
        raise ParameterError("quadrature order G must be >= 1")
    l = np.arange(1, G + 1)
    return np.cos((2 * l - 1) * np.pi / (2 * G))


def chebyshev_rule(G: int) -> ChebyshevRule:
    nodes = chebyshev_nodes(G)
    weights = np.full(G, 1.0 / G)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return ChebyshevRule(G, nodes, weights)


def map_to_interval(t, interval):
    """Affine image of ``t`` in [-1, 1] on ``[alpha, beta]``, order preserving."""
    alpha, beta = interval
    if not alpha < beta:
        raise ParameterError("interval needs alpha < beta")
    return 0.5 * (alpha + beta) + np.asarray(t) * (0.5 * (beta - alpha))

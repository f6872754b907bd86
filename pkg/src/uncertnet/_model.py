"""Pairwise likelihood pieces shared by BP, the M-step and the exact oracle."""

import numpy as np

from .errors import DegenerateRho

DC_CEILING = 1.0 - 1e-9
MODES = ("plain", "dc")


def check_rho(rho):
    if not 0.0 < rho < 1.0:
        raise DegenerateRho(f"density must lie strictly inside (0, 1), got {rho!r}")
    return float(rho)


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def resolve_degrees(net, mode, degrees=None):
    """Per-node degree factors: ones for the plain model, expected degrees for DC."""
    check_mode(mode)
    if degrees is not None:
        d = np.asarray(getattr(degrees, "d", degrees), dtype=np.float64)
        if d.shape != (net.n,):
            raise ValueError("degree vector has the wrong length")
        return d
    if mode == "plain":
        return np.ones(net.n)
    return net.expected_degrees().d


def edge_prob(omega, dd=1.0, clamp=False):
    """Edge probability ``d_i d_j omega_rs``; clamped below 1 in the DC model."""
    p = np.multiply(dd, omega)
    if clamp:
        p = np.clip(p, 0.0, DC_CEILING)
    return p


def bracket(q, p, rho):
    """``q p / rho + (1 - q)(1 - p)/(1 - rho)``: one pair's factor after summing out A_ij."""
    return q * p / rho + (1.0 - q) * (1.0 - p) / (1.0 - rho)

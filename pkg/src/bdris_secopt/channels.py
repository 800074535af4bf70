"""Wiretap-channel geometry: path loss, Rician RIS links, Gaussian direct links.

Five channels are drawn per realization: Alice->Bob and Alice->Eve direct
links (i.i.d. complex Gaussian), and the RIS links Alice->RIS, RIS->Bob,
RIS->Eve (Rician with ULA steering LOS components). Large-scale gain
multiplies the small-scale fading as sqrt(L(d)) on the amplitude. All
internal math is in linear watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

Position = tuple[float, float]


@dataclass(frozen=True)
class SystemConfig:
    n_t: int = 24            # Alice antennas
    n_b: int = 4             # Bob antennas
    n_e: int = 2             # Eve antennas
    n_s: int = 2             # data streams
    m: int = 80              # RIS elements
    g: int = 4               # RIS groups (block size m/g)
    p: float = 1.0           # transmit power, W (0 dBW)
    sigma_b2: float = 1e-7   # Bob noise power, W (-40 dBm)
    sigma_e2: float = 1e-7   # Eve noise power, W (-40 dBm)
    pos_alice: Position = (0.0, 0.0)
    pos_ris: Position = (50.0, 2.0)
    pos_bob: Position = (55.0, 0.0)
    pos_eve: Position = (45.0, 0.0)
    zeta_ai: float = 2.2
    zeta_ib: float = 2.5
    zeta_ie: float = 2.5
    zeta_ab: float = 3.5
    zeta_ae: float = 3.5
    c0: float = 1e-3         # reference path loss at d0 (-30 dB)
    d0: float = 1.0          # reference distance, m
    kappa: float = 5.0       # Rician factor

    def __post_init__(self):
        ints = {"n_t": self.n_t, "n_b": self.n_b, "n_e": self.n_e,
                "n_s": self.n_s, "g": self.g}
        for name, v in ints.items():
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        # m = 0 is tolerated as the degenerate "no RIS elements" case
        if not isinstance(self.m, (int, np.integer)) or self.m < 0:
            raise ValueError(f"m must be a nonnegative integer, got {self.m!r}")
        if self.m % self.g != 0:
            raise ValueError(f"g={self.g} must divide m={self.m}")
        if self.n_s > min(self.n_t, self.n_b):
            raise ValueError("n_s must not exceed min(n_t, n_b)")
        for name in ("p", "sigma_b2", "sigma_e2", "c0", "d0", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("zeta_ai", "zeta_ib", "zeta_ie", "zeta_ab", "zeta_ae"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def m_tilde(self) -> int:
        return self.m // self.g

    def with_(self, **kw) -> "SystemConfig":
        return replace(self, **kw)


def default_config(**overrides) -> SystemConfig:
    return SystemConfig(**overrides)


@dataclass(frozen=True)
class ChannelSet:
    h_ab: np.ndarray  # N_b x N_t
    h_ae: np.ndarray  # N_e x N_t
    h_ai: np.ndarray  # M   x N_t
    h_ib: np.ndarray  # N_b x M
    h_ie: np.ndarray  # N_e x M

    def __post_init__(self):
        for name in ("h_ab", "h_ae", "h_ai", "h_ib", "h_ie"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")


@dataclass(frozen=True)
class GroupBlocks:
    """Per-group column blocks of h_ib/h_ie and row blocks of h_ai.

    The direct links ride along untouched so that effective channels can be
    assembled from this object alone.
    """
    h_ai: np.ndarray  # (G, Mt, N_t)
    h_ib: np.ndarray  # (G, N_b, Mt)
    h_ie: np.ndarray  # (G, N_e, Mt)
    h_ab: np.ndarray  # (N_b, N_t)
    h_ae: np.ndarray  # (N_e, N_t)


@dataclass(frozen=True)
class CeeConfig:
    """Per-entry channel-estimation-error variances.

    delta is the normalized uncertainty level: each family's error variance is
    delta times the mean squared magnitude of that family's nominal entries.
    """
    delta: float
    sigma_ai2: float
    sigma_ib2: float
    sigma_ie2: float
    sigma_ab2: float
    sigma_ae2: float


def path_loss(d: float, zeta: float, c0: float = 1e-3, d0: float = 1.0) -> float:
    """Large-scale gain C0 (d/D0)^(-zeta), linear scale."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return c0 * (d / d0) ** (-zeta)


def steering_vector(n: int, psi: float) -> np.ndarray:
    """ULA response [1, e^{j pi sin psi}, ..., e^{j pi (n-1) sin psi}]."""
    if n < 1:
        raise ValueError("element count must be >= 1")
    return np.exp(1j * np.pi * np.arange(n) * np.sin(psi))


def _distance(a: Position, b: Position) -> float:
    d = math.hypot(b[0] - a[0], b[1] - a[1])
    if d == 0.0:
        raise ValueError(f"coincident positions {a}")
    return d


def _departure_angle(tx: Position, rx: Position) -> float:
    dx = rx[0] - tx[0]
    dy = rx[1] - tx[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError(f"coincident positions {tx}")
    if dx == 0.0:
        return math.copysign(math.pi / 2.0, dy)
    return math.atan(dy / dx)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    # i.i.d. CN(0, 1) entries
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(rng, n_rx, n_tx, tx_pos, rx_pos, kappa):
    psi_t = _departure_angle(tx_pos, rx_pos)
    psi_r = math.pi - psi_t
    los = np.outer(steering_vector(n_rx, psi_r), steering_vector(n_tx, psi_t).conj())
    nlos = _cn(rng, (n_rx, n_tx))
    return math.sqrt(kappa / (1.0 + kappa)) * los + math.sqrt(1.0 / (1.0 + kappa)) * nlos


def draw_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """One channel realization. Deterministic given (cfg, rng state).

    Draw order is fixed (ab, ae, ai, ib, ie) so identical seeds give
    bit-identical channel sets.
    """
    d_ab = _distance(cfg.pos_alice, cfg.pos_bob)
    d_ae = _distance(cfg.pos_alice, cfg.pos_eve)
    d_ai = _distance(cfg.pos_alice, cfg.pos_ris)
    d_ib = _distance(cfg.pos_ris, cfg.pos_bob)
    d_ie = _distance(cfg.pos_ris, cfg.pos_eve)

    h_ab = math.sqrt(path_loss(d_ab, cfg.zeta_ab, cfg.c0, cfg.d0)) * _cn(rng, (cfg.n_b, cfg.n_t))
    h_ae = math.sqrt(path_loss(d_ae, cfg.zeta_ae, cfg.c0, cfg.d0)) * _cn(rng, (cfg.n_e, cfg.n_t))
    if cfg.m == 0:  # no RIS elements: the reflected links are empty matrices
        return ChannelSet(h_ab, h_ae,
                          np.zeros((0, cfg.n_t), dtype=complex),
                          np.zeros((cfg.n_b, 0), dtype=complex),
                          np.zeros((cfg.n_e, 0), dtype=complex))
    h_ai = math.sqrt(path_loss(d_ai, cfg.zeta_ai, cfg.c0, cfg.d0)) * _rician(
        rng, cfg.m, cfg.n_t, cfg.pos_alice, cfg.pos_ris, cfg.kappa)
    h_ib = math.sqrt(path_loss(d_ib, cfg.zeta_ib, cfg.c0, cfg.d0)) * _rician(
        rng, cfg.n_b, cfg.m, cfg.pos_ris, cfg.pos_bob, cfg.kappa)
    h_ie = math.sqrt(path_loss(d_ie, cfg.zeta_ie, cfg.c0, cfg.d0)) * _rician(
        rng, cfg.n_e, cfg.m, cfg.pos_ris, cfg.pos_eve, cfg.kappa)
    return ChannelSet(h_ab, h_ae, h_ai, h_ib, h_ie)


def group_blocks(cs: ChannelSet, groups: int) -> GroupBlocks:
    """Split the RIS links into G per-group blocks; concatenation is lossless."""
    m = cs.h_ai.shape[0]
    if m % groups != 0:
        raise ValueError(f"groups={groups} must divide m={m}")
    mt = m // groups
    h_ai = np.stack([cs.h_ai[g * mt:(g + 1) * mt, :] for g in range(groups)])
    h_ib = np.stack([cs.h_ib[:, g * mt:(g + 1) * mt] for g in range(groups)])
    h_ie = np.stack([cs.h_ie[:, g * mt:(g + 1) * mt] for g in range(groups)])
    return GroupBlocks(h_ai=h_ai, h_ib=h_ib, h_ie=h_ie,
                       h_ab=cs.h_ab, h_ae=cs.h_ae)


def _mean_sq(h: np.ndarray) -> float:
    if h.size == 0:
        return 0.0
    return float(np.mean(np.abs(h) ** 2))


def cee_variances(cfg: SystemConfig, cs: ChannelSet, delta: float) -> CeeConfig:
    """Estimation-error variances scaled to each channel family's level."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    del cfg  # variances depend only on the realized channels and delta
    return CeeConfig(
        delta=delta,
        sigma_ai2=delta * _mean_sq(cs.h_ai),
        sigma_ib2=delta * _mean_sq(cs.h_ib),
        sigma_ie2=delta * _mean_sq(cs.h_ie),
        sigma_ab2=delta * _mean_sq(cs.h_ab),
        sigma_ae2=delta * _mean_sq(cs.h_ae),
    )

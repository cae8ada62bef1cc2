"""Smooth random angle trajectories drawn from a Gaussian random process.

A trajectory of length P is drawn with covariance
``C[n, m] = amplitude * exp(-(n - m)^2 / (2 * correlation_length^2))``
by eigendecomposing C = Q diag(lam) Q^T and forming ``Q sqrt(lam) x`` with
``x`` i.i.d. standard normal.  The raw draws are zero mean, so the circuit
ensembles fold them into [0, pi] modulo pi: exp(-i(theta+pi)X) differs from
exp(-i theta X) only by a global phase, so the fold relabels each gate
without changing any observable.  The fold keeps the ensemble centered on
the weak-kick point theta = 0 (mod pi), where the z-bond variant localizes
and the x-bond variant is maximally scrambling; shifting the center instead
(``map_to_angles``) parks both variants near the pi/2 bit-flip point.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ScrambleError, ValidationError

# Defaults were calibrated against the regime diagnostics: amplitudes near
# 0.01 keep variant I localized (magnetization retained at depth 40) while
# variant II already scrambles, and the short correlation length decorrelates
# successive kicks.  Clamping is then never triggered in practice.
DEFAULT_AMPLITUDE = 0.011
DEFAULT_CORRELATION_LENGTH = 1.0

# Eigenvalues in [-EIG_CLAMP, 0) are treated as numerical noise and zeroed
# before the square root; anything more negative means the kernel is broken.
EIG_CLAMP = 1e-12

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class GpConfig:
    """Parameters of one trajectory draw; equal configs give equal draws."""

    length: int
    amplitude: float = DEFAULT_AMPLITUDE
    correlation_length: float = DEFAULT_CORRELATION_LENGTH
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValidationError(f"length must be >= 1, got {self.length}")
        if self.amplitude < 0:
            raise ValidationError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.correlation_length <= 0:
            raise ValidationError(
                f"correlation_length must be > 0, got {self.correlation_length}"
            )
        if not 0 <= self.seed <= _SEED_MASK:
            raise ValidationError("seed must fit in 64 unsigned bits")


def build_kernel(cfg: GpConfig) -> np.ndarray:
    """Return the P x P Gaussian covariance matrix of the process."""
    idx = np.arange(cfg.length, dtype=float)
    dist = idx[:, None] - idx[None, :]
    return cfg.amplitude * np.exp(-(dist**2) / (2.0 * cfg.correlation_length**2))


def raw_trajectory(cfg: GpConfig) -> np.ndarray:
    """Draw one zero-mean trajectory with the kernel's covariance."""
    cov = build_kernel(cfg)
    try:
        lam, q = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise ScrambleError(f"kernel eigendecomposition failed: {exc}") from exc
    if lam.min() < -EIG_CLAMP:
        raise ScrambleError(
            f"kernel has eigenvalue {lam.min():.3e} below the repair window"
        )
    lam = np.where(lam < 0.0, 0.0, lam)
    x = np.random.default_rng(cfg.seed).standard_normal(cfg.length)
    return (q * np.sqrt(lam)) @ x


def map_to_angles(raw: np.ndarray) -> np.ndarray:
    """Shift a raw draw to be centered on pi/2 and clamp into [0, pi]."""
    return np.clip(np.asarray(raw, dtype=float) + np.pi / 2, 0.0, np.pi)


def fold_to_angles(raw: np.ndarray) -> np.ndarray:
    """Fold a raw draw into [0, pi) modulo pi.

    x-rotations have physical period pi up to a global phase, so the folded
    angle drives the same dynamics as the raw value; negative kicks land
    near pi instead of near 0.
    """
    return np.mod(np.asarray(raw, dtype=float), np.pi)


def angle_trajectory(cfg: GpConfig) -> np.ndarray:
    """Draw one trajectory of P circuit angles in [0, pi)."""
    return fold_to_angles(raw_trajectory(cfg))


def qubit_seed(seed: int, qubit: int) -> int:
    """Derived seed for per-qubit draws: seed XOR qubit index (0-based)."""
    return (seed ^ qubit) & _SEED_MASK


def angle_grid(cfg: GpConfig, n_qubits: int, homogeneous: bool) -> np.ndarray:
    """Return a (P, N) angle grid.

    Homogeneous grids repeat one trajectory across all qubits; inhomogeneous
    grids draw one independent trajectory per qubit from the derived seeds.
    """
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be >= 1, got {n_qubits}")
    if homogeneous:
        theta = angle_trajectory(cfg)
        return np.tile(theta[:, None], (1, n_qubits))
    columns = []
    for i in range(n_qubits):
        column_cfg = GpConfig(
            length=cfg.length,
            amplitude=cfg.amplitude,
            correlation_length=cfg.correlation_length,
            seed=qubit_seed(cfg.seed, i),
        )
        columns.append(angle_trajectory(column_cfg))
    return np.stack(columns, axis=1)

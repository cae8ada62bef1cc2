"""Realization-averaged regime diagnostics behind the report path.

Each probe draws `realizations` independent angle grids (seed mixed with
the realization index), runs the circuit once per draw, and returns the
per-realization traces so callers can average or bootstrap.  A fixed
``theta`` bypasses the random process entirely: every rotation angle in
every module is that constant.
"""

from dataclasses import dataclass

import numpy as np

from .circuit import CircuitSpec, run_circuit
from .dataset import sample_seed
from .errors import ValidationError
from .gp import DEFAULT_AMPLITUDE, DEFAULT_CORRELATION_LENGTH, GpConfig, angle_grid
from .observables import (
    basis_entropy,
    connected_correlator,
    magnetization,
    otoc,
    pt_entropy,
    von_neumann_half,
)

DIAGNOSTIC_KINDS = ("correlators", "magnetization", "entropies", "otoc")


@dataclass(frozen=True)
class DiagConfig:
    """What to simulate when probing a regime."""

    n_qubits: int
    depth: int
    variant: str
    realizations: int = 20
    seed: int = 0
    amplitude: float = DEFAULT_AMPLITUDE
    correlation_length: float = DEFAULT_CORRELATION_LENGTH
    homogeneous: bool = False
    theta: float | None = None
    layer_order: str = "two_body_first"

    def __post_init__(self):
        if self.realizations < 1:
            raise ValidationError(f"realizations must be >= 1, got {self.realizations}")
        if self.theta is not None and not 0.0 <= self.theta <= np.pi:
            raise ValidationError(f"theta must lie in [0, pi], got {self.theta}")

    @property
    def effective_realizations(self) -> int:
        # a fixed angle leaves nothing to average over
        return 1 if self.theta is not None else self.realizations


def realization_spec(cfg: DiagConfig, index: int) -> CircuitSpec:
    if cfg.theta is not None:
        trajectory = np.full(cfg.depth, cfg.theta)
        return CircuitSpec.homogeneous(cfg.n_qubits, cfg.depth, cfg.variant,
                                       trajectory, cfg.layer_order)
    gp = GpConfig(length=cfg.depth, amplitude=cfg.amplitude,
                  correlation_length=cfg.correlation_length,
                  seed=sample_seed(cfg.seed, index))
    angles = angle_grid(gp, cfg.n_qubits, cfg.homogeneous)
    return CircuitSpec(cfg.n_qubits, cfg.depth, cfg.variant, angles,
                       cfg.layer_order)


def _sweep(cfg: DiagConfig, observer_factory):
    """Run every realization; observer_factory(out_row) -> run_circuit observer."""
    reals = cfg.effective_realizations
    rows = []
    for r in range(reals):
        spec = realization_spec(cfg, r)
        row = {}
        run_circuit(spec, observer=observer_factory(row))
        rows.append(row)
    return rows


def magnetization_samples(cfg: DiagConfig) -> np.ndarray:
    """(R, P+1) Z magnetization per realization, depth 0 included."""

    def factory(row):
        trace = row.setdefault("m", np.empty(cfg.depth + 1))

        def observer(p, state):
            trace[p] = magnetization(state)

        return observer

    rows = _sweep(cfg, factory)
    return np.stack([row["m"] for row in rows])


def correlator_samples(cfg: DiagConfig, gamma: str = "z", beta: str = "z",
                       site: int = 1) -> np.ndarray:
    """(R, P+1, l_max) connected-correlator magnitudes from `site`."""
    l_max = (cfg.n_qubits - 1) // 2
    if l_max < 1:
        raise ValidationError(f"need at least 3 qubits for correlators, got {cfg.n_qubits}")

    def factory(row):
        trace = row.setdefault("c", np.empty((cfg.depth + 1, l_max)))

        def observer(p, state):
            for ell in range(1, l_max + 1):
                trace[p, ell - 1] = connected_correlator(state, gamma, beta, site, ell)

        return observer

    rows = _sweep(cfg, factory)
    return np.stack([row["c"] for row in rows])


def entropy_samples(cfg: DiagConfig) -> dict:
    """Half-chain von Neumann and z-basis Shannon entropy per realization.

    Returns {"von_neumann": (R, P+1), "basis": (R, P+1), "pt": float}; the
    Porter-Thomas value is the chaotic-limit reference for the basis entropy.
    """

    def factory(row):
        v = row.setdefault("v", np.empty(cfg.depth + 1))
        b = row.setdefault("b", np.empty(cfg.depth + 1))

        def observer(p, state):
            v[p] = von_neumann_half(state)
            b[p] = basis_entropy(state)

        return observer

    rows = _sweep(cfg, factory)
    return {"von_neumann": np.stack([row["v"] for row in rows]),
            "basis": np.stack([row["b"] for row in rows]),
            "pt": pt_entropy(cfg.n_qubits)}


def otoc_samples(cfg: DiagConfig, axis: str = "z",
                 source_site: int | None = None) -> np.ndarray:
    """(R, P+1, N) normalized OTOC commutator norms per realization."""
    reals = cfg.effective_realizations
    fields = []
    for r in range(reals):
        spec = realization_spec(cfg, r)
        fields.append(otoc(spec, axis=axis, source_site=source_site).values)
    return np.stack(fields)

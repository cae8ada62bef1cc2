"""Exact statevector simulation of parametric random circuits on a ring.

A circuit of depth P applies modules U_p, p = 1..P, to the all-|0> product
state (the +1 eigenstate of every sigma_z).  Each module is three layers on
N qubits with periodic bonds:

  * two-body gates exp(-i pi/4 sigma_i^a sigma_{i+1}^a) on every bond
    (i, i+1 mod N), with a = z for variant "I" (diagonal, localizing) and
    a = x for variant "II" (scrambling),
  * single-qubit rotations exp(-i theta_p^i sigma_i^x) with per-module,
    per-qubit angles theta_p^i,
  * single-qubit phases exp(-i pi/4 sigma_i^z).

Basis convention: qubit 0 is the most significant bit of the basis-state
index, so ``state.reshape([2] * n)`` puts qubit q on axis q.  All gate
kernels act on arrays of shape (2^n,) or (2^n, m); the latter lets the same
code evolve the columns of an operator, which is how dense module unitaries
are accumulated.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ValidationError

VARIANTS = ("I", "II")
LAYER_ORDERS = ("two_body_first", "rotations_first")

# 2^26 complex amplitudes = 1 GiB; dense unitaries cap much earlier.
DEFAULT_MAX_QUBITS = 26
DENSE_MAX_QUBITS = 10

_ANGLE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class CircuitSpec:
    """Immutable description of one circuit realization.

    angles has shape (depth, n_qubits) with entries in [0, pi]; row p-1
    holds the x-rotation angles of module p.
    """

    n_qubits: int
    depth: int
    variant: str
    angles: np.ndarray
    layer_order: str = "two_body_first"

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValidationError(f"n_qubits must be >= 2, got {self.n_qubits}")
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.layer_order not in LAYER_ORDERS:
            raise ValidationError(
                f"layer_order must be one of {LAYER_ORDERS}, got {self.layer_order!r}"
            )
        angles = np.array(self.angles, dtype=float)
        if angles.shape != (self.depth, self.n_qubits):
            raise ValidationError(
                f"angles must have shape {(self.depth, self.n_qubits)}, got {angles.shape}"
            )
        if angles.min() < -_ANGLE_SLACK or angles.max() > np.pi + _ANGLE_SLACK:
            raise ValidationError("angles must lie in [0, pi]")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    @classmethod
    def homogeneous(cls, n_qubits, depth, variant, theta, layer_order="two_body_first"):
        """Build a spec whose module-p angle is shared by every qubit."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (depth,):
            raise ValidationError(f"theta must have shape ({depth},), got {theta.shape}")
        angles = np.tile(theta[:, None], (1, n_qubits))
        return cls(n_qubits, depth, variant, angles, layer_order)


def initial_state(n_qubits: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> np.ndarray:
    """All-|0> product state as a flat complex vector of length 2^n."""
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be >= 1, got {n_qubits}")
    if n_qubits > max_qubits:
        raise CapacityError(f"{n_qubits} qubits exceeds the {max_qubits}-qubit bound")
    state = np.zeros(2**n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def _apply_x_rotation(arr, n, q, theta):
    """In place exp(-i theta X_q): mixes amplitude pairs differing in bit q."""
    view = arr.reshape(2**q, 2, -1)
    c, s = np.cos(theta), np.sin(theta)
    a = view[:, 0].copy()
    b = view[:, 1]
    view[:, 0] = c * a - 1j * s * b
    view[:, 1] = c * b - 1j * s * a


def _apply_xx(arr, n, q1, q2, phi):
    """In place exp(-i phi X_q1 X_q2): mixes |00>,|11> and |01>,|10> pairs."""
    q1, q2 = sorted((q1, q2))
    view = arr.reshape(2**q1, 2, 2 ** (q2 - q1 - 1), 2, -1)
    c, s = np.cos(phi), np.sin(phi)
    a00 = view[:, 0, :, 0].copy()
    a11 = view[:, 1, :, 1]
    view[:, 0, :, 0] = c * a00 - 1j * s * a11
    view[:, 1, :, 1] = c * a11 - 1j * s * a00
    a01 = view[:, 0, :, 1].copy()
    a10 = view[:, 1, :, 0]
    view[:, 0, :, 1] = c * a01 - 1j * s * a10
    view[:, 1, :, 0] = c * a10 - 1j * s * a01


@lru_cache(maxsize=4)
def _zz_layer_mask(n):
    """Diagonal phases of the full zz-bond layer.

    For basis index b with spins z_i = +/-1, the layer multiplies by
    exp(-i pi/4 sum_i z_i z_{i+1 mod n}); the bond sum equals n - 2k where
    k counts neighbor pairs with opposite spins, read off by XORing the
    index against its one-bit ring rotation.
    """
    idx = np.arange(2**n, dtype=np.uint64)
    mask_bits = np.uint64(2**n - 1)
    rot = ((idx >> np.uint64(1)) | (idx << np.uint64(n - 1))) & mask_bits
    flips = np.bitwise_count(idx ^ rot).astype(np.int64)
    mask = np.exp(-0.25j * np.pi * (n - 2 * flips))
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=4)
def _z_layer_mask(n):
    """Diagonal phases of the single-qubit z layer: exp(-i pi/4 sum_i z_i)."""
    idx = np.arange(2**n, dtype=np.uint64)
    ones = np.bitwise_count(idx).astype(np.int64)
    mask = np.exp(-0.25j * np.pi * (n - 2 * ones))
    mask.setflags(write=False)
    return mask


def _apply_module_inplace(arr, n, variant, theta_row, layer_order):
    """Apply one module's three layers to a (2^n, ...) array in place."""

    def two_body():
        if variant == "I":
            arr.reshape(2**n, -1)[...] *= _zz_layer_mask(n)[:, None]
        else:
            for q in range(n):
                _apply_xx(arr, n, q, (q + 1) % n, np.pi / 4)

    def one_body():
        for q in range(n):
            _apply_x_rotation(arr, n, q, theta_row[q])
        arr.reshape(2**n, -1)[...] *= _z_layer_mask(n)[:, None]

    if layer_order == "two_body_first":
        two_body()
        one_body()
    else:
        one_body()
        two_body()


def apply_module(arr: np.ndarray, spec: CircuitSpec, p: int) -> np.ndarray:
    """Return module p (1-based) applied to a state or to operator columns.

    arr may be a flat (2^n,) statevector or a (2^n, m) matrix; the module
    unitary multiplies from the left either way.  The input is not mutated.
    """
    if not 1 <= p <= spec.depth:
        raise ValidationError(f"module index {p} outside [1, {spec.depth}]")
    if arr.shape[0] != 2**spec.n_qubits:
        raise ValidationError(
            f"array has leading dimension {arr.shape[0]}, expected {2**spec.n_qubits}"
        )
    out = np.array(arr, dtype=complex)
    _apply_module_inplace(out, spec.n_qubits, spec.variant, spec.angles[p - 1], spec.layer_order)
    return out


def run_circuit(spec: CircuitSpec, observer=None, max_qubits: int = DEFAULT_MAX_QUBITS):
    """Evolve the all-|0> state through all modules; return the final state.

    observer, if given, is called as observer(p, state) after module p for
    p = 1..depth and once with the initial state as observer(0, state).  The
    passed array is a read-only view, valid only during the call.
    """
    state = initial_state(spec.n_qubits, max_qubits=max_qubits)
    if observer is not None:
        ro = state.view()
        ro.setflags(write=False)
        observer(0, ro)
    for p in range(1, spec.depth + 1):
        _apply_module_inplace(
            state, spec.n_qubits, spec.variant, spec.angles[p - 1], spec.layer_order
        )
        if observer is not None:
            ro = state.view()
            ro.setflags(write=False)
            observer(p, ro)
    return state


def build_unitary(spec: CircuitSpec, p: int, max_qubits: int = DENSE_MAX_QUBITS) -> np.ndarray:
    """Dense unitary of the first p modules, U_p ... U_1; p = 0 gives identity."""
    if spec.n_qubits > max_qubits:
        raise CapacityError(
            f"dense unitary for {spec.n_qubits} qubits exceeds the {max_qubits}-qubit bound"
        )
    if not 0 <= p <= spec.depth:
        raise ValidationError(f"module count {p} outside [0, {spec.depth}]")
    u = np.eye(2**spec.n_qubits, dtype=complex)
    for k in range(1, p + 1):
        _apply_module_inplace(u, spec.n_qubits, spec.variant, spec.angles[k - 1], spec.layer_order)
    return u

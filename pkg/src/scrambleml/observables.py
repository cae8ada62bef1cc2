"""Expectation values and information measures on simulated states.

Sites are 1-based in every public signature (site i occupies bit n-i of the
basis index, qubit 0 being the most significant bit).  Axis labels are the
strings "x", "y", "z".  All entropies are in nats.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .circuit import CircuitSpec, apply_module
from .errors import CapacityError, ScrambleError, ValidationError

AXES = ("x", "y", "z")

PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

OTOC_MAX_QUBITS = 10

# Guards against numerical rot, far above double-precision noise.
IMAG_TOL = 1e-10
EIG_FLOOR = 1e-14
PROB_FLOOR = 1e-16


def _n_qubits(state: np.ndarray) -> int:
    n = int(state.shape[0]).bit_length() - 1
    if state.ndim != 1 or state.shape[0] != 2**n:
        raise ValidationError(f"state must be a flat 2^n vector, got shape {state.shape}")
    return n


def _check_site(site: int, n: int):
    if not 1 <= site <= n:
        raise ValidationError(f"site {site} outside [1, {n}]")


def _real_part(value: complex) -> float:
    if abs(value.imag) > IMAG_TOL:
        raise ScrambleError(f"expectation value has imaginary residue {value.imag:.3e}")
    return float(value.real)


def single_site_rdm(state: np.ndarray, site: int) -> np.ndarray:
    """2x2 reduced density matrix of one site."""
    n = _n_qubits(state)
    _check_site(site, n)
    v = state.reshape(2 ** (site - 1), 2, -1)
    return np.einsum("aib,ajb->ij", v, v.conj())


def two_site_rdm(state: np.ndarray, site_i: int, site_j: int) -> np.ndarray:
    """4x4 reduced density matrix of two distinct sites, row index 2*b_i + b_j."""
    n = _n_qubits(state)
    _check_site(site_i, n)
    _check_site(site_j, n)
    if site_i == site_j:
        raise ValidationError("sites must be distinct")
    lo, hi = sorted((site_i, site_j))
    v = state.reshape(2 ** (lo - 1), 2, 2 ** (hi - lo - 1), 2, -1)
    rho = np.einsum("aibjc,akblc->ijkl", v, v.conj())
    if site_i > site_j:
        rho = rho.transpose(1, 0, 3, 2)
    return rho.reshape(4, 4)


def site_moments(state: np.ndarray, site: int) -> np.ndarray:
    """(3,) array of <sigma_site^alpha> in axis order x, y, z."""
    rho = single_site_rdm(state, site)
    return np.array([_real_part(np.trace(rho @ PAULI[a])) for a in AXES])


def first_moments(state: np.ndarray) -> np.ndarray:
    """(N, 3) array of <sigma_i^alpha>, row i-1, axis order x, y, z."""
    n = _n_qubits(state)
    return np.stack([site_moments(state, i) for i in range(1, n + 1)])


def pair_moments(state: np.ndarray, site_i: int, site_j: int) -> np.ndarray:
    """(3, 3) array M[a, b] = <sigma_{site_i}^a sigma_{site_j}^b>."""
    rho = two_site_rdm(state, site_i, site_j)
    out = np.empty((3, 3))
    for a, ax_a in enumerate(AXES):
        for b, ax_b in enumerate(AXES):
            op = np.kron(PAULI[ax_a], PAULI[ax_b])
            out[a, b] = _real_part(np.trace(rho @ op))
    return out


def second_moments(state: np.ndarray, l_max: int) -> dict:
    """All <sigma_i^a sigma_{i+l}^b> as {(i, l, a, b): value}.

    i runs over 1..N with periodic wrap of i+l; l runs over 1..l_max, which
    must not exceed floor((N-1)/2) so no pair is counted from both sides.
    """
    n = _n_qubits(state)
    if not 1 <= l_max <= (n - 1) // 2:
        raise ValidationError(f"l_max {l_max} outside [1, {(n - 1) // 2}] for N={n}")
    out = {}
    for i in range(1, n + 1):
        for ell in range(1, l_max + 1):
            j = (i + ell - 1) % n + 1
            m = pair_moments(state, i, j)
            for a, ax_a in enumerate(AXES):
                for b, ax_b in enumerate(AXES):
                    out[(i, ell, ax_a, ax_b)] = m[a, b]
    return out


@dataclass(frozen=True, eq=False)
class MomentSet:
    """First and second spin moments of one state."""

    first: np.ndarray
    second: dict


def collect_moments(state: np.ndarray, l_max: int) -> MomentSet:
    return MomentSet(first=first_moments(state), second=second_moments(state, l_max))


def connected_correlator(state: np.ndarray, gamma: str, beta: str, site: int, ell: int) -> float:
    """|<sigma_{i+l}^gamma sigma_i^beta> - <sigma_{i+l}^gamma><sigma_i^beta>|^2."""
    n = _n_qubits(state)
    _check_site(site, n)
    if gamma not in AXES or beta not in AXES:
        raise ValidationError(f"axes must be in {AXES}")
    if ell < 1:
        raise ValidationError(f"ell must be >= 1, got {ell}")
    other = (site + ell - 1) % n + 1
    if other == site:
        raise ValidationError(f"ell={ell} wraps onto the same site for N={n}")
    pair = pair_moments(state, site, other)[AXES.index(beta), AXES.index(gamma)]
    single = site_moments(state, other)[AXES.index(gamma)] * site_moments(state, site)[AXES.index(beta)]
    return float(abs(pair - single) ** 2)


def magnetization(state: np.ndarray) -> float:
    """(1/N) sum_i <sigma_i^z>."""
    moments = first_moments(state)
    return float(moments[:, 2].mean())


def von_neumann_half(state: np.ndarray, partition: int | None = None) -> float:
    """Entanglement entropy of the first floor(N/2) sites (or `partition` sites)."""
    n = _n_qubits(state)
    if n < 2:
        raise ValidationError("need at least 2 qubits for a bipartition")
    length = n // 2 if partition is None else partition
    if not 1 <= length < n:
        raise ValidationError(f"partition {length} outside [1, {n - 1}]")
    a = state.reshape(2**length, -1)
    rho = a @ a.conj().T
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > EIG_FLOOR]
    return float(-(lam * np.log(lam)).sum())


def basis_entropy(state: np.ndarray) -> float:
    """Shannon entropy of the computational-basis distribution, in nats."""
    _n_qubits(state)
    p = np.abs(state) ** 2
    p = p[p >= PROB_FLOOR]
    return float(-(p * np.log(p)).sum())


def pt_entropy(n_qubits: int) -> float:
    """Reference basis entropy of an ideal Porter-Thomas distribution."""
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be >= 1, got {n_qubits}")
    return n_qubits * np.log(2.0) - 1.0 - np.euler_gamma


@dataclass(frozen=True)
class EntropyReport:
    """Entanglement and basis entropies of one state, with the PT reference."""

    von_neumann: float
    basis: float
    pt_reference: float
    partition_length: int

    @cached_property
    def kappa(self) -> float:
        """Volume-law coefficient S_v / (L ln 2)."""
        return self.von_neumann / (self.partition_length * np.log(2.0))


def entropy_summary(state: np.ndarray) -> EntropyReport:
    n = _n_qubits(state)
    return EntropyReport(
        von_neumann=von_neumann_half(state),
        basis=basis_entropy(state),
        pt_reference=pt_entropy(n),
        partition_length=n // 2,
    )


def _z_signs(n: int, site: int) -> np.ndarray:
    idx = np.arange(2**n)
    return 1.0 - 2.0 * ((idx >> (n - site)) & 1)


def _flip_perm(n: int, site: int) -> np.ndarray:
    return np.arange(2**n) ^ (1 << (n - site))


def _pauli_columns(mat: np.ndarray, n: int, site: int, axis: str) -> np.ndarray:
    """mat @ sigma_site^axis via column operations."""
    if axis == "z":
        return mat * _z_signs(n, site)[None, :]
    if axis == "x":
        return mat[:, _flip_perm(n, site)]
    return mat[:, _flip_perm(n, site)] * (1j * _z_signs(n, site))[None, :]


def _pauli_rows(mat: np.ndarray, n: int, site: int, axis: str) -> np.ndarray:
    """sigma_site^axis @ mat via row operations."""
    if axis == "z":
        return mat * _z_signs(n, site)[:, None]
    if axis == "x":
        return mat[_flip_perm(n, site), :]
    return mat[_flip_perm(n, site), :] * (-1j * _z_signs(n, site))[:, None]


@dataclass(frozen=True, eq=False)
class OtocField:
    """Commutator norms between a fixed source spin and every evolved spin.

    values[p, j-1] holds the 2^{N/2}-normalized Frobenius norm
    ||[sigma_{i0}^axis, U(p) sigma_j^axis U(p)^dag]||_F / 2^{N/2}
    for depths p = 0..P (so the array has P+1 rows); raw holds the
    unnormalized norms.
    """

    axis: str
    source_site: int
    values: np.ndarray
    raw: np.ndarray


def otoc(spec: CircuitSpec, axis: str = "z", source_site: int | None = None,
         max_qubits: int = OTOC_MAX_QUBITS) -> OtocField:
    """Heisenberg-picture commutator norms for every site and depth.

    Works in the frame of U(p): with V = U^dag sigma_{i0} U, unitary
    invariance of the Frobenius norm gives
    ||[sigma_{i0}, U sigma_j U^dag]||_F = ||V sigma_j - sigma_j V||_F,
    so each depth costs one dense matrix product and the per-site
    commutators reduce to cheap sign/permutation passes.
    """
    n = spec.n_qubits
    if n > max_qubits:
        raise CapacityError(f"otoc needs dense unitaries; {n} qubits exceeds {max_qubits}")
    if axis not in AXES:
        raise ValidationError(f"axis must be in {AXES}, got {axis!r}")
    if source_site is None:
        source_site = (n + 1) // 2
    _check_site(source_site, n)
    dim = 2**n
    values = np.zeros((spec.depth + 1, n))
    u = np.eye(dim, dtype=complex)
    for p in range(spec.depth + 1):
        if p > 0:
            u = apply_module(u, spec, p)
        v = u.conj().T @ _pauli_rows(u, n, source_site, axis)
        for j in range(1, n + 1):
            comm = _pauli_columns(v, n, j, axis) - _pauli_rows(v, n, j, axis)
            values[p, j - 1] = np.linalg.norm(comm) / np.sqrt(dim)
    return OtocField(axis=axis, source_site=source_site, values=values, raw=values * np.sqrt(dim))

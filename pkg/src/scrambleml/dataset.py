"""Supervised datasets mapping circuit parameters to observable traces.

A dataset is one directory holding ``manifest.json`` plus two flat binary
tensors, ``inputs.bin`` and ``targets.bin`` (row-major little-endian
float64, CRC32-checksummed, format version "scramble-ds/1").  Inputs carry
the rotation angles and the raw 1-based depth index as features; targets
hold the labeled observable values at every depth.

Generation is a pure function of the config: sample s draws its angle grid
from a seed mixed out of (master_seed, s) with a splitmix64-style hash, so
sample streams never collide with the seed XOR qubit derivation used inside
a single inhomogeneous grid.
"""

import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import LAYER_ORDERS, VARIANTS, CircuitSpec, run_circuit
from .errors import DataFormatError, ValidationError
from .gp import DEFAULT_AMPLITUDE, DEFAULT_CORRELATION_LENGTH, GpConfig, angle_grid
from .observables import AXES, pair_moments, site_moments

FORMAT_VERSION = "scramble-ds/1"

_MASK64 = (1 << 64) - 1


def sample_seed(master_seed: int, index: int) -> int:
    """Derived seed for one sample: splitmix64 mix of master seed and index."""
    x = (master_seed + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class ObservableLabel:
    """One target channel: a first or second spin moment."""

    kind: str
    site: int
    offset: int
    axes: tuple

    @property
    def name(self) -> str:
        if self.kind == "first":
            return f"first_s{self.site}_{self.axes[0]}"
        return f"second_s{self.site}_l{self.offset}_{self.axes[0]}{self.axes[1]}"

    def to_json(self) -> dict:
        return {"kind": self.kind, "site": self.site, "offset": self.offset,
                "axes": list(self.axes)}

    @classmethod
    def from_json(cls, obj: dict) -> "ObservableLabel":
        return cls(kind=obj["kind"], site=int(obj["site"]), offset=int(obj["offset"]),
                   axes=tuple(obj["axes"]))


def select_labels(n_qubits: int, homogeneous: bool) -> list:
    """Ordered target channels for a given system size and input mode.

    Homogeneous: the 3 first moments of site 1 plus all 9 axis pairs of
    (site 1, site 1+l) for l = 1..floor((N-1)/2).  Inhomogeneous: first
    moments of sites 1..floor(N/2) instead.  Ordering is first moments by
    site then axis, second moments by offset then axis pair.
    """
    if n_qubits < 3:
        raise ValidationError(f"need at least 3 qubits for the label set, got {n_qubits}")
    sites = [1] if homogeneous else list(range(1, n_qubits // 2 + 1))
    labels = [ObservableLabel("first", s, 0, (a,)) for s in sites for a in AXES]
    for ell in range(1, (n_qubits - 1) // 2 + 1):
        for a in AXES:
            for b in AXES:
                labels.append(ObservableLabel("second", 1, ell, (a, b)))
    return labels


@dataclass(frozen=True)
class DatasetConfig:
    """Everything generation needs; equal configs give byte-identical datasets."""

    n_qubits: int
    depth: int
    variant: str
    homogeneous: bool
    sample_count: int
    master_seed: int = 0
    amplitude: float = DEFAULT_AMPLITUDE
    correlation_length: float = DEFAULT_CORRELATION_LENGTH
    layer_order: str = "two_body_first"

    def __post_init__(self):
        if self.n_qubits < 3:
            raise ValidationError(f"n_qubits must be >= 3, got {self.n_qubits}")
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.sample_count < 0:
            raise ValidationError(f"sample_count must be >= 0, got {self.sample_count}")
        if not 0 <= self.master_seed <= _MASK64:
            raise ValidationError("master_seed must fit in 64 unsigned bits")
        if self.amplitude < 0:
            raise ValidationError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.correlation_length <= 0:
            raise ValidationError(f"correlation_length must be > 0, got {self.correlation_length}")
        if self.layer_order not in LAYER_ORDERS:
            raise ValidationError(f"layer_order must be one of {LAYER_ORDERS}")

    @property
    def input_shape(self) -> tuple:
        if self.homogeneous:
            return (self.depth, 2)
        return (self.depth, self.n_qubits, 2)

    def labels(self) -> list:
        return select_labels(self.n_qubits, self.homogeneous)


def sample_angles(config: DatasetConfig, index: int) -> np.ndarray:
    """(P, N) angle grid of sample `index`, deterministic in the config."""
    gp = GpConfig(
        length=config.depth,
        amplitude=config.amplitude,
        correlation_length=config.correlation_length,
        seed=sample_seed(config.master_seed, index),
    )
    return angle_grid(gp, config.n_qubits, config.homogeneous)


def simulate_targets(config: DatasetConfig, angles: np.ndarray) -> np.ndarray:
    """(P, K) observable traces of one circuit realization."""
    labels = config.labels()
    spec = CircuitSpec(config.n_qubits, config.depth, config.variant, angles,
                       config.layer_order)
    first_sites = sorted({lb.site for lb in labels if lb.kind == "first"})
    offsets = sorted({lb.offset for lb in labels if lb.kind == "second"})
    out = np.empty((config.depth, len(labels)))

    def observer(p, state):
        if p == 0:
            return
        firsts = {s: site_moments(state, s) for s in first_sites}
        pairs = {}
        for ell in offsets:
            other = (1 + ell - 1) % config.n_qubits + 1
            pairs[ell] = pair_moments(state, 1, other)
        for k, lb in enumerate(labels):
            if lb.kind == "first":
                out[p - 1, k] = firsts[lb.site][AXES.index(lb.axes[0])]
            else:
                out[p - 1, k] = pairs[lb.offset][AXES.index(lb.axes[0]), AXES.index(lb.axes[1])]

    run_circuit(spec, observer=observer)
    return out


def _make_sample(args):
    config, index = args
    angles = sample_angles(config, index)
    targets = simulate_targets(config, angles)
    depth_channel = np.arange(1, config.depth + 1, dtype=float)
    if config.homogeneous:
        inputs = np.stack([angles[:, 0], depth_channel], axis=-1)
    else:
        depth_grid = np.broadcast_to(depth_channel[:, None], angles.shape)
        inputs = np.stack([angles, depth_grid], axis=-1)
    return inputs, targets


@dataclass(frozen=True)
class SampleRecord:
    """One sample's view into a loaded dataset."""

    index: int
    inputs: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class DatasetManifest:
    """On-disk description of one dataset; round-trips through JSON."""

    n_qubits: int
    depth: int
    variant: str
    homogeneous: bool
    sample_count: int
    master_seed: int
    amplitude: float
    correlation_length: float
    layer_order: str
    labels: list
    tensors: dict
    format_version: str = FORMAT_VERSION

    def to_json(self) -> dict:
        return {
            "format_version": self.format_version,
            "n_qubits": self.n_qubits,
            "depth": self.depth,
            "variant": self.variant,
            "homogeneous": self.homogeneous,
            "sample_count": self.sample_count,
            "master_seed": self.master_seed,
            "amplitude": self.amplitude,
            "correlation_length": self.correlation_length,
            "layer_order": self.layer_order,
            "labels": [lb.to_json() for lb in self.labels],
            "tensors": self.tensors,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetManifest":
        try:
            return cls(
                n_qubits=int(obj["n_qubits"]),
                depth=int(obj["depth"]),
                variant=obj["variant"],
                homogeneous=bool(obj["homogeneous"]),
                sample_count=int(obj["sample_count"]),
                master_seed=int(obj["master_seed"]),
                amplitude=float(obj["amplitude"]),
                correlation_length=float(obj["correlation_length"]),
                layer_order=obj["layer_order"],
                labels=[ObservableLabel.from_json(lb) for lb in obj["labels"]],
                tensors=obj["tensors"],
                format_version=obj["format_version"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"manifest is missing or malforms field: {exc}") from exc

    def config(self) -> DatasetConfig:
        return DatasetConfig(
            n_qubits=self.n_qubits,
            depth=self.depth,
            variant=self.variant,
            homogeneous=self.homogeneous,
            sample_count=self.sample_count,
            master_seed=self.master_seed,
            amplitude=self.amplitude,
            correlation_length=self.correlation_length,
            layer_order=self.layer_order,
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """A loaded (or freshly generated) dataset held fully in memory."""

    manifest: DatasetManifest
    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return self.manifest.sample_count

    def __getitem__(self, index: int) -> SampleRecord:
        return SampleRecord(index, self.inputs[index], self.targets[index])

    def records(self):
        for s in range(len(self)):
            yield self[s]

    @property
    def label_names(self) -> list:
        return [lb.name for lb in self.manifest.labels]


def _tensor_entry(name: str, array: np.ndarray) -> dict:
    payload = np.ascontiguousarray(array, dtype="<f8").tobytes()
    # offset is where the tensor starts inside its file; each tensor gets its
    # own file, so it is 0 today but loaders must honor it.
    return {
        "file": name,
        "offset": 0,
        "shape": list(array.shape),
        "dtype": "<f8",
        "byte_length": len(payload),
        "crc32": zlib.crc32(payload),
    }, payload


def generate(config: DatasetConfig, out_dir, threads: int = 1) -> Dataset:
    """Simulate every sample and write the dataset directory.

    Samples are independent; with threads > 1 they are simulated in worker
    processes, but rows are always assembled in sample order so the output
    bytes do not depend on scheduling.
    """
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    jobs = [(config, s) for s in range(config.sample_count)]
    if threads == 1 or config.sample_count < 2:
        rows = [_make_sample(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_make_sample, jobs, chunksize=8))
    k = len(config.labels())
    inputs = np.stack([r[0] for r in rows]) if rows else np.zeros((0,) + config.input_shape)
    targets = np.stack([r[1] for r in rows]) if rows else np.zeros((0, config.depth, k))
    if targets.size and (targets.min() < -1 - 1e-10 or targets.max() > 1 + 1e-10):
        raise DataFormatError("simulated targets left [-1, 1]; refusing to write")
    np.clip(targets, -1.0, 1.0, out=targets)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name, array in (("inputs", inputs), ("targets", targets)):
        entry, payload = _tensor_entry(f"{name}.bin", array)
        (out_dir / entry["file"]).write_bytes(payload)
        tensors[name] = entry
    manifest = DatasetManifest(
        n_qubits=config.n_qubits,
        depth=config.depth,
        variant=config.variant,
        homogeneous=config.homogeneous,
        sample_count=config.sample_count,
        master_seed=config.master_seed,
        amplitude=config.amplitude,
        correlation_length=config.correlation_length,
        layer_order=config.layer_order,
        labels=config.labels(),
        tensors=tensors,
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n"
    )
    return Dataset(manifest=manifest, inputs=inputs, targets=targets)


def _read_tensor(out_dir: Path, entry: dict) -> np.ndarray:
    path = out_dir / entry["file"]
    if not path.exists():
        raise DataFormatError(f"missing payload file {path}")
    raw = path.read_bytes()
    offset = int(entry.get("offset", 0))
    payload = raw[offset : offset + entry["byte_length"]]
    if len(payload) != entry["byte_length"]:
        raise DataFormatError(
            f"{path} is truncated: {len(raw)} bytes, tensor needs "
            f"{entry['byte_length']} at offset {offset}"
        )
    crc = zlib.crc32(payload)
    if crc != entry["crc32"]:
        raise DataFormatError(
            f"checksum mismatch in {path} at offset {offset} "
            f"(length {entry['byte_length']}): computed {crc:#010x}, "
            f"manifest declares {entry['crc32']:#010x}"
        )
    if entry["dtype"] != "<f8":
        raise DataFormatError(f"{path}: unsupported dtype {entry['dtype']!r}")
    flat = np.frombuffer(payload, dtype="<f8")
    shape = tuple(entry["shape"])
    if flat.size != int(np.prod(shape, dtype=np.int64)):
        raise DataFormatError(f"{path}: payload size does not match shape {shape}")
    return flat.reshape(shape).copy()


def load(path) -> Dataset:
    """Read a dataset directory back, verifying checksums and shapes."""
    out_dir = Path(path)
    manifest_path = out_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataFormatError(f"no manifest.json under {out_dir}")
    try:
        obj = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"manifest.json is not valid JSON: {exc}") from exc
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(
            f"unsupported dataset format {version!r}, expected {FORMAT_VERSION!r}"
        )
    manifest = DatasetManifest.from_json(obj)
    config = manifest.config()

    inputs = _read_tensor(out_dir, manifest.tensors["inputs"])
    targets = _read_tensor(out_dir, manifest.tensors["targets"])
    expected_inputs = (manifest.sample_count,) + config.input_shape
    k = len(manifest.labels)
    expected_targets = (manifest.sample_count, manifest.depth, k)
    if inputs.shape != expected_inputs:
        raise DataFormatError(
            f"inputs shape {inputs.shape} does not match manifest {expected_inputs}"
        )
    if targets.shape != expected_targets:
        raise DataFormatError(
            f"targets shape {targets.shape} does not match manifest {expected_targets}"
        )
    return Dataset(manifest=manifest, inputs=inputs, targets=targets)


def split(dataset, fractions, seed: int = 0):
    """Disjoint, exhaustive (train, validation, test) index arrays.

    fractions are nonnegative and sum to 1; counts use largest-remainder
    rounding so e.g. (0.8, 0.1, 0.1) of 100 gives exactly 80/10/10.
    """
    count = len(dataset) if not isinstance(dataset, (int, np.integer)) else int(dataset)
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ValidationError(f"need 3 fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions):
        raise ValidationError(f"fractions must be nonnegative, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"fractions must sum to 1, got sum {sum(fractions)}")
    raw = [f * count for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    remainders = [r - c for r, c in zip(raw, counts)]
    for _ in range(count - sum(counts)):
        best = int(np.argmax(remainders))
        counts[best] += 1
        remainders[best] = -1.0
    perm = np.random.default_rng(seed).permutation(count)
    train = perm[: counts[0]]
    val = perm[counts[0] : counts[0] + counts[1]]
    test = perm[counts[0] + counts[1] :]
    return train, val, test

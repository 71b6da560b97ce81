"""Dense multi-qubit state algebra.

Canonical states, Pauli measurement statistics, fidelity, purity, and
physicality checks. Everything is exact complex linear algebra on
2^n-dimensional vectors and matrices; this module is the ground truth that
the learned reconstructions are scored against.

Conventions:

- The leftmost letter of a Pauli word acts on the most significant bit of
  the computational-basis index (a left-to-right Kronecker product).
- Measurement outcomes are indexed by the bitstring of local eigenvalue
  signs, bit value 0 for the +1 eigenvector of that qubit.
- ``I`` letters are read out in the Z eigenbasis, so every word over
  {I, X, Y, Z} produces exactly 2^n outcomes.
- Operators are plain complex ndarrays; states are small dataclasses.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import (
    ArgumentError,
    DimensionError,
    NumericError,
    ParseError,
    ValidationError,
)

MAX_QUBITS = 12  # dense vectors/matrices only

PAULI_LETTERS = "IXYZ"

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

# Columns are the +1 and -1 eigenvectors of each single-qubit operator.
_EIGENBASIS_1Q = {
    "I": np.eye(2, dtype=complex),
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0),
    "Y": np.array([[1.0, 1.0], [1.0j, -1.0j]], dtype=complex) / np.sqrt(2.0),
}

NORM_TOL = 1e-12
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
IMAG_TOL = 1e-10


def _check_qubit_count(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise DimensionError(f"qubit count must be an integer, got {n!r}")
    if not 1 <= n <= MAX_QUBITS:
        raise DimensionError(f"qubit count {n} outside supported range 1..{MAX_QUBITS}")


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm complex amplitude vector over 2^n computational basis kets."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_qubit_count(self.n_qubits)
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (2**self.n_qubits,):
            raise DimensionError(
                f"amplitude vector has shape {amps.shape}, expected ({2**self.n_qubits},)"
            )
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm^2 = {norm_sq!r} deviates from 1 beyond {NORM_TOL}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """2^n x 2^n complex matrix; physicality is checked by validate_density."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        _check_qubit_count(self.n_qubits)
        m = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "entries", m)
        d = 2**self.n_qubits
        if m.shape != (d, d):
            raise DimensionError(f"density matrix has shape {m.shape}, expected ({d}, {d})")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def to_density(self) -> "DensityMatrix":
        return self


@dataclass(frozen=True)
class DensityReport:
    """Per-invariant residuals from validate_density."""

    passed: bool
    hermiticity_residual: float
    trace_residual: float
    min_eigenvalue: float

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class CompletenessReport:
    """Span check of a measurement-operator set over Hermitian operator space."""

    complete: bool
    rank: int
    dimension: int

    def __bool__(self) -> bool:
        return self.complete


# ---------------------------------------------------------------------------
# state factories
# ---------------------------------------------------------------------------


def ghz_state(n: int) -> PureState:
    """(|0...0> + |1...1>)/sqrt(2)."""
    _check_qubit_count(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1.0 / np.sqrt(2.0)
    return PureState(n, amps)


def w_state(n: int) -> PureState:
    """Equal superposition of the n single-excitation kets."""
    _check_qubit_count(n)
    amps = np.zeros(2**n, dtype=complex)
    for k in range(n):
        amps[1 << k] = 1.0 / np.sqrt(n)
    return PureState(n, amps)


def random_pure_state(n: int, seed: int) -> PureState:
    """Normalized standard complex Gaussian vector (Haar-uniform direction)."""
    _check_qubit_count(n)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return PureState(n, v / np.linalg.norm(v))


def make_pure_state(kind: str, n: int, seed: int | None = None) -> PureState:
    if kind == "ghz":
        return ghz_state(n)
    if kind == "w":
        return w_state(n)
    if kind == "random":
        if seed is None:
            raise ArgumentError("random pure state requires a seed")
        return random_pure_state(n, seed)
    raise ArgumentError(f"unknown pure-state kind {kind!r} (expected ghz, w, or random)")


def werner_state(n: int, p: float) -> DensityMatrix:
    """p |GHZ><GHZ| + (1-p) I / 2^n."""
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"mixing weight p={p} outside [0, 1]")
    d = 2**n
    ghz = ghz_state(n).amplitudes
    rho = p * np.outer(ghz, ghz.conj()) + (1.0 - p) * np.eye(d) / d
    return DensityMatrix(n, rho)


def random_mixture(n: int, rank: int, seed: int) -> DensityMatrix:
    """Convex mixture of `rank` random pure states with uniform-renormalized weights."""
    _check_qubit_count(n)
    d = 2**n
    if not 1 <= rank <= d:
        raise ArgumentError(f"mixture rank {rank} outside 1..{d}")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.0, 1.0, size=rank)
    weights /= weights.sum()
    rho = np.zeros((d, d), dtype=complex)
    for w in weights:
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v /= np.linalg.norm(v)
        rho += w * np.outer(v, v.conj())
    return DensityMatrix(n, rho)


def make_mixed_state(
    kind: str,
    n: int,
    p: float | None = None,
    rank: int | None = None,
    seed: int | None = None,
) -> DensityMatrix:
    if kind == "werner":
        if p is None:
            raise ArgumentError("werner state requires a mixing weight p")
        return werner_state(n, p)
    if kind == "random_mixture":
        if rank is None or seed is None:
            raise ArgumentError("random mixture requires rank and seed")
        return random_mixture(n, rank, seed)
    raise ArgumentError(f"unknown mixed-state kind {kind!r} (expected werner or random_mixture)")


# ---------------------------------------------------------------------------
# Pauli words and measurement statistics
# ---------------------------------------------------------------------------


def validate_pauli_word(word: str, n_qubits: int | None = None) -> str:
    if not isinstance(word, str) or len(word) == 0:
        raise ParseError(f"Pauli word must be a non-empty string, got {word!r}")
    bad = set(word) - set(PAULI_LETTERS)
    if bad:
        raise ParseError(f"Pauli word {word!r} contains letters outside I/X/Y/Z: {sorted(bad)}")
    if n_qubits is not None and len(word) != n_qubits:
        raise DimensionError(f"Pauli word {word!r} has length {len(word)}, expected {n_qubits}")
    return word


def pauli_operator(word: str) -> np.ndarray:
    """Kronecker product of single-qubit Pauli matrices, leftmost first."""
    validate_pauli_word(word)
    return reduce(np.kron, (PAULI_1Q[c] for c in word))


def basis_transform(word: str) -> np.ndarray:
    """Unitary whose column a is the joint eigenvector for outcome bitstring a."""
    validate_pauli_word(word)
    return reduce(np.kron, (_EIGENBASIS_1Q[c] for c in word))


def eigenvalue_signs(word: str) -> np.ndarray:
    """Per-outcome eigenvalue (+/-1 product over non-identity letters)."""
    validate_pauli_word(word)
    n = len(word)
    idx = np.arange(2**n)
    signs = np.ones(2**n)
    for k, letter in enumerate(word):
        if letter != "I":
            bit = (idx >> (n - 1 - k)) & 1
            signs = signs * np.where(bit == 1, -1.0, 1.0)
    return signs


def _check_state_word(state, word: str) -> None:
    validate_pauli_word(word, state.n_qubits)


def expectation(state: PureState | DensityMatrix, word: str) -> float:
    """<psi|A|psi> for pure input, Tr(rho A) for mixed input, as a real number."""
    _check_state_word(state, word)
    op = pauli_operator(word)
    if isinstance(state, PureState):
        value = complex(np.vdot(state.amplitudes, op @ state.amplitudes))
    else:
        value = complex(np.einsum("ij,ji->", state.entries, op))
    if abs(value.imag) > IMAG_TOL:
        raise NumericError(f"expectation of {word!r} has imaginary residue {value.imag}")
    return float(value.real)


def outcome_probabilities(state: PureState | DensityMatrix, word: str) -> np.ndarray:
    """Probability of each of the 2^n joint eigenvector outcomes of `word`."""
    _check_state_word(state, word)
    u = basis_transform(word)
    if isinstance(state, PureState):
        overlaps = u.conj().T @ state.amplitudes
        return np.abs(overlaps) ** 2
    diag = np.einsum("ia,ij,ja->a", u.conj(), state.entries, u)
    if np.max(np.abs(diag.imag)) > IMAG_TOL:
        raise NumericError(f"outcome probabilities of {word!r} have imaginary residue")
    return diag.real


# ---------------------------------------------------------------------------
# fidelity, purity, physicality
# ---------------------------------------------------------------------------


def validate_density(rho: DensityMatrix | np.ndarray) -> DensityReport:
    """Report Hermiticity, trace, and PSD residuals against the standard tolerances."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    d = m.shape[0]
    if d & (d - 1) != 0:
        raise DimensionError(f"matrix dimension {d} is not a power of two")
    herm = float(np.max(np.abs(m - m.conj().T)))
    tr = float(abs(np.trace(m) - 1.0))
    # eigvalsh of the Hermitian part; for near-Hermitian input the difference is
    # below the reported hermiticity residual anyway
    eigs = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    min_eig = float(eigs[0])
    passed = herm <= HERMITICITY_TOL and tr <= TRACE_TOL and min_eig >= -PSD_TOL
    return DensityReport(passed, herm, tr, min_eig)


def _require_physical(rho: DensityMatrix) -> None:
    report = validate_density(rho)
    if not report.passed:
        raise ValidationError(
            "density matrix fails physicality: "
            f"hermiticity={report.hermiticity_residual:.3e}, "
            f"trace={report.trace_residual:.3e}, min_eig={report.min_eigenvalue:.3e}"
        )


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2)."""
    _require_physical(rho)
    return float(np.sum(np.abs(rho.entries) ** 2))


def _clamped_sqrt_eigs(eigs: np.ndarray) -> np.ndarray:
    if np.min(eigs) < -PSD_TOL:
        raise ValidationError(f"matrix has eigenvalue {np.min(eigs)} below -{PSD_TOL}")
    return np.sqrt(np.clip(eigs, 0.0, None))


def _hermitian_sqrt(m: np.ndarray) -> np.ndarray:
    eigs, vecs = np.linalg.eigh(m)
    return (vecs * _clamped_sqrt_eigs(eigs)) @ vecs.conj().T


def fidelity(a: PureState | DensityMatrix, b: PureState | DensityMatrix) -> float:
    """Overlap between two states in [0, 1].

    Pure-pure inputs use |<a|b>|^2. If either operand is a density matrix,
    both are promoted and the general formula (Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2
    is evaluated: Hermitian eigendecompositions give the matrix square roots
    (eigenvalues in [-1e-10, 0) clamped to zero), and the outer trace is taken
    as the nuclear norm of sqrt(r1) sqrt(r2), which is the same quantity but
    avoids square-rooting eigenvalue round-off.
    """
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"fidelity of {a.n_qubits}- and {b.n_qubits}-qubit states")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    rho1 = a.to_density()
    rho2 = b.to_density()
    _require_physical(rho1)
    _require_physical(rho2)
    sqrt1 = _hermitian_sqrt(rho1.entries)
    sqrt2 = _hermitian_sqrt(rho2.entries)
    singular = np.linalg.svd(sqrt1 @ sqrt2, compute_uv=False)
    return float(np.sum(singular) ** 2)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def state_to_dict(state: PureState | DensityMatrix) -> dict:
    if isinstance(state, PureState):
        flat = state.amplitudes
        kind = "pure"
    else:
        flat = state.entries.reshape(-1)  # row-major
        kind = "mixed"
    return {
        "n_qubits": state.n_qubits,
        "kind": kind,
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def state_from_dict(doc: dict) -> PureState | DensityMatrix:
    try:
        n = doc["n_qubits"]
        kind = doc["kind"]
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"state document missing or malformed field: {exc}") from exc
    flat = re + 1j * im
    if kind == "pure":
        return PureState(n, flat)
    if kind == "mixed":
        d = 2**n
        if flat.size != d * d:
            raise ParseError(f"mixed state document has {flat.size} entries, expected {d * d}")
        return DensityMatrix(n, flat.reshape(d, d))
    raise ParseError(f"unknown state kind {kind!r}")


def save_state(path: str | os.PathLike, state: PureState | DensityMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_dict(state), fh)


def load_state(path: str | os.PathLike) -> PureState | DensityMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return state_from_dict(doc)

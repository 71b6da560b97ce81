"""Measurement-basis bookkeeping and dataset acquisition.

Two acquisition methods are supported, matching the dataset wire format:
``M1`` records one expectation value per basis, ``M2`` records the full
2^n-outcome probability distribution per basis. Both can be exact or
finite-shot sampled; sampling draws whole outcome bitstrings so that M1
empirical means are physically faithful.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ArgumentError, DimensionError, ParseError, ResourceError
from .quantum import (
    CompletenessReport,
    DensityMatrix,
    PureState,
    eigenvalue_signs,
    expectation,
    outcome_probabilities,
    pauli_operator,
    validate_pauli_word,
)
from .seeding import derive_rng

METHOD_M1 = "M1"  # expectation values
METHOD_M2 = "M2"  # outcome probability distributions
METHODS = (METHOD_M1, METHOD_M2)

ALPHABET_FULL = "full_pauli"
ALPHABET_XYZ = "xyz_only"
ALPHABETS = (ALPHABET_FULL, ALPHABET_XYZ)

MAX_ENUMERATION_QUBITS = 8
MAX_COMPLETENESS_QUBITS = 5
NONZERO_EPSILON = 1e-9
_GRAM_SINGULAR_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Ordered, duplicate-free collection of equal-length Pauli words."""

    n_qubits: int
    strings: tuple[str, ...]
    selection_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "strings", tuple(self.strings))
        seen = set()
        for s in self.strings:
            validate_pauli_word(s, self.n_qubits)
            if s in seen:
                raise ArgumentError(f"duplicate basis string {s!r}")
            seen.add(s)

    def __len__(self) -> int:
        return len(self.strings)

    def __iter__(self):
        return iter(self.strings)

    def __contains__(self, s: str) -> bool:
        return s in self.strings


def enumerate_bases(n: int, alphabet: str = ALPHABET_FULL) -> BasisSet:
    """All 4^n words in lexicographic I<X<Y<Z order, or all 3^n words over X/Y/Z."""
    if alphabet not in ALPHABETS:
        raise ArgumentError(f"unknown alphabet {alphabet!r}; expected one of {ALPHABETS}")
    if n > MAX_ENUMERATION_QUBITS:
        raise ResourceError(
            f"refusing to enumerate bases for n={n} (> {MAX_ENUMERATION_QUBITS}); "
            f"the full set has 4^{n} strings"
        )
    letters = "IXYZ" if alphabet == ALPHABET_FULL else "XYZ"
    strings = tuple("".join(w) for w in product(letters, repeat=n))
    return BasisSet(n, strings, {"strategy": "enumerate", "alphabet": alphabet})


def filter_nonzero_expectation(
    state: PureState | DensityMatrix,
    bases: BasisSet,
    epsilon: float = NONZERO_EPSILON,
) -> BasisSet:
    """Keep strings whose |expectation| exceeds epsilon, in the input order.

    The all-identity string is always dropped: its expectation is identically
    one and carries no information about the state.
    """
    if epsilon <= 0:
        raise ArgumentError("epsilon must be positive")
    identity = "I" * bases.n_qubits
    kept = tuple(
        s for s in bases if s != identity and abs(expectation(state, s)) > epsilon
    )
    meta = {"strategy": "nonzero_filter", "epsilon": epsilon}
    return BasisSet(bases.n_qubits, kept, meta)


def select_bases(
    candidates: BasisSet,
    k: int,
    strategy: str,
    state: PureState | DensityMatrix | None = None,
    seed: int = 0,
) -> BasisSet:
    """Pick k strings from the candidate pool.

    Selection is defined over the lexicographically sorted candidate set, so
    the result does not depend on the order candidates were supplied in.
    ``ranked_magnitude`` sorts by |expectation| descending with a seeded random
    tie-break; ``random_subset`` is a seeded uniform draw without replacement.
    """
    if k < 0 or k > len(candidates):
        raise ArgumentError(f"cannot select {k} bases from a pool of {len(candidates)}")
    canonical = sorted(candidates.strings)
    rng = derive_rng(seed, "basis-selection")
    if strategy == "ranked_magnitude":
        if state is None:
            raise ArgumentError("ranked_magnitude selection requires a state")
        magnitudes = [abs(expectation(state, s)) for s in canonical]
        tie_break = rng.permutation(len(canonical))
        order = sorted(range(len(canonical)), key=lambda i: (-magnitudes[i], tie_break[i]))
        chosen = tuple(canonical[i] for i in order[:k])
    elif strategy == "random_subset":
        picks = rng.choice(len(canonical), size=k, replace=False)
        chosen = tuple(canonical[i] for i in picks)
    else:
        raise ArgumentError(f"unknown selection strategy {strategy!r}")
    meta = {"strategy": strategy, "seed": seed, "k": k}
    return BasisSet(candidates.n_qubits, chosen, meta)


@dataclass(eq=False)
class MeasurementDataset:
    """Per-basis statistics of a state, exact or finite-shot sampled.

    For sampled datasets, ``values``/``distributions`` hold the empirical
    statistics used for training while the exact companions are kept
    alongside; ``counts`` holds the raw outcome histograms.
    """

    method: str
    basis_set: BasisSet
    shots: int | None = None
    values: np.ndarray | None = None
    exact_values: np.ndarray | None = None
    distributions: np.ndarray | None = None
    exact_distributions: np.ndarray | None = None
    counts: np.ndarray | None = None

    @property
    def n_qubits(self) -> int:
        return self.basis_set.n_qubits

    def training_vector(self) -> np.ndarray:
        """Flat statistics vector (basis-major for M2) fed to the networks."""
        if self.method == METHOD_M1:
            return np.asarray(self.values, dtype=float).copy()
        return np.asarray(self.distributions, dtype=float).reshape(-1).copy()

    def validate(self) -> None:
        m = len(self.basis_set)
        d = 2**self.n_qubits
        if self.method == METHOD_M1:
            if self.values is None or self.values.shape != (m,):
                raise DimensionError("M1 dataset must carry one value per basis")
            if np.max(np.abs(self.values)) > 1.0 + 1e-9:
                raise ArgumentError("M1 values outside [-1, 1]")
        elif self.method == METHOD_M2:
            if self.distributions is None or self.distributions.shape != (m, d):
                raise DimensionError("M2 dataset must carry a 2^n-row per basis")
            if np.max(np.abs(self.distributions.sum(axis=1) - 1.0)) > 1e-12:
                raise ArgumentError("M2 rows must each sum to 1")
        else:
            raise ArgumentError(f"unknown method {self.method!r}")
        if self.shots is not None:
            if self.counts is None or self.counts.shape != (m, d):
                raise DimensionError("sampled dataset must carry per-basis outcome counts")
            if not np.all(self.counts.sum(axis=1) == self.shots):
                raise ArgumentError("count rows must sum to the shot budget")


def acquire(
    method: str,
    state: PureState | DensityMatrix,
    bases: BasisSet,
    shots: int | None = None,
    seed: int | None = None,
) -> MeasurementDataset:
    """Measure `state` in every basis, exactly or with a finite shot budget.

    Sampling draws a full outcome bitstring per shot from an independent
    per-basis stream derived from (seed, basis index), so acquisition over
    distinct bases can run in any order or in parallel without changing the
    result.
    """
    if method not in METHODS:
        raise ArgumentError(f"unknown acquisition method {method!r}")
    if len(bases) == 0:
        raise ArgumentError("empty basis set")
    if bases.n_qubits != state.n_qubits:
        raise DimensionError(
            f"basis set is for {bases.n_qubits} qubits, state has {state.n_qubits}"
        )
    if shots is not None:
        if shots <= 0:
            raise ArgumentError("shot count must be positive")
        if seed is None:
            raise ArgumentError("sampled acquisition requires a seed")

    d = 2**state.n_qubits
    exact_rows = np.array([outcome_probabilities(state, s) for s in bases])
    exact_values = np.array([float(eigenvalue_signs(s) @ row) for s, row in zip(bases, exact_rows)])

    counts = None
    if shots is not None:
        counts = np.zeros((len(bases), d), dtype=np.int64)
        for i, s in enumerate(bases):
            rng = derive_rng(seed, "acquire", i)
            p = np.clip(exact_rows[i], 0.0, None)
            counts[i] = rng.multinomial(shots, p / p.sum())

    if method == METHOD_M1:
        if shots is None:
            values = exact_values.copy()
        else:
            signs = np.array([eigenvalue_signs(s) for s in bases])
            values = (signs * counts).sum(axis=1) / shots
        ds = MeasurementDataset(
            method=method,
            basis_set=bases,
            shots=shots,
            values=values,
            exact_values=exact_values,
            counts=counts,
        )
    else:
        if shots is None:
            dists = exact_rows.copy()
        else:
            dists = counts / shots
        ds = MeasurementDataset(
            method=method,
            basis_set=bases,
            shots=shots,
            distributions=dists,
            exact_distributions=exact_rows,
            counts=counts,
        )
    ds.validate()
    return ds


def is_informationally_complete(bases: BasisSet) -> CompletenessReport:
    """Whether the basis operators plus identity span the full operator space.

    Computed as the rank of the Hilbert-Schmidt Gram matrix of the
    (normalized) operators, with a 1e-8 singular-value threshold.
    """
    n = bases.n_qubits
    if n > MAX_COMPLETENESS_QUBITS:
        raise ResourceError(
            f"completeness check limited to n <= {MAX_COMPLETENESS_QUBITS} (Gram of size 4^n)"
        )
    d = 2**n
    words = list(dict.fromkeys(list(bases.strings) + ["I" * n]))
    vecs = np.array([pauli_operator(s).reshape(-1) for s in words]) / np.sqrt(d)
    gram = vecs @ vecs.conj().T
    singular = np.linalg.svd(gram, compute_uv=False)
    rank = int(np.sum(singular > _GRAM_SINGULAR_TOL))
    return CompletenessReport(complete=rank == d * d, rank=rank, dimension=d * d)


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def dataset_to_dict(ds: MeasurementDataset) -> dict:
    def listify(a, as_int=False):
        if a is None:
            return None
        if as_int:
            return [[int(x) for x in row] for row in a]
        if a.ndim == 1:
            return [float(x) for x in a]
        return [[float(x) for x in row] for row in a]

    return {
        "method": ds.method,
        "n_qubits": ds.n_qubits,
        "bases": list(ds.basis_set.strings),
        "shots": ds.shots,
        "values": listify(ds.values),
        "exact_values": listify(ds.exact_values),
        "distributions": listify(ds.distributions),
        "exact_distributions": listify(ds.exact_distributions),
        "counts": listify(ds.counts, as_int=True),
        "selection_meta": dict(ds.basis_set.selection_meta),
    }


def dataset_from_dict(doc: dict) -> MeasurementDataset:
    def grab(key):
        if key not in doc:
            raise ParseError(f"dataset document missing field {key!r}")
        return doc[key]

    method = grab("method")
    if method not in METHODS:
        raise ParseError(f"dataset field 'method' must be M1 or M2, got {method!r}")
    n = grab("n_qubits")
    strings = grab("bases")
    if not isinstance(strings, list) or not strings:
        raise ParseError("dataset field 'bases' must be a non-empty list")
    meta = doc.get("selection_meta") or {}
    basis_set = BasisSet(n, tuple(strings), dict(meta))

    def arr(key, dtype=float):
        raw = doc.get(key)
        return None if raw is None else np.asarray(raw, dtype=dtype)

    ds = MeasurementDataset(
        method=method,
        basis_set=basis_set,
        shots=doc.get("shots"),
        values=arr("values"),
        exact_values=arr("exact_values"),
        distributions=arr("distributions"),
        exact_distributions=arr("exact_distributions"),
        counts=arr("counts", dtype=np.int64),
    )
    try:
        ds.validate()
    except (ArgumentError, DimensionError) as exc:
        raise ParseError(f"dataset document inconsistent: {exc}") from exc
    return ds


def save_dataset(path: str | os.PathLike, ds: MeasurementDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_dict(ds), fh)


def load_dataset(path: str | os.PathLike) -> MeasurementDataset:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    return dataset_from_dict(doc)

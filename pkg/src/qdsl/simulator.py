"""Dense state-vector simulation backend.

The simulator stores one complex128 amplitude per basis state of the live
qubits. Indexing is little-endian over allocation order: the qubit that was
allocated into bit position p contributes bit p of the basis index. Gates are
applied with stride/index arithmetic on the flat vector, never by building a
full 2^n x 2^n operator.

Measurement follows the Born rule for a Pauli product P: the probability of
the +1 outcome (reported as Zero) is (1 + Re<psi|P psi>)/2 and the state
collapses to the normalized projection (psi +/- P psi)/2. Assertions probe
the same quantity without collapsing, which a state-vector backend can do
because it is not bound by no-cloning.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CAPACITY = 24
RELEASE_EPSILON = 1e-9

_SQRT2_INV = 1.0 / math.sqrt(2.0)

GATE_MATRICES: dict[str, np.ndarray] = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array(
        [[_SQRT2_INV, _SQRT2_INV], [_SQRT2_INV, -_SQRT2_INV]], dtype=complex
    ),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
}

PAULI_MATRICES = {
    "I": GATE_MATRICES["I"],
    "X": GATE_MATRICES["X"],
    "Y": GATE_MATRICES["Y"],
    "Z": GATE_MATRICES["Z"],
}


def r1frac_matrix(numerator: int, power: int) -> np.ndarray:
    """Phase gate diag(1, exp(i pi numerator / 2^power))."""
    phase = np.exp(1j * math.pi * numerator / float(2**power))
    return np.array([[1, 0], [0, phase]], dtype=complex)


class SimulationError(Exception):
    pass


class StateVectorSimulator:
    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        self.capacity = capacity
        self.position: dict[int, int] = {}  # qubit id -> bit position
        self.state = np.ones(1, dtype=complex)

    @property
    def num_qubits(self) -> int:
        return len(self.position)

    # ── Allocation ───────────────────────────────────────────────────────

    def allocate(self, qubit_id: int) -> None:
        if qubit_id in self.position:
            raise SimulationError(f"qubit q{qubit_id} is already allocated")
        if self.num_qubits >= self.capacity:
            raise SimulationError(
                f"cannot allocate more than {self.capacity} qubits "
                "(raise the limit with --max-qubits)"
            )
        self.position[qubit_id] = self.num_qubits
        self.state = np.concatenate(
            [self.state, np.zeros_like(self.state)]
        )

    def release(self, qubit_id: int, strict: bool, rng=None) -> bool:
        """Remove a qubit; returns True when it had to be reset first.

        In strict mode the qubit must already be in |0> up to
        RELEASE_EPSILON; otherwise it is measured (consuming randomness)
        and flipped to |0> before removal.
        """
        pos = self._position_of(qubit_id)
        p_one = self._bit_probability(pos)
        was_reset = False
        if p_one > RELEASE_EPSILON:
            if strict:
                raise SimulationError(
                    f"qubit q{qubit_id} was released with probability "
                    f"{p_one:.3g} of being |1>; qubits must be returned "
                    "to |0> before release"
                )
            outcome_one = (rng.random() if rng is not None else 0.5) < p_one
            self._project_bit(pos, 1 if outcome_one else 0)
            was_reset = True
        else:
            self._project_bit(pos, 0)
        self._drop_bit(pos)
        del self.position[qubit_id]
        for qid, p in self.position.items():
            if p > pos:
                self.position[qid] = p - 1
        return was_reset

    def _position_of(self, qubit_id: int) -> int:
        if qubit_id not in self.position:
            raise SimulationError(f"qubit q{qubit_id} is not allocated")
        return self.position[qubit_id]

    # ── Gate application ─────────────────────────────────────────────────

    def apply(
        self,
        matrix: np.ndarray,
        target_id: int,
        control_ids: Sequence[int] = (),
    ) -> None:
        pos = self._position_of(target_id)
        controls = [self._position_of(c) for c in control_ids]
        involved = [target_id, *control_ids]
        if len(set(involved)) != len(involved):
            raise SimulationError(
                "a qubit may appear only once among the controls and the "
                f"target of a gate (got {sorted(set(involved))})"
            )
        if controls:
            self._apply_controlled(matrix, pos, controls)
        else:
            self._apply_single(self.state, matrix, pos)

    def _apply_single(self, vec: np.ndarray, matrix: np.ndarray, pos: int) -> None:
        n = self.num_qubits
        view = vec.reshape(2 ** (n - 1 - pos), 2, 2**pos)
        lo = view[:, 0, :].copy()
        hi = view[:, 1, :].copy()
        view[:, 0, :] = matrix[0, 0] * lo + matrix[0, 1] * hi
        view[:, 1, :] = matrix[1, 0] * lo + matrix[1, 1] * hi

    def _apply_controlled(
        self, matrix: np.ndarray, pos: int, controls: list[int]
    ) -> None:
        indices = np.arange(self.state.size, dtype=np.int64)
        mask = np.ones(self.state.size, dtype=bool)
        for c in controls:
            mask &= (indices >> c) & 1 == 1
        mask &= (indices >> pos) & 1 == 0
        i0 = indices[mask]
        i1 = i0 | (1 << pos)
        lo = self.state[i0]
        hi = self.state[i1]
        self.state[i0] = matrix[0, 0] * lo + matrix[0, 1] * hi
        self.state[i1] = matrix[1, 0] * lo + matrix[1, 1] * hi

    # ── Measurement ──────────────────────────────────────────────────────

    def _pauli_applied(
        self, bases: Sequence[str], qubit_ids: Sequence[int]
    ) -> np.ndarray:
        scratch = self.state.copy()
        for basis, qid in zip(bases, qubit_ids):
            if basis == "I":
                continue
            self._apply_single(scratch, PAULI_MATRICES[basis], self._position_of(qid))
        return scratch

    def expectation(self, bases: Sequence[str], qubit_ids: Sequence[int]) -> float:
        """Re<psi|P|psi> for the Pauli product P."""
        self._check_measurement_args(bases, qubit_ids)
        scratch = self._pauli_applied(bases, qubit_ids)
        return float(np.real(np.vdot(self.state, scratch)))

    def probe_zero_probability(
        self, bases: Sequence[str], qubit_ids: Sequence[int]
    ) -> float:
        """Probability of the +1 (Zero) outcome, without collapsing."""
        p = (1.0 + self.expectation(bases, qubit_ids)) / 2.0
        return min(1.0, max(0.0, p))

    def measure(
        self, bases: Sequence[str], qubit_ids: Sequence[int], rng
    ) -> int:
        """Projective Pauli-product measurement; returns 0 for Zero, 1 for One."""
        self._check_measurement_args(bases, qubit_ids)
        scratch = self._pauli_applied(bases, qubit_ids)
        p_zero = (1.0 + float(np.real(np.vdot(self.state, scratch)))) / 2.0
        p_zero = min(1.0, max(0.0, p_zero))
        outcome = 0 if rng.random() < p_zero else 1
        sign = 1.0 if outcome == 0 else -1.0
        probability = p_zero if outcome == 0 else 1.0 - p_zero
        if probability < 1e-300:
            raise SimulationError(
                "measurement collapsed onto an outcome of probability zero"
            )
        self.state = (self.state + sign * scratch) / (2.0 * math.sqrt(probability))
        return outcome

    def _check_measurement_args(
        self, bases: Sequence[str], qubit_ids: Sequence[int]
    ) -> None:
        if len(bases) != len(qubit_ids):
            raise SimulationError(
                f"measurement needs one Pauli basis per qubit, got "
                f"{len(bases)} bases for {len(qubit_ids)} qubits"
            )
        active = [q for b, q in zip(bases, qubit_ids) if b != "I"]
        if len(set(active)) != len(active):
            raise SimulationError(
                "a qubit may appear only once in a measurement register"
            )
        for q in qubit_ids:
            self._position_of(q)

    # ── Projection helpers ───────────────────────────────────────────────

    def _bit_probability(self, pos: int) -> float:
        n = self.num_qubits
        view = self.state.reshape(2 ** (n - 1 - pos), 2, 2**pos)
        return float(np.sum(np.abs(view[:, 1, :]) ** 2))

    def _project_bit(self, pos: int, value: int) -> None:
        n = self.num_qubits
        view = self.state.reshape(2 ** (n - 1 - pos), 2, 2**pos)
        keep = view[:, value, :]
        norm = math.sqrt(float(np.sum(np.abs(keep) ** 2)))
        if norm < 1e-300:
            raise SimulationError("projection onto a zero-probability subspace")
        view[:, 1 - value, :] = 0.0
        self.state = self.state / norm

    def _drop_bit(self, pos: int) -> None:
        n = self.num_qubits
        arr = self.state.reshape((2,) * n) if n > 0 else self.state
        # The amplitudes live entirely in one slice after projection; keep
        # whichever slice carries the norm (the reset path keeps slice 0
        # only after the flip is accounted for by projection).
        reduced = arr.take(0, axis=n - 1 - pos) + arr.take(1, axis=n - 1 - pos)
        self.state = np.ascontiguousarray(reduced).reshape(-1)

    # ── Inspection ───────────────────────────────────────────────────────

    def amplitudes(self) -> tuple[list[int], np.ndarray]:
        """State vector with bit j of the index tracking the j-th smallest id."""
        ids = sorted(self.position)
        n = len(ids)
        if n == 0:
            return ids, self.state.copy()
        perm = [0] * n
        for axis in range(n):
            j = n - 1 - axis
            perm[axis] = n - 1 - self.position[ids[j]]
        arr = self.state.reshape((2,) * n).transpose(perm)
        # Always copy: callers keep snapshots past later in-place projections.
        return ids, np.array(arr, copy=True).reshape(-1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.state) ** 2)))

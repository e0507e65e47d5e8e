"""Dense statevector simulation, shot sampling with Monte-Carlo noise, and
calibration-matrix readout mitigation.

Noisy runs evolve a batch of trajectories at once: one statevector row per
shot.  Shots are processed in fixed-size chunks, each drawing from its own
child of the seed sequence, so results depend only on the seed.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .circuit import Circuit, CircuitError, Gate, Kind, controlled_target_matrix, expand, single_qubit_matrix, x

log = logging.getLogger(__name__)

MAX_QUBITS = 26
CHUNK_SHOTS = 2048


class SimulationError(ValueError):
    pass


class TooManyQubits(SimulationError):
    pass


class ZeroShots(SimulationError):
    pass


class DimMismatch(SimulationError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    p_meas: float = 0.0
    p_gate: float = 0.0
    noisy_kinds: frozenset = field(default_factory=lambda: frozenset({Kind.X, Kind.CX}))

    def __post_init__(self):
        for p in (self.p_meas, self.p_gate):
            if not 0.0 <= p <= 1.0:
                raise SimulationError(f"probability {p} outside [0, 1]")
        object.__setattr__(self, "noisy_kinds", frozenset(Kind(k) for k in self.noisy_kinds))

    @property
    def is_trivial(self) -> bool:
        return self.p_meas == 0.0 and self.p_gate == 0.0


# gate application --------------------------------------------------------

def _view(psi: np.ndarray, n: int) -> np.ndarray:
    return psi.reshape((-1,) + (2,) * n)


def _index(n: int, fixed: dict) -> tuple:
    """Index into a (batch, 2, ..., 2) view with qubit values pinned."""
    idx = [slice(None)] * (n + 1)
    for q, v in fixed.items():
        idx[n - q] = v
    return tuple(idx)


def _apply_1q(psi, m, controls, target, n):
    v = _view(psi, n)
    pin = {c: 1 for c in controls}
    i0 = _index(n, {**pin, target: 0})
    i1 = _index(n, {**pin, target: 1})
    a = v[i0].copy()
    b = v[i1]
    if m[0, 1] == 0 and m[1, 0] == 0:
        v[i0] = m[0, 0] * a
        v[i1] = m[1, 1] * b
    else:
        v[i0] = m[0, 0] * a + m[0, 1] * b
        v[i1] = m[1, 0] * a + m[1, 1] * b


def _apply_x(psi, controls, target, n):
    v = _view(psi, n)
    pin = {c: 1 for c in controls}
    i0 = _index(n, {**pin, target: 0})
    i1 = _index(n, {**pin, target: 1})
    a = v[i0].copy()
    v[i0] = v[i1]
    v[i1] = a


_EXPANSION_CACHE: dict = {}


def apply_gate(psi: np.ndarray, g: Gate, n: int) -> None:
    """Apply ``g`` in place to every statevector along the last axis of ``psi``."""
    k = g.kind
    if k is Kind.CX:
        _apply_x(psi, g.qubits[:1], g.qubits[1], n)
    elif k is Kind.X:
        _apply_x(psi, (), g.qubits[0], n)
    elif k is Kind.I:
        pass
    elif len(g.qubits) == 1:
        _apply_1q(psi, single_qubit_matrix(g), (), g.qubits[0], n)
    elif k in (Kind.MCRY, Kind.CU):
        _apply_1q(psi, controlled_target_matrix(g), g.qubits[:-1], g.qubits[-1], n)
    elif k is Kind.SWAP:
        a, b = g.qubits
        v = _view(psi, n)
        i01, i10 = _index(n, {a: 0, b: 1}), _index(n, {a: 1, b: 0})
        t = v[i01].copy()
        v[i01] = v[i10]
        v[i10] = t
    else:
        sub = _EXPANSION_CACHE.get(g)
        if sub is None:
            sub = expand(g)
            if len(_EXPANSION_CACHE) > 4096:
                _EXPANSION_CACHE.clear()
            _EXPANSION_CACHE[g] = sub
        for s in sub:
            apply_gate(psi, s, n)


def _check_size(n: int, cap: int) -> None:
    if n > cap:
        raise TooManyQubits(f"{n} qubits exceed the simulation cap of {cap}")


def statevector(c: Circuit, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    n = c.num_qubits
    _check_size(n, max_qubits)
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for g in c.gates:
        apply_gate(psi, g, n)
    return psi


def exact_probabilities(c: Circuit, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    p = np.abs(statevector(c, max_qubits)) ** 2
    return p / p.sum()


def marginalize(probs: np.ndarray, num_qubits: int, keep) -> np.ndarray:
    """Distribution over the ``keep`` qubits, ``keep[0]`` becoming bit 0."""
    keep = list(keep)
    t = np.asarray(probs).reshape((2,) * num_qubits)
    drop = tuple(num_qubits - 1 - q for q in range(num_qubits) if q not in keep)
    t = t.sum(axis=drop) if drop else t
    remaining = [q for q in reversed(range(num_qubits)) if q in keep]
    order = [remaining.index(q) for q in reversed(keep)]
    return np.transpose(t, order).reshape(-1)


def data_distribution(c: Circuit, probs: np.ndarray) -> np.ndarray:
    """Drop ancilla qubits: positions become the low bits and gray the top bit."""
    if c.gray is None:
        return probs
    return marginalize(probs, c.num_qubits, [*c.positions, c.gray])


# sampling ----------------------------------------------------------------

@dataclass
class Counts:
    num_qubits: int
    histogram: dict

    @property
    def shots(self) -> int:
        return int(sum(self.histogram.values()))

    def to_array(self) -> np.ndarray:
        out = np.zeros(2 ** self.num_qubits)
        for k, v in self.histogram.items():
            out[k] = v
        return out

    def distribution(self) -> np.ndarray:
        a = self.to_array()
        return a / a.sum()

    def to_json(self) -> str:
        w = self.num_qubits
        return json.dumps({format(k, f"0{w}b"): int(v) for k, v in sorted(self.histogram.items())},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Counts":
        raw = json.loads(text)
        width = len(next(iter(raw))) if raw else 0
        return cls(width, {int(k, 2): int(v) for k, v in raw.items()})

    @classmethod
    def from_samples(cls, num_qubits: int, outcomes: np.ndarray) -> "Counts":
        values, counts = np.unique(outcomes, return_counts=True)
        return cls(num_qubits, {int(v): int(c) for v, c in zip(values, counts)})


_PAULI = (
    None,
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _readout_flips(outcomes: np.ndarray, n: int, p_meas: float, rng) -> np.ndarray:
    if p_meas == 0.0:
        return outcomes
    flips = rng.random((outcomes.size, n)) < p_meas
    mask = (flips * (1 << np.arange(n))).sum(axis=1)
    return outcomes ^ mask


def _run_chunk(gates, n, shots, noise: NoiseModel, rng) -> np.ndarray:
    psi = np.zeros((shots, 2 ** n), dtype=complex)
    psi[:, 0] = 1.0
    for g in gates:
        apply_gate(psi, g, n)
        if noise.p_gate > 0.0 and g.kind in noise.noisy_kinds:
            for q in g.qubits:
                hit = rng.random(shots) < noise.p_gate
                which = rng.integers(1, 4, size=shots)
                for p in (1, 2, 3):
                    rows = np.nonzero(hit & (which == p))[0]
                    if rows.size:
                        sub = psi[rows]
                        _apply_1q(sub, _PAULI[p], (), q, n)
                        psi[rows] = sub
    probs = np.abs(psi) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((shots, 1))
    outcomes = np.minimum((cdf < u).sum(axis=1), 2 ** n - 1)
    return _readout_flips(outcomes, n, noise.p_meas, rng)


def sample(c: Circuit, shots: int, noise: NoiseModel | None = None, seed: int = 0,
           max_qubits: int = MAX_QUBITS) -> Counts:
    """Draw ``shots`` measurement outcomes of all qubits."""
    if shots < 1:
        raise ZeroShots("shots must be >= 1")
    n = c.num_qubits
    _check_size(n, max_qubits)
    ss = np.random.SeedSequence(seed)
    if noise is None or noise.p_gate == 0.0:
        # gate noise absent: one statevector, then readout flips per shot
        p = exact_probabilities(c, max_qubits)
        rng = np.random.default_rng(ss)
        outcomes = rng.choice(p.size, size=shots, p=p)
        if noise is not None:
            outcomes = _readout_flips(outcomes, n, noise.p_meas, rng)
        return Counts.from_samples(n, outcomes)
    # noise lands on gates exactly as they appear; pass lowered circuits for basis-level noise
    gates = c.gates
    nchunks = math.ceil(shots / CHUNK_SHOTS)
    parts = []
    for i, child in enumerate(ss.spawn(nchunks)):
        size = min(CHUNK_SHOTS, shots - i * CHUNK_SHOTS)
        parts.append(_run_chunk(gates, n, size, noise, np.random.default_rng(child)))
    return Counts.from_samples(n, np.concatenate(parts))


# readout mitigation ------------------------------------------------------

MAX_CAL_QUBITS = 12


def prep_circuit(q: int, state: int) -> Circuit:
    return Circuit(q, [x(i) for i in range(q) if state >> i & 1])


def build_calibration(q: int, noise: NoiseModel, shots_per_state: int, seed: int = 0,
                      gate_noise: bool = True) -> np.ndarray:
    """Column-stochastic matrix; column j is the measured histogram for prepared |j>.

    ``gate_noise=False`` keeps only readout flips during calibration.
    """
    if q > MAX_CAL_QUBITS:
        raise TooManyQubits(f"calibration over {q} qubits exceeds {MAX_CAL_QUBITS}")
    if not gate_noise:
        noise = NoiseModel(noise.p_meas, 0.0, noise.noisy_kinds)
    dim = 2 ** q
    cal = np.zeros((dim, dim))
    seeds = np.random.SeedSequence(seed).generate_state(dim)
    for j in range(dim):
        counts = sample(prep_circuit(q, j), shots_per_state, noise, seed=int(seeds[j]))
        cal[:, j] = counts.distribution()
    return cal


def exact_calibration(q: int, noise: NoiseModel, gate_noise: bool = True) -> np.ndarray:
    """Infinite-shot calibration matrix of the prep-and-measure channel.

    A depolarizing Pauli after the preparation X flips the bit for X or Y,
    i.e. with probability 2/3 of ``p_gate``.
    """
    if q > MAX_CAL_QUBITS:
        raise TooManyQubits(f"calibration over {q} qubits exceeds {MAX_CAL_QUBITS}")
    pm = noise.p_meas
    pg = noise.p_gate if gate_noise and Kind.X in noise.noisy_kinds else 0.0
    readout = np.array([[1 - pm, pm], [pm, 1 - pm]])
    prep_flip = 2.0 * pg / 3.0
    prep = np.array([[1.0, prep_flip], [0.0, 1 - prep_flip]])
    single = readout @ prep
    cal = np.ones((1, 1))
    for _ in range(q):
        cal = np.kron(single, cal)
    return cal


def mitigate(counts: Counts | np.ndarray, cal: np.ndarray) -> np.ndarray:
    """Non-negative least-squares inversion of the calibration matrix."""
    emp = counts.distribution() if isinstance(counts, Counts) else np.asarray(counts, dtype=float)
    emp = emp / emp.sum()
    if cal.shape != (emp.size, emp.size):
        raise DimMismatch(f"calibration {cal.shape} does not match distribution of size {emp.size}")
    try:
        xs, _ = nnls(cal, emp, maxiter=50 * emp.size)
    except RuntimeError:
        log.warning("NNLS did not converge; using clamped pseudo-inverse")
        xs = np.clip(np.linalg.pinv(cal) @ emp, 0.0, None)
    total = xs.sum()
    if total <= 0:
        raise SimulationError("mitigated distribution has no mass")
    return xs / total


def distribution_to_json(p: np.ndarray) -> str:
    return json.dumps([float(v) for v in p])


def calibration_to_json(cal: np.ndarray) -> str:
    return json.dumps([[float(v) for v in row] for row in cal])


def calibration_from_json(text: str) -> np.ndarray:
    cal = np.array(json.loads(text), dtype=float)
    if cal.ndim != 2 or cal.shape[0] != cal.shape[1]:
        raise CircuitError("calibration matrix must be square")
    if np.any(cal < 0) or not np.allclose(cal.sum(axis=0), 1.0, atol=1e-9):
        raise CircuitError("calibration matrix must be column-stochastic")
    return cal

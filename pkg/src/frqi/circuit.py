"""Gate-level circuit representation shared by the builders, transpiler and simulator.

Qubit 0 is the least significant bit of a basis-state index.  A gate's qubit
tuple lists controls first and the target last.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np


class CircuitError(ValueError):
    pass


class TooManyQubits(CircuitError):
    pass


class Kind(str, enum.Enum):
    I = "I"
    X = "X"
    SX = "SX"
    H = "H"
    RY = "Ry"
    RZ = "Rz"
    CX = "CX"
    CU = "CU"
    SWAP = "SWAP"
    MCRY = "MCRY"
    MARY = "MARY"
    RCCX = "RCCX"
    RCCCX = "RCCCX"

    def __str__(self) -> str:
        return self.value


BASIS_KINDS = frozenset({Kind.I, Kind.X, Kind.SX, Kind.RZ, Kind.CX})
COMPOSITE_KINDS = frozenset({Kind.MCRY, Kind.MARY, Kind.RCCX, Kind.RCCCX, Kind.CU, Kind.SWAP})
MARY_ARITIES = (3, 5, 7, 8, 9, 10)

# fixed arity per kind; None means variable (MCRY, MARY)
_ARITY = {
    Kind.I: 1, Kind.X: 1, Kind.SX: 1, Kind.H: 1, Kind.RY: 1, Kind.RZ: 1,
    Kind.CX: 2, Kind.CU: 2, Kind.SWAP: 2, Kind.RCCX: 3, Kind.RCCCX: 4,
    Kind.MCRY: None, Kind.MARY: None,
}
_NPARAMS = {Kind.RY: 1, Kind.RZ: 1, Kind.MCRY: 1, Kind.MARY: 1, Kind.CU: 4}


class Gate(NamedTuple):
    kind: Kind
    qubits: tuple
    params: tuple = ()

    @property
    def angle(self) -> float:
        return self.params[0]

    def validate(self) -> None:
        q = self.qubits
        if len(set(q)) != len(q):
            raise CircuitError(f"{self.kind}: repeated qubit in {q}")
        want = _ARITY[self.kind]
        if want is not None and len(q) != want:
            raise CircuitError(f"{self.kind} acts on {want} qubits, got {len(q)}")
        if self.kind is Kind.MCRY and len(q) < 2:
            raise CircuitError("MCRY needs at least one control")
        if self.kind is Kind.MARY and len(q) not in MARY_ARITIES:
            raise CircuitError(f"MARY arity must be one of {MARY_ARITIES}, got {len(q)}")
        if len(self.params) != _NPARAMS.get(self.kind, 0):
            raise CircuitError(f"{self.kind}: wrong parameter count {len(self.params)}")
        if not all(math.isfinite(p) for p in self.params):
            raise CircuitError(f"{self.kind}: non-finite angle")


# constructors; qubit tuples are interned so large circuits share them
_QCACHE: dict[tuple, tuple] = {}


def _q(*qs: int) -> tuple:
    return _QCACHE.setdefault(qs, qs)


def x(q): return Gate(Kind.X, _q(q))
def sx(q): return Gate(Kind.SX, _q(q))
def h(q): return Gate(Kind.H, _q(q))
def ry(theta, q): return Gate(Kind.RY, _q(q), (float(theta),))
def rz(theta, q): return Gate(Kind.RZ, _q(q), (float(theta),))
def cx(c, t): return Gate(Kind.CX, _q(c, t))
def swap(a, b): return Gate(Kind.SWAP, _q(a, b))
def rccx(a, b, t): return Gate(Kind.RCCX, _q(a, b, t))
def rcccx(a, b, c, t): return Gate(Kind.RCCCX, _q(a, b, c, t))


def cu(theta, phi, lam, gamma, c, t):
    return Gate(Kind.CU, _q(c, t), (float(theta), float(phi), float(lam), float(gamma)))


def mcry(theta, controls, target):
    return Gate(Kind.MCRY, _q(*controls, target), (float(theta),))


def mary(theta, controls, target):
    return Gate(Kind.MARY, _q(*controls, target), (float(theta),))


@dataclass
class Circuit:
    num_qubits: int
    gates: list = field(default_factory=list)
    gray: int | None = None
    positions: tuple = ()
    ancillas: tuple = ()

    def __post_init__(self):
        self.positions = tuple(self.positions)
        self.ancillas = tuple(self.ancillas)
        if self.gray is not None:
            roles = [self.gray, *self.positions, *self.ancillas]
            if len(set(roles)) != len(roles):
                raise CircuitError("gray, position and ancilla qubits overlap")
            if sorted(roles) != list(range(self.num_qubits)):
                raise CircuitError("qubit roles must cover every qubit exactly once")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def append(self, gate: Gate) -> None:
        self.gates.append(gate)

    def extend(self, gates: Iterable[Gate]) -> None:
        self.gates.extend(gates)

    def validate(self) -> None:
        for g in self.gates:
            g.validate()
            if max(g.qubits) >= self.num_qubits or min(g.qubits) < 0:
                raise CircuitError(f"{g.kind} on {g.qubits} outside {self.num_qubits} qubits")

    def with_gates(self, gates: list) -> "Circuit":
        """Copy of this circuit's register layout holding ``gates``."""
        return Circuit(self.num_qubits, gates, self.gray, self.positions, self.ancillas)

    def __add__(self, other: "Circuit") -> "Circuit":
        n = max(self.num_qubits, other.num_qubits)
        return Circuit(n, self.gates + other.gates)

    # text format --------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"qubits {self.num_qubits}"]
        if self.gray is not None:
            lines.append(f"# gray {self.gray}")
            lines.append("# positions " + " ".join(map(str, self.positions)))
            lines.append("# ancillas " + " ".join(map(str, self.ancillas)))
        for g in self.gates:
            parts = [g.kind.value, *map(str, g.qubits), *(repr(float(p)) for p in g.params)]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        num_qubits = None
        gray, positions, ancillas = None, (), ()
        gates = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, *vals = line[1:].split()
                if key == "gray":
                    gray = int(vals[0])
                elif key == "positions":
                    positions = tuple(map(int, vals))
                elif key == "ancillas":
                    ancillas = tuple(map(int, vals))
                continue
            tok = line.split()
            if tok[0] == "qubits":
                num_qubits = int(tok[1])
                continue
            try:
                kind = Kind(tok[0])
            except ValueError:
                raise CircuitError(f"unknown gate kind {tok[0]!r}") from None
            qubits = tuple(int(t) for t in tok[1:] if _is_int(t))
            params = tuple(float(t) for t in tok[1:] if not _is_int(t))
            gates.append(Gate(kind, _q(*qubits), params))
        if num_qubits is None:
            raise CircuitError("missing 'qubits N' header")
        c = cls(num_qubits, gates, gray, positions, ancillas)
        c.validate()
        return c


def _is_int(tok: str) -> bool:
    return tok.lstrip("-").isdigit()


# structural analysis -----------------------------------------------------

def depth(gates) -> int:
    """Layer count under as-soon-as-possible scheduling.

    Accepts a Circuit or any iterable of gates, so lowered circuits can be
    measured while they are streamed.
    """
    level: dict[int, int] = {}
    best = 0
    get = level.get
    for g in gates:
        qs = g.qubits
        if len(qs) == 1:
            d = get(qs[0], 0) + 1
            level[qs[0]] = d
        else:
            d = max(get(q, 0) for q in qs) + 1
            for q in qs:
                level[q] = d
        if d > best:
            best = d
    return best


def gate_counts(gates) -> dict[str, int]:
    """Number of gates per kind, angles ignored."""
    counts = Counter(g.kind for g in gates)
    return {k.value: v for k, v in sorted(counts.items(), key=lambda kv: kv[0].value)}


# matrices ----------------------------------------------------------------

_S2 = 1 / math.sqrt(2)
_FIXED = {
    Kind.I: np.eye(2, dtype=complex),
    Kind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Kind.SX: np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2,
    Kind.H: np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
}


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def u_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


def single_qubit_matrix(g: Gate) -> np.ndarray:
    if g.kind is Kind.RY:
        return ry_matrix(g.params[0])
    if g.kind is Kind.RZ:
        return rz_matrix(g.params[0])
    return _FIXED[g.kind]


def controlled_target_matrix(g: Gate) -> np.ndarray | None:
    """2x2 matrix applied to the target when all controls are 1, for gates of
    that shape (CX, CU, MCRY); None otherwise."""
    if g.kind is Kind.CX:
        return _FIXED[Kind.X]
    if g.kind is Kind.MCRY:
        return ry_matrix(g.params[0])
    if g.kind is Kind.CU:
        theta, phi, lam, gamma = g.params
        return np.exp(1j * gamma) * u_matrix(theta, phi, lam)
    return None


def expand(g: Gate) -> list:
    """Definition of a composite gate whose matrix is given by its circuit."""
    from . import builder

    if g.kind is Kind.RCCX:
        return builder.decompose_rccx(*g.qubits)
    if g.kind is Kind.RCCCX:
        return builder.decompose_rcccx(*g.qubits)
    if g.kind is Kind.MARY:
        return builder.decompose_mary(len(g.qubits), g.params[0], g.qubits)
    if g.kind is Kind.SWAP:
        a, b = g.qubits
        return [cx(a, b), cx(b, a), cx(a, b)]
    raise CircuitError(f"{g.kind} has no circuit definition")


MAX_UNITARY_QUBITS = 12


def unitary_of(c: Circuit | Iterable[Gate], num_qubits: int | None = None) -> np.ndarray:
    """Dense unitary of a circuit, qubit 0 least significant."""
    if isinstance(c, Circuit):
        num_qubits, gates = c.num_qubits, c.gates
    else:
        gates = list(c)
        if num_qubits is None:
            num_qubits = 1 + max((max(g.qubits) for g in gates), default=-1)
    if num_qubits > MAX_UNITARY_QUBITS:
        raise TooManyQubits(f"{num_qubits} qubits exceed the unitary limit of {MAX_UNITARY_QUBITS}")
    from .simulator import apply_gate

    dim = 2 ** num_qubits
    # columns evolve as a batch of statevectors
    u = np.eye(dim, dtype=complex)
    for g in gates:
        apply_gate(u, g, num_qubits)
    return u.T.copy()


def controlled_matrix(base: np.ndarray, controls, target, num_qubits: int) -> np.ndarray:
    """Reference matrix of ``base`` on ``target`` conditioned on all controls being 1."""
    dim = 2 ** num_qubits
    out = np.eye(dim, dtype=complex)
    cmask = sum(1 << c for c in controls)
    tbit = 1 << target
    for i in range(dim):
        if i & cmask == cmask and not i & tbit:
            j = i | tbit
            out[i, i], out[i, j] = base[0, 0], base[0, 1]
            out[j, i], out[j, j] = base[1, 0], base[1, 1]
    return out


@dataclass(frozen=True)
class CouplingMap:
    num_qubits: int
    edges: frozenset

    def __post_init__(self):
        norm = frozenset(tuple(sorted(e)) for e in self.edges)
        for a, b in norm:
            if a == b or not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise CircuitError(f"invalid edge ({a}, {b})")
        object.__setattr__(self, "edges", norm)

    def neighbors(self, q: int) -> list:
        return sorted({b for a, b in self.edges if a == q} | {a for a, b in self.edges if b == q})

    def degree(self, q: int) -> int:
        return len(self.neighbors(q))

    def connected(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def is_connected(self) -> bool:
        if self.num_qubits == 0:
            return True
        seen, stack = {0}, [0]
        while stack:
            for nb in self.neighbors(stack.pop()):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.num_qubits

    @classmethod
    def line(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def complete(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((a, b) for a in range(n) for b in range(a + 1, n)))

    @classmethod
    def loads(cls, text: str) -> "CouplingMap":
        rows = [ln.split("#")[0].strip() for ln in text.splitlines()]
        rows = [r for r in rows if r]
        if not rows:
            raise CircuitError("empty coupling map")
        n = int(rows[0])
        edges = []
        for r in rows[1:]:
            a, b = r.split()
            edges.append((int(a), int(b)))
        return cls(n, frozenset(edges))

    def dumps(self) -> str:
        return f"{self.num_qubits}\n" + "".join(f"{a} {b}\n" for a, b in sorted(self.edges))

"""Lowering to the {X, SX, Rz, CX} basis and greedy routing on coupling maps."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .circuit import (
    BASIS_KINDS, Circuit, CircuitError, CouplingMap, Gate, Kind, cu, cx, expand, ry, rz, sx, swap,
)

DEFAULT_GATE_BUDGET = 50_000_000
BACKENDS = ("ibmqx2", "santiago", "manila", "melbourne", "toronto", "ehningen")


class ResourceLimit(CircuitError):
    pass


class RoutingError(CircuitError):
    pass


# single-qubit rules ----------------------------------------------------------

def lower_ry(theta: float, q: int) -> list:
    # Ry(t) = SX Rz(pi - t) SX Rz(pi) up to global phase; listed in time order
    return [rz(math.pi, q), sx(q), rz(math.pi - theta, q), sx(q)]


def lower_h(q: int) -> list:
    return [rz(math.pi / 2, q), sx(q), rz(math.pi / 2, q)]


def lower_u(theta: float, phi: float, lam: float, q: int) -> list:
    # U(t, p, l) = Rz(p) Ry(t) Rz(l) up to global phase
    return [rz(lam, q)] + lower_ry(theta, q) + [rz(phi, q)]


# two-qubit and multi-controlled rules ----------------------------------------

def decompose_cu(theta, phi, lam, gamma, c, t) -> list:
    """Controlled-U as Ry/Rz/CX, exact up to global phase."""
    if phi == 0 and lam == 0 and gamma == 0:
        # controlled Ry: the cheap form used throughout
        return [ry(theta / 2, t), cx(c, t),
                ry(-theta / 2, t), cx(c, t)]
    out = []
    if gamma:
        out.append(rz(gamma, c))
    out += [rz((lam + phi) / 2, c), rz((lam - phi) / 2, t), cx(c, t)]
    out += [rz(-(phi + lam) / 2, t), ry(-theta / 2, t), cx(c, t)]
    out += [ry(theta / 2, t), rz(phi, t)]
    return out


def decompose_mcry(theta: float, controls, target: int) -> list:
    """Multi-controlled Ry via a Gray-code sequence of controlled Ry(theta / 2^(k-1)).

    Qubit ``lead`` (the highest set bit of the current code) carries the
    parity of the code's controls; CX gates between controls maintain it.
    """
    controls = tuple(controls)
    k = len(controls)
    if k == 0:
        return [ry(theta, target)]
    if k == 1:
        return [cu(theta, 0, 0, 0, controls[0], target)]
    v = theta / 2 ** (k - 1)
    out = []
    prev = 0
    for s in range(1, 2 ** k):
        g = s ^ (s >> 1)
        lead = g.bit_length() - 1
        changed = (g ^ prev).bit_length() - 1
        if prev:
            if changed != lead:
                out.append(cx(controls[changed], controls[lead]))
            else:
                out.extend(cx(controls[i], controls[lead]) for i in range(lead) if g >> i & 1)
        sign = 1 if bin(g).count("1") % 2 else -1
        out.append(cu(sign * v, 0, 0, 0, controls[lead], target))
        prev = g
    return out


def _rules(g: Gate) -> list | None:
    """One rewriting step; None for basis gates."""
    k = g.kind
    if k in BASIS_KINDS:
        return None
    if k is Kind.RY:
        return lower_ry(g.params[0], g.qubits[0])
    if k is Kind.H:
        return lower_h(g.qubits[0])
    if k is Kind.CU:
        return decompose_cu(*g.params, *g.qubits)
    if k is Kind.MCRY:
        return decompose_mcry(g.params[0], g.qubits[:-1], g.qubits[-1])
    return expand(g)


class _Lowerer:
    """Memoised lowering; repeated gates share their lowered gate objects."""

    def __init__(self):
        self.cache: dict[Gate, tuple] = {}

    def lower_gate(self, g: Gate) -> tuple:
        hit = self.cache.get(g)
        if hit is not None:
            return hit
        sub = _rules(g)
        if sub is None:
            out = () if g.kind is Kind.I else (g,)
        else:
            out = tuple(h for s in sub for h in self.lower_gate(s))
        # angle-specific rotations are rarely repeated, keep the cache small
        if g.kind is not Kind.RY or len(self.cache) < 100_000:
            self.cache[g] = out
        return out

    def iter(self, gates):
        lg = self.lower_gate
        for g in gates:
            yield from lg(g)


def iter_lowered(gates):
    """Stream the lowered form of ``gates``."""
    return _Lowerer().iter(gates)


# size estimate ---------------------------------------------------------------

_SIZE: dict[tuple, int] = {}


def lowered_size(g: Gate) -> int:
    """Number of basis gates ``g`` lowers to, computed without materialising."""
    k = g.kind
    if k in BASIS_KINDS:
        return 0 if k is Kind.I else 1
    if k is Kind.MCRY:
        nc = len(g.qubits) - 1
        if nc == 1:
            return 10
        return (2 ** nc - 2) + (2 ** nc - 1) * 10
    key = (k, len(g.qubits), bool(k is Kind.CU and any(g.params[1:])))
    n = _SIZE.get(key)
    if n is None:
        n = len(_Lowerer().lower_gate(g))
        _SIZE[key] = n
    return n


def estimate_lowered_size(c) -> int:
    gates = c.gates if isinstance(c, Circuit) else c
    return sum(lowered_size(g) for g in gates)


def lower(c: Circuit, budget: int | None = DEFAULT_GATE_BUDGET) -> Circuit:
    """Rewrite ``c`` over {X, SX, Rz, CX}; raises ResourceLimit above ``budget`` gates."""
    if budget is not None:
        est = estimate_lowered_size(c)
        if est > budget:
            raise ResourceLimit(f"lowered circuit would have {est} gates, budget is {budget}")
    gates = list(iter_lowered(c.gates))
    return Circuit(c.num_qubits, gates, c.gray, c.positions, c.ancillas)


STREAM_GATE_BUDGET = 250_000_000


def lowered_stats(c: Circuit, budget: int | None = STREAM_GATE_BUDGET) -> tuple:
    """(gate_counts, depth, total) of the lowered circuit without storing it."""
    if budget is not None:
        est = estimate_lowered_size(c)
        if est > budget:
            raise ResourceLimit(f"lowered circuit would have {est} gates, budget is {budget}")
    counts: dict = {}
    level: dict = {}
    best = total = 0
    get = level.get
    for g in iter_lowered(c.gates):
        total += 1
        counts[g.kind] = counts.get(g.kind, 0) + 1
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
    named = {k.value: v for k, v in sorted(counts.items(), key=lambda kv: kv[0].value)}
    return named, best, total


def is_lowered(c) -> bool:
    gates = c.gates if isinstance(c, Circuit) else c
    return all(g.kind in BASIS_KINDS for g in gates)


# coupling maps ---------------------------------------------------------------

def load_coupling_map(name: str) -> CouplingMap:
    """Bundled backend by name, or a path to a coupling-map file."""
    if name in BACKENDS:
        text = resources.files("frqi").joinpath("data", f"{name}.txt").read_text()
    else:
        try:
            with open(name) as fh:
                text = fh.read()
        except OSError as exc:
            raise CircuitError(f"unknown coupling map {name!r}") from exc
    return CouplingMap.loads(text)


# routing ---------------------------------------------------------------------

@dataclass
class RoutedCircuit:
    circuit: Circuit              # on physical qubits
    initial_layout: tuple         # logical -> physical before the first gate
    final_layout: tuple           # logical -> physical after the last gate
    swaps: int


def auto_layout(c: Circuit, cmap: CouplingMap) -> tuple:
    """Gray qubit on the best-connected node, the rest in BFS order from it."""
    if c.num_qubits > cmap.num_qubits:
        raise RoutingError(f"circuit needs {c.num_qubits} qubits, device has {cmap.num_qubits}")
    start = max(range(cmap.num_qubits), key=lambda q: (cmap.degree(q), -q))
    order, seen, dq = [], {start}, deque([start])
    while dq:
        q = dq.popleft()
        order.append(q)
        for nb in cmap.neighbors(q):
            if nb not in seen:
                seen.add(nb)
                dq.append(nb)
    if len(order) < c.num_qubits:
        raise RoutingError("coupling map component too small for the circuit")
    logical = [c.gray] if c.gray is not None else []
    logical += [q for q in range(c.num_qubits) if q != c.gray]
    layout = [0] * c.num_qubits
    for lq, pq in zip(logical, order):
        layout[lq] = pq
    return tuple(layout)


def _shortest_path(cmap: CouplingMap, a: int, b: int) -> list:
    prev = {a: None}
    dq = deque([a])
    while dq:
        q = dq.popleft()
        if q == b:
            break
        for nb in cmap.neighbors(q):
            if nb not in prev:
                prev[nb] = q
                dq.append(nb)
    if b not in prev:
        raise RoutingError(f"physical qubits {a} and {b} are not connected")
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path[::-1]


def route(c: Circuit, cmap: CouplingMap, layout="auto") -> RoutedCircuit:
    """Insert SWAPs so every CX acts on coupled qubits.

    The circuit is lowered first.  For each non-adjacent CX the control is
    swapped along a shortest path towards the target.  SWAPs are emitted as
    three CX each.
    """
    if not is_lowered(c):
        c = lower(c)
    if layout == "auto":
        layout = auto_layout(c, cmap)
    layout = list(layout)
    if len(layout) != c.num_qubits or len(set(layout)) != len(layout):
        raise RoutingError("layout must map each logical qubit to a distinct physical qubit")
    if any(not 0 <= p < cmap.num_qubits for p in layout):
        raise RoutingError("layout refers to qubits outside the device")
    initial = tuple(layout)
    phys_to_log = {p: lq for lq, p in enumerate(layout)}
    out, nswaps = [], 0
    for g in c.gates:
        if len(g.qubits) == 1:
            out.append(g._replace(qubits=(layout[g.qubits[0]],)))
            continue
        a, b = g.qubits
        pa, pb = layout[a], layout[b]
        if not cmap.connected(pa, pb):
            path = _shortest_path(cmap, pa, pb)
            for u, v in zip(path[:-2], path[1:-1]):
                out.extend(expand(swap(u, v)))
                nswaps += 1
                lu, lv = phys_to_log.get(u), phys_to_log.get(v)
                if lu is not None:
                    layout[lu] = v
                if lv is not None:
                    layout[lv] = u
                phys_to_log = {p: lq for lq, p in enumerate(layout)}
            pa = layout[a]
        out.append(cx(pa, pb))
    routed = Circuit(cmap.num_qubits, out)
    return RoutedCircuit(routed, initial, tuple(layout), nswaps)


def check_routed(r: RoutedCircuit, cmap: CouplingMap) -> None:
    for g in r.circuit.gates:
        if len(g.qubits) == 2 and not cmap.connected(*g.qubits):
            raise RoutingError(f"{g.kind} on uncoupled qubits {g.qubits}")


def unpermute(probs: np.ndarray, num_physical: int, final_layout) -> np.ndarray:
    """Distribution over logical qubits from one over physical qubits."""
    probs = np.asarray(probs, dtype=float)
    if probs.size != 1 << num_physical:
        raise CircuitError("probability vector does not match the device size")
    t = probs.reshape((2,) * num_physical)
    # axis j of the reshaped tensor is physical qubit num_physical - 1 - j
    keep = [num_physical - 1 - p for p in final_layout]
    drop = tuple(ax for ax in range(num_physical) if ax not in keep)
    t = t.sum(axis=drop) if drop else t
    remaining = sorted(keep)
    # order axes so that logical qubit q is bit q (most significant axis first)
    axes = [remaining.index(keep[q]) for q in reversed(range(len(final_layout)))]
    return np.ascontiguousarray(np.transpose(t, axes)).reshape(-1)

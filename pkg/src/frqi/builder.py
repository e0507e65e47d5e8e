"""FRQI preparation circuits.

Both builders share the same skeleton: Hadamards on the position qubits, then
for every pixel a pattern of X gates that maps the pixel's address onto the
all-ones state, followed by one rotation of the gray qubit conditioned on all
position qubits.  The MCRY builder uses a plain multi-controlled Ry; the MARY
builder uses a cheaper construction that is only correct up to relative
phases, which the computational-basis measurement cannot see.

MARY gate
    A Gray-code multiplexor on the gray qubit.  Its controls are split into
    groups of at most three; each group drives one "line", realised as CX
    (one control), RCCX (two) or RCCCX (three).  Inside an Ry sequence RCCX
    reverses the rotation exactly when its first control is 1 and its second
    is 0 (RCCCX: first two 1, third 0), so the last control of every group
    is wrapped in X gates.  The rotation then fires only when every line
    fires.

Scaffold
    For 32x32 images and larger, clean ancillas hold the AND of the most
    significant position bits.  Each AND is computed with relative-phase
    Toffolis, borrowing other position qubits as dirty workspace, and is
    uncomputed in reverse order.  Consecutive pixels that share their high
    bits share one compute/uncompute pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .circuit import (
    MARY_ARITIES, Circuit, CircuitError, cx, h, mary, mcry, rccx, rcccx, ry, rz, x,
)


class TooLarge(CircuitError):
    pass


class UnsupportedArity(CircuitError):
    pass


# relative-phase Toffolis ---------------------------------------------------

_T = math.pi / 4


def decompose_rccx(a: int = 0, b: int = 1, t: int = 2) -> list:
    """Relative-phase Toffoli with 3 CX."""
    return [
        h(t), rz(_T, t), cx(b, t), rz(-_T, t), cx(a, t),
        rz(_T, t), cx(b, t), rz(-_T, t), h(t),
    ]


def decompose_rcccx(a: int = 0, b: int = 1, c: int = 2, t: int = 3) -> list:
    """Relative-phase three-control Toffoli with 6 CX."""
    return [
        h(t), rz(_T, t), cx(c, t), rz(-_T, t), h(t),
        cx(a, t), rz(_T, t), cx(b, t), rz(-_T, t),
        cx(a, t), rz(_T, t), cx(b, t), rz(-_T, t),
        h(t), rz(_T, t), cx(c, t), rz(-_T, t), h(t),
    ]


def naive_toffoli(a: int = 0, b: int = 1, t: int = 2) -> list:
    """Exact Toffoli in the textbook Clifford+T form (6 CX)."""
    tt = lambda q: rz(_T, q)  # noqa: E731
    td = lambda q: rz(-_T, q)  # noqa: E731
    return [
        h(t), cx(b, t), td(t), cx(a, t), tt(t), cx(b, t), td(t), cx(a, t),
        tt(b), tt(t), h(t), cx(a, b), tt(a), td(b), cx(a, b),
    ]


def naive_c3x(a: int = 0, b: int = 1, c: int = 2, t: int = 3) -> list:
    """Exact three-control X as a phase-parity network (14 CX)."""
    e = math.pi / 8
    out = [h(t), rz(e, a), rz(e, b), rz(e, c), rz(e, t)]
    out += [cx(a, b), rz(-e, b), cx(a, b)]
    out += [cx(b, c), rz(-e, c), cx(a, c), rz(e, c), cx(b, c), rz(-e, c), cx(a, c)]
    out += [
        cx(c, t), rz(-e, t), cx(b, t), rz(e, t), cx(c, t), rz(-e, t), cx(a, t), rz(e, t),
        cx(c, t), rz(-e, t), cx(b, t), rz(e, t), cx(c, t), rz(-e, t), cx(a, t),
    ]
    out.append(h(t))
    return out


# MARY gate -------------------------------------------------------------------

_LINE_CX = {1: 1, 2: 3, 3: 6}


@lru_cache(maxsize=None)
def mary_line_groups(num_controls: int) -> tuple:
    """Control-group sizes per multiplexor line, line 0 being the busiest.

    Chosen to minimise CX count; line b of an L-line multiplexor is used
    2**(L-1-b) times, except the last line which is used twice.
    """
    if num_controls == 2:
        return (1, 1)
    best = None
    for lines in range(1, 5):
        uses = [2 ** (lines - 1 - b) for b in range(lines)]
        uses[-1] = 2
        for sizes in _compositions(num_controls, lines):
            cost = sum(u * _LINE_CX[s] for u, s in zip(uses, sizes))
            key = (cost, lines)
            if best is None or key < best[0]:
                best = (key, sizes)
    if best is None:
        raise UnsupportedArity(f"cannot group {num_controls} controls")
    return best[1]


def _compositions(total: int, parts: int):
    if parts == 1:
        if 1 <= total <= 3:
            yield (total,)
        return
    for first in range(1, 4):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def decompose_mary(arity: int, gamma: float, qubits=None) -> list:
    """MARY gate on ``qubits`` (controls first, target last) as Ry, CX, RCCX, RCCCX and X.

    The result equals an (arity-1)-controlled Ry(gamma) up to relative phases.
    """
    if arity not in MARY_ARITIES:
        raise UnsupportedArity(f"MARY arity must be one of {MARY_ARITIES}, got {arity}")
    qubits = tuple(range(arity)) if qubits is None else tuple(qubits)
    if len(qubits) != arity:
        raise CircuitError(f"MARY{arity} needs {arity} qubits")
    *controls, target = qubits
    sizes = mary_line_groups(len(controls))
    # the two-control core follows the classic layout: first line driven by c1
    if arity == 3:
        groups = [(controls[1],), (controls[0],)]
    else:
        groups, pos = [], 0
        for s in sizes:
            groups.append(tuple(controls[pos:pos + s]))
            pos += s
    negated = [grp[-1] for grp in groups if len(grp) > 1]
    lines = len(groups)
    steps = 2 ** lines
    a = gamma / steps
    out = [x(q) for q in negated]
    for s in range(steps):
        code = s ^ (s >> 1)
        out.append(ry(a if bin(code).count("1") % 2 == 0 else -a, target))
        nxt = (s + 1) ^ ((s + 1) >> 1) if s + 1 < steps else 0
        grp = groups[(code ^ nxt).bit_length() - 1]
        out.append(_line_gate(grp, target))
    out.extend(x(q) for q in negated)
    return out


def _line_gate(grp: tuple, target: int):
    if len(grp) == 1:
        return cx(grp[0], target)
    if len(grp) == 2:
        return rccx(grp[0], grp[1], target)
    return rcccx(grp[0], grp[1], grp[2], target)


# relative-phase AND into a qubit ---------------------------------------------

@lru_cache(maxsize=None)
def _and_plan(m: int) -> tuple:
    """(cx_cost, split) for XOR-ing the AND of m controls into a target.

    m <= 3 is a single gate.  Larger m borrows one dirty qubit d:
    AND(G1)->d, AND(G2+d)->t, AND(G1)->d, AND(G2+d)->t.
    """
    if m <= 3:
        return _LINE_CX[m], None
    best = None
    for m1 in range(2, m):
        m2 = m - m1
        if m2 + 1 >= m:
            continue
        cost = 2 * _and_plan(m1)[0] + 2 * _and_plan(m2 + 1)[0]
        if best is None or cost < best[0]:
            best = (cost, m1)
    return best


def and_into(controls, target: int, pool) -> list:
    """Gates flipping ``target`` iff all ``controls`` are 1, up to relative phase.

    Qubits from ``pool`` may be borrowed in any state and are restored.
    """
    controls = tuple(controls)
    m = len(controls)
    if m == 0:
        return [x(target)]
    if m == 1:
        return [cx(controls[0], target)]
    if m == 2:
        return [rccx(controls[0], controls[1], target)]
    if m == 3:
        return [rcccx(controls[0], controls[1], controls[2], target)]
    m1 = _and_plan(m)[1]
    free = [q for q in pool if q not in controls and q != target]
    if not free:
        raise TooLarge(f"no workspace qubit to build a {m}-control AND")
    d = free[0]
    g1, g2 = controls[:m1], controls[m1:] + (d,)
    first = and_into(g1, d, pool)
    second = and_into(g2, target, pool)
    return first + second + first + second


# layout ----------------------------------------------------------------------

_ARITY_BY_N = {1: 3, 2: 5, 3: 7, 4: 9, 5: 8, 6: 8, 7: 9, 8: 10, 9: 10, 10: 10, 11: 10, 12: 10, 13: 10}
MAX_MARY_N = 13


@dataclass
class LayoutPlan:
    n: int
    num_position: int
    num_ancilla: int
    mary_arity: int
    low_positions: tuple
    ancilla_groups: tuple = ()  # position qubits whose AND each ancilla holds
    scaffold: list = field(default_factory=list)

    @property
    def num_qubits(self) -> int:
        return self.num_position + self.num_ancilla + 1

    @property
    def ancillas(self) -> tuple:
        return tuple(range(self.num_position, self.num_position + self.num_ancilla))

    @property
    def gray(self) -> int:
        return self.num_position + self.num_ancilla

    @property
    def mary_controls(self) -> tuple:
        return self.low_positions + self.ancillas


def plan_layout(n: int) -> LayoutPlan:
    if not 1 <= n <= MAX_MARY_N:
        raise TooLarge(f"MARY layouts exist for n in [1, {MAX_MARY_N}], got {n}")
    arity = _ARITY_BY_N[n]
    npos = 2 * n
    ctrl = arity - 1
    if npos <= ctrl:
        return LayoutPlan(n, npos, 0, arity, tuple(range(npos)))
    num_anc = 1 if n <= 9 else (2 if n <= 11 else 3)
    nlow = ctrl - num_anc
    high = list(range(nlow, npos))
    # split the high bits as evenly as possible, least significant group first
    base, extra = divmod(len(high), num_anc)
    groups, pos = [], 0
    for k in range(num_anc):
        size = base + (1 if k < extra else 0)
        groups.append(tuple(high[pos:pos + size]))
        pos += size
    plan = LayoutPlan(n, npos, num_anc, arity, tuple(range(nlow)), tuple(groups))
    pool = tuple(range(npos))
    for anc, grp in zip(plan.ancillas, groups):
        plan.scaffold.extend(and_into(grp, anc, pool))
    return plan


# builders --------------------------------------------------------------------

def _check_angles(thetas) -> int:
    size = len(thetas)
    n2 = size.bit_length() - 1
    if size < 4 or 1 << n2 != size or n2 % 2:
        raise CircuitError(f"angle vector length {size} is not 2^(2n) with n >= 1")
    for t in thetas:
        if not (-1e-12 <= t <= math.pi / 2 + 1e-12):
            raise CircuitError(f"angle {t} outside [0, pi/2]")
    return n2 // 2


def _skeleton(npos: int, thetas, rotation, addressing: str, on_high_change=None, nlow=None):
    """Hadamards plus per-pixel X addressing around ``rotation(i, theta)``."""
    gates = [h(q) for q in range(npos)]
    full = (1 << npos) - 1
    if addressing not in ("transition", "full"):
        raise CircuitError(f"unknown addressing {addressing!r}")
    prev = None  # address currently mapped onto all-ones
    for i, theta in enumerate(thetas):
        if addressing == "full" and prev is not None:
            gates.extend(x(q) for q in range(npos) if (~prev & full) >> q & 1)
            prev = None
        change = (~i & full) if prev is None else (prev ^ i)
        if on_high_change is not None:
            high = change >> nlow
            if high or prev is None:
                gates.extend(on_high_change(prev is None, [q for q in range(nlow, npos) if change >> q & 1]))
            change &= (1 << nlow) - 1
        gates.extend(x(q) for q in range(npos) if change >> q & 1)
        prev = i
        gates.extend(rotation(i, theta))
    if addressing == "full" and prev is not None:
        if on_high_change is not None:
            raise CircuitError("full addressing is not supported with ancilla scaffolds")
        gates.extend(x(q) for q in range(npos) if (~prev & full) >> q & 1)
    return gates


def build_mcry_circuit(thetas, max_n: int = 8, addressing: str = "transition") -> Circuit:
    """FRQI circuit with one multi-controlled Ry(2*theta) per pixel."""
    n = _check_angles(thetas)
    if n > max_n:
        raise TooLarge(f"MCRY builder limited to n <= {max_n}, got {n}")
    npos = 2 * n
    gray = npos
    controls = tuple(range(npos))
    gates = _skeleton(npos, thetas, lambda i, t: [mcry(2 * t, controls, gray)], addressing)
    return Circuit(npos + 1, gates, gray, controls, ())


def build_mary_circuit(thetas, max_n: int = 9, addressing: str = "transition") -> Circuit:
    """FRQI circuit with one MARY(2*theta) per pixel plus ancilla scaffolding."""
    n = _check_angles(thetas)
    if n > min(max_n, MAX_MARY_N):
        raise TooLarge(f"MARY builder limited to n <= {min(max_n, MAX_MARY_N)}, got {n}")
    plan = plan_layout(n)
    npos = plan.num_position
    ctrls, gray = plan.mary_controls, plan.gray

    def rotation(i, t):
        return [mary(2 * t, ctrls, gray)]

    if not plan.num_ancilla:
        gates = _skeleton(npos, thetas, rotation, addressing)
    else:
        compute = plan.scaffold
        uncompute = compute[::-1]

        def on_high_change(first, flips):
            out = [] if first else list(uncompute)
            out.extend(x(q) for q in flips)
            out.extend(compute)
            return out

        nlow = len(plan.low_positions)
        gates = _skeleton(npos, thetas, rotation, addressing, on_high_change, nlow)
        gates.extend(uncompute)
    return Circuit(plan.num_qubits, gates, gray, tuple(range(npos)), plan.ancillas)


def build_mary_single_angle(n: int, index: int, theta: float) -> Circuit:
    """Circuit for one pixel of a 2^n x 2^n image: Hadamards, addressing, the
    scaffolded MARY gate and its uncomputation.  Works up to n = 13."""
    plan = plan_layout(n)
    npos = plan.num_position
    if not 0 <= index < 1 << npos:
        raise CircuitError(f"pixel index {index} out of range")
    gates = [h(q) for q in range(npos)]
    gates.extend(x(q) for q in range(npos) if not index >> q & 1)
    gates.extend(plan.scaffold)
    gates.append(mary(2 * theta, plan.mary_controls, plan.gray))
    gates.extend(plan.scaffold[::-1])
    gates.extend(x(q) for q in range(npos) if not index >> q & 1)
    return Circuit(plan.num_qubits, gates, plan.gray, tuple(range(npos)), plan.ancillas)


def build_circuit(variant: str, thetas, **kw) -> Circuit:
    if variant.upper() == "MCRY":
        return build_mcry_circuit(thetas, **kw)
    if variant.upper() == "MARY":
        return build_mary_circuit(thetas, **kw)
    raise CircuitError(f"unknown builder {variant!r}")

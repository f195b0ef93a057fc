"""Lumped-element model of the cross-chip wirebond between the two chips.

Node names used by :func:`build_network`::

    gnd      ground plane / microwave-chip ground (reference)
    mw       microwave resonator pad (probe)
    mech     mechanical resonator signal electrode
    mech_g   mechanical resonator ground electrode
    sig_c, sig_b    signal bond: after the contact, after the contact capacitor
    gnd_c, gnd_b    ground bond: same
    mech_r, mech_l  internal nodes of the motional arm

Each bond runs ``pad -[R_wb]- *_c -[C_wb]- *_b -[L_wb]- far pad``. ``C_p``
sits on the chip-side node ``*_b`` by default (``cp_side="far"`` moves it to
the far pad); the mutual ``C_pwb`` joins ``sig_b`` and ``gnd_b``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, fields, replace
from typing import Callable, Iterable

import numpy as np
from scipy import optimize

from .units import TWO_PI

KINDS = ("R", "L", "C")


class CircuitError(ValueError):
    pass


class SingularNetworkError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CircuitElement:
    kind: str
    value: float
    node_a: str
    node_b: str
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CircuitError(f"unknown element kind {self.kind!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise CircuitError(f"{self.name or self.kind}: value must be positive, got {self.value}")
        if self.node_a == self.node_b:
            raise CircuitError(f"{self.name or self.kind}: both ends on node {self.node_a!r}")

    def admittance(self, omega):
        if self.kind == "R":
            return np.full(np.shape(omega), 1.0 / self.value, dtype=complex)
        if self.kind == "L":
            return 1.0 / (1j * omega * self.value)
        return 1j * omega * self.value

    def impedance(self, omega):
        if self.kind == "R":
            return np.full(np.shape(omega), self.value, dtype=complex)
        if self.kind == "L":
            return 1j * omega * self.value
        return 1.0 / (1j * omega * self.value)


@dataclass(frozen=True)
class CircuitNetwork:
    elements: tuple[CircuitElement, ...]
    ground: str = "gnd"
    probe: str = "mw"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        nodes = self.all_nodes()
        if self.ground not in nodes:
            raise CircuitError(f"ground node {self.ground!r} not in network")
        if self.probe not in nodes or self.probe == self.ground:
            raise CircuitError(f"probe node {self.probe!r} must be a non-ground node")
        if not _connected(nodes, self.elements):
            raise CircuitError("network is not connected")

    def all_nodes(self) -> list[str]:
        seen: dict[str, None] = {}
        for el in self.elements:
            seen.setdefault(el.node_a)
            seen.setdefault(el.node_b)
        return list(seen)

    @property
    def nodes(self) -> list[str]:
        """Non-ground nodes in order of first appearance (matrix order)."""
        return [n for n in self.all_nodes() if n != self.ground]

    def element(self, name: str) -> CircuitElement:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def with_value(self, name: str, value: float) -> "CircuitNetwork":
        els = tuple(replace(el, value=value) if el.name == name else el for el in self.elements)
        return replace(self, elements=els)


def _connected(nodes, elements) -> bool:
    adj: dict[str, set] = {n: set() for n in nodes}
    for el in elements:
        adj[el.node_a].add(el.node_b)
        adj[el.node_b].add(el.node_a)
    start = next(iter(adj))
    seen, todo = {start}, [start]
    while todo:
        for nb in adj[todo.pop()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(adj)


@dataclass(frozen=True)
class WirebondModelParams:
    L_m: float = 2.73e-9
    C_m: float = 1.83e-15
    R_m: float = 884e6
    C_o: float = 337e-18
    C_pm: float = 50e-15
    L_mw: float = 20e-9
    C_mw: float = 130.8e-15
    R_mw: float = 37e6
    L_wb_per_mm: float = 1e-9
    C_p: float = 3.9e-15
    C_wb: float = 20e-12
    R_wb: float = 0.4
    C_pwb_per_mm: float = 7e-15
    length: float = 1.0  # mm
    cp_side: str = "chip"
    r_m_placement: str = "series"

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("cp_side", "r_m_placement"):
                continue
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise CircuitError(f"{f.name} must be positive, got {value}")
        if self.cp_side not in ("chip", "far"):
            raise CircuitError("cp_side must be 'chip' or 'far'")
        if self.r_m_placement not in ("series", "shunt"):
            raise CircuitError("r_m_placement must be 'series' or 'shunt'")

    @property
    def characteristic_impedance(self) -> float:
        return math.sqrt(self.L_mw / self.C_mw)

    @property
    def microwave_frequency(self) -> float:
        """Isolated microwave-branch resonance (Hz)."""
        return 1.0 / (TWO_PI * math.sqrt(self.L_mw * self.C_mw))

    @property
    def mechanical_frequency(self) -> float:
        """Series (motional) resonance of the mechanical branch (Hz)."""
        return 1.0 / (TWO_PI * math.sqrt(self.L_m * self.C_m))

    @classmethod
    def as_printed(cls, **overrides) -> "WirebondModelParams":
        """Reference element values verbatim (motional arm resonates near 71 GHz)."""
        return cls(**overrides)

    @classmethod
    def band_consistent(cls, **overrides) -> "WirebondModelParams":
        """Published values with ``L_m`` read as 2.73 uH and ``R_m`` shunting ``C_m``.

        This places the motional resonance near 2.25 GHz with Q ~ 2e4.
        """
        base = dict(L_m=2.73e-6, r_m_placement="shunt")
        base.update(overrides)
        return cls(**base)


def build_network(p: WirebondModelParams) -> CircuitNetwork:
    L_wb = p.L_wb_per_mm * p.length
    C_pwb = p.C_pwb_per_mm * p.length
    E = CircuitElement
    els = [
        # microwave resonator: parallel R-L-C from pad to ground
        E("R", p.R_mw, "mw", "gnd", "R_mw"),
        E("L", p.L_mw, "mw", "gnd", "L_mw"),
        E("C", p.C_mw, "mw", "gnd", "C_mw"),
    ]
    # two bonds; the ground bond returns the mechanical ground electrode
    for tag, start, end in (("sig", "mw", "mech"), ("gnd", "gnd", "mech_g")):
        els += [
            E("R", p.R_wb, start, f"{tag}_c", f"R_wb_{tag}"),
            E("C", p.C_wb, f"{tag}_c", f"{tag}_b", f"C_wb_{tag}"),
            E("L", L_wb, f"{tag}_b", end, f"L_wb_{tag}"),
        ]
        cp_node = f"{tag}_b" if p.cp_side == "chip" else end
        if cp_node != "gnd":
            els.append(E("C", p.C_p, cp_node, "gnd", f"C_p_{tag}"))
        else:  # pragma: no cover - far side of the ground bond is never gnd
            raise CircuitError("parasitic capacitor would short to ground")
    els.append(E("C", C_pwb, "sig_b", "gnd_b", "C_pwb"))
    # mechanical resonator: motional arm shunted by C_o, plus pad parasitic
    if p.r_m_placement == "series":
        els += [
            E("R", p.R_m, "mech", "mech_r", "R_m"),
            E("L", p.L_m, "mech_r", "mech_l", "L_m"),
            E("C", p.C_m, "mech_l", "mech_g", "C_m"),
        ]
    else:
        els += [
            E("L", p.L_m, "mech", "mech_l", "L_m"),
            E("C", p.C_m, "mech_l", "mech_g", "C_m"),
            E("R", p.R_m, "mech_l", "mech_g", "R_m"),
        ]
    els += [
        E("C", p.C_o, "mech", "mech_g", "C_o"),
        E("C", p.C_pm, "mech", "gnd", "C_pm"),
    ]
    return CircuitNetwork(tuple(els), ground="gnd", probe="mw")


def _admittance_stack(net: CircuitNetwork, omega: np.ndarray) -> np.ndarray:
    nodes = net.nodes
    index = {n: i for i, n in enumerate(nodes)}
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    y = np.zeros((omega.size, len(nodes), len(nodes)), dtype=complex)
    for el in net.elements:
        ye = el.admittance(omega)
        a, b = index.get(el.node_a), index.get(el.node_b)
        if a is not None:
            y[:, a, a] += ye
        if b is not None:
            y[:, b, b] += ye
        if a is not None and b is not None:
            y[:, a, b] -= ye
            y[:, b, a] -= ye
    return y


def admittance_matrix(net: CircuitNetwork, omega: float) -> np.ndarray:
    """Nodal admittance matrix (ground row/column removed), rows in ``net.nodes`` order."""
    if not omega > 0:
        raise CircuitError("omega must be positive")
    return _admittance_stack(net, np.array([omega]))[0]


def driving_point_impedance(net: CircuitNetwork, omega, chunk: int = 200_000):
    """Impedance (ohm) between the probe node and ground; ``omega`` may be an array."""
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omega_arr <= 0):
        raise CircuitError("omega must be positive")
    k = net.nodes.index(net.probe)
    out = np.empty(omega_arr.size, dtype=complex)
    for start in range(0, omega_arr.size, chunk):
        w = omega_arr[start : start + chunk]
        y = _admittance_stack(net, w)
        rhs = np.zeros((w.size, y.shape[1], 1), dtype=complex)
        rhs[:, k, 0] = 1.0
        try:
            v = np.linalg.solve(y, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularNetworkError(f"singular admittance matrix: {exc}") from exc
        out[start : start + chunk] = v[:, k, 0]
    if not np.all(np.isfinite(out)):
        raise SingularNetworkError("singular admittance matrix")
    return out[0] if np.ndim(omega) == 0 else out.reshape(np.shape(omega))


def loop_driving_point_impedance(net: CircuitNetwork, omega: float) -> complex:
    """Driving-point impedance from loop (mesh) analysis.

    A 1 V source is placed from ground to the probe; fundamental loops come
    from a BFS spanning tree and ``B Z B^T J = B e`` is solved for the loop
    currents. Shares nothing with the nodal path.
    """
    branches = [(el.node_a, el.node_b, complex(el.impedance(omega))) for el in net.elements]
    branches.append((net.ground, net.probe, 0.0j))
    src = len(branches) - 1
    emf = np.zeros(len(branches), dtype=complex)
    emf[src] = 1.0

    adj: dict[str, list[tuple[int, str]]] = {}
    for k, (a, b, _) in enumerate(branches):
        adj.setdefault(a, []).append((k, b))
        adj.setdefault(b, []).append((k, a))
    parent: dict[str, tuple[str, int] | None] = {net.ground: None}
    depth = {net.ground: 0}
    tree = set()
    queue = deque([net.ground])
    while queue:
        node = queue.popleft()
        for k, nb in adj[node]:
            if nb not in parent:
                parent[nb] = (node, k)
                depth[nb] = depth[node] + 1
                tree.add(k)
                queue.append(nb)

    def path_up(node, stop_depth):
        # (branch, sign) pairs walking toward the root, sign for travel node->parent
        steps = []
        while depth[node] > stop_depth:
            par, k = parent[node]
            a, b, _ = branches[k]
            steps.append((k, 1.0 if (a, b) == (node, par) else -1.0))
            node = par
        return steps, node

    links = [k for k in range(len(branches)) if k not in tree]
    loops = np.zeros((len(links), len(branches)))
    for row, k in enumerate(links):
        a, b, _ = branches[k]
        loops[row, k] = 1.0
        # close the loop from b back to a through the tree
        u, v = b, a
        up_u, up_v = [], []
        while u != v:
            if depth[u] >= depth[v]:
                steps, u = path_up(u, depth[u] - 1)
                up_u += steps
            else:
                steps, v = path_up(v, depth[v] - 1)
                up_v += steps
        for br, sign in up_u:
            loops[row, br] += sign
        for br, sign in up_v:
            loops[row, br] -= sign

    z = np.diag([br[2] for br in branches])
    zloop = loops @ z @ loops.T
    try:
        j = np.linalg.solve(zloop, loops @ emf)
    except np.linalg.LinAlgError as exc:
        raise SingularNetworkError(str(exc)) from exc
    i_src = (loops.T @ j)[src]
    return complex(1.0 / i_src)


@dataclass(frozen=True)
class Resonance:
    frequency: float  # Hz
    linewidth: float  # Hz, full width at half power of |Z|^2


def _abs_z(net, f_hz):
    return float(abs(driving_point_impedance(net, TWO_PI * f_hz)))


def _refine_peak(net, f_lo, f_mid, f_hi) -> float:
    sol = optimize.minimize_scalar(
        lambda f: -_abs_z(net, f), bracket=(f_lo, f_mid, f_hi), method="golden", tol=1e-10
    )
    return float(sol.x)


def _half_power_edge(net, f0, peak, direction, limit):
    target = peak / math.sqrt(2.0)
    step = f0 * 1e-9
    inside = f0
    while True:
        probe = f0 + direction * step
        if (probe - limit) * direction > 0:
            return None
        if _abs_z(net, probe) < target:
            break
        inside = probe
        step *= 2.0
    return optimize.brentq(lambda f: _abs_z(net, f) - target, min(inside, probe), max(inside, probe), xtol=1e-9 * f0)


def _linewidth(net, f0, f_lo, f_hi) -> float:
    peak = _abs_z(net, f0)
    right = _half_power_edge(net, f0, peak, +1, f_hi)
    left = _half_power_edge(net, f0, peak, -1, f_lo)
    if right is not None and left is not None:
        return right - left
    if right is not None:
        return 2.0 * (right - f0)
    if left is not None:
        return 2.0 * (f0 - left)
    return math.nan


def find_resonances(
    net: CircuitNetwork,
    f_min: float,
    f_max: float,
    n_grid: int = 2000,
    linewidths: bool = True,
) -> list[Resonance]:
    """Local maxima of |Z| at the probe between ``f_min`` and ``f_max`` (Hz).

    Grid maxima are refined by golden-section search; the linewidth is the
    distance between the half-power points of |Z|, root-found on each side.
    """
    if not f_min < f_max:
        raise CircuitError("f_min must be below f_max")
    if n_grid < 100:
        raise CircuitError("n_grid must be at least 100")
    f = np.linspace(f_min, f_max, n_grid)
    mag = np.abs(driving_point_impedance(net, TWO_PI * f))
    idx = np.flatnonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] > mag[2:])) + 1
    out = []
    for i in idx:
        f0 = _refine_peak(net, f[i - 1], f[i], f[i + 1])
        lw = _linewidth(net, f0, f_min, f_max) if linewidths else math.nan
        out.append(Resonance(f0, lw))
    return out


def dense_grid_maxima(net: CircuitNetwork, f_min: float, f_max: float, n_grid: int = 1_000_000):
    """Grid-only maxima of |Z| (Hz); brute-force oracle for :func:`find_resonances`."""
    f = np.linspace(f_min, f_max, n_grid)
    mag = np.abs(driving_point_impedance(net, TWO_PI * f))
    idx = np.flatnonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] > mag[2:])) + 1
    return f[idx]


@dataclass(frozen=True)
class CrossingResult:
    splitting: float  # Hz, minimum gap between the two hybrid resonances
    scale: float  # trim factor at the minimum

    @property
    def g(self) -> float:
        return 0.5 * self.splitting


def min_splitting(
    build: Callable[[float], CircuitNetwork],
    f_lo: float,
    f_hi: float,
    s_lo: float,
    s_hi: float,
    n_scan: int = 41,
    n_grid: int = 2000,
) -> CrossingResult:
    """Minimum gap between adjacent resonances in ``[f_lo, f_hi]`` as ``build(s)`` is trimmed.

    ``s`` is scanned geometrically over ``[s_lo, s_hi]`` and the smallest gap
    is polished with a bounded scalar search. Raises :class:`CircuitError`
    when the minimum is not bracketed inside the scan.
    """

    def gap(s):
        res = find_resonances(build(s), f_lo, f_hi, n_grid, linewidths=False)
        if len(res) < 2:
            return math.inf
        fr = np.array([r.frequency for r in res])
        return float(np.min(np.diff(fr)))

    scales = np.geomspace(s_lo, s_hi, n_scan)
    gaps = np.array([gap(s) for s in scales])
    if not np.any(np.isfinite(gaps)):
        raise CircuitError("no pair of resonances found while trimming")
    i = int(np.argmin(gaps))
    if i == 0 or i == n_scan - 1 or not (np.isfinite(gaps[i - 1]) and np.isfinite(gaps[i + 1])):
        raise CircuitError("failed to bracket the avoided crossing")
    sol = optimize.minimize_scalar(
        gap, bounds=(scales[i - 1], scales[i + 1]), method="bounded",
        options={"xatol": 1e-9 * scales[i]},
    )
    best_s, best_gap = (float(sol.x), float(sol.fun)) if sol.fun < gaps[i] else (scales[i], gaps[i])
    return CrossingResult(splitting=best_gap, scale=float(best_s))


def microwave_like_resonance(net: CircuitNetwork, f_min: float, f_max: float, n_grid: int = 4000) -> float:
    """Resonance (Hz) whose frequency responds most strongly to ``L_mw``."""
    res = [r.frequency for r in find_resonances(net, f_min, f_max, n_grid, linewidths=False)]
    if not res:
        raise CircuitError("no resonance in range")
    l_mw = net.element("L_mw").value
    moved = [
        r.frequency
        for r in find_resonances(net.with_value("L_mw", l_mw * (1 + 1e-4)), f_min, f_max, n_grid, linewidths=False)
    ]
    if len(moved) != len(res):
        # a resonance left the window; fall back to nearest-neighbour matching
        moved = [min(moved, key=lambda m: abs(m - f)) for f in res]
    shifts = [abs(m - f) / f for f, m in zip(res, moved)]
    return res[int(np.argmax(shifts))]


@dataclass(frozen=True)
class LengthPoint:
    length: float  # mm
    g: float  # Hz
    shift: float  # Hz
    error: str | None = None


def coupling_and_shift_vs_length(
    p: WirebondModelParams,
    lengths: Iterable[float],
    window: float = 0.25,
    n_grid: int = 2000,
) -> list[LengthPoint]:
    """Microwave-mechanics coupling and microwave frequency shift per bond length (mm).

    ``shift`` is the isolated microwave resonance minus the microwave-like
    resonance of the bonded network. ``g`` is half the minimum splitting
    while ``L_mw`` is trimmed through the mechanical resonance; the search
    window is ``+-window`` around the motional frequency.
    """
    out = []
    f_bare = p.microwave_frequency
    f_mech = p.mechanical_frequency
    for length in lengths:
        if not length > 0:
            out.append(LengthPoint(length, math.nan, math.nan, "length must be positive"))
            continue
        q = replace(p, length=float(length))
        net = build_network(q)
        try:
            f_mw = microwave_like_resonance(net, 0.2 * f_bare, 1.5 * f_bare)
            shift = f_bare - f_mw
        except CircuitError as exc:
            out.append(LengthPoint(length, math.nan, math.nan, f"shift: {exc}"))
            continue
        try:
            # trim so the loaded microwave mode lands on the mechanics
            s0 = (f_mw / f_mech) ** 2
            crossing = min_splitting(
                lambda s: net.with_value("L_mw", q.L_mw * s),
                f_mech * (1 - window),
                f_mech * (1 + window),
                s0 / 1.6,
                s0 * 1.6,
                n_grid=n_grid,
            )
            g = crossing.g
            err = None
        except CircuitError as exc:
            g, err = math.nan, f"coupling: {exc}"
        out.append(LengthPoint(float(length), g, shift, err))
    return out


def two_lc_network(L1, C1, L2, C2, Cc, R=1e9) -> CircuitNetwork:
    """Two grounded parallel LC tanks joined by ``Cc``; probe on tank 1."""
    E = CircuitElement
    return CircuitNetwork(
        (
            E("L", L1, "mw", "gnd", "L_mw"),
            E("C", C1, "mw", "gnd", "C_mw"),
            E("R", R, "mw", "gnd", "R_mw"),
            E("L", L2, "t2", "gnd", "L_2"),
            E("C", C2, "t2", "gnd", "C_2"),
            E("R", R, "t2", "gnd", "R_2"),
            E("C", Cc, "mw", "t2", "C_c"),
        ),
        ground="gnd",
        probe="mw",
    )


def two_lc_coupling(C1, L2, C2, Cc) -> float:
    """Weak-coupling estimate of g (Hz) for :func:`two_lc_network` at degeneracy."""
    w = 1.0 / math.sqrt(L2 * (C2 + Cc))
    return 0.5 * w * Cc / math.sqrt((C1 + Cc) * (C2 + Cc)) / TWO_PI


def random_network(rng: np.random.Generator, n_nodes: int = 5, n_extra: int = 6) -> CircuitNetwork:
    """Random connected RLC network with GHz-scale element values."""
    names = ["gnd"] + [f"n{i}" for i in range(1, n_nodes)]
    scale = {"R": (1.0, 1e4), "L": (1e-10, 1e-7), "C": (1e-15, 1e-11)}
    els = []

    def draw(a, b, k):
        kind = KINDS[int(rng.integers(3))]
        lo, hi = scale[kind]
        value = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        els.append(CircuitElement(kind, value, a, b, f"{kind}{k}"))

    for i in range(1, n_nodes):
        draw(names[int(rng.integers(i))], names[i], len(els))
    for _ in range(n_extra):
        a, b = rng.choice(n_nodes, size=2, replace=False)
        draw(names[a], names[b], len(els))
    return CircuitNetwork(tuple(els), ground="gnd", probe=names[int(rng.integers(1, n_nodes))])


def elements_table(net: CircuitNetwork) -> list[dict]:
    return [
        {"name": el.name, "kind": el.kind, "value": el.value, "node_a": el.node_a, "node_b": el.node_b}
        for el in net.elements
    ]

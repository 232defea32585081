"""U(1) gauge fields on the dyadic lattice.

A gauge field stores one angle per positively oriented bond; the reverse
bond carries the conjugate value by construction.  Angles of horizontal
bonds (k1,k2)->(k1+1,k2) live in `theta_h[k1, k2]` (shape (n, n+1)) and
vertical bonds (k1,k2)->(k1,k2+1) in `theta_v[k1, k2]` (shape (n+1, n)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lattice_geom import Bond, DomainError, LatticeGeometry, MaximalTree, build_lattice

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Reduce mod 2*pi into (-pi, pi] (storage convention)."""
    y = np.mod(-np.asarray(x) + np.pi, TWO_PI)
    return -(y - np.pi)


def log_u1(z, tol: float = 1e-12):
    """Principal logarithm of a unit complex number, valued in [-pi, pi).

    Accepts either a unit complex number (checked to `tol`) or a real angle,
    which is wrapped into the branch.
    """
    z = np.asarray(z)
    if np.iscomplexobj(z):
        if np.any(np.abs(np.abs(z) - 1.0) > tol):
            raise DomainError("log_u1 requires unit modulus")
        x = np.angle(z)
    else:
        x = np.mod(np.asarray(z, dtype=float) + np.pi, TWO_PI) - np.pi
    # np.angle returns (-pi, pi]; fold +pi to -pi for the [-pi, pi) branch
    x = np.where(x >= np.pi, x - TWO_PI, x)
    if x.ndim == 0:
        return float(x)
    return x


@dataclass
class GaugeField:
    geom: LatticeGeometry
    theta_h: np.ndarray  # (n, n+1)
    theta_v: np.ndarray  # (n+1, n)

    def __post_init__(self):
        n = self.geom.n
        if self.theta_h.shape != (n, n + 1) or self.theta_v.shape != (n + 1, n):
            raise DomainError("gauge field array shapes do not match geometry")

    @classmethod
    def identity(cls, geom: LatticeGeometry) -> "GaugeField":
        n = geom.n
        return cls(geom, np.zeros((n, n + 1)), np.zeros((n + 1, n)))

    @classmethod
    def random(cls, geom: LatticeGeometry, rng: np.random.Generator) -> "GaugeField":
        n = geom.n
        th = wrap_angle(rng.uniform(-np.pi, np.pi, size=(n, n + 1)))
        tv = wrap_angle(rng.uniform(-np.pi, np.pi, size=(n + 1, n)))
        return cls(geom, th, tv)

    def copy(self) -> "GaugeField":
        return GaugeField(self.geom, self.theta_h.copy(), self.theta_v.copy())

    def bond_angle(self, x: tuple[int, int], y: tuple[int, int]) -> float:
        """Angle of the oriented bond x->y (conjugate for reversed bonds)."""
        (a1, a2), (b1, b2) = x, y
        if b1 == a1 + 1 and b2 == a2:
            return float(self.theta_h[a1, a2])
        if b1 == a1 - 1 and b2 == a2:
            return -float(self.theta_h[b1, b2])
        if b1 == a1 and b2 == a2 + 1:
            return float(self.theta_v[a1, a2])
        if b1 == a1 and b2 == a2 - 1:
            return -float(self.theta_v[a1, b2])
        raise DomainError(f"nodes {x} and {y} are not adjacent")

    def pos_bond_angle(self, bond: Bond) -> float:
        kind, k1, k2 = bond
        return float(self.theta_h[k1, k2] if kind == 'h' else self.theta_v[k1, k2])

    def plaquette_angles(self) -> np.ndarray:
        """log g(boundary p) for every plaquette, shape (n, n), in [-pi, pi)."""
        th, tv = self.theta_h, self.theta_v
        raw = th[:, :-1] + tv[1:, :] - th[:, 1:] - tv[:-1, :]
        return log_u1(raw)

    def max_bond_log(self) -> float:
        return float(max(np.abs(log_u1(self.theta_h)).max(initial=0.0),
                         np.abs(log_u1(self.theta_v)).max(initial=0.0)))

    def to_json_dict(self) -> dict:
        bonds = []
        for k2 in range(self.geom.n + 1):
            for k1 in range(self.geom.n):
                bonds.append({"x": [k1, k2], "dir": 1,
                              "theta": float(self.theta_h[k1, k2])})
        for k2 in range(self.geom.n):
            for k1 in range(self.geom.n + 1):
                bonds.append({"x": [k1, k2], "dir": 2,
                              "theta": float(self.theta_v[k1, k2])})
        return {"N": self.geom.N, "bonds": bonds}

    def dump_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=0,
                      default=float, separators=(",", ":"))
            f.write("\n")


def load_gauge_field(obj) -> GaugeField:
    """Load a gauge field from the JSON wire format, validating counts and range."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    geom = build_lattice(int(obj["N"]))
    n = geom.n
    th = np.full((n, n + 1), np.nan)
    tv = np.full((n + 1, n), np.nan)
    for b in obj["bonds"]:
        k1, k2 = b["x"]
        theta = float(b["theta"])
        if not (-np.pi < theta <= np.pi):
            raise DomainError(f"bond angle {theta} outside (-pi, pi]")
        if b["dir"] == 1:
            th[k1, k2] = theta
        elif b["dir"] == 2:
            tv[k1, k2] = theta
        else:
            raise DomainError(f"bad bond direction {b['dir']}")
    if np.isnan(th).any() or np.isnan(tv).any() or len(obj["bonds"]) != geom.pos_bond_count:
        raise DomainError("gauge field file does not cover every bond exactly once")
    return GaugeField(geom, th, tv)


@dataclass
class GaugeTransform:
    """One angle per node (including the boundary), shape (n+1, n+1)."""

    geom: LatticeGeometry
    angles: np.ndarray

    def __post_init__(self):
        n = self.geom.n
        if self.angles.shape != (n + 1, n + 1):
            raise DomainError("gauge transform shape does not match geometry")

    @classmethod
    def identity(cls, geom: LatticeGeometry) -> "GaugeTransform":
        return cls(geom, np.zeros((geom.n + 1, geom.n + 1)))

    @classmethod
    def random(cls, geom: LatticeGeometry, rng: np.random.Generator) -> "GaugeTransform":
        return cls(geom, wrap_angle(rng.uniform(-np.pi, np.pi,
                                                size=(geom.n + 1, geom.n + 1))))

    def is_identity(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.angles) <= tol))


def apply_gauge(g: GaugeField, u: GaugeTransform) -> GaugeField:
    """g^u with (g^u)_xy = u_x g_xy u_y^{-1}."""
    if g.geom != u.geom:
        raise DomainError("gauge field and transform geometries differ")
    a = u.angles
    th = wrap_angle(a[:-1, :] + g.theta_h - a[1:, :])
    tv = wrap_angle(a[:, :-1] + g.theta_v - a[:, 1:])
    return GaugeField(g.geom, th, tv)


def inverse_transform(u: GaugeTransform) -> GaugeTransform:
    return GaugeTransform(u.geom, wrap_angle(-u.angles))


@dataclass(frozen=True)
class LatticeLoop:
    """Closed nearest-neighbour node sequence (l_0, ..., l_n = l_0)."""

    nodes: tuple[tuple[int, int], ...]
    scale: int

    def __post_init__(self):
        if len(self.nodes) < 1 or self.nodes[0] != self.nodes[-1]:
            raise DomainError("loop must be closed")
        n = 1 << self.scale
        for (a, b) in zip(self.nodes, self.nodes[1:]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise DomainError(f"consecutive loop nodes {a}, {b} not adjacent")
        for (k1, k2) in self.nodes:
            if not (0 <= k1 <= n and 0 <= k2 <= n):
                raise DomainError("loop leaves the lattice")

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    @property
    def interior(self) -> bool:
        n = 1 << self.scale
        return all(0 < k1 < n and 0 < k2 < n for (k1, k2) in self.nodes)


def plaquette_loop(geom: LatticeGeometry, k1: int, k2: int) -> LatticeLoop:
    return LatticeLoop(tuple(geom.plaquette_loop(k1, k2)), geom.N)


def rect_boundary_loop(geom: LatticeGeometry, rect) -> LatticeLoop:
    return LatticeLoop(tuple(rect.rescale(geom.N).boundary_loop()), geom.N)


def holonomy(g: GaugeField, loop: LatticeLoop) -> complex:
    """Ordered product of bond values along the loop."""
    total = 0.0
    for (a, b) in zip(loop.nodes, loop.nodes[1:]):
        total += g.bond_angle(a, b)
    return complex(np.cos(total), np.sin(total))


def holonomy_angle_sum(g: GaugeField, loop: LatticeLoop) -> float:
    """Unwrapped sum of bond angles along the loop (not reduced mod 2*pi)."""
    return float(sum(g.bond_angle(a, b) for (a, b) in zip(loop.nodes, loop.nodes[1:])))


def winding_vector(loop: LatticeLoop) -> np.ndarray:
    """Winding number of the loop around each plaquette centre, shape (n, n).

    Signed crossings of a rightward horizontal ray from each centre with the
    loop's vertical steps, accumulated row by row: a vertical step at column
    k1 crossing row k2 adds its sign to every plaquette (j, k2) with j < k1.
    """
    n = 1 << loop.scale
    crossings = np.zeros((n, n + 1), dtype=np.int64)  # [row, column of the step]
    for (a, b) in zip(loop.nodes, loop.nodes[1:]):
        if a[0] == b[0]:  # vertical step
            sign = 1 if b[1] == a[1] + 1 else -1
            row = min(a[1], b[1])
            crossings[row, a[0]] += sign
    # plaquette (j, row) sees all steps with column > j
    out = np.cumsum(crossings[:, ::-1], axis=1)[:, ::-1][:, 1:]
    return np.ascontiguousarray(out.T)  # index [k1, k2]


def omega_exact(loop: LatticeLoop):
    """2^-2N sum_p l(p)^2 as an exact Fraction."""
    from fractions import Fraction

    w = winding_vector(loop)
    return Fraction(int((w.astype(object) ** 2).sum()), 1 << (2 * loop.scale))


def omega(loop: LatticeLoop) -> float:
    return float(omega_exact(loop))


def winding_holonomy(g: GaugeField, w: np.ndarray) -> complex:
    """prod_p g(boundary p)^{w(p)} for an integer plaquette map w."""
    ang = g.plaquette_angles()
    total = float((w * ang).sum())
    return complex(np.cos(total), np.sin(total))


def covariant_laplacian(g: GaugeField) -> np.ndarray:
    """Matrix of the covariant Laplacian on interior nodes.

    Interior node (k1,k2), 1 <= k1,k2 <= n-1, is row (k2-1)*(n-1) + (k1-1).
    Entries: diagonal -4 * 2^(2N); off-diagonal 2^(2N) * g_xy for interior
    neighbours y of x.  Hermitian, negative semi-definite.
    """
    n = g.geom.n
    m = n - 1
    if m == 0:
        raise DomainError("no interior nodes at N=0")
    scale = float(4 ** g.geom.N)
    H = np.zeros((m * m, m * m), dtype=complex)
    idx = lambda k1, k2: (k2 - 1) * m + (k1 - 1)
    for k2 in range(1, n):
        for k1 in range(1, n):
            i = idx(k1, k2)
            H[i, i] = -4.0 * scale
            if k1 + 1 < n:
                H[i, idx(k1 + 1, k2)] = scale * np.exp(1j * g.theta_h[k1, k2])
            if k1 - 1 > 0:
                H[i, idx(k1 - 1, k2)] = scale * np.exp(-1j * g.theta_h[k1 - 1, k2])
            if k2 + 1 < n:
                H[i, idx(k1, k2 + 1)] = scale * np.exp(1j * g.theta_v[k1, k2])
            if k2 - 1 > 0:
                H[i, idx(k1, k2 - 1)] = scale * np.exp(-1j * g.theta_v[k1, k2 - 1])
    return H


def covariant_derivative(g: GaugeField, phi: np.ndarray) -> dict[Bond, complex]:
    """(d_g phi)(x,y) = 2^N (g_xy phi_y - phi_x) on positively oriented bonds.

    `phi` is a full (n+1, n+1) complex node array (boundary values included).
    """
    n = g.geom.n
    out = {}
    s = float(2 ** g.geom.N)
    for k2 in range(n + 1):
        for k1 in range(n):
            out[('h', k1, k2)] = s * (np.exp(1j * g.theta_h[k1, k2]) * phi[k1 + 1, k2]
                                      - phi[k1, k2])
    for k2 in range(n):
        for k1 in range(n + 1):
            out[('v', k1, k2)] = s * (np.exp(1j * g.theta_v[k1, k2]) * phi[k1, k2 + 1]
                                      - phi[k1, k2])
    return out


def interior_to_grid(geom: LatticeGeometry, vec: np.ndarray) -> np.ndarray:
    """Embed an interior-node vector into a full (n+1, n+1) grid, zero boundary."""
    n = geom.n
    grid = np.zeros((n + 1, n + 1), dtype=complex)
    grid[1:n, 1:n] = vec.reshape(n - 1, n - 1).T
    return grid


def psi(geom: LatticeGeometry, X: np.ndarray) -> GaugeField:
    """Axial-gauge field with plaquette holonomies e^{i X_p}.

    Horizontal and left-column bonds carry the identity; the vertical bond
    in column k, row j carries the cumulative plaquette angle
    sum_{c<k} X[c, j], wrapped to (-pi, pi].  `X` has shape (n, n), indexed
    [k1, k2] by the plaquette's lower-left corner.
    """
    n = geom.n
    X = np.asarray(X, dtype=float)
    if X.shape != (n, n):
        raise DomainError("plaquette angle array shape mismatch")
    tv = np.zeros((n + 1, n))
    tv[1:, :] = np.cumsum(X, axis=0)
    return GaugeField(geom, np.zeros((n, n + 1)), wrap_angle(tv))


def to_axial(g: GaugeField) -> tuple[GaugeTransform, GaugeField]:
    """The unique u with u(origin) = 1 making g^u tree-trivial (Fig.-2 tree:
    all horizontal bonds plus the left column)."""
    n = g.geom.n
    a = np.zeros((n + 1, n + 1))
    # left column upward: u_y = u_x g_xy along tree bonds
    a[0, 1:] = np.cumsum(g.theta_v[0, :])
    # rows rightward
    a[1:, :] = a[0, :][None, :] + np.cumsum(g.theta_h, axis=0)
    u = GaugeTransform(g.geom, wrap_angle(a))
    fixed = apply_gauge(g, u)
    # tree bonds are exactly zero up to wrapping of the cumulants; force the
    # stored representation to exact zeros to make axiality bit-exact
    fixed.theta_h[:, :] = 0.0
    fixed.theta_v[0, :] = 0.0
    return u, fixed


def is_axial(g: GaugeField, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(g.theta_h) <= tol)
                and np.all(np.abs(g.theta_v[0, :]) <= tol))


def random_closed_loop(geom: LatticeGeometry, rng: np.random.Generator,
                       walk_len: int = 20, interior: bool = False) -> LatticeLoop:
    """Closed random walk bridged back to its start by an L-shaped return.

    The walk stays inside the lattice (inside the interior if requested);
    the return path goes along x first, then along y.
    """
    n = geom.n
    lo, hi = (1, n - 1) if interior else (0, n)
    start = (int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)))
    nodes = [start]
    cur = start
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    for _ in range(walk_len):
        d1, d2 = steps[rng.integers(0, 4)]
        nxt = (cur[0] + d1, cur[1] + d2)
        if lo <= nxt[0] <= hi and lo <= nxt[1] <= hi:
            nodes.append(nxt)
            cur = nxt
    sx = 1 if start[0] > cur[0] else -1
    while cur[0] != start[0]:
        cur = (cur[0] + sx, cur[1])
        nodes.append(cur)
    sy = 1 if start[1] > cur[1] else -1
    while cur[1] != start[1]:
        cur = (cur[0], cur[1] + sy)
        nodes.append(cur)
    if len(nodes) == 1:
        # degenerate walk: backtracking 2-step loop
        mid = (start[0] + 1, start[1]) if start[0] < hi else (start[0] - 1, start[1])
        nodes = [start, mid, start]
    return LatticeLoop(tuple(nodes), geom.N)

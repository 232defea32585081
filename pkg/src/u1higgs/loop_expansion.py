"""Loop expansions of single-site-coupled exponential integrals on finite
multigraphs, for complex and real Hilbert spaces.

The integral of exp(sum of bond couplings) against per-site radial measures
equals a sum over multisets of lattice loops; each loop contributes the
trace of its ordered matrix product divided by its symmetry factor, and
every site contributes a moment coefficient C_j determined by the radial
measure and the sphere-moment constants.

Conventions:
  * inner products are conjugate-linear in the first slot, so a complex
    edge e: x->y with operator M contributes <phi_x, M phi_y> = phi_x^H M phi_y;
  * in the real case self-loop couplings enter the exponent with a factor
    1/2 (the single-edge path class has symmetry factor 2, which is how the
    expansion side accounts for it);
  * loop classes are edge sequences up to cyclic rotation (complex) or up
    to rotation and reversal with self-loop signs normalized (real).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .lattice_geom import DomainError, LatticeGeometry, ResourceError

DEFAULT_MAX_LEN = 16
DFS_NODE_BUDGET = 5_000_000
MULTISET_BUDGET = 2_000_000


class NumericalError(RuntimeError):
    """Raised when a quadrature fails to converge under refinement."""


# --------------------------------------------------------------------------
# multigraphs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiGraph:
    """Oriented finite multigraph; edges are (start, end) vertex pairs."""

    vertices: tuple
    edges: tuple[tuple, ...]  # (start, end), parallel edges and self-loops allowed

    def __post_init__(self):
        vs = set(self.vertices)
        for (a, b) in self.edges:
            if a not in vs or b not in vs:
                raise DomainError(f"edge ({a},{b}) references unknown vertex")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def is_self_loop(self, e: int) -> bool:
        a, b = self.edges[e]
        return a == b

    def self_loops(self) -> list[int]:
        return [e for e in range(len(self.edges)) if self.is_self_loop(e)]

    def out_edges(self, v) -> list[int]:
        return [e for e, (a, _) in enumerate(self.edges) if a == v]

    def in_edges(self, v) -> list[int]:
        return [e for e, (_, b) in enumerate(self.edges) if b == v]


# --------------------------------------------------------------------------
# radial measures
# --------------------------------------------------------------------------

class RadialMeasure:
    """Single-site radial measure exposed through its even moments
    j -> integral of s^(2j) d lambda(s).

    kinds: 'dirac0' (unit mass at radius 0), 'density' (a density w(s) ds
    on [0, inf) with better-than-Gaussian tails), 'discrete' (finitely many
    atoms (s_i, mass_i)).
    """

    def __init__(self, kind: str, density: Callable[[float], float] | None = None,
                 points: Sequence[tuple[float, float]] | None = None,
                 moment_fn: Callable[[int], float] | None = None,
                 name: str = ""):
        if kind not in ("dirac0", "density", "discrete"):
            raise DomainError(f"unknown radial measure kind {kind!r}")
        self.kind = kind
        self.density = density
        self.points = tuple(points) if points is not None else None
        self.moment_fn = moment_fn
        self.name = name or kind
        self._cache: dict[int, float] = {}

    @classmethod
    def dirac0(cls) -> "RadialMeasure":
        return cls("dirac0", name="dirac0")

    @classmethod
    def gaussian_type(cls) -> "RadialMeasure":
        """lambda(ds) = 2 s e^{-s^2} ds, a probability measure with moment(j) = j!."""
        return cls("density", density=lambda s: 2.0 * s * np.exp(-s * s),
                   moment_fn=lambda j: float(math.factorial(j)),
                   name="gaussian_type")

    @classmethod
    def from_density(cls, w: Callable[[float], float], name: str = "density") -> "RadialMeasure":
        return cls("density", density=w, name=name)

    @classmethod
    def discrete(cls, points: Sequence[tuple[float, float]]) -> "RadialMeasure":
        return cls("discrete", points=points, name="discrete")

    def moment(self, j: int) -> float:
        """integral of s^(2j) d lambda(s)."""
        if j < 0:
            raise DomainError("moment order must be nonnegative")
        if j in self._cache:
            return self._cache[j]
        if self.kind == "dirac0":
            out = 1.0 if j == 0 else 0.0
        elif self.kind == "discrete":
            out = float(sum(m * s ** (2 * j) for (s, m) in self.points))
        elif self.moment_fn is not None:
            out = float(self.moment_fn(j))
        else:
            out, err = integrate.quad(lambda s: self.density(s) * s ** (2 * j),
                                      0.0, np.inf, limit=200,
                                      epsabs=1e-13, epsrel=1e-11)
            if not np.isfinite(out) or err > 1e-8 * max(1.0, abs(out)):
                raise DomainError(
                    f"moment({j}) of {self.name} failed to converge (err={err})")
        self._cache[j] = out
        return out

    def radius_for(self, growth: float, tol: float = 1e-13) -> float:
        """Radius R with tail integral of e^{growth s^2} w(s) below tol (relative).

        Only meaningful for the 'density' kind; exploits the assumed
        better-than-Gaussian tails.
        """
        if self.kind != "density":
            raise DomainError("radius_for applies to density measures")

        def f(s):
            w = self.density(s)
            if w <= 0.0:
                return 0.0
            return math.exp(min(math.log(w) + growth * s * s, 700.0))

        total, _ = integrate.quad(f, 0.0, np.inf, limit=200)
        if not np.isfinite(total) or total >= 1e280:
            raise NumericalError("density integral with growth term diverges")
        R = 2.0
        for _ in range(60):
            tail, _ = integrate.quad(f, R, np.inf, limit=200)
            if tail <= tol * max(total, 1e-300):
                return R
            R *= 1.5
        raise NumericalError("could not find a truncation radius")

    def radius_for_moment(self, jmax: int, tol: float = 1e-13) -> float:
        """Radius R whose tail contribution to moment(jmax) is below tol."""
        if self.kind != "density":
            raise DomainError("radius_for_moment applies to density measures")
        f = lambda s: self.density(s) * s ** (2 * jmax)
        total = self.moment(jmax)
        R = 2.0
        for _ in range(60):
            tail, _ = integrate.quad(f, R, np.inf, limit=200)
            if tail <= tol * max(total, 1e-300):
                return R
            R *= 1.5
        raise NumericalError("could not find a truncation radius")


def check_log_convex_moments(lam: RadialMeasure, jmax: int = 10, tol: float = 1e-9) -> bool:
    """moment(j)^2 <= moment(j-1) moment(j+1) (Cauchy-Schwarz in L^2(lambda))."""
    m = [lam.moment(j) for j in range(jmax + 2)]
    return all(m[j] ** 2 <= m[j - 1] * m[j + 1] * (1 + tol) + 1e-300
               for j in range(1, jmax + 1))


# --------------------------------------------------------------------------
# sphere-moment constants and site coefficients
# --------------------------------------------------------------------------

def k_complex(N: int, d: int) -> float:
    """2 pi^d / (N + d - 1)!  (complex sphere-moment constant)."""
    if N < 0 or d < 1:
        raise DomainError("need N >= 0 and d >= 1")
    if N + d - 1 <= 170:
        return 2.0 * math.pi ** d / math.factorial(N + d - 1)
    return math.exp(math.log(2.0) + d * math.log(math.pi) - math.lgamma(N + d))


def k_real(N: int, d: int) -> float:
    """pi^(d/2) / (2^(N-1) Gamma(N + d/2))  (real sphere-moment constant)."""
    if N < 0 or d < 1:
        raise DomainError("need N >= 0 and d >= 1")
    if N + d / 2.0 <= 170.0:
        return math.pi ** (d / 2.0) / (2.0 ** (N - 1) * math.gamma(N + d / 2.0))
    return math.exp((d / 2.0) * math.log(math.pi) - (N - 1) * math.log(2.0)
                    - math.lgamma(N + d / 2.0))


def sphere_mass(fieldtag: str, d: int) -> float:
    """Total surface measure of the unit sphere of H (= K_0 moment normalizer)."""
    return k_complex(0, d) if fieldtag == "C" else k_real(0, d)


def c_coeff(j: int, lam: RadialMeasure, fieldtag: str, d: int) -> float:
    """C_j = K_j * moment(j) for the given field and dimension."""
    if fieldtag not in ("C", "R"):
        raise DomainError("field must be 'C' or 'R'")
    K = k_complex(j, d) if fieldtag == "C" else k_real(j, d)
    return K * lam.moment(j)


# --------------------------------------------------------------------------
# operator assignments
# --------------------------------------------------------------------------

@dataclass
class OperatorAssignment:
    """One d x d matrix per edge; real field enforces symmetric self-loops."""

    fieldtag: str  # 'C' | 'R'
    dim: int
    mats: tuple[np.ndarray, ...]
    graph: MultiGraph

    SYM_TOL = 1e-12

    def __post_init__(self):
        if self.fieldtag not in ("C", "R"):
            raise DomainError("field must be 'C' or 'R'")
        if len(self.mats) != self.graph.n_edges:
            raise DomainError("one matrix per edge required")
        mats = []
        for e, M in enumerate(self.mats):
            M = np.asarray(M, dtype=complex if self.fieldtag == "C" else float)
            if M.shape != (self.dim, self.dim):
                raise DomainError(f"matrix for edge {e} has shape {M.shape}")
            if (self.fieldtag == "R" and self.graph.is_self_loop(e)
                    and np.abs(M - M.T).max() > self.SYM_TOL):
                raise DomainError(f"self-loop matrix {e} must be symmetric")
            mats.append(M)
        self.mats = tuple(mats)

    @classmethod
    def scalars(cls, graph: MultiGraph, values, fieldtag: str) -> "OperatorAssignment":
        return cls(fieldtag, 1, tuple(np.array([[v]]) for v in values), graph)

    def norm_bound(self) -> float:
        """max over edges of the spectral norm of M_e."""
        if not self.mats:
            return 0.0
        return max(float(np.linalg.norm(M, 2)) for M in self.mats)


# --------------------------------------------------------------------------
# loop and path classes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexLoopClass:
    """Edge sequence up to cyclic rotation; canonical = lexicographically
    minimal rotation; S = number of rotations fixing the sequence."""

    edges: tuple[int, ...]
    S: int

    @property
    def length(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class RealLoopClass:
    """Signed edge sequence up to rotations and reversal, self-loop signs
    normalized to +1; S = number of group elements of C_n x Z_2 fixing it."""

    edges: tuple[tuple[int, int], ...]  # (edge id, +-1)
    S: int

    @property
    def length(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class ComplexPathClass:
    edges: tuple[int, ...]
    S: int = 1

    @property
    def length(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class RealPathClass:
    edges: tuple[tuple[int, int], ...]
    S: int = 1  # 2 for palindromes

    @property
    def length(self) -> int:
        return len(self.edges)


def _canon_rotation(seq: tuple) -> tuple:
    return min(seq[r:] + seq[:r] for r in range(len(seq)))


def _complex_symmetry(seq: tuple[int, ...]) -> int:
    n = len(seq)
    return sum(1 for r in range(n) if seq[r:] + seq[:r] == seq)


def _real_normalize(graph: MultiGraph, seq):
    return tuple((e, 1 if graph.is_self_loop(e) else p) for (e, p) in seq)


def _real_reverse(graph: MultiGraph, seq):
    return _real_normalize(graph, tuple((e, -p) for (e, p) in reversed(seq)))


def _real_orbit(graph: MultiGraph, seq):
    n = len(seq)
    rev = _real_reverse(graph, seq)
    for r in range(n):
        yield seq[r:] + seq[:r]
        yield rev[r:] + rev[:r]


def _real_canon_and_symmetry(graph: MultiGraph, seq):
    seq = _real_normalize(graph, seq)
    canon = min(_real_orbit(graph, seq))
    # stabilizer size: group elements (rotation, optional reversal) fixing it
    S = sum(1 for t in _real_orbit(graph, canon) if t == canon)
    return canon, S


def enumerate_loop_classes(G: MultiGraph, max_len: int, fieldtag: str,
                           restrict_to=None, node_budget: int = DFS_NODE_BUDGET):
    """One representative per loop equivalence class of length <= max_len.

    Classes are returned sorted by (length, canonical sequence).  Vertices
    may be restricted to a subset (loops must stay inside it).
    """
    if max_len < 1:
        return []
    if max_len > DEFAULT_MAX_LEN:
        raise ResourceError(f"max_len {max_len} exceeds the guard {DEFAULT_MAX_LEN}; "
                            "call with a smaller bound or use the internal "
                            "enumerator with an explicit node budget")
    return _enumerate_raw(G, max_len, fieldtag, restrict_to, node_budget)


def _enumerate_raw(G: MultiGraph, max_len: int, fieldtag: str,
                   restrict_to=None, node_budget: int = DFS_NODE_BUDGET):
    allowed = set(G.vertices if restrict_to is None else restrict_to)
    out_by_vertex: dict = {v: [] for v in allowed}
    for e, (a, b) in enumerate(G.edges):
        if a in allowed and b in allowed:
            out_by_vertex[a].append((e, 1, b))
            if fieldtag == "R" and a != b:
                out_by_vertex[b].append((e, -1, a))
    classes = {}
    budget = [node_budget]

    def dfs(start, cur, seq):
        if budget[0] <= 0:
            raise ResourceError(
                f"loop enumeration budget exhausted; partial count {len(classes)}")
        budget[0] -= 1
        if seq and cur == start:
            if fieldtag == "C":
                canon = _canon_rotation(tuple(seq))
                if canon not in classes:
                    classes[canon] = ComplexLoopClass(canon, _complex_symmetry(canon))
            else:
                canon, S = _real_canon_and_symmetry(G, tuple(seq))
                if canon not in classes:
                    classes[canon] = RealLoopClass(canon, S)
        if len(seq) >= max_len:
            return
        for (e, p, nxt) in out_by_vertex.get(cur, ()):
            if fieldtag == "C":
                seq.append(e)
            else:
                seq.append((e, p))
            dfs(start, nxt, seq)
            seq.pop()

    for v in sorted(allowed, key=repr):
        dfs(v, v, [])
    return sorted(classes.values(), key=lambda c: (c.length, c.edges))


def enumerate_path_classes(G: MultiGraph, max_len: int, fieldtag: str,
                           inner, endpoints, node_budget: int = DFS_NODE_BUDGET):
    """Path classes with endpoints in `endpoints`, intermediate vertices in
    `inner`; a path of length > 1 cannot start or end with a self-loop.

    Internal machinery for the partial expansion.
    """
    inner = set(inner)
    endpoints = set(endpoints)
    moves: dict = {}
    for e, (a, b) in enumerate(G.edges):
        moves.setdefault(a, []).append((e, 1, b))
        if fieldtag == "R" and a != b:
            moves.setdefault(b, []).append((e, -1, a))
    classes = {}
    budget = [node_budget]

    def record(seq):
        if fieldtag == "C":
            key = tuple(seq)
            if key not in classes:
                classes[key] = ComplexPathClass(key, 1)
        else:
            norm = _real_normalize(G, tuple(seq))
            rev = _real_reverse(G, norm)
            canon = min(norm, rev)
            if canon not in classes:
                classes[canon] = RealPathClass(canon, 2 if norm == rev else 1)

    def first_is_self(seq):
        e0 = seq[0] if fieldtag == "C" else seq[0][0]
        return G.is_self_loop(e0)

    def dfs(cur, seq):
        if budget[0] <= 0:
            raise ResourceError("path enumeration budget exhausted")
        budget[0] -= 1
        if seq and cur not in inner:
            return  # may only pass through expanded sites
        for (e, p, nxt) in moves.get(cur, ()):
            is_self = G.is_self_loop(e)
            seq.append(e if fieldtag == "C" else (e, p))
            if nxt in endpoints:
                # length > 1 paths cannot start or end with a self-loop
                if len(seq) == 1 or not (is_self or first_is_self(seq)):
                    record(seq)
            if len(seq) < max_len and not (len(seq) == 1 and is_self):
                dfs(nxt, seq)
            seq.pop()

    for v in sorted(endpoints, key=repr):
        dfs(v, [])
    return sorted(classes.values(), key=lambda c: (c.length, c.edges))


def loop_trace(cls, M: OperatorAssignment):
    """Trace of the ordered matrix product (transpose where a real edge is
    traversed against its orientation); value is representative-independent."""
    prod = np.eye(M.dim, dtype=complex if M.fieldtag == "C" else float)
    if isinstance(cls, (ComplexLoopClass, ComplexPathClass)):
        for e in cls.edges:
            prod = prod @ M.mats[e]
    else:
        for (e, p) in cls.edges:
            prod = prod @ (M.mats[e] if p == 1 else M.mats[e].T)
    tr = np.trace(prod)
    return complex(tr) if M.fieldtag == "C" else float(tr)


def path_matrix(cls, M: OperatorAssignment) -> np.ndarray:
    prod = np.eye(M.dim, dtype=complex if M.fieldtag == "C" else float)
    if isinstance(cls, ComplexPathClass):
        for e in cls.edges:
            prod = prod @ M.mats[e]
    else:
        for (e, p) in cls.edges:
            prod = prod @ (M.mats[e] if p == 1 else M.mats[e].T)
    return prod


def _loop_endpoints_and_incidence(G: MultiGraph, cls) -> dict:
    inc: dict = {}
    edges = [e if isinstance(e, int) else e[0] for e in cls.edges]
    for e in edges:
        a, b = G.edges[e]
        inc[a] = inc.get(a, 0) + 1
        inc[b] = inc.get(b, 0) + 1
    return inc


def _path_endpoints(G: MultiGraph, cls, fieldtag: str):
    if fieldtag == "C":
        first, last = cls.edges[0], cls.edges[-1]
        return G.edges[first][0], G.edges[last][1]
    (e0, p0), (e1, p1) = cls.edges[0], cls.edges[-1]
    a = G.edges[e0][0] if p0 == 1 else G.edges[e0][1]
    b = G.edges[e1][1] if p1 == 1 else G.edges[e1][0]
    return a, b


# --------------------------------------------------------------------------
# expansion evaluation
# --------------------------------------------------------------------------

@dataclass
class ExpansionResult:
    value: float | complex
    truncation: int
    ledger: list[tuple[str, int, float | complex]]
    tail_majorant: float

    def check_ledger(self) -> bool:
        total = sum(t[2] for t in self.ledger)
        return bool(np.isclose(total, self.value, rtol=0, atol=0)
                    or total == self.value)


def _class_signature(cls, mult: int) -> str:
    return f"{mult}x{list(cls.edges)}"


def _site_coeffs(G: MultiGraph, lam: dict, fieldtag: str, d: int, jmax: int):
    table = {}
    for v in G.vertices:
        table[v] = [c_coeff(j, lam[v], fieldtag, d) for j in range(jmax + 1)]
    return table


def expansion_value(G: MultiGraph, M: OperatorAssignment, lam,
                    max_total: int, multiset_budget: int = MULTISET_BUDGET
                    ) -> ExpansionResult:
    """Truncated loop-expansion sum over multisets of loop classes with
    total edge-traversal count <= max_total.

    `lam` maps each vertex to its RadialMeasure.  The returned ledger holds
    one entry per multiset (signature, total length, contribution) in the
    deterministic class order; `value` is their sum in that order.  The
    tail majorant bounds the dropped terms via norm bounds on the operators
    and a geometric series (infinite when no geometric bound applies).
    """
    lam = dict(lam)
    fieldtag, d = M.fieldtag, M.dim
    if max_total > 40:
        raise ResourceError("max_total too large for class enumeration")
    classes = _enumerate_raw(G, max_total, fieldtag)
    values = [loop_trace(c, M) / c.S for c in classes]
    incidences = [_loop_endpoints_and_incidence(G, c) for c in classes]
    jmax = max_total  # vertex incidences never exceed 2 * max_total
    coeffs = _site_coeffs(G, lam, fieldtag, d, jmax)

    ledger = []
    total_value = [0.0 + 0.0j if fieldtag == "C" else 0.0]

    def leaf(picked, inc):
        if len(ledger) >= multiset_budget:
            raise ResourceError("multiset enumeration budget exhausted")
        term = 1.0
        for v in G.vertices:
            k = inc.get(v, 0)
            if k % 2:
                raise AssertionError("odd incidence count in a closed multiset")
            term *= coeffs[v][k // 2]
        for (ci, mult) in picked:
            term = term * values[ci] ** mult / math.factorial(mult)
        sig = "|".join(_class_signature(classes[ci], m) for (ci, m) in picked) or "empty"
        tl = sum(classes[ci].length * m for (ci, m) in picked)
        ledger.append((sig, tl, term))
        total_value[0] = total_value[0] + term

    def dfs(i, budget, picked, inc):
        leaf(picked, inc)
        for ci in range(i, len(classes)):
            L = classes[ci].length
            if L > budget:
                break  # classes sorted by length
            added = {}
            mult = 0
            while (mult + 1) * L <= budget:
                mult += 1
                for v, k in incidences[ci].items():
                    inc[v] = inc.get(v, 0) + k
                    added[v] = added.get(v, 0) + k
                picked.append((ci, mult))
                dfs(ci + 1, budget - mult * L, picked, inc)
                picked.pop()
            for v, k in added.items():
                inc[v] -= k
                if inc[v] == 0:
                    del inc[v]

    dfs(0, max_total, [], {})

    value = total_value[0]
    if fieldtag == "R":
        value = float(np.real(value))
    tail = _tail_majorant(G, M, lam, max_total)
    return ExpansionResult(value, max_total, ledger, tail)


def _edge_transfer_radius(G: MultiGraph, fieldtag: str) -> float:
    """Spectral radius of the edge-chaining transfer matrix; bounds the
    number of closed edge sequences of length n by E * radius^n."""
    E = G.n_edges
    if E == 0:
        return 0.0
    if fieldtag == "C":
        A = np.zeros((E, E))
        for e, (_, b) in enumerate(G.edges):
            for f, (a2, _) in enumerate(G.edges):
                if b == a2:
                    A[e, f] = 1.0
    else:
        # doubled edge set: (e, +1) and (e, -1); self-loops only forward
        items = [(e, 1) for e in range(E)] + [
            (e, -1) for e in range(E) if not G.is_self_loop(e)]
        A = np.zeros((len(items), len(items)))
        ends = {i: (G.edges[e][1] if p == 1 else G.edges[e][0])
                for i, (e, p) in enumerate(items)}
        starts = {i: (G.edges[e][0] if p == 1 else G.edges[e][1])
                  for i, (e, p) in enumerate(items)}
        for i in ends:
            for j in starts:
                if ends[i] == starts[j]:
                    A[i, j] = 1.0
    return float(np.abs(np.linalg.eigvals(A)).max())


def _tail_majorant(G: MultiGraph, M: OperatorAssignment, lam, T: int) -> float:
    """Geometric majorant of the dropped multiset terms.

    The class sum at length n is bounded by d E (rho theta)^n / n with rho
    the edge-transfer spectral radius and theta the operator norm bound;
    the site factors by Cbar^|V|; the exp-series tail via a Cauchy estimate
    at a radius inside the disc of convergence.
    """
    E = G.n_edges
    theta = M.norm_bound()
    if E == 0 or theta == 0.0:
        return 0.0
    rho = _edge_transfer_radius(G, M.fieldtag)
    if rho == 0.0:
        return 0.0  # no closed walks at all
    q0 = rho * theta
    if q0 >= 1.0:
        return math.inf
    cbar = 0.0
    jcap = min(4 * T + 64, 150)  # float-safe; tail monotonicity checked below
    for v in G.vertices:
        cj = [c_coeff(j, lam[v], M.fieldtag, M.dim) for j in range(0, jcap)]
        top = max(cj)
        increasing_at_cap = any(cj[j + 1] > cj[j] * (1 + 1e-12) + 1e-300
                                for j in range(jcap - 8, jcap - 1))
        if increasing_at_cap:
            return math.inf  # coefficient growth not yet decayed: no bound
        cbar = max(cbar, top)
    cbar = max(cbar, 1e-300)
    r = math.sqrt(1.0 / q0)  # geometric mean of 1 and the radius 1/q0
    q = r * q0
    # class sums: sum over classes of length n of 1/S = tr(A^n)/n (complex,
    # orbit size n/S) or tr(A^n)/(2n) (real, orbit size 2n/S), so in both
    # cases f(r) <= -d E log(1 - q)
    f_r = -M.dim * E * math.log(1.0 - q)
    return (cbar ** len(G.vertices)) * math.exp(f_r) * r ** (-(T + 1)) / (1.0 - 1.0 / r)


# --------------------------------------------------------------------------
# brute-force quadrature oracle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    radial_nodes: int = 32
    angular_nodes: int = 32
    radius: float | None = None
    refine: bool = True
    rtol: float = 1e-7
    atol: float = 1e-12


@dataclass
class QuadratureResult:
    value: float | complex
    error_estimate: float


def _site_real_dim(fieldtag: str, d: int) -> int:
    return 2 * d if fieldtag == "C" else d


def _sphere_points(fieldtag: str, d: int, K: int):
    """Quadrature nodes/weights for the induced surface measure on the unit
    sphere of H; exact total mass."""
    if fieldtag == "C" and d == 1:
        theta = 2.0 * math.pi * np.arange(K) / K
        pts = np.exp(1j * theta)[:, None]
        wts = np.full(K, 2.0 * math.pi / K)
        return pts, wts
    if fieldtag == "R" and d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if fieldtag == "R" and d == 2:
        theta = 2.0 * math.pi * np.arange(K) / K
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        wts = np.full(K, 2.0 * math.pi / K)
        return pts, wts
    if fieldtag == "C" and d == 2:
        # Hopf coordinates: (cos(eta) e^{i xi1}, sin(eta) e^{i xi2}),
        # surface measure = (1/2) dt dxi1 dxi2 with t = sin^2(eta)
        kt = max(4, K // 4)
        t, wt = np.polynomial.legendre.leggauss(kt)
        t = 0.5 * (t + 1.0)
        wt = 0.5 * wt
        xi = 2.0 * math.pi * np.arange(K) / K
        wxi = 2.0 * math.pi / K
        pts, wts = [], []
        for ti, wi in zip(t, wt):
            c, s = math.sqrt(1.0 - ti), math.sqrt(ti)
            for a in xi:
                for b in xi:
                    pts.append([c * np.exp(1j * a), s * np.exp(1j * b)])
                    wts.append(0.5 * wi * wxi * wxi)
        return np.array(pts), np.array(wts)
    raise ResourceError(f"no sphere quadrature for field {fieldtag}, d={d}")


def _site_grid(lam: RadialMeasure, fieldtag: str, d: int, spec: QuadratureSpec,
               growth: float):
    if lam.kind == "dirac0":
        pts = np.zeros((1, d), dtype=complex if fieldtag == "C" else float)
        return pts, np.array([sphere_mass(fieldtag, d)])
    sph_pts, sph_wts = _sphere_points(fieldtag, d, spec.angular_nodes)
    if lam.kind == "discrete":
        radii = np.array([s for (s, _) in lam.points])
        rw = np.array([m for (_, m) in lam.points])
    else:
        R = spec.radius if spec.radius is not None else lam.radius_for(growth)
        x, w = np.polynomial.legendre.leggauss(spec.radial_nodes)
        radii = 0.5 * R * (x + 1.0)
        rw = 0.5 * R * w * np.array([lam.density(s) for s in radii])
    pts = (radii[:, None, None] * sph_pts[None, :, :]).reshape(-1, d)
    wts = (rw[:, None] * sph_wts[None, :]).reshape(-1)
    return pts, wts


def _integrate_once(G: MultiGraph, M: OperatorAssignment, lam, spec: QuadratureSpec):
    fieldtag, d = M.fieldtag, M.dim
    verts = list(G.vertices)
    growth = sum(float(np.linalg.norm(m, 2)) for m in M.mats)
    grids = {v: _site_grid(lam[v], fieldtag, d, spec, growth) for v in verts}
    shapes = [len(grids[v][1]) for v in verts]
    total = int(np.prod(shapes))
    if total > 40_000_000:
        raise ResourceError(f"quadrature grid of {total} points too large")
    exponent = np.zeros(shapes, dtype=complex if fieldtag == "C" else float)
    for e, (a, b) in enumerate(G.edges):
        ia, ib = verts.index(a), verts.index(b)
        Me = M.mats[e]
        pa, pb = grids[a][0], grids[b][0]
        conj = pa.conj() if fieldtag == "C" else pa
        shape = [1] * len(verts)
        if G.is_self_loop(e):
            term = np.einsum("id,de,ie->i", conj, Me, pa)
            if fieldtag == "R":
                term = 0.5 * term
            shape[ia] = shapes[ia]
        else:
            term = np.einsum("id,de,je->ij", conj, Me, pb)
            shape[ia], shape[ib] = shapes[ia], shapes[ib]
            if ia > ib:
                term = term.T
        exponent = exponent + term.reshape(shape)
    wgrid = np.ones(shapes)
    for i, v in enumerate(verts):
        shape = [1] * len(verts)
        shape[i] = shapes[i]
        wgrid = wgrid * grids[v][1].reshape(shape)
    vals = np.exp(exponent) * wgrid
    out = vals.sum()
    return complex(out) if fieldtag == "C" else float(out)


def brute_force_integral(G: MultiGraph, M: OperatorAssignment, lam,
                         spec: QuadratureSpec = QuadratureSpec()) -> QuadratureResult:
    """Tensor-product quadrature of the exponential integral (the expansion
    theorems' left-hand side, with the real-case 1/2 on self-loops).

    Refinement doubles the node counts; the difference is the reported
    error estimate and a non-convergent refinement raises NumericalError.
    """
    lam = dict(lam)
    dims = sum(_site_real_dim(M.fieldtag, M.dim)
               for v in G.vertices if lam[v].kind != "dirac0")
    if dims > 6:
        raise ResourceError(f"total real dimension {dims} exceeds the guard 6")
    v1 = _integrate_once(G, M, lam, spec)
    if not spec.refine:
        return QuadratureResult(v1, math.nan)
    fine = QuadratureSpec(2 * spec.radial_nodes, 2 * spec.angular_nodes,
                          spec.radius, False, spec.rtol, spec.atol)
    v2 = _integrate_once(G, M, lam, fine)
    err = abs(v2 - v1)
    if err > max(spec.atol, spec.rtol * abs(v2)):
        raise NumericalError(
            f"quadrature not converged: coarse={v1}, fine={v2}, err={err}")
    return QuadratureResult(v2, err)


# --------------------------------------------------------------------------
# partial (mid-induction) expansion
# --------------------------------------------------------------------------

def partial_expansion(G: MultiGraph, M: OperatorAssignment, lam, Vbar,
                      max_total: int, spec: QuadratureSpec = QuadratureSpec()
                      ) -> float | complex:
    """Mid-induction identity: loops inside Vbar are expanded, the remaining
    sites W = V - Vbar keep their integrals, evaluated by quadrature of the
    product of path factors.

    Vbar = all vertices reduces to expansion_value; Vbar = empty set is the
    plain expansion of the exponential integrated by quadrature.
    """
    lam = dict(lam)
    fieldtag, d = M.fieldtag, M.dim
    Vbar = set(Vbar)
    W = [v for v in G.vertices if v not in Vbar]
    dims = sum(_site_real_dim(fieldtag, d) for v in W if lam[v].kind != "dirac0")
    if dims > 6:
        raise ResourceError(f"remaining-site dimension {dims} exceeds the guard 6")

    loops = _enumerate_raw(G, max_total, fieldtag, restrict_to=Vbar)
    paths = enumerate_path_classes(G, max_total, fieldtag, inner=Vbar, endpoints=W)
    loop_vals = [loop_trace(c, M) / c.S for c in loops]
    loop_inc = [_loop_endpoints_and_incidence(G, c) for c in loops]
    path_inc = [_loop_endpoints_and_incidence(G, c) for c in paths]

    # path products are polynomial in phi of degree <= 2 max_total per site:
    # enough angular nodes make the sphere quadrature exact, and the radial
    # radius must capture moment(max_total)
    def grid_for(v):
        lam_v = lam[v]
        radius = spec.radius
        if lam_v.kind == "density" and radius is None:
            radius = lam_v.radius_for_moment(max(1, max_total))
        s = QuadratureSpec(max(spec.radial_nodes, max_total + 8),
                           max(spec.angular_nodes, 2 * max_total + 4),
                           radius, spec.refine, spec.rtol, spec.atol)
        return _site_grid(lam_v, fieldtag, d, s, growth=0.0)

    grids = {v: grid_for(v) for v in W}
    shapes = [len(grids[v][1]) for v in W]
    wgrid = np.ones(shapes) if W else None
    for i, v in enumerate(W):
        shape = [1] * len(W)
        shape[i] = shapes[i]
        wgrid = wgrid * grids[v][1].reshape(shape)

    # per path class: gamma(M, phi)/S as an array over the W grid
    path_arrays = []
    for c in paths:
        a, b = _path_endpoints(G, c, fieldtag)
        mat = path_matrix(c, M)
        pa, pb = grids[a][0], grids[b][0]
        if fieldtag == "C":
            arr2 = np.einsum("id,de,je->ij", pa.conj(), mat, pb)
        else:
            arr2 = np.einsum("id,de,je->ij", pa, mat, pb)
        ia, ib = W.index(a), W.index(b)
        shape = [1] * len(W)
        if ia == ib:
            arr = np.diagonal(arr2)
            shape[ia] = shapes[ia]
        else:
            arr = arr2 if ia < ib else arr2.T
            shape[ia], shape[ib] = shapes[ia], shapes[ib]
        path_arrays.append((arr / c.S).reshape(shape))

    jmax = max_total
    coeffs = _site_coeffs(G, {v: lam[v] for v in G.vertices}, fieldtag, d, jmax)

    items = ([("L", i, loops[i].length) for i in range(len(loops))]
             + [("P", i, paths[i].length) for i in range(len(paths))])
    items.sort(key=lambda t: t[2])

    total = [0.0 + 0.0j if fieldtag == "C" else 0.0]

    def leaf(scalar, integrand, fact, inc):
        for v in Vbar:
            k = inc.get(v, 0)
            if k % 2:
                raise AssertionError("odd incidence at an expanded site")
            scalar = scalar * coeffs[v][k // 2]
        if W:
            scalar = scalar * (wgrid.sum() if integrand is None
                               else (integrand * wgrid).sum())
        total[0] = total[0] + scalar / fact

    def dfs(i, budget, scalar, integrand, fact, inc):
        leaf(scalar, integrand, fact, inc)
        for idx in range(i, len(items)):
            kind, ci, L = items[idx]
            if L > budget:
                break
            inc_c = loop_inc[ci] if kind == "L" else path_inc[ci]
            added = {}
            mult = 0
            sc, ig, fc = scalar, integrand, fact
            while (mult + 1) * L <= budget:
                mult += 1
                fc = fc * mult  # running multiplicity factorial
                for v, k in inc_c.items():
                    inc[v] = inc.get(v, 0) + k
                    added[v] = added.get(v, 0) + k
                if kind == "L":
                    sc = sc * loop_vals[ci]
                else:
                    f = path_arrays[ci]
                    ig = f.copy() if ig is None else ig * f
                dfs(idx + 1, budget - mult * L, sc, ig, fc, inc)
            for v, k in added.items():
                inc[v] -= k
                if inc[v] == 0:
                    del inc[v]

    dfs(0, max_total, 1.0, None, 1, {})
    out = total[0]
    if fieldtag == "R":
        out = float(np.real(out))
    return out


# --------------------------------------------------------------------------
# positive-type coefficients of the Higgs weight
# --------------------------------------------------------------------------

HIGGS_MAX_LEN = 8


@dataclass
class HiggsLoopCoefficients:
    """Truncated expansion of the Higgs weight grouped by winding vector.

    `coeffs` maps a flattened integer winding vector (row-major tuple over
    plaquettes) to a nonnegative coefficient; evaluating against a gauge
    field sums coeff * Re(hol) over the stored winding vectors.
    """

    geom: LatticeGeometry
    max_len: int
    coeffs: dict[tuple[int, ...], float]

    def evaluate(self, g) -> float:
        ang = g.plaquette_angles().T.reshape(-1)  # geometry row-major order
        total = 0.0
        for w, c in self.coeffs.items():
            total += c * math.cos(float(np.dot(np.array(w, dtype=float), ang)))
        return total

    def evaluate_angles(self, X: np.ndarray) -> float:
        """Evaluate at plaquette angles directly (X flattened row-major)."""
        x = np.asarray(X, dtype=float).reshape(-1)
        total = 0.0
        for w, c in self.coeffs.items():
            total += c * math.cos(float(np.dot(np.array(w, dtype=float), x)))
        return total

    def weight_matrix(self):
        """(W, n_plaq) winding matrix and coefficient vector, for vectorized
        evaluation over many configurations."""
        ws = np.array([list(w) for w in self.coeffs], dtype=float)
        cs = np.array(list(self.coeffs.values()))
        return ws, cs


def interior_bond_graph(geom: LatticeGeometry) -> MultiGraph:
    """Vertices: interior nodes; edges: both orientations of every bond with
    both endpoints interior."""
    verts = tuple(geom.interior_nodes())
    vset = set(verts)
    edges = []
    for (k1, k2) in verts:
        for nb in ((k1 + 1, k2), (k1, k2 + 1)):
            if nb in vset:
                edges.append(((k1, k2), nb))
                edges.append((nb, (k1, k2)))
    return MultiGraph(verts, tuple(edges))


def higgs_site_measure(pot) -> RadialMeasure:
    """lambda(ds) = 2 s exp(-V(s) - 4 s^2) ds: the single-site measure of the
    Higgs weight in the radial convention used throughout this package."""
    V = getattr(pot, "evaluate", pot)
    return RadialMeasure.from_density(
        lambda s: 2.0 * s * math.exp(-V(s) - 4.0 * s * s), name="higgs_site")


def higgs_loop_coefficients(geom: LatticeGeometry, pot, max_len: int
                            ) -> HiggsLoopCoefficients:
    """Coefficients c_w >= 0 with D_trunc(g) = sum_w c_w Re hol_w(g).

    Runs the complex scalar expansion on the interior bond graph with the
    Higgs site measure at every interior node, truncated at total traversal
    count `max_len`, and groups multiset contributions by the total winding
    vector of their loops.
    """
    from .gauge_core import LatticeLoop, winding_vector

    if geom.interior_node_count == 0:
        raise DomainError("lattice has no interior nodes")
    if max_len > HIGGS_MAX_LEN:
        raise ResourceError(f"max_len {max_len} exceeds the guard {HIGGS_MAX_LEN}")
    G = interior_bond_graph(geom)
    lam = higgs_site_measure(pot)
    classes = _enumerate_raw(G, max_len, "C") if G.edges else []
    cj = [c_coeff(j, lam, "C", 1) for j in range(max_len + 1)]

    n = geom.n
    windings = []
    incidences = []
    for c in classes:
        nodes = [G.edges[c.edges[0]][0]]
        for e in c.edges:
            nodes.append(G.edges[e][1])
        w = winding_vector(LatticeLoop(tuple(nodes), geom.N))
        windings.append(w.T.reshape(-1))  # geometry row-major plaquette order
        incidences.append(_loop_endpoints_and_incidence(G, c))

    c0_all = cj[0] ** len(G.vertices)
    coeffs: dict[tuple[int, ...], float] = {}
    zero_w = np.zeros(n * n, dtype=np.int64)

    def leaf(picked, inc, wsum):
        term = c0_all
        for v, k in inc.items():
            term = term / cj[0] * cj[k // 2]
        for (ci, mult) in picked:
            term = term / math.factorial(mult) / float(classes[ci].S) ** mult
        key = tuple(int(x) for x in wsum)
        coeffs[key] = coeffs.get(key, 0.0) + term

    def dfs(i, budget, picked, inc, wsum):
        leaf(picked, inc, wsum)
        for ci in range(i, len(classes)):
            L = classes[ci].length
            if L > budget:
                break
            added = {}
            mult = 0
            while (mult + 1) * L <= budget:
                mult += 1
                for v, k in incidences[ci].items():
                    inc[v] = inc.get(v, 0) + k
                    added[v] = added.get(v, 0) + k
                wsum += windings[ci]
                picked.append((ci, mult))
                dfs(ci + 1, budget - mult * L, picked, inc, wsum)
                picked.pop()
            wsum -= mult * windings[ci]
            for v, k in added.items():
                inc[v] -= k
                if inc[v] == 0:
                    del inc[v]

    dfs(0, max_len, [], {}, zero_w)
    return HiggsLoopCoefficients(geom, max_len, coeffs)

"""Constructive gauge fixing.

Pipeline: measure the non-flatness [g]_alpha, choose the dyadic scale m,
coarse-restrict the field to scale m, apply the axial gauge there, then
extend the transform scale by scale with the dyadic Landau construction
(midpoint halving plus the centre-cell alpha formula with the zero-sum
auxiliary condition).

Scale bookkeeping: a scale-n bond value of g is the path-ordered product
of the fine bond values along the straight segment (angles add); only the
endpoint values of a gauge transform enter coarse bond values, so the
construction below needs u only at the points created so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gauge_core import GaugeField, GaugeTransform, apply_gauge, log_u1, to_axial, wrap_angle
from .lattice_geom import DomainError, LatticeGeometry, Rect, build_lattice
from .norms import log_oneform, norm_gr, seminorm_rho

TWO_PI = 2.0 * math.pi
SMALLNESS_TOL = 1e-9  # |sum beta_i mod 2pi| beyond this is a geometry bug


@dataclass
class FlatnessReport:
    alpha: float
    value: float
    argmax: Rect | None


def flatness(g: GaugeField, alpha: float) -> FlatnessReport:
    """[g]_alpha = sup over rectangles of |r|^(-alpha/2) |sum_p log g(dp)|.

    Exhaustive over all rectangles via a summed-area table of the plaquette
    log-holonomies.
    """
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    n = g.geom.n
    P = g.plaquette_angles()
    S = np.zeros((n + 1, n + 1))
    S[1:, 1:] = P.cumsum(axis=0).cumsum(axis=1)
    pow_neg = np.ones(n + 1)
    pow_neg[1:] = np.arange(1, n + 1, dtype=float) ** (-alpha / 2.0)
    area_scale = (4.0 ** (-g.geom.N)) ** (-alpha / 2.0)
    y1, y2 = np.triu_indices(n + 1, 1)
    ypow = pow_neg[y2 - y1]
    best, arg = -1.0, None
    for x1 in range(n):
        D = S[x1 + 1:, :] - S[x1, :]                      # (n - x1, n+1)
        vals = np.abs(D[:, y2] - D[:, y1])                # (n - x1, npairs)
        vals *= pow_neg[np.arange(x1 + 1, n + 1) - x1][:, None] * ypow[None, :]
        i = int(np.argmax(vals))
        r, c = divmod(i, vals.shape[1])
        if vals[r, c] > best:
            best = float(vals[r, c])
            arg = Rect(x1, int(y1[c]), r + 1, int(y2[c] - y1[c]), g.geom.N)
    return FlatnessReport(alpha, best * area_scale, arg)


def rect_plaquette_log_sum(g: GaugeField, r: Rect) -> float:
    """sum_{p in r} log g(dp) (no outer wrap)."""
    P = g.plaquette_angles()
    return float(P[r.x0:r.x0 + r.w, r.y0:r.y0 + r.h].sum())


def coarse_restrict(g: GaugeField, m: int) -> GaugeField:
    """Scale-m field whose bond values are path-ordered products of the fine
    bond values along straight segments."""
    N = g.geom.N
    if not (1 <= m <= N):
        raise DomainError(f"coarse scale m={m} must be in [1, {N}]")
    if m == N:
        return g.copy()
    s = 1 << (N - m)
    nc = 1 << m
    th = g.theta_h.reshape(nc, s, g.geom.n + 1).sum(axis=1)[:, ::s]
    tv = g.theta_v.reshape(g.geom.n + 1, nc, s).sum(axis=2)[::s, :]
    return GaugeField(build_lattice(m), wrap_angle(th), wrap_angle(tv))


def axial_fix(g_m: GaugeField) -> GaugeTransform:
    """Transform with u(0)=1 putting a scale-m field in the axial gauge."""
    u, _ = to_axial(g_m)
    return u


def thin_rect_holonomy_sup(g_m: GaugeField, alpha: float) -> float:
    """sup over m-thin rectangles of |r|^(-alpha/2) |log g(dr)|.

    `log g(dr)` is the principal log of the boundary holonomy (axial-gauge
    lemma constant), not the plaquette log sum.
    """
    n = g_m.geom.n
    N = g_m.geom.N
    th, tv = g_m.theta_h, g_m.theta_v
    ph = np.zeros((n + 1, n + 1))
    ph[1:, :] = np.cumsum(th, axis=0)    # [k1, row]
    pv = np.zeros((n + 1, n + 1))
    pv[:, 1:] = np.cumsum(tv, axis=1)    # [column, k2]
    best = 0.0
    for k in range(1, n + 1):            # long-side length in units
        area_pow = (k * 4.0 ** (-N)) ** (-alpha / 2.0)
        # horizontal thin rect [x0, x0+k] x [y0, y0+1]
        for x0 in range(0, n - k + 1):
            bottom = ph[x0 + k, :-1] - ph[x0, :-1]
            top = ph[x0 + k, 1:] - ph[x0, 1:]
            right = tv[x0 + k, :]
            left = tv[x0, :]
            val = np.abs(log_u1(bottom + right - top - left)).max()
            best = max(best, float(val) * area_pow)
        # vertical thin rect [x0, x0+1] x [y0, y0+k]
        for y0 in range(0, n - k + 1):
            left = pv[:-1, y0 + k] - pv[:-1, y0]
            right = pv[1:, y0 + k] - pv[1:, y0]
            bottom = th[:, y0]
            top = th[:, y0 + k]
            val = np.abs(log_u1(bottom + right - top - left)).max()
            best = max(best, float(val) * area_pow)
    return best


@dataclass
class LandauDiagnostics:
    violations_per_scale: dict[int, int] = field(default_factory=dict)
    cells_per_scale: dict[int, int] = field(default_factory=dict)
    max_smallness_residual: float = 0.0  # |sum beta - 2 pi k| observed

    @property
    def violations(self) -> int:
        return sum(self.violations_per_scale.values())


def landau_extend(g: GaugeField, u_m: GaugeTransform, m: int
                  ) -> tuple[GaugeTransform, LandauDiagnostics]:
    """Extend a scale-m transform to the full lattice, scale by scale.

    At each scale n = m+1..N, midpoints of coarse bonds split the coarse
    log evenly; cell centres solve the four-plaquette system with the
    zero-sum alpha formula when the cell is small (sum of beta_i vanishes
    exactly rather than just mod 2 pi), else u(x) = 1 and a violation is
    recorded.  The alpha identities hold exactly: they are evaluated in
    rational arithmetic on the float inputs.
    """
    N = g.geom.N
    if not (1 <= m <= N):
        raise DomainError("scale m out of range")
    if u_m.geom.N != m:
        raise DomainError("transform scale does not match m")
    n_fine = g.geom.n
    u = np.full((n_fine + 1, n_fine + 1), np.nan)
    sm = 1 << (N - m)
    u[::sm, ::sm] = u_m.angles
    diag = LandauDiagnostics()

    # fine-angle prefix sums for straight-path coarse bond values
    ph = np.zeros((n_fine + 1, n_fine + 1))
    ph[1:, :] = np.cumsum(g.theta_h, axis=0)   # [k1, k2]: sum over columns < k1
    pv = np.zeros((n_fine + 1, n_fine + 1))
    pv[:, 1:] = np.cumsum(g.theta_v, axis=1)   # [k1, k2]: sum over rows < k2

    def seg_h(x0, x1, y):
        return ph[x1, y] - ph[x0, y]

    def seg_v(x, y0, y1):
        return pv[x, y1] - pv[x, y0]

    for scale in range(m + 1, N + 1):
        s = 1 << (N - scale)
        coarse = 2 * s
        nc = 1 << (scale - 1)  # coarse cells per side
        # --- midpoints of horizontal coarse bonds
        for j in range(nc + 1):
            y = j * coarse
            for i in range(nc):
                a, b, x = i * coarse, (i + 1) * coarse, i * coarse + s
                t_ax = seg_h(a, x, y)
                t_xb = seg_h(x, b, y)
                L = wrap_angle(u[a, y] + (t_ax + t_xb) - u[b, y])
                u[x, y] = wrap_angle(u[a, y] + t_ax - 0.5 * L)
        # --- midpoints of vertical coarse bonds
        for i in range(nc + 1):
            x = i * coarse
            for j in range(nc):
                a, b, ymid = j * coarse, (j + 1) * coarse, j * coarse + s
                t_ax = seg_v(x, a, ymid)
                t_xb = seg_v(x, ymid, b)
                L = wrap_angle(u[x, a] + (t_ax + t_xb) - u[x, b])
                u[x, ymid] = wrap_angle(u[x, a] + t_ax - 0.5 * L)
        # --- cell centres
        for i in range(nc):
            for j in range(nc):
                cx, cy = i * coarse + s, j * coarse + s
                _assign_centre(u, g, ph, pv, cx, cy, s, scale, diag)
        diag.cells_per_scale[scale] = nc * nc
    if np.isnan(u[0, 0]) or np.isnan(u).any():
        raise DomainError("landau extension left unassigned nodes")
    return GaugeTransform(g.geom, wrap_angle(u)), diag


def _assign_centre(u, g, ph, pv, cx, cy, s, scale, diag):
    """Solve the four-plaquette system at centre (cx, cy) (fine units)."""

    def seg_h(x0, x1, y):
        return ph[x1, y] - ph[x0, y]

    def seg_v(x, y0, y1):
        return pv[x, y1] - pv[x, y0]

    def plaq_log(x0, y0):
        # scale-`scale` plaquette holonomy, lower-left (x0, y0), side s
        raw = (seg_h(x0, x0 + s, y0) + seg_v(x0 + s, y0, y0 + s)
               - seg_h(x0, x0 + s, y0 + s) - seg_v(x0, y0, y0 + s))
        return float(log_u1(raw))

    def bond_log_u(x0, y0, x1, y1):
        # log (g^u) of the oriented scale-n bond (x0,y0)->(x1,y1)
        if y0 == y1:
            t = seg_h(min(x0, x1), max(x0, x1), y0)
            t = t if x1 > x0 else -t
        else:
            t = seg_v(x0, min(y0, y1), max(y0, y1))
            t = t if y1 > y0 else -t
        return float(log_u1(u[x0, y0] + t - u[x1, y1]))

    p_logs = [plaq_log(cx, cy), plaq_log(cx - s, cy),
              plaq_log(cx - s, cy - s), plaq_log(cx, cy - s)]
    b = [
        bond_log_u(cx + s, cy, cx + s, cy + s),      # b1: y1 -> top-right
        bond_log_u(cx + s, cy + s, cx, cy + s),      # b2: top-right -> y2
        bond_log_u(cx, cy + s, cx - s, cy + s),      # b3: y2 -> top-left
        bond_log_u(cx - s, cy + s, cx - s, cy),      # b4: top-left -> y3
        bond_log_u(cx - s, cy, cx - s, cy - s),      # b5: y3 -> bottom-left
        bond_log_u(cx - s, cy - s, cx, cy - s),      # b6: bottom-left -> y4
        bond_log_u(cx, cy - s, cx + s, cy - s),      # b7: y4 -> bottom-right
        bond_log_u(cx + s, cy - s, cx + s, cy),      # b8: bottom-right -> y1
    ]
    beta = [p_logs[i] - b[2 * i] - b[2 * i + 1] for i in range(4)]
    total = sum(beta)
    k = round(total / TWO_PI)
    residual = abs(total - k * TWO_PI)
    diag.max_smallness_residual = max(diag.max_smallness_residual, residual)
    if residual > SMALLNESS_TOL:
        raise DomainError(
            f"sum of beta_i = {total} not a multiple of 2 pi at ({cx},{cy})")
    if k != 0:
        diag.violations_per_scale[scale] = diag.violations_per_scale.get(scale, 0) + 1
        u[cx, cy] = 0.0
        return
    # exact rational solve: subtract the rounding residual so the zero-sum
    # condition holds identically, then apply the 3/8-1/8 formula
    fb = [Fraction(x) for x in beta]
    mean = sum(fb) / 4
    fb = [x - mean for x in fb]
    alpha = [Fraction(3, 8) * (fb[i] - fb[i - 1])
             + Fraction(1, 8) * (fb[(i + 1) % 4] - fb[(i + 2) % 4])
             for i in range(4)]
    assert sum(alpha) == 0
    for i in range(4):
        assert alpha[i] - alpha[(i + 1) % 4] == fb[i]
    # u(x) from alpha_1 via g^u_{x y_1} = e^{i alpha_1}
    t_xy1 = ph[cx + s, cy] - ph[cx, cy]
    u[cx, cy] = wrap_angle(float(alpha[0]) - t_xy1 + u[cx + s, cy])


def landau_alpha_formula(beta):
    """Exact centre-cell solution: alpha_i = 3/8 (b_i - b_{i-1}) + 1/8 (b_{i+1} - b_{i+2}).

    `beta` is a length-4 sequence (Fractions or floats with exact sum 0).
    """
    beta = [Fraction(x) for x in beta]
    if sum(beta) != 0:
        raise DomainError("alpha formula requires sum beta_i = 0 exactly")
    return [Fraction(3, 8) * (beta[i] - beta[i - 1])
            + Fraction(1, 8) * (beta[(i + 1) % 4] - beta[(i + 2) % 4])
            for i in range(4)]


@dataclass
class GaugeFixReport:
    alpha: float
    flatness_value: float
    flatness_argmax: Rect | None
    theorem_m: int
    used_m: int | None
    fallback: bool
    forced_scale: bool
    violations: int
    smallness_violations_per_scale: dict[int, int]
    axial_thin_sup: float | None       # C in the axial-gauge lemma, at scale m
    axial_max_bond_log: float | None   # max_b |log (g_m^u)_b| after axial fix
    hypothesis_simple: bool | None     # [g]_a 2^{-(m+1)a/2} < pi
    hypothesis_landau: bool | None     # max([g]_a 2^{-(m+1)a}, maxlog/2) < pi/8
    norms: dict[float, dict]           # beta -> {norm_gr, seminorm_rho, norm_full}
    trivial_bound: dict[float, float]  # beta -> 2 pi 2^{N(1+beta/2)}
    gr_bound: dict[tuple, float]       # (beta, kappa) -> Landau lemma (b) bound


def theorem_scale(flatness_value: float, alpha: float) -> int:
    """Smallest integer m >= 4 with 2^m > (8/pi [g]_alpha)^(2/alpha)."""
    if alpha <= 0:
        raise DomainError("alpha must be positive for the scale rule")
    try:
        t = (8.0 / math.pi * flatness_value) ** (2.0 / alpha)
    except OverflowError:
        return 10_000  # effectively: always fall back
    if not math.isfinite(t):
        return 10_000
    m = 4 if t < 16.0 else int(math.floor(math.log2(t))) + 1
    while not (2.0 ** m > t):
        m += 1
    return m


def gauge_fix(g: GaugeField, alpha: float, betas=(0.5,), kappa: float = 0.25,
              force_m: int | None = None,
              rho_kwargs: dict | None = None) -> tuple[GaugeTransform, GaugeFixReport]:
    """Full gauge-fixing pipeline with fallback.

    With the default `force_m=None` the scale is the theorem's: the smallest
    m >= 4 with 2^m > (8/pi [g]_alpha)^(2/alpha); if that exceeds N the
    fallback u = 1 is returned with the trivial norm bound.  `force_m` runs
    the pipeline at a prescribed scale m <= N regardless (diagnostic use;
    the fallback flag still reports the theorem condition).
    """
    N = g.geom.N
    fr = flatness(g, alpha)
    m_theorem = theorem_scale(fr.value, alpha)
    used_m = force_m if force_m is not None else (m_theorem if m_theorem <= N else None)
    if used_m is not None and not (1 <= used_m <= N):
        raise DomainError(f"forced scale {used_m} out of range at N={N}")
    fallback = m_theorem > N
    rho_kwargs = rho_kwargs or {}

    axial_sup = axial_max = None
    hyp_simple = hyp_landau = None
    violations_per_scale: dict[int, int] = {}
    if used_m is None:
        u = GaugeTransform.identity(g.geom)
    else:
        g_m = coarse_restrict(g, used_m)
        u_m = axial_fix(g_m)
        g_m_fixed = apply_gauge(g_m, u_m)
        axial_sup = thin_rect_holonomy_sup(g_m, alpha)
        axial_max = g_m_fixed.max_bond_log()
        hyp_simple = fr.value * 2.0 ** (-(used_m + 1) * alpha / 2.0) < math.pi
        hyp_landau = max(fr.value * 2.0 ** (-(used_m + 1) * alpha),
                         axial_max / 2.0) < math.pi / 8.0
        if used_m == N:
            u, diag = u_m, LandauDiagnostics()
        else:
            u, diag = landau_extend(g, u_m, used_m)
        violations_per_scale = diag.violations_per_scale

    fixed = apply_gauge(g, u)
    A = log_oneform(fixed)
    norms_out, trivial, gr_bound = {}, {}, {}
    c = math.pi / 8.0
    for beta in betas:
        gr = norm_gr(A, beta)
        sr = seminorm_rho(A, beta, **rho_kwargs)
        norms_out[beta] = {"norm_gr": gr, "seminorm_rho": sr, "norm_full": gr + sr}
        trivial[beta] = 2.0 * math.pi * 2.0 ** (N * (1.0 + beta / 2.0))
        if used_m is not None:
            f_bk = flatness(g, beta + kappa).value
            gr_bound[(beta, kappa)] = (c * 2.0 ** (used_m + 1)
                                       + 4.0 * f_bk * 2.0 ** (-(used_m + 1) * kappa)
                                       / (1.0 - 2.0 ** (-kappa)))
    report = GaugeFixReport(
        alpha=alpha, flatness_value=fr.value, flatness_argmax=fr.argmax,
        theorem_m=m_theorem, used_m=used_m, fallback=fallback,
        forced_scale=force_m is not None,
        violations=sum(violations_per_scale.values()),
        smallness_violations_per_scale=violations_per_scale,
        axial_thin_sup=axial_sup, axial_max_bond_log=axial_max,
        hypothesis_simple=hyp_simple, hypothesis_landau=hyp_landau,
        norms=norms_out, trivial_bound=trivial, gr_bound=gr_bound)
    return u, report

"""Experiment harness for the quantitative statements: MGF identity and
diamagnetic inequality, Gaussian tails and moments, plaquette-sum moment
bounds, the decorrelation identity, flatness moments, and the UV-stability
trend of the gauge-fixed norms.

Every experiment is a pure function of its parameters and seed; standard
errors come from batch means with at least 32 batches; inequality verdicts
are one-sided with a 3-standard-error buffer, equality verdicts two-sided.
Wrap events (a configuration with some |X_p| >= pi) are counted and
reported separately, never silently folded into estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng as rngmod
from .gauge_core import LatticeLoop, omega, psi, winding_vector, wrap_angle
from .gauge_fixing import flatness, gauge_fix
from .lattice_geom import DomainError, Rect, build_lattice
from .norms import log_oneform, norm_gr, seminorm_rho
from .sampler import ChainConfig, PotentialSpec, sample_interacting, sample_pure_angles

N_BATCHES = 32
SIGMA_POLICY = 3.0
# calibration-derived bound constant for the plaquette-sum moment shape
# E|sum l(p) log g(dp)|^q <= (C q sqrt(omega))^q; pure-gauge values of the
# ratio are 0.5 (q=2) and 3^(1/4)/4 ~ 0.33 (q=4), frozen with margin
PLAQ_SUM_C = 1.0


@dataclass
class ExperimentResult:
    name: str
    parameters: dict
    estimate: float
    stderr: float
    reference: float | None
    verdict: str  # 'pass' | 'fail' | 'informational'
    sample_size: int
    seed: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("pass", "fail", "informational"):
            raise DomainError(f"bad verdict {self.verdict!r}")
        if self.verdict == "informational" and self.reference is not None:
            # informational results carry no reference value
            raise DomainError("informational results must not carry a reference")

    def to_json_dict(self) -> dict:
        return {
            "name": self.name, "parameters": _plain(self.parameters),
            "estimate": self.estimate, "stderr": self.stderr,
            "reference": self.reference, "verdict": self.verdict,
            "sample_size": self.sample_size, "seed": self.seed,
            "extras": _plain(self.extras),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def batch_means_stderr(values: np.ndarray, n_batches: int = N_BATCHES) -> float:
    """Standard error of the mean via batch means (>= 32 batches)."""
    v = np.asarray(values, dtype=float)
    n = len(v) - (len(v) % n_batches)
    if n < n_batches:
        return float(v.std(ddof=1) / math.sqrt(max(len(v), 2)))
    means = v[:n].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def half_square_loop(geom) -> LatticeLoop:
    """Boundary of [0, 1/2]^2 (omega = 1/4)."""
    h = geom.n // 2
    from .gauge_core import rect_boundary_loop
    return rect_boundary_loop(geom, Rect(0, 0, h, h, geom.N))


def _pure_loop_sums(geom, w, samples, seed, batch=20_000, wrapped=False):
    """Stream pure-gauge samples; returns (sums, wrap_event_count)."""
    gen = rngmod.stream(seed, geom.N, tag="")
    out = np.empty(samples)
    wraps = 0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        X = sample_pure_angles(geom, gen, count=m)
        wraps += int((np.abs(X) >= np.pi).any(axis=(1, 2)).sum())
        Y = wrap_angle(X) if wrapped else X
        out[done:done + m] = (Y * w[None, :, :]).sum(axis=(1, 2))
        done += m
    return out, wraps


def _interacting_loop_sums(geom, w, samples, seed, pot, method, **chain_kw):
    cfg = ChainConfig(samples=samples, seed=seed, **chain_kw)
    res = sample_interacting(geom, pot, cfg, method=method)
    X = res.flat()
    sums = (X * w[None, :, :]).sum(axis=(1, 2))
    wraps = int((np.abs(X) >= np.pi).any(axis=(1, 2)).sum())
    return sums, wraps, res


def verify_mgf(N: int, loop: LatticeLoop | None = None, eta: float = 1.0,
               samples: int = 100_000, mode: str = "pure", seed: int = 0,
               pot: PotentialSpec = PotentialSpec(), method: str = "loop-expansion",
               chain_kw: dict | None = None) -> ExperimentResult:
    """Pure gauge: E e^{eta B^2} equals (1 - 2 eta omega)^(-1/2) (two-sided).
    Interacting: E e^{eta A^2} is bounded by the same closed form (one-sided).
    """
    geom = build_lattice(N)
    if loop is None:
        loop = half_square_loop(geom)
    om = omega(loop)
    if not (0 <= eta < 0.5 / om):
        raise DomainError(f"eta = {eta} outside [0, 1/(2 omega)) with omega = {om}")
    w = winding_vector(loop).astype(float)
    reference = (1.0 - 2.0 * eta * om) ** (-0.5)
    params = {"N": N, "eta": eta, "omega": om, "mode": mode}
    extras = {}
    if mode == "pure":
        sums, wraps = _pure_loop_sums(geom, w, samples, seed)
        vals = np.exp(eta * sums ** 2)
        est, se = float(vals.mean()), batch_means_stderr(vals)
        verdict = "pass" if abs(est - reference) <= SIGMA_POLICY * se else "fail"
        extras["wrap_events"] = wraps
    elif mode == "interacting":
        gate = verify_mgf(N, loop, eta, max(2000, samples // 10), "pure",
                          rngmod.spawn_seed(seed, 1))
        extras["gate"] = gate.verdict
        if gate.verdict == "fail":
            return ExperimentResult("mgf", params, math.nan, math.nan, reference,
                                    "fail", 0, seed, {"gate": "fail"})
        chain_kw = chain_kw or {"burn_in": 1000, "thin": 4, "n_chains": 4}
        sums, wraps, res = _interacting_loop_sums(geom, w, samples, seed, pot,
                                                  method, **chain_kw)
        vals = np.exp(eta * sums ** 2)
        est = float(vals.mean())
        se = batch_means_stderr(vals) * math.sqrt(max(res.iat, 1.0))
        verdict = "pass" if est <= reference + SIGMA_POLICY * se else "fail"
        extras.update({"wrap_events": wraps, "iat": res.iat,
                       "acceptance": res.acceptance.tolist(),
                       "proposal_std": res.proposal_std})
        samples = len(sums)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return ExperimentResult("mgf", params, est, se, reference, verdict,
                            samples, seed, extras)


def verify_tail(N: int, loop: LatticeLoop | None = None,
                x_grid=(0.0, 0.5, 1.0, 1.5), samples: int = 100_000,
                mode: str = "pure", seed: int = 0,
                pot: PotentialSpec = PotentialSpec(),
                method: str = "loop-expansion",
                chain_kw: dict | None = None) -> ExperimentResult:
    """P[|A| >= x] <= sqrt(2) e^{-x^2/(4 omega)} at every grid point
    (one-sided with binomial buffer); the pure mode also cross-checks the
    exact Gaussian tail."""
    geom = build_lattice(N)
    if loop is None:
        loop = half_square_loop(geom)
    om = omega(loop)
    w = winding_vector(loop).astype(float)
    if mode == "pure":
        sums, wraps = _pure_loop_sums(geom, w, samples, seed)
        extras = {"wrap_events": wraps}
    else:
        gate = verify_tail(N, loop, x_grid, max(2000, samples // 10), "pure",
                           rngmod.spawn_seed(seed, 1))
        if gate.verdict == "fail":
            return ExperimentResult("tail", {"N": N, "omega": om, "mode": mode},
                                    math.nan, math.nan, None, "fail", 0, seed,
                                    {"gate": "fail"})
        chain_kw = chain_kw or {"burn_in": 1000, "thin": 4, "n_chains": 4}
        sums, wraps, res = _interacting_loop_sums(geom, w, samples, seed, pot,
                                                  method, **chain_kw)
        extras = {"wrap_events": wraps, "iat": res.iat, "gate": "pass"}
    rows = []
    ok = True
    for x in x_grid:
        p = float((np.abs(sums) >= x).mean())
        se = math.sqrt(max(p * (1 - p), 1e-12) / len(sums))
        bound = math.sqrt(2.0) * math.exp(-x * x / (4.0 * om))
        passed = p <= bound + SIGMA_POLICY * se
        row = {"x": x, "p": p, "stderr": se, "bound": bound, "pass": passed}
        if mode == "pure":
            exact = 2.0 * stats.norm.sf(x / math.sqrt(om))
            row["exact_gaussian"] = exact
            passed = passed and abs(p - exact) <= 4.0 * se + 1e-12
            row["pass"] = passed
        ok = ok and passed
        rows.append(row)
    extras["grid"] = rows
    worst = max(rows, key=lambda r: r["p"] - r["bound"])
    return ExperimentResult("tail", {"N": N, "omega": om, "mode": mode},
                            worst["p"], worst["stderr"], worst["bound"],
                            "pass" if ok else "fail", len(sums), seed, extras)


def verify_plaquette_sum_moments(N: int, loop: LatticeLoop | None = None,
                                 q_list=(2, 4), samples: int = 100_000,
                                 mode: str = "pure", seed: int = 0,
                                 pot: PotentialSpec = PotentialSpec(),
                                 method: str = "loop-expansion",
                                 chain_kw: dict | None = None) -> ExperimentResult:
    """E |sum_p l(p) log g(dp)|^q against the bound shape (C q sqrt(omega))^q
    with the calibration constant; the q = 2 pure value also checks omega.
    Growth in q is reported as a diagnostic."""
    geom = build_lattice(N)
    if loop is None:
        loop = half_square_loop(geom)
    om = omega(loop)
    w = winding_vector(loop).astype(float)
    if mode == "pure":
        sums, wraps = _pure_loop_sums(geom, w, samples, seed, wrapped=True)
        extras = {"wrap_events": wraps}
    else:
        gate = verify_plaquette_sum_moments(N, loop, q_list,
                                            max(2000, samples // 10), "pure",
                                            rngmod.spawn_seed(seed, 1))
        if gate.verdict == "fail":
            return ExperimentResult("plaquette_sum_moments",
                                    {"N": N, "omega": om, "mode": mode},
                                    math.nan, math.nan, None, "fail", 0, seed,
                                    {"gate": "fail"})
        chain_kw = chain_kw or {"burn_in": 1000, "thin": 4, "n_chains": 4}
        cfg = ChainConfig(samples=samples, seed=seed, **chain_kw)
        res = sample_interacting(geom, pot, cfg, method=method)
        X = res.flat()
        wraps = int((np.abs(X) >= np.pi).any(axis=(1, 2)).sum())
        # log g(dp) is the wrapped plaquette angle
        sums = (wrap_angle(X) * w[None, :, :]).sum(axis=(1, 2))
        extras = {"wrap_events": wraps, "iat": res.iat}
    rows = []
    ok = True
    for q in q_list:
        vals = np.abs(sums) ** q
        est = float(vals.mean())
        se = batch_means_stderr(vals)
        ratio = est ** (1.0 / q) / (q * math.sqrt(om))
        passed = ratio <= PLAQ_SUM_C
        rows.append({"q": q, "moment": est, "stderr": se, "ratio": ratio,
                     "pass": passed})
        ok = ok and passed
    if mode == "pure" and 2 in q_list:
        row = next(r for r in rows if r["q"] == 2)
        two_sided = abs(row["moment"] - om) <= 4.0 * row["stderr"]
        row["matches_omega"] = two_sided
        ok = ok and two_sided
    extras["rows"] = rows
    return ExperimentResult(
        "plaquette_sum_moments", {"N": N, "omega": om, "mode": mode,
                                  "C": PLAQ_SUM_C},
        rows[0]["moment"], rows[0]["stderr"], om if mode == "pure" else None,
        "pass" if ok else "fail", len(sums), seed, extras)


def verify_decorrelation(sigmaA: float, sigmaB: float, sigmaAB: float,
                         eta: float, nodes: int = 140,
                         rtol: float = 1e-8) -> ExperimentResult:
    """Both sides of E[e^{eta A^2} cos B] = exp[(sAB^2 / 2 sA^2)
    (1 - 1/(1 - 2 eta sA^2))] E[e^{eta A^2}] E[cos B], each evaluated by
    Gauss-Hermite quadrature."""
    cov = np.array([[sigmaA ** 2, sigmaAB], [sigmaAB, sigmaB ** 2]])
    if np.linalg.eigvalsh(cov).min() < -1e-12:
        raise DomainError("covariance matrix is not positive semi-definite")
    if not eta < 0.5 / sigmaA ** 2:
        raise DomainError("eta out of range")
    L = np.linalg.cholesky(cov + 1e-15 * np.eye(2))
    x, wgt = np.polynomial.hermite.hermgauss(nodes)
    z = math.sqrt(2.0) * x
    wn = wgt / math.sqrt(math.pi)
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    w2 = np.outer(wn, wn)
    A = L[0, 0] * z1
    B = L[1, 0] * z1 + L[1, 1] * z2
    lhs = float((np.exp(eta * A ** 2) * np.cos(B) * w2).sum())
    e_eta = float((np.exp(eta * (L[0, 0] * z) ** 2) * wn).sum())
    e_cos = float((np.cos(sigmaB * z) * wn).sum())
    factor = math.exp((sigmaAB ** 2 / (2 * sigmaA ** 2))
                      * (1.0 - 1.0 / (1.0 - 2.0 * eta * sigmaA ** 2)))
    rhs = factor * e_eta * e_cos
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    verdict = "pass" if rel <= rtol else "fail"
    return ExperimentResult(
        "decorrelation",
        {"sigmaA": sigmaA, "sigmaB": sigmaB, "sigmaAB": sigmaAB, "eta": eta},
        lhs, 0.0, rhs, verdict, nodes * nodes, 0,
        {"relative_error": rel, "factor": factor,
         "E_exp_etaA2": e_eta, "E_cosB": e_cos})


def verify_flatness_moments(N_list=(2, 3, 4), alpha: float = 0.5, q: int = 3,
                            samples: int = 200, seed: int = 0,
                            mode: str = "pure",
                            pot: PotentialSpec = PotentialSpec(),
                            method: str = "loop-expansion") -> ExperimentResult:
    """E[[g]_alpha^{2q}] across N; informational boundedness diagnostic
    (flagged when max over N exceeds twice the min)."""
    if not (0 <= alpha < 1 and q > 2.0 / (1.0 - alpha)):
        raise DomainError("need alpha in [0,1) and q > 2/(1-alpha)")
    per_n = {}
    for N in N_list:
        geom = build_lattice(N)
        if mode == "pure":
            gen = rngmod.stream(seed, N, tag="")
            vals = np.empty(samples)
            for i in range(samples):
                X = sample_pure_angles(geom, gen)
                vals[i] = flatness(psi(geom, X), alpha).value ** (2 * q)
        else:
            cfg = ChainConfig(samples=samples, seed=rngmod.spawn_seed(seed, N),
                              burn_in=500, thin=4, n_chains=2)
            res = sample_interacting(geom, pot, cfg, method=method)
            X = res.flat()[:samples]
            vals = np.array([flatness(psi(geom, x), alpha).value ** (2 * q)
                             for x in X])
        per_n[N] = {"mean": float(vals.mean()),
                    "stderr": batch_means_stderr(vals)}
    means = [per_n[N]["mean"] for N in N_list]
    ratio = max(means) / max(min(means), 1e-300)
    return ExperimentResult(
        "flatness_moments",
        {"N_list": list(N_list), "alpha": alpha, "q": q, "mode": mode},
        means[-1], per_n[N_list[-1]]["stderr"], None, "informational",
        samples * len(N_list), seed,
        {"per_N": per_n, "max_over_min": ratio, "bounded_flag": ratio <= 2.0})


def verify_uv_stability(N_list=(2, 3, 4, 5), beta: float = 0.5, q: float = 2.0,
                        samples: int = 1000, alpha: float = 0.5, seed: int = 0,
                        mode: str = "pure",
                        pot: PotentialSpec = PotentialSpec(),
                        method: str = "loop-expansion",
                        ratio_bound: float = 1.5) -> ExperimentResult:
    """E[ |log g^u|_beta^q ] across N for gauge-fixed fields; verdict is the
    property-based boundedness check max/min <= ratio_bound.  The fallback
    frequency (theorem scale m exceeding N) is monitored per N."""
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must be in (0, 1)")
    per_n = {}
    for N in N_list:
        geom = build_lattice(N)
        if mode == "pure":
            gen = rngmod.stream(seed, N, tag="")
            configs = (sample_pure_angles(geom, gen) for _ in range(samples))
            count = samples
        else:
            cfg = ChainConfig(samples=samples, seed=rngmod.spawn_seed(seed, N),
                              burn_in=500, thin=4, n_chains=2)
            res = sample_interacting(geom, pot, cfg, method=method)
            configs = (x for x in res.flat()[:samples])
            count = min(samples, len(res.flat()))
        vals = np.empty(count)
        fallbacks = 0
        for i, X in enumerate(configs):
            g = psi(geom, X)
            u, rep = gauge_fix(g, alpha, betas=(beta,))
            fallbacks += int(rep.fallback)
            vals[i] = rep.norms[beta]["norm_full"] ** q
        per_n[N] = {"mean": float(vals.mean()),
                    "stderr": batch_means_stderr(vals),
                    "fallback_fraction": fallbacks / count}
    means = [per_n[N]["mean"] for N in N_list]
    ratio = max(means) / max(min(means), 1e-300)
    verdict = "pass" if ratio <= ratio_bound else "fail"
    return ExperimentResult(
        "uv_stability",
        {"N_list": list(N_list), "beta": beta, "q": q, "alpha": alpha,
         "mode": mode, "ratio_bound": ratio_bound},
        ratio, 0.0, ratio_bound, verdict, samples * len(N_list), seed,
        {"per_N": per_n})


EXPERIMENTS = {
    "mgf": verify_mgf,
    "tail": verify_tail,
    "plaquette-moments": verify_plaquette_sum_moments,
    "decorrelation": verify_decorrelation,
    "flatness-moments": verify_flatness_moments,
    "uv-stability": verify_uv_stability,
}

"""
Experiment harnesses, one per experiment id.

A harness takes the validated ExperimentConfig plus the run seed and returns an
Outcome: scalar results, named tables and the verdict against the configured
tolerances. Harnesses never write files; the runner owns serialization.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.analysis import multiplier, signals
from src.analysis import weights as weight_models
from src.analysis.almostdiag import (
    ad_membership_scalar,
    boundedness_probe,
    fit_membership,
    le_sq_check,
    membership_trend,
    omega_matrix,
)
from src.analysis.bapu import BapuSystem, check_bapu_decay, interior_keys
from src.analysis.coefficients import CoeffSeq, IndexSpace
from src.analysis.covering import (
    check_admissible,
    covered_halfwidth,
    patch_arrays,
    patch_neighbors,
)
from src.analysis.frame import (
    FrameSystem,
    analyze,
    analyze_direct,
    coefficient_constant_discrepancy,
    cross_gram,
    frame_window,
    tight_frame_residual,
)
from src.analysis.grid import Grid, VectorSignal
from src.analysis.muckenhoupt import (
    a1_constant_estimate,
    ap_constant_estimate,
    convolution_bound_probe,
    doubling_exponent_estimate,
    moderate_growth_integral,
    nested_families,
    scalar_ap_oracle,
)
from src.analysis.norms import (
    bapu_independence,
    embedding_decay_check,
    m_reducing_norm,
    reduce_sequence,
    reducing_equivalence,
    sampling_inequality_check,
    sampling_quadrature,
    scalar_m_norm,
    schwartz_seminorm,
    window_bracket,
)
from src.analysis.reducing import build_reducing_family, strong_doubling_check
from src.analysis.signals import random_band_signal
from src.analysis.weights import MatrixWeight, dual_weight, spectral_norm
from src.models.schemas import AdParams, CoveringParams, ExperimentConfig, SmoothnessParams
from src.utils.config import LibraryDefaults, load_defaults
from src.utils.errors import ResolutionError

logger = logging.getLogger(__name__)


@dataclass
class Outcome:
    scalars: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    passed: bool = True
    messages: List[str] = field(default_factory=list)

    def require(self, condition: bool, message: str) -> None:
        if not condition:
            self.passed = False
            self.messages.append(message)


@dataclass
class Setup:
    """Objects every harness builds from its config, constructed lazily."""

    config: ExperimentConfig
    seed: int
    defaults: LibraryDefaults = field(default_factory=load_defaults)

    @property
    def params(self) -> CoveringParams:
        return self.config.covering

    @property
    def smoothness(self) -> SmoothnessParams:
        return self.config.smoothness_params

    @cached_property
    def grid(self) -> Grid:
        return Grid.from_params(self.config.grid, self.params.a)

    def refined(self, factor: int = 2) -> Grid:
        return Grid(n=self.grid.n, T=self.grid.T, M=self.grid.M * factor)

    @cached_property
    def bapu(self) -> BapuSystem:
        return BapuSystem(self.params, self.option("profile", "bump"))

    @cached_property
    def weight(self) -> MatrixWeight:
        return weight_models.from_spec(self.config.weight)

    @cached_property
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    @property
    def ad_params(self) -> AdParams:
        section = self.config.almostdiag
        sp = self.smoothness
        return AdParams(
            J=section.J,
            delta=section.delta,
            M=section.M,
            beta=section.beta,
            s=sp.s,
            p=sp.p,
            q=sp.q,
            n=self.params.n,
        )

    def option(self, name: str, default: Any) -> Any:
        return self.config.options.get(name, default)

    def tolerance(self, name: str, default: float) -> float:
        return float(self.config.tolerances.get(name, default))

    @property
    def drift_tolerance(self) -> float:
        return self.tolerance("drift", self.defaults.drift_tolerance)

    def corpus(self, grid: Optional[Grid] = None) -> List[VectorSignal]:
        spec = self.config.corpus
        return signals.corpus(
            spec.signal,
            spec.params,
            grid or self.grid,
            spec.count,
            self.seed,
            spec.components,
            self.bapu,
        )


def _key_columns(keys: Sequence, prefix: str) -> Dict[str, List[int]]:
    n = len(keys[0]) if keys else 0
    return {f"{prefix}{d}": [int(k[d]) for k in keys] for d in range(n)}


def _relative_drift(first: float, second: float) -> float:
    return abs(second - first) / abs(first) if first else math.inf


# ============ COVERING / BAPU / FRAME ============


def covering_check(setup: Setup) -> Outcome:
    params = setup.params
    report = check_admissible(params, setup.option("box", None), dxi=setup.grid.dxi)
    keys, radii, centers = patch_arrays(params)
    table = pd.DataFrame(_key_columns(keys, "k"))
    table["r"] = radii
    for d in range(params.n):
        table[f"xi{d}"] = centers[:, d]
    table["neighbors"] = [len(patch_neighbors(params, k)) for k in keys]

    out = Outcome(
        scalars={
            "covers_domain": report.covers_domain,
            "n0": report.n0,
            "size_ratio_low": report.size_ratio_bounds[0],
            "size_ratio_high": report.size_ratio_bounds[1],
            "neighbor_scale_ratio": report.neighbor_scale_ratio,
            "samples": report.samples,
        },
        tables={"patches": table},
    )
    out.require(report.covers_domain, f"coverage gap at {report.first_gap}")
    n0_max = setup.tolerance("n0", 2 * params.n + 1)
    out.require(report.n0 <= n0_max, f"overlap number {report.n0} exceeds {n0_max:g}")
    ratio_max = setup.tolerance("neighbor_ratio", 4.0)
    out.require(
        report.neighbor_scale_ratio <= ratio_max,
        f"neighbor scale ratio {report.neighbor_scale_ratio:.4g} exceeds {ratio_max:g}",
    )
    return out


def bapu_check(setup: Setup) -> Outcome:
    params, system = setup.params, setup.bapu
    halfwidth = covered_halfwidth(params)
    xi = setup.rng.uniform(-halfwidth, halfwidth, size=(int(setup.option("samples", 10_000)), params.n))
    psi_error = float(np.max(np.abs(sum(system.psi(k, xi) for k in system.keys) - 1.0)))
    theta_error = float(np.max(np.abs(sum(system.theta(k, xi) ** 2 for k in system.keys) - 1.0)))

    interior = set(interior_keys(system, int(setup.option("margin", 1))))
    rows = []
    for k in system.keys:
        try:
            fit = check_bapu_decay(system, k, setup.grid)
        except ResolutionError:
            continue
        rows.append(
            {
                **{f"k{d}": k[d] for d in range(params.n)},
                "constant": fit.constant,
                "capped": fit.capped,
                "interior": k in interior,
            }
        )
    table = pd.DataFrame(rows)
    # edge bands are cut off where the family ends, so only interior bands decay uniformly
    inner = table[table["interior"]] if len(table) else table
    constants = inner["constant"].to_numpy() if len(inner) else np.array([math.nan])
    uniformity = float(np.max(constants) / np.min(constants))

    out = Outcome(
        scalars={
            "psi_sum_error": psi_error,
            "theta_square_sum_error": theta_error,
            "decay_uniformity": uniformity,
            "decay_bands": len(table),
            "interior_bands": len(inner),
        },
        tables={"decay": table},
    )
    tol = setup.tolerance("partition", 1e-12)
    out.require(psi_error <= tol, f"sum psi_k deviates from 1 by {psi_error:.3g}")
    out.require(theta_error <= tol, f"sum theta_k^2 deviates from 1 by {theta_error:.3g}")
    limit = setup.tolerance("uniformity", 10.0)
    out.require(uniformity <= limit, f"decay constants spread by {uniformity:.4g} > {limit:g}")
    return out


def frame_tightness(setup: Setup) -> Outcome:
    frame = FrameSystem(setup.bapu, setup.grid)
    corpus = setup.corpus()
    rows = []
    for i, f in enumerate(corpus):
        residual, defect = tight_frame_residual(frame, f)
        rows.append({"signal": i, "residual": residual, "defect": defect})
    table = pd.DataFrame(rows)

    worst_identity = 0.0
    per_signal = int(setup.option("direct_keys", 20))
    for f in corpus[: int(setup.option("direct_checks", 2))]:
        fast = analyze(frame, f)
        support = fast.support(1e-12 * max(fast.max_abs(), 1e-300))
        if not support:
            continue
        picks = setup.rng.choice(len(support), size=min(per_signal, len(support)), replace=False)
        keys = [support[int(i)] for i in sorted(picks)]
        direct = analyze_direct(frame, f, keys)
        scale = fast.max_abs()
        gap = max(float(np.max(np.abs(fast.get(k, l) - direct.get(k, l)))) for k, l in keys)
        worst_identity = max(worst_identity, gap / scale)

    out = Outcome(
        scalars={
            "max_residual": float(table["residual"].max()),
            "max_defect": float(table["defect"].max()),
            "coefficient_identity": worst_identity,
            "constant_discrepancy": coefficient_constant_discrepancy(frame, corpus[0]),
        },
        tables={"tightness": table},
    )
    tol = setup.tolerance("residual", 1e-8)
    out.require(out.scalars["max_residual"] <= tol, f"reconstruction residual above {tol:g}")
    out.require(out.scalars["max_defect"] <= tol, f"Parseval defect above {tol:g}")
    identity_tol = setup.tolerance("coefficient", 1e-9)
    out.require(worst_identity <= identity_tol, f"sampling coefficients differ by {worst_identity:.3g}")
    return out


# ============ WEIGHTS ============


def _families(setup: Setup):
    n = setup.params.n
    return nested_families(
        setup.option("centers", [[0.0] * n]),
        setup.option("halfsides", [0.5, 1.0, 2.0, 4.0]),
        int(setup.option("nodes", 64)),
        int(setup.option("extensions", 3)),
    )


def ap_diagnostics(setup: Setup) -> Outcome:
    W, p = setup.weight, setup.smoothness.p
    families = _families(setup)
    tol = setup.tolerance("divergence", setup.defaults.divergence_tolerance)
    if p > 1.0:
        report = ap_constant_estimate(W, p, families, tol)
    else:
        report = a1_constant_estimate(W, families, tol)
    trend = pd.DataFrame({"extension": range(len(report.trend)), "estimate": report.trend})
    out = Outcome(
        scalars={
            "p": p,
            "estimate": report.estimate,
            "divergent": report.divergent,
            "beta": report.beta,
            "doubling_constant": report.doubling_constant,
        },
        tables={"trend": trend},
    )
    expect_divergent = bool(setup.option("expect_divergent", False))
    out.require(
        report.divergent == expect_divergent,
        f"divergence flag {report.divergent}, expected {expect_divergent}",
    )
    if not report.divergent and len(report.trend) > 1:
        step = _relative_drift(report.trend[-2], report.trend[-1])
        out.scalars["last_step"] = step
        out.require(step <= setup.tolerance("stability", 0.05), f"estimate moved {step:.3g} on refinement")

    if W.N == 1 and p > 1.0:
        last = families[-1]

        def density(pts: np.ndarray) -> np.ndarray:
            return W(pts)[:, 0, 0].real

        oracle = max(
            scalar_ap_oracle(density, p, c, r, last.nodes_per_axis) for c, r in last.cubes()
        )
        out.scalars["scalar_oracle"] = oracle
        gap = _relative_drift(oracle, report.estimate)
        out.require(gap <= setup.tolerance("oracle", 1e-8), f"matrix and scalar estimators differ by {gap:.3g}")

    if bool(setup.option("dual", False)) and p > 1.0:
        p_dual = p / (p - 1.0)
        dual = ap_constant_estimate(dual_weight(W, p), p_dual, families, tol)
        out.scalars["dual_estimate"] = dual.estimate
        out.scalars["dual_divergent"] = dual.divergent
    if "expected" in setup.config.tolerances:
        expected = setup.tolerance("expected", 1.0)
        out.require(
            abs(report.estimate - expected) <= setup.tolerance("absolute", 1e-10),
            f"estimate {report.estimate:.12g} differs from {expected:g}",
        )
    return out


def doubling(setup: Setup) -> Outcome:
    n = setup.params.n
    estimate = doubling_exponent_estimate(
        setup.weight,
        setup.smoothness.p,
        setup.option("centers", [[0.0] * n]),
        setup.option("halfsides", [0.5, 1.0, 2.0]),
        nodes_per_axis=int(setup.option("nodes", 64)),
    )
    table = pd.DataFrame(
        {"direction": range(len(estimate.per_direction)), "beta": estimate.per_direction}
    )
    out = Outcome(
        scalars={"beta": estimate.beta, "constant": estimate.constant, "spread": estimate.spread},
        tables={"directions": table},
    )
    expected = setup.option("expected_beta", None)
    if expected is not None:
        tol = setup.tolerance("beta", 0.05)
        out.require(
            abs(estimate.beta - float(expected)) <= tol,
            f"doubling exponent {estimate.beta:.6g} differs from {expected} by more than {tol:g}",
        )
    return out


def _window(setup: Setup, lmax: Optional[int] = None) -> IndexSpace:
    section = setup.config.almostdiag
    return IndexSpace.window(
        setup.params,
        section.window_kmax,
        section.window_lmax if lmax is None else lmax,
        period=2.0 * setup.grid.T,
    )


def _fit_factor(A: np.ndarray, B: np.ndarray) -> float:
    return float(
        max(spectral_norm(A @ np.linalg.inv(B)), spectral_norm(B @ np.linalg.inv(A)))
    )


def reducing(setup: Setup) -> Outcome:
    params, W, p = setup.params, setup.weight, setup.smoothness.p
    space = _window(setup)
    method = setup.option("method", "exact-p2" if p == 2.0 else "ellipsoid-fit")
    family = build_reducing_family(W, p, params, space.keys, method, None, setup.seed, space.period)

    rows = []
    for key in family.keys():
        A = family[key]
        rows.append(
            {
                **{f"k{d}": key[0][d] for d in range(params.n)},
                **{f"l{d}": key[1][d] for d in range(params.n)},
                "norm": float(spectral_norm(A)),
                "inverse_norm": float(spectral_norm(np.linalg.inv(A))),
            }
        )
    out = Outcome(scalars={"method": method, "operators": len(family), "kappa": family.kappa})
    out.tables["operators"] = pd.DataFrame(rows)

    if p == 2.0 and bool(setup.option("compare_fit", True)):
        limit = int(setup.option("fit_cubes", 5))
        keys = family.keys()[:limit]
        weights = [W]
        for _ in range(int(setup.option("random_weights", 0))):
            B = setup.rng.standard_normal((W.N, W.N))
            weights.append(
                weight_models.constant_plus_power(
                    (B @ B.T + W.N * np.eye(W.N)).tolist(),
                    setup.rng.uniform(0.0, 0.5, W.N).tolist(),
                )
            )
        worst = 0.0
        for candidate in weights:
            exact = build_reducing_family(candidate, p, params, keys, "exact-p2")
            fitted = build_reducing_family(candidate, p, params, keys, "ellipsoid-fit", seed=setup.seed)
            worst = max(worst, max(_fit_factor(exact[k], fitted[k]) for k in keys))
        out.scalars["fit_factor"] = worst
        limit_factor = setup.tolerance("fit_factor", 1.5)
        out.require(worst <= limit_factor, f"ellipsoid fit off by factor {worst:.4g}")

    beta = setup.config.almostdiag.beta
    if beta is None:
        beta = doubling_exponent_estimate(
            W, p, setup.option("centers", [[0.0] * params.n]), setup.option("halfsides", [0.5, 1.0, 2.0])
        ).beta
    strong = strong_doubling_check(
        family, beta, p, params, count=int(setup.option("pairs", 1000)), seed=setup.seed
    )
    out.scalars.update(
        {
            "beta": beta,
            "strong_doubling_constant": strong.fitted_constant,
            "dilation_constant": strong.dilation_constant,
            "pairs": strong.pairs,
        }
    )
    out.require(math.isfinite(strong.fitted_constant), "strong doubling constant is not finite")
    if "expected_diagonal" in setup.config.options:
        expected = np.diag(np.asarray(setup.option("expected_diagonal", []), dtype=float))
        zero = (tuple([0] * params.n), tuple([0] * params.n))
        A0 = build_reducing_family(W, p, params, [zero], method)[zero]
        gap = float(np.max(np.abs(A0 - expected)))
        out.scalars["diagonal_gap"] = gap
        out.require(gap <= setup.tolerance("diagonal", 1e-8), f"reducing operator off by {gap:.3g}")
    return out


def conv_probe(setup: Setup) -> Outcome:
    W, p = setup.weight, setup.smoothness.p
    deltas = [float(d) for d in setup.option("deltas", [0.25, 0.5, 1.0, 2.0, 4.0])]
    rows = []
    for i, f in enumerate(setup.corpus()):
        _, ratios = convolution_bound_probe(W, p, f, deltas)
        rows.extend({"signal": i, "delta": d, "ratio": r} for d, r in zip(deltas, ratios))
    table = pd.DataFrame(rows)
    worst = float(table["ratio"].max())
    out = Outcome(
        scalars={
            "max_ratio": worst,
            "moderate_growth": moderate_growth_integral(W, p, setup.grid),
        },
        tables={"ratios": table},
    )
    bound = setup.tolerance("ratio", 10.0)
    out.require(math.isfinite(worst) and worst <= bound, f"convolution ratio {worst:.4g} above {bound:g}")
    return out


# ============ NORMS ============


def _bracket_width(low: float, high: float) -> float:
    return high / low if low > 0 else math.inf


def norm_equivalence(setup: Setup) -> Outcome:
    params, W, sp = setup.params, setup.weight, setup.smoothness
    method = setup.option("method", "exact-p2" if sp.p == 2.0 else "ellipsoid-fit")
    count = int(setup.option("sequences", 200))
    density = float(setup.option("density", 0.3))
    lmax = setup.config.almostdiag.window_lmax

    rows = []
    identity_gap = 0.0
    for window_lmax in (lmax, 2 * lmax):
        space = _window(setup, window_lmax)
        family = build_reducing_family(W, sp.p, params, space.keys, method, None, setup.seed, space.period)
        sequences = [
            CoeffSeq.random(params, W.N, space.keys, setup.rng, density, space.period)
            for _ in range(count)
        ]
        probe = reducing_equivalence(W, family, sp, sequences)
        rows.append({"window_lmax": window_lmax, "low": probe.low, "high": probe.high})
        for c in sequences[: int(setup.option("identity_checks", 20))]:
            direct = m_reducing_norm(family, sp, c).value
            via_scalar = scalar_m_norm(sp, reduce_sequence(family, c))
            identity_gap = max(identity_gap, _relative_drift(direct, via_scalar) if direct else 0.0)
    table = pd.DataFrame(rows)
    widths = [_bracket_width(r["low"], r["high"]) for r in rows]

    corpus = setup.corpus()
    independence = bapu_independence(setup.bapu, BapuSystem(params, "polynomial"), W, sp, corpus)
    windows = window_bracket(setup.bapu, W, sp, corpus)

    out = Outcome(
        scalars={
            "reducing_bracket_low": rows[-1]["low"],
            "reducing_bracket_high": rows[-1]["high"],
            "reducing_width_drift": _relative_drift(widths[0], widths[1]),
            "connect_identity_gap": identity_gap,
            "bapu_bracket_low": independence.low,
            "bapu_bracket_high": independence.high,
            "window_bracket_low": windows.low,
            "window_bracket_high": windows.high,
        },
        tables={"reducing_brackets": table},
    )
    drift_tol = setup.drift_tolerance
    out.require(out.scalars["reducing_width_drift"] <= drift_tol, "reducing bracket width drifts")
    out.require(identity_gap <= setup.tolerance("connect", 1e-14), f"reducing identity gap {identity_gap:.3g}")
    for name, probe in (("BAPU", independence), ("psi/theta", windows)):
        out.require(
            probe.low > 0 and math.isfinite(probe.high), f"{name} bracket degenerates: [{probe.low}, {probe.high}]"
        )
    return out


def sampling_ineq(setup: Setup) -> Outcome:
    W, p, system = setup.weight, setup.smoothness.p, setup.bapu
    kmax = int(setup.option("kmax", 8))
    count = int(setup.option("trials", 20))
    keys = [k for k in system.keys if max(abs(v) for v in k) <= kmax]
    rows = []
    constants = []
    for level, grid in enumerate((setup.grid, setup.refined())):
        rng = np.random.default_rng(setup.seed)
        worst = 0.0
        for k in keys:
            try:
                system.check_guard(grid, k)
            except ResolutionError:
                continue
            quadrature = sampling_quadrature(W, p, system, k, grid)
            band = max(
                sampling_inequality_check(
                    W, p, system, k, random_band_signal(system, grid, k, rng, W.N), quadrature=quadrature
                )
                for _ in range(count)
            )
            worst = max(worst, band)
            rows.append({"grid": level, **{f"k{d}": k[d] for d in range(len(k))}, "max_ratio": band})
        constants.append(worst)
    out = Outcome(
        scalars={"constant": constants[0], "refined_constant": constants[1]},
        tables={"ratios": pd.DataFrame(rows)},
    )
    drift = _relative_drift(constants[0], constants[1])
    out.scalars["drift"] = drift
    out.require(math.isfinite(constants[0]) and constants[0] > 0, "no band was sampled")
    out.require(drift <= setup.drift_tolerance, f"sampling constant drifts by {drift:.3g}")
    return out


def embedding_decay(setup: Setup) -> Outcome:
    W, p, system = setup.weight, setup.smoothness.p, setup.bapu
    f = setup.corpus()[0]
    L = float(setup.option("L", 4.0))
    fit = embedding_decay_check(
        system, W, p, f, L, int(setup.option("kmin", 3)), int(setup.option("margin", 2))
    )
    order = int(setup.option("seminorm_order", 2))
    table = pd.DataFrame({"bracket": fit.radii, "norm": fit.values})
    out = Outcome(
        scalars={
            "exponent": fit.exponent,
            "constant": fit.constant,
            "target": fit.target,
            "seminorm": schwartz_seminorm(f, order),
            "moderate_growth": moderate_growth_integral(W, p, setup.grid),
        },
        tables={"bands": table},
    )
    tol = setup.tolerance("exponent", setup.defaults.fit_tolerance)
    out.require(
        fit.relative_shortfall <= tol,
        f"fitted decay exponent {fit.exponent:.4g} below {fit.target:g} by more than {tol:.0%}",
    )
    return out


# ============ ALMOST DIAGONAL ============


def ad_membership(setup: Setup) -> Outcome:
    frame = FrameSystem(setup.bapu, setup.grid)
    ad = setup.ad_params
    section = setup.config.almostdiag
    drop = setup.tolerance("drop", 1e-14)
    matrices = [
        cross_gram(frame, frame, space, space, drop)
        for space in (
            frame_window(frame, section.window_kmax, section.window_lmax),
            frame_window(frame, section.window_kmax, 2 * section.window_lmax),
        )
    ]
    constants, drift = membership_trend(matrices, ad, "symmetric")
    scalar_fit = ad_membership_scalar(matrices[0], ad, "symmetric")

    space = matrices[0].rows
    omega = fit_membership(omega_matrix(ad, space), ad, "omega")

    covering = setup.params
    L = float(setup.option("L", 2.0))
    zero = tuple([0] * covering.n)
    le_sq = le_sq_check(lambda pts: np.ones(len(pts)), float(covering.n), covering, zero, zero, L)

    trend = pd.DataFrame({"window_lmax": [section.window_lmax, 2 * section.window_lmax], "constant": constants})
    out = Outcome(
        scalars={
            "gram_constant": scalar_fit.constant,
            "gram_drift": drift,
            "hypotheses": scalar_fit.hypotheses,
            "omega_constant": omega.constant,
            "le_sq_ratio": le_sq,
        },
        tables={"trend": trend, "gram": matrices[0].to_frame()},
        messages=list(scalar_fit.messages),
    )
    out.require(abs(omega.constant - 1.0) <= setup.tolerance("omega", 1e-12), f"omega self-fit {omega.constant!r}")
    out.require(math.isfinite(scalar_fit.constant), "frame Gram constant is not finite")
    out.require(drift <= setup.drift_tolerance, f"Gram constant drifts by {drift:.3g}")
    if covering.n == 1:
        expected = 2.0 * covering.a / (math.pi * (L - 1.0))
        out.scalars["le_sq_expected"] = expected
        out.require(abs(le_sq - expected) <= setup.tolerance("le_sq", 0.05), f"localization ratio {le_sq:.6g}")
    return out


def ad_boundedness(setup: Setup) -> Outcome:
    frame = FrameSystem(setup.bapu, setup.grid)
    sp = setup.smoothness
    section = setup.config.almostdiag
    W = setup.weight if bool(setup.option("weighted", False)) else None
    rows = []
    for lmax in (section.window_lmax, 2 * section.window_lmax):
        space = frame_window(frame, section.window_kmax, lmax)
        A = cross_gram(frame, frame, space, space, setup.tolerance("drop", 1e-14))
        probe = boundedness_probe(A, sp, section.trials, setup.seed, W)
        rows.append({"window_lmax": lmax, "low": probe.low, "high": probe.high})
    drift = _relative_drift(rows[0]["high"], rows[1]["high"])

    # omega matrix at J = n / min(1, q) + 1 and delta = 1
    base = setup.ad_params
    omega_params = base.model_copy(update={"J": base.scalar_threshold + 1.0, "delta": 1.0})
    omega_lmax = int(setup.option("omega_lmax", section.window_lmax))
    omega_rows = []
    for lmax in (omega_lmax, 2 * omega_lmax):
        Omega = omega_matrix(omega_params, _window(setup, lmax))
        ratios = boundedness_probe(Omega, sp, int(setup.option("omega_trials", 200)), setup.seed)
        omega_rows.append({"window_lmax": lmax, "low": ratios.low, "high": ratios.high})
    omega_drift = _relative_drift(omega_rows[0]["high"], omega_rows[1]["high"])

    out = Outcome(
        scalars={
            "max_ratio": rows[-1]["high"],
            "drift": drift,
            "omega_J": omega_params.J,
            "omega_max_ratio": omega_rows[-1]["high"],
            "omega_drift": omega_drift,
        },
        tables={"probe": pd.DataFrame(rows), "omega": pd.DataFrame(omega_rows)},
    )
    out.require(drift <= setup.drift_tolerance, f"boundedness ratio drifts by {drift:.3g}")
    out.require(
        math.isfinite(omega_rows[-1]["high"]) and omega_rows[-1]["high"] > 0,
        f"omega matrix ratio degenerates: {omega_rows[-1]['high']}",
    )
    omega_tol = setup.tolerance("omega_drift", setup.drift_tolerance)
    out.require(omega_drift <= omega_tol, f"omega matrix ratio drifts by {omega_drift:.3g}")
    return out


# ============ MULTIPLIERS ============


def multiplier_check(setup: Setup) -> Outcome:
    params = setup.params
    spec = setup.config.symbol
    m = multiplier.from_spec(spec)
    order = int(setup.option("order", 3))
    report = multiplier.symbol_class_check(m, params.alpha, spec.b, order, params.n)

    frame = FrameSystem(setup.bapu, setup.grid)
    section = setup.config.almostdiag
    space = frame_window(frame, section.window_kmax, section.window_lmax)
    A = multiplier.multiplier_gram(frame, m, spec.b, space, ad_params=setup.ad_params)

    identity = multiplier.ConstantSymbol(1.0)
    f = setup.corpus()[0]
    apply_gap = float(np.max(np.abs(multiplier.apply_multiplier(identity, f).values - f.values)))
    gram = cross_gram(frame, frame, space, space).dense()
    gram_gap = float(np.max(np.abs(multiplier.multiplier_gram(frame, identity, 0.0, space).dense() - gram.T)))

    dense = np.abs(A.dense())
    support_neighbors = {k: set(patch_neighbors(params, k, 1.5)) for k in {key[0] for key in space.keys}}
    off = np.array(
        [[col[0] not in support_neighbors[row[0]] for col in space.keys] for row in space.keys]
    )
    off_max = float(np.max(dense[off])) if off.any() else 0.0

    zero = tuple([0] * params.n)
    decay = multiplier.gram_decay_fit(A, zero, zero, dmin=int(setup.option("dmin", 2)))

    table = pd.DataFrame(
        {
            "order": list(report.sups),
            "sup": list(report.sups.values()),
            "stable": list(report.stable.values()),
        }
    )
    out = Outcome(
        scalars={
            "symbol": m.name,
            "class_passed": report.passed,
            "weighted_constant": A.fitted,
            "identity_apply_gap": apply_gap,
            "identity_gram_gap": gram_gap,
            "off_neighbor_max": off_max,
            "decay_exponent": decay.exponent,
        },
        tables={"symbol_class": table, "gram": A.to_frame()},
    )
    out.require(report.passed, "symbol fails the class check")
    exact = setup.tolerance("identity", 1e-13)
    out.require(apply_gap <= exact, f"identity multiplier changes the signal by {apply_gap:.3g}")
    out.require(gram_gap <= exact, f"identity multiplier Gram differs from the frame Gram by {gram_gap:.3g}")
    out.require(off_max <= setup.tolerance("vanishing", 1e-12), f"entry {off_max:.3g} off the support neighbors")
    decay_min = setup.tolerance("decay", 3.0)
    out.require(decay.exponent >= decay_min, f"Gram decay exponent {decay.exponent:.3g} below {decay_min:g}")
    return out


def bessel(setup: Setup) -> Outcome:
    W, sp = setup.weight, setup.smoothness
    b = setup.config.symbol.b
    rows = []
    for level, grid in enumerate((setup.grid, setup.refined())):
        probe = multiplier.bessel_equivalence_experiment(setup.bapu, W, sp, b, setup.corpus(grid))
        rows.extend({"grid": level, "signal": i, "ratio": r} for i, r in enumerate(probe.ratios))
    table = pd.DataFrame(rows)
    brackets = [
        (float(table[table["grid"] == level]["ratio"].min()), float(table[table["grid"] == level]["ratio"].max()))
        for level in (0, 1)
    ]
    widths = [_bracket_width(low, high) for low, high in brackets]
    drift = _relative_drift(widths[0], widths[1])
    out = Outcome(
        scalars={"b": b, "low": brackets[0][0], "high": brackets[0][1], "width_drift": drift},
        tables={"ratios": table},
    )
    if b == 0.0:
        out.require(bool(np.all(table["ratio"] == 1.0)), "b = 0 ratios are not exactly 1")
    out.require(brackets[0][0] > 0 and math.isfinite(brackets[0][1]), "Bessel bracket degenerates")
    out.require(drift <= setup.drift_tolerance, f"Bessel bracket drifts by {drift:.3g}")
    return out


HARNESSES: Dict[str, Callable[[Setup], Outcome]] = {
    "covering-check": covering_check,
    "bapu-check": bapu_check,
    "frame-tightness": frame_tightness,
    "norm-equivalence": norm_equivalence,
    "ap-diagnostics": ap_diagnostics,
    "doubling": doubling,
    "reducing": reducing,
    "ad-membership": ad_membership,
    "ad-boundedness": ad_boundedness,
    "sampling-ineq": sampling_ineq,
    "conv-probe": conv_probe,
    "multiplier": multiplier_check,
    "bessel": bessel,
    "embedding-decay": embedding_decay,
}

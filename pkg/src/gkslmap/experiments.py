"""Scripted studies built on the solver stack.

Three reproducible experiments live here, together with the seeded kernel
corpus the test suite shares:

* coupling-strength scans fitting the log-log slope of the distance between
  two solver families,
* Redfield-style kernels assembled from a system Hamiltonian, a coupling
  operator and a bath correlation function,
* the convolution special case, where a CP drift map plus the mutual-inverse
  Kraus condition is supposed to force CP of the full map.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .cpanalysis import (
    CPReport,
    certify_trajectory,
    choi,
    kraus_condition_check,
    kraus_extract,
)
from .kernel import GKSLKernel, TwoTimeOperatorFunction
from .linalg import SIGMA_Z, frobenius, random_hermitian, random_operator
from .profiles import (
    ConstantProfile,
    ExpProfile,
    GaussianProfile,
    Profile,
    SeparableProfile,
    SingleVarFactor,
    TabulatedProfile,
    profile_product,
)
from .propagate import solve_family, solve_nonlocal
from .trajectory import MapTrajectory, TimeGrid

__all__ = [
    "GScanResult",
    "RedfieldModel",
    "g_scan",
    "pair_distance",
    "redfield_kernel",
    "convolution_case",
    "ConvolutionCaseResult",
    "random_kernel",
    "random_drift",
    "corpus_kernels",
    "dephasing_kernel",
    "coherence_revival_kernel",
    "observed_order",
    "OrderEstimate",
]


# ---------------------------------------------------------------------------
# seeded kernel corpus


def _random_profile(rng: np.random.Generator) -> Profile:
    kind = rng.choice(["constant", "decay", "oscillatory", "gaussian", "separable"])
    if kind == "constant":
        return ConstantProfile(0.8 * np.exp(2j * np.pi * rng.uniform()))
    if kind == "decay":
        return ExpProfile(-rng.uniform(0.5, 1.5))
    if kind == "oscillatory":
        return ExpProfile(1j * rng.uniform(0.5, 1.5))
    if kind == "gaussian":
        return GaussianProfile(rng.uniform(0.8, 1.6))
    return SeparableProfile(
        SingleVarFactor("exp", rate=-rng.uniform(0.2, 0.8)),
        SingleVarFactor("gaussian", tau=rng.uniform(1.0, 2.0)),
    )


def random_kernel(seed: int, dim: int | None = None) -> GKSLKernel:
    """Seeded random kernel: d in {2, 3}, 1-2 jump operator functions,
    1-2 profile terms each, spectral norms in [0.4, 0.6]."""
    rng = np.random.default_rng(seed)
    d = int(dim) if dim is not None else int(rng.integers(2, 4))
    ops = []
    for _ in range(int(rng.integers(1, 3))):
        terms = []
        for _ in range(int(rng.integers(1, 3))):
            a = random_operator(rng, d, norm=rng.uniform(0.4, 0.6))
            terms.append((_random_profile(rng), a))
        ops.append(TwoTimeOperatorFunction.build(d, terms))
    h = random_hermitian(rng, d, norm=rng.uniform(0.2, 0.4))
    herm = TwoTimeOperatorFunction.build(d, [(ConstantProfile(1.0), h)])
    return GKSLKernel.build(d, hermitian=herm, jump_ops=tuple(ops), coupling=1.0)


def random_drift(seed: int, dim: int | None = None) -> TwoTimeOperatorFunction:
    """Seeded random drift-operator function with tame norms."""
    rng = np.random.default_rng(seed)
    d = int(dim) if dim is not None else int(rng.integers(2, 4))
    terms = []
    for _ in range(int(rng.integers(1, 3))):
        a = random_operator(rng, d, norm=rng.uniform(0.3, 0.5))
        terms.append((_random_profile(rng), a))
    return TwoTimeOperatorFunction.build(d, terms)


def corpus_kernels(count: int, base_seed: int = 101, dim: int | None = None):
    """The shared test corpus: consecutive seeds from base_seed."""
    return tuple(random_kernel(base_seed + i, dim=dim) for i in range(count))


def dephasing_kernel(kappa: float = 1.0, g: float = 1.0) -> GKSLKernel:
    """Exponential-memory dephasing: L(t, t') = e^{-kappa (t-t')} sigma_z."""
    fn = TwoTimeOperatorFunction.build(2, [(ExpProfile(-float(kappa)), SIGMA_Z)])
    return GKSLKernel.build(2, jump_ops=(fn,), coupling=g)


def coherence_revival_kernel(t_max: float = 4.0) -> GKSLKernel:
    """Constant sigma_z kernel whose nonlocal solution revives coherence.

    The nonlocal coherence factor is cos(sqrt(2) t): it decays, crosses zero
    and grows back in magnitude, so the trajectory stays CP at every node
    while the intermediate maps on the revival stretch are not — the
    divisibility counterexample.  Shipped as a tabulated profile so the grid
    ingestion path is exercised end to end (bilinear interpolation of a
    constant table is exact).
    """
    prof = TabulatedProfile.from_array(float(t_max), np.ones((5, 5)))
    fn = TwoTimeOperatorFunction.build(2, [(prof, SIGMA_Z)])
    return GKSLKernel.build(2, jump_ops=(fn,), coupling=1.0)


# ---------------------------------------------------------------------------
# coupling-strength scan


@dataclass(frozen=True)
class GScanResult:
    """Log-log scaling of the distance between two solver families."""

    g_values: tuple
    distances: tuple
    slope: float
    intercept: float
    residual: float  # max |log10 distance - fit|
    monotone: bool
    pair: tuple
    failures: tuple  # (g, message) for per-point solver failures

    def to_doc(self) -> dict:
        return {
            "kind": "gscan-result",
            "pair": list(self.pair),
            "g": [float(g) for g in self.g_values],
            "distance": [float(x) for x in self.distances],
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "residual": float(self.residual),
            "monotone": bool(self.monotone),
            "failures": [[float(g), msg] for g, msg in self.failures],
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# gkslmap gscan pair={self.pair[0]}:{self.pair[1]}\n")
        buf.write("g,distance\n")
        for g, x in zip(self.g_values, self.distances):
            buf.write(f"{float(g)!r},{float(x)!r}\n")
        buf.write(
            f"# slope={self.slope!r} residual={self.residual!r} monotone={self.monotone}\n"
        )
        return buf.getvalue()


def pair_distance(k: GKSLKernel, grid: TimeGrid, pair, order: int = 8) -> float:
    """Sup-over-nodes Frobenius distance between two families on one kernel."""
    a = solve_family(k, grid, pair[0], order=order)
    b = solve_family(k, grid, pair[1], order=order)
    return float(np.max(np.linalg.norm(a.maps - b.maps, axis=(1, 2))))


def g_scan(
    k: GKSLKernel,
    grid: TimeGrid,
    g_list,
    pair=("nonlocal-full", "weak-nonlocal-full"),
    order: int = 8,
) -> GScanResult:
    """Distance-vs-coupling scan with a least-squares log-log slope fit.

    Requires at least four strictly increasing positive couplings spanning a
    ratio of at least 8 (the widest window the weak regime tolerates in
    practice; a full decade is better when the large-g end still converges).
    Per-point solver failures are recorded and excluded from the fit rather
    than aborting the scan.
    """
    gs = [float(g) for g in g_list]
    if len(gs) < 4:
        raise ValueError(f"g_list needs >= 4 points, got {len(gs)}")
    if any(g <= 0 for g in gs):
        raise ValueError("g_list entries must be positive")
    if any(b <= a for a, b in zip(gs, gs[1:])):
        raise ValueError("g_list must be strictly increasing")
    if gs[-1] / gs[0] < 8.0:
        raise ValueError(
            f"g_list must span at least a ratio of 8, got {gs[-1] / gs[0]:.3g}"
        )
    if pair[0] == pair[1]:
        raise ValueError("pair must name two distinct families")
    distances = []
    failures = []
    kept_g = []
    for g in gs:
        try:
            dist = pair_distance(k.with_coupling(g), grid, pair, order=order)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            failures.append((g, str(exc)))
            continue
        distances.append(dist)
        kept_g.append(g)
    if len(kept_g) < 2 or any(x <= 0 for x in distances):
        raise ValueError("too few successful scan points for a slope fit")
    lg = np.log10(kept_g)
    ld = np.log10(distances)
    slope, intercept = np.polyfit(lg, ld, 1)
    residual = float(np.max(np.abs(ld - (slope * lg + intercept))))
    monotone = bool(np.all(np.diff(distances) >= -1e-14))
    return GScanResult(
        g_values=tuple(kept_g),
        distances=tuple(distances),
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        monotone=monotone,
        pair=tuple(pair),
        failures=tuple(failures),
    )


# ---------------------------------------------------------------------------
# Redfield-style kernels


@dataclass(frozen=True)
class RedfieldModel:
    """System Hamiltonian + coupling operator + bath correlation function.

    The bath enters only through C(tau); no bath Hilbert space is simulated.
    """

    h_s: np.ndarray
    coupling_op: np.ndarray
    correlation: Profile  # two-time profile, convolution kind: C(t - t')
    g: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h_s, dtype=complex)
        s = np.asarray(self.coupling_op, dtype=complex)
        if h.shape != s.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("h_s and coupling_op must be square and same shape")
        if np.linalg.norm(h - h.conj().T) > 1e-10 * max(1.0, np.linalg.norm(h)):
            raise ValueError("h_s must be Hermitian")
        c0 = complex(np.asarray(self.correlation(1.0, 1.0)).reshape(()))
        if abs(c0.imag) > 1e-12 or c0.real < 0:
            raise ValueError(f"correlation at tau=0 must be real and >= 0, got {c0}")
        object.__setattr__(self, "h_s", h)
        object.__setattr__(self, "coupling_op", s)


def redfield_kernel(model: RedfieldModel) -> GKSLKernel:
    """Interaction-picture kernel L(t, t') = C(t - t') S^I(t - t').

    S^I is expanded over the eigenoperator basis of H_S, so every term is an
    exact profile-times-constant-operator pair: the eigenoperator at Bohr
    frequency w picks up the profile e^{i w (t-t')} C(t-t').  With an
    exponential correlation the profiles fuse into single decaying
    exponentials and the kernel is convolution-type.
    """
    d = model.h_s.shape[0]
    evals, u = np.linalg.eigh(model.h_s)
    s_tilde = u.conj().T @ model.coupling_op @ u
    terms = []
    for a in range(d):
        for b in range(d):
            if abs(s_tilde[a, b]) <= 1e-14:
                continue
            op = s_tilde[a, b] * np.outer(u[:, a], u[:, b].conj())
            omega = float(evals[a] - evals[b])
            if abs(omega) <= 1e-14:
                prof = model.correlation
            else:
                prof = profile_product(ExpProfile(1j * omega), model.correlation)
            terms.append((prof, op))
    fn = TwoTimeOperatorFunction.build(d, terms)
    return GKSLKernel.build(d, jump_ops=(fn,), coupling=model.g)


# ---------------------------------------------------------------------------
# convolution special case


@dataclass(frozen=True)
class ConvolutionCaseResult:
    """Hypothesis audit for the convolution case.

    The claim under test: if the drift-only map is CP and its Kraus operators
    satisfy the mutual-inverse condition, the full convolution map is CP.
    ``consistent`` is False only when the hypotheses held and the conclusion
    still failed.
    """

    full_report: CPReport
    z_report: CPReport
    z_map_cp: bool
    kraus_condition_holds: bool
    kraus_clause: str  # "" when the condition holds
    n_kraus: int
    full_cp: bool

    @property
    def hypotheses_hold(self) -> bool:
        return self.z_map_cp and self.kraus_condition_holds

    @property
    def consistent(self) -> bool:
        return (not self.hypotheses_hold) or self.full_cp

    def to_doc(self) -> dict:
        return {
            "kind": "convolution-case",
            "z_map_cp": bool(self.z_map_cp),
            "kraus_condition_holds": bool(self.kraus_condition_holds),
            "kraus_clause": self.kraus_clause,
            "n_kraus": int(self.n_kraus),
            "full_cp": bool(self.full_cp),
            "hypotheses_hold": bool(self.hypotheses_hold),
            "consistent": bool(self.consistent),
            "full_report": self.full_report.to_doc(),
            "z_report": self.z_report.to_doc(),
        }


def convolution_case(
    k: GKSLKernel, grid: TimeGrid, eps_cp: float = 1e-8
) -> ConvolutionCaseResult:
    """Run the convolution-case audit (nonlocal full + drift companion)."""
    if not k.is_convolution:
        raise ValueError("convolution_case requires convolution-type profiles throughout")
    full = solve_nonlocal(k, grid, part="full")
    z = solve_nonlocal(k, grid, part="drift")
    full_report = certify_trajectory(full, eps_cp=eps_cp)
    z_report = certify_trajectory(z, eps_cp=eps_cp)
    z_cp = z_report.all_cp
    if z_cp:
        kraus = kraus_extract(choi(z.maps[-1]), eps_cp=eps_cp)
        cond = kraus_condition_check(kraus)
        holds, clause, n_k = cond.holds, cond.failed_clause, cond.n_operators
    else:
        holds, clause, n_k = False, "drift-map-not-CP", 0
    return ConvolutionCaseResult(
        full_report=full_report,
        z_report=z_report,
        z_map_cp=z_cp,
        kraus_condition_holds=holds,
        kraus_clause=clause,
        n_kraus=n_k,
        full_cp=full_report.all_cp,
    )


# ---------------------------------------------------------------------------
# self-convergence


@dataclass(frozen=True)
class OrderEstimate:
    """Observed convergence order from successive grid refinements."""

    m_values: tuple
    differences: tuple  # ||final(M) - final(2M)||_F per consecutive pair
    orders: tuple  # log2 ratios of consecutive differences

    @property
    def min_order(self) -> float:
        return min(self.orders)


def observed_order(solver, T: float = 2.0, m_values=(100, 200, 400, 800)) -> OrderEstimate:
    """Estimate convergence order of ``solver(grid) -> MapTrajectory``.

    Self-convergence on final maps: the difference between the M and 2M
    solutions scales like h^p, so consecutive difference ratios give 2^p.
    """
    if len(m_values) < 3:
        raise ValueError("need at least three grid sizes")
    finals = [solver(TimeGrid(T, int(m))).maps[-1] for m in m_values]
    diffs = [frobenius(finals[i] - finals[i + 1]) for i in range(len(finals) - 1)]
    if any(x == 0 for x in diffs):
        raise ValueError("degenerate refinement: zero difference between grids")
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(len(diffs) - 1)]
    return OrderEstimate(
        m_values=tuple(int(m) for m in m_values),
        differences=tuple(diffs),
        orders=tuple(orders),
    )

"""Two-time master-equation kernels built from profile * constant-operator terms.

A kernel acts on a density matrix through

    K(t, t') rho = g^2 ( -i [H(t,t'), rho]
                         + sum_i ( L_i rho L_i^dag - 1/2 {L_i^dag L_i, rho} ) )

where H(t,t') is Hermitian for every admissible (t, t') and each L_i(t,t') is
an arbitrary operator-valued function.  Both are finite sums of
profile(t,t') * constant-matrix terms, which keeps every derived object
(superoperator kernels, drift operators, quadrature tables) in separable form.

The kernel splits as K = J - D with the jump (sandwich) part
J rho = g^2 sum_i L_i rho L_i^dag and the drift part D rho = A rho + rho A^dag,
where the drift operator is A = g^2 ( i H + 1/2 sum_i L_i^dag L_i ).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import dagger, sandwich_superop
from .profiles import (
    Profile,
    ProfileFormatError,
    TabulatedProfile,
    profile_from_doc,
    profile_product,
    profile_to_doc,
)
from .serialize import FormatError, matrix_from_doc, matrix_to_doc

__all__ = [
    "TwoTimeOperatorFunction",
    "TwoTimeSuperopFunction",
    "GKSLKernel",
    "KernelSplit",
    "split_kernel",
    "eval_kernel_superop",
    "load_kernel_spec",
    "save_kernel_spec",
    "load_drift_spec",
    "save_drift_spec",
    "KernelFormatError",
    "MIN_DIM",
    "MAX_DIM",
]

MIN_DIM = 2
MAX_DIM = 8


class KernelFormatError(FormatError):
    pass


@dataclass(frozen=True)
class TwoTimeOperatorFunction:
    """Finite sum of profile(t, t') * constant d x d matrices."""

    dim: int
    terms: tuple  # tuple of (Profile, ndarray)

    def __post_init__(self):
        for i, (p, a) in enumerate(self.terms):
            if not isinstance(p, Profile):
                raise ValueError(f"term {i}: profile of type {type(p).__name__}")
            a = np.asarray(a)
            if a.shape != (self.dim, self.dim):
                raise ValueError(
                    f"term {i}: operator shape {a.shape} does not match dim {self.dim}"
                )

    @staticmethod
    def build(dim: int, terms) -> "TwoTimeOperatorFunction":
        frozen = tuple((p, np.asarray(a, dtype=complex)) for p, a in terms)
        return TwoTimeOperatorFunction(dim=dim, terms=frozen)

    @staticmethod
    def zero(dim: int) -> "TwoTimeOperatorFunction":
        return TwoTimeOperatorFunction(dim=dim, terms=())

    def __call__(self, t: float, tp: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for p, a in self.terms:
            out += complex(p(t, tp)) * a
        return out

    @property
    def is_zero(self) -> bool:
        return len(self.terms) == 0

    @property
    def is_convolution(self) -> bool:
        return all(p.is_convolution for p, _ in self.terms)

    def scaled(self, factor: complex) -> "TwoTimeOperatorFunction":
        return TwoTimeOperatorFunction.build(
            self.dim, [(p, factor * a) for p, a in self.terms]
        )


@dataclass(frozen=True)
class TwoTimeSuperopFunction:
    """Finite sum of profile(t, t') * constant D x D superoperator matrices."""

    dim: int
    terms: tuple  # tuple of (Profile, ndarray of shape (d*d, d*d))

    @staticmethod
    def build(dim: int, terms) -> "TwoTimeSuperopFunction":
        frozen = tuple((p, np.asarray(s, dtype=complex)) for p, s in terms)
        for i, (_, s) in enumerate(frozen):
            if s.shape != (dim * dim, dim * dim):
                raise ValueError(f"term {i}: superoperator shape {s.shape} for dim {dim}")
        return TwoTimeSuperopFunction(dim=dim, terms=frozen)

    def __call__(self, t: float, tp: float) -> np.ndarray:
        out = np.zeros((self.dim * self.dim, self.dim * self.dim), dtype=complex)
        for p, s in self.terms:
            out += complex(p(t, tp)) * s
        return out


@dataclass(frozen=True)
class GKSLKernel:
    """Kernel data: Hermitian part, jump operator functions, coupling scale g."""

    dim: int
    hermitian: TwoTimeOperatorFunction
    jump_ops: tuple  # tuple of TwoTimeOperatorFunction
    coupling: float = 1.0

    def __post_init__(self):
        if not (MIN_DIM <= self.dim <= MAX_DIM):
            raise ValueError(f"dim must satisfy {MIN_DIM} <= d <= {MAX_DIM}, got {self.dim}")
        if self.coupling < 0:
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")
        if self.hermitian.dim != self.dim:
            raise ValueError("hermitian part dimension does not match kernel dim")
        for i, op in enumerate(self.jump_ops):
            if op.dim != self.dim:
                raise ValueError(f"jump operator {i} dimension does not match kernel dim")

    @staticmethod
    def build(dim, hermitian=None, jump_ops=(), coupling=1.0) -> "GKSLKernel":
        herm = hermitian if hermitian is not None else TwoTimeOperatorFunction.zero(dim)
        return GKSLKernel(
            dim=dim, hermitian=herm, jump_ops=tuple(jump_ops), coupling=float(coupling)
        )

    def with_coupling(self, g: float) -> "GKSLKernel":
        return replace(self, coupling=float(g))

    @property
    def is_convolution(self) -> bool:
        """True when every profile in the kernel depends on t - t' only."""
        if not self.hermitian.is_convolution:
            return False
        return all(op.is_convolution for op in self.jump_ops)

    @property
    def is_c_number(self) -> bool:
        """True when each jump operator is a single profile times a constant matrix."""
        return all(len(op.terms) == 1 for op in self.jump_ops)

    def all_profiles(self):
        for p, _ in self.hermitian.terms:
            yield p
        for op in self.jump_ops:
            for p, _ in op.terms:
                yield p

    def check_horizon(self, T: float) -> None:
        """Fail fast when a tabulated profile does not cover [0, T]^2."""
        for p in self.all_profiles():
            if isinstance(p, TabulatedProfile) and p.t_max < T:
                raise ValueError(
                    f"tabulated profile covers [0, {p.t_max}] but the requested "
                    f"horizon is T = {T}"
                )

    def check_hermiticity(self, points=None, tol: float = 1e-10) -> None:
        """Sample the Hermitian part on (t, t') pairs, rejecting asymmetry."""
        if points is None:
            ts = [0.0, 0.25, 0.5, 1.0, 1.7]
            points = [(t, tp) for t in ts for tp in ts if tp <= t]
        for t, tp in points:
            h = self.hermitian(t, tp)
            asym = np.linalg.norm(h - h.conj().T)
            if asym > tol * max(1.0, np.linalg.norm(h)):
                raise ValueError(
                    f"hermitian part is not Hermitian at (t, t') = ({t}, {tp}); "
                    f"asymmetry {asym:.3e}"
                )

    def damping_rates(self, grid) -> np.ndarray:
        """Per-jump effective rates gamma_i(t) = g^2 int_0^t |h_i(t,s)|^2 ds.

        Defined for c-number kernels (single-term jump operators); rates are
        reported per grid node using the composite trapezoid rule.
        """
        if not self.is_c_number:
            raise ValueError("damping rates are defined for c-number kernels only")
        ts = grid.nodes()
        out = np.zeros((len(self.jump_ops), len(ts)))
        g2 = self.coupling**2
        for i, op in enumerate(self.jump_ops):
            (p, _a) = op.terms[0]
            for m in range(1, len(ts)):
                vals = np.abs(p(ts[m], ts[: m + 1])) ** 2
                out[i, m] = g2 * np.trapezoid(vals, dx=grid.h)
        return out


@dataclass(frozen=True)
class KernelSplit:
    """Jump/drift split of a kernel, in separable superoperator form.

    ``jump_part`` is the sandwich map rho -> g^2 sum L rho L^dag;
    ``drift_op`` is W = g^2 (i H + 1/2 sum L^dag L) as an operator function;
    ``drift_part`` is the derived map rho -> A rho + rho A^dag.
    The full kernel action is jump_part - drift_part.
    """

    dim: int
    jump_part: TwoTimeSuperopFunction
    drift_op: TwoTimeOperatorFunction
    drift_part: TwoTimeSuperopFunction = field(repr=False, default=None)

    def recombined(self, t: float, tp: float) -> np.ndarray:
        return self.jump_part(t, tp) - self.drift_part(t, tp)


def drift_superop_terms(w: TwoTimeOperatorFunction):
    """Superoperator terms of rho -> A rho + rho A^dag for a separable drift operator."""
    d = w.dim
    eye = np.eye(d, dtype=complex)
    terms = []
    for p, a in w.terms:
        terms.append((p, sandwich_superop(a, eye)))
        terms.append((p.conjugate(), sandwich_superop(eye, dagger(a))))
    return terms


def split_kernel(k: GKSLKernel) -> KernelSplit:
    g2 = k.coupling**2
    jump_terms = []
    for op in k.jump_ops:
        for pk, ak in op.terms:
            for pl, al in op.terms:
                prof = profile_product(pk, pl.conjugate())
                jump_terms.append((prof, g2 * sandwich_superop(ak, dagger(al))))
    w_terms = [(p, 1j * g2 * a) for p, a in k.hermitian.terms]
    for op in k.jump_ops:
        for pk, ak in op.terms:
            for pl, al in op.terms:
                prof = profile_product(pk.conjugate(), pl)
                w_terms.append((prof, 0.5 * g2 * (dagger(ak) @ al)))
    w = TwoTimeOperatorFunction.build(k.dim, w_terms)
    return KernelSplit(
        dim=k.dim,
        jump_part=TwoTimeSuperopFunction.build(k.dim, jump_terms),
        drift_op=w,
        drift_part=TwoTimeSuperopFunction.build(k.dim, drift_superop_terms(w)),
    )


def eval_kernel_superop(k: GKSLKernel, t: float, tp: float) -> np.ndarray:
    """Dense superoperator matrix of the kernel at one admissible (t, t').

    This is the direct evaluation used for cross-checks; solvers work from the
    separable form produced by :func:`split_kernel` instead.
    """
    if tp > t:
        raise ValueError(f"kernel evaluated outside the time-ordered domain: t'={tp} > t={t}")
    d = k.dim
    eye = np.eye(d, dtype=complex)
    h = k.hermitian(t, tp)
    out = -1j * (sandwich_superop(h, eye) - sandwich_superop(eye, h))
    for op in k.jump_ops:
        el = op(t, tp)
        grams = dagger(el) @ el
        out += sandwich_superop(el, dagger(el))
        out -= 0.5 * (sandwich_superop(grams, eye) + sandwich_superop(eye, grams))
    return k.coupling**2 * out


# ---------------------------------------------------------------------------
# kernel documents


def _terms_from_doc(raw, dim: int, field_name: str):
    if not isinstance(raw, list):
        raise KernelFormatError(f"{field_name}: expected a list of terms")
    terms = []
    for i, item in enumerate(raw):
        here = f"{field_name}[{i}]"
        if not isinstance(item, dict):
            raise KernelFormatError(f"{here}: expected an object")
        if "profile" not in item:
            raise KernelFormatError(f"{here}.profile: missing")
        if "operator" not in item:
            raise KernelFormatError(f"{here}.operator: missing")
        try:
            prof = profile_from_doc(item["profile"], f"{here}.profile")
        except ProfileFormatError as exc:
            raise KernelFormatError(str(exc)) from exc
        try:
            op = matrix_from_doc(item["operator"], f"{here}.operator")
        except FormatError as exc:
            raise KernelFormatError(str(exc)) from exc
        if op.shape != (dim, dim):
            raise KernelFormatError(
                f"{here}.operator: dim {op.shape[0]} does not match kernel dim {dim}"
            )
        terms.append((prof, op))
    return terms


def _terms_to_doc(fn: TwoTimeOperatorFunction):
    return [
        {"profile": profile_to_doc(p), "operator": matrix_to_doc(a)} for p, a in fn.terms
    ]


def load_kernel_spec(doc) -> GKSLKernel:
    """Build a kernel from a parsed JSON document (dict).

    Field errors raise :class:`KernelFormatError` naming the offending field.
    """
    if not isinstance(doc, dict):
        raise KernelFormatError(f"document: expected an object, got {type(doc).__name__}")
    if "dim" not in doc:
        raise KernelFormatError("dim: missing")
    dim = doc["dim"]
    if not isinstance(dim, int) or not (MIN_DIM <= dim <= MAX_DIM):
        raise KernelFormatError(f"dim: expected an integer in [{MIN_DIM}, {MAX_DIM}], got {dim!r}")
    g = doc.get("coupling_g", 1.0)
    if not isinstance(g, (int, float)) or g < 0:
        raise KernelFormatError(f"coupling_g: expected a number >= 0, got {g!r}")
    herm = TwoTimeOperatorFunction.build(dim, _terms_from_doc(doc.get("hermitian", []), dim, "hermitian"))
    raw_jumps = doc.get("lindblad", [])
    if not isinstance(raw_jumps, list):
        raise KernelFormatError("lindblad: expected a list of operator-function term lists")
    jumps = []
    for i, raw in enumerate(raw_jumps):
        jumps.append(
            TwoTimeOperatorFunction.build(dim, _terms_from_doc(raw, dim, f"lindblad[{i}]"))
        )
    kernel = GKSLKernel.build(dim, herm, jumps, float(g))
    kernel.check_hermiticity()
    return kernel


def save_kernel_spec(k: GKSLKernel) -> dict:
    return {
        "dim": int(k.dim),
        "coupling_g": float(k.coupling),
        "hermitian": _terms_to_doc(k.hermitian),
        "lindblad": [_terms_to_doc(op) for op in k.jump_ops],
    }


def load_drift_spec(doc) -> TwoTimeOperatorFunction:
    """Parse a raw drift-operator document: {"dim": d, "drift": [term...]}.

    Raw drift operators are not constrained to the kernel-derived form (their
    Hermitian part need not be positive), which is what the counterexample
    machinery operates on.
    """
    if not isinstance(doc, dict):
        raise KernelFormatError(f"document: expected an object, got {type(doc).__name__}")
    if "dim" not in doc:
        raise KernelFormatError("dim: missing")
    dim = doc["dim"]
    if not isinstance(dim, int) or not (MIN_DIM <= dim <= MAX_DIM):
        raise KernelFormatError(f"dim: expected an integer in [{MIN_DIM}, {MAX_DIM}], got {dim!r}")
    if "drift" not in doc:
        raise KernelFormatError("drift: missing")
    return TwoTimeOperatorFunction.build(dim, _terms_from_doc(doc["drift"], dim, "drift"))


def save_drift_spec(w: TwoTimeOperatorFunction) -> dict:
    return {"dim": int(w.dim), "drift": _terms_to_doc(w)}

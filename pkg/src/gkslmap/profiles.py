"""Scalar two-time profiles c(t, t') multiplying constant operators in kernels.

The public family (the only kinds accepted in kernel documents):

* ``constant``              c
* ``exponential-decay``     exp(-kappa (t - t')), optionally times exp(i omega (t - t'))
* ``oscillatory``           exp(i omega (t - t'))
* ``gaussian``              exp(-((t - t') / tau)^2)
* ``product-separable``     f(t) g(t') with f, g single-variable factors
* ``tabulated-grid``        bilinear interpolation of a uniform sample matrix

Profiles evaluate vectorized over numpy arrays and carry a convolution
predicate (True exactly when the value depends on t - t' only).  Conjugation
and products are closed over the family plus an internal product node, which
is what lets drift operators and jump-pair coefficients stay in profile form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Profile",
    "ConstantProfile",
    "ExpProfile",
    "GaussianProfile",
    "SeparableProfile",
    "TabulatedProfile",
    "ProductProfile",
    "SingleVarFactor",
    "profile_product",
    "profile_from_doc",
    "profile_to_doc",
    "ProfileFormatError",
]


class ProfileFormatError(ValueError):
    """Malformed profile document; the message names the offending field."""


def _cplx(value, field: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) for x in value)
    ):
        return complex(value[0], value[1])
    raise ProfileFormatError(f"{field}: expected a number or [re, im] pair, got {value!r}")


def _cplx_doc(z: complex):
    if z.imag == 0.0:
        return float(z.real)
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True)
class SingleVarFactor:
    """One factor of a product-separable profile: constant, exp(rate*x) or gaussian."""

    kind: str  # "constant" | "exp" | "gaussian"
    value: complex = 1.0  # constant value
    rate: complex = 0.0  # exp factor exponent
    tau: float = 1.0  # gaussian width

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, self.value, dtype=complex)
        if self.kind == "exp":
            return np.exp(self.rate * x).astype(complex)
        if self.kind == "gaussian":
            return np.exp(-((x / self.tau) ** 2)).astype(complex)
        raise ValueError(f"unknown factor kind {self.kind!r}")

    def conjugate(self) -> "SingleVarFactor":
        return SingleVarFactor(
            self.kind, np.conj(self.value), np.conj(self.rate), self.tau
        )


class Profile:
    """Base class; subclasses implement __call__(t, tp), conjugate, is_convolution."""

    is_convolution: bool = False

    def __call__(self, t, tp):  # pragma: no cover - abstract
        raise NotImplementedError

    def conjugate(self) -> "Profile":  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantProfile(Profile):
    value: complex = 1.0
    is_convolution = True

    def __call__(self, t, tp):
        t, tp = np.broadcast_arrays(np.asarray(t, float), np.asarray(tp, float))
        return np.full(t.shape, self.value, dtype=complex)

    def conjugate(self):
        return ConstantProfile(np.conj(self.value))


@dataclass(frozen=True)
class ExpProfile(Profile):
    """exp(rate * (t - t')); rate = -kappa + i*omega covers decay and oscillation."""

    rate: complex = 0.0
    is_convolution = True

    def __call__(self, t, tp):
        t = np.asarray(t, float)
        tp = np.asarray(tp, float)
        return np.exp(self.rate * (t - tp)).astype(complex)

    def conjugate(self):
        return ExpProfile(np.conj(self.rate))


@dataclass(frozen=True)
class GaussianProfile(Profile):
    tau: float = 1.0
    is_convolution = True

    def __call__(self, t, tp):
        t = np.asarray(t, float)
        tp = np.asarray(tp, float)
        return np.exp(-(((t - tp) / self.tau) ** 2)).astype(complex)

    def conjugate(self):
        return self


@dataclass(frozen=True)
class SeparableProfile(Profile):
    """f(t) * g(t') for single-variable factors f and g."""

    f: SingleVarFactor
    g: SingleVarFactor

    def __call__(self, t, tp):
        t = np.asarray(t, float)
        tp = np.asarray(tp, float)
        return (self.f(t) * self.g(tp)).astype(complex)

    def conjugate(self):
        return SeparableProfile(self.f.conjugate(), self.g.conjugate())

    @property
    def is_convolution(self) -> bool:  # type: ignore[override]
        # f(t) g(t') depends on t - t' only for constants or matched exponentials
        kinds = {self.f.kind, self.g.kind}
        if kinds == {"constant"}:
            return True
        as_exp = []
        for fac in (self.f, self.g):
            if fac.kind == "constant":
                as_exp.append(0.0 + 0.0j)
            elif fac.kind == "exp":
                as_exp.append(complex(fac.rate))
            else:
                return False
        return as_exp[0] == -as_exp[1]


@dataclass(frozen=True)
class TabulatedProfile(Profile):
    """Bilinear interpolation of values sampled on a uniform grid of [0, t_max]^2.

    ``values[i, j]`` is the sample at (t = i * t_max / (n-1), t' = j * t_max / (n-1)).
    Evaluation outside the covered square raises, so a solve over a horizon the
    table does not cover fails loudly rather than extrapolating.
    """

    t_max: float
    values: tuple  # tuple of row-tuples of complex, kept hashable

    def __post_init__(self):
        n = len(self.values)
        if n < 2 or any(len(row) != n for row in self.values):
            raise ProfileFormatError("tabulated-grid values must form a square matrix, n >= 2")
        if not self.t_max > 0:
            raise ProfileFormatError("tabulated-grid t_max must be positive")

    def _array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)

    def __call__(self, t, tp):
        t = np.asarray(t, float)
        tp = np.asarray(tp, float)
        t, tp = np.broadcast_arrays(t, tp)
        eps = 1e-12 * max(1.0, self.t_max)
        if (t < -eps).any() or (t > self.t_max + eps).any() or (tp < -eps).any() or (
            tp > self.t_max + eps
        ).any():
            raise ValueError(
                f"tabulated profile evaluated outside [0, {self.t_max}]^2; "
                "re-tabulate with a larger t_max"
            )
        vals = self._array()
        n = vals.shape[0]
        step = self.t_max / (n - 1)
        x = np.clip(t / step, 0.0, n - 1 - 1e-12)
        y = np.clip(tp / step, 0.0, n - 1 - 1e-12)
        i0 = np.floor(x).astype(int)
        j0 = np.floor(y).astype(int)
        fx = x - i0
        fy = y - j0
        v00 = vals[i0, j0]
        v10 = vals[i0 + 1, j0]
        v01 = vals[i0, j0 + 1]
        v11 = vals[i0 + 1, j0 + 1]
        return (
            v00 * (1 - fx) * (1 - fy)
            + v10 * fx * (1 - fy)
            + v01 * (1 - fx) * fy
            + v11 * fx * fy
        ).astype(complex)

    def conjugate(self):
        conj_vals = tuple(tuple(np.conj(v) for v in row) for row in self.values)
        return TabulatedProfile(self.t_max, conj_vals)

    @staticmethod
    def from_array(t_max: float, values) -> "TabulatedProfile":
        arr = np.asarray(values, dtype=complex)
        return TabulatedProfile(t_max, tuple(tuple(complex(v) for v in row) for row in arr))


@dataclass(frozen=True)
class ProductProfile(Profile):
    """Internal product node; never serialized into kernel documents."""

    factors: tuple

    def __call__(self, t, tp):
        out = None
        for f in self.factors:
            v = f(t, tp)
            out = v if out is None else out * v
        return out

    def conjugate(self):
        return ProductProfile(tuple(f.conjugate() for f in self.factors))

    @property
    def is_convolution(self) -> bool:  # type: ignore[override]
        return all(f.is_convolution for f in self.factors)


def profile_product(a: Profile, b: Profile) -> Profile:
    """Product of two profiles, fused back into the family where possible."""
    if isinstance(a, ConstantProfile) and isinstance(b, ConstantProfile):
        return ConstantProfile(a.value * b.value)
    if isinstance(a, ExpProfile) and isinstance(b, ExpProfile):
        return ExpProfile(a.rate + b.rate)
    if isinstance(a, GaussianProfile) and isinstance(b, GaussianProfile):
        inv = 1.0 / a.tau**2 + 1.0 / b.tau**2
        return GaussianProfile(1.0 / np.sqrt(inv))
    if isinstance(a, ConstantProfile) and a.value == 1.0:
        return b
    if isinstance(b, ConstantProfile) and b.value == 1.0:
        return a
    fa = a.factors if isinstance(a, ProductProfile) else (a,)
    fb = b.factors if isinstance(b, ProductProfile) else (b,)
    return ProductProfile(fa + fb)


# ---------------------------------------------------------------------------
# document (de)serialization


def _factor_from_doc(doc, field: str) -> SingleVarFactor:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ProfileFormatError(f"{field}: expected an object with a 'kind'")
    kind = doc["kind"]
    if kind == "constant":
        return SingleVarFactor("constant", value=_cplx(doc.get("value", 1.0), f"{field}.value"))
    if kind == "exponential-decay":
        kappa = doc.get("kappa")
        if not isinstance(kappa, (int, float)):
            raise ProfileFormatError(f"{field}.kappa: expected a number")
        omega = doc.get("omega", 0.0)
        if not isinstance(omega, (int, float)):
            raise ProfileFormatError(f"{field}.omega: expected a number")
        return SingleVarFactor("exp", rate=complex(-kappa, omega))
    if kind == "oscillatory":
        omega = doc.get("omega")
        if not isinstance(omega, (int, float)):
            raise ProfileFormatError(f"{field}.omega: expected a number")
        return SingleVarFactor("exp", rate=1j * omega)
    if kind == "gaussian":
        tau = doc.get("tau")
        if not isinstance(tau, (int, float)) or tau <= 0:
            raise ProfileFormatError(f"{field}.tau: expected a positive number")
        return SingleVarFactor("gaussian", tau=float(tau))
    raise ProfileFormatError(f"{field}.kind: unknown factor kind {kind!r}")


def _factor_to_doc(fac: SingleVarFactor, field: str):
    if fac.kind == "constant":
        return {"kind": "constant", "value": _cplx_doc(complex(fac.value))}
    if fac.kind == "exp":
        rate = complex(fac.rate)
        doc = {"kind": "exponential-decay", "kappa": float(-rate.real)}
        if rate.imag:
            doc["omega"] = float(rate.imag)
        return doc
    if fac.kind == "gaussian":
        return {"kind": "gaussian", "tau": float(fac.tau)}
    raise ProfileFormatError(f"{field}: factor kind {fac.kind!r} has no document form")


def profile_from_doc(doc, field: str = "profile") -> Profile:
    """Parse a profile document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ProfileFormatError(f"{field}: expected an object, got {type(doc).__name__}")
    kind = doc.get("kind")
    if kind is None:
        raise ProfileFormatError(f"{field}.kind: missing")
    if kind == "constant":
        return ConstantProfile(_cplx(doc.get("value", 1.0), f"{field}.value"))
    if kind == "exponential-decay":
        kappa = doc.get("kappa")
        if not isinstance(kappa, (int, float)):
            raise ProfileFormatError(f"{field}.kappa: expected a number")
        omega = doc.get("omega", 0.0)
        if not isinstance(omega, (int, float)):
            raise ProfileFormatError(f"{field}.omega: expected a number")
        return ExpProfile(complex(-kappa, omega))
    if kind == "oscillatory":
        omega = doc.get("omega")
        if not isinstance(omega, (int, float)):
            raise ProfileFormatError(f"{field}.omega: expected a number")
        return ExpProfile(1j * omega)
    if kind == "gaussian":
        tau = doc.get("tau")
        if not isinstance(tau, (int, float)) or tau <= 0:
            raise ProfileFormatError(f"{field}.tau: expected a positive number")
        return GaussianProfile(float(tau))
    if kind == "product-separable":
        if "f" not in doc or "g" not in doc:
            raise ProfileFormatError(f"{field}: product-separable needs 'f' and 'g'")
        return SeparableProfile(
            _factor_from_doc(doc["f"], f"{field}.f"),
            _factor_from_doc(doc["g"], f"{field}.g"),
        )
    if kind == "tabulated-grid":
        t_max = doc.get("t_max")
        if not isinstance(t_max, (int, float)) or t_max <= 0:
            raise ProfileFormatError(f"{field}.t_max: expected a positive number")
        raw = doc.get("values")
        if not isinstance(raw, list) or len(raw) < 2:
            raise ProfileFormatError(f"{field}.values: expected a list of >= 2 rows")
        rows = []
        for i, row in enumerate(raw):
            if not isinstance(row, list) or len(row) != len(raw):
                raise ProfileFormatError(f"{field}.values[{i}]: rows must form a square matrix")
            rows.append(tuple(_cplx(v, f"{field}.values[{i}]") for v in row))
        return TabulatedProfile(float(t_max), tuple(rows))
    raise ProfileFormatError(f"{field}.kind: unknown kind {kind!r}")


def profile_to_doc(p: Profile, field: str = "profile"):
    if isinstance(p, ConstantProfile):
        return {"kind": "constant", "value": _cplx_doc(complex(p.value))}
    if isinstance(p, ExpProfile):
        rate = complex(p.rate)
        if rate.real == 0.0 and rate.imag != 0.0:
            return {"kind": "oscillatory", "omega": float(rate.imag)}
        doc = {"kind": "exponential-decay", "kappa": float(-rate.real)}
        if rate.imag:
            doc["omega"] = float(rate.imag)
        return doc
    if isinstance(p, GaussianProfile):
        return {"kind": "gaussian", "tau": float(p.tau)}
    if isinstance(p, SeparableProfile):
        return {
            "kind": "product-separable",
            "f": _factor_to_doc(p.f, f"{field}.f"),
            "g": _factor_to_doc(p.g, f"{field}.g"),
        }
    if isinstance(p, TabulatedProfile):
        return {
            "kind": "tabulated-grid",
            "t_max": float(p.t_max),
            "values": [[_cplx_doc(complex(v)) for v in row] for row in p.values],
        }
    raise ProfileFormatError(f"{field}: profile {type(p).__name__} has no document form")

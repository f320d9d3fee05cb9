"""Physics-informed creep features and loss terms.

Time-temperature parameter (TTP) models tie rupture life, temperature and
stress together as ``P(tf, T) = f(stress)`` where ``f`` is a cubic in
``log10(stress)``. Inverting that relation gives a creep-life estimate that is
appended to the model inputs. Stacking-fault energy is a closed-form function
of austenite composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .autodiff.tensor import Tensor, relu
from .data import DataError, Dataset

LARSON_MILLER = "larson_miller"
MANSON_HAFERD = "manson_haferd"
ORR_SHERBY_DORN = "orr_sherby_dorn"
TTP_KINDS = (LARSON_MILLER, MANSON_HAFERD, ORR_SHERBY_DORN)

SFE_PURE_IRON = 39.0  # mJ/m^2, austenitic iron at room temperature
COMPOSITION_COLUMNS = ("Ni", "Mn", "Cr", "Mo", "Si", "C", "N")


class PhysicsError(ValueError):
    pass


@dataclass(frozen=True)
class TtpModel:
    """One TTP parameterization plus its fitted stress polynomial.

    ``constants`` by kind:

    * larson_miller: ``{"c_lm": ...}``
    * manson_haferd: ``{"log10_t_in": ..., "t_in": ...}``
    * orr_sherby_dorn: ``{"q_over_2_3r": ...}`` (Kelvin)
    """

    kind: str
    constants: dict
    stress_poly: tuple[float, float, float, float] | None = None
    temperature_unit: str = "K"

    def __post_init__(self):
        if self.kind not in TTP_KINDS:
            raise PhysicsError(f"unknown TTP kind {self.kind!r}")
        if self.stress_poly is not None:
            if len(self.stress_poly) != 4:
                raise PhysicsError("stress polynomial needs exactly 4 coefficients")
            object.__setattr__(self, "stress_poly", tuple(float(c) for c in self.stress_poly))

    def stress_function(self, stress) -> np.ndarray:
        if self.stress_poly is None:
            raise PhysicsError("stress polynomial has not been fitted")
        stress = np.asarray(stress, dtype=np.float64)
        if np.any(stress <= 0):
            raise PhysicsError("stress must be strictly positive")
        return _log_stress_basis(stress) @ np.asarray(self.stress_poly)


def _check_temperature(model: TtpModel, T) -> np.ndarray:
    T = np.asarray(T, dtype=np.float64)
    if model.kind == MANSON_HAFERD:
        if np.any(T == model.constants["t_in"]):
            raise PhysicsError("Manson-Haferd parameter is singular at T == T_in")
    elif model.temperature_unit == "K" and np.any(T <= 0):
        raise PhysicsError("temperature must be positive in Kelvin")
    return T


def ttp_parameter(model: TtpModel, log10_tf, T):
    """Time-temperature parameter for a given log10 rupture life and temperature."""
    T = _check_temperature(model, T)
    log10_tf = np.asarray(log10_tf, dtype=np.float64)
    c = model.constants
    if model.kind == LARSON_MILLER:
        out = T * (c["c_lm"] + log10_tf)
    elif model.kind == MANSON_HAFERD:
        out = (log10_tf - c["log10_t_in"]) / (T - c["t_in"])
    else:
        out = log10_tf - c["q_over_2_3r"] / T
    return out if out.ndim else float(out)


def invert_ttp(model: TtpModel, parameter, T):
    """log10 rupture life that gives TTP value ``parameter`` at temperature ``T``."""
    T = _check_temperature(model, T)
    parameter = np.asarray(parameter, dtype=np.float64)
    c = model.constants
    if model.kind == LARSON_MILLER:
        out = parameter / T - c["c_lm"]
    elif model.kind == MANSON_HAFERD:
        out = c["log10_t_in"] + parameter * (T - c["t_in"])
    else:
        out = parameter + c["q_over_2_3r"] / T
    return out if out.ndim else float(out)


def estimate_creep_life(model: TtpModel, stress, T):
    """log10 rupture life predicted by solving ``P(tf, T) = f(stress)``."""
    return invert_ttp(model, model.stress_function(stress), T)


def _log_stress_basis(stress: np.ndarray) -> np.ndarray:
    L = np.log10(stress)
    return np.stack([np.ones_like(L), L, L ** 2, L ** 3], axis=-1)


def fit_stress_polynomial(parameters, stresses) -> tuple[float, float, float, float]:
    """Least-squares cubic fit of the TTP value on log10(stress), solved by QR."""
    P = np.asarray(parameters, dtype=np.float64).reshape(-1)
    s = np.asarray(stresses, dtype=np.float64).reshape(-1)
    if P.shape != s.shape:
        raise PhysicsError("parameters and stresses differ in length")
    if P.size < 4:
        raise PhysicsError("at least 4 (parameter, stress) pairs are needed")
    if np.any(s <= 0):
        raise PhysicsError("stress must be strictly positive")
    A = _log_stress_basis(s)
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * diag.max():
        raise PhysicsError("stress values do not determine a cubic (rank-deficient design)")
    coef = np.linalg.solve(R, Q.T @ P)
    return tuple(float(c) for c in coef)


def _residual_ss(parameters, stresses) -> float:
    A = _log_stress_basis(stresses)
    coef, *_ = np.linalg.lstsq(A, parameters, rcond=None)
    r = parameters - A @ coef
    return float(r @ r)


def fit_ttp(kind: str, log10_tf, T, stress, constants: dict | str | None = None,
            temperature_unit: str = "K") -> TtpModel:
    """Fit the stress polynomial for one TTP kind on training data.

    For Manson-Haferd with ``constants == "fit"`` (or missing), the
    intersection point ``(log10 t_in, T_in)`` is chosen by grid search
    minimizing the residual of the cubic fit.
    """
    log10_tf = np.asarray(log10_tf, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    stress = np.asarray(stress, dtype=np.float64)
    if kind == MANSON_HAFERD and (constants is None or constants == "fit"):
        constants = fit_manson_haferd_constants(log10_tf, T, stress)
    if constants is None or constants == "fit":
        constants = dict(DEFAULT_TTP_CONSTANTS[kind])
    model = TtpModel(kind, dict(constants), None, temperature_unit)
    P = ttp_parameter(model, log10_tf, T)
    return replace(model, stress_poly=fit_stress_polynomial(P, stress))


DEFAULT_TTP_CONSTANTS = {
    LARSON_MILLER: {"c_lm": 20.0},
    ORR_SHERBY_DORN: {"q_over_2_3r": 20000.0},
}


def fit_manson_haferd_constants(log10_tf, T, stress, n_log_t: int = 29, n_t: int = 40) -> dict:
    """Grid search for the Manson-Haferd intersection point.

    ``log10 t_in`` ranges over [8, 22] and ``T_in`` over
    [min(T) - 400, min(T) - 10].
    """
    t_min = float(np.min(T))
    best = None
    for log_t_in in np.linspace(8.0, 22.0, n_log_t):
        for t_in in np.linspace(t_min - 400.0, t_min - 10.0, n_t):
            P = (log10_tf - log_t_in) / (T - t_in)
            # residual measured relative to the spread of P so different T_in are comparable
            scale = float(np.var(P)) * P.size
            if scale <= 0:
                continue
            rss = _residual_ss(P, stress) / scale
            if best is None or rss < best[0]:
                best = (rss, float(log_t_in), float(t_in))
    if best is None:
        raise PhysicsError("Manson-Haferd grid search found no usable point")
    return {"log10_t_in": best[1], "t_in": best[2]}


@dataclass(frozen=True)
class Composition:
    """Alloy composition in mass percent."""

    Ni: float = 0.0
    Mn: float = 0.0
    Cr: float = 0.0
    Mo: float = 0.0
    Si: float = 0.0
    C: float = 0.0
    N: float = 0.0

    def __post_init__(self):
        for name in COMPOSITION_COLUMNS:
            if getattr(self, name) < 0:
                raise PhysicsError(f"negative weight percent for {name}")


def stacking_fault_energy(c: Composition) -> float:
    """Stacking-fault energy of an austenitic stainless steel in mJ/m^2."""
    cn = c.C + 1.2 * c.N
    inner = c.C + 1.2 * c.Cr + c.Mn + c.Mo
    ni_term = c.Ni * (c.Cr + c.Mn)
    if cn < 0 or inner < 0 or ni_term < 0:
        raise PhysicsError("negative radicand in stacking-fault energy")
    return (
        SFE_PURE_IRON
        + 1.59 * c.Ni
        - 1.34 * c.Mn
        + 0.06 * c.Mn ** 2
        - 1.75 * c.Cr
        + 0.01 * c.Cr ** 2
        + 15.21 * c.Mo
        - 5.59 * c.Si
        - 60.69 * math.sqrt(cn)
        + 26.27 * cn * math.sqrt(inner)
        + 0.6 * math.sqrt(ni_term)
    )


def pi_loss_terms(predictions, upper_bound: float):
    """Mean violations of ``0 <= y* <= a``.

    Works on arrays (returns floats) and on :class:`Tensor` predictions
    (returns differentiable scalars).
    """
    if upper_bound <= 0:
        raise PhysicsError("upper bound must be positive")
    if isinstance(predictions, Tensor):
        return relu(-predictions).mean(), relu(predictions - upper_bound).mean()
    y = np.asarray(predictions, dtype=np.float64)
    return float(np.maximum(-y, 0.0).mean()), float(np.maximum(y - upper_bound, 0.0).mean())


def composite_pi_loss(base_loss, l_b1, l_b2, lambda1: float, lambda2: float):
    if lambda1 < 0 or lambda2 < 0:
        raise PhysicsError("loss weights must be non-negative")
    return base_loss + lambda1 * l_b1 + lambda2 * l_b2


@dataclass(frozen=True)
class PhysicsSpec:
    """What physics to inject: TTP feature, SFE feature and loss weights."""

    ttp_kind: str | None = None
    ttp_constants: dict | str | None = None
    include_sfe: bool = False
    lambda1: float = 0.1
    lambda2: float = 0.1
    upper_bound: float | None = None
    use_loss: bool = False
    temperature_column: str = "T"
    stress_column: str = "stress"
    composition_columns: dict = field(default_factory=lambda: {k: k for k in COMPOSITION_COLUMNS})

    @classmethod
    def from_dict(cls, d: dict | None) -> "PhysicsSpec":
        return cls(**(d or {}))


def augment_features(ds: Dataset, ttp: TtpModel | None, include_sfe: bool = False,
                     spec: PhysicsSpec | None = None) -> Dataset:
    """Append the TTP creep-life estimate and optionally SFE as new columns."""
    spec = spec or PhysicsSpec()
    names, cols = [], []
    if ttp is not None:
        unit = ds.metadata.get("temperature_unit", ttp.temperature_unit)
        if unit != ttp.temperature_unit:
            raise PhysicsError(f"dataset temperature unit {unit!r} differs from TTP unit {ttp.temperature_unit!r}")
        try:
            T = ds.column(spec.temperature_column)
            stress = ds.column(spec.stress_column)
        except DataError as exc:
            raise PhysicsError(f"cannot compute TTP feature: {exc}") from None
        names.append(f"ttp_{ttp.kind}_log10_tf")
        cols.append(estimate_creep_life(ttp, stress, T))
    if include_sfe:
        try:
            comp = {el: ds.column(col) for el, col in spec.composition_columns.items()}
        except DataError as exc:
            raise PhysicsError(f"cannot compute SFE feature: {exc}") from None
        sfe = [stacking_fault_energy(Composition(**{el: float(v[i]) for el, v in comp.items()}))
               for i in range(ds.n_samples)]
        names.append("sfe")
        cols.append(np.asarray(sfe))
    if not names:
        return ds
    out = ds.with_columns(names, np.column_stack(cols))
    return replace(out, metadata={**ds.metadata, "physics_columns": names})


def fit_physics_features(train: Dataset, spec: PhysicsSpec) -> TtpModel | None:
    """Fit the TTP model for ``spec`` on a (log10-target) training set."""
    if spec.ttp_kind is None:
        return None
    if not train.target_transformed:
        raise PhysicsError("TTP fitting expects a log10-transformed target")
    unit = train.metadata.get("temperature_unit", "K")
    return fit_ttp(spec.ttp_kind, train.target, train.column(spec.temperature_column),
                   train.column(spec.stress_column), spec.ttp_constants, unit)


def default_upper_bound(train_target: Sequence[float]) -> float:
    """Largest observed log10 rupture life plus one decade."""
    return float(np.max(train_target)) + 1.0

"""Classical thermodynamics utilities: extended Raoult's law, Antoine
vapor pressures, isothermal bubble points, and analytic excess-Gibbs
reference models (two-suffix Margules, NRTL) used as synthetic ground
truth.

Pressures carry explicit unit tags and are never converted implicitly;
mixing tagged values with different units raises UnitMismatchError.
Plain floats are accepted wherever units cancel algebraically.

NRTL closed form used throughout (binary, composition-independent
parameters tau12, tau21, alpha):

    G12 = exp(-alpha*tau12),  G21 = exp(-alpha*tau21)
    ln gamma1 = x2^2 * [ tau21*(G21/(x1 + x2*G21))^2
                         + tau12*G12/(x2 + x1*G12)^2 ]
    ln gamma2 = x1^2 * [ tau12*(G12/(x2 + x1*G12))^2
                         + tau21*G21/(x1 + x2*G21)^2 ]
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import GammaRecord, system_id_for
from .errors import DataValidationError, DomainError, UnitMismatchError

__all__ = [
    "DEFAULT_MAX_PRESSURE",
    "AntoineParams",
    "Pressure",
    "ReferenceGeModel",
    "antoine_pressure",
    "assign_reference_model",
    "bubble_point_isothermal",
    "gamma_from_vle",
    "gamma_record_from_vle_point",
    "load_antoine_table",
    "reference_gammas",
    "synthesize_dataset",
]


@dataclass(frozen=True)
class Pressure:
    """A pressure value with a declared unit tag."""

    value: float
    unit: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("non-finite pressure")


def _pressure_pair(a, b, what: str) -> tuple[float, float, str | None]:
    """Extract two pressure magnitudes, enforcing matching units.

    Both tagged: units must agree.  Both plain floats: fine.  One of
    each is ambiguous and rejected.
    """
    a_tagged = isinstance(a, Pressure)
    b_tagged = isinstance(b, Pressure)
    if a_tagged != b_tagged:
        raise UnitMismatchError(f"{what}: cannot mix tagged and untagged pressures")
    if a_tagged:
        if a.unit != b.unit:
            raise UnitMismatchError(f"{what}: units {a.unit!r} and {b.unit!r} differ")
        return a.value, b.value, a.unit
    return float(a), float(b), None


@dataclass(frozen=True)
class AntoineParams:
    """Base-10 Antoine coefficients with validity range and unit tag."""

    A: float
    B: float
    C: float
    T_min: float
    T_max: float
    unit: str = "kPa"

    def __post_init__(self):
        for name in ("A", "B", "C", "T_min", "T_max"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"non-finite Antoine parameter {name}")
        if not self.T_min < self.T_max:
            raise DomainError("Antoine T_min must be below T_max")


def antoine_pressure(params: AntoineParams, T: float) -> Pressure:
    """pS = 10^(A - B/(C + T)) in the declared unit.

    Temperatures outside the declared range produce a warning, not an
    error; C + T = 0 is a domain error.
    """
    denom = params.C + T
    if denom == 0.0:
        raise DomainError(f"Antoine denominator C + T vanishes at T={T}")
    if not (params.T_min <= T <= params.T_max):
        warnings.warn(
            f"temperature {T} K outside Antoine range "
            f"[{params.T_min}, {params.T_max}] K",
            stacklevel=2,
        )
    return Pressure(10.0 ** (params.A - params.B / denom), params.unit)


def gamma_from_vle(p, y: float, x: float, pS) -> float:
    """Activity coefficient from one VLE point: gamma = p*y/(pS*x)."""
    pv, psv, _ = _pressure_pair(p, pS, "gamma_from_vle")
    if x <= 0.0 or x > 1.0:
        raise DomainError(f"liquid fraction x must be in (0, 1], got {x}")
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"vapor fraction y must be in [0, 1], got {y}")
    if pv <= 0.0 or psv <= 0.0:
        raise DomainError("pressures must be positive")
    return pv * y / (psv * x)


def bubble_point_isothermal(x1: float, gamma1: float, gamma2: float, p1S, p2S):
    """Total pressure and vapor composition at fixed liquid composition.

    p = x1*gamma1*p1S + (1 - x1)*gamma2*p2S and y1 = x1*gamma1*p1S/p,
    assuming an ideal-gas vapor phase.  Returns (p, y1) with p tagged
    when the pure-component pressures are tagged.
    """
    p1v, p2v, unit = _pressure_pair(p1S, p2S, "bubble_point_isothermal")
    if not 0.0 <= x1 <= 1.0:
        raise DomainError(f"x1 must be in [0, 1], got {x1}")
    if gamma1 <= 0.0 or gamma2 <= 0.0:
        raise DomainError("activity coefficients must be positive")
    if p1v <= 0.0 or p2v <= 0.0:
        raise DomainError("pure-component pressures must be positive")
    part1 = x1 * gamma1 * p1v
    p = part1 + (1.0 - x1) * gamma2 * p2v
    if p == 0.0:
        raise DomainError("degenerate bubble point: total pressure is zero")
    y1 = part1 / p
    if unit is not None:
        return Pressure(p, unit), y1
    return p, y1


def load_antoine_table(path) -> dict[str, AntoineParams]:
    """Read CSV `smiles,A,B,C,Tmin_K,Tmax_K,unit` into a lookup map."""
    import csv

    from .errors import TableFormatError

    expected = ["smiles", "A", "B", "C", "Tmin_K", "Tmax_K", "unit"]
    out: dict[str, AntoineParams] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableFormatError("empty Antoine file", line=1) from None
        if header != expected:
            raise TableFormatError(
                f"Antoine header must be {','.join(expected)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise TableFormatError(f"expected 7 cells, got {len(row)}", line=lineno)
            smiles = row[0]
            if smiles in out:
                raise TableFormatError(f"duplicate SMILES {smiles!r}", line=lineno)
            try:
                a, b, c, tmin, tmax = (float(v) for v in row[1:6])
            except ValueError:
                raise TableFormatError("malformed numeric cell", line=lineno) from None
            out[smiles] = AntoineParams(a, b, c, tmin, tmax, row[6])
    return out


DEFAULT_MAX_PRESSURE = Pressure(10.0, "bar")


def gamma_record_from_vle_point(smiles_1: str, smiles_2: str, T: float,
                                p, x1: float, y1: float,
                                antoine1: AntoineParams, antoine2: AntoineParams,
                                max_pressure: Pressure = DEFAULT_MAX_PRESSURE):
    """Convert one measured VLE point into a GammaRecord via extended
    Raoult's law, or None when the total pressure exceeds the cutoff.

    The cutoff comparison requires the measured pressure to carry the
    same unit tag as ``max_pressure`` (default 10 bar); callers with
    data in other units must pass a matching cutoff.  At x1 = 0 or 1
    only the diluted component's activity coefficient is produced.
    """
    if not isinstance(p, Pressure):
        raise UnitMismatchError("measured VLE pressure must carry a unit tag")
    pv, cutoff, _ = _pressure_pair(p, max_pressure, "VLE pressure cutoff")
    if pv > cutoff:
        return None
    p1S = antoine_pressure(antoine1, T)
    p2S = antoine_pressure(antoine2, T)
    ln1 = math.log(gamma_from_vle(p, y1, x1, p1S)) if x1 > 0.0 else None
    ln2 = math.log(gamma_from_vle(p, 1.0 - y1, 1.0 - x1, p2S)) if x1 < 1.0 else None
    return GammaRecord(
        system_id=system_id_for(smiles_1, smiles_2),
        smiles_1=smiles_1, smiles_2=smiles_2, T=T, x1=x1,
        ln_gamma1=ln1, ln_gamma2=ln2, source_tag="vle",
    )


# ---------------------------------------------------------------------------
# Analytic reference models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceGeModel:
    """Analytic gE model: two-suffix Margules or binary NRTL."""

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind == "margules":
            required = {"A12"}
        elif self.kind == "nrtl":
            required = {"tau12", "tau21", "alpha"}
        else:
            raise DomainError(f"unknown reference model kind {self.kind!r}")
        missing = required - set(self.params)
        if missing:
            raise DomainError(f"{self.kind} model missing parameters {sorted(missing)}")
        for k in required:
            if not math.isfinite(self.params[k]):
                raise DomainError(f"non-finite parameter {k}")
        if self.kind == "nrtl":
            alpha = self.params["alpha"]
            if not 0.0 < alpha <= 1.0:
                raise DomainError(f"NRTL alpha must be in (0, 1], got {alpha}")


def reference_gammas(m: ReferenceGeModel, x1):
    """Analytic (ln gamma1, ln gamma2); satisfies Gibbs-Duhem exactly.

    Accepts a scalar or array x1 in [0, 1].
    """
    x1 = np.asarray(x1, dtype=np.float64)
    if np.any((x1 < 0.0) | (x1 > 1.0)):
        raise DomainError("x1 must be in [0, 1]")
    x2 = 1.0 - x1
    if m.kind == "margules":
        A = m.params["A12"]
        ln1 = A * x2 * x2
        ln2 = A * x1 * x1
    else:
        t12 = m.params["tau12"]
        t21 = m.params["tau21"]
        alpha = m.params["alpha"]
        G12 = math.exp(-alpha * t12)
        G21 = math.exp(-alpha * t21)
        d1 = x1 + x2 * G21
        d2 = x2 + x1 * G12
        ln1 = x2 * x2 * (t21 * (G21 / d1) ** 2 + t12 * G12 / (d2 * d2))
        ln2 = x1 * x1 * (t12 * (G12 / d2) ** 2 + t21 * G21 / (d1 * d1))
    if ln1.ndim == 0:
        return float(ln1), float(ln2)
    return ln1, ln2


# ---------------------------------------------------------------------------
# Synthetic dataset generation
# ---------------------------------------------------------------------------

_REFERENCE_T = 300.0


def _pair_latents(seed: int, dim: int):
    """Seeded projection used to turn descriptors into model parameters."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    return rng.normal(size=(4, dim)) / math.sqrt(dim)


def assign_reference_model(kind: str, v1: np.ndarray, v2: np.ndarray,
                           proj: np.ndarray, T: float) -> ReferenceGeModel:
    """Deterministic model for one ordered pair of descriptor vectors.

    Parameters vary smoothly with the descriptors (so nearby components
    behave similarly and held-out systems are learnable) and scale with
    inverse temperature around 300 K.  Swapping the components mirrors
    tau12/tau21 and leaves Margules A12 and alpha unchanged.
    """
    z1 = proj @ np.asarray(v1, dtype=np.float64)
    z2 = proj @ np.asarray(v2, dtype=np.float64)
    scale = _REFERENCE_T / float(T)
    if kind == "mixed":
        kind = "margules" if z1[0] + z2[0] >= 0.0 else "nrtl"
    if kind == "margules":
        A = 2.0 * math.tanh(0.9 * (z1[0] * z2[0] + 0.5 * (z1[1] + z2[1])))
        return ReferenceGeModel("margules", {"A12": A * scale})
    if kind == "nrtl":
        t12 = 1.2 * math.tanh(0.7 * z1[2] - 0.7 * z2[3]) * scale
        t21 = 1.2 * math.tanh(0.7 * z2[2] - 0.7 * z1[3]) * scale
        alpha = 0.325 + 0.125 * math.tanh(0.5 * (z1[3] + z2[3]))
        return ReferenceGeModel("nrtl", {"tau12": t12, "tau21": t21, "alpha": alpha})
    raise DomainError(f"unknown oracle kind {kind!r}")


def synthesize_dataset(component_table, kind: str, T_grid, x_grid,
                       noise_sigma: float, seed: int) -> list[GammaRecord]:
    """Generate GammaRecords for every unordered component pair.

    Each pair gets a reference model whose parameters derive
    deterministically from the pair's descriptor vectors; optional
    Gaussian noise is added to ln gamma.  Output is deterministic given
    the seed, with pairs in sorted order.
    """
    smiles = sorted(component_table.smiles)
    if len(smiles) < 2:
        raise DataValidationError("need at least two components to form pairs")
    if noise_sigma < 0.0:
        raise DomainError("noise sigma must be nonnegative")
    T_grid = [float(t) for t in T_grid]
    x_grid = [float(x) for x in x_grid]
    if not T_grid or not x_grid:
        raise DomainError("temperature and composition grids must be non-empty")
    proj = _pair_latents(seed, component_table.dim)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x0153]))
    source = f"synth-{kind}"
    records: list[GammaRecord] = []
    for i in range(len(smiles)):
        for j in range(i + 1, len(smiles)):
            s1, s2 = smiles[i], smiles[j]
            v1, v2 = component_table[s1], component_table[s2]
            sys_id = system_id_for(s1, s2)
            for T in T_grid:
                model = assign_reference_model(kind, v1, v2, proj, T)
                for x1 in x_grid:
                    ln1, ln2 = reference_gammas(model, x1)
                    if noise_sigma > 0.0:
                        ln1 += rng.normal(0.0, noise_sigma)
                        ln2 += rng.normal(0.0, noise_sigma)
                    records.append(GammaRecord(
                        system_id=sys_id, smiles_1=s1, smiles_2=s2,
                        T=T, x1=x1, ln_gamma1=float(ln1), ln_gamma2=float(ln2),
                        source_tag=source,
                    ))
    return records

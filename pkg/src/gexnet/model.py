"""The hard-constraint excess-Gibbs-energy network.

Architecture: a component embedding network f_theta (one hidden SiLU
layer, linear output) refines each descriptor; f_alpha (two hidden SiLU
layers, linear output) embeds [f_theta(E), T*, x] per component; the two
mixture embeddings are sum-aggregated and f_phi (one hidden SiLU layer,
linear scalar output) predicts a preliminary value that is multiplied by
x1*(1-x1) and by the cosine distance between the component embeddings:

    gE/RT = f_phi(sum_i f_alpha([f_theta(E_i), T*, x_i]))
            * x1 * (1 - x1) * (1 - cos(f_theta(E1), f_theta(E2)))

Activity coefficients follow from the exact composition derivative g' of
g = gE/RT carried by the tape:

    ln gamma1 = g + (1 - x1) * g'      ln gamma2 = g - x1 * g'

Three structural facts make the physics exact for every parameter
setting, not merely approximate:

 - the prefactor x1*(1-x1) zeroes g and both pure-limit ln gammas;
 - bitwise-equal descriptors give bitwise-equal embeddings, and the
   cosine distance is computed as 1 - s/sqrt(n1*n2) with a single
   square root of the product, which IEEE arithmetic evaluates to
   exactly zero in that case;
 - both component slots are computed by the same code path and merged
   only through commutative operations (one addition, one product), so
   swapping the slots permutes the outputs bit-exactly.

Ablation variants drop the constraint construction: ablation1 predicts
ln gamma_i = f_phi([C_i, C_j]) from the concatenated mixture embeddings,
ablation2 predicts ln gamma_i = f_phi(C_i) per component; both report
gE/RT = x1*ln_gamma1 + (1-x1)*ln_gamma2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, Tape, silu
from .data import StandardizationStats
from .errors import CheckpointError, DataValidationError, DegenerateEmbeddingError, DomainError

__all__ = [
    "VARIANTS",
    "ArchitectureConfig",
    "Checkpoint",
    "GammaPrediction",
    "cosine_distance",
    "embed_component",
    "expected_parameter_shapes",
    "forward_slots",
    "init_parameters",
    "load_checkpoint",
    "predict_gammas",
    "predict_slots",
    "save_checkpoint",
    "validate_parameters",
]

VARIANTS = ("hanna", "ablation1", "ablation2")

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ArchitectureConfig:
    """Network widths and variant selector.

    f_theta has one hidden layer, f_alpha two, f_phi one; all hidden
    layers share the same width and SiLU activation; output layers are
    linear.  The f_alpha input width is the embedding width plus two
    (standardized temperature and the component's own mole fraction).
    """

    descriptor_dim: int = 384
    hidden: int = 96
    variant: str = "hanna"

    def __post_init__(self):
        if self.descriptor_dim <= 0:
            raise DomainError(f"descriptor_dim must be positive, got {self.descriptor_dim}")
        if self.hidden <= 0:
            raise DomainError(f"hidden width must be positive, got {self.hidden}")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass
class GammaPrediction:
    """Batched predictions; index i of each array is one query."""

    ln_gamma1: np.ndarray
    ln_gamma2: np.ndarray
    gE_over_RT: np.ndarray


def expected_parameter_shapes(config: ArchitectureConfig) -> dict[str, tuple[tuple, int]]:
    """Ordered map name -> ((shape), fan_in) for the given architecture."""
    d, h = config.descriptor_dim, config.hidden
    shapes: dict[str, tuple[tuple, int]] = {
        "theta.w0": ((d, h), d),
        "theta.b0": ((h,), d),
        "theta.w1": ((h, h), h),
        "theta.b1": ((h,), h),
        # f_alpha layer 0 consumes [embedding, T*, x]; the weight matrix is
        # stored split by input block, fan_in is the full width h + 2
        "alpha.w0": ((h, h), h + 2),
        "alpha.wT": ((1, h), h + 2),
        "alpha.wx": ((1, h), h + 2),
        "alpha.b0": ((h,), h + 2),
        "alpha.w1": ((h, h), h),
        "alpha.b1": ((h,), h),
        "alpha.w2": ((h, h), h),
        "alpha.b2": ((h,), h),
    }
    if config.variant == "ablation1":
        # concatenated [C_i, C_j] input, stored split by slot
        shapes.update({
            "phi.w0a": ((h, h), 2 * h),
            "phi.w0b": ((h, h), 2 * h),
            "phi.b0": ((h,), 2 * h),
        })
    else:
        shapes.update({
            "phi.w0": ((h, h), h),
            "phi.b0": ((h,), h),
        })
    shapes.update({
        "phi.w1": ((h, 1), h),
        "phi.b1": ((1,), h),
    })
    return shapes


def init_parameters(config: ArchitectureConfig, seed: int) -> dict[str, np.ndarray]:
    """Seeded uniform initialization in +/- 1/sqrt(fan_in) per layer."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, (shape, fan_in) in expected_parameter_shapes(config).items():
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def validate_parameters(params: dict[str, np.ndarray], config: ArchitectureConfig) -> None:
    """Exact name/shape/finiteness check against the architecture."""
    expected = expected_parameter_shapes(config)
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise CheckpointError(
            f"parameter names do not match architecture (missing {missing}, extra {extra})"
        )
    for name, (shape, _) in expected.items():
        arr = np.asarray(params[name])
        if arr.shape != shape:
            raise CheckpointError(
                f"parameter {name} has shape {arr.shape}, expected {shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"parameter {name} contains non-finite values")


def cosine_distance(a, b) -> float:
    """1 - a.b/(|a||b|), in [0, 2]; zero-norm input is an error."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataValidationError("cosine_distance expects two congruent 1-D vectors")
    s = float(np.dot(a, b))
    n1 = float(np.dot(a, a))
    n2 = float(np.dot(b, b))
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateEmbeddingError("cosine distance of a zero-norm embedding")
    return 1.0 - s / math.sqrt(n1 * n2)


def embed_component(E, params: dict[str, np.ndarray]) -> np.ndarray:
    """f_theta on standardized descriptors: one hidden SiLU layer, linear out."""
    E = np.asarray(E, dtype=np.float64)
    h1 = silu(E @ params["theta.w0"] + params["theta.b0"])
    return h1 @ params["theta.w1"] + params["theta.b1"]


# ---------------------------------------------------------------------------
# Tape forward passes
# ---------------------------------------------------------------------------


def _theta_on_tape(tape: Tape, p: dict[str, Node], E: np.ndarray) -> Node:
    e = tape.constant(E)
    h1 = tape.silu(tape.matmul(e, p["theta.w0"]) + p["theta.b0"])
    return tape.matmul(h1, p["theta.w1"]) + p["theta.b1"]


def _alpha_on_tape(tape: Tape, p: dict[str, Node], emb: Node, tstar: Node,
                   x: Node) -> Node:
    z = tape.matmul(emb, p["alpha.w0"]) + tape.matmul(x, p["alpha.wx"])
    z = z + tape.matmul(tstar, p["alpha.wT"]) + p["alpha.b0"]
    z0 = tape.silu(z)
    z1 = tape.silu(tape.matmul(z0, p["alpha.w1"]) + p["alpha.b1"])
    return tape.matmul(z1, p["alpha.w2"]) + p["alpha.b2"]


def _phi_on_tape(tape: Tape, p: dict[str, Node], S: Node) -> Node:
    f0 = tape.silu(tape.matmul(S, p["phi.w0"]) + p["phi.b0"])
    return tape.matmul(f0, p["phi.w1"]) + p["phi.b1"]


def _phi_concat_on_tape(tape: Tape, p: dict[str, Node], Cown: Node, Cother: Node) -> Node:
    z = tape.matmul(Cown, p["phi.w0a"]) + tape.matmul(Cother, p["phi.w0b"])
    f0 = tape.silu(z + p["phi.b0"])
    return tape.matmul(f0, p["phi.w1"]) + p["phi.b1"]


def _row_dot(tape: Tape, a: Node, b: Node) -> Node:
    return tape.sum(a * b, axis=1, keepdims=True)


def forward_slots(tape: Tape, p: dict[str, Node], config: ArchitectureConfig,
                  Ea: np.ndarray, xa: np.ndarray, Eb: np.ndarray, xb: np.ndarray,
                  Tstar: np.ndarray) -> tuple[Node, Node, Node]:
    """Batched forward pass over component slots a and b.

    Ea, Eb: (n, D) standardized descriptors; xa, xb: (n, 1) mole
    fractions of the two slots (callers supply xb = 1 - xa once, so the
    complement is never recomputed); Tstar: (n, 1) standardized
    temperature.  Returns (gE_over_RT, ln_gamma_a, ln_gamma_b) nodes.

    For the hanna variant the slot-a fraction is seeded with derivative
    +1 and slot b with -1, so the tape's dx1 channel is the derivative
    with respect to the slot-a fraction.  Swapping the slot tuples
    negates that seed pattern, which IEEE arithmetic carries through to
    an exactly negated derivative, making the swapped ln gammas
    bit-identical to the originals in exchanged order.
    """
    tstar = tape.constant(Tstar)
    emb_a = _theta_on_tape(tape, p, Ea)
    emb_b = _theta_on_tape(tape, p, Eb)
    if config.variant == "hanna":
        xa_n = tape.seed_input(xa, 1.0)
        xb_n = tape.seed_input(xb, -1.0)
    else:
        xa_n = tape.constant(xa)
        xb_n = tape.constant(xb)
    Ca = _alpha_on_tape(tape, p, emb_a, tstar, xa_n)
    Cb = _alpha_on_tape(tape, p, emb_b, tstar, xb_n)

    if config.variant == "hanna":
        s = _row_dot(tape, emb_a, emb_b)
        n1 = _row_dot(tape, emb_a, emb_a)
        n2 = _row_dot(tape, emb_b, emb_b)
        if np.any(n1.value == 0.0) or np.any(n2.value == 0.0):
            raise DegenerateEmbeddingError(
                "zero-norm component embedding; cosine distance undefined"
            )
        cd = tape.constant(1.0) - s / tape.sqrt(n1 * n2)
        gnn = _phi_on_tape(tape, p, Ca + Cb)
        # multiply the commutative slot product first so slot exchange is
        # bit-exact despite floating-point non-associativity
        gE = (gnn * (xa_n * xb_n)) * cd
        gp = tape.tangent(gE)
        ln_a = gE + xb_n * gp
        ln_b = gE - xa_n * gp
        return gE, ln_a, ln_b

    if config.variant == "ablation1":
        ln_a = _phi_concat_on_tape(tape, p, Ca, Cb)
        ln_b = _phi_concat_on_tape(tape, p, Cb, Ca)
    else:
        ln_a = _phi_on_tape(tape, p, Ca)
        ln_b = _phi_on_tape(tape, p, Cb)
    gE = xa_n * ln_a + xb_n * ln_b
    return gE, ln_a, ln_b


def _as_batch(E, dim: int, n: int, what: str) -> np.ndarray:
    arr = np.asarray(E, dtype=np.float64)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n, arr.shape[0]))
    if arr.ndim != 2 or arr.shape != (n, dim):
        raise DataValidationError(f"{what} must have shape ({n}, {dim}), got {arr.shape}")
    return arr


def _as_column(v, n: int, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.size == 1:
        arr = np.full(n, arr[0])
    if arr.shape != (n,):
        raise DataValidationError(f"{what} must be scalar or length {n}")
    return arr.reshape(n, 1)


def predict_slots(params: dict[str, np.ndarray], config: ArchitectureConfig,
                  Ea, xa, Eb, xb, Tstar) -> GammaPrediction:
    """Slot-level prediction with explicit fractions for both slots.

    This is the exchange-safe entry point: calling it again with the
    (Ea, xa) and (Eb, xb) tuples swapped returns bit-identical values
    with ln_gamma1 and ln_gamma2 exchanged.
    """
    xa_arr = np.asarray(xa, dtype=np.float64).reshape(-1)
    n = max(xa_arr.size, np.asarray(Tstar, dtype=np.float64).reshape(-1).size)
    Ea = _as_batch(Ea, config.descriptor_dim, n, "Ea")
    Eb = _as_batch(Eb, config.descriptor_dim, n, "Eb")
    xa_col = _as_column(xa, n, "xa")
    xb_col = _as_column(xb, n, "xb")
    tstar = _as_column(Tstar, n, "Tstar")
    if np.any((xa_col < 0.0) | (xa_col > 1.0)) or np.any((xb_col < 0.0) | (xb_col > 1.0)):
        raise DomainError("mole fractions must lie in [0, 1]")
    tape = Tape()
    p = {name: tape.constant(value) for name, value in params.items()}
    gE, ln_a, ln_b = forward_slots(tape, p, config, Ea, xa_col, Eb, xb_col, tstar)
    return GammaPrediction(
        ln_gamma1=ln_a.value.reshape(-1).copy(),
        ln_gamma2=ln_b.value.reshape(-1).copy(),
        gE_over_RT=gE.value.reshape(-1).copy(),
    )


def predict_gammas(params: dict[str, np.ndarray], config: ArchitectureConfig,
                   E1, E2, Tstar, x1) -> GammaPrediction:
    """Predict ln gamma1, ln gamma2, gE/RT for standardized inputs.

    x1 may be a scalar or an array; the complement 1 - x1 is computed
    exactly once here and passed to the slot core unchanged.
    """
    x1_arr = np.asarray(x1, dtype=np.float64)
    return predict_slots(params, config, E1, x1_arr, E2, 1.0 - x1_arr, Tstar)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    """A loaded model: architecture, scaler statistics, parameters."""

    config: ArchitectureConfig
    stats: StandardizationStats
    params: dict[str, np.ndarray]
    seed: int
    metadata: dict = field(default_factory=dict)


def save_checkpoint(path, params: dict[str, np.ndarray], config: ArchitectureConfig,
                    stats: StandardizationStats, seed: int, metadata: dict | None = None) -> None:
    """Write a versioned JSON checkpoint.

    Floats are serialized as shortest-round-trip decimals (at most 17
    significant digits), so reloading reproduces every value exactly.
    """
    validate_parameters(params, config)
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture": {
            "descriptor_dim": config.descriptor_dim,
            "hidden": config.hidden,
            "variant": config.variant,
        },
        "standardization": {
            "descriptor_mean": stats.descriptor_mean.tolist(),
            "descriptor_std": stats.descriptor_std.tolist(),
            "T_mean": stats.T_mean,
            "T_std": stats.T_std,
        },
        "parameters": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).reshape(-1).tolist()}
            for name, arr in params.items()
        },
        "seed": int(seed),
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> Checkpoint:
    """Read and fully validate a checkpoint written by save_checkpoint."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint root must be an object")
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    try:
        arch = doc["architecture"]
        config = ArchitectureConfig(
            descriptor_dim=int(arch["descriptor_dim"]),
            hidden=int(arch["hidden"]),
            variant=str(arch["variant"]),
        )
        std = doc["standardization"]
        stats = StandardizationStats(
            descriptor_mean=np.asarray(std["descriptor_mean"], dtype=np.float64),
            descriptor_std=np.asarray(std["descriptor_std"], dtype=np.float64),
            T_mean=float(std["T_mean"]),
            T_std=float(std["T_std"]),
        )
        raw_params = doc["parameters"]
        seed = int(doc["seed"])
        metadata = doc.get("metadata", {})
    except (KeyError, TypeError, ValueError, DomainError, DataValidationError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from None
    if stats.descriptor_mean.shape[0] != config.descriptor_dim:
        raise CheckpointError(
            f"standardization dimension {stats.descriptor_mean.shape[0]} does not "
            f"match descriptor_dim {config.descriptor_dim}"
        )
    params: dict[str, np.ndarray] = {}
    for name, entry in raw_params.items():
        try:
            shape = tuple(int(s) for s in entry["shape"])
            flat = np.asarray(entry["data"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"malformed parameter {name}: {exc}") from None
        if flat.size != int(np.prod(shape)):
            raise CheckpointError(
                f"parameter {name}: {flat.size} values do not fill shape {shape}"
            )
        params[name] = flat.reshape(shape)
    validate_parameters(params, config)
    return Checkpoint(config=config, stats=stats, params=params, seed=seed,
                      metadata=metadata)

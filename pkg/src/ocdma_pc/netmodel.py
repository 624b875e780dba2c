"""Reproducible OCDMA network instances.

The topology is a passive star: node ``i`` reaches the coupler over a leg of
length ``d_i`` km, so the path ``j -> i`` is ``d_i + d_j`` km long and its
power gain is ``10 ** (-a_f * (d_i + d_j) / 10)``. Cross-user gains are further
scaled by the code cross-correlation factor (interference power that survives
the decoder, relative to the autocorrelation peak).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyInstanceError, SingularOrInfeasible

log = logging.getLogger(__name__)

INSTANCE_FORMAT = "ocdma-pc/instance"
INSTANCE_VERSION = 1


def dbm_to_watt(x):
    """Convert dBm to watts."""
    return 10.0 ** ((x - 30.0) / 10.0)


def db_to_linear(x):
    return 10.0 ** (x / 10.0)


def snir_to_cir_target(gamma_star, r_min, Tc):
    """CIR target that yields SNIR ``gamma_star`` at user rate ``r_min``.

    The SNIR is the CIR scaled by the processing gain ``r_c / r_min`` with
    chip rate ``r_c = 1 / Tc``, hence ``CIR* = gamma_star * r_min * Tc``.
    """
    return gamma_star * r_min * Tc


@dataclass(frozen=True)
class SystemParams:
    chip_period: float = 9e-12
    sequence_length: int = 121
    link_length_range: tuple[float, float] = (4.0, 100.0)
    fiber_attenuation: float = 0.2
    p_max_dbm: float = 20.0
    p_min_dbm: float | None = None
    noise_sigma: float = 0.032
    # None -> 1/sqrt(F): prime-code weight w = sqrt(F), cross-correlation <= 1
    crosscorr_factor: float | None = None
    modulation_order: int = 2
    transponder_inefficiency: float = 2.7
    planck_h: float = 6.63e-34

    def __post_init__(self):
        lo, hi = self.link_length_range
        if not self.chip_period > 0:
            raise ValueError("chip_period must be positive")
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be >= 1")
        if not 0 < lo < hi:
            raise ValueError("link_length_range must satisfy 0 < low < high")
        if self.fiber_attenuation < 0:
            raise ValueError("fiber_attenuation must be >= 0")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        if not self.p_min_dbm_value < self.p_max_dbm:
            raise ValueError("p_min_dbm must be below p_max_dbm")
        if self.crosscorr_factor is not None and not 0 < self.crosscorr_factor <= 1:
            raise ValueError("crosscorr_factor must lie in (0, 1]")

    @property
    def p_min_dbm_value(self) -> float:
        return self.p_max_dbm - 90.0 if self.p_min_dbm is None else self.p_min_dbm

    @property
    def p_max(self) -> float:
        return dbm_to_watt(self.p_max_dbm)

    @property
    def p_min(self) -> float:
        return dbm_to_watt(self.p_min_dbm_value)

    @property
    def noise_power(self) -> float:
        return self.noise_sigma ** 2

    @property
    def interference_factor(self) -> float:
        if self.crosscorr_factor is None:
            return 1.0 / math.sqrt(self.sequence_length)
        return self.crosscorr_factor


@dataclass(frozen=True)
class QosClass:
    label: str
    snir_target_db: float
    min_rate: float

    def __post_init__(self):
        if not math.isfinite(self.snir_target_db):
            raise ValueError("snir_target_db must be finite")
        if not self.min_rate > 0:
            raise ValueError("min_rate must be positive")

    @property
    def snir_target(self) -> float:
        return db_to_linear(self.snir_target_db)


QOS_CLASSES = {
    "I": QosClass("I", 17.0, 25e6),
    "II": QosClass("II", 20.0, 30e6),
    "III": QosClass("III", 22.0, 35e6),
}


def qos_class(label) -> QosClass:
    if isinstance(label, QosClass):
        return label
    try:
        return QOS_CLASSES[str(label).upper()]
    except KeyError:
        raise ValueError(f"unknown QoS class {label!r}; expected one of {sorted(QOS_CLASSES)}") from None


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Complete datum of one power-allocation problem."""

    G: np.ndarray
    noise: np.ndarray
    cir_target: np.ndarray
    snir_target: np.ndarray
    min_rate: np.ndarray
    p_min: float
    p_max: float
    chip_period: float
    seed: int
    legs: np.ndarray | None = None
    qos_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for name in ("G", "noise", "cir_target", "snir_target", "min_rate"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.legs is not None:
            object.__setattr__(self, "legs", _frozen(self.legs))
        K = self.G.shape[0]
        if K == 0:
            raise EmptyInstanceError("instance has no users")
        if self.G.shape != (K, K):
            raise ValueError("G must be square")
        for name in ("noise", "cir_target", "snir_target", "min_rate"):
            if getattr(self, name).shape != (K,):
                raise ValueError(f"{name} must have length {K}")
        if np.any(np.diag(self.G) <= 0) or np.any(self.G < 0):
            raise ValueError("gains must be nonnegative with a positive diagonal")
        if np.any(self.noise <= 0) or np.any(self.cir_target <= 0):
            raise ValueError("noise powers and CIR targets must be positive")
        if not 0 < self.p_min < self.p_max:
            raise ValueError("power box must satisfy 0 < p_min < p_max")

    @property
    def K(self) -> int:
        return self.G.shape[0]

    @property
    def chip_rate(self) -> float:
        return 1.0 / self.chip_period

    def to_dict(self) -> dict:
        return {
            "format": INSTANCE_FORMAT,
            "version": INSTANCE_VERSION,
            "K": self.K,
            "seed": int(self.seed),
            "p_min": self.p_min,
            "p_max": self.p_max,
            "chip_period": self.chip_period,
            "qos_labels": list(self.qos_labels),
            "G": self.G.ravel().tolist(),
            "noise": self.noise.tolist(),
            "cir_target": self.cir_target.tolist(),
            "snir_target": self.snir_target.tolist(),
            "min_rate": self.min_rate.tolist(),
            "legs": None if self.legs is None else self.legs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkInstance":
        if d.get("format") != INSTANCE_FORMAT:
            raise ValueError("not an instance file")
        K = int(d["K"])
        return cls(
            G=np.asarray(d["G"], dtype=float).reshape(K, K),
            noise=d["noise"],
            cir_target=d["cir_target"],
            snir_target=d["snir_target"],
            min_rate=d["min_rate"],
            p_min=float(d["p_min"]),
            p_max=float(d["p_max"]),
            chip_period=float(d["chip_period"]),
            seed=int(d["seed"]),
            legs=d.get("legs"),
            qos_labels=tuple(d.get("qos_labels") or ()),
        )


def save_instance(instance: NetworkInstance, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance.to_dict(), indent=1) + "\n")
    return path


def load_instance(path) -> NetworkInstance:
    return NetworkInstance.from_dict(json.loads(Path(path).read_text()))


def _as_qos_list(qos, K=None) -> list[QosClass]:
    if isinstance(qos, (QosClass, str)):
        if K is None:
            raise ValueError("K is required when a single QoS class is given")
        return [qos_class(qos)] * K
    return [qos_class(q) for q in qos]


def gains_from_legs(legs, params: SystemParams) -> np.ndarray:
    a = 10.0 ** (-params.fiber_attenuation * np.asarray(legs, dtype=float) / 10.0)
    G = params.interference_factor * np.outer(a, a)
    np.fill_diagonal(G, a * a)
    return G


def _build(params: SystemParams, qos: list[QosClass], legs, seed) -> NetworkInstance:
    K = len(qos)
    snir = np.array([q.snir_target for q in qos])
    rates = np.array([q.min_rate for q in qos])
    return NetworkInstance(
        G=gains_from_legs(legs, params),
        noise=np.full(K, params.noise_power),
        cir_target=snir_to_cir_target(snir, rates, params.chip_period),
        snir_target=snir,
        min_rate=rates,
        p_min=params.p_min,
        p_max=params.p_max,
        chip_period=params.chip_period,
        seed=int(seed),
        legs=legs,
        qos_labels=tuple(q.label for q in qos),
    )


def _draw_legs(params: SystemParams, K: int, rng) -> np.ndarray:
    lo, hi = params.link_length_range
    return rng.uniform(lo / 2.0, hi / 2.0, size=K)


def generate_instance(params: SystemParams, qos: Sequence[QosClass] | QosClass | str,
                      seed: int, K: int | None = None) -> NetworkInstance:
    """Draw an instance; ``qos`` is one class per user (or one class plus ``K``)."""
    qos = _as_qos_list(qos, K)
    if len(qos) == 0:
        raise EmptyInstanceError("at least one user is required")
    rng = np.random.default_rng(seed)
    return _build(params, qos, _draw_legs(params, len(qos), rng), seed)


def extend_instance(instance: NetworkInstance, params: SystemParams,
                    new_qos: Sequence[QosClass] | QosClass | str,
                    n_new: int | None = None) -> NetworkInstance:
    """Add users to ``instance`` keeping the existing users' legs (and gains).

    New legs come from a stream keyed on the original seed and the new size,
    so the extension is reproducible.
    """
    if instance.legs is None:
        raise ValueError("instance carries no leg lengths; cannot extend")
    new_qos = _as_qos_list(new_qos, n_new)
    old = [QosClass(lbl or "Custom", 10 * math.log10(s), r)
           for lbl, s, r in zip(instance.qos_labels or ("Custom",) * instance.K,
                                instance.snir_target, instance.min_rate)]
    K2 = instance.K + len(new_qos)
    rng = np.random.default_rng([instance.seed, K2])
    legs = np.concatenate([instance.legs, _draw_legs(params, len(new_qos), rng)])
    ext = _build(params, old + list(new_qos), legs, instance.seed)
    # keep the original targets bit-exact
    ct = ext.cir_target.copy()
    ct[: instance.K] = instance.cir_target
    return NetworkInstance(
        G=ext.G, noise=ext.noise, cir_target=ct, snir_target=ext.snir_target,
        min_rate=ext.min_rate, p_min=ext.p_min, p_max=ext.p_max,
        chip_period=ext.chip_period, seed=ext.seed, legs=ext.legs,
        qos_labels=ext.qos_labels,
    )


def generate_feasible_instance(params: SystemParams, qos, seed: int, K: int | None = None,
                               max_attempts: int = 100, require_box: bool = True) -> NetworkInstance:
    """Like :func:`generate_instance`, retrying ``seed + 1, seed + 2, ...``.

    A draw is rejected when the closed-form power vector does not exist or,
    with ``require_box``, when it falls outside ``[p_min, p_max]``. The
    returned instance records the seed actually used.
    """
    from .problem import matrix_form, tarhuni_solve

    for attempt in range(max_attempts):
        s = seed + attempt
        inst = generate_instance(params, qos, s, K)
        try:
            p_star = tarhuni_solve(matrix_form(inst))
        except SingularOrInfeasible as exc:
            log.info("rejected seed %d: %s", s, exc)
            continue
        if require_box and (p_star.min() < inst.p_min or p_star.max() > inst.p_max):
            log.info("rejected seed %d: closed-form powers leave the box", s)
            continue
        return inst
    raise SingularOrInfeasible(f"no feasible instance in {max_attempts} draws from seed {seed}")

"""Detector-side model: coincidence gating, the time-shift attack and
Monte Carlo coincidence counting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import ndtr

from .states import TwoQubitState
from .witness import AXES, SIGN_PAIRS, joint_sign_probabilities

HONEST = "honest"
TIME_SHIFT = "time-shift"

# Operating point of the attack demonstration.
ATTACK_DELTA_T = 5.5  # ns
ATTACK_WINDOW = 4.0  # ns
ATTACK_SUPPRESSION = 0.109
# Per-detector Gaussian jitter (ns) that puts the suppression at exactly 0.109
# for the operating point above; lower root of coincidence_efficiency = 0.109,
# reproduced by fit_jitter_sigma().
ATTACK_JITTER_SIGMA = 2.051823099841628


@dataclass(frozen=True)
class DetectorModel:
    delta_t: float = 0.0
    jitter_sigma: float = 0.0
    window: float = ATTACK_WINDOW
    mode: str = HONEST

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("coincidence window must be positive")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        if self.mode not in (HONEST, TIME_SHIFT):
            raise ValueError(f"mode must be {HONEST!r} or {TIME_SHIFT!r}")


@dataclass(frozen=True)
class SuppressionProfile:
    """Coincidence acceptance probability per outcome-sign pair."""

    eta: Mapping[str, float]

    def __post_init__(self):
        eta = {k: float(self.eta.get(k, 1.0)) for k in SIGN_PAIRS}
        extra = set(self.eta) - set(SIGN_PAIRS)
        if extra:
            raise ValueError(f"unknown outcome pairs {sorted(extra)}")
        for k, e in eta.items():
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"efficiency for {k} is {e}, outside [0, 1]")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def same_sign(cls, f: float) -> "SuppressionProfile":
        return cls({"++": f, "+-": 1.0, "-+": 1.0, "--": f})


@dataclass
class CountRecord:
    setting: object
    counts: dict[str, int]
    trials: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 0 or any(c < 0 for c in self.counts.values()):
            raise ValueError("counts and trials must be non-negative")
        if sum(self.counts.values()) > self.trials:
            raise ValueError("more counts than trials")


def seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, a sequence of ints or an existing SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def coincidence_efficiency(delta_t: float, jitter_sigma: float, window: float) -> float:
    """P(|T1 - T2 + delta_t| <= window/2) for independent N(0, jitter_sigma^2)
    arrival times T1, T2."""
    if window <= 0:
        raise ValueError("coincidence window must be positive")
    half = 0.5 * window
    if jitter_sigma == 0:
        return 1.0 if abs(delta_t) <= half else 0.0
    s = jitter_sigma * math.sqrt(2.0)
    return float(ndtr((half - delta_t) / s) - ndtr((-half - delta_t) / s))


def fit_jitter_sigma(
    delta_t: float = ATTACK_DELTA_T,
    window: float = ATTACK_WINDOW,
    target: float = ATTACK_SUPPRESSION,
) -> float:
    """Smallest jitter for which the shifted pair's coincidence efficiency
    equals ``target``. Requires |delta_t| > window/2."""
    if abs(delta_t) <= 0.5 * window:
        raise ValueError("delta_t inside the gate: efficiency never drops that low at small jitter")
    # efficiency rises from 0 at zero jitter to a single maximum, then decays
    peak = minimize_scalar(
        lambda s: -coincidence_efficiency(delta_t, s, window),
        bounds=(1e-6, 10.0 * (abs(delta_t) + window)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if -peak.fun < target:
        raise ValueError(f"efficiency never reaches {target}; peak is {-peak.fun:.4f}")
    return float(
        brentq(lambda s: coincidence_efficiency(delta_t, s, window) - target, 1e-9, peak.x, xtol=1e-15)
    )


def suppression_profile(model: DetectorModel) -> SuppressionProfile:
    """Eve delays d_a1 and d_b0, so only the same-sign coincidences
    (d_a0 & d_b0, d_a1 & d_b1) straddle the shifted and unshifted detectors."""
    if model.mode == HONEST:
        return SuppressionProfile({})
    return SuppressionProfile.same_sign(
        coincidence_efficiency(model.delta_t, model.jitter_sigma, model.window)
    )


def attacked_joint(p: Mapping[str, float], profile: SuppressionProfile) -> dict[str, float]:
    w = {k: p[k] * profile.eta[k] for k in SIGN_PAIRS}
    total = sum(w.values())
    if total <= 0:
        raise ValueError("no coincidences survive the suppression profile")
    return {k: w[k] / total for k in SIGN_PAIRS}


def attacked_correlations(rho: TwoQubitState, profile: SuppressionProfile) -> dict[str, float]:
    out = {}
    for ax in AXES:
        q = attacked_joint(joint_sign_probabilities(rho, ax), profile)
        out[ax] = q["++"] + q["--"] - q["+-"] - q["-+"]
    return out


def attacked_witness_value(rho: TwoQubitState, profile: SuppressionProfile) -> float:
    """Witness value Alice and Bob infer when each sign pair's coincidences
    are thinned by the profile and then renormalised per axis."""
    e = attacked_correlations(rho, profile)
    return (1.0 + e["x"] + e["y"] + e["z"]) / 4.0


def _validate_probs(probs: Mapping[str, float]) -> None:
    vals = list(probs.values())
    if any(not np.isfinite(p) or p < -1e-12 for p in vals):
        raise ValueError("outcome probabilities must be finite and non-negative")
    if sum(vals) > 1.0 + 1e-12:
        raise ValueError(f"outcome probabilities sum to {sum(vals)} > 1")


def sample_counts(
    outcome_probs: Mapping[str, float],
    efficiencies: Mapping[str, float] | None,
    trials: int,
    seed,
    setting=None,
) -> CountRecord:
    """Draw an outcome per trial, then keep it with its efficiency.

    Probability mass missing from ``outcome_probs`` is an unannounced
    outcome. ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    _validate_probs(outcome_probs)
    if trials < 0:
        raise ValueError("trials must be non-negative")
    efficiencies = efficiencies or {}
    for k, e in efficiencies.items():
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"efficiency for {k} is {e}, outside [0, 1]")
    rng = np.random.default_rng(seed)
    keys = list(outcome_probs)
    p = np.clip(np.array([outcome_probs[k] for k in keys], dtype=float), 0.0, None)
    rest = max(0.0, 1.0 - p.sum())
    drawn = rng.multinomial(trials, np.append(p, rest) / (p.sum() + rest))
    counts = {}
    for k, n in zip(keys, drawn[:-1]):
        eta = efficiencies.get(k, 1.0)
        counts[k] = int(n) if eta == 1.0 else int(rng.binomial(n, eta))
    return CountRecord(setting, counts, trials)


@dataclass(frozen=True)
class WitnessEstimate:
    value: float
    stderr: float
    correlations: dict[str, float]
    records: dict[str, CountRecord]


def estimate_correlation(record: CountRecord) -> tuple[float, float]:
    """Correlation and its standard error from one axis' coincidence counts."""
    c = record.counts
    n = sum(c[k] for k in SIGN_PAIRS)
    if n == 0:
        raise ValueError(f"no coincidences recorded for setting {record.setting!r}")
    q = (c["++"] + c["--"]) / n
    return 2.0 * q - 1.0, 2.0 * math.sqrt(q * (1.0 - q) / n)


def simulate_witness(
    rho: TwoQubitState, profile: SuppressionProfile, trials_per_axis: int, seed
) -> WitnessEstimate:
    """Monte Carlo version of :func:`attacked_witness_value`."""
    children = seed_sequence(seed).spawn(len(AXES))
    records, e, var = {}, {}, 0.0
    for ax, child in zip(AXES, children):
        rec = sample_counts(joint_sign_probabilities(rho, ax), profile.eta, trials_per_axis, child, setting=ax)
        records[ax] = rec
        e[ax], se = estimate_correlation(rec)
        var += se * se
    value = (1.0 + e["x"] + e["y"] + e["z"]) / 4.0
    return WitnessEstimate(value, math.sqrt(var) / 4.0, e, records)

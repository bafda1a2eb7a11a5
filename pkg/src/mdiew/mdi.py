"""Measurement-device-independent entanglement witness.

Alice prepares tau_s, Bob prepares omega_t, and an untrusted relay performs a
Bell-state measurement on (tau_s, qubit A) and another on (qubit B, omega_t).
Tensor factor order is (tau, A, B, omega). Only the Phi+ ("+") and Phi- ("-")
outcomes are announced on each side, giving four outcome classes
``"++"``, ``"+-"``, ``"-+"`` and ``"--"`` (Alice's sign first).

For a class ``ab`` the coefficients satisfy

    W = sum_st beta^ab_st  t_a(tau_s)^T (x) t_b(omega_t)^T

where t_+ is the identity and t_- the :func:`~mdiew.states.tilde` map, and
J_ab = sum_st beta^ab_st p(a, b | tau_s, omega_t) = Tr[W rho] / 4.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detection import CountRecord, seed_sequence
from .qmat import as_matrix, projector
from .states import (
    BELL,
    MIXED_SIGN,
    SAME_SIGN,
    AncillaState,
    TwoQubitState,
    ancilla,
    ancilla_settings,
    tilde,
)
from .witness import W, WitnessOperator

OUTCOME_CLASSES = ("++", "+-", "-+", "--")
BSM_LABELS = ("+", "-", "psi+", "psi-")
ANNOUNCED = ("+", "-")
DISCARD = "discard"

Setting = tuple[str, str]


class BasisError(ValueError):
    """The supplied product basis cannot express the target operator."""

    def __init__(self, residual: float):
        super().__init__(f"basis does not express W (residual {residual:.3e})")
        self.residual = residual


class MissingSettingError(KeyError):
    def __init__(self, setting):
        self.setting = tuple(setting)
        super().__init__(self.setting)

    def __str__(self) -> str:
        s, t = self.setting
        return f"no count record with trials > 0 for setting s={s}, t={t}"


def bell_povm() -> dict[str, np.ndarray]:
    """Honest Bell-state measurement: '+' = Phi+, '-' = Phi-, Psi outcomes unannounced."""
    return {
        "+": projector(BELL["phi+"]),
        "-": projector(BELL["phi-"]),
        "psi+": projector(BELL["psi+"]),
        "psi-": projector(BELL["psi-"]),
    }


_HONEST = bell_povm()


def class_of(outcome_class: str) -> str:
    """Which ancilla family an outcome class uses."""
    if outcome_class in ("++", "--"):
        return SAME_SIGN
    if outcome_class in ("+-", "-+"):
        return MIXED_SIGN
    raise ValueError(f"unknown outcome class {outcome_class!r}")


def _split(outcome) -> tuple[str, str]:
    if isinstance(outcome, str):
        if outcome not in OUTCOME_CLASSES:
            raise ValueError(f"unknown outcome {outcome!r}")
        return outcome[0], outcome[1]
    a, b = outcome
    return a, b


def _state_matrix(x) -> np.ndarray:
    return x.matrix if hasattr(x, "matrix") else as_matrix(x)


def joint_state(rho, tau, omega) -> np.ndarray:
    return np.kron(np.kron(_state_matrix(tau), _state_matrix(rho)), _state_matrix(omega))


def outcome_probabilities(
    rho,
    tau,
    omega,
    povm_a: Mapping[str, np.ndarray] | None = None,
    povm_b: Mapping[str, np.ndarray] | None = None,
) -> dict[tuple[str, str], float]:
    """p(a, b | tau, omega) for every pair of POVM labels."""
    povm_a = _HONEST if povm_a is None else povm_a
    povm_b = _HONEST if povm_b is None else povm_b
    x = joint_state(rho, tau, omega)
    out = {}
    for a, ma in povm_a.items():
        for b, mb in povm_b.items():
            # Tr[M X] = sum_ij M_ij X_ji
            out[(a, b)] = float(np.sum(np.kron(ma, mb) * x.T).real)
    return out


def bsm_probability(rho, tau, omega, outcome, povm_a=None, povm_b=None) -> float:
    """p(a, b | tau, omega) = Tr[(M^a (x) M^b)(tau (x) rho (x) omega)]."""
    a, b = _split(outcome)
    povm_a = _HONEST if povm_a is None else povm_a
    povm_b = _HONEST if povm_b is None else povm_b
    m = np.kron(povm_a[a], povm_b[b])
    return float(np.trace(m @ joint_state(rho, tau, omega)).real)


def basis_operator(tau, omega, outcome_class: str) -> np.ndarray:
    """t_a(tau)^T (x) t_b(omega)^T for the class's signs."""
    a, b = _split(outcome_class)
    t = _state_matrix(tau)
    o = _state_matrix(omega)
    if a == "-":
        t = tilde(t)
    if b == "-":
        o = tilde(o)
    return np.kron(t.T, o.T)


@dataclass(frozen=True)
class CoefficientTable:
    outcome_class: str
    beta: Mapping[Setting, float]

    def __post_init__(self):
        if self.outcome_class not in OUTCOME_CLASSES:
            raise ValueError(f"unknown outcome class {self.outcome_class!r}")
        object.__setattr__(self, "beta", {tuple(k): float(v) for k, v in self.beta.items()})

    def nonzero(self, atol: float = 1e-12) -> dict[Setting, float]:
        return {k: v for k, v in self.beta.items() if abs(v) > atol}

    def get(self, s: str, t: str) -> float:
        return self.beta.get((s, t), 0.0)

    def operator(self) -> np.ndarray:
        """sum_st beta_st t_a(tau_s)^T (x) t_b(omega_t)^T."""
        out = np.zeros((4, 4), dtype=complex)
        for (s, t), b in self.beta.items():
            out += b * basis_operator(ancilla(s), ancilla(t), self.outcome_class)
        return out

    def residual(self, witness: WitnessOperator = W) -> float:
        return float(np.linalg.norm(self.operator() - witness.matrix))


def _vec(m: np.ndarray) -> np.ndarray:
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def solve_beta(
    witness: WitnessOperator | np.ndarray,
    basis: Sequence[tuple[AncillaState, AncillaState]],
    outcome_class: str,
    tol: float = 1e-10,
) -> CoefficientTable:
    """Least-squares coefficients expressing ``witness`` in the product basis.

    Over-complete bases get the minimum-norm solution, which in general is
    not the sparsest one; pass the six-setting families from
    :func:`mdiew.states.ancilla_set` to recover the sparse decompositions.
    """
    target = _state_matrix(witness)
    columns = [_vec(basis_operator(tau, omega, outcome_class)) for tau, omega in basis]
    a = np.column_stack(columns)
    beta, *_ = np.linalg.lstsq(a, _vec(target), rcond=None)
    residual = float(np.linalg.norm(a @ beta - _vec(target)))
    if residual >= tol:
        raise BasisError(residual)
    table = {}
    for (tau, omega), b in zip(basis, beta):
        key = (tau.label, omega.label)
        table[key] = table.get(key, 0.0) + float(b)
    return CoefficientTable(outcome_class, table)


_R3 = math.sqrt(3.0)

# Six-setting sparse decompositions.
_SPARSE_SAME = {
    ("0", "0"): 2 * _R3 - 2,
    ("1", "1"): 1.0,
    ("2", "2"): 1.0,
    ("3", "3"): 1.0,
    ("0", "4"): -_R3,
    ("4", "0"): -_R3,
}
_SPARSE_MIXED = {
    ("0", "0"): 2 * _R3 + 2,
    ("1", "1"): -1.0,
    ("2", "2"): -1.0,
    ("3", "3"): 1.0,
    ("0", "4'"): -_R3,
    ("4'", "0"): -_R3,
}


def _grid(rows: Sequence[Sequence[float]]) -> dict[Setting, float]:
    return {(str(s), str(t)): float(rows[s][t]) for s in range(4) for t in range(4)}


# Ten-term decompositions over {tau_0..tau_3} x {omega_0..omega_3}.
_FULL_SAME = _grid([[4, -1, -1, -1], [-1, 1, 0, 0], [-1, 0, 1, 0], [-1, 0, 0, 1]])
_FULL_MIXED = _grid([[0, 1, 1, -1], [1, -1, 0, 0], [1, 0, -1, 0], [-1, 0, 0, 1]])


def reference_tables(sparse: bool = True) -> dict[str, CoefficientTable]:
    """Reference coefficient tables for all four outcome classes."""
    same, mixed = (_SPARSE_SAME, _SPARSE_MIXED) if sparse else (_FULL_SAME, _FULL_MIXED)
    return {
        c: CoefficientTable(c, same if class_of(c) == SAME_SIGN else mixed)
        for c in OUTCOME_CLASSES
    }


def solved_tables(witness: WitnessOperator = W) -> dict[str, CoefficientTable]:
    """Coefficient tables obtained by :func:`solve_beta` on the six-setting bases."""
    out = {}
    for c in OUTCOME_CLASSES:
        basis = [(ancilla(s), ancilla(t)) for s, t in ancilla_settings(class_of(c))]
        out[c] = solve_beta(witness, basis, c)
    return out


@dataclass(frozen=True)
class MdiewResult:
    j_value: float
    contributions: dict[tuple[str, str, str, str], float]
    stderr: float | None = None
    combined: bool = True
    per_class: dict[str, float] = field(default_factory=dict)


def _classes(combined: bool, outcome: str | None) -> tuple[tuple[str, ...], float]:
    if combined:
        return OUTCOME_CLASSES, 0.25
    if outcome not in OUTCOME_CLASSES:
        raise ValueError(f"single-class mode needs an outcome in {OUTCOME_CLASSES}")
    return (outcome,), 1.0


def required_settings(tables: Mapping[str, CoefficientTable], classes: Iterable[str] = OUTCOME_CLASSES) -> list[Setting]:
    seen: dict[Setting, None] = {}
    for c in classes:
        for st in tables[c].nonzero():
            seen.setdefault(st, None)
    return list(seen)


def _evaluate(prob_of, tables, combined, outcome) -> MdiewResult:
    classes, scale = _classes(combined, outcome)
    contributions = {}
    per_class = {}
    for c in classes:
        a, b = c
        total = 0.0
        for (s, t), beta in tables[c].nonzero().items():
            term = beta * prob_of((s, t), a, b)
            contributions[(s, t, a, b)] = term
            total += term
        per_class[c] = total
    j = scale * sum(contributions.values())
    return MdiewResult(j, contributions, None, combined, per_class)


def j_value_exact(
    rho,
    tables: Mapping[str, CoefficientTable] | None = None,
    combined: bool = True,
    outcome: str | None = None,
    povm_a: Mapping[str, np.ndarray] | None = None,
    povm_b: Mapping[str, np.ndarray] | None = None,
) -> MdiewResult:
    """J from exact probabilities. Combined mode averages the four classes."""
    tables = reference_tables() if tables is None else tables
    cache: dict[Setting, dict] = {}

    def prob_of(st, a, b):
        if st not in cache:
            cache[st] = outcome_probabilities(rho, ancilla(st[0]), ancilla(st[1]), povm_a, povm_b)
        return cache[st][(a, b)]

    return _evaluate(prob_of, tables, combined, outcome)


def simulate_counts(
    rho,
    settings: Iterable[Setting],
    trials: int,
    seed,
    povm_a=None,
    povm_b=None,
) -> dict[Setting, CountRecord]:
    """Monte Carlo coincidence records, one per (s, t) setting.

    Every trial samples the full joint BSM outcome; only the four
    announced (Phi, Phi) combinations are kept as counts, the rest are
    discarded but still counted in ``trials``.
    """
    settings = list(settings)
    children = seed_sequence(seed).spawn(len(settings))
    records = {}
    for st, child in zip(settings, children):
        probs = outcome_probabilities(rho, ancilla(st[0]), ancilla(st[1]), povm_a, povm_b)
        keys = list(probs)
        p = np.clip(np.array([probs[k] for k in keys]), 0.0, None)
        drawn = np.random.default_rng(child).multinomial(trials, p / p.sum())
        counts = {c: 0 for c in OUTCOME_CLASSES}
        for (a, b), n in zip(keys, drawn):
            if a in ANNOUNCED and b in ANNOUNCED:
                counts[a + b] = int(n)
        records[st] = CountRecord(st, counts, trials)
    return records


def j_value_from_counts(
    records: Mapping[Setting, CountRecord],
    tables: Mapping[str, CoefficientTable] | None = None,
    combined: bool = True,
    outcome: str | None = None,
) -> MdiewResult:
    """J with p(a, b | s, t) estimated as counts / trials.

    The standard error treats each setting's announced counts as one
    multinomial sample: Var = (sum c_k^2 p_k - (sum c_k p_k)^2) / N with
    c_k the beta weights, summed over independent settings.
    """
    tables = reference_tables() if tables is None else tables
    classes, scale = _classes(combined, outcome)
    for st in required_settings(tables, classes):
        rec = records.get(st)
        if rec is None or rec.trials <= 0:
            raise MissingSettingError(st)

    def prob_of(st, a, b):
        rec = records[st]
        return rec.counts.get(a + b, 0) / rec.trials

    result = _evaluate(prob_of, tables, combined, outcome)
    var = 0.0
    for st in required_settings(tables, classes):
        rec = records[st]
        first = second = 0.0
        for c in classes:
            w = scale * tables[c].get(*st)
            p = rec.counts.get(c, 0) / rec.trials
            first += w * p
            second += w * w * p
        var += max(0.0, second - first * first) / rec.trials
    return MdiewResult(result.j_value, result.contributions, math.sqrt(var), combined, result.per_class)


def validate_povm(povm: Mapping[str, np.ndarray], atol: float = 1e-9) -> None:
    if not povm:
        raise ValueError("empty POVM")
    total = np.zeros((4, 4), dtype=complex)
    for label, m in povm.items():
        m = as_matrix(m)
        if m.shape != (4, 4):
            raise ValueError(f"POVM element {label!r} is not 4x4")
        if not np.allclose(m, m.conj().T, atol=atol, rtol=0):
            raise ValueError(f"POVM element {label!r} is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -atol:
            raise ValueError(f"POVM element {label!r} is not positive semidefinite")
        total += m
    if not np.allclose(total, np.eye(4), atol=atol, rtol=0):
        raise ValueError("POVM elements do not sum to the identity")


def j_value_adversarial(
    sigma,
    eve_povm_alice: Mapping[str, np.ndarray],
    eve_povm_bob: Mapping[str, np.ndarray],
    tables: Mapping[str, CoefficientTable] | None = None,
    combined: bool = True,
    outcome: str | None = None,
) -> MdiewResult:
    """J when the relay measures with arbitrary POVMs labelled '+', '-' and
    'discard' (missing '+' or '-' labels mean that outcome is never announced)."""
    validate_povm(eve_povm_alice)
    validate_povm(eve_povm_bob)
    zero = np.zeros((4, 4), dtype=complex)
    pa = {k: eve_povm_alice.get(k, zero) for k in ANNOUNCED}
    pb = {k: eve_povm_bob.get(k, zero) for k in ANNOUNCED}
    return j_value_exact(sigma, tables, combined, outcome, pa, pb)


def random_povm(rng: np.random.Generator, labels: Sequence[str] = ("+", "-", DISCARD), projective: bool = False) -> dict[str, np.ndarray]:
    """A random POVM on C^4.

    The general form normalises Wishart-like elements by S^(-1/2); the
    projective form splits a Haar-random basis among the labels.
    """
    n = len(labels)
    if projective:
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, r = np.linalg.qr(z)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        owner = rng.integers(0, n, size=4)
        out = {lab: np.zeros((4, 4), dtype=complex) for lab in labels}
        for k in range(4):
            out[labels[owner[k]]] += projector(q[:, k])
        return out
    gs = []
    for _ in range(n):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        gs.append(a @ a.conj().T)
    s = sum(gs)
    w, u = np.linalg.eigh(s)
    inv_sqrt = (u / np.sqrt(w)) @ u.conj().T
    return {lab: inv_sqrt @ g @ inv_sqrt for lab, g in zip(labels, gs)}


@dataclass(frozen=True)
class AdversarySweep:
    j_combined: list[float]
    j_single: list[dict[str, float]]
    seed: int

    @property
    def min_combined(self) -> float:
        return min(self.j_combined)

    @property
    def min_single(self) -> float:
        return min(min(d.values()) for d in self.j_single)


def adversarial_sweep(draws: int, seed: int, tables: Mapping[str, CoefficientTable] | None = None) -> AdversarySweep:
    """Evaluate J on ``draws`` random (separable state, POVM pair) samples.

    Draw ``i`` uses its own child of ``SeedSequence(seed)``; even draws use
    general POVMs, odd draws projective ones.
    """
    from .states import random_separable_state

    tables = reference_tables() if tables is None else tables
    combined, single = [], []
    for i, child in enumerate(seed_sequence(seed).spawn(draws)):
        rng = np.random.default_rng(child)
        sigma = random_separable_state(rng)
        projective = bool(i % 2)
        ma = random_povm(rng, projective=projective)
        mb = random_povm(rng, projective=projective)
        res = j_value_adversarial(sigma, ma, mb, tables)
        combined.append(res.j_value)
        single.append(dict(res.per_class))
    return AdversarySweep(combined, single, seed)


TABLE_COLUMNS = ("class", "s", "t", "beta")


def write_tables(tables: Mapping[str, CoefficientTable], fh=None) -> str:
    """Serialise coefficient tables as CSV (class, s, t, beta)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for c in OUTCOME_CLASSES:
        if c not in tables:
            continue
        for (s, t), beta in tables[c].beta.items():
            w.writerow([c, s, t, repr(float(beta))])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_tables(text: str) -> dict[str, CoefficientTable]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0]) != TABLE_COLUMNS:
        raise ValueError(f"expected columns {TABLE_COLUMNS}")
    grouped: dict[str, dict[Setting, float]] = {}
    for r in rows:
        grouped.setdefault(r["class"], {})[(r["s"], r["t"])] = float(r["beta"])
    return {c: CoefficientTable(c, b) for c, b in grouped.items()}

"""Command-line front end.

Every command writes a header row, one row per grid point and a metadata
footer (``# key=value`` lines in CSV, a ``metadata`` object in JSON).

Commands and their columns:

  attack-demo       v, state, suppression, exx, eyy, ezz, witness_honest,
                    witness_attacked[, witness_mc, witness_mc_se]
  efficiency-curve  delta_t, jitter_sigma, window, efficiency[, counts, efficiency_mc]
  mdiew-curve       v, j_theory, j_exact, j_pp, j_pm, j_mp, j_mm[, j_mc, j_mc_se]
  mdiew-adversary   draw, j_combined, j_pp, j_pm, j_mp, j_mm
  tomography        theta, v_theory, v_rho11, v_rho22, v_rho33, v_rho44, v_rho23,
                    v_mean, v_spread, v_stderr, trace_distance, concurrence, tangle, valid
  tangle-curve      theta, v, lambda1..lambda4, concurrence, tangle, tangle_analytic
  tables            v, class, s, t, beta, p
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import detection, mdi, states, tomography, witness

log = logging.getLogger("mdiew")

COMMANDS = (
    "attack-demo",
    "efficiency-curve",
    "mdiew-curve",
    "mdiew-adversary",
    "tomography",
    "tangle-curve",
    "tables",
)
SEED_ENV = "MDIEW_SEED"
DEFAULT_SEED = 42
DEFAULT_TRIALS = 1_000_000
DEFAULT_DRAWS = 1000
REFERENCE_THETAS = (45.0, 30.0, 22.5, 15.0, 0.0)
TABLE_VS = (0.0, 0.25, 0.5, 0.75, 1.0)


def default_v_grid(n: int = 21) -> list[float]:
    return [i / (n - 1) for i in range(n)]


@dataclass
class RunConfig:
    command: str
    seed: int = DEFAULT_SEED
    trials: int | None = None
    v: list[float] = field(default_factory=list)
    theta: list[float] = field(default_factory=list)
    delta_t: list[float] = field(default_factory=list)
    window: float = detection.ATTACK_WINDOW
    jitter_sigma: float = detection.ATTACK_JITTER_SIGMA
    draws: int = DEFAULT_DRAWS
    hwp: bool = True
    out: str = "-"
    format: str = "csv"
    seed_source: str = "default"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.trials is not None and self.trials < 0:
            raise ValueError("--trials must be >= 0 (0 selects analytic mode)")
        if any(not 0.0 <= v <= 1.0 for v in self.v):
            raise ValueError("--v values must lie in [0, 1]")
        if self.v and self.theta:
            raise ValueError("--v and --theta are mutually exclusive")
        if self.window <= 0:
            raise ValueError("--window must be positive")
        if self.jitter_sigma < 0:
            raise ValueError("--jitter-sigma must be non-negative")
        if self.draws < 1:
            raise ValueError("--draws must be positive")
        if self.format not in ("csv", "json"):
            raise ValueError("--format must be csv or json")

    def resolved_trials(self) -> int:
        if self.trials is not None:
            return self.trials
        if self.command == "tomography":
            return tomography.DEFAULT_SHOTS
        if self.command in ("attack-demo", "efficiency-curve", "mdiew-curve"):
            return DEFAULT_TRIALS
        return 0

    def v_values(self, default=None) -> list[float]:
        if self.theta:
            return [states.v_from_theta(t) for t in self.theta]
        if self.v:
            return list(self.v)
        return list(default) if default is not None else default_v_grid()


def _attack_demo(cfg: RunConfig, trials: int):
    model = detection.DetectorModel(
        delta_t=cfg.delta_t[0] if cfg.delta_t else detection.ATTACK_DELTA_T,
        jitter_sigma=cfg.jitter_sigma,
        window=cfg.window,
        mode=detection.TIME_SHIFT,
    )
    profile = detection.suppression_profile(model)
    cols = ["v", "state", "suppression", "exx", "eyy", "ezz", "witness_honest", "witness_attacked"]
    if trials:
        cols += ["witness_mc", "witness_mc_se"]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.v_values()))
    rows = []
    for v, child in zip(cfg.v_values(), seeds):
        rho = states.rho_v(_clip01(v))
        if cfg.hwp:
            rho = states.hwp_flip_b(rho)
        e = detection.attacked_correlations(rho, profile)
        row = {
            "v": v,
            "state": "hwp_flip_b" if cfg.hwp else "rho_v",
            "suppression": profile.eta["++"],
            "exx": e["x"],
            "eyy": e["y"],
            "ezz": e["z"],
            "witness_honest": witness.witness_value_exact(rho),
            "witness_attacked": detection.attacked_witness_value(rho, profile),
        }
        if trials:
            est = detection.simulate_witness(rho, profile, trials, child)
            row["witness_mc"] = est.value
            row["witness_mc_se"] = est.stderr
        rows.append(row)
    return cols, rows, {"delta_t": model.delta_t, "window": model.window, "jitter_sigma": model.jitter_sigma}


def _efficiency_curve(cfg: RunConfig, trials: int):
    grid = cfg.delta_t or [round(-10.0 + 0.25 * i, 10) for i in range(81)]
    cols = ["delta_t", "jitter_sigma", "window", "efficiency"]
    if trials:
        cols += ["counts", "efficiency_mc"]
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for dt in grid:
        eff = detection.coincidence_efficiency(dt, cfg.jitter_sigma, cfg.window)
        row = {"delta_t": dt, "jitter_sigma": cfg.jitter_sigma, "window": cfg.window, "efficiency": eff}
        if trials:
            n = int(rng.binomial(trials, eff))
            row["counts"] = n
            row["efficiency_mc"] = n / trials
        rows.append(row)
    return cols, rows, {}


def _mdiew_curve(cfg: RunConfig, trials: int):
    tables = mdi.reference_tables()
    cols = ["v", "j_theory", "j_exact", "j_pp", "j_pm", "j_mp", "j_mm"]
    if trials:
        cols += ["j_mc", "j_mc_se"]
    vs = cfg.v_values()
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(vs))
    rows = []
    for v, child in zip(vs, seeds):
        rho = states.rho_v(_clip01(v))
        res = mdi.j_value_exact(rho, tables)
        row = {"v": v, "j_theory": (2 * v - 1) / 8, "j_exact": res.j_value}
        for c, name in zip(mdi.OUTCOME_CLASSES, ("j_pp", "j_pm", "j_mp", "j_mm")):
            row[name] = res.per_class[c]
        if trials:
            recs = mdi.simulate_counts(rho, states.all_settings(), trials, child)
            est = mdi.j_value_from_counts(recs, tables)
            row["j_mc"] = est.j_value
            row["j_mc_se"] = est.stderr
        rows.append(row)
    return cols, rows, {}


def _mdiew_adversary(cfg: RunConfig, trials: int):
    sweep = mdi.adversarial_sweep(cfg.draws, cfg.seed)
    cols = ["draw", "j_combined", "j_pp", "j_pm", "j_mp", "j_mm"]
    rows = []
    for i, (jc, single) in enumerate(zip(sweep.j_combined, sweep.j_single)):
        row = {"draw": i, "j_combined": jc}
        for c, name in zip(mdi.OUTCOME_CLASSES, ("j_pp", "j_pm", "j_mp", "j_mm")):
            row[name] = single[c]
        rows.append(row)
    return cols, rows, {"draws": cfg.draws, "min_j_combined": sweep.min_combined, "min_j_single": sweep.min_single}


def _tomography(cfg: RunConfig, trials: int):
    thetas = cfg.theta or ([] if cfg.v else list(REFERENCE_THETAS))
    points = [(t, states.v_from_theta(t)) for t in thetas] or [(states.theta_from_v(v), v) for v in cfg.v]
    cols = [
        "theta", "v_theory", "v_rho11", "v_rho22", "v_rho33", "v_rho44", "v_rho23",
        "v_mean", "v_spread", "v_stderr", "trace_distance", "concurrence", "tangle", "valid",
    ]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(points))
    rows = []
    for (theta, v), child in zip(points, seeds):
        truth = states.rho_v(_clip01(v))
        if trials:
            record = tomography.sample_expectations(truth, trials, child)
        else:
            record = tomography.exact_expectations(truth)
        rec = tomography.reconstruct(record)
        fit = tomography.fit_v(rec)
        t = tomography.tangle(rec, strict=False)
        conc, tang = t.concurrence, t.tangle
        row = {"theta": theta, "v_theory": v}
        row.update({f"v_{k}": val for k, val in fit.estimates.items()})
        row.update(
            v_mean=fit.mean,
            v_spread=fit.spread,
            v_stderr=fit.stderr,
            trace_distance=tomography.trace_distance(rec, truth),
            concurrence=conc,
            tangle=tang,
            valid=int(rec.is_valid),
        )
        rows.append(row)
    return cols, rows, {}


def _tangle_curve(cfg: RunConfig, trials: int):
    cols = ["theta", "v", "lambda1", "lambda2", "lambda3", "lambda4", "concurrence", "tangle", "tangle_analytic"]
    if cfg.theta:
        points = [(t, states.v_from_theta(t)) for t in cfg.theta]
    else:
        points = [(states.theta_from_v(v), v) for v in cfg.v_values()]
    rows = []
    for theta, v in points:
        rep = tomography.tangle(states.rho_v(_clip01(v)))
        row = {"theta": theta, "v": v}
        row.update({f"lambda{i + 1}": lam for i, lam in enumerate(rep.eigenvalues)})
        row.update(concurrence=rep.concurrence, tangle=rep.tangle, tangle_analytic=tomography.analytic_tangle(v))
        rows.append(row)
    return cols, rows, {}


def _tables(cfg: RunConfig, trials: int):
    tables = mdi.reference_tables()
    cols = ["v", "class", "s", "t", "beta", "p"]
    rows = []
    for v in cfg.v_values(TABLE_VS):
        rho = states.rho_v(_clip01(v))
        for c in mdi.OUTCOME_CLASSES:
            for (s, t), beta in tables[c].nonzero().items():
                p = mdi.bsm_probability(rho, states.ancilla(s), states.ancilla(t), c)
                rows.append({"v": v, "class": c, "s": s, "t": t, "beta": beta, "p": p})
    return cols, rows, {}


_HANDLERS = {
    "attack-demo": _attack_demo,
    "efficiency-curve": _efficiency_curve,
    "mdiew-curve": _mdiew_curve,
    "mdiew-adversary": _mdiew_adversary,
    "tomography": _tomography,
    "tangle-curve": _tangle_curve,
    "tables": _tables,
}


def _clip01(v: float) -> float:
    # v_from_theta can land a rounding error outside [0, 1]
    return min(1.0, max(0.0, v))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def render(cols, rows, metadata, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "columns": cols,
            "rows": [{c: _jsonable(r.get(c)) for c in cols} for r in rows],
            "metadata": {k: _jsonable(v) for k, v in metadata.items()},
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    for k, v in metadata.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    return buf.getvalue()


def run(cfg: RunConfig) -> str:
    """Execute a command and return the rendered output text."""
    trials = cfg.resolved_trials()
    log.info("command=%s seed=%d (%s) trials=%d", cfg.command, cfg.seed, cfg.seed_source, trials)
    cols, rows, extra = _HANDLERS[cfg.command](cfg, trials)
    metadata = {
        "command": cfg.command,
        "seed": cfg.seed,
        "seed_source": cfg.seed_source,
        "trials": trials,
        "mode": "monte-carlo" if trials else "analytic",
        "version": __version__,
    }
    metadata.update(extra)
    return render(cols, rows, metadata, cfg.format)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mdiew",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: ${SEED_ENV} if set, else {DEFAULT_SEED})")
    p.add_argument("--trials", type=int, default=None,
                   help="Monte Carlo trials per setting/axis/basis; 0 = analytic "
                        f"(default {DEFAULT_TRIALS}, tomography {tomography.DEFAULT_SHOTS})")
    p.add_argument("--v", type=float, action="append", default=[], help="mixing parameter (repeatable)")
    p.add_argument("--theta", type=float, action="append", default=[],
                   help="selector half-wave-plate angle in degrees (repeatable)")
    p.add_argument("--delta-t", type=float, action="append", default=[],
                   help="detector delay in ns (repeatable for efficiency-curve)")
    p.add_argument("--window", type=float, default=detection.ATTACK_WINDOW, help="coincidence window, ns")
    p.add_argument("--jitter-sigma", type=float, default=detection.ATTACK_JITTER_SIGMA,
                   help="per-detector Gaussian jitter, ns")
    p.add_argument("--draws", type=int, default=DEFAULT_DRAWS, help="mdiew-adversary sample count")
    p.add_argument("--no-hwp", dest="hwp", action="store_false",
                   help="attack-demo: skip the H<->V half-wave plate on qubit B")
    p.add_argument("--out", default="-", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--verbose", action="store_true", help="log the seed and run settings to stderr")
    return p


def config_from_args(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    seed, source = args.seed, "flag"
    if seed is None:
        if environ.get(SEED_ENV):
            seed, source = int(environ[SEED_ENV]), f"env:{SEED_ENV}"
        else:
            seed, source = DEFAULT_SEED, "default"
    return RunConfig(
        command=args.command,
        seed=seed,
        trials=args.trials,
        v=args.v,
        theta=args.theta,
        delta_t=args.delta_t,
        window=args.window,
        jitter_sigma=args.jitter_sigma,
        draws=args.draws,
        hwp=args.hwp,
        out=args.out,
        format=args.format,
        seed_source=source,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        text = run(cfg)
        if cfg.out == "-":
            sys.stdout.write(text)
        else:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
    except (ValueError, KeyError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"mdiew: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

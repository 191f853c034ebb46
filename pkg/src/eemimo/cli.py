"""Command-line front end: ``eemimo <subcommand> [options]``.

Every subcommand reads an optional configuration file (see
:mod:`eemimo.config`), applies command-line overrides, prints a short
summary and writes one CSV file into the output directory. CSV headers
carry units; numbers are written with 10 significant digits so the files
are byte-identical across runs for a fixed configuration and seed.

Exit status: 0 on success, 1 when ``check`` finds a failing property,
2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import ConfigError, ExperimentConfig, load_config, with_overrides
from .montecarlo import estimate_ee
from .optimizers import alternating_optimize, exhaustive_search, optimal_rho
from .power import Scheme
from .rates import DesignPoint, Regime, evaluate_ee
from .scenario import MulticellScenario

log = logging.getLogger("eemimo")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def write_csv(path: Path, header, rows) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


def _regime(cfg: ExperimentConfig):
    exp = cfg.experiment
    if exp.regime == "perfect":
        return Regime.perfect()
    if exp.regime == "imperfect":
        return Regime.imperfect(cfg.profile.tau_ul)
    return Regime.of_multicell(MulticellScenario.build(cfg.square_scenario(), exp.reuse))


def _ranges(cfg: ExperimentConfig):
    e = cfg.experiment
    return range(e.m_min, e.m_max + 1, e.m_step), range(e.k_min, e.k_max + 1, e.k_step)


def _sweep(cfg: ExperimentConfig, regime=None):
    e = cfg.experiment
    regime = _regime(cfg) if regime is None else regime
    scen = cfg.square_scenario() if regime.kind == "multicell" else cfg.scenario
    m_range, k_range = _ranges(cfg)
    kw = {}
    if Scheme.parse(e.scheme) is not Scheme.ZF:
        kw = {"trials": e.trials, "seed": e.seed}
    return exhaustive_search(cfg.profile, scen, regime, e.scheme, m_range, k_range, **kw), scen


# -- subcommands ------------------------------------------------------------------------


def cmd_optimize(cfg: ExperimentConfig, out: Path) -> int:
    if Scheme.parse(cfg.experiment.scheme) is not Scheme.ZF or cfg.experiment.regime != "perfect":
        raise ConfigError("optimize runs the closed-form alternating algorithm: needs scheme = zf, regime = perfect")
    res = alternating_optimize(cfg.profile, cfg.scenario)
    rows = [(it, step, M, K, rho, ee / 1e6) for it, step, M, K, rho, ee in res.trajectory]
    write_csv(out / "trajectory.csv", ["iteration", "step", "M", "K", "rho", "ee_Mbit_per_J"], rows)
    p = res.point
    status = "converged" if res.converged else "NOT converged"
    print(f"alternating optimization {status} after {res.iterations} iterations: "
          f"M={p.M} K={p.K} rho={p.rho:.6g} EE={res.ee / 1e6:.4f} Mbit/J")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    res, _ = _sweep(cfg)
    B = cfg.profile.B
    rows = ((M, K, rho, B * se / 1e6, ee / 1e6, ptx, pcp) for M, K, rho, se, ee, ptx, pcp in res.rows())
    n = write_csv(
        out / "sweep.csv",
        ["M", "K", "rho_star", "gross_rate_Mbit_per_s", "ee_Mbit_per_J", "p_tx_W", "p_cp_W"],
        rows,
    )
    b = res.best
    print(f"{n} cells; EE-optimum M={b.M} K={b.K} rho={b.rho:.6g} EE={res.best_ee / 1e6:.4f} Mbit/J")
    return EXIT_OK


def cmd_curves(cfg: ExperimentConfig, out: Path) -> int:
    res, scen = _sweep(cfg)
    hw = cfg.profile
    km2 = scen.area / 1e6
    rows = []
    for j, M in enumerate(res.m_values):
        col = res.ee[:, j]
        if not np.any(col > 0):
            continue
        i = int(np.argmax(col))
        K = int(res.k_values[i])
        rho, se, ptx = res.rho[i, j], res.se[i, j], res.p_tx[i, j]
        net = K * (1.0 - hw.tau_sum * K / hw.U) * hw.B * se
        # Radiated downlink power per antenna: PA power times eta, downlink share, per antenna.
        per_ant_mw = 1e3 * ptx * hw.eta * hw.zeta_dl / M
        rows.append((int(M), K, rho, col[i] / 1e6, ptx, per_ant_mw, net / 1e9 / km2))
    write_csv(
        out / "curves.csv",
        ["M", "K_opt", "rho_opt", "ee_Mbit_per_J", "p_tx_total_W", "p_tx_dl_per_antenna_mW",
         "area_throughput_Gbit_per_s_per_km2"],
        rows,
    )
    b = res.best
    at = next(r for r in rows if r[0] == b.M)
    print(f"{len(rows)} values of M; at the optimum M={b.M} K={b.K}: "
          f"{at[5]:.1f} mW per antenna (downlink), {at[6]:.2f} Gbit/s/km^2")
    return EXIT_OK


def cmd_montecarlo(cfg: ExperimentConfig, out: Path) -> int:
    e, hw = cfg.experiment, cfg.profile
    if e.regime == "multicell":
        raise ConfigError("montecarlo supports the perfect and imperfect regimes only")
    scheme = Scheme.parse(e.scheme)
    M, K, rho = e.point_m, e.point_k, e.point_rho
    if M == 0 or K == 0:
        best = exhaustive_search(hw, cfg.scenario).best
        M, K = M or best.M, K or best.K
    if rho == 0:
        if M < K + 1:
            raise ConfigError("point_rho = 0 needs point_m >= point_k + 1 (it uses the ZF optimum)")
        rho = optimal_rho(hw, cfg.scenario, M, K)
    est = estimate_ee(hw, cfg.scenario, scheme, M, K, rho, trials=e.trials, seed=e.seed, mode=e.regime)
    analytic = None
    if scheme is Scheme.ZF:
        analytic = evaluate_ee(hw, cfg.scenario, scheme, DesignPoint(M, K, rho, _regime(cfg))).ee / 1e6
    write_csv(
        out / "montecarlo.csv",
        ["scheme", "mode", "M", "K", "rho", "trials", "seed", "ee_Mbit_per_J", "ee_half_width_95_Mbit_per_J",
         "feasibility_rate", "pa_power_W", "pa_power_half_width_95_W", "net_sum_rate_Mbit_per_s",
         "analytic_ee_Mbit_per_J"],
        [(scheme.value, e.regime, M, K, rho, est.trials, e.seed, est.mean / 1e6, est.half_width_95 / 1e6,
          est.feasibility_rate, est.pa_power, est.pa_power_half_width, est.net_sum_rate / 1e6, analytic)],
    )
    extra = f" (analytic {analytic:.4f})" if analytic is not None else ""
    print(f"{scheme.value} M={M} K={K} rho={rho:.6g}: EE={est.mean / 1e6:.4f} +- {est.half_width_95 / 1e6:.4f} "
          f"Mbit/J{extra}, feasible blocks {est.feasibility_rate:.1%}")
    return EXIT_OK


def cmd_multicell(cfg: ExperimentConfig, out: Path, reuse_given: bool) -> int:
    if Scheme.parse(cfg.experiment.scheme) is not Scheme.ZF:
        raise ConfigError("the multi-cell analysis is ZF only")
    reuses = [cfg.experiment.reuse] if reuse_given else [1, 2, 4]
    scen = cfg.square_scenario()
    km2 = scen.area / 1e6
    rows = []
    for r in reuses:
        mc = MulticellScenario.build(scen, r)
        res, _ = _sweep(cfg, Regime.of_multicell(mc))
        b = res.best
        i, j = list(res.k_values).index(b.K), list(res.m_values).index(b.M)
        se = res.se[i, j]
        tau_sum = r + cfg.profile.tau_dl
        net = b.K * (1.0 - tau_sum * b.K / cfg.profile.U) * cfg.profile.B * se
        rows.append((r, mc.i_pc, mc.i_pc2, mc.i_total, b.M, b.K, b.rho, se, res.best_ee / 1e6, net / 1e9 / km2))
        print(f"reuse {r}: I_PC={mc.i_pc:.4g} I_PC2={mc.i_pc2:.4g} I={mc.i_total:.5g}; "
              f"optimum M={b.M} K={b.K} rho={b.rho:.4g} SE={se:.3f} bit/symbol EE={res.best_ee / 1e6:.3f} Mbit/J")
    write_csv(
        out / "multicell.csv",
        ["reuse", "i_pc", "i_pc2", "i_total", "M", "K", "rho", "se_bit_per_symbol", "ee_Mbit_per_J",
         "area_throughput_Gbit_per_s_per_km2"],
        rows,
    )
    return EXIT_OK


def cmd_check(cfg: ExperimentConfig, out: Path) -> int:
    results = run_checks()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    write_csv(out / "check.csv", ["check", "passed", "detail"], [(r.name, r.passed, r.detail) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMMANDS = {
    "optimize": (cmd_optimize, "alternating closed-form optimization (ZF); writes trajectory.csv"),
    "sweep": (cmd_sweep, "EE over the (M, K) grid with the best rho per cell; writes sweep.csv"),
    "curves": (cmd_curves, "per-M optimal EE, PA power and area throughput; writes curves.csv"),
    "montecarlo": (cmd_montecarlo, "Monte Carlo EE of one operating point; writes montecarlo.csv"),
    "multicell": (cmd_multicell, "interference sums and optimum per pilot reuse factor; writes multicell.csv"),
    "check": (cmd_check, "run the oracle/property checks; exit 1 on any failure"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="configuration file (defaults to the reference values)")
    common.add_argument("--out", metavar="DIR", help="output directory for CSV files")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--trials", type=int, help="Monte Carlo blocks")
    common.add_argument("--scheme", choices=["zf", "mrt", "mmse"])
    common.add_argument("--regime", choices=["perfect", "imperfect", "multicell"])
    common.add_argument("--reuse", type=int, choices=[1, 2, 4], help="pilot reuse factor")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eemimo", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def run_subcommand(command: str, cfg: ExperimentConfig, out=None, reuse_given: bool = False) -> int:
    fn = COMMANDS[command][0]
    out = Path(cfg.experiment.out if out is None else out)
    if command == "multicell":
        return fn(cfg, out, reuse_given)
    return fn(cfg, out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = with_overrides(
            cfg, seed=args.seed, trials=args.trials, scheme=args.scheme, regime=args.regime, reuse=args.reuse,
            out=args.out,
        )
        return run_subcommand(args.command, cfg, reuse_given=args.reuse is not None)
    except (ConfigError, ValueError) as exc:
        print(f"eemimo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""``ltem-ntn`` command line: reproduce tables, emit figure data, run simulations.

Every command writes CSV files named ``<output>_<scenario>.csv`` into
``--out`` and prints a JSON run report on stdout. The exit status is 0 only
when every embedded check passes.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import linkbudget as lb
from . import mobility as mob
from . import orbit as ob
from . import reproduce as rp
from . import retx as rx
from . import sync as sy
from . import timers as tm
from ._io import sha256_file, write_csv
from .scenario import ConfigError, default_scenario, load

log = logging.getLogger("ltem_ntn")

SIMULATIONS = ("ra", "sr", "reordering", "ta", "pass", "switch")
DEFAULT_GRID = "-15:10:0.5"


def parse_grid(text):
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {text!r}")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


class Run:
    """Collects outputs and checks for one command."""

    def __init__(self, command, scenario, out_dir):
        self.command = command
        self.scenario = scenario
        self.out_dir = out_dir
        self.files = []
        self.checks = []
        self.summary = {}
        self.t0 = time.perf_counter()

    def path(self, output):
        return os.path.join(self.out_dir, f"{output}_{self.scenario.name}.csv")

    def csv(self, output, header, rows):
        self.files.append(write_csv(self.path(output), header, rows))

    def add(self, path):
        self.files.append(path)

    def check(self, name, ok, detail=None):
        self.checks.append({"check": name, "pass": bool(ok), "detail": detail})

    def add_checks(self, checks):
        for c in checks:
            self.check(c.cell, c.passed, {"computed": c.computed, "published": c.published,
                                          "tolerance": c.tolerance, "unit": c.unit})

    @property
    def ok(self):
        return all(c["pass"] for c in self.checks)

    def report(self):
        return {
            "command": self.command,
            "scenario": self.scenario.name,
            "outputs": [{"path": p, "sha256": sha256_file(p)} for p in self.files],
            "checks_passed": sum(c["pass"] for c in self.checks),
            "checks_failed": [c for c in self.checks if not c["pass"]],
            "summary": self.summary,
            "wall_clock_s": round(time.perf_counter() - self.t0, 6),
        }


def cmd_table1(run, args):
    sc = run.scenario
    orbits = [sc.orbit_by_altitude(h) for h in rp.TABLE1]
    checks = rp.table1_checks(orbits)
    run.csv("table1", rp.CHECK_CSV_HEADER, [c.row() for c in checks])
    run.add_checks(checks)


def cmd_table2(run, args):
    budgets = run.scenario.require("budgets")
    checks = rp.table2_checks(budgets)
    run.csv("table2", rp.CHECK_CSV_HEADER, [c.row() for c in checks])
    run.add_checks(checks)
    for key, b in budgets.items():
        print(f"# {key}\n{lb.snr(b).table()}", file=sys.stderr)


def cmd_subprb(run, args):
    budgets = run.scenario.require("budgets")
    checks = rp.subprb_checks(budgets)
    run.csv("subprb", rp.CHECK_CSV_HEADER, [c.row() for c in checks])
    for key in rp.SUBPRB_SNR_DB:
        if key in budgets:
            bws = list(lb.SUB_PRB_BANDWIDTHS_HZ) + [lb.FULL_PRB_HZ]
            run.csv(f"subprb_{key}", lb.SWEEP_CSV_HEADER, lb.sub_prb_sweep(budgets[key], bws))
    run.add_checks(checks)


def cmd_figures(run, args):
    sc = run.scenario
    curve = sc.bler_curve()
    grid = args.grid
    run.summary["bler_curve"] = {"family": type(curve).__name__, **vars(curve)}
    pols = rx.figure_policies()
    for fig in ("fig1", "fig2", "fig3"):
        rows = rx.curve_rows(pols[fig], curve, grid)
        run.csv(fig, rx.CURVE_CSV_HEADER, rows)
        run.summary[f"{fig}_nonconverged_rows"] = sum(1 for r in rows if r[-1])
    run.add_checks(rp.figure_checks(curve, grid))

    if args.trials:
        rows = []
        policies = sc.retx.policies if sc.retx.policies else pols["fig1"]
        for s in grid[:: max(1, len(grid) // 8)]:
            for pol in policies:
                mc = rx.monte_carlo_retx(pol, curve, s, args.trials, args.seed, args.workers)
                exact = rx.residual_bler(pol, curve, s)
                within = abs(mc.residual_bler - exact) <= mc.confidence_halfwidth
                rows.append((s, pol.label, pol.max_subframes, exact, mc.residual_bler,
                             mc.confidence_halfwidth, within))
        run.csv("montecarlo", ("snr_db", "policy", "n", "residual_bler", "mc_residual_bler",
                               "halfwidth_3sigma", "within"), rows)
        inside = sum(r[-1] for r in rows)
        run.summary["montecarlo_within_3sigma"] = f"{inside}/{len(rows)}"
        # allow the expected few 3-sigma excursions
        run.check("montecarlo_agreement", inside >= 0.95 * len(rows) - 1e-9,
                  {"within": inside, "total": len(rows)})


def _sim_ra(run):
    sc = run.scenario
    t = sc.require("timers")
    rtt = sc.timer_rtt_ms()
    legacy = replace(t.config, rtt_offset_enabled=False)
    for label, cfg in (("legacy", legacy), ("offset", replace(legacy, rtt_offset_enabled=True))):
        trace = tm.run_random_access(cfg, rtt, t.preamble_attempts_max)
        run.add(trace.to_csv(run.path(f"ra_{label}")))
        run.summary[f"ra_{label}"] = trace.outcome.value
    run.summary["rtt_ms"] = rtt


def _sim_sr(run):
    sc = run.scenario
    t = sc.require("timers")
    rtt = sc.timer_rtt_ms()
    for label, cfg in (("legacy", t.config),
                       ("extended", tm.adapt_for_ntn(t.config, rtt, t.grant_issue_delay_ms))):
        res = tm.run_sr_sequence(cfg, rtt, t.grant_issue_delay_ms)
        run.add(res.trace.to_csv(run.path(f"sr_{label}")))
        run.summary[f"sr_{label}"] = {"prohibit_ms": cfg.sr_prohibit_ms,
                                      "sr_transmissions": res.sr_transmissions,
                                      "duplicate_srs": res.duplicate_srs}


def _sim_reordering(run):
    sc = run.scenario
    t = sc.require("timers")
    rtt = sc.timer_rtt_ms()
    for label, cfg in (("legacy", t.config), ("extended", tm.adapt_for_ntn(t.config, rtt))):
        res = tm.run_rlc_reordering(cfg, rtt, t.loss_pattern, t.n_pdus)
        run.add(res.trace.to_csv(run.path(f"reordering_{label}")))
        run.summary[f"reordering_{label}"] = {"t_reordering_ms": cfg.t_reordering_ms,
                                              "spurious_status_reports": res.spurious_status_reports,
                                              "recovered": res.recovered}


def _sim_ta(run):
    s = run.scenario.require("sync")
    for mode in ("network_commands", "autonomous"):
        res = sy.ta_maintenance_sim(s.drift_us_per_s, s.error_budget_us, s.duration_s, mode, s.step_s)
        run.add(res.to_csv(run.path(f"ta_{mode}")))
        run.summary[f"ta_{mode}"] = {"commands_sent": res.commands_sent,
                                     "max_error_us": res.max_error_us}
        run.check(f"ta_{mode}_within_budget", res.max_error_us <= s.error_budget_us)


def _sim_pass(run):
    o = run.scenario.orbit
    p = ob.propagate_pass(o, True, 1.0)
    run.add(p.to_csv(run.path("pass")))
    run.summary["pass"] = {"duration_s": p.duration_s, "samples": len(p),
                           "max_doppler_ppm": float(np.max(np.abs(p.doppler_ppm))),
                           "max_doppler_rate_ppm_s": p.max_doppler_rate_ppm_s}
    sync = run.scenario.sync
    if sync is not None:
        worst_t, worst_f = sy.pass_residuals(p, sync.limits)
        run.summary["precompensation_residual"] = {"timing_us": worst_t, "freq_Hz": worst_f}
        run.check("precompensation_residual", worst_t < 1.0 and worst_f < 1.0)


def _sim_switch(run):
    sc = run.scenario
    m = sc.require("mobility")
    sched = mob.switch_schedule(m.plane, m.eps_min_deg, m.ground_point_deg, m.horizon_s)
    run.add(sched.to_csv(run.path("switch")))
    run.summary["switch"] = {"passes": len(sched.passes), "switches": len(sched.assistance),
                             "gap_free": sched.gap_free, "gaps": sched.gaps}
    # cell selection just before each switch, both cells seen at near-equal RSRP
    records = []
    scen = ob.OrbitScenario(m.plane.altitude_km, m.eps_min_deg)
    for a in sched.assistance:
        now = a.t_stop_serving_s - 1.0
        cands = []
        for sat, el in ((a.serving_sat, a.serving_elevation_deg), (a.target_sat, a.target_elevation_deg)):
            d = ob.slant_range(scen, el)
            info = a if sat == a.serving_sat else replace(
                a, t_stop_serving_s=a.t_start_serving_s + mob.visibility_window(m.plane.altitude_km,
                                                                                m.eps_min_deg))
            cands.append(mob.CellCandidate(f"sat{sat}", -lb.fspl(d, rp.CARRIER_HZ), info))
        sel = mob.select_cell_detailed(cands, m.hysteresis_dB, now)
        records.append({"t_s": now, **sel.to_record()})
    path = os.path.join(run.out_dir, f"cell_selection_{sc.name}.json")
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1, sort_keys=True)
    run.add(path)


SIM_HANDLERS = {"ra": _sim_ra, "sr": _sim_sr, "reordering": _sim_reordering,
                "ta": _sim_ta, "pass": _sim_pass, "switch": _sim_switch}


def cmd_simulate(run, args):
    SIM_HANDLERS[args.which](run)


COMMANDS = {"table1": cmd_table1, "table2": cmd_table2, "subprb": cmd_subprb,
            "figures": cmd_figures, "simulate": cmd_simulate}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file (default: built-in)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (figures)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--grid", type=parse_grid, default=parse_grid(DEFAULT_GRID),
                        help="SNR grid start:stop:step in dB")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ltem-ntn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table1", parents=[common], help="delay/Doppler table")
    sub.add_parser("table2", parents=[common], help="link budget table")
    sub.add_parser("subprb", parents=[common], help="sub-PRB bandwidth sweep")
    sub.add_parser("figures", parents=[common], help="retransmission curve data")
    sim = sub.add_parser("simulate", parents=[common], help="protocol/sync/mobility runs")
    sim.add_argument("which", choices=SIMULATIONS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load(args.scenario) if args.scenario else default_scenario()
        if args.trials and args.trials < 1000:
            raise ConfigError("--trials must be 0 or >= 1000")
        name = args.command if args.command != "simulate" else f"simulate {args.which}"
        run = Run(name, scenario, args.out)
        COMMANDS[args.command](run, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    json.dump(run.report(), sys.stdout, indent=1)
    sys.stdout.write("\n")
    for c in run.checks:
        if not c["pass"]:
            log.warning("check failed: %s %s", c["check"], c["detail"])
    return 0 if run.ok else 1


if __name__ == "__main__":
    sys.exit(main())

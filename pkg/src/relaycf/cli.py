"""Command-line front end.

    relaycf cf          CF, capacity and power of each strategy for a scenario
    relaycf validate    closed form against Monte-Carlo, with z-scores
    relaycf sweep-hops  CF against the number of hops
    relaycf sweep-power CF against the power budget, with the critical budget
    relaycf tradeoff    (capacity, CF) pairs along the budget sweep
    relaycf dissimilar  CF of a two-hop chain against the gain imbalance

Output is CSV (or TSV) on stdout or ``--out``; summaries go to stderr.
Exit codes: 0 success, 1 usage or scenario error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, NumericalError
from .metrics import average_cf, cf_af
from .montecarlo import McConfig, estimate_cf
from .optimizer import STRATEGIES, allocate
from .scenario import Scenario, db_to_linear, load_scenario, with_gains

__all__ = [
    "Table",
    "render",
    "cmd_cf",
    "cmd_validate",
    "cmd_sweep_hops",
    "cmd_sweep_power",
    "cmd_tradeoff",
    "cmd_dissimilar",
    "main",
]

Z_LIMIT = 3.0


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render(table: Table, fmt: str = "csv") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t" if fmt == "tsv" else ",", lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _evaluate(sc: Scenario, chain, strategy: str, p_tot: float):
    alloc = allocate(strategy, chain, p_tot, sc.solver_options())
    if not alloc.converged:
        raise NumericalError(f"{strategy} did not converge (N={chain.n}, budget {p_tot!r})")
    res = average_cf(chain, alloc.powers, sc.series_control(), sc.quadrature())
    return alloc, res


def cmd_cf(sc: Scenario) -> Table:
    t = Table(("protocol", "hops", "strategy", "p_tot", "cf", "capacity", "total_power", "budget_used", "kkt_residual", "powers"))
    chain = sc.chain()
    for s in sc.strategies:
        alloc, res = _evaluate(sc, chain, s, sc.budget)
        powers = ";".join(_cell(p) for p in alloc.powers)
        t.rows.append((chain.protocol.value, chain.n, s, sc.budget, res.cf, res.ergodic_capacity,
                       res.total_power, alloc.budget_used, alloc.kkt_residual, powers))
    return t


def _cell_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def cmd_validate(sc: Scenario) -> Table:
    """Closed-form CF against a Monte-Carlo estimate on the grid
    protocols x validate_hops x validate_m x snr_db.  Every hop gets the
    stated average SNR; ``coefficient`` selects the AF series normalization."""
    t = Table(("protocol", "hops", "m", "snr_db", "closed_form", "mc_mean", "mc_std_error", "z", "status"))
    idx = 0
    worst = 0.0
    for proto in sc.protocols:
        for n in sc.validate_hops:
            for m in sc.validate_m:
                for db in sc.snr_db:
                    chain = replace(sc, m=(m,), d=None).chain(n, proto)
                    pt = db_to_linear(db) / chain.gains
                    if proto.value == "AF":
                        closed = cf_af(chain, pt, sc.series_control(), coefficient=sc.coefficient).cf
                    else:
                        closed = average_cf(chain, pt, rule=sc.quadrature()).cf
                    mc = estimate_cf(chain, pt, McConfig(sc.samples, _cell_seed(sc.seed, idx), sc.streams))
                    z = mc.z_score(closed)
                    worst = max(worst, z)
                    t.rows.append((proto.value, n, m, float(db), closed, mc.mean, mc.std_error, z,
                                   "ok" if z <= Z_LIMIT else "z>3"))
                    idx += 1
    bad = sum(r[-1] != "ok" for r in t.rows)
    t.notes.append(f"validate: {len(t.rows) - bad}/{len(t.rows)} cells within {Z_LIMIT:g} standard errors (max z {worst:.3g})")
    return t


def cmd_sweep_hops(sc: Scenario) -> Table:
    t = Table(("protocol", "strategy", "hops", "cf", "capacity", "total_power", "budget_used"))
    for proto in sc.protocols:
        for s in sc.strategies:
            best = None
            for n in sc.hop_range:
                chain = replace(sc, d=None).chain(n, proto)
                alloc, res = _evaluate(sc, chain, s, sc.budget)
                t.rows.append((proto.value, s, n, res.cf, res.ergodic_capacity, res.total_power, alloc.budget_used))
                if best is None or res.cf > best[1]:
                    best = (n, res.cf)
            t.notes.append(f"sweep-hops: {proto.value} {s}: CF maximal at N={best[0]}")
    return t


def critical_budget(p_db, used, p_tot):
    """First budget at which the CF-optimal allocation leaves budget unused."""
    for db, u, p in zip(p_db, used, p_tot):
        if u < 0.999 * p:
            return db
    return None


def cmd_sweep_power(sc: Scenario) -> Table:
    t = Table(("protocol", "strategy", "p_tot_db", "p_tot", "cf", "capacity", "budget_used"))
    chain0 = sc.chain()
    for proto in sc.protocols:
        chain = chain0.with_protocol(proto)
        for s in sc.strategies:
            used = []
            for db in sc.power_db:
                p = db_to_linear(db)
                alloc, res = _evaluate(sc, chain, s, p)
                t.rows.append((proto.value, s, float(db), p, res.cf, res.ergodic_capacity, alloc.budget_used))
                used.append(alloc.budget_used)
            if s == "cfopa":
                crit = critical_budget(sc.power_db, used, [db_to_linear(d) for d in sc.power_db])
                where = "none in range" if crit is None else f"{crit:g} dB"
                t.notes.append(f"sweep-power: {proto.value} critical budget {where}")
    return t


def cmd_tradeoff(sc: Scenario) -> Table:
    """Two hops with unit per-watt SNR on each, along the budget sweep."""
    t = Table(("protocol", "strategy", "p_tot_db", "capacity", "cf"))
    for proto in sc.protocols:
        chain = with_gains(sc, (1.0, 1.0), proto)
        for s in sc.strategies:
            for db in sc.power_db:
                _, res = _evaluate(sc, chain, s, db_to_linear(db))
                t.rows.append((proto.value, s, float(db), res.ergodic_capacity, res.cf))
    return t


def cmd_dissimilar(sc: Scenario) -> Table:
    """Two hops with per-watt SNRs (1 + delta, 1) at the scenario budget."""
    t = Table(("protocol", "strategy", "delta", "cf", "capacity"))
    for proto in sc.protocols:
        for s in sc.strategies:
            for delta in sc.delta:
                chain = with_gains(sc, (1.0 + delta, 1.0), proto)
                _, res = _evaluate(sc, chain, s, sc.budget)
                t.rows.append((proto.value, s, float(delta), res.cf, res.ergodic_capacity))
    return t


COMMANDS = {
    "cf": cmd_cf,
    "validate": cmd_validate,
    "sweep-hops": cmd_sweep_hops,
    "sweep-power": cmd_sweep_power,
    "tradeoff": cmd_tradeoff,
    "dissimilar": cmd_dissimilar,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH", help="scenario file (INI); defaults are used without one")
    common.add_argument("--out", metavar="PATH", help="write the table here instead of stdout")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed (unsigned 64-bit)")
    common.add_argument("--samples", type=int, help="Monte-Carlo sample count")
    common.add_argument("--strategies", help=f"comma list from {','.join(STRATEGIES)}")
    common.add_argument("--format", choices=("csv", "tsv"), default="csv")
    common.add_argument("--coefficient", choices=("gamma", "factorial"),
                        help="AF series normalization for validate (factorial is a negative control)")
    p = _Parser(prog="relaycf", description="Consumption factor of multihop relay chains.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
    return p


def _scenario_from_args(args) -> Scenario:
    sc = load_scenario(args.scenario) if args.scenario else Scenario()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.samples is not None:
        over["samples"] = args.samples
    if args.strategies is not None:
        over["strategies"] = tuple(s.strip().lower() for s in args.strategies.split(",") if s.strip())
    if args.coefficient is not None:
        over["coefficient"] = args.coefficient
    return replace(sc, **over) if over else sc


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        sc = _scenario_from_args(args)
        table = COMMANDS[args.command](sc)
        text = render(table, args.format)
    except (ConfigError, DomainError) as exc:
        print(f"relaycf: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"relaycf: numerical failure: {exc}", file=sys.stderr)
        return 2
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"relaycf: error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    for note in table.notes:
        print(note, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

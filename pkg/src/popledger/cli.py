"""Command-line entry point.

Ledger state lives in a snapshot file (``--snapshot``, or the
``POPLEDGER_SNAPSHOT`` environment variable, default ``popledger.snap``);
each command loads it, applies one operation and writes it back.

Exit status: 0 on success, 1 on a domain error (stderr gets one line
``<ErrorCode>: <message>``), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import estimates, simulator
from .errors import InvalidConfig, PopledgerError
from .ledger import WORLD_POPULATION, EpochReport, Ledger
from .policy import parse_policy
from .value_space import DEFAULT_LIFESPAN, to_popcoin_display

DEFAULT_SNAPSHOT = "popledger.snap"
FORMATS = ("human", "csv", "json-lines")


# -- argument types ------------------------------------------------------------


def number(text: str) -> Fraction:
    """Exact decimal, ``e`` notation allowed: ``36800000e6``, ``0.02``."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def integer(text: str) -> int:
    q = number(text)
    if q.denominator != 1:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(q)


def natural(text: str) -> int:
    n = integer(text)
    if n < 0:
        raise argparse.ArgumentTypeError(f"must not be negative: {text!r}")
    return n


def hex_bytes(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex string: {text!r}") from None


# -- output ------------------------------------------------------------------


def emit(rows: list[dict[str, object]], fmt: str, out) -> None:
    if fmt == "json-lines":
        for row in rows:
            out.write(json.dumps({k: str(v) for k, v in row.items()}, sort_keys=True) + "\n")
    elif fmt == "csv":
        if rows:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(rows[0])
            for row in rows:
                writer.writerow(row.values())
    else:
        for i, row in enumerate(rows):
            if i:
                out.write("\n")
            for k, v in row.items():
                out.write(f"{k}: {v}\n")


def report_row(r: EpochReport) -> dict[str, object]:
    return {
        "epoch": r.epoch,
        "value_space": r.value_space_size,
        "issuance": r.issuance,
        "participants": r.participants,
        "per_participant": r.per_participant,
        "residual": r.residual,
        "popcoin_rate": simulator.rational_cell(r.popcoin_rate),
        "reward_factor": simulator.rational_cell(r.adoption_reward_factor),
        "share_per_participant": simulator.rational_cell(r.share_of_space_per_participant),
    }


# -- state file ----------------------------------------------------------------


def snapshot_path(args) -> Path:
    return Path(args.snapshot or os.environ.get("POPLEDGER_SNAPSHOT") or DEFAULT_SNAPSHOT)


def load(args) -> Ledger:
    path = snapshot_path(args)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise NoLedger(f"no ledger at {path}; run `popledger init` first") from None
    return Ledger.restore(data)


def save(args, ledger: Ledger) -> None:
    write_atomic(snapshot_path(args), ledger.snapshot())


def write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class NoLedger(PopledgerError):
    pass


# -- commands ----------------------------------------------------------------


def cmd_init(args, out) -> None:
    path = snapshot_path(args)
    if path.exists() and not args.force:
        raise InvalidConfig(f"{path} already exists (use --force to overwrite)")
    policy = parse_policy(args.policy, args.lifespan, args.batch_size)
    ledger = Ledger(policy=policy, property_lifespan=args.property_lifespan)
    save(args, ledger)
    emit([{"snapshot": path, "policy": policy.name, "lifespan": policy.lifespan,
           "property_lifespan": args.property_lifespan or "-"}], args.format, out)


def cmd_enroll(args, out) -> None:
    ledger = load(args)
    pid = ledger.enroll(args.credential)
    save(args, ledger)
    emit([{"id": pid, "epoch": ledger.epoch}], args.format, out)


def cmd_depart(args, out) -> None:
    ledger = load(args)
    ledger.depart(args.id)
    save(args, ledger)
    emit([{"departed": args.id, "epoch": ledger.epoch}], args.format, out)


def cmd_pay(args, out) -> None:
    ledger = load(args)
    tx = ledger.pay(args.sender, [(args.to, args.amount)])
    save(args, ledger)
    emit([{"txid": tx.txid, "inputs": len(tx.inputs), "outputs": len(tx.outputs)}], args.format, out)


def cmd_advance(args, out) -> None:
    ledger = load(args)
    report = ledger.advance_epoch(args.world_population)
    save(args, ledger)
    emit([report_row(report)], args.format, out)


def cmd_balance(args, out) -> None:
    ledger = load(args)
    bal = ledger.balance(args.owner)
    row: dict[str, object] = {"owner": args.owner, "spendable": bal.spendable, "escrowed": bal.escrowed}
    rate = ledger.rate
    if rate is not None:
        row["spendable_popcoin"] = to_popcoin_display(bal.spendable, rate, args.decimals)
        row["escrowed_popcoin"] = to_popcoin_display(bal.escrowed, rate, args.decimals)
    emit([row], args.format, out)


def cmd_convert(args, out) -> None:
    ledger = load(args)
    rate = ledger.rate
    if rate is None:
        from .errors import NoDistribution

        raise NoDistribution("no distribution has occurred yet")
    emit([{"poplets": args.amount, "popcoin": to_popcoin_display(args.amount, rate, args.decimals),
           "poplets_per_popcoin": simulator.rational_cell(rate.poplets_per_popcoin)}], args.format, out)


def cmd_property(args, out) -> None:
    ledger = load(args)
    action = args.action
    if action == "register":
        pid = ledger.register_property(args.buyer, args.seller, args.price)
    elif action == "transfer":
        pid = args.id
        ledger.transfer_property(pid, args.seller, args.buyer, args.price)
    elif action == "bid":
        pid = args.id
        ledger.place_bid(args.bidder, pid, args.amount)
    elif action == "appraise":
        pid = args.id
        ledger.appraise(pid, args.value)
    elif action == "escrow-adjust":
        pid = args.id
        ledger.adjust_escrow(pid, args.owner, args.delta)
    else:  # show
        ids = [args.id] if args.id else sorted(ledger.properties.records)
        rows = [_property_row(ledger, pid) for pid in ids]
        emit(rows, args.format, out)
        return
    save(args, ledger)
    emit([_property_row(ledger, pid)], args.format, out)


def _property_row(ledger: Ledger, pid: str) -> dict[str, object]:
    book = ledger.properties
    rec = book.get(pid)
    return {
        "id": pid,
        "owner": rec.owner,
        "appraised": rec.appraised_value,
        "escrow": rec.escrow,
        "tenure": rec.tenure,
        "registered": rec.registered_epoch,
        "bids": len(book.bids.get(pid, ())),
        "second_price": book.second_price(pid),
    }


def cmd_simulate(args, out) -> None:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.all:
        paths = sorted(Path(args.all).glob("*.txt")) + list(args.scenarios)
        written = simulator.run_all(paths, out_dir, args.engine, args.workers)
        emit([{"csv": p} for p in written], args.format, out)
        return
    if not args.scenarios:
        raise UsageError("simulate needs a scenario file or --all DIR")
    for path in args.scenarios:
        scenario = simulator.load_scenario(path)
        if args.format == "json-lines":
            reports = simulator.run_scenario(scenario, args.engine)
            out.write(simulator.reports_to_json_lines(reports, scenario.anchor))
        else:
            emit([{"csv": simulator.write_csv(scenario, out_dir, args.engine)}], args.format, out)


def cmd_estimate(args, out) -> None:
    if args.table:
        rows = []
        for region, incomes in estimates.table():
            row: dict[str, object] = {"region": region.name}
            for rate, income in zip(estimates.RATES, incomes):
                row[f"rate_{int(rate * 100)}pct"] = estimates.format_amount(income)
            row["poverty_line"] = region.poverty_line if region.poverty_line is not None else "-"
            rows.append(row)
        emit(rows, args.format, out)
        return
    missing = [f for f in ("m1", "population", "rate") if getattr(args, f) is None]
    if missing:
        raise UsageError(f"estimate needs --{' --'.join(missing)} (or --table)")
    if args.population.denominator != 1:
        raise UsageError("--population must be a whole number")
    income = estimates.estimate_basic_income(args.m1, int(args.population), args.rate)
    if args.format == "human":
        out.write(estimates.format_amount(income) + "\n")
        return
    gap = estimates.poverty_gap(income)
    emit([{"income": estimates.format_amount(income),
           "poverty_ratio": simulator.decimal_12(gap.ratio),
           "per_day": simulator.decimal_12(gap.per_day)}], args.format, out)


def cmd_snapshot(args, out) -> None:
    data = load(args).snapshot()
    if args.out == "-":
        out.write(data.decode())
    else:
        write_atomic(Path(args.out), data)
        emit([{"snapshot": args.out, "bytes": len(data)}], args.format, out)


def cmd_restore(args, out) -> None:
    source = sys.stdin.buffer.read() if args.source == "-" else Path(args.source).read_bytes()
    ledger = Ledger.restore(source)
    save(args, ledger)
    emit([{"snapshot": snapshot_path(args), "epoch": ledger.epoch, "utxos": len(ledger.utxos)}],
         args.format, out)


class UsageError(Exception):
    pass


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--snapshot", help="ledger snapshot file (env POPLEDGER_SNAPSHOT, default popledger.snap)")
    common.add_argument("--format", choices=FORMATS, default="human", help="output format")

    parser = argparse.ArgumentParser(
        prog="popledger",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Equal-share ledger: enroll people, distribute new money each epoch, "
        "move payments, escrow property, run scenarios.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("init", parents=[common], help="create a fresh ledger")
    p.add_argument("--policy", choices=("democratic", "expiring"), default="democratic")
    p.add_argument("--lifespan", "--circulating-lifespan", dest="lifespan", type=integer,
                   default=DEFAULT_LIFESPAN, help="nominal lifespan L in epochs (default 50)")
    p.add_argument("--property-lifespan", type=integer, help="separate lifespan for escrowed value")
    p.add_argument("--batch-size", type=integer, help="Poplets per batch under the expiring policy")
    p.add_argument("--force", action="store_true", help="overwrite an existing snapshot")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("enroll", parents=[common], help="enroll a person from a hex credential")
    p.add_argument("--credential", type=hex_bytes, required=True, help="attestation credential as hex")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("depart", parents=[common], help="stop future distributions to a participant")
    p.add_argument("--id", required=True, help="participant id")
    p.set_defaults(func=cmd_depart)

    p = sub.add_parser("pay", parents=[common], help="pay Poplets from one participant to another")
    p.add_argument("--from", dest="sender", required=True, help="paying participant id")
    p.add_argument("--to", required=True, help="payee id")
    p.add_argument("--amount", type=integer, required=True, help="Poplets")
    p.set_defaults(func=cmd_pay)

    p = sub.add_parser("advance-epoch", parents=[common], help="devalue, issue and distribute one epoch")
    p.add_argument("--world-population", type=integer, default=WORLD_POPULATION,
                   help="population used for the adoption reward factor")
    p.set_defaults(func=cmd_advance)

    p = sub.add_parser("balance", parents=[common], help="spendable and escrowed Poplets of an owner")
    p.add_argument("--owner", required=True, help="participant id")
    p.add_argument("--decimals", type=natural, default=2, help="Popcoin decimal places")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("convert", parents=[common], help="express Poplets in Popcoin at the current rate")
    p.add_argument("--amount", type=natural, required=True, help="Poplets")
    p.add_argument("--decimals", type=natural, default=2, help="Popcoin decimal places")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("property", parents=[common], help="property registry operations")
    psub = p.add_subparsers(dest="action", metavar="ACTION", required=True)
    q = psub.add_parser("register", parents=[common], help="buy and register a property (needs 2x price)")
    q.add_argument("--buyer", required=True)
    q.add_argument("--seller", required=True)
    q.add_argument("--price", type=integer, required=True)
    q = psub.add_parser("transfer", parents=[common], help="resell a registered property")
    q.add_argument("--id", required=True)
    q.add_argument("--seller", required=True)
    q.add_argument("--buyer", required=True)
    q.add_argument("--price", type=integer, required=True)
    q = psub.add_parser("bid", parents=[common], help="place or replace a standing bid")
    q.add_argument("--id", required=True)
    q.add_argument("--bidder", required=True)
    q.add_argument("--amount", type=integer, required=True)
    q = psub.add_parser("appraise", parents=[common], help="record a new appraisal")
    q.add_argument("--id", required=True)
    q.add_argument("--value", type=integer, required=True)
    q = psub.add_parser("escrow-adjust", parents=[common], help="top up (+) or withdraw (-) escrow")
    q.add_argument("--id", required=True)
    q.add_argument("--owner", required=True)
    q.add_argument("--delta", type=integer, required=True, help="signed Poplets")
    q = psub.add_parser("show", parents=[common], help="list registered properties")
    q.add_argument("--id", help="a single property id")
    p.set_defaults(func=cmd_property)

    p = sub.add_parser("simulate", parents=[common], help="run scenario files and write <name>.csv")
    p.add_argument("scenarios", nargs="*", help="scenario files")
    p.add_argument("--all", metavar="DIR", help="run every *.txt scenario in DIR in parallel")
    p.add_argument("--output-dir", default=".", help="directory for CSV output")
    p.add_argument("--engine", choices=simulator.ENGINES, default="ledger",
                   help="ledger (full UTXO ledger) or aggregate (head counts only)")
    p.add_argument("--workers", type=integer, help="parallel workers for --all")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="basic income from M1, population and rate")
    p.add_argument("--m1", type=number, help="M1 money supply in currency units, e.g. 36800000e6")
    p.add_argument("--population", type=number, help="head count, e.g. 7630000e3")
    p.add_argument("--rate", type=number, help="yearly devaluation rate, e.g. 0.02")
    p.add_argument("--table", action="store_true", help="print the built-in five-region table")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("snapshot", parents=[common], help="export the canonical snapshot")
    p.add_argument("--out", default="-", help="output file, - for stdout")
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("restore", parents=[common], help="validate a snapshot and make it the current ledger")
    p.add_argument("--from", dest="source", required=True, help="snapshot file, - for stdin")
    p.set_defaults(func=cmd_restore)
    parser.epilog = "commands and flags:\n" + "\n".join(_flag_summary(sub))
    return parser


def _flag_summary(sub, prefix: str = "") -> list[str]:
    lines = []
    for name, p in sub.choices.items():
        nested = [a for a in p._actions if isinstance(a, argparse._SubParsersAction)]
        if nested:
            lines += _flag_summary(nested[0], f"{prefix}{name} ")
            continue
        flags = [a.option_strings[-1] if len(a.option_strings) == 1 else "/".join(a.option_strings)
                 for a in p._actions if a.option_strings and a.dest != "help"]
        positional = [a.metavar or a.dest for a in p._actions if not a.option_strings]
        lines.append(f"  {prefix}{name} " + " ".join(positional + flags))
    return lines


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except PopledgerError as exc:
        err.write(f"{exc.code}: {exc}\n")
        return 1
    except OSError as exc:
        err.write(f"IOError: {exc}\n")
        return 1
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

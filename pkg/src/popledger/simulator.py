"""Scenario runs: a population trajectory in, per-epoch metrics out.

No behaviour is modelled. Every metric is a mechanical ledger quantity, so a
scenario is a pure function of its definition and re-running it reproduces
the CSV byte for byte.

Two engines produce identical reports. ``ledger`` drives a real
:class:`~popledger.ledger.Ledger` with one enrolled identity per person and
one coinbase output each; ``aggregate`` keeps only head counts and is meant
for populations in the millions.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, field, replace
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import yaml

from .errors import InvalidConfig, InvalidScenario
from .ledger import WORLD_POPULATION, EpochReport, Ledger
from .policy import Democratic, ExpiringCoins, PolicyKind, adoption_reward_factor, parse_policy, split_pool
from .value_space import conversion_rate, expand_epoch, new_value_space

CSV_HEADER = (
    "epoch",
    "value_space",
    "issuance",
    "participants",
    "per_participant",
    "popcoin_rate",
    "reward_factor",
    "share_per_participant",
)
ENGINES = ("ledger", "aggregate")


@dataclass(frozen=True)
class Scenario:
    name: str
    policy: PolicyKind
    epochs: int
    population: tuple[int, ...]
    world_population: int = WORLD_POPULATION
    # M1-equivalent of the whole value space in some external unit
    anchor: Fraction | None = None
    property_lifespan: int | None = field(default=None)

    def __post_init__(self) -> None:
        if not self.name or any(c in self.name for c in "/\\"):
            raise InvalidScenario(f"scenario name must be a plain file stem, got {self.name!r}")
        if self.epochs <= 0:
            raise InvalidScenario("a scenario needs at least one epoch")
        if len(self.population) != self.epochs:
            raise InvalidScenario(f"{len(self.population)} population entries for {self.epochs} epochs")
        if any(not isinstance(n, int) or n <= 0 for n in self.population):
            raise InvalidScenario("every epoch needs a positive population")
        if self.world_population <= 0:
            raise InvalidScenario("world population must be positive")


def parse_scenario(text: str) -> Scenario:
    """Parse the ``key: value`` scenario format.

    ``population`` may be a YAML list or a comma-separated string.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidScenario(f"unreadable scenario: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidScenario("scenario must be a mapping of fields")
    unknown = set(raw) - {"name", "policy", "lifespan", "epochs", "population", "world_population", "anchor",
                          "batch_size", "property_lifespan"}
    if unknown:
        raise InvalidScenario(f"unknown scenario fields: {sorted(unknown)}")
    try:
        pop = raw["population"]
        if isinstance(pop, str):
            pop = [p for p in pop.replace(",", " ").split()]
        population = tuple(_to_int(p) for p in pop)
        epochs = _to_int(raw.get("epochs", len(population)))
        policy = parse_policy(
            str(raw.get("policy", "democratic")),
            _to_int(raw.get("lifespan", 50)),
            _to_int(raw["batch_size"]) if raw.get("batch_size") is not None else None,
        )
        anchor = Fraction(str(raw["anchor"])) if raw.get("anchor") is not None else None
        return Scenario(
            name=str(raw["name"]),
            policy=policy,
            epochs=epochs,
            population=population,
            world_population=_to_int(raw.get("world_population", WORLD_POPULATION)),
            anchor=anchor,
            property_lifespan=_to_int(raw["property_lifespan"]) if raw.get("property_lifespan") else None,
        )
    except KeyError as exc:
        raise InvalidScenario(f"missing scenario field {exc}") from exc
    except (TypeError, ValueError, InvalidConfig) as exc:
        raise InvalidScenario(str(exc)) from exc


def _to_int(value: object) -> int:
    if isinstance(value, bool):
        raise ValueError(f"not an integer: {value!r}")
    q = Fraction(str(value))
    if q.denominator != 1:
        raise ValueError(f"not an integer: {value!r}")
    return int(q)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def run_scenario(scenario: Scenario, engine: str = "ledger") -> list[EpochReport]:
    if engine == "ledger":
        return _run_ledger(scenario)
    if engine == "aggregate":
        return _run_aggregate(scenario)
    raise InvalidConfig(f"unknown engine {engine!r}")


def _run_ledger(scenario: Scenario) -> list[EpochReport]:
    ledger = Ledger(policy=scenario.policy, property_lifespan=scenario.property_lifespan)
    members: deque[str] = deque()
    serial = 0
    reports = []
    for target in scenario.population:
        while len(members) < target:
            members.append(ledger.enroll(f"{scenario.name}:{serial}".encode()))
            serial += 1
        while len(members) > target:
            # earliest enrollee leaves first
            ledger.depart(members.popleft())
        reports.append(ledger.advance_epoch(scenario.world_population))
    return reports


def _run_aggregate(scenario: Scenario) -> list[EpochReport]:
    policy = scenario.policy
    vs = new_value_space(policy.lifespan)
    # (expiry, minted amount) per live batch
    window: deque[tuple[int, int]] = deque()
    reports = []
    for epoch, n in enumerate(scenario.population, start=1):
        if isinstance(policy, Democratic):
            expanded, issuance = expand_epoch(vs)
        else:
            expanded, issuance = vs, policy.batch
            while window and window[0][0] <= epoch:
                window.popleft()
        per, residual = split_pool(issuance + vs.residual, n)
        vs = replace(expanded, residual=residual)
        if isinstance(policy, Democratic):
            size = vs.size
        else:
            if per:
                window.append((epoch + policy.lifespan, per * n))
            size = sum(amount for _, amount in window)
        reports.append(
            EpochReport(
                epoch=epoch,
                value_space_size=size,
                issuance=issuance,
                participants=n,
                per_participant=per,
                residual=residual,
                popcoin_rate=conversion_rate(issuance, n, epoch).poplets_per_popcoin,
                adoption_reward_factor=adoption_reward_factor(scenario.world_population, n),
                share_of_space_per_participant=Fraction(per, size) if size else Fraction(0),
            )
        )
    return reports


# -- output ------------------------------------------------------------------


def decimal_12(value: Fraction) -> str:
    with localcontext() as ctx:
        ctx.prec = 12
        return format(Decimal(value.numerator) / Decimal(value.denominator), "f")


def rational_cell(value: Fraction) -> str:
    """Exact ``p/q`` followed by a 12-significant-digit decimal."""
    return f"{value.numerator}/{value.denominator} {decimal_12(value)}"


def reports_to_csv(reports: Sequence[EpochReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(
            [
                r.epoch,
                r.value_space_size,
                r.issuance,
                r.participants,
                r.per_participant,
                rational_cell(r.popcoin_rate),
                rational_cell(r.adoption_reward_factor),
                rational_cell(r.share_of_space_per_participant),
            ]
        )
    return buf.getvalue()


def reports_to_json_lines(reports: Sequence[EpochReport], anchor: Fraction | None = None) -> str:
    lines = []
    for r in reports:
        row: dict[str, object] = {
            "epoch": r.epoch,
            "value_space": str(r.value_space_size),
            "issuance": str(r.issuance),
            "participants": r.participants,
            "per_participant": str(r.per_participant),
            "residual": str(r.residual),
        }
        for key, value in (
            ("popcoin_rate", r.popcoin_rate),
            ("reward_factor", r.adoption_reward_factor),
            ("share_per_participant", r.share_of_space_per_participant),
        ):
            row[key] = f"{value.numerator}/{value.denominator}"
            row[key + "_decimal"] = decimal_12(value)
        if anchor is not None:
            row["anchor_income"] = decimal_12(anchor * r.share_of_space_per_participant)
        lines.append(json.dumps(row, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def write_csv(scenario: Scenario, out_dir: str | Path, engine: str = "ledger") -> Path:
    path = Path(out_dir) / f"{scenario.name}.csv"
    path.write_text(reports_to_csv(run_scenario(scenario, engine)))
    return path


def _run_file(args: tuple[str, str, str]) -> str:
    scenario_path, out_dir, engine = args
    return str(write_csv(load_scenario(scenario_path), out_dir, engine))


def run_all(scenario_paths: Sequence[str | Path], out_dir: str | Path, engine: str = "ledger",
            workers: int | None = None) -> list[Path]:
    """Run scenarios in parallel worker processes; each writes its own CSV."""
    from concurrent.futures import ProcessPoolExecutor

    names = [load_scenario(p).name for p in scenario_paths]
    if len(set(names)) != len(names):
        raise InvalidScenario("scenario names must be distinct to keep output files disjoint")
    jobs = [(str(p), str(out_dir), engine) for p in scenario_paths]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [Path(p) for p in pool.map(_run_file, jobs)]

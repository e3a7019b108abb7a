"""Seeded Monte Carlo runner and command-line entry point.

Trial ``i`` of a run with base seed ``s`` uses session seed ``mix(s, i)``:

    z = (s + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    mix = z ^ (z >> 31)

(the SplitMix64 step). Each stage is a bijection on 64-bit words, so seeds are
pairwise distinct across all trial indices below 2**64.

Output columns, in order: ``schema_version``, the config echo (``variant,
adversary, countermeasure, n, u, m, trials, base_seed``), then the statistics
(``accept_rate, key_match_rate, eve_key_exact_rate, mean_eve_bit_accuracy,
detection_rate, max_disturbance, eve_nonfixed_bit_accuracy,
nonfixed_positions, nonfixed_outcome_counts, bob_bit_error_rate,
wall_time``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .adversary import AdversaryKind, make_adversary
from .protocol import ProtocolParams, Variant, Verdict, run_session

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix(base_seed: int, index: int) -> int:
    z = (base_seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    variant: Variant = Variant.QKDP1
    adversary: AdversaryKind = AdversaryKind.NONE
    countermeasure: bool = False
    n: int = 64
    u: int = 48
    m: int = 16
    trials: int = 100
    base_seed: int = 0
    output_format: str = "json"
    output_path: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
            object.__setattr__(self, "adversary", AdversaryKind(self.adversary))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.output_format not in ("json", "csv"):
            raise ConfigError(f"unknown output format {self.output_format!r}")
        try:
            self.session_params(0)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def session_params(self, seed: int) -> ProtocolParams:
        return ProtocolParams(
            n=self.n,
            u=self.u,
            m=self.m,
            variant=self.variant,
            countermeasure_shuffle=self.countermeasure,
            base_seed=seed,
        )

    def echo(self) -> dict:
        return {
            "variant": self.variant.value,
            "adversary": self.adversary.value,
            "countermeasure": self.countermeasure,
            "n": self.n,
            "u": self.u,
            "m": self.m,
            "trials": self.trials,
            "base_seed": self.base_seed,
        }


@dataclass
class _Tally:
    """Additive per-trial counts; merging is commutative, so trial order is irrelevant."""

    trials: int = 0
    accepts: int = 0
    key_matches: int = 0
    eve_scored: int = 0
    eve_exact: int = 0
    eve_accuracy_sum: float = 0.0
    max_disturbance: float = 0.0
    nonfixed_positions: int = 0
    nonfixed_correct: int = 0
    outcome_counts: list[int] = field(default_factory=lambda: [0, 0, 0, 0])
    bob_errors: int = 0
    bob_bits: int = 0

    def merge(self, other: "_Tally") -> "_Tally":
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if f.name == "max_disturbance":
                setattr(self, f.name, max(a, b))
            elif f.name == "outcome_counts":
                setattr(self, f.name, [x + y for x, y in zip(a, b)])
            else:
                setattr(self, f.name, a + b)
        return self


def run_trial(config: ScenarioConfig, index: int) -> _Tally:
    tr, rep = run_session(
        config.session_params(mix(config.base_seed, index)), make_adversary(config.adversary)
    )
    t = _Tally(trials=1)
    t.accepts = int(tr.verdict is Verdict.ACCEPT)
    t.key_matches = int(tr.key_match)
    t.max_disturbance = rep.disturbance
    t.bob_errors = rep.bob_bit_errors
    t.bob_bits = rep.n
    if rep.key_bit_accuracy is not None:
        t.eve_scored = 1
        t.eve_exact = int(rep.key_exact_match)
        t.eve_accuracy_sum = rep.key_bit_accuracy
        t.nonfixed_positions = rep.nonfixed_positions
        t.nonfixed_correct = rep.nonfixed_key_correct
        for o in rep.nonfixed_outcomes:
            t.outcome_counts[o] += 1
    return t


def _run_chunk(args) -> _Tally:
    config, indices = args
    total = _Tally()
    for i in indices:
        total.merge(run_trial(config, i))
    return total


@dataclass
class AggregateStats:
    trials: int
    accept_rate: float
    key_match_rate: float
    eve_key_exact_rate: float | None
    mean_eve_bit_accuracy: float | None
    detection_rate: float
    max_disturbance: float
    eve_nonfixed_bit_accuracy: float | None
    nonfixed_positions: int
    nonfixed_outcome_counts: list[int]
    bob_bit_error_rate: float
    wall_time: float = 0.0

    @classmethod
    def from_tally(cls, t: _Tally, wall_time: float) -> "AggregateStats":
        scored = t.eve_scored
        return cls(
            trials=t.trials,
            accept_rate=t.accepts / t.trials,
            key_match_rate=t.key_matches / t.trials,
            eve_key_exact_rate=t.eve_exact / scored if scored else None,
            mean_eve_bit_accuracy=t.eve_accuracy_sum / scored if scored else None,
            detection_rate=(t.trials - t.accepts) / t.trials,
            max_disturbance=t.max_disturbance,
            eve_nonfixed_bit_accuracy=(
                t.nonfixed_correct / t.nonfixed_positions if t.nonfixed_positions else None
            ),
            nonfixed_positions=t.nonfixed_positions,
            nonfixed_outcome_counts=list(t.outcome_counts),
            bob_bit_error_rate=t.bob_errors / t.bob_bits,
            wall_time=wall_time,
        )


def run_trials(config: ScenarioConfig, workers: int = 1) -> AggregateStats:
    start = time.perf_counter()
    if workers <= 1:
        total = _run_chunk((config, range(config.trials)))
    else:
        chunks = [(config, range(k, config.trials, workers)) for k in range(workers)]
        total = _Tally()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, chunks):
                total.merge(part)
    stats = AggregateStats.from_tally(total, time.perf_counter() - start)
    log.info("%s: %s", config.echo(), stats)
    return stats


# -- output ---------------------------------------------------------------

STAT_COLUMNS = [f.name for f in fields(AggregateStats) if f.name != "trials"]
CONFIG_COLUMNS = ["variant", "adversary", "countermeasure", "n", "u", "m", "trials", "base_seed"]
COLUMNS = ["schema_version", *CONFIG_COLUMNS, *STAT_COLUMNS]


def to_record(config: ScenarioConfig, stats: AggregateStats, with_time: bool = True) -> dict:
    rec = {"schema_version": SCHEMA_VERSION, **config.echo()}
    d = asdict(stats)
    for col in STAT_COLUMNS:
        rec[col] = d[col]
    if not with_time:
        rec.pop("wall_time")
    return rec


def stats_from_record(rec: dict) -> AggregateStats:
    names = {f.name for f in fields(AggregateStats)}
    return AggregateStats(**{k: v for k, v in rec.items() if k in names})


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, list):
        return ";".join(str(x) for x in v)
    return v


def render(records: list[dict], fmt: str) -> str:
    if fmt == "json":
        body = records[0] if len(records) == 1 else records
        return json.dumps(body, indent=2) + "\n"
    buf = io.StringIO()
    columns = [c for c in COLUMNS if c in records[0]]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_csv_cell(rec[c]) for c in columns])
    return buf.getvalue()


def emit(records, fmt: str = "json", path=None) -> str:
    """Serialize one record (or a list of them) and write it to ``path`` if given."""
    if isinstance(records, dict):
        records = [records]
    text = render(records, fmt)
    if path is not None:
        path = Path(path)
        try:
            path.write_text(text)
        except OSError as e:
            raise OSError(f"cannot write results to {path}: {e.strerror or e}") from e
    return text


# -- CLI ------------------------------------------------------------------

SCENARIOS = {
    "honest": dict(variant=Variant.QKDP1, adversary=AdversaryKind.NONE, countermeasure=False),
    "attack-i": dict(variant=Variant.QKDP1, adversary=AdversaryKind.DENSE_CODING, countermeasure=False),
    "attack-ii": dict(variant=Variant.QKDP2, adversary=AdversaryKind.DENSE_CODING, countermeasure=False),
    "countermeasure": dict(variant=Variant.QKDP2, adversary=AdversaryKind.DENSE_CODING, countermeasure=True),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qkd3p",
        description="Run seeded three-party QKD sessions under an eavesdropper and report statistics.",
    )
    p.add_argument("--variant", choices=[v.value for v in Variant], default="qkdp1")
    p.add_argument("--adversary", choices=[a.value for a in AdversaryKind], default="none")
    p.add_argument("--countermeasure", action="store_true", help="Alice shuffles Q1 before encoding")
    p.add_argument("--n", type=int, default=64, help="qubits per session")
    p.add_argument("--u", type=int, default=None, help="key bits (default n - m)")
    p.add_argument("--m", type=int, default=16, help="checksum bits")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="64-bit base seed")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None, help="output file (stdout if omitted)")
    p.add_argument("--scenario", choices=["all", *SCENARIOS], default=None,
                   help="canonical scenario; overrides --variant/--adversary/--countermeasure")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--no-timing", action="store_true", help="omit wall_time from the output")
    p.add_argument("--verbose", "-v", action="count", default=0)
    return p


def _summary(config: ScenarioConfig, s: AggregateStats) -> str:
    def pct(x):
        return "n/a" if x is None else f"{x:.4f}"

    return (
        f"{config.variant.value:5s} {config.adversary.value:16s} cm={int(config.countermeasure)} "
        f"trials={s.trials} accept={pct(s.accept_rate)} bob_key={pct(s.key_match_rate)} "
        f"eve_exact={pct(s.eve_key_exact_rate)} eve_bits={pct(s.mean_eve_bit_accuracy)} "
        f"detect={pct(s.detection_rate)} max_dist={s.max_disturbance:.3g} "
        f"({s.wall_time:.2f}s)"
    )


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    u = args.u if args.u is not None else args.n - args.m
    if args.scenario is None:
        variants = [dict(variant=args.variant, adversary=args.adversary, countermeasure=args.countermeasure)]
    elif args.scenario == "all":
        variants = list(SCENARIOS.values())
    else:
        variants = [SCENARIOS[args.scenario]]

    try:
        configs = [
            ScenarioConfig(
                **v, n=args.n, u=u, m=args.m, trials=args.trials, base_seed=args.seed,
                output_format=args.format, output_path=args.out,
            )
            for v in variants
        ]
    except ConfigError as e:
        print(f"qkd3p: config error: {e}", file=sys.stderr)
        return 2

    records = []
    for config in configs:
        stats = run_trials(config, workers=args.workers)
        records.append(to_record(config, stats, with_time=not args.no_timing))
        print(_summary(config, stats), file=sys.stderr if args.out is None else sys.stdout)

    try:
        text = emit(records, args.format, args.out)
    except OSError as e:
        print(f"qkd3p: {e}", file=sys.stderr)
        return 1
    if args.out is None:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(cli_main())

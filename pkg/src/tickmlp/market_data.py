"""Ticks, top-of-book snapshots, the tick CSV format and dataset cleaning.

Prices are held as integers in units of ``tick_size`` so that labels and
P&L never touch floating point.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

LEVELS = 5
DEFAULT_TICK_SIZE = Decimal("0.05")
NS_PER_MIN = 60 * 1_000_000_000

HEADER = (
    ["ts_ns", "sym", "last_px", "last_qty"]
    + [f"bid_px_{i}" for i in range(1, LEVELS + 1)]
    + [f"bid_qty_{i}" for i in range(1, LEVELS + 1)]
    + [f"ask_px_{i}" for i in range(1, LEVELS + 1)]
    + [f"ask_qty_{i}" for i in range(1, LEVELS + 1)]
)
N_FIELDS = len(HEADER)


class DataError(ValueError):
    """Base class for bad market data; the CLI maps it to exit code 2."""


class MalformedLine(DataError):
    pass


class CrossedBook(DataError):
    pass


class UnsortedLevels(DataError):
    pass


class EmptyAfterTrim(DataError):
    pass


@dataclass(frozen=True, slots=True)
class BookSnapshot:
    bid_px: tuple[int, ...]
    bid_qty: tuple[int, ...]
    ask_px: tuple[int, ...]
    ask_qty: tuple[int, ...]

    def __post_init__(self) -> None:
        for side in (self.bid_px, self.bid_qty, self.ask_px, self.ask_qty):
            if len(side) != LEVELS:
                raise MalformedLine(f"expected {LEVELS} levels, got {len(side)}")
        if self.bid_px[0] >= self.ask_px[0]:
            raise CrossedBook(f"bid {self.bid_px[0]} >= ask {self.ask_px[0]}")
        for i in range(LEVELS - 1):
            if self.bid_px[i] <= self.bid_px[i + 1]:
                raise UnsortedLevels(f"bid levels not strictly decreasing: {self.bid_px}")
            if self.ask_px[i] >= self.ask_px[i + 1]:
                raise UnsortedLevels(f"ask levels not strictly increasing: {self.ask_px}")
        if min(self.bid_qty) <= 0 or min(self.ask_qty) <= 0:
            raise MalformedLine("book quantities must be positive")

    @property
    def bid(self) -> int:
        return self.bid_px[0]

    @property
    def ask(self) -> int:
        return self.ask_px[0]


@dataclass(frozen=True, slots=True)
class Tick:
    ts_ns: int
    symbol: str
    last_px: int
    last_qty: int
    book: BookSnapshot

    def __post_init__(self) -> None:
        if self.last_qty < 0:
            raise MalformedLine(f"negative last_qty {self.last_qty}")


@dataclass(frozen=True)
class SessionSpec:
    """Session boundaries in ns since the open; the default models 09:15-15:30."""

    open_ns: int = 0
    close_ns: int = 375 * NS_PER_MIN
    trim_ns: int = 30 * NS_PER_MIN

    def __post_init__(self) -> None:
        if self.trim_ns < 0 or self.open_ns + 2 * self.trim_ns >= self.close_ns:
            raise ValueError("session must satisfy open + 2*trim < close")


def mid_price(book: BookSnapshot) -> Fraction:
    return Fraction(book.bid_px[0] + book.ask_px[0], 2)


def spread(book: BookSnapshot) -> int:
    return book.ask_px[0] - book.bid_px[0]


def _to_units(text: str, tick_size: Decimal) -> int:
    try:
        q = Decimal(text) / tick_size
    except (InvalidOperation, ValueError) as exc:
        raise MalformedLine(f"non-numeric price {text!r}") from exc
    if not q.is_finite() or q != q.to_integral_value():
        raise MalformedLine(f"price {text!r} is not a multiple of tick size {tick_size}")
    return int(q)


def _to_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise MalformedLine(f"non-integer field {text!r}") from exc


def format_price(units: int, tick_size: Decimal = DEFAULT_TICK_SIZE) -> str:
    return str((Decimal(units) * tick_size).quantize(tick_size))


def parse_fields(fields: Sequence[str], tick_size: Decimal = DEFAULT_TICK_SIZE) -> Tick:
    if len(fields) != N_FIELDS:
        raise MalformedLine(f"expected {N_FIELDS} fields, got {len(fields)}")
    px = [_to_units(f, tick_size) for f in fields[4:9]]
    bq = [_to_int(f) for f in fields[9:14]]
    ax = [_to_units(f, tick_size) for f in fields[14:19]]
    aq = [_to_int(f) for f in fields[19:24]]
    book = BookSnapshot(tuple(px), tuple(bq), tuple(ax), tuple(aq))
    return Tick(
        ts_ns=_to_int(fields[0]),
        symbol=fields[1],
        last_px=_to_units(fields[2], tick_size),
        last_qty=_to_int(fields[3]),
        book=book,
    )


def parse_tick_line(line: str, tick_size: Decimal = DEFAULT_TICK_SIZE) -> Tick:
    return parse_fields(line.rstrip("\r\n").split(","), tick_size)


def serialize_tick(tick: Tick, tick_size: Decimal = DEFAULT_TICK_SIZE) -> str:
    b = tick.book
    fp = lambda v: format_price(v, tick_size)  # noqa: E731
    parts = [str(tick.ts_ns), tick.symbol, fp(tick.last_px), str(tick.last_qty)]
    parts += [fp(v) for v in b.bid_px] + [str(v) for v in b.bid_qty]
    parts += [fp(v) for v in b.ask_px] + [str(v) for v in b.ask_qty]
    return ",".join(parts)


def iter_csv(path: str | Path, tick_size: Decimal = DEFAULT_TICK_SIZE) -> Iterator[Tick]:
    """Yield ticks from a per-symbol-per-day CSV, enforcing time order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise MalformedLine(f"{path}: missing or wrong header")
        last_ts = None
        for lineno, fields in enumerate(reader, start=2):
            try:
                tick = parse_fields(fields, tick_size)
            except DataError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
            if last_ts is not None and tick.ts_ns < last_ts:
                raise MalformedLine(f"{path}:{lineno}: timestamps go backwards")
            last_ts = tick.ts_ns
            yield tick


def read_csv(path: str | Path, tick_size: Decimal = DEFAULT_TICK_SIZE) -> list[Tick]:
    return list(iter_csv(path, tick_size))


def dumps_csv(ticks: Iterable[Tick], tick_size: Decimal = DEFAULT_TICK_SIZE) -> str:
    buf = io.StringIO()
    buf.write(",".join(HEADER) + "\n")
    for t in ticks:
        buf.write(serialize_tick(t, tick_size) + "\n")
    return buf.getvalue()


def write_csv(path: str | Path, ticks: Iterable[Tick], tick_size: Decimal = DEFAULT_TICK_SIZE) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_csv(ticks, tick_size))


def trim_session(stream: Iterable[Tick], spec: SessionSpec) -> list[Tick]:
    lo = spec.open_ns + spec.trim_ns
    hi = spec.close_ns - spec.trim_ns
    out = [t for t in stream if lo <= t.ts_ns <= hi]
    if not out:
        raise EmptyAfterTrim("no ticks survive session trimming")
    return out


def filter_securities(day_counts: dict[str, int], lo: int = 50_000, hi: int = 100_000) -> list[str]:
    """Symbols whose daily tick count lies in ``[lo, hi]``, sorted."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    return sorted(s for s, n in day_counts.items() if lo <= n <= hi)

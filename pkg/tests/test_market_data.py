from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conftest import books, make_book, ticks
from tickmlp.market_data import (
    HEADER, NS_PER_MIN, BookSnapshot, CrossedBook, EmptyAfterTrim, MalformedLine, SessionSpec, Tick,
    UnsortedLevels, dumps_csv, filter_securities, mid_price, parse_tick_line, read_csv, serialize_tick,
    spread, trim_session, write_csv,
)

LINE = (
    "1000,ABC,5.05,7,"
    "5.00,4.95,4.90,4.85,4.80,10,11,12,13,14,"
    "5.10,5.15,5.20,5.25,5.30,20,21,22,23,24"
)


def test_parse_well_formed_line():
    t = parse_tick_line(LINE)
    assert t.book.bid_px[0] == 100 and t.book.ask_px[0] == 102
    assert t.last_px == 101 and t.last_qty == 7 and t.symbol == "ABC"
    assert t.book.bid_qty == (10, 11, 12, 13, 14)


def test_parse_crossed_book():
    line = LINE.replace("5.00,4.95", "5.10,4.95", 1).replace("5.10,5.15", "5.00,5.15", 1)
    with pytest.raises(CrossedBook):
        parse_tick_line(line)


def test_parse_wrong_field_count():
    with pytest.raises(MalformedLine):
        parse_tick_line(LINE.rsplit(",", 1)[0])


@pytest.mark.parametrize("bad", ["abc", "5.01", "nan"])
def test_parse_bad_price(bad):
    with pytest.raises(MalformedLine):
        parse_tick_line(LINE.replace("5.05", bad, 1))


def test_parse_unsorted_levels():
    with pytest.raises(UnsortedLevels):
        parse_tick_line(LINE.replace("4.95,4.90", "4.90,4.95"))


def test_round_trip_canonical_line():
    assert serialize_tick(parse_tick_line(LINE)) == LINE


@given(ticks())
def test_round_trip_property(tick):
    line = serialize_tick(tick)
    assert parse_tick_line(line) == tick
    assert serialize_tick(parse_tick_line(line)) == line


@given(st.lists(st.one_of(st.integers(-5, 200).map(str), st.sampled_from(["", "x", "1.025", "-0.05"])), min_size=24, max_size=24))
def test_parse_fuzz_never_builds_invalid_book(fields):
    fields[1] = "S"
    try:
        t = parse_tick_line(",".join(fields))
    except MalformedLine:
        return
    except (CrossedBook, UnsortedLevels):
        return
    b = t.book
    assert b.bid_px[0] < b.ask_px[0]
    assert all(x > y for x, y in zip(b.bid_px, b.bid_px[1:]))
    assert all(x < y for x, y in zip(b.ask_px, b.ask_px[1:]))
    assert min(b.bid_qty + b.ask_qty) > 0


def test_tick_size_conversion():
    t = parse_tick_line(LINE.replace("5.05", "5.04", 1), tick_size=Decimal("0.01"))
    assert t.last_px == 504 and t.book.bid_px[0] == 500


def test_mid_and_spread():
    assert mid_price(make_book(100, 102)) == 101
    assert mid_price(make_book(100, 101)) == Fraction(201, 2)
    assert spread(make_book(100, 102)) == 2
    assert spread(make_book(100, 101)) == 1


@given(st.integers(1, 50))
def test_mid_symmetry(s):
    assert mid_price(make_book(100, 100 + s)) == 100 + Fraction(s, 2)


@given(books())
def test_spread_positive(book):
    assert spread(book) >= 1


def _tick_at(minutes):
    return Tick(int(minutes * NS_PER_MIN), "A", 100, 1, make_book(100, 101))


def test_trim_session_boundaries():
    # session opens 09:15; ticks at 09:20, 10:00, 15:10
    stream = [_tick_at(5), _tick_at(45), _tick_at(355)]
    assert trim_session(stream, SessionSpec()) == [stream[1]]


def test_trim_session_inclusive_edges():
    stream = [_tick_at(30), _tick_at(345)]
    assert trim_session(stream, SessionSpec()) == stream


def test_trim_zero_is_identity():
    stream = [_tick_at(m) for m in (0, 1, 200, 375)]
    assert trim_session(stream, SessionSpec(trim_ns=0)) == stream


def test_trim_everything_early():
    with pytest.raises(EmptyAfterTrim):
        trim_session([_tick_at(m) for m in (0, 10, 29)], SessionSpec())


@given(st.lists(st.integers(0, 375), max_size=30).map(sorted))
def test_trim_is_contiguous_subsequence(mins):
    stream = [_tick_at(m) for m in mins]
    try:
        out = trim_session(stream, SessionSpec())
    except EmptyAfterTrim:
        return
    i = stream.index(out[0])
    assert stream[i:i + len(out)] == out


def test_session_spec_invariant():
    with pytest.raises(ValueError):
        SessionSpec(open_ns=0, close_ns=60 * NS_PER_MIN, trim_ns=30 * NS_PER_MIN)


def test_filter_securities():
    assert filter_securities({"A": 70_000, "B": 30_000, "C": 150_000}) == ["A"]
    assert filter_securities({"B": 100_000, "A": 50_000}) == ["A", "B"]
    assert filter_securities({}) == []


def test_csv_file_round_trip(tmp_path, small_day):
    p = tmp_path / "day.csv"
    write_csv(p, small_day)
    assert p.read_text().splitlines()[0] == ",".join(HEADER)
    assert read_csv(p) == small_day
    assert dumps_csv(read_csv(p)) == p.read_text()


def test_csv_rejects_time_reversal(tmp_path, small_day):
    p = tmp_path / "bad.csv"
    write_csv(p, [small_day[1], small_day[0]])
    with pytest.raises(MalformedLine):
        read_csv(p)


def test_book_rejects_zero_quantity():
    with pytest.raises(MalformedLine):
        BookSnapshot((100, 99, 98, 97, 96), (0, 1, 1, 1, 1), (101, 102, 103, 104, 105), (1,) * 5)

from collections import deque

import pytest
from hypothesis import given, strategies as st

from conftest import books, make_book
from tickmlp.labeler import Label, PendingSample, label, label_day, resolve_pending
from tickmlp.market_data import BookSnapshot


def test_label_examples():
    assert label(make_book(100, 102), make_book(103, 105)) is Label.UP
    # mid rises 1.5 ticks but selling at the new bid does not cover the entry ask
    assert label(make_book(100, 102), make_book(101, 103)) is Label.NO_MOVE
    assert label(make_book(100, 102), make_book(97, 99)) is Label.DOWN


def test_exactly_covering_spread_is_no_move():
    assert label(make_book(100, 102), make_book(102, 104)) is Label.NO_MOVE
    assert label(make_book(100, 102), make_book(98, 100)) is Label.NO_MOVE


@given(books(), books())
def test_up_and_down_are_exclusive(a, b):
    up = b.bid_px[0] > a.ask_px[0]
    down = b.ask_px[0] < a.bid_px[0]
    assert not (up and down)
    assert label(a, b) is (Label.UP if up else Label.DOWN if down else Label.NO_MOVE)


@given(books(), books(), st.data())
def test_label_ignores_quantities_and_deep_levels(a, b, data):
    def perturb(book):
        q = data.draw(st.lists(st.integers(1, 99), min_size=5, max_size=5).map(tuple))
        deep = tuple(book.bid_px[0] - 10 * (i + 1) for i in range(4))
        return BookSnapshot((book.bid_px[0],) + deep, q, book.ask_px, q)
    assert label(perturb(a), perturb(b)) == label(a, b)


def test_resolve_pending_pops_matured():
    q = deque([PendingSample(0, None, 100, 102, 5), PendingSample(1, None, 100, 102, 6)])
    out = resolve_pending(q, 5, make_book(103, 104))
    assert out == [(None, Label.UP)] and len(q) == 1
    assert resolve_pending(deque(), 7, make_book(1, 2)) == []


def test_pending_requires_future_resolution():
    with pytest.raises(ValueError):
        PendingSample(5, None, 1, 2, 5)


def test_label_day_count(small_day):
    for H in (1, 100, len(small_day) - 1, len(small_day), len(small_day) + 5):
        assert len(label_day(small_day, H)) == max(0, len(small_day) - H)


def test_streaming_equals_offline(small_day):
    H = 37
    q = deque()
    streamed = []
    for i, t in enumerate(small_day):
        streamed += [lab for _, lab in resolve_pending(q, i, t.book)]
        q.append(PendingSample(i, None, t.book.bid_px[0], t.book.ask_px[0], i + H))
    assert streamed == label_day(small_day, H)

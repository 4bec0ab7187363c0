import pytest
from hypothesis import settings, strategies as st

from tickmlp.market_data import BookSnapshot, Tick

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

qtys = st.lists(st.integers(1, 10_000), min_size=5, max_size=5).map(tuple)


@st.composite
def books(draw, lo=1_000, hi=3_000):
    bid = draw(st.integers(lo, hi))
    spr = draw(st.integers(1, 10))
    bgaps = draw(st.lists(st.integers(1, 5), min_size=4, max_size=4))
    agaps = draw(st.lists(st.integers(1, 5), min_size=4, max_size=4))
    bid_px, ask_px = [bid], [bid + spr]
    for g in bgaps:
        bid_px.append(bid_px[-1] - g)
    for g in agaps:
        ask_px.append(ask_px[-1] + g)
    return BookSnapshot(tuple(bid_px), draw(qtys), tuple(ask_px), draw(qtys))


@st.composite
def ticks(draw):
    book = draw(books())
    return Tick(
        ts_ns=draw(st.integers(0, 10**13)),
        symbol=draw(st.sampled_from(["AAA", "XYZ", "SYN"])),
        last_px=draw(st.integers(900, 3200)),
        last_qty=draw(st.integers(0, 500)),
        book=book,
    )


def make_book(bid, ask, bq=10, aq=10):
    if not isinstance(bq, tuple):
        bq = (bq,) * 5
    if not isinstance(aq, tuple):
        aq = (aq,) * 5
    return BookSnapshot(tuple(bid - i for i in range(5)), bq, tuple(ask + i for i in range(5)), aq)


@pytest.fixture(scope="session")
def small_day():
    from tickmlp.synthgen import GenParams, generate_day

    return generate_day(GenParams(n_ticks=3_000, seed=11))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

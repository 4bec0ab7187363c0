"""Three-class spread-crossing ground truth.

A move counts only if entering at the touch now and exiting at the opposite
touch ``H`` ticks later is strictly profitable.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .market_data import BookSnapshot, Tick


class Label(IntEnum):
    UP = 0
    NO_MOVE = 1
    DOWN = 2


def label_prices(origin_bid: int, origin_ask: int, horizon_bid: int, horizon_ask: int) -> Label:
    if horizon_bid > origin_ask:
        return Label.UP
    if horizon_ask < origin_bid:
        return Label.DOWN
    return Label.NO_MOVE


def label(origin: BookSnapshot, horizon: BookSnapshot) -> Label:
    return label_prices(origin.bid_px[0], origin.ask_px[0], horizon.bid_px[0], horizon.ask_px[0])


@dataclass(slots=True)
class PendingSample:
    origin_tick_index: int
    features: np.ndarray | None
    origin_bid: int
    origin_ask: int
    resolve_at: int

    def __post_init__(self) -> None:
        if self.resolve_at <= self.origin_tick_index:
            raise ValueError("resolve_at must be after the origin tick")


def resolve_pending(
    queue: deque[PendingSample], current_index: int, current_book: BookSnapshot
) -> list[tuple[np.ndarray | None, Label]]:
    """Pop every sample maturing at ``current_index`` and label it.

    Mutates ``queue`` in place; resolved pairs come back in origin order.
    """
    out = []
    bid, ask = current_book.bid_px[0], current_book.ask_px[0]
    while queue and queue[0].resolve_at == current_index:
        s = queue.popleft()
        out.append((s.features, label_prices(s.origin_bid, s.origin_ask, bid, ask)))
    return out


def label_day(ticks: Sequence[Tick], horizon: int) -> list[Label]:
    """Offline labels for ticks ``0 .. N-H-1`` (each against tick ``t+H``)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return [label(ticks[t].book, ticks[t + horizon].book) for t in range(len(ticks) - horizon)]

"""Unit-size target-position trading with exact integer accounting.

Buys lift the ask, sells hit the bid, fills are complete and instant. Cash
and P&L are in price units (multiples of tick size).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .ensemble import Decision
from .market_data import BookSnapshot


@dataclass(slots=True)
class Trade:
    tick_index: int
    side: str
    price: int
    qty: int

    @property
    def cash_flow(self) -> int:
        return -self.price * self.qty if self.side == "BUY" else self.price * self.qty


@dataclass
class Portfolio:
    position: int = 0
    cash: int = 0
    realized: int = 0
    trades: list[Trade] = field(default_factory=list)

    def _trade(self, idx: int, side: str, price: int, qty: int) -> None:
        t = Trade(idx, side, price, qty)
        self.trades.append(t)
        self.cash += t.cash_flow
        self.position += qty if side == "BUY" else -qty

    def on_decision(self, d: Decision, book: BookSnapshot, idx: int) -> None:
        if d is Decision.UP:
            target = 1
        elif d is Decision.DOWN:
            target = -1
        else:
            return
        diff = target - self.position
        if diff > 0:
            self._trade(idx, "BUY", book.ask_px[0], diff)
        elif diff < 0:
            self._trade(idx, "SELL", book.bid_px[0], -diff)

    def mark_to_market(self, book: BookSnapshot) -> int:
        """Liquidation value: longs marked at the bid, shorts at the ask."""
        if self.position > 0:
            return self.cash + self.position * book.bid_px[0]
        if self.position < 0:
            return self.cash + self.position * book.ask_px[0]
        return self.cash

    def flatten(self, book: BookSnapshot, idx: int) -> None:
        if self.position > 0:
            self._trade(idx, "SELL", book.bid_px[0], self.position)
        elif self.position < 0:
            self._trade(idx, "BUY", book.ask_px[0], -self.position)
        self.realized = self.cash


def write_trades(path, trades: list[Trade]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick_index", "side", "price", "qty"])
        for t in trades:
            w.writerow([t.tick_index, t.side, t.price, t.qty])

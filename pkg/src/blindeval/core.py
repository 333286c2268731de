"""Blind comparison, selection and ordering, plus unsigned word arithmetic.

Nothing here ever decrypts: every branch is turned into gates evaluated on
both sides, and the encrypted condition picks the result through a MUX.
"""
from __future__ import annotations

import functools
import threading
from collections.abc import Sequence
from typing import NamedTuple

from blindeval.backend import BitWord, CipherBit, Evaluator

ASCENDING = "ascending"
DESCENDING = "descending"

_nesting = threading.local()


def counted(kind: str):
    """Count a call as one blind op unless it runs inside another counted op."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(ev, *args, **kwargs):
            depth = getattr(_nesting, "depth", 0)
            _nesting.depth = depth + 1
            try:
                out = fn(ev, *args, **kwargs)
            finally:
                _nesting.depth = depth
            if depth == 0:
                ev.stats.record_blind(kind)
            return out

        return wrapper

    return deco


class CompareResult(NamedTuple):
    gt: CipherBit  # 1 iff a > b
    lte: CipherBit  # 1 iff a <= b


class OrderedPair(NamedTuple):
    low: BitWord
    high: BitWord


def _check_widths(a, b, what="word"):
    if len(a) != len(b):
        raise ValueError(f"{what} width mismatch: {len(a)} != {len(b)}")
    if len(a) == 0:
        raise ValueError(f"{what} width must be at least 1")


def _check_direction(direction):
    if direction not in (ASCENDING, DESCENDING):
        raise ValueError(f"direction must be {ASCENDING!r} or {DESCENDING!r}, got {direction!r}")


@counted("comparisons")
def blind_compare(ev: Evaluator, a: BitWord, b: BitWord) -> CompareResult:
    """Encrypted ``a > b`` / ``a <= b`` for unsigned words of equal width.

    MSB-to-LSB ladder: ``gt`` picks up ``a_i AND NOT b_i`` while every higher
    bit is still equal.
    """
    _check_widths(a, b)
    gt = eq = None
    top = len(a) - 1
    for i in range(top, -1, -1):
        a_wins = ev.and_(a[i], ev.not_(b[i]))
        if gt is None:
            gt = a_wins
        else:
            gt = ev.or_(gt, ev.and_(eq, a_wins))
        if i > 0:
            same = ev.not_(ev.xor(a[i], b[i]))
            eq = same if eq is None else ev.and_(eq, same)
    return CompareResult(gt, ev.not_(gt))


@counted("selections")
def blind_select_bit(ev: Evaluator, cond: CipherBit, then_v: CipherBit, else_v: CipherBit) -> CipherBit:
    return ev.mux(cond, then_v, else_v)


@counted("selections")
def blind_select_word(ev: Evaluator, cond: CipherBit, then_v: BitWord, else_v: BitWord) -> BitWord:
    _check_widths(then_v, else_v)
    return BitWord(ev.mux(cond, t, e) for t, e in zip(then_v, else_v))


def _swap_bit(ev, a, b, direction):
    # swap only on strict disorder so equal keys keep their order
    if direction == ASCENDING:
        return blind_compare(ev, a, b).gt
    return blind_compare(ev, b, a).gt


@counted("orderings")
def blind_order(ev: Evaluator, a: BitWord, b: BitWord, direction: str = ASCENDING) -> OrderedPair:
    """Blind pair sort. Both outputs are computed from the untouched inputs.

    The result is (first, second) in the requested direction, so for
    ``descending`` the ``low`` slot holds the larger value.
    """
    _check_widths(a, b)
    _check_direction(direction)
    swap = _swap_bit(ev, a, b, direction)
    first = BitWord(ev.mux(swap, y, x) for x, y in zip(a, b))
    second = BitWord(ev.mux(swap, x, y) for x, y in zip(a, b))
    return OrderedPair(first, second)


@counted("orderings")
def blind_order_keyed(
    ev: Evaluator,
    a_key: BitWord,
    a_payload: BitWord,
    b_key: BitWord,
    b_payload: BitWord,
    direction: str = ASCENDING,
) -> tuple[tuple[BitWord, BitWord], tuple[BitWord, BitWord]]:
    """Order two (key, payload) pairs by key; payloads follow their keys."""
    _check_widths(a_key, b_key, "key")
    _check_widths(a_payload, b_payload, "payload")
    _check_direction(direction)
    swap = _swap_bit(ev, a_key, b_key, direction)

    def pick(x, y):
        return BitWord(ev.mux(swap, q, p) for p, q in zip(x, y)), BitWord(
            ev.mux(swap, p, q) for p, q in zip(x, y)
        )

    k0, k1 = pick(a_key, b_key)
    p0, p1 = pick(a_payload, b_payload)
    return (k0, p0), (k1, p1)


# --------------------------------------------------------------------------
# arithmetic (all modulo 2**width)


def _full_add(ev, a_bits, b_bits, carry):
    """Ripple-carry add of equal-length bit lists; returns (sum bits, carry out)."""
    out = []
    for x, y in zip(a_bits, b_bits):
        p = ev.xor(x, y)
        if carry is None:
            out.append(p)
            carry = ev.and_(x, y)
        else:
            out.append(ev.xor(p, carry))
            carry = ev.mux(p, carry, x)
    return out, carry


def blind_add(ev: Evaluator, a: BitWord, b: BitWord) -> BitWord:
    _check_widths(a, b)
    out = []
    carry = None
    last = len(a) - 1
    for i, (x, y) in enumerate(zip(a, b)):
        p = ev.xor(x, y)
        out.append(p if carry is None else ev.xor(p, carry))
        if i < last:
            carry = ev.and_(x, y) if carry is None else ev.mux(p, carry, x)
    return BitWord(out)


def blind_sub(ev: Evaluator, a: BitWord, b: BitWord) -> BitWord:
    """``a - b`` modulo ``2**width`` (a + NOT b + 1)."""
    _check_widths(a, b)
    out = []
    carry = ev.constant(1)
    last = len(a) - 1
    for i, (x, y) in enumerate(zip(a, b)):
        ny = ev.not_(y)
        p = ev.xor(x, ny)
        out.append(ev.xor(p, carry))
        if i < last:
            carry = ev.mux(p, carry, x)
    return BitWord(out)


def blind_inc_if(ev: Evaluator, a: BitWord, c: CipherBit) -> BitWord:
    """``a + c`` with the condition bit as carry-in."""
    out = []
    carry = c
    last = len(a) - 1
    for i, x in enumerate(a):
        out.append(ev.xor(x, carry))
        if i < last:
            carry = ev.and_(x, carry)
    return BitWord(out)


def blind_dec(ev: Evaluator, a: BitWord) -> BitWord:
    """``a - 1`` modulo ``2**width``."""
    out = [ev.not_(a[0])]
    borrow = out[0]
    for i in range(1, len(a)):
        out.append(ev.xor(a[i], borrow))
        if i < len(a) - 1:
            borrow = ev.and_(ev.not_(a[i]), borrow)
    return BitWord(out)


def _add_growing(ev, a: list, b: list) -> list:
    """Sum of two unsigned bit lists (len(a) >= len(b)), keeping the carry."""
    low, carry = _full_add(ev, a[: len(b)], b, None)
    out = list(low)
    for x in a[len(b) :]:
        out.append(ev.xor(x, carry))
        carry = ev.and_(x, carry)
    out.append(carry)
    return out


def _count(ev, bits: Sequence[CipherBit]) -> list:
    if len(bits) == 1:
        return [bits[0]]
    half = (len(bits) + 1) // 2
    left, right = _count(ev, bits[:half]), _count(ev, bits[half:])
    total = _add_growing(ev, left, right)
    # the sum of k bits never needs more than k.bit_length() bits
    return total[: len(bits).bit_length()]


def blind_popcount(ev: Evaluator, bits: Sequence[CipherBit], width: int) -> BitWord:
    """Number of 1-bits as a ``width``-bit word (adder tree)."""
    need = len(bits).bit_length()
    if width < max(need, 1):
        raise ValueError(f"width {width} cannot hold a count of up to {len(bits)}")
    counted_bits = _count(ev, list(bits)) if bits else []
    pad = [ev.constant(0) for _ in range(width - len(counted_bits))]
    return BitWord(counted_bits + pad)


def blind_step_if_greater(ev: Evaluator, a: BitWord, b: BitWord, var: BitWord) -> BitWord:
    """``var + 1`` if ``a > b`` else ``var - 1``, without learning which."""
    gt = blind_compare(ev, a, b).gt
    return blind_select_word(ev, gt, blind_inc_if(ev, var, ev.constant(1)), blind_dec(ev, var))

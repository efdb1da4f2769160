"""
整数論ヘルパー

Möbius関数・Euler関数・Ramanujan和・Bézout係数など、
複数モジュールから使われる整数演算をまとめる。
"""

from __future__ import annotations

import cmath
import functools
import math
from typing import Dict, Iterator, List, Tuple

import numpy as np
from sympy import divisors as _sympy_divisors
from sympy import factorint, primerange, totient

from common.exceptions import ArithmeticPreconditionError

TWO_PI_I = 2j * math.pi


@functools.lru_cache(maxsize=65536)
def factor(q: int) -> Tuple[Tuple[int, int], ...]:
    """素因数分解（素数昇順の (p, e) タプル）"""
    if q < 1:
        raise ArithmeticPreconditionError(f"positive integer expected, got {q}")
    return tuple(sorted(factorint(q).items()))


def mobius(q: int) -> int:
    exps = factor(q)
    if any(e > 1 for _, e in exps):
        return 0
    return -1 if len(exps) % 2 else 1


def euler_phi(q: int) -> int:
    return int(totient(q))


def divisors(q: int) -> List[int]:
    return [int(d) for d in _sympy_divisors(q)]


def is_squarefree(q: int) -> bool:
    return all(e == 1 for _, e in factor(q))


def primes_up_to(bound: int) -> List[int]:
    return [int(p) for p in primerange(2, bound + 1)]


def ramanujan_sum(q: int, m: int) -> int:
    """
    Ramanujan和 c_q(m) = Σ*_{a mod q} e_q(am)

    c_q(m) = μ(q/g)·φ(q)/φ(q/g), g = gcd(q, m) を用いて厳密に計算する。
    """
    g = math.gcd(q, m)
    r = q // g
    return mobius(r) * euler_phi(q) // euler_phi(r)


@functools.lru_cache(maxsize=4096)
def _ramanujan_table_cached(q: int) -> np.ndarray:
    table = np.zeros(q, dtype=np.int64)
    for d in divisors(q):
        mu = mobius(q // d)
        if mu:
            table[::d] += d * mu
    table.setflags(write=False)
    return table


def ramanujan_table(q: int) -> np.ndarray:
    """
    c_q(m), m = 0..q-1 の整数配列

    c_q(m) = Σ_{d | (q, m)} d·μ(q/d) を約数ごとにまとめて加算する。
    """
    return _ramanujan_table_cached(q)


def ramanujan_vector(q: int, values: np.ndarray) -> np.ndarray:
    """任意の整数配列 values に対する c_q(values)"""
    return ramanujan_table(q)[np.mod(np.asarray(values, dtype=np.int64), q)]


def e(x: float) -> complex:
    """e(x) = exp(2πix)"""
    return cmath.exp(TWO_PI_I * x)


def e_q_table(q: int) -> np.ndarray:
    """e_q(k), k = 0..q-1 の複素数配列（位相は q で簡約済み）"""
    return np.exp(TWO_PI_I * np.arange(q) / q)


def reduced_residues(q: int) -> Iterator[int]:
    """1 ≤ a ≤ q, gcd(a, q) = 1（q = 1 のときは a = 1 のみ）"""
    for a in range(1, q + 1):
        if math.gcd(a, q) == 1:
            yield a


def bezout(r: int, s: int) -> Tuple[int, int]:
    """
    r·r̄ + s·s̄ = 1 を満たす (r̄, s̄)

    Raises:
        ArithmeticPreconditionError: gcd(r, s) ≠ 1
    """
    if math.gcd(r, s) != 1:
        raise ArithmeticPreconditionError(f"moduli not coprime: gcd({r}, {s}) = {math.gcd(r, s)}")
    if r == 1:
        return 1, 0
    if s == 1:
        return 0, 1
    old_r, cur_r = r, s
    old_x, cur_x = 1, 0
    while cur_r:
        quotient = old_r // cur_r
        old_r, cur_r = cur_r, old_r - quotient * cur_r
        old_x, cur_x = cur_x, old_x - quotient * cur_x
    r_bar = old_x
    s_bar = (1 - r * r_bar) // s
    return r_bar, s_bar


def prime_power_split(q: int) -> Dict[int, int]:
    return dict(factor(q))

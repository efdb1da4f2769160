#!/usr/bin/env python3
"""
整数論ヘルパーのテスト
"""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circle_method import arith
from common.exceptions import ArithmeticPreconditionError


def brute_ramanujan(q: int, m: int) -> complex:
    return sum(cmath.exp(2j * math.pi * a * m / q) for a in range(1, q + 1) if math.gcd(a, q) == 1)


class TestMultiplicativeFunctions:
    @pytest.mark.parametrize("q, mu", [(1, 1), (2, -1), (6, 1), (12, 0), (30, -1)])
    def test_mobius(self, q, mu):
        assert arith.mobius(q) == mu

    def test_euler_phi_and_divisors(self):
        assert arith.euler_phi(36) == 12
        assert arith.divisors(12) == [1, 2, 3, 4, 6, 12]

    def test_factor(self):
        assert arith.factor(360) == ((2, 3), (3, 2), (5, 1))
        assert arith.factor(1) == ()
        with pytest.raises(ArithmeticPreconditionError):
            arith.factor(0)

    def test_squarefree_and_primes(self):
        assert arith.is_squarefree(30)
        assert not arith.is_squarefree(18)
        assert arith.primes_up_to(20) == [2, 3, 5, 7, 11, 13, 17, 19]


class TestRamanujanSums:
    @given(st.integers(1, 60), st.integers(-200, 200))
    def test_closed_form_matches_definition(self, q, m):
        assert arith.ramanujan_sum(q, m) == pytest.approx(brute_ramanujan(q, m).real, abs=1e-8)

    @pytest.mark.parametrize("q", [1, 2, 9, 12, 35])
    def test_table_matches_closed_form(self, q):
        table = arith.ramanujan_table(q)
        assert table.tolist() == [arith.ramanujan_sum(q, m) for m in range(q)]

    def test_vector_reduces_negative_values(self):
        values = arith.ramanujan_vector(6, np.array([-1, 6, 7]))
        assert values.tolist() == [1, 2, 1]

    def test_table_is_read_only(self):
        with pytest.raises(ValueError):
            arith.ramanujan_table(5)[0] = 0


class TestResidues:
    def test_reduced_residues(self):
        assert list(arith.reduced_residues(1)) == [1]
        assert list(arith.reduced_residues(10)) == [1, 3, 7, 9]

    @given(st.integers(1, 500), st.integers(1, 500))
    def test_bezout(self, r, s):
        if math.gcd(r, s) != 1:
            with pytest.raises(ArithmeticPreconditionError):
                arith.bezout(r, s)
            return
        r_bar, s_bar = arith.bezout(r, s)
        assert r * r_bar + s * s_bar == 1

    def test_e_q_table(self):
        table = arith.e_q_table(4)
        assert np.allclose(table, [1, 1j, -1, -1j])

"""
整数係数多変数多項式

疎な辞書表現（指数タプル → 任意精度整数係数）。値は構築後不変で、
差分 F(x+h) − F(x)、最高次斉次部分、スケール付きノルム ∥f∥_P、
勾配・Hessian、一変数終結式、content を提供する。
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from types import MappingProxyType
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from common.exceptions import PolynomialError
from common.logger import get_logger

Exponent = Tuple[int, ...]
Number = Union[int, Fraction]

logger = get_logger("Poly")


def _grlex_key(exponent: Exponent) -> Tuple[int, Exponent]:
    return (-sum(exponent), tuple(-k for k in exponent))


class IntPolynomial:
    """
    整数係数多項式

    Args:
        n_vars: 変数の数（1以上）
        terms: 指数タプル → 係数。係数0の項は捨てられる
    """

    __slots__ = ("n_vars", "_terms", "degree", "_hash")

    def __init__(self, n_vars: int, terms: Optional[Mapping[Exponent, int]] = None):
        if not isinstance(n_vars, int) or n_vars < 1:
            raise PolynomialError(f"n_vars must be a positive integer, got {n_vars!r}")
        cleaned: Dict[Exponent, int] = {}
        for exponent, coeff in (terms or {}).items():
            exponent = tuple(int(k) for k in exponent)
            if len(exponent) != n_vars:
                raise PolynomialError(f"exponent length {len(exponent)} does not match n_vars={n_vars}")
            if any(k < 0 for k in exponent):
                raise PolynomialError(f"negative exponent in {exponent}")
            if not isinstance(coeff, (int, np.integer)) or isinstance(coeff, bool):
                raise PolynomialError(f"integer coefficient expected, got {coeff!r}")
            coeff = int(coeff)
            if coeff:
                cleaned[exponent] = cleaned.get(exponent, 0) + coeff
                if cleaned[exponent] == 0:
                    del cleaned[exponent]
        self.n_vars = n_vars
        self._terms = dict(sorted(cleaned.items(), key=lambda kv: _grlex_key(kv[0])))
        self.degree = max((sum(e) for e in self._terms), default=-1)
        self._hash = None

    # ---- 構築ヘルパー ----

    @classmethod
    def zero(cls, n_vars: int) -> "IntPolynomial":
        return cls(n_vars, {})

    @classmethod
    def constant(cls, n_vars: int, c: int) -> "IntPolynomial":
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def variable(cls, n_vars: int, index: int) -> "IntPolynomial":
        exponent = [0] * n_vars
        exponent[index] = 1
        return cls(n_vars, {tuple(exponent): 1})

    @classmethod
    def diagonal(cls, coeffs: Sequence[int], degree: int = 4) -> "IntPolynomial":
        """Σ c_i x_i^degree"""
        n = len(coeffs)
        terms = {}
        for i, c in enumerate(coeffs):
            exponent = [0] * n
            exponent[i] = degree
            terms[tuple(exponent)] = c
        return cls(n, terms)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "IntPolynomial":
        """
        {"n": int, "terms": [{"e": [...], "c": "decimal-string"}]} 形式から構築

        Raises:
            PolynomialError: 形式不正
        """
        if not isinstance(data, Mapping) or "n" not in data or "terms" not in data:
            raise PolynomialError("polynomial JSON must have keys 'n' and 'terms'")
        n = data["n"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise PolynomialError(f"'n' must be an integer, got {n!r}")
        terms: Dict[Exponent, int] = {}
        if not isinstance(data["terms"], list):
            raise PolynomialError("'terms' must be a list")
        for term in data["terms"]:
            try:
                exponent = tuple(term["e"])
                raw = term["c"]
            except (KeyError, TypeError) as e:
                raise PolynomialError(f"malformed term {term!r}") from e
            if isinstance(raw, bool) or not isinstance(raw, (int, str)):
                raise PolynomialError(f"coefficient must be a decimal string or integer: {raw!r}")
            try:
                coeff = int(raw)
            except ValueError as e:
                raise PolynomialError(f"coefficient is not a decimal integer: {raw!r}") from e
            if not all(isinstance(k, int) and not isinstance(k, bool) for k in exponent):
                raise PolynomialError(f"exponent entries must be integers: {exponent!r}")
            terms[exponent] = terms.get(exponent, 0) + coeff
        return cls(n, terms)

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n_vars,
            "terms": [{"e": list(e), "c": str(c)} for e, c in self._terms.items()],
        }

    # ---- 基本プロパティ ----

    @property
    def terms(self) -> Mapping[Exponent, int]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def max_coefficient(self) -> int:
        """∥F∥：係数の絶対値の最大"""
        return max((abs(c) for c in self._terms.values()), default=0)

    def diagonal_coefficients(self, degree: Optional[int] = None) -> Optional[List[int]]:
        """Σ c_i x_i^d の形なら [c_1..c_n]、そうでなければ None"""
        degree = self.degree if degree is None else degree
        if degree <= 0:
            return None
        coeffs = [0] * self.n_vars
        for exponent, c in self._terms.items():
            nonzero = [i for i, k in enumerate(exponent) if k]
            if len(nonzero) != 1 or exponent[nonzero[0]] != degree:
                return None
            coeffs[nonzero[0]] = c
        return coeffs

    def variables_used(self) -> List[int]:
        return sorted({i for e in self._terms for i, k in enumerate(e) if k})

    # ---- 算術 ----

    def _check_same_space(self, other: "IntPolynomial"):
        if not isinstance(other, IntPolynomial):
            raise PolynomialError(f"IntPolynomial expected, got {type(other).__name__}")
        if other.n_vars != self.n_vars:
            raise PolynomialError(f"dimension mismatch: {self.n_vars} vs {other.n_vars}")

    def __add__(self, other: "IntPolynomial") -> "IntPolynomial":
        self._check_same_space(other)
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0) + c
        return IntPolynomial(self.n_vars, terms)

    def __neg__(self) -> "IntPolynomial":
        return IntPolynomial(self.n_vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other: "IntPolynomial") -> "IntPolynomial":
        return self + (-other)

    def __mul__(self, other: Union["IntPolynomial", int]) -> "IntPolynomial":
        if isinstance(other, int):
            return IntPolynomial(self.n_vars, {e: c * other for e, c in self._terms.items()})
        self._check_same_space(other)
        terms: Dict[Exponent, int] = {}
        for (e1, c1), (e2, c2) in itertools.product(self._terms.items(), other._terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            terms[e] = terms.get(e, 0) + c1 * c2
        return IntPolynomial(self.n_vars, terms)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IntPolynomial) and self.n_vars == other.n_vars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n_vars, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        if not self._terms:
            return f"IntPolynomial(n={self.n_vars}, 0)"
        parts = []
        for e, c in self._terms.items():
            mono = "*".join(f"x{i + 1}^{k}" if k > 1 else f"x{i + 1}" for i, k in enumerate(e) if k)
            parts.append(f"{c}*{mono}" if mono else str(c))
        return f"IntPolynomial(n={self.n_vars}, {' + '.join(parts)})"

    # ---- 評価 ----

    def __call__(self, x: Sequence[Number]) -> Number:
        return self.evaluate(x)

    def evaluate(self, x: Sequence[Number]) -> Number:
        """整数・有理数点での厳密評価"""
        if len(x) != self.n_vars:
            raise PolynomialError(f"point length {len(x)} does not match n_vars={self.n_vars}")
        total: Number = 0
        for e, c in self._terms.items():
            value: Number = c
            for xi, k in zip(x, e):
                if k:
                    value *= xi ** k
            total += value
        return total

    def evaluate_mod(self, coords: Sequence[np.ndarray], q: int) -> np.ndarray:
        """
        格子上の値 f(x) mod q を int64 配列で返す

        Args:
            coords: 各変数の整数配列（ブロードキャスト可能）
            q: 法（q² が int64 に収まること）
        """
        if len(coords) != self.n_vars:
            raise PolynomialError(f"coordinate length {len(coords)} does not match n_vars={self.n_vars}")
        if q < 1 or q > 3_000_000_000:
            raise PolynomialError(f"modulus out of range for int64 evaluation: {q}")
        shape = np.broadcast(*coords).shape if self.n_vars > 1 else np.shape(coords[0])
        result = np.zeros(shape, dtype=np.int64)
        if q == 1:
            return result
        max_exp = [max((e[i] for e in self._terms), default=0) for i in range(self.n_vars)]
        powers = []
        for i, arr in enumerate(coords):
            base = np.mod(np.asarray(arr, dtype=np.int64), q)
            table = [np.ones_like(base)]
            for _ in range(max_exp[i]):
                table.append(table[-1] * base % q)
            powers.append(table)
        for e, c in self._terms.items():
            term = np.full(shape, c % q, dtype=np.int64)
            for i, k in enumerate(e):
                if k:
                    term = term * powers[i][k] % q
            result = (result + term) % q
        return result

    def evaluate_int(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """格子上の厳密整数値（int64 で足りない場合は object 配列）"""
        if len(coords) != self.n_vars:
            raise PolynomialError(f"coordinate length {len(coords)} does not match n_vars={self.n_vars}")
        arrays = [np.asarray(a) for a in coords]
        bound = max((int(np.max(np.abs(a))) if a.size else 0 for a in arrays), default=0)
        magnitude = sum(abs(c) * bound ** sum(e) for e, c in self._terms.items())
        dtype = np.int64 if magnitude < 2 ** 62 else object
        shape = np.broadcast(*arrays).shape
        result = np.zeros(shape, dtype=dtype)
        for e, c in self._terms.items():
            term = np.full(shape, c, dtype=dtype)
            for a, k in zip(arrays, e):
                if k:
                    term = term * a.astype(dtype) ** k
            result = result + term
        return result

    # ---- 構造操作 ----

    def shift(self, h: Sequence[int]) -> "IntPolynomial":
        """x ↦ f(x + h)（二項展開による項ごとの展開）"""
        if len(h) != self.n_vars:
            raise PolynomialError(f"shift length {len(h)} does not match n_vars={self.n_vars}")
        terms: Dict[Exponent, int] = {}
        for e, c in self._terms.items():
            factors = [
                [(k, math.comb(ei, k) * hi ** (ei - k)) for k in range(ei + 1)]
                for ei, hi in zip(e, h)
            ]
            for choice in itertools.product(*factors):
                coeff = c
                for _, binom in choice:
                    coeff *= binom
                if coeff:
                    new_e = tuple(k for k, _ in choice)
                    terms[new_e] = terms.get(new_e, 0) + coeff
        return IntPolynomial(self.n_vars, terms)

    def homogeneous_part(self, d: int) -> "IntPolynomial":
        return IntPolynomial(self.n_vars, {e: c for e, c in self._terms.items() if sum(e) == d})

    def derivative(self, index: int) -> "IntPolynomial":
        terms = {}
        for e, c in self._terms.items():
            k = e[index]
            if k:
                new_e = list(e)
                new_e[index] = k - 1
                terms[tuple(new_e)] = c * k
        return IntPolynomial(self.n_vars, terms)

    def reduce_mod(self, p: int) -> "IntPolynomial":
        """係数を [0, p) に簡約"""
        return IntPolynomial(self.n_vars, {e: c % p for e, c in self._terms.items()})

    def to_sympy(self, symbols: Optional[Sequence[sympy.Symbol]] = None) -> sympy.Expr:
        symbols = symbols or sympy.symbols(f"x1:{self.n_vars + 1}")
        return sympy.Add(*[c * sympy.Mul(*[s ** k for s, k in zip(symbols, e)]) for e, c in self._terms.items()])

    def coefficient_list_univariate(self) -> List[int]:
        """一変数多項式の係数（最高次から）"""
        if self.n_vars != 1:
            raise PolynomialError("univariate polynomial required")
        coeffs = [0] * (self.degree + 1)
        for (k,), c in self._terms.items():
            coeffs[self.degree - k] = c
        return coeffs


@dataclass(frozen=True)
class ScaledNorm:
    """∥f∥_P の値（非負の有理数）"""

    value: Fraction

    def __post_init__(self):
        if self.value < 0:
            raise PolynomialError(f"scaled norm must be non-negative, got {self.value}")


def difference(F: IntPolynomial, h: Sequence[int]) -> IntPolynomial:
    """
    差分多項式 F_h(x) = F(x + h) − F(x)

    Raises:
        PolynomialError: len(h) ≠ n_vars
    """
    if len(h) != F.n_vars:
        raise PolynomialError(f"dimension mismatch: shift length {len(h)} vs n_vars={F.n_vars}")
    if not any(h):
        return IntPolynomial.zero(F.n_vars)
    return F.shift(h) - F


def leading_form(f: IntPolynomial) -> IntPolynomial:
    """最高次の斉次部分"""
    if f.is_zero():
        raise PolynomialError("leading form of the zero polynomial is undefined")
    return f.homogeneous_part(f.degree)


def scaled_norm(f: IntPolynomial, P: Union[int, Fraction]) -> ScaledNorm:
    """
    ∥f∥_P = ∥P^{−deg f}·f(P·x)∥（厳密有理数）

    項 c·x^e は c·P^{|e| − deg f} に写る。
    """
    if f.is_zero():
        raise PolynomialError("scaled norm of the zero polynomial is undefined")
    P = Fraction(P)
    if P < 1:
        raise PolynomialError(f"P must be at least 1, got {P}")
    d = f.degree
    value = max(abs(c) * P ** (sum(e) - d) for e, c in f.terms.items())
    return ScaledNorm(Fraction(value))


def gradient(f: IntPolynomial) -> Tuple[IntPolynomial, ...]:
    return tuple(f.derivative(i) for i in range(f.n_vars))


def hessian(f: IntPolynomial) -> Tuple[Tuple[IntPolynomial, ...], ...]:
    first = gradient(f)
    return tuple(tuple(first[i].derivative(j) for j in range(f.n_vars)) for i in range(f.n_vars))


def content(f: IntPolynomial) -> int:
    """係数の最大公約数（零多項式は 0）"""
    return reduce(math.gcd, (abs(c) for c in f.terms.values()), 0)


def sylvester_matrix(f: IntPolynomial, g: IntPolynomial) -> sympy.Matrix:
    a = f.coefficient_list_univariate()
    b = g.coefficient_list_univariate()
    m, n = len(a) - 1, len(b) - 1
    size = m + n
    rows = []
    for i in range(n):
        rows.append([0] * i + a + [0] * (size - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + b + [0] * (size - n - 1 - i))
    return sympy.Matrix(rows)


def resultant_univariate(f: IntPolynomial, g: IntPolynomial) -> int:
    """
    一変数多項式の終結式（Sylvester 行列の行列式）

    Raises:
        PolynomialError: 多変数・零多項式
    """
    if f.n_vars != 1 or g.n_vars != 1:
        raise PolynomialError("univariate polynomials required for resultant")
    if f.is_zero() or g.is_zero():
        raise PolynomialError("resultant with the zero polynomial is undefined")
    if f.degree == 0 and g.degree == 0:
        return 1
    if f.degree == 0:
        return f.terms[(0,)] ** g.degree
    if g.degree == 0:
        return g.terms[(0,)] ** f.degree
    return int(sylvester_matrix(f, g).det(method="bareiss"))


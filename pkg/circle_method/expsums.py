"""
指数和モジュール

アルキメデス側の母関数 S(α), S(q,z)、法 q の完全和 T(q,v), T*(q,v)、
中国剰余定理による乗法性、van der Corput 差分和 𝒯_{a,h}(q,z) とその Gauss 平均、
Poisson 和公式による照合、平方法と立方因子法での上界、小素数での上界検証をまとめる。

(s₁, s₂) の二重和はすべて Ramanujan 和の積 c_r(x)·c_r(y) = Z(r, x, y) に
畳み込んでから位相ごとに集計する（np.bincount）。
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import GF
from sympy.polys.matrices import DomainMatrix

from common.config_loader import default_config, get_guard
from common.error_handler import ErrorSeverity, error_handler
from common.exceptions import ArithmeticPreconditionError, GuardError, PolynomialError, check_guard
from common.logger import get_logger

from .arith import (bezout, e_q_table, factor, is_squarefree, ramanujan_sum, ramanujan_vector,
                    reduced_residues)
from .poly import IntPolynomial, content, difference, gradient, hessian, leading_form, resultant_univariate
from .weights import WeightSpec, refine_tensor, tensor_midpoint

logger = get_logger("ExpSums")

CHUNK_POINTS = 1 << 21
TWO_PI = 2.0 * math.pi
STABLE_DOUBLINGS = 3
ABSOLUTE_FLOOR = 1e-6
GAUSSIAN_REACH = 6.0
IDENTITY_TOL = 1e-8

Vector = Tuple[int, ...]


# ---- 格子の列挙 ----

def grid_chunks(axes: Sequence[np.ndarray]) -> Iterator[List[np.ndarray]]:
    """axes の直積を辞書式順序で、1塊 CHUNK_POINTS 点以下に分割して返す"""
    if not axes or any(len(a) == 0 for a in axes):
        return
    n = len(axes)
    split, tail = n, 1
    while split > 0 and tail * len(axes[split - 1]) <= CHUNK_POINTS:
        split -= 1
        tail *= len(axes[split])
    if split < n:
        mesh = [m.ravel() for m in np.meshgrid(*axes[split:], indexing="ij")]
        size = mesh[0].size
        for prefix in itertools.product(*axes[:split]):
            yield [np.full(size, v, dtype=np.int64) for v in prefix] + mesh
    else:
        last = axes[-1]
        for prefix in itertools.product(*axes[:-1]):
            for start in range(0, len(last), CHUNK_POINTS):
                piece = last[start:start + CHUNK_POINTS]
                yield [np.full(piece.size, v, dtype=np.int64) for v in prefix] + [piece]


def residue_chunks(q: int, n: int, guard: Optional[int] = None) -> Iterator[List[np.ndarray]]:
    """(ℤ/q)^n の全点（ガード: q^n ≤ complete_sum）"""
    check_guard(q ** n, guard or get_guard("complete_sum"), f"residues mod {q} in dimension {n}")
    return grid_chunks([np.arange(q, dtype=np.int64)] * n)


def lattice_axes(W: WeightSpec, P: Union[int, Fraction, float]) -> List[np.ndarray]:
    """W(x/P) ≠ 0 となり得る整数点の座標範囲"""
    P = float(P)
    axes = []
    for lo, hi in W.support_box():
        if hi <= lo:
            return [np.zeros(0, dtype=np.int64)] * W.n_vars
        axes.append(np.arange(math.floor(P * lo), math.ceil(P * hi) + 1, dtype=np.int64))
    return axes


def lattice_chunks(W: WeightSpec, P: Union[int, Fraction, float],
                   guard: Optional[int] = None) -> Iterator[Tuple[List[np.ndarray], np.ndarray]]:
    """
    台の上の格子点とその重み W(x/P) を辞書式順序で返す

    Raises:
        GuardError: 点の総数が affine_enumeration を超える
    """
    axes = lattice_axes(W, P)
    total = math.prod(len(a) for a in axes)
    check_guard(total, guard or get_guard("affine_enumeration"), "weighted lattice")
    Pf = float(P)
    for coords in grid_chunks(axes):
        weights = W.eval_array([c / Pf for c in coords])
        keep = weights != 0.0
        if np.any(keep):
            yield [c[keep] for c in coords], weights[keep]


def value_distribution(F: IntPolynomial, W: WeightSpec, P) -> Tuple[np.ndarray, np.ndarray]:
    """
    F の値ごとの重みの総和 A(m) = Σ_{F(x)=m} W(x/P)

    Returns:
        (値 m の昇順配列, A(m) の配列)
    """
    values, masses = [], []
    for coords, weights in lattice_chunks(W, P):
        values.append(F.evaluate_int(coords))
        masses.append(weights)
    if not values:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    all_values = np.concatenate(values)
    unique, inverse = np.unique(all_values, return_inverse=True)
    return unique, np.bincount(inverse.ravel(), weights=np.concatenate(masses))


# ---- 法の分解 ----

@dataclass(frozen=True)
class ModulusFactorization:
    """q = b₁·b₂·q₃, q₃ = c²·d（d は平方因子なし）"""

    q: int
    b1: int
    b2: int
    q3: int
    c: int
    d: int

    @property
    def q2(self) -> int:
        return self.b2 * self.q3


def factorize_modulus(q: int) -> ModulusFactorization:
    """
    法 q の分解

    b₁ は指数1の素数冪の積、b₂ は指数2の素数冪の積、q₃ は指数3以上の部分。
    q₃ = c²d は各 p^e について c に p^{⌊e/2⌋}、e が奇数なら d に p を割り当てる。
    """
    if q < 1:
        raise ArithmeticPreconditionError(f"modulus must be positive, got {q}")
    b1 = b2 = q3 = c = d = 1
    for p, e in factor(q):
        if e == 1:
            b1 *= p
        elif e == 2:
            b2 *= p * p
        else:
            q3 *= p ** e
            c *= p ** (e // 2)
            if e % 2:
                d *= p
    return ModulusFactorization(q, b1, b2, q3, c, d)


# ---- アルキメデス側の和 ----

def _as_rational_phase(alpha: Union[Fraction, int, float]) -> Tuple[int, int, float]:
    """α を (a, q, z)（α = a/q + z）に分ける。浮動小数は z 側に置く"""
    if isinstance(alpha, (Fraction, int)):
        alpha = Fraction(alpha)
        return alpha.numerator, alpha.denominator, 0.0
    return 0, 1, float(alpha)


def _phase_sums(F: IntPolynomial, W: WeightSpec, P, q: int, residues: Sequence[int], z: float) -> List[complex]:
    """各 a について Σ_x W(x/P) e((a/q + z)F(x)) を一度の列挙で計算"""
    totals = [0j] * len(residues)
    for coords, weights in lattice_chunks(W, P):
        values_mod = F.evaluate_mod(coords, q) if q > 1 else np.zeros(weights.shape, dtype=np.int64)
        archimedean = z * F.evaluate_int(coords).astype(float) if z else 0.0
        for i, a in enumerate(residues):
            phase = (a % q) * values_mod % q / q + archimedean
            totals[i] += complex(np.sum(weights * np.exp(1j * TWO_PI * phase)))
    return totals


@error_handler(severity=ErrorSeverity.MEDIUM)
def S_alpha(F: IntPolynomial, W: WeightSpec, P, alpha: Union[Fraction, int, float]) -> complex:
    """
    S(α) = Σ_x W(x/P) e(αF(x))

    α が有理数なら位相を q で簡約してから指数関数を取る。

    Raises:
        GuardError: 列挙点数がガードを超える
    """
    if F.n_vars != W.n_vars:
        raise PolynomialError(f"dimension mismatch: F has {F.n_vars} variables, weight has {W.n_vars}")
    a, q, z = _as_rational_phase(alpha)
    return _phase_sums(F, W, P, q, [a], z)[0]


@error_handler(severity=ErrorSeverity.MEDIUM)
def S_qz(F: IntPolynomial, W: WeightSpec, P, q: int, z: float) -> complex:
    """S(q,z) = Σ*_{a mod q} S(a/q + z)"""
    if F.n_vars != W.n_vars:
        raise PolynomialError(f"dimension mismatch: F has {F.n_vars} variables, weight has {W.n_vars}")
    if q < 1:
        raise ArithmeticPreconditionError(f"modulus must be positive, got {q}")
    values = _phase_sums(F, W, P, q, list(reduced_residues(q)), float(z))
    total = sum(values, 0j)
    logger.sum_info(f"S(q={q}, z={z:.3e}) = {total:.6g}")
    return total


# ---- 完全和 ----

def _check_vector(v: Sequence[int], n: int):
    if len(v) != n:
        raise PolynomialError(f"frequency vector length {len(v)} does not match n_vars={n}")


def _linear_phase(coords: Sequence[np.ndarray], v: Sequence[int], q: int) -> np.ndarray:
    phase = np.zeros(coords[0].shape, dtype=np.int64)
    for c, vi in zip(coords, v):
        phase = (phase + (int(vi) % q) * c) % q
    return phase


def _collect(q: int, buckets: np.ndarray) -> complex:
    """Σ_k buckets[k]·e_q(k)"""
    return complex(np.dot(buckets, e_q_table(q)))


def T_complete(q: int, f: IntPolynomial, g: IntPolynomial, v: Sequence[int]) -> complex:
    """
    T(q, v) = Σ_{x mod q} Σ*_{s₁,s₂} e_q(s₁g(x) + (s₁−s₂)f(x) + v·x)

    (s₁,s₂) 和は Z(q, (f+g)(x), f(x)) = c_q((f+g)(x))·c_q(f(x)) に等しい。
    重み Z を位相 v·x mod q ごとに集計してから e_q を掛ける。

    Raises:
        GuardError: q^n が complete_sum を超える
    """
    _check_same_space(f, g)
    _check_vector(v, f.n_vars)
    fg = f + g
    buckets = np.zeros(q)
    for coords in residue_chunks(q, f.n_vars):
        z_values = (ramanujan_vector(q, fg.evaluate_mod(coords, q)) *
                    ramanujan_vector(q, f.evaluate_mod(coords, q)))
        buckets += np.bincount(_linear_phase(coords, v, q), weights=z_values, minlength=q)
    return _collect(q, buckets)


def T_complete_direct(q: int, f: IntPolynomial, g: IntPolynomial, v: Sequence[int]) -> complex:
    """T(q, v) の定義どおりの三重和（小さい q の照合用）"""
    _check_same_space(f, g)
    _check_vector(v, f.n_vars)
    check_guard(q ** (f.n_vars + 2), get_guard("multiplicativity"), f"direct triple loop mod {q}")
    units = np.array(list(reduced_residues(q)), dtype=np.int64)
    s1, s2 = np.meshgrid(units, units, indexing="ij")
    total = 0j
    for x in itertools.product(range(q), repeat=f.n_vars):
        fx, gx = f.evaluate(x) % q, g.evaluate(x) % q
        linear = sum(vi * xi for vi, xi in zip(v, x)) % q
        phase = (s1 * gx + (s1 - s2) * fx + linear) % q
        total += complex(np.sum(np.exp(1j * TWO_PI * phase / q)))
    return total


def T_star(q: int, a: int, g: IntPolynomial, v: Sequence[int]) -> complex:
    """
    T*_a(q, v) = Σ_{x mod q} e_q(a·g(x) + v·x)

    Raises:
        ArithmeticPreconditionError: gcd(a, q) ≠ 1
        GuardError: q^n が complete_sum を超える
    """
    if math.gcd(a, q) != 1:
        raise ArithmeticPreconditionError(f"gcd(a, q) = {math.gcd(a, q)} for a={a}, q={q}")
    _check_vector(v, g.n_vars)
    buckets = np.zeros(q)
    for coords in residue_chunks(q, g.n_vars):
        phase = ((a % q) * g.evaluate_mod(coords, q) + _linear_phase(coords, v, q)) % q
        buckets += np.bincount(phase, minlength=q)
    return _collect(q, buckets)


def Z_eval(r: int, x: int, y: int) -> int:
    """
    Z(r, x, y) = Σ*_{s₁,s₂ mod r} e_r(s₁x − s₂y)

    素数冪ごとの Ramanujan 和の積として厳密に計算する。
    """
    if r < 1:
        raise ArithmeticPreconditionError(f"modulus must be positive, got {r}")
    value = 1
    for p, e in factor(r) if r > 1 else ():
        pe = p ** e
        value *= ramanujan_sum(pe, x) * ramanujan_sum(pe, y)
    return value


def _check_same_space(f: IntPolynomial, g: IntPolynomial):
    if f.n_vars != g.n_vars:
        raise PolynomialError(f"dimension mismatch: {f.n_vars} vs {g.n_vars} variables")


@dataclass(frozen=True)
class CrtSplit:
    """q = r·s の分解データ（r·r̄ + s·s̄ = 1）"""

    r: int
    s: int
    r_bar: int
    s_bar: int
    v_r: Vector
    v_s: Vector


def crt_split(r: int, s: int, v: Sequence[int]) -> CrtSplit:
    """
    乗法性で使うひねりベクトル v_r = s̄v mod r, v_s = r̄v mod s

    Raises:
        ArithmeticPreconditionError: gcd(r, s) ≠ 1
    """
    r_bar, s_bar = bezout(r, s)
    return CrtSplit(r, s, r_bar, s_bar,
                    tuple((s_bar * vi) % r for vi in v),
                    tuple((r_bar * vi) % s for vi in v))


def T_complete_factored(split: CrtSplit, f: IntPolynomial, g: IntPolynomial) -> complex:
    """T(r, s̄v; s̄f, s̄g)·T(s, r̄v; r̄f, r̄g)"""
    return (T_complete(split.r, f * split.s_bar, g * split.s_bar, split.v_r) *
            T_complete(split.s, f * split.r_bar, g * split.r_bar, split.v_s))


def T_star_factored(split: CrtSplit, a: int, g: IntPolynomial) -> complex:
    """T*_{s̄a}(r, s̄v)·T*_{r̄a}(s, r̄v)"""
    return (T_star(split.r, (split.s_bar * a) % split.r if split.r > 1 else 1, g, split.v_r) *
            T_star(split.s, (split.r_bar * a) % split.s if split.s > 1 else 1, g, split.v_s))


def _poisson_weights(q: int, f: IntPolynomial, g: IntPolynomial, a: int,
                     coords: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    A(x) = c_{b₁}((f+g)(x))·c_{b₁}(f(x))·e_{q₂}(a·g(x)) を
    実数重みと位相 b₁·a·g(x) mod q の組で返す
    """
    fact = factorize_modulus(q)
    b1 = fact.b1
    weights = (ramanujan_vector(b1, (f + g).evaluate_mod(coords, b1)) *
               ramanujan_vector(b1, f.evaluate_mod(coords, b1)))
    phase = (b1 * (a % q)) * g.evaluate_mod(coords, q) % q
    return weights.astype(float), phase


def _check_poisson_unit(q: int, a: int):
    q2 = factorize_modulus(q).q2
    if q2 > 1 and math.gcd(a, q2) != 1:
        raise ArithmeticPreconditionError(f"gcd(a, q₂) = {math.gcd(a, q2)} for a={a}, q₂={q2}")


def S_complete(q: int, f: IntPolynomial, g: IntPolynomial, a: int, v: Sequence[int]) -> complex:
    """
    Poisson 側の完全和 S(q, v) = Σ_{x mod q} A(x)·e_q(v·x)

    A(x) = Σ*_{s₁,s₂ mod b₁} e_{b₁}(s₁g(x) + (s₁−s₂)f(x))·e_{q₂}(a·g(x))

    Raises:
        ArithmeticPreconditionError: gcd(a, q₂) ≠ 1
    """
    _check_same_space(f, g)
    _check_vector(v, f.n_vars)
    _check_poisson_unit(q, a)
    buckets = np.zeros(q)
    for coords in residue_chunks(q, f.n_vars):
        weights, phase = _poisson_weights(q, f, g, a, coords)
        buckets += np.bincount((phase + _linear_phase(coords, v, q)) % q, weights=weights, minlength=q)
    return _collect(q, buckets)


def S_complete_table(q: int, f: IntPolynomial, g: IntPolynomial, a: int) -> np.ndarray:
    """全ての v mod q に対する S(q, v)（n 次元 FFT、添字が v）"""
    _check_poisson_unit(q, a)
    n = f.n_vars
    check_guard(q ** n, get_guard("multiplicativity"), f"Poisson table mod {q}")
    grid = np.meshgrid(*([np.arange(q, dtype=np.int64)] * n), indexing="ij")
    coords = [c.ravel() for c in grid]
    weights, phase = _poisson_weights(q, f, g, a, coords)
    values = (weights * np.exp(1j * TWO_PI * phase / q)).reshape((q,) * n)
    return np.fft.ifftn(values) * q ** n


def S_complete_factored(q: int, f: IntPolynomial, g: IntPolynomial, a: int, v: Sequence[int]) -> complex:
    """S(q, v) = T(b₁, q̄₂v)·T*_a(q₂, b̄₁v)"""
    fact = factorize_modulus(q)
    b1, q2 = fact.b1, fact.q2
    b1_bar, q2_bar = bezout(b1, q2)
    left = T_complete(b1, f, g, tuple((q2_bar * vi) % b1 for vi in v))
    right = T_star(q2, a % q2 if q2 > 1 else 1, g, tuple((b1_bar * vi) % q2 for vi in v))
    return left * right


# ---- 完全和の検証 ----

def trivial_bound_check(q: int, f: IntPolynomial, g: IntPolynomial, v: Sequence[int]) -> Dict[str, Any]:
    """|T(q,v)| ≤ Σ_x (q, (f+g)(x))·(q, f(x))"""
    value = T_complete(q, f, g, v)
    bound = 0
    fg = f + g
    for coords in residue_chunks(q, f.n_vars):
        bound += int(np.sum(np.gcd(fg.evaluate_mod(coords, q), q) * np.gcd(f.evaluate_mod(coords, q), q)))
    passed = abs(value) <= bound * (1 + 1e-12)
    return {"q": q, "abs_T": abs(value), "bound": bound, "passed": bool(passed)}


def z_bound_check(r_max: int = 200) -> Dict[str, Any]:
    """全ての r ≤ r_max, 0 ≤ x, y < r で |Z(r,x,y)| ≤ (r,x)(r,y)"""
    violations = []
    for r in range(1, r_max + 1):
        table = np.abs(ramanujan_vector(r, np.arange(r)))
        gcds = np.gcd(np.arange(r), r)
        # |Z| = |c_r(x)|·|c_r(y)| なので一変数の不等式に帰着する
        bad = np.nonzero(table > gcds)[0]
        violations.extend((r, int(x)) for x in bad)
    passed = not violations
    logger.check_info(f"|Z(r,x,y)| ≤ (r,x)(r,y) for r ≤ {r_max}", passed)
    return {"r_max": r_max, "violations": violations[:20], "passed": passed}


def parseval_check(q: int, f: IntPolynomial, g: Optional[IntPolynomial] = None, a: int = 1) -> Dict[str, Any]:
    """
    n = 1 での Parseval 恒等式 q^{-1}·Σ_{v mod q} |S(q,v)|² = Σ_x |A(x)|²
    """
    if f.n_vars != 1:
        raise PolynomialError("univariate polynomial required for the Parseval check")
    g = g if g is not None else IntPolynomial.zero(1)
    table = S_complete_table(q, f, g, a)
    coords = [np.arange(q, dtype=np.int64)]
    weights, _ = _poisson_weights(q, f, g, a, coords)
    lhs = float(np.sum(np.abs(table) ** 2)) / q
    rhs = float(np.sum(weights ** 2))
    passed = abs(lhs - rhs) <= 1e-9 * max(1.0, rhs)
    return {"q": q, "lhs": lhs, "rhs": rhs, "passed": bool(passed)}


def _random_polynomial(rng: np.random.Generator, n: int, degree: int, extra_terms: int = 2) -> IntPolynomial:
    terms: Dict[Tuple[int, ...], int] = {}
    for i in range(n):
        e = [0] * n
        e[i] = degree
        terms[tuple(e)] = int(rng.integers(1, 6)) * int(rng.choice([-1, 1]))
    for _ in range(extra_terms):
        e = [0] * n
        for _ in range(int(rng.integers(0, degree + 1))):
            e[int(rng.integers(0, n))] += 1
        terms[tuple(e)] = terms.get(tuple(e), 0) + int(rng.integers(-5, 6))
    return IntPolynomial(n, terms)


def _random_coprime_split(rng: np.random.Generator, q: int) -> Tuple[int, int]:
    r = 1
    for p, e in factor(q) if q > 1 else ():
        if rng.random() < 0.5:
            r *= p ** e
    return r, q // r


@error_handler(severity=ErrorSeverity.HIGH)
def multiplicativity_suite(trials: int = 200, seed: int = 7, q_max: int = 10_000) -> Dict[str, Any]:
    """
    乗法性（T, T*, S の三つの分解公式）の乱択検証

    q は対数一様に抽出し、q^n ≤ multiplicativity ガードに収める。

    Returns:
        試行数・最大相対誤差・失敗例を含むレポート
    """
    rng = np.random.default_rng(seed)
    tol = default_config()["tolerances"]["multiplicativity"]
    guard = get_guard("multiplicativity")
    worst = {"T": 0.0, "T_star": 0.0, "S": 0.0}
    failures: List[Dict[str, Any]] = []
    logger.start_operation(f"乗法性検証 ({trials}件, seed={seed})")

    for trial in range(trials):
        n = int(rng.integers(1, 3))
        limit = min(q_max, int(guard ** (1.0 / n)))
        q = int(round(math.exp(rng.uniform(math.log(2), math.log(limit)))))
        f = _random_polynomial(rng, n, 4)
        g = _random_polynomial(rng, n, 3)
        v = tuple(int(x) for x in rng.integers(0, q, size=n))
        a = int(rng.choice([u for u in range(1, min(q, 50) + 1) if math.gcd(u, q) == 1] or [1]))
        r, s = _random_coprime_split(rng, q)
        split = crt_split(r, s, v)

        pairs = {
            "T": (T_complete(q, f, g, v), T_complete_factored(split, f, g)),
            "T_star": (T_star(q, a, g, v), T_star_factored(split, a, g)),
            "S": (S_complete(q, f, g, a, v), S_complete_factored(q, f, g, a, v)),
        }
        for name, (lhs, rhs) in pairs.items():
            error = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
            worst[name] = max(worst[name], error)
            if error > tol:
                failures.append({"trial": trial, "identity": name, "q": q, "r": r, "s": s, "n": n,
                                 "v": list(v), "relative_error": error})
        if (trial + 1) % 50 == 0:
            logger.progress(f"乗法性検証 {trial + 1}/{trials}")

    passed = not failures
    logger.check_info(f"乗法性 (最大相対誤差 {max(worst.values()):.2e})", passed)
    logger.complete_operation("乗法性検証")
    return {"trials": trials, "seed": seed, "max_relative_error": worst,
            "failures": failures[:20], "passed": passed}


def weil_envelope_check(primes: Sequence[int], g: Optional[IntPolynomial] = None, a: int = 1) -> Dict[str, Any]:
    """全ての v mod p で |T*(p, g, v)| ≤ 2√p（既定 g = x³）"""
    g = g if g is not None else IntPolynomial(1, {(3,): 1})
    if g.n_vars != 1:
        raise PolynomialError("univariate polynomial required for the Weil envelope")
    rows = []
    for p in primes:
        x = np.arange(p, dtype=np.int64)
        values = np.exp(1j * TWO_PI * ((a % p) * g.evaluate_mod([x], p) % p) / p)
        sums = np.abs(np.fft.ifft(values) * p)
        rows.append({"p": p, "max_abs": float(np.max(sums)), "envelope": 2 * math.sqrt(p)})
    passed = all(row["max_abs"] <= row["envelope"] + 1e-9 for row in rows)
    logger.check_info(f"Weil 型上界 |T*| ≤ 2√p ({len(rows)} 素数)", passed)
    return {"rows": rows, "passed": passed}


# ---- van der Corput ----

@error_handler(severity=ErrorSeverity.MEDIUM)
def vdc_sum(F: IntPolynomial, W: WeightSpec, P, q: int, z: float, a: int, h: Sequence[int]) -> complex:
    """
    𝒯_{a,h}(q,z) = Σ_x W_h(x/P)·Σ*_{s₁,s₂ ≤ b₁} e_{b₁}(s₁F_h(x) + (s₁−s₂)F(x))·e_{q₂}(aF_h(x))·e(zF_h(x))

    (s₁,s₂) 和は c_{b₁}(F(x+h))·c_{b₁}(F(x)) に等しい。

    Raises:
        ArithmeticPreconditionError: gcd(a, q₂) ≠ 1
        GuardError: 列挙点数がガードを超える
    """
    fact = factorize_modulus(q)
    b1, q2 = fact.b1, fact.q2
    if q2 > 1 and math.gcd(a, q2) != 1:
        raise ArithmeticPreconditionError(f"gcd(a, q₂) = {math.gcd(a, q2)} for a={a}, q₂={q2}")
    Fh = difference(F, h)
    Wh = W.differenced(h, P)
    shifted = F + Fh
    total = 0j
    for coords, weights in lattice_chunks(Wh, P):
        arithmetic = (ramanujan_vector(b1, shifted.evaluate_mod(coords, b1)) *
                      ramanujan_vector(b1, F.evaluate_mod(coords, b1)))
        phase = (a % q2) * Fh.evaluate_mod(coords, q2) % q2 / q2 if q2 > 1 else 0.0
        if z:
            phase = phase + z * Fh.evaluate_int(coords).astype(float)
        total += complex(np.sum(weights * arithmetic * np.exp(1j * TWO_PI * phase)))
    return total


def vdc_trivial_bound(F: IntPolynomial, W: WeightSpec, P, q: int, h: Sequence[int]) -> float:
    """b₁²·Σ_x W_h(x/P)"""
    b1 = factorize_modulus(q).b1
    return b1 ** 2 * sum(float(np.sum(w)) for _, w in lattice_chunks(W.differenced(h, P), P))


def oscillatory_I(W: WeightSpec, g: IntPolynomial, P, z: float, v: Sequence[float],
                  step: Optional[float] = None, tol: Optional[float] = None) -> complex:
    """
    I(z, v) = ∫ W(x/P)·e(z·g(x) − v·x) dx

    x = P·u と置換し P^n·∫ W(u) e(z·g(Pu) − P·v·u) du をテンソル積中点則で求める。

    Raises:
        QuadratureError: 細分化で収束しない
    """
    _check_vector(v, W.n_vars)
    tol = default_config()["tolerances"]["quadrature"] if tol is None else tol
    Pf = float(P)
    box = W.support_box()
    if any(hi <= lo for lo, hi in box):
        return 0j
    step = step or min(hi - lo for lo, hi in box) / 32

    def integrand(mesh: List[np.ndarray]) -> np.ndarray:
        phase = -Pf * sum(float(vi) * u for vi, u in zip(v, mesh))
        if z:
            phase = phase + z * g.evaluate([Pf * u for u in mesh])
        return W.eval_array(mesh) * np.exp(1j * TWO_PI * phase)

    return Pf ** W.n_vars * refine_tensor(integrand, box, step, tol)


def _fourier_grid(values: np.ndarray, axes: Sequence[np.ndarray], volume: float,
                  freqs: Sequence[np.ndarray]) -> np.ndarray:
    """格子上の値 values について ∫ φ(x) e(−t·x) dx を全ての t の直積で計算"""
    out = values * volume
    for axis, (nodes, t) in enumerate(zip(axes, freqs)):
        kernel = np.exp(-1j * TWO_PI * np.outer(t, nodes))
        out = np.moveaxis(np.tensordot(kernel, out, axes=([1], [axis])), 0, axis)
    return out


def _poisson_side(Fh: IntPolynomial, Wh: WeightSpec, P, q: int, z: float, S_table: np.ndarray,
                  V: int, step: float) -> Tuple[complex, float]:
    """
    q^{-n}·Σ_{|v|_∞ ≤ V} S(q,v)·I(z, v/q) と q^{-n}·Σ |S(q,v)|·|I(z, v/q)|

    同じ格子上で全 v を一括計算する。
    """
    n = Wh.n_vars
    Pf = float(P)
    axes, volume = [], 1.0
    for lo, hi in Wh.support_box():
        if hi <= lo:
            return 0j, 0.0
        count = max(1, int(math.ceil((hi - lo) / step)))
        width = (hi - lo) / count
        axes.append(Pf * (lo + (np.arange(count) + 0.5) * width))
        volume *= Pf * width
    mesh = np.meshgrid(*axes, indexing="ij")
    phi = Wh.eval_array([m / Pf for m in mesh])
    if z:
        phi = phi * np.exp(1j * TWO_PI * z * Fh.evaluate(list(mesh)))
    v_range = np.arange(-V, V + 1)
    integrals = _fourier_grid(phi, axes, volume, [v_range / q] * n)
    index = np.ix_(*([np.mod(v_range, q)] * n))
    terms = S_table[index] * integrals
    return complex(np.sum(terms)) / q ** n, float(np.sum(np.abs(terms))) / q ** n


@error_handler(severity=ErrorSeverity.MEDIUM)
def poisson_check(F: IntPolynomial, W: WeightSpec, P, q: int, z: float, a: int,
                  h: Sequence[int], tol: Optional[float] = None, min_V: int = 4,
                  max_V: Optional[int] = None) -> Dict[str, Any]:
    """
    𝒯_{a,h}(q,z) = q^{-n}·Σ_v S(q,v)·I(z, v/q) の数値照合

    右辺の打ち切り V は I(z, v/q) が減衰し始める q/(P·幅) 程度から始めて倍々に増やし、
    連続 STABLE_DOUBLINGS 回の倍増で変化が tol/10 未満のときだけ収束とみなす。
    格子の刻みも V に合わせて細かくする。

    両辺が打ち消しで小さいときは、相対誤差の尺度に自明な上界 b₁²·Σ_x W_h(x/P) の
    ABSOLUTE_FLOOR 倍を使う。
    """
    tol = default_config()["tolerances"]["poisson"] if tol is None else tol
    Fh = difference(F, h)
    Wh = W.differenced(h, P)
    lhs = vdc_sum(F, W, P, q, z, a, h)
    S_table = S_complete_table(q, F, Fh, a)
    Pf = float(P)

    width = max(min(hi - lo for lo, hi in Wh.support_box()), 1e-12)
    floor = ABSOLUTE_FLOOR * vdc_trivial_bound(F, W, P, q, h)

    def step_for(V: int) -> float:
        # 刻みは最大周波数 V/q を解像する（u 座標で）
        return min(width / 64, q / (8.0 * V * Pf))

    V = max(int(min_V), int(math.ceil(2.0 * q / (Pf * width))))
    max_V = V * 2 ** (STABLE_DOUBLINGS + 2) if max_V is None else int(max_V)
    previous, mass = _poisson_side(Fh, Wh, P, q, z, S_table, V, step_for(V))
    stable = 0
    while V < max_V and stable < STABLE_DOUBLINGS:
        V *= 2
        current, mass = _poisson_side(Fh, Wh, P, q, z, S_table, V, step_for(V))
        if abs(current - previous) <= tol / 10 * max(abs(current), floor):
            stable += 1
        else:
            stable = 0
        previous = current
    converged = stable >= STABLE_DOUBLINGS
    rhs = previous
    scale = max(abs(lhs), abs(rhs), floor, 1e-300)
    relative = abs(lhs - rhs) / scale
    passed = converged and relative <= tol
    logger.check_info(f"Poisson 照合 q={q}, h={tuple(h)}: 相対誤差 {relative:.2e} (V={V})", passed)
    return {"q": q, "h": list(h), "z": z, "lhs": lhs, "rhs": rhs, "V": V, "stable_doublings": stable,
            "absolute_floor": floor, "absolute_sum": mass, "relative_error": relative,
            "converged": converged, "passed": bool(passed)}


def _shift_multiplicities(radii: Sequence[int]) -> Iterator[Tuple[Vector, int]]:
    """ℋ = {|h_i| < radii[i]} について N(h) = #{(h₁,h₂) ∈ ℋ²: h₁ − h₂ = h}"""
    widths = [2 * r - 1 for r in radii]
    for h in itertools.product(*(range(-(w - 1), w) for w in widths)):
        yield h, math.prod(w - abs(hi) for w, hi in zip(widths, h))


@error_handler(severity=ErrorSeverity.MEDIUM)
def vdc_inequality_check(F: IntPolynomial, W: WeightSpec, P, q: int, z: float, H: int) -> Dict[str, Any]:
    """
    点ごとの van der Corput 不等式の両辺

    ℋ = {h: |h|_∞ < H}, #ℋ = (2H−1)^n とし、Cauchy–Schwarz の形そのままで
    |S(q,z)| ≤ Σ*_{a mod q₂} (#X·Σ_h N(h)|𝒯_{a,h}(q,z)|)^{1/2} / #ℋ
    を確認する。#X は台の格子箱を各辺 H−1 だけ広げた点数。
    """
    if H < 1:
        raise ArithmeticPreconditionError(f"H must be at least 1, got {H}")
    n = F.n_vars
    q2 = factorize_modulus(q).q2
    lhs = abs(S_qz(F, W, P, q, z))
    box_points = math.prod(len(axis) + 2 * (H - 1) for axis in lattice_axes(W, P))
    shifts = list(_shift_multiplicities([H] * n))
    size_H = (2 * H - 1) ** n

    rhs = 0.0
    for a in reduced_residues(q2):
        inner = sum(mult * abs(vdc_sum(F, W, P, q, z, a, h)) for h, mult in shifts)
        rhs += math.sqrt(box_points * inner) / size_H
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    passed = ratio <= 1 + 1e-9
    logger.check_info(f"van der Corput 不等式 q={q}, H={H}: 比 {ratio:.4f}", passed)
    return {"q": q, "z": z, "H": H, "lhs": lhs, "rhs": rhs, "ratio": ratio,
            "shifts": len(shifts), "passed": bool(passed)}


def _split_terms(F: IntPolynomial, W: WeightSpec, P, q: int, a: int) -> Tuple[np.ndarray, np.ndarray]:
    """S_a(q,z) = Σ_x W(x/P)·c_{b₁}(F(x))·e_{q₂}(aF(x))·e(zF(x)) を (F(x), 係数) の組で返す"""
    fact = factorize_modulus(q)
    b1, q2 = fact.b1, fact.q2
    values, coefs = [np.zeros(0)], [np.zeros(0, dtype=complex)]
    for coords, weights in lattice_chunks(W, P):
        phase = (a % q2) * F.evaluate_mod(coords, q2) % q2 / q2 if q2 > 1 else 0.0
        values.append(F.evaluate_int(coords).astype(float))
        coefs.append(weights * ramanujan_vector(b1, F.evaluate_mod(coords, b1)) * np.exp(1j * TWO_PI * phase))
    return np.concatenate(values), np.concatenate(coefs)


def _vdc_terms(F: IntPolynomial, W: WeightSpec, P, q: int, a: int,
               h: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """𝒯_{a,h}(q,z) = Σ 係数·e(z·F_h(x)) となる (F_h(x), 係数) の組"""
    fact = factorize_modulus(q)
    b1, q2 = fact.b1, fact.q2
    Fh = difference(F, h)
    shifted = F + Fh
    values, coefs = [np.zeros(0)], [np.zeros(0, dtype=complex)]
    for coords, weights in lattice_chunks(W.differenced(h, P), P):
        arithmetic = (ramanujan_vector(b1, shifted.evaluate_mod(coords, b1)) *
                      ramanujan_vector(b1, F.evaluate_mod(coords, b1)))
        phase = (a % q2) * Fh.evaluate_mod(coords, q2) % q2 / q2 if q2 > 1 else 0.0
        values.append(Fh.evaluate_int(coords).astype(float))
        coefs.append(weights * arithmetic * np.exp(1j * TWO_PI * phase))
    return np.concatenate(values), np.concatenate(coefs)


def _gaussian_closed_form(values: np.ndarray, coefs: np.ndarray, tau: float, A: float) -> complex:
    """∫ exp(−A(τ−z)²)·Σ 係数·e(z·値) dz"""
    decay = np.exp(-math.pi ** 2 * values ** 2 / A)
    return math.sqrt(math.pi / A) * complex(np.sum(coefs * decay * np.exp(1j * TWO_PI * tau * values)))


def _gaussian_quadrature(func: Callable[[np.ndarray], np.ndarray], tau: float, A: float,
                         max_frequency: float) -> complex:
    """
    ∫ exp(−A(τ−z)²)·func(z) dz の中点則

    範囲は τ ± GAUSSIAN_REACH/√A。刻みは最大周波数 + 8√A の2倍の逆数で、
    折り返し誤差は exp(−256π²) 以下に収まる。
    """
    root = math.sqrt(A)
    reach = GAUSSIAN_REACH / root
    step = 1.0 / (2.0 * (max_frequency + 8.0 * root))

    def integrand(axes: List[np.ndarray]) -> np.ndarray:
        z = axes[0]
        return np.exp(-A * (z - tau) ** 2) * func(z)

    return tensor_midpoint(integrand, [(tau - reach, tau + reach)], step)


def _oscillation(values: np.ndarray, coefs: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: np.exp(1j * TWO_PI * np.outer(z, values)) @ coefs


def vdc_gaussian_average(F: IntPolynomial, W: WeightSpec, P, q: int, a: int, h: Sequence[int],
                         tau: float, A: float) -> complex:
    """
    ∫ exp(−A(τ−z)²)·𝒯_{a,h}(q,z) dz の閉じた形

    Σ_x W_h(x/P)·c_{b₁}(F(x+h))c_{b₁}(F(x))·e_{q₂}(aF_h(x))·√(π/A)·exp(−π²F_h(x)²/A)·e(τF_h(x))

    Raises:
        ArithmeticPreconditionError: gcd(a, q₂) ≠ 1 または A ≤ 0
    """
    q2 = factorize_modulus(q).q2
    if q2 > 1 and math.gcd(a, q2) != 1:
        raise ArithmeticPreconditionError(f"gcd(a, q₂) = {math.gcd(a, q2)} for a={a}, q₂={q2}")
    if A <= 0:
        raise ArithmeticPreconditionError(f"Gaussian width parameter must be positive, got A={A}")
    return _gaussian_closed_form(*_vdc_terms(F, W, P, q, a, h), tau, A)


@error_handler(severity=ErrorSeverity.MEDIUM)
def averaged_vdc_check(F: IntPolynomial, W: WeightSpec, P, q: int, tau: float, H: int,
                       H1: Optional[int] = None, A: Optional[float] = None,
                       tail_from: Optional[int] = None) -> Dict[str, Any]:
    """
    Gauss 平均した van der Corput 不等式

    G(z) = exp(−A(τ−z)²)（既定 A = (H·P³)²）で平均し、a mod q₂ ごとに
    #ℋ₁²·∫G|S_a(q,z)|²dz ≤ #X·Σ_h N(h)·∫G·𝒯_{a,h}(q,z)dz
    を確かめる。ℋ₁ は第1座標だけ |h₁| < H₁（既定 2H）まで伸ばした箱。

    右辺の z 積分は閉じた形で計算し、数値積分との差を identity_error として返す。
    |h₁| ≥ tail_from（既定 H）の項は exp(−π²·min F_h²/A) で抑えられ、
    観測した比 tail_ratio とその上界 tail_bound を返す。
    """
    H1 = 2 * H if H1 is None else H1
    if H < 1 or H1 < H:
        raise ArithmeticPreconditionError(f"need 1 ≤ H ≤ H1, got H={H}, H1={H1}")
    A = float(H * float(P) ** 3) ** 2 if A is None else float(A)
    if A <= 0:
        raise ArithmeticPreconditionError(f"Gaussian width parameter must be positive, got A={A}")
    tail_from = H if tail_from is None else tail_from
    radii = [H1] + [H] * (F.n_vars - 1)
    q2 = factorize_modulus(q).q2
    shifts = list(_shift_multiplicities(radii))
    size_H = math.prod(2 * r - 1 for r in radii)
    box_points = math.prod(len(axis) + 2 * (r - 1) for axis, r in zip(lattice_axes(W, P), radii))

    rows = []
    identity_error = tail_ratio = tail_bound = 0.0
    for a in reduced_residues(q2):
        values, coefs = _split_terms(F, W, P, q, a)
        spread = float(np.ptp(values)) if values.size else 0.0
        squared = _gaussian_quadrature(lambda z: np.abs(_oscillation(values, coefs)(z)) ** 2, tau, A, spread)
        lhs = size_H ** 2 * squared.real

        inner = 0j
        for h, mult in shifts:
            hv, hc = _vdc_terms(F, W, P, q, a, h)
            if hc.size == 0:
                continue
            closed = _gaussian_closed_form(hv, hc, tau, A)
            numeric = _gaussian_quadrature(_oscillation(hv, hc), tau, A, float(np.max(np.abs(hv))))
            scale = math.sqrt(math.pi / A) * float(np.sum(np.abs(hc)))
            identity_error = max(identity_error, abs(numeric - closed) / scale)
            inner += mult * closed
            if abs(h[0]) >= tail_from:
                tail_ratio = max(tail_ratio, abs(closed) / scale)
                tail_bound = max(tail_bound, math.exp(-math.pi ** 2 * float(np.min(hv ** 2)) / A))
        rhs = box_points * inner.real
        rows.append({"a": a, "lhs": lhs, "rhs": rhs, "imaginary": abs(inner.imag) * box_points,
                     "holds": bool(lhs <= rhs * (1 + 1e-9) + 1e-12)})

    passed = (all(row["holds"] for row in rows) and identity_error <= IDENTITY_TOL
              and tail_ratio <= tail_bound + 1e-12)
    logger.check_info(f"平均化 van der Corput q={q}, H={H}, H₁={H1}: 恒等式誤差 {identity_error:.2e}, "
                      f"裾 {tail_ratio:.2e}", passed)
    return {"q": q, "tau": tau, "H": H, "H1": H1, "A": A, "tail_from": tail_from, "shifts": len(shifts),
            "rows": rows, "identity_error": identity_error, "tail_ratio": tail_ratio,
            "tail_bound": tail_bound, "passed": bool(passed)}


# ---- 平方部分 ----

def _sp_table_for(g: IntPolynomial, modulus: int, sp_table: Optional[Dict[int, int]]) -> Dict[int, int]:
    """modulus の素因数ごとの s_p′（与えられなければ主形式の総当たり）"""
    table = {}
    for p, _ in factor(modulus) if modulus > 1 else ():
        if sp_table is not None and p in sp_table:
            table[p] = sp_table[p]
        else:
            table[p] = sp_prime_bruteforce(leading_form(g), None, p)
    return table


def _stationary_counts(g: IntPolynomial, p: int, a: int) -> np.ndarray:
    """N_p(v) = #{s mod p : a∇g(s) + v ≡ 0 mod p} を v で添字付けた配列"""
    n = g.n_vars
    coords = _finite_field_grid(n, p)
    keys = [(-(a % p) * gi.evaluate_mod(coords, p)) % p for gi in gradient(g)]
    index = np.ravel_multi_index(keys, (p,) * n)
    return np.bincount(index, minlength=p ** n).reshape((p,) * n)


@error_handler(severity=ErrorSeverity.LOW)
def square_modulus_bound_check(g: IntPolynomial, moduli: Sequence[int], a: int = 1,
                               sp_table: Optional[Dict[int, int]] = None) -> Dict[str, Any]:
    """
    平方法 b₂ = ∏p²（相異なる p）での |T*(b₂, v)| と b₂^{n/2}·𝒟(b₂) の比

    g(s + pt) ≡ g(s) + p t·∇g(s) (mod p²) から
    |T*(p², v)| ≤ p^n·N_p(v), N_p(v) = #{s mod p : a∇g(s) + v ≡ 0}
    が厳密に従い、b₂ について乗法的になる。全ての v mod b₂ でこれを確認し、
    観測定数 max |T*|/(b₂^{n/2}𝒟(b₂)) を報告する。

    Raises:
        ArithmeticPreconditionError: b₂ が相異なる素数の平方の積でない、または gcd(a, b₂) ≠ 1
        GuardError: b₂^n がガードを超える
    """
    from .local import D_weight

    n = g.n_vars
    rows = []
    for b2 in moduli:
        fact = factorize_modulus(b2)
        if b2 < 2 or fact.b2 != b2:
            raise ArithmeticPreconditionError(f"product of distinct prime squares required, got {b2}")
        if math.gcd(a, b2) != 1:
            raise ArithmeticPreconditionError(f"gcd(a, b₂) = {math.gcd(a, b2)} for a={a}, b₂={b2}")
        check_guard(b2 ** n, get_guard("finite_field_points"), f"residues mod {b2} in dimension {n}")
        grid = [c.ravel() for c in np.meshgrid(*([np.arange(b2, dtype=np.int64)] * n), indexing="ij")]
        phases = np.exp(1j * TWO_PI * ((a % b2) * g.evaluate_mod(grid, b2) % b2) / b2)
        table = np.abs(np.fft.ifftn(phases.reshape((b2,) * n)) * b2 ** n)

        residues = np.meshgrid(*([np.arange(b2)] * n), indexing="ij")
        envelope = np.full(table.shape, float(b2) ** (n / 2))
        for p, _ in factor(b2):
            envelope *= _stationary_counts(g, p, a)[tuple(r % p for r in residues)]
        excess = float(np.max(table - envelope))

        D = D_weight(b2, _sp_table_for(g, b2, sp_table))
        ratio = float(np.max(table)) / (b2 ** (n / 2) * D)
        rows.append({"b2": b2, "D": D, "max_abs": float(np.max(table)), "ratio": ratio,
                     "holds": bool(excess <= 1e-6 * b2 ** n)})
    if not rows:
        raise ArithmeticPreconditionError("at least one square modulus is required")
    constant = max(row["ratio"] for row in rows)
    passed = all(row["holds"] for row in rows)
    logger.check_info(f"平方法の上界 |T*| ≤ b₂^(n/2)·∏N_p (観測定数 {constant:.3f}, {len(rows)} 法)", passed)
    return {"rows": rows, "observed_constant": constant, "passed": passed}


# ---- 立方因子部分 ----

def _rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    field = GF(p)
    n = len(rows)
    matrix = DomainMatrix([[field(int(x) % p) for x in row] for row in rows], (n, len(rows[0])), field)
    return int(matrix.rank())


def M_d(g: IntPolynomial, d: int, s: Sequence[int]) -> int:
    """
    #{t mod d : ∇²g(s)·t ≡ 0 mod d}（d は平方因子なし）

    素数ごとの核の次元から ∏_{p | d} p^{n − rank_p} として求める。

    Raises:
        ArithmeticPreconditionError: d が平方因子を持つ
    """
    if d < 1 or not is_squarefree(d):
        raise ArithmeticPreconditionError(f"squarefree modulus required, got d={d}")
    _check_vector(s, g.n_vars)
    n = g.n_vars
    matrix = [[entry.evaluate(tuple(s)) for entry in row] for row in hessian(g)]
    count = 1
    for p, _ in factor(d) if d > 1 else ():
        count *= p ** (n - _rank_mod_p(matrix, p))
    return count


def _cubefull_profile(g: IntPolynomial, q3: int, a: int) -> Tuple[int, int, Dict[Vector, float]]:
    """key = −a∇g(s) mod c ごとの Σ M_d(s)^{1/2}"""
    fact = factorize_modulus(q3)
    if fact.q3 != q3:
        raise ArithmeticPreconditionError(f"cube-full modulus required, got {q3}")
    check_guard(q3, get_guard("cubefull_modulus"), "cube-full modulus")
    c, d = fact.c, fact.d
    n = g.n_vars
    check_guard(c ** n, get_guard("finite_field_points"), f"residues mod c={c}")
    grads = gradient(g)
    profile: Dict[Vector, float] = {}
    cache: Dict[Vector, float] = {}
    for coords in grid_chunks([np.arange(c, dtype=np.int64)] * n):
        keys = np.stack([(-(a % c) * gi.evaluate_mod(coords, c)) % c for gi in grads], axis=1) if c > 1 \
            else np.zeros((coords[0].size, n), dtype=np.int64)
        for point, key in zip(zip(*coords), map(tuple, keys)):
            reduced = tuple(int(x) % d for x in point)
            if reduced not in cache:
                cache[reduced] = math.sqrt(M_d(g, d, reduced))
            profile[key] = profile.get(key, 0.0) + cache[reduced]
    return c, d, profile


def P_sum(g: IntPolynomial, q3: int, a: int, v: Sequence[int]) -> float:
    """
    𝒫(q₃, v) = Σ_{s mod c, c | a∇g(s) + v} M_d(s)^{1/2}

    Raises:
        ArithmeticPreconditionError: q₃ が立方因子的でない
        GuardError: q₃ または c^n がガードを超える
    """
    _check_vector(v, g.n_vars)
    c, _, profile = _cubefull_profile(g, q3, a)
    return profile.get(tuple(int(vi) % c for vi in v), 0.0)


def cubefull_envelope_scan(g: IntPolynomial, instances: Sequence[Dict[str, Any]],
                           sp_table: Optional[Dict[int, int]] = None,
                           slack: Optional[float] = None) -> Dict[str, Any]:
    """
    Σ_{|v−v₀|_∞ ≤ V} 𝒫(q₃, v) と 𝒟(d)·(V^n + (q₃H)^{n/3}) の比

    先頭の事例で定数 C を較正し、残りの事例で比 ≤ slack·C を確認する。
    instances の各要素は {"q3", "a", "v0", "V", "H"}。
    """
    from .local import D_weight

    slack = default_config()["tolerances"]["envelope_slack"] if slack is None else slack
    n = g.n_vars
    rows = []
    for inst in instances:
        q3, a, V, H = int(inst["q3"]), int(inst.get("a", 1)), int(inst["V"]), inst.get("H", 1)
        v0 = tuple(inst.get("v0", (0,) * n))
        c, d, profile = _cubefull_profile(g, q3, a)
        total = 0.0
        for offset in itertools.product(range(-V, V + 1), repeat=n):
            key = tuple((v0[i] + offset[i]) % c for i in range(n))
            total += profile.get(key, 0.0)
        table = {p: (sp_table or {}).get(p, -1) for p, _ in (factor(d) if d > 1 else ())}
        envelope = D_weight(d, table) * (V ** n + (q3 * float(H)) ** (n / 3))
        rows.append({"q3": q3, "V": V, "H": H, "sum": total, "envelope": envelope, "ratio": total / envelope})
    if not rows:
        raise ArithmeticPreconditionError("insufficient instances for envelope calibration")
    constant = rows[0]["ratio"]
    passed = all(row["ratio"] <= slack * constant + 1e-12 for row in rows[1:])
    logger.check_info(f"立方因子部分の包絡 (C={constant:.4f}, {len(rows)} 事例)", passed)
    return {"calibrated_constant": constant, "slack": slack, "rows": rows, "passed": passed}


def _hessian_kernel_masses(g: IntPolynomial, c: int, d: int) -> Tuple[float, float]:
    """(Σ_{s mod c} M_d(s)^{1/2}, Σ_{s mod c} M_d(s))"""
    cache: Dict[Vector, int] = {}
    root_sum = plain_sum = 0.0
    for s in itertools.product(range(c), repeat=g.n_vars):
        reduced = tuple(x % d for x in s)
        if reduced not in cache:
            cache[reduced] = M_d(g, d, reduced)
        root_sum += math.sqrt(cache[reduced])
        plain_sum += cache[reduced]
    return root_sum, plain_sum


@error_handler(severity=ErrorSeverity.LOW)
def restricted_average_check(g: IntPolynomial, q3: int, Phi: IntPolynomial, V: int, a: int = 1,
                             v0: Optional[Sequence[int]] = None, m: Optional[int] = None,
                             sp_table: Optional[Dict[int, int]] = None) -> Dict[str, Any]:
    """
    Φ(v) = 0（m を与えれば Φ(v) ≡ 0 mod m）に制限した Σ_{|v−v₀|_∞ ≤ V} 𝒫(q₃, v)

    q₃ = c²d として
      和 ≤ Σ_{s mod c} M_d(s)^{1/2}·max_r U_r(V)
      Σ_{s mod c} M_d(s)^{1/2} ≤ c^{n/2}·(Σ_{s mod c} M_d(s))^{1/2}
    をそのまま確認する。U_r(V) は箱の中で条件を満たし v ≡ r mod c となる v の個数。
    包絡 c^n·𝒟(d)^{1/2}·(1 + V/c)^{n−1}（m があれば 1 + (V/c)^{n−1} + (V/c)^n/m）との比も返す。

    Raises:
        PolynomialError: Φ が零、または変数の数が g と違う
        ArithmeticPreconditionError: q₃ が立方因子的でない、m が平方因子を持つ、
            gcd(m, c) ≠ 1 または gcd(m, content(Φ)) ≠ 1
    """
    from .local import D_weight

    n = g.n_vars
    if Phi.is_zero():
        raise PolynomialError("restriction polynomial must be nonzero")
    if Phi.n_vars != n:
        raise PolynomialError(f"dimension mismatch: Φ has {Phi.n_vars} variables, g has {n}")
    c, d, profile = _cubefull_profile(g, q3, a)
    if m is not None:
        if m < 1 or not is_squarefree(m) or math.gcd(m, c) != 1 or math.gcd(m, content(Phi)) != 1:
            raise ArithmeticPreconditionError(f"m={m} must be squarefree and coprime to c={c} and to content(Φ)")
    v0 = tuple(v0) if v0 is not None else (0,) * n
    _check_vector(v0, n)

    total = unrestricted = 0.0
    residue_counts: Dict[Vector, int] = {}
    axes = [np.arange(v0[i] - V, v0[i] + V + 1, dtype=np.int64) for i in range(n)]
    for coords in grid_chunks(axes):
        keep = Phi.evaluate_mod(coords, m) == 0 if m is not None else Phi.evaluate_int(coords) == 0
        for point, kept in zip(zip(*coords), keep):
            key = tuple(int(x) % c for x in point)
            weight = profile.get(key, 0.0)
            unrestricted += weight
            if kept:
                total += weight
                residue_counts[key] = residue_counts.get(key, 0) + 1

    root_sum, plain_sum = _hessian_kernel_masses(g, c, d)
    max_U = max(residue_counts.values(), default=0)
    dominated = total <= root_sum * max_U * (1 + 1e-12) + 1e-12
    cauchy_schwarz = root_sum <= c ** (n / 2) * math.sqrt(plain_sum) * (1 + 1e-12)

    table = {p: (sp_table or {}).get(p, -1) for p, _ in (factor(d) if d > 1 else ())}
    ratio_V = V / c
    shape = 1 + ratio_V ** (n - 1) + ratio_V ** n / m if m is not None else (1 + ratio_V) ** (n - 1)
    envelope = c ** n * math.sqrt(D_weight(d, table)) * shape
    passed = dominated and cauchy_schwarz
    logger.check_info(f"制限付き平均 q₃={q3}, V={V}: 比 {total / envelope:.4f}", passed)
    return {"q3": q3, "c": c, "d": d, "V": V, "m": m, "sum": total, "unrestricted_sum": unrestricted,
            "max_U": max_U, "kernel_root_sum": root_sum, "kernel_sum": plain_sum,
            "envelope": envelope, "ratio": total / envelope, "passed": bool(passed)}


# ---- 約数条件付きの和 ----

@error_handler(severity=ErrorSeverity.LOW)
def divisor_count_check(f: IntPolynomial, W: WeightSpec, P, m: int) -> Dict[str, Any]:
    """
    Σ_{m | f(x)} W(x/P) と P^n/m の比

    m が平方因子を持つ、または m の素因数 p で主形式が特異な場合は skip を返す。
    """
    n = f.n_vars
    report: Dict[str, Any] = {"m": m, "P": P, "n": n}
    if m < 1 or not is_squarefree(m):
        return {**report, "status": "skipped", "reason": f"m={m} is not squarefree"}
    form = leading_form(f)
    for p, _ in factor(m) if m > 1 else ():
        try:
            singular = sp_prime_bruteforce(form, None, p)
        except (GuardError, ArithmeticPreconditionError) as e:
            return {**report, "status": "skipped", "reason": f"cannot certify p={p}: {e.message}"}
        if singular != -1:
            return {**report, "status": "skipped", "reason": f"leading form singular mod {p} (s_p={singular})"}
    total = 0.0
    for coords, weights in lattice_chunks(W, P):
        divisible = f.evaluate_mod(coords, m) == 0 if m > 1 else np.ones(weights.shape, dtype=bool)
        total += float(np.sum(weights[divisible]))
    ratio = total * m / float(P) ** n
    return {**report, "status": "ok", "lhs": total, "ratio": ratio,
            "size_condition": float(P) >= m ** (0.5 + 1.0 / n)}


# ---- 小素数での特異点と上界 ----

def _dimension_from_cone(count: int, p: int) -> int:
    """アフィン錐の点数（原点を含む）から射影次元を推定。原点のみなら −1"""
    if count <= 1:
        return -1
    return int(round(math.log(count) / math.log(p))) - 1


def _finite_field_grid(n: int, p: int) -> List[np.ndarray]:
    if p > 31 or n > 4:
        raise ArithmeticPreconditionError(f"finite-field enumeration supports p ≤ 31 and n ≤ 4 (got p={p}, n={n})")
    check_guard(p ** n, get_guard("finite_field_points"), f"points of F_{p}^{n}")
    grid = np.meshgrid(*([np.arange(p, dtype=np.int64)] * n), indexing="ij")
    return [c.ravel() for c in grid]


def sp_prime_bruteforce(F0: IntPolynomial, G0: Optional[IntPolynomial], p: int) -> int:
    """
    p を法とした特異点集合の次元 s_p（G₀ があれば s_p′ = max{s_p(F₀), s_p(G₀), s_p(F₀,G₀)}）

    ヤコビ行列の階数落ち集合の 𝔽_p 点を全列挙し、アフィン錐の点数から次元を得る。
    空集合は −1。

    Raises:
        ArithmeticPreconditionError: p > 31 または n > 4
        GuardError: p^n がガードを超える
    """
    coords = _finite_field_grid(F0.n_vars, p)

    def single(form: IntPolynomial) -> Tuple[int, np.ndarray, List[np.ndarray]]:
        zero = form.evaluate_mod(coords, p) == 0
        grads = [gi.evaluate_mod(coords, p) for gi in gradient(form)]
        singular = zero.copy()
        for gi in grads:
            singular &= gi == 0
        return _dimension_from_cone(int(np.count_nonzero(singular)), p), zero, grads

    s_f, zero_f, grad_f = single(F0)
    if G0 is None:
        return s_f
    _check_same_space(F0, G0)
    s_g, zero_g, grad_g = single(G0)
    rank_deficient = zero_f & zero_g
    for i, j in itertools.combinations(range(F0.n_vars), 2):
        rank_deficient &= (grad_f[i] * grad_g[j] - grad_f[j] * grad_g[i]) % p == 0
    s_fg = _dimension_from_cone(int(np.count_nonzero(rank_deficient)), p)
    return max(s_f, s_g, s_fg)


def T_complete_table(p: int, f: IntPolynomial, g: IntPolynomial) -> np.ndarray:
    """全ての v mod p に対する T(p, v)（FFT、添字が v）"""
    coords = _finite_field_grid(f.n_vars, p)
    weights = (ramanujan_vector(p, (f + g).evaluate_mod(coords, p)) *
               ramanujan_vector(p, f.evaluate_mod(coords, p))).astype(float)
    return np.fft.ifftn(weights.reshape((p,) * f.n_vars)) * p ** f.n_vars


@error_handler(severity=ErrorSeverity.LOW)
def prime_bound_check(f: IntPolynomial, g: IntPolynomial, p: int,
                      v_sample: Optional[Sequence[Sequence[int]]] = None) -> Dict[str, Any]:
    """
    |T(p, v)| / p^{(n+3+s_p′)/2} の走査

    比の中央値の2倍を超える v を例外層、それ以外を一般層として各層の最大を報告する。
    前提（n ≤ 3, deg f = 4, deg g = 3, p ∤ content(主形式)）が崩れたら skip を返す。
    """
    n = f.n_vars
    report: Dict[str, Any] = {"p": p, "n": n}
    if n > 3 or f.degree != 4 or g.degree != 3 or p > 31:
        return {**report, "status": "skipped", "reason": "requires n ≤ 3, deg f = 4, deg g = 3, p ≤ 31"}
    if content(leading_form(f)) % p == 0:
        return {**report, "status": "skipped", "reason": f"leading form of f vanishes mod {p}"}
    s_prime = sp_prime_bruteforce(leading_form(f), leading_form(g), p)
    table = np.abs(T_complete_table(p, f, g))
    if v_sample is None:
        ratios = table.ravel()
        sample_size = table.size
    else:
        ratios = np.array([table[tuple(int(x) % p for x in v)] for v in v_sample])
        sample_size = len(v_sample)
    ratios = ratios / p ** ((n + 3 + s_prime) / 2)
    median = float(np.median(ratios))
    exceptional = ratios > 2 * median if median > 0 else ratios > 0
    generic = ratios[~exceptional]
    return {**report, "status": "ok", "s_prime": s_prime, "samples": sample_size,
            "max_ratio": float(np.max(ratios)),
            "generic_max": float(np.max(generic)) if generic.size else 0.0,
            "exceptional_max": float(np.max(ratios[exceptional])) if np.any(exceptional) else None,
            "exceptional_count": int(np.count_nonzero(exceptional))}


def n1_bound_check(f: IntPolynomial, g: IntPolynomial, primes: Sequence[int]) -> Dict[str, Any]:
    """n = 1 で |T(p,v)| / (p·(p, Res(f,g))) の最大（全ての v mod p）"""
    if f.n_vars != 1:
        raise PolynomialError("univariate polynomial required for the n = 1 bound")
    resultant = resultant_univariate(f, g)
    rows = []
    for p in primes:
        x = np.arange(p, dtype=np.int64)
        weights = (ramanujan_vector(p, (f + g).evaluate_mod([x], p)) *
                   ramanujan_vector(p, f.evaluate_mod([x], p))).astype(float)
        values = np.abs(np.fft.ifft(weights) * p)
        scale = p * math.gcd(p, resultant)
        rows.append({"p": p, "max_ratio": float(np.max(values)) / scale})
    constant = max(row["max_ratio"] for row in rows) if rows else 0.0
    logger.bound_info(f"n=1 の素数上界: 観測定数 {constant:.3f}")
    return {"resultant": resultant, "rows": rows, "observed_constant": constant}

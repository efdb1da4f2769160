"""
局所密度モジュール

特異級数 𝔖(R)（一般の列挙と対角形の高速経路）、収束診断、
特異積分 𝔈(R) の数値計算、重み 𝒟(q)、素因数の形ごとの個数評価を扱う。
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from common.config_loader import default_config, get_guard
from common.error_handler import ErrorSeverity, error_handler, get_error_handler
from common.exceptions import ArithmeticPreconditionError, PolynomialError, QuadratureError, check_guard
from common.logger import get_logger

from .arith import e_q_table, factor, is_squarefree, ramanujan_table, reduced_residues
from .poly import IntPolynomial
from .weights import GAMMA_PRODUCT, WeightSpec, converged, refine_midpoint, refine_tensor

logger = get_logger("LocalDensities")

GENERIC = "generic"
DIAGONAL_FAST = "diagonal-fast"
AUTO = "auto"
TWO_PI = 2.0 * math.pi
CHUNK_CELLS = 1 << 21


@dataclass
class SingularSeriesPartial:
    """𝔖(R) の部分和と各項"""

    R: int
    value: float
    terms: List[Tuple[int, float]] = field(default_factory=list)
    mode: str = GENERIC

    def to_dict(self) -> Dict[str, Any]:
        return {"R": self.R, "value": self.value, "mode": self.mode,
                "terms": [[q, t] for q, t in self.terms]}


@dataclass
class SingularIntegralPartial:
    """𝔈(R) の数値値"""

    R: float
    value: float
    method: str = "separable"

    def to_dict(self) -> Dict[str, Any]:
        return {"R": self.R, "value": self.value, "method": self.method}


# ---- 特異級数 ----

@functools.lru_cache(maxsize=8192)
def _power_residue_counts(q: int, degree: int) -> np.ndarray:
    """#{x mod q : x^degree ≡ k}, k = 0..q-1"""
    x = np.arange(q, dtype=np.int64)
    power = np.ones_like(x)
    for _ in range(degree):
        power = power * x % q
    return np.bincount(power, minlength=q)


@functools.lru_cache(maxsize=65536)
def diagonal_one_variable_sum(q: int, c: int, degree: int = 4) -> complex:
    """Σ_{x mod q} e_q(c·x^degree)（(q, c mod q) ごとにメモ化）"""
    counts = _power_residue_counts(q, degree)
    phases = (np.arange(q, dtype=np.int64) * (c % q)) % q
    return complex(np.dot(counts, e_q_table(q)[phases]))


def _diagonal_data(F: IntPolynomial) -> Tuple[Dict[int, int], int]:
    coeffs = F.diagonal_coefficients(F.degree)
    if coeffs is None:
        raise PolynomialError("diagonal form Σ c_i x_i^d required for the diagonal-fast path")
    multiplicity: Dict[int, int] = {}
    for c in coeffs:
        multiplicity[c] = multiplicity.get(c, 0) + 1
    return multiplicity, F.degree


def _term_diagonal(multiplicity: Mapping[int, int], degree: int, q: int) -> float:
    if q == 1:
        return 1.0
    total = 0j
    for a in reduced_residues(q):
        product = 1 + 0j
        for c, k in multiplicity.items():
            product *= (diagonal_one_variable_sum(q, a * c % q, degree) / q) ** k
        total += product
    return total.real


def _term_generic(F: IntPolynomial, q: int) -> Fraction:
    n = F.n_vars
    check_guard(q ** n, get_guard("complete_sum"), f"singular series term q={q}")
    if q == 1:
        return Fraction(1)
    from .expsums import residue_chunks

    counts = np.zeros(q, dtype=np.int64)
    for coords in residue_chunks(q, n):
        counts += np.bincount(F.evaluate_mod(coords, q), minlength=q)
    # Σ*_a Σ_x e_q(aF(x)) = Σ_k N(k)·c_q(k)
    return Fraction(int(np.dot(counts, ramanujan_table(q))), q ** n)


def _resolve_mode(F: IntPolynomial, mode: str) -> str:
    if mode == AUTO:
        return DIAGONAL_FAST if F.diagonal_coefficients(F.degree) is not None else GENERIC
    if mode not in (GENERIC, DIAGONAL_FAST):
        raise ArithmeticPreconditionError(f"unknown singular series mode: {mode}")
    return mode


def singular_series_term(F: IntPolynomial, q: int, mode: str = AUTO) -> float:
    """
    q 番目の項 q^{-n}·Σ*_{a mod q} Σ_{x mod q} e_q(aF(x))

    generic は値の分布と Ramanujan 和から厳密な有理数を求め、最後に一度だけ丸める。
    """
    mode = _resolve_mode(F, mode)
    if mode == DIAGONAL_FAST:
        multiplicity, degree = _diagonal_data(F)
        return _term_diagonal(multiplicity, degree, q)
    return float(_term_generic(F, q))


@error_handler(severity=ErrorSeverity.MEDIUM)
def singular_series(F: IntPolynomial, R: int, mode: str = AUTO) -> SingularSeriesPartial:
    """
    𝔖(R) = Σ_{q ≤ R} q^{-n}·Σ*_a Σ_{x mod q} e_q(aF(x))

    Raises:
        PolynomialError: 非対角形に diagonal-fast を指定
        GuardError: generic で q^n がガードを超える
    """
    mode = _resolve_mode(F, mode)
    terms = [(q, singular_series_term(F, q, mode)) for q in range(1, int(R) + 1)]
    value = math.fsum(t for _, t in terms)
    logger.sum_info(f"𝔖({R}) = {value:.12g} ({mode})")
    return SingularSeriesPartial(int(R), value, terms, mode)


@error_handler(severity=ErrorSeverity.LOW)
def series_convergence(F: IntPolynomial, ladder: Sequence[int]) -> Dict[str, Any]:
    """
    |𝔖(2R) − 𝔖(R)| ~ R^{−ψ̂} の最小二乗当てはめ

    差は部分和の引き算ではなく区間 (R, 2R] の項を直接足して求める。

    Raises:
        ArithmeticPreconditionError: ラダーが2点未満
    """
    ladder = sorted(int(R) for R in ladder)
    if len(ladder) < 2:
        raise ArithmeticPreconditionError(f"insufficient data: R-ladder needs at least 2 rungs, got {len(ladder)}")
    mode = _resolve_mode(F, AUTO)
    terms = {q: singular_series_term(F, q, mode) for q in range(1, 2 * ladder[-1] + 1)}

    rows = []
    for R in ladder:
        partial = math.fsum(terms[q] for q in range(1, R + 1))
        tail = math.fsum(terms[q] for q in range(R + 1, 2 * R + 1))
        rows.append({"R": R, "partial": partial, "dyadic_difference": abs(tail)})

    usable = [(r["R"], r["dyadic_difference"]) for r in rows if r["dyadic_difference"] > 0]
    if len(usable) >= 2:
        fit = stats.linregress(np.log([u[0] for u in usable]), np.log([u[1] for u in usable]))
        psi_hat = float(-fit.slope)
    else:
        # 区間和が厳密に 0 なら減衰は任意に速い
        psi_hat = math.inf
    differences = [r["dyadic_difference"] for r in rows]
    monotone = all(b <= a for a, b in zip(differences, differences[1:]))
    # 当てはめた減衰率が正なら (R, 2R] の寄与は 0 に近づく
    cauchy = psi_hat > 0
    passed = cauchy
    logger.check_info(f"特異級数の収束率 ψ̂ = {psi_hat:.3f}", passed)
    return {"ladder": ladder, "rows": rows, "psi_hat": psi_hat, "cauchy": cauchy, "monotone": monotone,
            "passed": passed}


def series_multiplicativity_check(F: IntPolynomial, q_max: int = 400, mode: str = AUTO) -> Dict[str, Any]:
    """互いに素な q = r·s ≤ q_max で term(rs) = term(r)·term(s)"""
    mode = _resolve_mode(F, mode)
    cache: Dict[int, float] = {}

    def term(q: int) -> float:
        if q not in cache:
            cache[q] = singular_series_term(F, q, mode)
        return cache[q]

    tolerance = default_config()["tolerances"]["multiplicativity"]
    worst = 0.0
    checked = 0
    for q in range(2, q_max + 1):
        exps = factor(q)
        if len(exps) < 2:
            continue
        r = exps[0][0] ** exps[0][1]
        s = q // r
        if mode == GENERIC and q ** F.n_vars > get_guard("multiplicativity"):
            continue
        error = abs(term(q) - term(r) * term(s))
        worst = max(worst, error / max(1.0, abs(term(q))))
        checked += 1
    passed = worst <= tolerance
    logger.check_info(f"特異級数の項の乗法性 ({checked} 組)", passed)
    return {"checked": checked, "max_error": worst, "passed": passed}


# ---- 特異積分 ----

def _value_bound(F: IntPolynomial, box: Sequence[Tuple[float, float]]) -> float:
    """台の上での |F| の粗い上界"""
    radius = [max(abs(lo), abs(hi)) for lo, hi in box]
    return sum(abs(c) * math.prod(r ** k for r, k in zip(radius, e)) for e, c in F.terms.items())


def _separable_integral(coeffs: Sequence[int], degree: int, W: WeightSpec, R: float,
                        tol: float) -> float:
    """
    対角形・積型重みでは ∫ω(x)e(zF(x))dx = ∏_i ∫γ_i(x)e(z c_i x^d)dx となり、
    𝔈(R) = 2·Re ∫_0^R ∏_i φ_i(z) dz を一次元の反復積分で求める
    """
    factors = W.coordinate_factors()
    box = [(lo, hi) for _, lo, hi in factors]
    amplitude = max(_value_bound(IntPolynomial.diagonal(coeffs, degree), box), 1e-12)
    width = max(hi - lo for lo, hi in box)
    radius = max(max(abs(lo), abs(hi)) for lo, hi in box)
    frequency = R * degree * max(abs(c) for c in coeffs) * radius ** (degree - 1)
    nodes = max(64, int(math.ceil(8 * frequency * width)))

    def outer(nodes_count: int) -> float:
        grids = []
        for (func, lo, hi), c in zip(factors, coeffs):
            h = (hi - lo) / nodes_count
            x = lo + (np.arange(nodes_count) + 0.5) * h
            grids.append((func(x) * h, c * x ** degree))

        def integrand(z: np.ndarray) -> np.ndarray:
            product = np.ones(z.shape, dtype=complex)
            rows = max(1, CHUNK_CELLS // nodes_count)
            for start in range(0, z.size, rows):
                block = z[start:start + rows]
                for weight, values in grids:
                    product[start:start + rows] *= np.exp(1j * TWO_PI * np.outer(block, values)) @ weight
            return product.real

        return 2.0 * refine_midpoint(integrand, 0.0, float(R), 1.0 / (8.0 * amplitude), tol=tol).real

    previous = outer(nodes)
    for _ in range(6):
        nodes *= 2
        current = outer(nodes)
        if converged(current, previous, tol):
            return current
        previous = current
    raise QuadratureError(f"separable singular integral did not converge at R={R} ({nodes} nodes)",
                          details={"R": R, "nodes": nodes, "last": previous})


def _generic_integral(F: IntPolynomial, W: WeightSpec, R: float, tol: float) -> float:
    """𝔈(R) = ∫ ω(x)·sin(2πR·F(x))/(πF(x)) dx（n ≤ 3 のテンソル積求積）"""
    if F.n_vars > 3:
        raise ArithmeticPreconditionError(f"generic singular integral supports n ≤ 3, got n={F.n_vars}")
    box = W.support_box()
    step = min(hi - lo for lo, hi in box) / 32

    def integrand(mesh: List[np.ndarray]) -> np.ndarray:
        values = F.evaluate(list(mesh))
        return W.eval_array(mesh) * 2.0 * R * np.sinc(2.0 * R * values)

    return refine_tensor(integrand, box, step, tol).real


@error_handler(severity=ErrorSeverity.MEDIUM)
def singular_integral(F: IntPolynomial, W: WeightSpec, R: float, tol: Optional[float] = None) -> SingularIntegralPartial:
    """
    𝔈(R) = ∫_{−R}^{R} ∫ ω(x) e(zF(x)) dx dz

    対角形なら座標ごとの一次元積分の積、そうでなければ z 積分を先に
    閉じた形 sin(2πRt)/(πt) にしてから x 積分する。

    収束しなければ tolerances.quadrature_retry まで緩めて一度だけ再計算する。

    Raises:
        QuadratureError: 緩めた許容誤差でも収束しない
    """
    tolerances = default_config()["tolerances"]
    tol = tolerances["quadrature"] if tol is None else tol
    if F.n_vars != W.n_vars:
        raise PolynomialError(f"dimension mismatch: F has {F.n_vars} variables, weight has {W.n_vars}")
    if R <= 0:
        return SingularIntegralPartial(float(R), 0.0, "empty")
    coeffs = F.diagonal_coefficients(F.degree)
    if coeffs is not None and W.kind == GAMMA_PRODUCT:
        method = "separable"

        def compute(tolerance: float) -> float:
            return _separable_integral(coeffs, F.degree, W, float(R), tolerance)
    else:
        method = "tensor"

        def compute(tolerance: float) -> float:
            return _generic_integral(F, W, float(R), tolerance)

    try:
        value = compute(tol)
    except QuadratureError as e:
        retry_tol = max(tol, tolerances.get("quadrature_retry", tol))
        value = get_error_handler().handle_error(
            e, ErrorSeverity.LOW, {"R": R, "tol": tol, "retry_tol": retry_tol, "method": method},
            fallback=lambda: compute(retry_tol))
        method += "-retry"
    logger.sum_info(f"𝔈({R}) = {value:.10g} ({method})")
    return SingularIntegralPartial(float(R), value, method)


# ---- 𝒟(q) と個数評価 ----

def D_weight(q: int, sp_table: Mapping[int, int]) -> float:
    """
    𝒟(q) = ∏_{p | b₁} p^{i/2}·∏_{p | q₂} p^{i}, i = s_p′ + 1

    Raises:
        ArithmeticPreconditionError: sp_table に q の素因数が無い
    """
    value = 1.0
    for p, e in factor(q):
        if p not in sp_table:
            raise ArithmeticPreconditionError(f"missing s_p' for prime {p} dividing q={q}")
        i = sp_table[p] + 1
        value *= p ** (i / 2) if e == 1 else p ** i
    return value


def _exact_power_shape(i: int, lo: int, hi: int) -> List[int]:
    """(lo, hi] 内の m^i（m は平方因子なし）"""
    out = []
    m = 1
    while m ** i <= hi:
        if m ** i > lo and is_squarefree(m):
            out.append(m ** i)
        m += 1
    return out


def _full_shape(ell: int, lo: int, hi: int) -> List[int]:
    """(lo, hi] 内の ℓ-full 数（全ての指数が ℓ 以上）"""
    return [x for x in range(lo + 1, hi + 1) if x == 1 or all(e >= ell for _, e in factor(x))]


def _count_coprime_tuples(candidates: Sequence[Sequence[int]]) -> int:
    def count(index: int, acc: int) -> int:
        if index == len(candidates):
            return 1
        return sum(count(index + 1, acc * x) for x in candidates[index] if math.gcd(x, acc) == 1)

    return count(0, 1)


@error_handler(severity=ErrorSeverity.LOW)
def lemma20_check(R_values: Sequence[float]) -> Dict[str, Any]:
    """
    形の決まった組 (b₁ ~ R₁, …, q_ℓ ~ R_ℓ) の個数と ∏ R_i^{1/i} の比

    i < ℓ の成分は i 乗のちょうどの積（b_i）、最後の成分は ℓ-full（ℓ = 1 なら平方因子なし）。
    各成分は (R_i, 2R_i] の整数で、組は互いに素なものを数える。

    Raises:
        ArithmeticPreconditionError: ℓ > 5
        GuardError: R_i が lemma20_range を超える
    """
    ell = len(R_values)
    if not 1 <= ell <= 5:
        raise ArithmeticPreconditionError(f"between 1 and 5 ranges supported, got {ell}")
    guard = get_guard("lemma20_range")
    candidates = []
    for i, R in enumerate(R_values, start=1):
        check_guard(int(math.ceil(R)), guard, f"range R_{i}")
        lo, hi = int(math.floor(R)), int(math.floor(2 * R))
        if i < ell or ell == 1:
            candidates.append(_exact_power_shape(i, lo, hi))
        else:
            candidates.append(_full_shape(ell, lo, hi))

    sizes = [len(c) for c in candidates]
    if math.prod(sizes) <= 10 ** 7:
        count, exact = _count_coprime_tuples(candidates), True
    else:
        count, exact = math.prod(sizes), False
    scale = math.prod(R ** (1.0 / i) for i, R in enumerate(R_values, start=1) if R > 0)
    ratio = count / scale if scale > 0 else float(count)
    logger.bound_info(f"形ごとの個数 {count}（∏R_i^(1/i) = {scale:.3f}, 比 {ratio:.3f}）")
    return {"R": list(R_values), "sizes": sizes, "count": count, "coprime_exact": exact,
            "scale": scale, "ratio": ratio}


def main_term(F: IntPolynomial, W: WeightSpec, P: float, R_series: int, R_integral: float,
              series: Optional[SingularSeriesPartial] = None,
              integral: Optional[SingularIntegralPartial] = None) -> float:
    """𝔖(R_series)·𝔈(R_integral)·P^{n − deg F}"""
    series = series or singular_series(F, R_series)
    integral = integral or singular_integral(F, W, R_integral)
    value = series.value * integral.value * float(P) ** (F.n_vars - F.degree)
    logger.info(f"📐 主要項 𝔖𝔈P^(n-d) = {value:.6g} (P={P})")
    return value

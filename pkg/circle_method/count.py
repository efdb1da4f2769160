"""
有理点の計数モジュール

射影的な個数 N(X, P)、重み付きの個数 N_W(F, P)、
対角形に対する半分割（meet-in-the-middle）の高速経路、
偶数次の対角形に現れる自明な解（項ごとの打ち消し）の厳密な個数を提供する。
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from common.config_loader import get_guard
from common.error_handler import ErrorSeverity, error_handler
from common.exceptions import ArithmeticPreconditionError, PolynomialError, check_guard
from common.logger import get_logger

from .arith import mobius
from .expsums import grid_chunks, lattice_chunks
from .poly import IntPolynomial
from .weights import WeightSpec

logger = get_logger("PointCount")

DIRECT = "direct"
MEET_IN_MIDDLE = "meet-in-middle"
AUTO = "auto"
INT64_SAFE = 2 ** 62


@dataclass
class CountResult:
    """高さ P 以下の点の個数"""

    P: int
    count: int
    method: str
    elapsed: float = 0.0
    trivial: Optional[int] = None

    @property
    def nontrivial(self) -> Optional[int]:
        return None if self.trivial is None else self.count - self.trivial

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "nontrivial": self.nontrivial}


def _box_axes(n: int, P: int) -> List[np.ndarray]:
    return [np.arange(-P, P + 1, dtype=np.int64)] * n


def count_affine(F: IntPolynomial, P: int) -> int:
    """
    #{x ∈ ℤ^n : F(x) = 0, max|x_i| ≤ P}（零ベクトルを含む）

    Raises:
        GuardError: (2P+1)^n が projective_enumeration を超える
    """
    check_guard((2 * P + 1) ** F.n_vars, get_guard("projective_enumeration"), "affine box")
    total = 0
    for coords in grid_chunks(_box_axes(F.n_vars, P)):
        total += int(np.count_nonzero(F.evaluate_int(coords) == 0))
    return total


def _count_primitive_direct(F: IntPolynomial, P: int) -> int:
    check_guard((2 * P + 1) ** F.n_vars, get_guard("projective_enumeration"), "projective box")
    total = 0
    for coords in grid_chunks(_box_axes(F.n_vars, P)):
        zero = F.evaluate_int(coords) == 0
        if not np.any(zero):
            continue
        points = np.stack([c[zero] for c in coords])
        total += int(np.count_nonzero(np.gcd.reduce(points, axis=0) == 1))
    return total


# ---- 半分割 ----

def _half_sums(coeffs: Sequence[int], degree: int, P: int) -> np.ndarray:
    """Σ_{i ∈ half} c_i x_i^d の全値（|x_i| ≤ P）"""
    x = np.arange(-P, P + 1, dtype=object if P ** degree >= INT64_SAFE else np.int64)
    sums = np.zeros(1, dtype=x.dtype)
    for c in coeffs:
        sums = np.add.outer(sums, c * x ** degree).reshape(-1)
    return sums


def _pair_count(left: np.ndarray, right: np.ndarray) -> int:
    """#{(a, b) : a + b = 0}"""
    if left.dtype == object or right.dtype == object:
        counts = Counter(left.tolist())
        return sum(counts.get(-b, 0) for b in right.tolist())
    lv, lc = np.unique(left, return_counts=True)
    rv, rc = np.unique(-right, return_counts=True)
    _, li, ri = np.intersect1d(lv, rv, assume_unique=True, return_indices=True)
    return int(np.dot(lc[li].astype(object), rc[ri].astype(object)))


def _resolve_split(n: int, split: Optional[Sequence[int]]) -> List[int]:
    first = list(range(n // 2)) if split is None else sorted(set(int(i) for i in split))
    if not first or len(first) >= n or first[0] < 0 or first[-1] >= n:
        raise ArithmeticPreconditionError(f"degenerate split {split!r} for {n} variables: both halves must be non-empty")
    return first


def _all_zeros_diagonal(coeffs: Sequence[int], degree: int, P: int, first: Sequence[int]) -> int:
    chosen = set(first)
    left = _half_sums([c for i, c in enumerate(coeffs) if i in chosen], degree, P)
    right = _half_sums([c for i, c in enumerate(coeffs) if i not in chosen], degree, P)
    magnitude = sum(abs(c) for c in coeffs) * P ** degree
    if magnitude >= INT64_SAFE:
        left, right = left.astype(object), right.astype(object)
    return _pair_count(left, right)


@error_handler(severity=ErrorSeverity.MEDIUM)
def meet_in_middle_diagonal(coeffs: Sequence[int], P: int, split: Optional[Sequence[int]] = None,
                            degree: int = 4) -> CountResult:
    """
    対角形 Σ c_i x_i^d の射影的な個数（半分割）

    半分の和の多重集合を突き合わせて全ての整数零点 N_all(P) を数え、
    N_prim(P) = Σ_d μ(d)·(N_all(⌊P/d⌋) − 1) で原始的な零点に直してから符号で割る。

    Args:
        coeffs: 係数 c_1..c_n
        P: 高さの上限
        split: 前半に入れる変数の添字（既定は前半 ⌊n/2⌋ 個）

    Raises:
        ArithmeticPreconditionError: 分割のどちらかが空
    """
    started = time.time()
    first = _resolve_split(len(coeffs), split)
    half = max(len(first), len(coeffs) - len(first))
    check_guard((2 * P + 1) ** half, get_guard("affine_enumeration"), "meet-in-middle half")

    by_height: Dict[int, int] = {}
    primitive = 0
    for d in range(1, P + 1):
        mu = mobius(d)
        if mu:
            m = P // d
            if m not in by_height:
                by_height[m] = _all_zeros_diagonal(coeffs, degree, m, first)
            primitive += mu * (by_height[m] - 1)
    result = CountResult(P, primitive // 2, MEET_IN_MIDDLE, time.time() - started)
    logger.sum_info(f"N(X,{P}) = {result.count}（半分割, {result.elapsed:.2f}s）")
    return result


# ---- 自明な解 ----

def _sign_classes(coeffs: Sequence[int]) -> List[Tuple[List[int], List[int]]]:
    """係数の絶対値ごとに (正の係数の添字, 負の係数の添字)"""
    classes: Dict[int, Tuple[List[int], List[int]]] = {}
    for i, c in enumerate(coeffs):
        if c:
            classes.setdefault(abs(c), ([], []))[0 if c > 0 else 1].append(i)
    return [classes[c] for c in sorted(classes)]


def _check_even_diagonal(coeffs: Optional[Sequence[int]], degree: int):
    if coeffs is None or degree % 2:
        raise PolynomialError("trivial solutions are defined for diagonal forms of even degree")
    if not all(coeffs):
        raise PolynomialError("trivial solutions need every variable to appear in the form")


def _class_count(plus: int, minus: int, P: int) -> int:
    """
    #{(x, y) ∈ [−P, P]^{plus} × [−P, P]^{minus} : x と y の非零な |·| の多重集合が一致}

    大きさ k の多重集合 M ごとの並べ方は plus!/((plus−k)!∏μ!) 通りで、
    Σ_M 1/∏μ!² は (Σ_j t^j/j!²)^P の t^k の係数になる。
    """
    K = min(plus, minus)
    base = [Fraction(1, math.factorial(j) ** 2) for j in range(K + 1)]
    power = [Fraction(1)] + [Fraction(0)] * K
    for _ in range(P):
        power = [sum(power[i] * base[k - i] for i in range(k + 1)) for k in range(K + 1)]
    total = sum(4 ** k * math.perm(plus, k) * math.perm(minus, k) * power[k] for k in range(K + 1))
    if total.denominator != 1:
        raise ArithmeticPreconditionError(f"non-integral trivial count {total} for ({plus}, {minus}, P={P})")
    return int(total)


def trivial_count_affine(coeffs: Sequence[int], P: int, degree: int = 4) -> int:
    """
    偶数次の対角形 Σ c_i x_i^d の自明な整数解の個数（|x_i| ≤ P、零ベクトルを含む）

    自明な解とは、係数の絶対値が等しい変数の組ごとに、正の側と負の側で
    非零な |x_i| の多重集合が一致し、項ごとに打ち消し合う解のこと。

    Raises:
        PolynomialError: 奇数次、または係数 0 を含む
    """
    _check_even_diagonal(coeffs, degree)
    return math.prod(_class_count(len(plus), len(minus), int(P)) for plus, minus in _sign_classes(coeffs))


def trivial_count_projective(coeffs: Sequence[int], P: int, degree: int = 4) -> int:
    """自明な解の射影的な個数（原始的な点を ±x で同一視）"""
    _check_even_diagonal(coeffs, degree)
    by_height: Dict[int, int] = {}
    primitive = 0
    for d in range(1, int(P) + 1):
        mu = mobius(d)
        if mu:
            m = int(P) // d
            if m not in by_height:
                by_height[m] = trivial_count_affine(coeffs, m, degree)
            primitive += mu * (by_height[m] - 1)
    return primitive // 2


def trivial_mask(coeffs: Sequence[int], coords: Sequence[np.ndarray]) -> np.ndarray:
    """各点が自明な解かどうか（F(x) = 0 は仮定しない）"""
    mask = np.ones(np.shape(coords[0]), dtype=bool)
    for plus, minus in _sign_classes(coeffs):
        width = max(len(plus), len(minus))
        zero = np.zeros(np.shape(coords[0]), dtype=np.int64)
        sides = []
        for indices in (plus, minus):
            values = [np.abs(coords[i]) for i in indices] + [zero] * (width - len(indices))
            sides.append(np.sort(np.stack(values), axis=0))
        mask &= np.all(sides[0] == sides[1], axis=0)
    return mask


def _has_trivial_family(F: IntPolynomial, coeffs: Optional[Sequence[int]]) -> bool:
    return coeffs is not None and F.degree % 2 == 0 and all(coeffs)


def _attach_trivial(F: IntPolynomial, coeffs: Optional[Sequence[int]], result: CountResult) -> CountResult:
    if _has_trivial_family(F, coeffs):
        result.trivial = trivial_count_projective(coeffs, result.P, F.degree)
    return result


@error_handler(severity=ErrorSeverity.MEDIUM)
def count_projective(F: IntPolynomial, P: int, method: str = AUTO) -> CountResult:
    """
    N(X, P) = #{x ∈ X(ℚ) : H(x) ≤ P}

    原始的な整数零点 x ≠ 0, max|x_i| ≤ P を数え、x と −x を同一視する。
    偶数次の対角形では自明な解の個数 trivial も厳密に求めて添える。

    Raises:
        PolynomialError: F が斉次でない、または半分割に非対角形を指定
        GuardError: 列挙の上限を超える
    """
    if not F.is_homogeneous() or F.is_zero():
        raise PolynomialError("projective counting needs a non-zero homogeneous form")
    coeffs = F.diagonal_coefficients(F.degree)
    if method == AUTO:
        method = MEET_IN_MIDDLE if coeffs is not None and F.n_vars >= 4 else DIRECT
    if method == MEET_IN_MIDDLE:
        if coeffs is None:
            raise PolynomialError("meet-in-middle counting needs a diagonal form")
        return _attach_trivial(F, coeffs, meet_in_middle_diagonal(coeffs, int(P), degree=F.degree))
    if method != DIRECT:
        raise ArithmeticPreconditionError(f"unknown counting method: {method}")

    started = time.time()
    primitive = _count_primitive_direct(F, int(P))
    result = CountResult(int(P), primitive // 2, DIRECT, time.time() - started)
    logger.sum_info(f"N(X,{P}) = {result.count}（直接列挙, {result.elapsed:.2f}s）")
    return _attach_trivial(F, coeffs, result)


@error_handler(severity=ErrorSeverity.MEDIUM)
def count_smoothed(F: IntPolynomial, W: WeightSpec, P, exclude_trivial: bool = False) -> float:
    """
    N_W(F, P) = Σ_{F(x)=0} W(x/P)

    exclude_trivial なら自明な解を和から除く。

    Raises:
        PolynomialError: exclude_trivial で F が偶数次の対角形でない
        GuardError: 台の上の格子点が affine_enumeration を超える
    """
    coeffs = F.diagonal_coefficients(F.degree)
    if exclude_trivial:
        _check_even_diagonal(coeffs, F.degree)
    total = 0.0
    for coords, weights in lattice_chunks(W, P):
        zero = F.evaluate_int(coords) == 0
        if exclude_trivial:
            zero &= ~trivial_mask(coeffs, coords)
        total += float(np.sum(weights[zero]))
    return total


@error_handler(severity=ErrorSeverity.LOW)
def growth_fit(F: IntPolynomial, ladder: Sequence[int], method: str = AUTO,
               show_progress: bool = False, exclude_trivial: bool = False) -> Dict[str, Any]:
    """
    log N(X, P) の log P に対する最小二乗の傾き

    exclude_trivial なら自明な解を除いた個数で当てはめる。全体の傾きも total_slope として残す。

    Raises:
        ArithmeticPreconditionError: 点が4未満、または個数 0 を含む
        PolynomialError: exclude_trivial で F が偶数次の対角形でない
    """
    ladder = sorted(int(P) for P in ladder)
    if len(ladder) < 4:
        raise ArithmeticPreconditionError(f"insufficient data: growth fit needs at least 4 P values, got {len(ladder)}")
    if exclude_trivial:
        _check_even_diagonal(F.diagonal_coefficients(F.degree), F.degree)
    rows = []
    for P in tqdm(ladder, desc="N(X,P)", disable=not show_progress, leave=False):
        result = count_projective(F, P, method)
        fitted = result.nontrivial if exclude_trivial else result.count
        if fitted == 0:
            raise ArithmeticPreconditionError(f"zero count at P={P}: log-log fit undefined")
        rows.append(result.to_dict())
    counts = [r["nontrivial"] if exclude_trivial else r["count"] for r in rows]
    fit = stats.linregress(np.log(ladder), np.log(counts))
    slope = fit.slope
    total_slope = stats.linregress(np.log(ladder), np.log([r["count"] for r in rows])).slope
    expected = F.n_vars - F.degree
    report = {
        "ladder": ladder, "rows": rows, "slope": float(slope), "intercept": float(fit.intercept),
        "stderr": float(fit.stderr), "r_squared": float(fit.rvalue ** 2),
        "expected_exponent": expected, "deviation": float(slope) - expected,
        "monotone": all(b >= a for a, b in zip(counts, counts[1:])),
        "exclude_trivial": exclude_trivial, "total_slope": float(total_slope),
    }
    logger.bound_info(f"成長率 {slope:.3f}（期待値 n−d = {expected}, 全体 {total_slope:.3f}）")
    return report

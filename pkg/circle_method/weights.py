"""
重み関数クラス

実非特異点 x₀ を中心とするバンプ ω(x) = ∏ γ(ρ^{-1}(x_j − x₀_j)) と、
差分重み W_h(y) = W(y + P^{-1}h)·W(y) を扱う。導関数の上界、
数値 Fourier 変換、共通の中点則求積（半分割による収束判定）を提供する。
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy

from common.config_loader import default_config, parse_rational
from common.error_handler import ErrorSeverity, error_handler
from common.exceptions import QuadratureError, WeightError
from common.logger import get_logger

logger = get_logger("Weights")

GAMMA_PRODUCT = "gamma-product"
DIFFERENCED = "differenced"
PROFILES = ("square", "abs")

BOUNDARY_CLAMP = 1e-12


# ---- 一変数バンプ γ ----

def _gamma_expression(profile: str) -> Tuple[sympy.Symbol, sympy.Expr]:
    t = sympy.Symbol("t", real=True)
    if profile == "square":
        return t, sympy.exp(-1 / (1 - t ** 2) ** 2)
    # abs プロファイルは t ≥ 0 側の式を用い、符号で折り返す
    return t, sympy.exp(-1 / (1 - t) ** 2)


@functools.lru_cache(maxsize=64)
def gamma_derivative(profile: str, order: int) -> Callable[[np.ndarray], np.ndarray]:
    """
    γ の order 階導関数（記号微分を一度だけ行い numpy 関数化）

    台の境界から 1e-12 以内と台の外では 0 を返す。
    """
    if profile not in PROFILES:
        raise WeightError(f"unknown gamma profile: {profile}")
    t, expr = _gamma_expression(profile)
    derivative = sympy.lambdify(t, sympy.diff(expr, t, order), "numpy")

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0 - BOUNDARY_CLAMP
        if not np.any(inside):
            return out
        xi = x[inside]
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            if profile == "square":
                values = derivative(xi)
            else:
                values = derivative(np.abs(xi)) * np.where(xi < 0, (-1.0) ** order, 1.0)
        out[inside] = np.nan_to_num(np.broadcast_to(values, xi.shape), nan=0.0, posinf=0.0, neginf=0.0)
        return out

    return evaluate


def gamma(x: np.ndarray, profile: str = "square") -> np.ndarray:
    return gamma_derivative(profile, 0)(x)


@functools.lru_cache(maxsize=64)
def gamma_derivative_sup(profile: str, order: int, grid_points: int = 4001) -> float:
    """sup |γ^{(order)}| の格子サンプリング値（安全係数なし）"""
    if order == 0:
        return math.exp(-1.0)
    grid = np.linspace(-1.0, 1.0, grid_points)
    return float(np.max(np.abs(gamma_derivative(profile, order)(grid))))


# ---- WeightSpec ----

@dataclass(frozen=True)
class WeightSpec:
    """
    重み関数の仕様

    kind が gamma-product のとき x0, rho が台を決め、
    differenced のとき base を shift/P だけずらした積になる。
    """

    n_vars: int
    x0: Tuple[Fraction, ...]
    rho: Fraction = Fraction(1, 4)
    kind: str = GAMMA_PRODUCT
    profile: str = "square"
    shift: Optional[Tuple[int, ...]] = None
    P: Optional[int] = None
    base: Optional["WeightSpec"] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.x0) != self.n_vars:
            raise WeightError(f"center length {len(self.x0)} does not match n_vars={self.n_vars}")
        if not 0 < self.rho <= 1:
            raise WeightError(f"rho must lie in (0, 1], got {self.rho}")
        if self.profile not in PROFILES:
            raise WeightError(f"unknown gamma profile: {self.profile}")
        if self.kind == DIFFERENCED:
            if self.shift is None or self.P is None or self.P < 1 or len(self.shift) != self.n_vars:
                raise WeightError("differenced weight needs shift of length n_vars and P ≥ 1")
        elif self.kind != GAMMA_PRODUCT:
            raise WeightError(f"unknown weight kind: {self.kind}")

    @classmethod
    def gamma_product(cls, x0: Sequence, rho=Fraction(1, 4), profile: str = "square") -> "WeightSpec":
        return cls(len(x0), tuple(Fraction(v) for v in x0), Fraction(rho), GAMMA_PRODUCT, profile)

    def differenced(self, shift: Sequence[int], P: int) -> "WeightSpec":
        """W_h(y) = W(y + P^{-1}h)·W(y)"""
        if self.kind != GAMMA_PRODUCT:
            raise WeightError("only gamma-product weights can be differenced")
        return WeightSpec(self.n_vars, self.x0, self.rho, DIFFERENCED, self.profile,
                          tuple(int(s) for s in shift), int(P), base=self)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "WeightSpec":
        """{"kind", "x0", "rho": "p/q", "shift", "P", "profile"} 形式から構築"""
        try:
            kind = data.get("kind", GAMMA_PRODUCT)
            x0 = [parse_rational(v, "x0") for v in data["x0"]]
            rho = parse_rational(data.get("rho", default_config()["weights"]["rho"]), "rho")
            profile = data.get("profile", default_config()["weights"]["profile"])
        except (KeyError, TypeError) as e:
            raise WeightError(f"malformed weight JSON: {data!r}") from e
        base = cls.gamma_product(x0, rho, profile)
        if kind == GAMMA_PRODUCT:
            return base
        if kind == DIFFERENCED:
            return base.differenced(data["shift"], data["P"])
        raise WeightError(f"unknown weight kind: {kind}")

    def to_json(self) -> Dict[str, Any]:
        data = {"kind": self.kind, "x0": [str(v) for v in self.x0], "rho": str(self.rho), "profile": self.profile}
        if self.kind == DIFFERENCED:
            data["shift"] = list(self.shift)
            data["P"] = self.P
        return data

    # ---- 座標分解 ----

    def coordinate_factors(self) -> List[Tuple[Callable[[np.ndarray], np.ndarray], float, float]]:
        """
        ω は座標ごとの積。各座標の (一変数関数, 台の下端, 上端) を返す
        """
        factors = []
        g = gamma_derivative(self.profile, 0)
        rho = float(self.rho)
        for i in range(self.n_vars):
            c = float(self.x0[i])
            if self.kind == GAMMA_PRODUCT:
                factors.append(((lambda x, c=c: g((x - c) / rho)), c - rho, c + rho))
            else:
                s = self.shift[i] / self.P
                lo, hi = max(c - rho, c - s - rho), min(c + rho, c - s + rho)
                factors.append(((lambda x, c=c, s=s: g((x + s - c) / rho) * g((x - c) / rho)), lo, max(lo, hi)))
        return factors

    def support_box(self) -> List[Tuple[float, float]]:
        return [(lo, hi) for _, lo, hi in self.coordinate_factors()]

    def eval_array(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """格子（ブロードキャスト可能な座標配列）上での値"""
        if len(coords) != self.n_vars:
            raise WeightError(f"coordinate length {len(coords)} does not match n_vars={self.n_vars}")
        value = None
        for (func, _, _), x in zip(self.coordinate_factors(), coords):
            factor = func(np.asarray(x, dtype=float))
            value = factor if value is None else value * factor
        return value


def eval(w: WeightSpec, x: Sequence[float]) -> float:  # noqa: A001
    """
    重みの値 w(x)（台の外では 0）

    Args:
        w: 重み仕様
        x: 点（実数・有理数の列）
    """
    if len(x) != w.n_vars:
        raise WeightError(f"point length {len(x)} does not match n_vars={w.n_vars}")
    return float(w.eval_array([np.array([float(v)]) for v in x])[0])


@error_handler(severity=ErrorSeverity.LOW)
def derivative_bound(w: WeightSpec, j: int, max_order: Optional[int] = None,
                     safety_factor: Optional[Fraction] = None) -> float:
    """
    全階数 j の混合偏導関数の上界 c_j

    ω の混合偏導関数は座標ごとの γ^{(j_i)} の積なので、
    j の合成 (j_1..j_n) について ∏ sup|γ^{(j_i)}|·ρ^{-j} の最大を DP で求める。
    差分重みは Leibniz 則で d_k = Σ_b C(k,b) c_b c_{k−b} を用いる。
    j ≥ 1 では格子サンプリング値に安全係数を掛ける。

    Raises:
        WeightError: j が設定上限を超える
    """
    settings = default_config()["weights"]
    max_order = settings["max_order"] if max_order is None else max_order
    if j < 0 or j > max_order:
        raise WeightError(f"derivative order {j} beyond configured max order {max_order}")
    factor = float(parse_rational(settings["safety_factor"])) if safety_factor is None else float(safety_factor)
    grid_points = settings["bound_grid_points"]

    sup = [gamma_derivative_sup(w.profile, k, grid_points) for k in range(j + 1)]
    if w.kind == DIFFERENCED:
        per_coord = [sum(math.comb(k, b) * sup[b] * sup[k - b] for b in range(k + 1)) for k in range(j + 1)]
    else:
        per_coord = sup

    best = [per_coord[m] for m in range(j + 1)]
    for _ in range(1, w.n_vars):
        best = [max(best[m - k] * per_coord[k] for k in range(m + 1)) for m in range(j + 1)]

    bound = best[j] * float(w.rho) ** (-j)
    if j >= 1:
        bound *= factor
    return bound


# ---- 求積 ----

ROUNDOFF = 64 * float(np.finfo(float).eps)
TINY = float(np.finfo(float).tiny)


def converged(current: complex, previous: complex, tol: float, mass: float = 0.0) -> bool:
    """
    相対誤差 |current − previous| < tol·|current| による収束判定

    mass（∫|f| の近似）を渡すと、打ち消し合いで値が丸め誤差の水準まで
    小さくなった場合はその水準を尺度に使う。
    """
    scale = max(abs(current), ROUNDOFF * mass, TINY)
    return abs(current - previous) < tol * scale


def _midpoint_sums(func: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                   step: float) -> Tuple[complex, float]:
    count = max(1, int(math.ceil((b - a) / step)))
    h = (b - a) / count
    values = func(a + (np.arange(count) + 0.5) * h)
    return complex(np.sum(values) * h), float(np.sum(np.abs(values)) * h)


def midpoint_rule(func: Callable[[np.ndarray], np.ndarray], a: float, b: float, step: float) -> complex:
    """一様格子の中点則（格子は (a, b, step) から決定的に決まる）"""
    if b <= a:
        return 0.0
    return _midpoint_sums(func, a, b, step)[0]


def refine_midpoint(func: Callable[[np.ndarray], np.ndarray], a: float, b: float, step: float,
                    tol: Optional[float] = None, max_halvings: Optional[int] = None,
                    floor_step: float = 0.0) -> complex:
    """
    刻み幅を半分にしながら中点則を繰り返し、相対差が tol 未満になった値を返す

    Raises:
        QuadratureError: max_halvings 回以内に収束しない
    """
    tol = default_config()["tolerances"]["quadrature"] if tol is None else tol
    max_halvings = default_config()["delta"]["max_halvings"] if max_halvings is None else max_halvings
    if b <= a:
        return 0.0
    previous, _ = _midpoint_sums(func, a, b, step)
    for _ in range(max_halvings):
        step /= 2
        if step < floor_step:
            break
        current, mass = _midpoint_sums(func, a, b, step)
        if converged(current, previous, tol, mass):
            return current
        previous = current
    raise QuadratureError(f"midpoint refinement did not converge on [{a}, {b}] (last step {step:.3e})",
                          details={"a": a, "b": b, "step": step})


def tensor_midpoint(func: Callable[[List[np.ndarray]], np.ndarray], box: Sequence[Tuple[float, float]],
                    step: float) -> complex:
    """多次元の中点則（座標ごとの格子のテンソル積）"""
    return _tensor_sums(func, box, step)[0]


def _tensor_sums(func: Callable[[List[np.ndarray]], np.ndarray], box: Sequence[Tuple[float, float]],
                 step: float) -> Tuple[complex, float]:
    axes = []
    volume = 1.0
    for lo, hi in box:
        if hi <= lo:
            return 0.0, 0.0
        count = max(1, int(math.ceil((hi - lo) / step)))
        h = (hi - lo) / count
        axes.append(lo + (np.arange(count) + 0.5) * h)
        volume *= h
    values = func(np.meshgrid(*axes, indexing="ij"))
    return complex(np.sum(values) * volume), float(np.sum(np.abs(values)) * volume)


def refine_tensor(func: Callable[[List[np.ndarray]], np.ndarray], box: Sequence[Tuple[float, float]],
                  step: float, tol: float, max_halvings: int = 6) -> complex:
    previous, _ = _tensor_sums(func, box, step)
    for _ in range(max_halvings):
        step /= 2
        current, mass = _tensor_sums(func, box, step)
        if converged(current, previous, tol, mass):
            return current
        previous = current
    raise QuadratureError(f"tensor quadrature did not converge (last step {step:.3e})",
                          details={"step": step})


@error_handler(severity=ErrorSeverity.MEDIUM)
def fourier(w: WeightSpec, t: Sequence[float], quad_step: float = 1 / 64,
            tol: Optional[float] = None) -> complex:
    """
    ŵ(t) = ∫ w(x) e(−t·x) dx

    w は座標ごとの積なので、一変数積分の積（テンソル積求積）として計算する。
    """
    if len(t) != w.n_vars:
        raise WeightError(f"frequency length {len(t)} does not match n_vars={w.n_vars}")
    value = 1.0 + 0.0j
    for (func, lo, hi), ti in zip(w.coordinate_factors(), t):
        ti = float(ti)
        integrand = (lambda x, func=func, ti=ti: func(x) * np.exp(-2j * math.pi * ti * x))
        value *= refine_midpoint(integrand, lo, hi, quad_step, tol=tol)
    return value


def mass(w: WeightSpec, quad_step: float = 1 / 64) -> float:
    """∫ w"""
    return fourier(w, [0.0] * w.n_vars, quad_step).real


def fourier_decay_profile(w: WeightSpec, k: int, t_values: Sequence[float], axis: int = 0) -> np.ndarray:
    """|ŵ(t e_axis)|·(1+|t|)^k の走査値"""
    out = []
    for t in t_values:
        vector = [0.0] * w.n_vars
        vector[axis] = t
        out.append(abs(fourier(w, vector)) * (1 + abs(t)) ** k)
    return np.array(out)

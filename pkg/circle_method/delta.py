"""
デルタ記号モジュール

Heath-Brown 型の核 h(x, y)、平坦なバンプ U、弧の重み p_q(z)、
近似 δ₀(n) と計数恒等式 N_W(F, P) = Σ_q ∫ p_q(z) S(q, z) dz の数値検証を扱う。
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from common.config_loader import default_config, get_guard, parse_rational
from common.error_handler import ErrorSeverity, error_handler
from common.exceptions import ArithmeticPreconditionError, ConfigError, QuadratureError, check_guard
from common.logger import get_logger

from .arith import e_q_table, ramanujan_vector, reduced_residues
from .poly import IntPolynomial
from .weights import WeightSpec, refine_midpoint

logger = get_logger("DeltaSymbol")

W0_PROFILES = ("standard", "square", "kaiser")
KAISER_BETA = 4
KAISER_TAPER = sympy.Rational(1, 4)
C_Q_MODES = ("exact", "unit")
CHUNK_CELLS = 1 << 21
TINY = float(np.finfo(float).tiny)


# ---- 一変数バンプ ----

@functools.lru_cache(maxsize=8)
def _bump(profile: str, order: int) -> Callable[[np.ndarray], np.ndarray]:
    """(−1, 1) 上の正規化前のバンプとその導関数"""
    if profile not in W0_PROFILES:
        raise ConfigError(f"unknown w0 profile: {profile}", config_key="delta.w0_profile")
    u = sympy.Symbol("u", real=True)
    if profile == "kaiser":
        expr = sympy.exp(KAISER_BETA * (sympy.sqrt(1 - u ** 2) - 1) - KAISER_TAPER * u ** 2 / (1 - u ** 2))
    else:
        power = 1 if profile == "standard" else 2
        expr = sympy.exp(-1 / (1 - u ** 2) ** power)
    derivative = sympy.lambdify(u, sympy.diff(expr, u, order), "numpy")

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0 - 1e-12
        if np.any(inside):
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                values = np.broadcast_to(derivative(x[inside]), x[inside].shape)
            out[inside] = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
        return out

    return evaluate


@functools.lru_cache(maxsize=8)
def _bump_mass(profile: str) -> float:
    return refine_midpoint(_bump(profile, 0), -1.0, 1.0, 1 / 256, tol=1e-12).real


class W0Bump:
    """
    [s0, s1] に台を持ち ∫ w0 = 1 となる滑らかなバンプ

    Args:
        support: 台の端点 (s0, s1)、0 < s0 < s1
        profile: standard は exp(−1/(1−u²))、square は exp(−1/(1−u²)²)、
            kaiser は exp(β(√(1−u²) − 1) − τu²/(1−u²))（β = 4, τ = 1/4）

    kaiser は Fourier 変換が低周波に集まり、遠方の減衰も速い。h(x, y) の
    Riemann 和の誤差は ŵ0(1/x) で決まるので、既定はこちらを使う。
    """

    def __init__(self, support: Tuple[float, float] = (0.5, 1.0), profile: str = "standard"):
        self.s0, self.s1 = float(support[0]), float(support[1])
        if not 0 < self.s0 < self.s1:
            raise ConfigError(f"w0 support must satisfy 0 < s0 < s1: {support}", config_key="delta.w0_support")
        self.profile = profile
        self._half_width = (self.s1 - self.s0) / 2
        self._center = (self.s0 + self.s1) / 2
        self._scale = 1.0 / (_bump_mass(profile) * self._half_width)

    def _u(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self._center) / self._half_width

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _bump(self.profile, 0)(self._u(x)) * self._scale

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return _bump(self.profile, 1)(self._u(x)) * self._scale / self._half_width


class FlatBump:
    """
    (−1/2, 1/2) に台を持つ U(y) = exp(1 − 1/(1 − u^{2m}))·(1 + κu^{2m}), u = 2y

    U(0) = 1 で、κ は ∫U = 1 となるよう求積で決める。m が大きいほど原点付近は
    平坦になるが端が急になり、Û(t) の減衰が遅くなる（既定設定は m = 1）。
    """

    def __init__(self, flatness: int = 1):
        if flatness < 1:
            raise ConfigError(f"u_flatness must be a positive integer: {flatness}", config_key="delta.u_flatness")
        self.m = int(flatness)
        base = refine_midpoint(lambda y: self._base(y), -0.5, 0.5, 1 / 256, tol=1e-12).real
        moment = refine_midpoint(lambda y: self._base(y) * (2 * y) ** (2 * self.m), -0.5, 0.5, 1 / 256,
                                 tol=1e-12).real
        self.kappa = (1.0 - base) / moment

    def _base(self, y: np.ndarray) -> np.ndarray:
        u = 2.0 * np.asarray(y, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0 - 1e-12
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** (2 * self.m)))
        return out

    def __call__(self, y: np.ndarray) -> np.ndarray:
        u = 2.0 * np.asarray(y, dtype=float)
        return self._base(y) * (1.0 + self.kappa * u ** (2 * self.m))


# ---- 列ごとの中点則 ----

def _midpoint_columns(weight: Callable[[np.ndarray], np.ndarray],
                      kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      columns: np.ndarray, a: float, b: float, step: float) -> np.ndarray:
    """∫_a^b weight(u)·kernel(u, c) du を列 c ごとに（中点則）"""
    count = max(1, int(math.ceil((b - a) / step)))
    h = (b - a) / count
    nodes = a + (np.arange(count) + 0.5) * h
    w = weight(nodes) * h
    keep = w != 0
    nodes, w = nodes[keep], w[keep]
    out = np.zeros(columns.shape, dtype=float)
    if nodes.size == 0:
        return out
    rows = max(1, CHUNK_CELLS // nodes.size)
    for start in range(0, columns.size, rows):
        block = columns[start:start + rows]
        out[start:start + rows] = kernel(nodes[None, :], block[:, None]) @ w
    return out


def _refine_columns(weight, kernel, columns: np.ndarray, a: float, b: float, step: float,
                    tol: float, floor_step: float, max_halvings: int) -> np.ndarray:
    previous = _midpoint_columns(weight, kernel, columns, a, b, step)
    for _ in range(max_halvings):
        step /= 2
        if step < floor_step:
            break
        current = _midpoint_columns(weight, kernel, columns, a, b, step)
        scale = max(float(np.max(np.abs(current), initial=0.0)), TINY)
        if np.max(np.abs(current - previous), initial=0.0) < tol * scale:
            return current
        previous = current
    raise QuadratureError(f"column quadrature did not converge on [{a}, {b}] (last step {step:.3e})",
                          details={"a": a, "b": b, "step": step})


# ---- 核 h（Q に依存しない） ----

class HeathBrownKernel:
    """
    h(x, y) = Σ_{j ≥ 1} (xj)^{-1}·[w0(xj) − w0(|y|/(xj))]

    w0 の台が [s0, s1] のとき、h(x, y) ≠ 0 となるのは x ≤ max{s1, |y|/s0} の場合だけ。
    """

    def __init__(self, w0: W0Bump):
        self.w0 = w0

    def h(self, x: float, y: np.ndarray) -> np.ndarray:
        if x <= 0:
            raise ArithmeticPreconditionError(f"h(x, y) needs x > 0, got {x}")
        y = np.abs(np.asarray(y, dtype=float))
        first_j = np.arange(1, int(self.w0.s1 / x) + 1)
        first = float(np.sum(self.w0(x * first_j) / (x * first_j))) if first_j.size else 0.0
        top = int(math.ceil(float(np.max(y, initial=0.0)) / (self.w0.s0 * x))) + 1
        j = np.arange(1, top + 1, dtype=float)
        second = np.zeros_like(y)
        rows = max(1, CHUNK_CELLS // j.size)
        flat = y.reshape(-1)
        out = second.reshape(-1)
        for start in range(0, flat.size, rows):
            block = flat[start:start + rows, None]
            out[start:start + rows] = np.sum(self.w0(block / (x * j)) / (x * j), axis=1)
        return first - second

    def h_dy(self, x: float, y: np.ndarray) -> np.ndarray:
        """∂_y h(x, y) = −sign(y)·Σ_j (xj)^{-2}·w0′(|y|/(xj))"""
        if x <= 0:
            raise ArithmeticPreconditionError(f"h(x, y) needs x > 0, got {x}")
        y = np.asarray(y, dtype=float)
        top = int(math.ceil(float(np.max(np.abs(y), initial=0.0)) / (self.w0.s0 * x))) + 1
        j = np.arange(1, top + 1, dtype=float)
        terms = self.w0.derivative(np.abs(y)[..., None] / (x * j)) / (x * j) ** 2
        return -np.sign(y) * np.sum(terms, axis=-1)


def _w0_from_config(profile: Optional[str] = None) -> W0Bump:
    settings = default_config()["delta"]
    support = tuple(float(parse_rational(s, "delta.w0_support")) for s in settings["w0_support"])
    return W0Bump(support, profile or settings.get("w0_profile", "kaiser"))


@functools.lru_cache(maxsize=4)
def default_h_kernel() -> HeathBrownKernel:
    """既定設定の w0 による h（h_eval の既定）"""
    return HeathBrownKernel(_w0_from_config())


# ---- DeltaKernel ----

@dataclass
class DeltaKernel:
    """
    δ₀(n) = Σ_{q ≤ Q} Σ*_a ∫_{|z| < (qQ)^{−1+θ}} p_q(z) e((a/q + z)n) dz の構成要素

    Attributes:
        Q: 法の上限（実数 ≥ 1、q は 1..⌊Q⌋ を動く）
        theta: 弧の幅の指数 (0, 1)
    """

    Q: float
    theta: float = 0.5
    w0_profile: Optional[str] = None
    u_flatness: Optional[int] = None
    c_q_mode: Optional[str] = None
    tol: Optional[float] = None

    def __post_init__(self):
        settings = default_config()["delta"]
        if self.Q < 1:
            raise ArithmeticPreconditionError(f"Q must be at least 1, got {self.Q}")
        if not 0 < self.theta < 1:
            raise ArithmeticPreconditionError(f"theta must lie in (0, 1), got {self.theta}")
        self.w0_profile = self.w0_profile or settings.get("w0_profile", "kaiser")
        self.u_flatness = self.u_flatness or settings.get("u_flatness", 1)
        self.c_q_mode = self.c_q_mode or settings.get("c_q", "exact")
        if self.c_q_mode not in C_Q_MODES:
            raise ConfigError(f"unknown c_q mode: {self.c_q_mode}", config_key="delta.c_q")
        self.tol = default_config()["tolerances"]["quadrature"] if self.tol is None else self.tol
        self.floor_factor = float(settings["z_floor_factor"])
        self.max_halvings = int(settings["max_halvings"])
        self.logger = get_logger("DeltaKernel")
        self.w0 = _w0_from_config(self.w0_profile)
        self.heath_brown = HeathBrownKernel(self.w0)
        self.U = FlatBump(self.u_flatness)
        self.q_max = int(math.floor(self.Q))
        self.c_Q = self._normalizer()
        self.logger.debug(f"DeltaKernel Q={self.Q} θ={self.theta} c_Q={self.c_Q:.12f} κ={self.U.kappa:.6f}")

    def _normalizer(self) -> float:
        """c_Q^{-1} = Q^{-1}·Σ_{m ≥ 1} w0(m/Q)（n = 0 で恒等式が厳密になる定数）"""
        if self.c_q_mode == "unit":
            return 1.0
        m = np.arange(1, int(math.ceil(self.w0.s1 * self.Q)) + 1)
        total = float(np.sum(self.w0(m / self.Q))) / self.Q
        if total <= 0:
            # Q < 2 では格子点が w0 の台の内部に入らない
            self.logger.warning(f"Q={self.Q} では Σ w0(m/Q) = 0 のため c_Q = 1 とする")
            return 1.0
        return 1.0 / total

    def h(self, x: float, y: np.ndarray) -> np.ndarray:
        return self.heath_brown.h(x, y)

    def h_dy(self, x: float, y: np.ndarray) -> np.ndarray:
        return self.heath_brown.h_dy(x, y)

    def g(self, q: int, u: np.ndarray) -> np.ndarray:
        """g_q(u) = h(q/Q, u)·U(u)"""
        u = np.asarray(u, dtype=float)
        weight = self.U(u)
        out = np.zeros_like(u)
        live = weight != 0
        if np.any(live):
            out[live] = self.h(q / self.Q, u[live]) * weight[live]
        return out

    def _base_step(self, q: int, T: float = 0.0) -> float:
        step = min(q / self.Q / 32, 1 / 64)
        return min(step, 1 / (16 * T)) if T > 0 else step

    def _check_q(self, q: int):
        if not 1 <= q <= self.q_max:
            raise ArithmeticPreconditionError(f"q must satisfy 1 ≤ q ≤ Q={self.Q}, got {q}")

    # ---- p_q ----

    def p(self, q: int, z: Sequence[float]) -> np.ndarray:
        """p_q(z) = c_Q·∫ g_q(y)·e(−Q²zy) dy（g_q は y について偶関数）"""
        self._check_q(q)
        t = self.Q ** 2 * np.atleast_1d(np.asarray(z, dtype=float))
        values = _refine_columns(
            lambda u: self.g(q, u),
            lambda u, tt: np.cos(2 * math.pi * tt * u),
            t, -0.5, 0.5, min(self._base_step(q), 1 / (16 * (1 + float(np.max(np.abs(t)))))),
            self.tol, self.floor_factor / (q * self.Q), self.max_halvings,
        )
        return self.c_Q * values

    def arc_half_width(self, q: int) -> float:
        """(qQ)^{−1+θ}"""
        return (q * self.Q) ** (-1.0 + self.theta)

    # ---- δ₀ の近似 ----

    def delta_values(self, n_values: Sequence[int]) -> np.ndarray:
        """
        各 n について Σ_q c_q(n)·∫_{|z|<(qQ)^{−1+θ}} p_q(z)e(zn) dz

        z 積分を先に閉じて c_Q·Q^{-2}·∫ g_q(u)·2T sinc(2T(n/Q² − u)) du
        （T = Q²(qQ)^{−1+θ}）を u の中点則で求める。
        """
        n = np.asarray(n_values, dtype=np.int64)
        s = n.astype(float) / self.Q ** 2
        total = np.zeros(n.shape, dtype=float)
        for q in range(1, self.q_max + 1):
            c = ramanujan_vector(q, n)
            if not np.any(c):
                continue
            T = self.Q ** 2 * self.arc_half_width(q)
            integral = _refine_columns(
                lambda u, q=q: self.g(q, u),
                lambda u, ss, T=T: 2 * T * np.sinc(2 * T * (ss - u)),
                s, -0.5, 0.5, self._base_step(q, T),
                self.tol, self.floor_factor / (q * self.Q), self.max_halvings,
            )
            total += c * integral
        return self.c_Q / self.Q ** 2 * total


@functools.lru_cache(maxsize=32)
def _cached_kernel(Q: float, theta: float) -> DeltaKernel:
    return DeltaKernel(Q, theta)


def make_kernel(Q: float, theta: float = 0.5) -> DeltaKernel:
    """既定設定の DeltaKernel（(Q, θ) ごとに一度だけ構築）"""
    return _cached_kernel(float(Q), float(theta))


# ---- 公開操作 ----

def h_eval(x: float, y: float, kernel: Optional[Union[DeltaKernel, HeathBrownKernel]] = None) -> float:
    """
    核の値 h(x, y)

    x > max{1, 2|y|} では 0。

    Raises:
        ArithmeticPreconditionError: x ≤ 0
    """
    kernel = kernel or default_h_kernel()
    return float(kernel.h(float(x), np.array([float(y)]))[0])


def h_dy_eval(x: float, y: float, kernel: Optional[Union[DeltaKernel, HeathBrownKernel]] = None) -> float:
    kernel = kernel or default_h_kernel()
    return float(kernel.h_dy(float(x), np.array([float(y)]))[0])


@error_handler(severity=ErrorSeverity.MEDIUM)
def p_q(kernel: DeltaKernel, q: int, z: float) -> float:
    """
    弧の重み p_q(z)

    Raises:
        ArithmeticPreconditionError: q が 1..Q の外
        QuadratureError: 細分化で収束しない
    """
    return float(kernel.p(q, [z])[0])


def delta_approx(kernel: DeltaKernel, n: int) -> float:
    """δ₀(n) の近似値"""
    return float(kernel.delta_values([int(n)])[0])


@error_handler(severity=ErrorSeverity.MEDIUM)
def delta_table(kernel: DeltaKernel, n_values: Sequence[int]) -> np.ndarray:
    """複数の n に対する delta_approx（q ごとの求積を共有）"""
    return kernel.delta_values(n_values)


@error_handler(severity=ErrorSeverity.MEDIUM)
def verify_delta(Q: float, theta: float = 0.5, n_max: Optional[int] = None) -> Dict[str, Any]:
    """
    |n| ≤ n_max（既定 Q²）の全 n について delta_approx(n) − δ₀(n) を測る
    """
    kernel = make_kernel(Q, theta)
    n_max = int(math.floor(Q ** 2)) if n_max is None else int(n_max)
    n = np.arange(-n_max, n_max + 1)
    values = kernel.delta_values(n)
    errors = values - (n == 0)
    worst = int(np.argmax(np.abs(errors)))
    logger.check_info(f"δ₀ 近似 Q={Q}: 最大誤差 {abs(errors[worst]):.3e} (n={int(n[worst])})",
                      abs(errors[worst]) <= 1e-2)
    return {
        "Q": Q, "theta": theta, "n_max": n_max, "c_Q": kernel.c_Q,
        "rows": [{"n": int(k), "value": float(v), "error": float(err)} for k, v, err in zip(n, values, errors)],
        "max_error": float(abs(errors[worst])), "argmax_n": int(n[worst]),
    }


def delta_error_trend(Q_values: Sequence[float] = (5, 10, 20), theta: float = 0.5) -> Dict[str, Any]:
    """Q を増やしたときの最大誤差の推移"""
    maxima = [verify_delta(Q, theta)["max_error"] for Q in Q_values]
    decreasing = all(b <= a for a, b in zip(maxima, maxima[1:]))
    return {"Q": list(Q_values), "max_error": maxima, "decreasing": decreasing}


def ramanujan_identity_check(q_max: int = 50, n_max: int = 100) -> Dict[str, Any]:
    """Σ*_a e_q(an) と Möbius 経由の c_q(n) の一致（整数恒等式）"""
    n = np.arange(-n_max, n_max + 1)
    worst = 0.0
    for q in range(1, q_max + 1):
        table = e_q_table(q)
        direct = sum(table[(a * n) % q] for a in reduced_residues(q))
        worst = max(worst, float(np.max(np.abs(direct - ramanujan_vector(q, n)))))
    passed = worst < 1e-8
    logger.check_info(f"Ramanujan 和の恒等式 (q ≤ {q_max}, |n| ≤ {n_max})", passed)
    return {"q_max": q_max, "n_max": n_max, "max_error": worst, "passed": passed}


def p_q_scan(kernel: DeltaKernel, z_values: Sequence[float], q_values: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    """
    |p_q(z)| の上界・偶対称性・小さい q での平坦性の走査

    平坦性は q ≤ Q^{1/4}, |z| ≤ Q^{-2} の範囲で |p_q(z) − 1| を測る。
    """
    q_values = list(q_values) if q_values is not None else list(range(1, kernel.q_max + 1))
    z = np.asarray(z_values, dtype=float)
    sup = asymmetry = flatness = 0.0
    flat_q = [q for q in q_values if q <= kernel.Q ** 0.25]
    flat_z = z[np.abs(z) <= kernel.Q ** -2]
    for q in q_values:
        values = kernel.p(q, z)
        mirrored = kernel.p(q, -z)
        sup = max(sup, float(np.max(np.abs(values))))
        asymmetry = max(asymmetry, float(np.max(np.abs(values - mirrored))))
        if q in flat_q and flat_z.size:
            flatness = max(flatness, float(np.max(np.abs(kernel.p(q, flat_z) - 1.0))))
    report = {"Q": kernel.Q, "sup": sup, "asymmetry": asymmetry, "flatness": flatness,
              "passed": sup <= 2.0 and asymmetry <= 1e-6 and flatness <= 0.05}
    logger.check_info(f"p_q 走査: sup={sup:.4f}, 平坦性 {flatness:.2e}", report["passed"])
    return report


def kernel_bound_scan(kernel: DeltaKernel, x_values: Sequence[float], y_values: Sequence[float]) -> Dict[str, Any]:
    """
    x·|h(x, y)| の走査（定数 K は x = 1/2 で較正）
    """
    y = np.asarray(y_values, dtype=float)
    K = float(np.max(np.abs(kernel.h(0.5, y)))) * 0.5
    rows = []
    for x in x_values:
        scaled = float(np.max(np.abs(kernel.h(float(x), y)))) * float(x)
        rows.append({"x": float(x), "scaled_sup": scaled})
    worst = max(r["scaled_sup"] for r in rows)
    return {"K": K, "rows": rows, "max_scaled": worst, "ratio": worst / K if K else math.inf}


# ---- 計数恒等式 ----

@error_handler(severity=ErrorSeverity.MEDIUM)
def count_via_delta(F: IntPolynomial, W: WeightSpec, P, Q: float, theta: float = 0.5) -> float:
    """
    Σ_{q ≤ Q} ∫ p_q(z)·S(q, z) dz

    S(q, z) = Σ_x W(x/P)·Σ*_a e_q(aF(x))e(zF(x)) なので、F の値の分布
    A(m) = Σ_{F(x)=m} W(x/P) を使って Σ_m A(m)·delta_approx(m) と書き直す。

    Raises:
        GuardError: (2P+1)^n が affine_enumeration を超える
    """
    from .expsums import value_distribution

    check_guard((2 * int(math.ceil(float(P))) + 1) ** F.n_vars, get_guard("affine_enumeration"),
                "count_via_delta lattice")
    values, weights = value_distribution(F, W, P)
    if values.size == 0:
        return 0.0
    kernel = make_kernel(Q, theta)
    delta = kernel.delta_values(values.astype(np.int64))
    total = float(np.dot(weights, delta))
    direct = float(np.sum(weights[values == 0]))
    logger.sum_info(f"δ経由の計数 {total:.6f}（直接計数 {direct:.6f}, P={P}, Q={Q}）")
    return total


def count_via_delta_check(F: IntPolynomial, W: WeightSpec, P, Q: float, theta: float = 0.5) -> Dict[str, Any]:
    """count_via_delta と直接の重み付き計数の比較"""
    from .expsums import value_distribution

    values, weights = value_distribution(F, W, P)
    direct = float(np.sum(weights[values == 0]))
    via_delta = count_via_delta(F, W, P, Q, theta)
    scale = max(abs(direct), float(np.sum(weights)) * 1e-3, 1e-12)
    return {"P": float(P), "Q": float(Q), "theta": theta, "direct": direct, "via_delta": via_delta,
            "relative_error": abs(via_delta - direct) / scale}

"""
指数計算モジュール

全ての量を P の冪として扱い、(Z, α) のアフィン形式の最大最小問題に帰着する。
B₁ = P^α, R = P^Z, B₂ = P^{Z/3+2α/3}, B₃ = P^{Z/3+α/6}。
係数はすべて Fraction で厳密に扱い、浮動小数点は使わない。
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from common.config_loader import parse_rational
from common.error_handler import ErrorSeverity, error_handler
from common.exceptions import ArithmeticPreconditionError, ConfigError
from common.logger import get_logger

logger = get_logger("ExponentCalculus")

Rational = Union[Fraction, int]
Point = Tuple[Fraction, Fraction]

EIGHT_FIFTHS = Fraction(8, 5)


def _exact(value: Any, name: str = "value") -> Fraction:
    if isinstance(value, float):
        raise ArithmeticPreconditionError(f"exact rational expected for {name}, got float {value!r}")
    return parse_rational(value, name) if isinstance(value, str) else Fraction(value)


def _fmt(value: Fraction) -> str:
    return str(value)


def _point_dict(point: Point) -> Dict[str, str]:
    return {"Z": _fmt(point[0]), "alpha": _fmt(point[1])}


# ---- アフィン形式 ----

@dataclass(frozen=True)
class AffineExponentForm:
    """c_Z·Z + c_α·α + c₀（厳密な有理係数）"""

    c_Z: Fraction = Fraction(0)
    c_alpha: Fraction = Fraction(0)
    c_0: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("c_Z", "c_alpha", "c_0"):
            object.__setattr__(self, name, _exact(getattr(self, name), name))

    @classmethod
    def Z(cls) -> "AffineExponentForm":
        return cls(1, 0, 0)

    @classmethod
    def alpha(cls) -> "AffineExponentForm":
        return cls(0, 1, 0)

    @classmethod
    def constant(cls, c: Rational) -> "AffineExponentForm":
        return cls(0, 0, c)

    @staticmethod
    def _lift(other: Union["AffineExponentForm", Rational]) -> "AffineExponentForm":
        return other if isinstance(other, AffineExponentForm) else AffineExponentForm.constant(other)

    def __call__(self, point: Sequence[Rational]) -> Fraction:
        Z, alpha = point
        return self.c_Z * Z + self.c_alpha * alpha + self.c_0

    def __add__(self, other) -> "AffineExponentForm":
        other = self._lift(other)
        return AffineExponentForm(self.c_Z + other.c_Z, self.c_alpha + other.c_alpha, self.c_0 + other.c_0)

    __radd__ = __add__

    def __neg__(self) -> "AffineExponentForm":
        return AffineExponentForm(-self.c_Z, -self.c_alpha, -self.c_0)

    def __sub__(self, other) -> "AffineExponentForm":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "AffineExponentForm":
        return self._lift(other) - self

    def __mul__(self, scalar: Rational) -> "AffineExponentForm":
        s = _exact(scalar, "scalar")
        return AffineExponentForm(s * self.c_Z, s * self.c_alpha, s * self.c_0)

    __rmul__ = __mul__

    def __truediv__(self, scalar: Rational) -> "AffineExponentForm":
        return self * (1 / _exact(scalar, "scalar"))

    def is_constant(self) -> bool:
        return self.c_Z == 0 and self.c_alpha == 0

    def as_tuple(self) -> Tuple[Fraction, Fraction, Fraction]:
        return self.c_Z, self.c_alpha, self.c_0

    def to_dict(self) -> Dict[str, str]:
        return {"c_Z": _fmt(self.c_Z), "c_alpha": _fmt(self.c_alpha), "c_0": _fmt(self.c_0)}

    def __str__(self) -> str:
        return f"({self.c_Z})Z + ({self.c_alpha})α + ({self.c_0})"


Z_FORM = AffineExponentForm.Z()
ALPHA_FORM = AffineExponentForm.alpha()
B2_FORM = Z_FORM / 3 + ALPHA_FORM * Fraction(2, 3)
B3_FORM = Z_FORM / 3 + ALPHA_FORM / 6


# ---- 多角形 ----

def _cross(o: Point, a: Point, b: Point) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class Polygon:
    """反時計回りの頂点列で与える凸多角形（退化した線分・点も可）"""

    vertices: Tuple[Point, ...]

    def __post_init__(self):
        cleaned: List[Point] = []
        for v in self.vertices:
            point = (_exact(v[0], "Z"), _exact(v[1], "alpha"))
            if not cleaned or cleaned[-1] != point:
                cleaned.append(point)
        while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
            cleaned.pop()
        if not cleaned:
            raise ArithmeticPreconditionError("empty region: polygon has no vertices")
        k = len(cleaned)
        if k >= 3 and any(_cross(cleaned[i], cleaned[(i + 1) % k], cleaned[(i + 2) % k]) < 0 for i in range(k)):
            raise ArithmeticPreconditionError("polygon vertices must be convex and counterclockwise")
        object.__setattr__(self, "vertices", tuple(cleaned))

    def edges(self) -> List[Tuple[Point, Point]]:
        k = len(self.vertices)
        if k == 1:
            return []
        if k == 2:
            return [(self.vertices[0], self.vertices[1])]
        return [(self.vertices[i], self.vertices[(i + 1) % k]) for i in range(k)]

    def contains(self, point: Sequence[Rational]) -> bool:
        p = (Fraction(point[0]), Fraction(point[1]))
        k = len(self.vertices)
        if k == 1:
            return p == self.vertices[0]
        if k == 2:
            a, b = self.vertices
            return _cross(a, b, p) == 0 and min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) \
                and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
        return all(_cross(a, b, p) >= 0 for a, b in self.edges())

    def clip(self, form: AffineExponentForm) -> Optional["Polygon"]:
        """{form ≥ 0} との共通部分（Sutherland–Hodgman）。空なら None"""
        k = len(self.vertices)
        if k == 1:
            return self if form(self.vertices[0]) >= 0 else None
        ring = list(self.vertices) if k > 2 else [self.vertices[0], self.vertices[1]]
        out: List[Point] = []
        for i, current in enumerate(ring):
            nxt = ring[(i + 1) % len(ring)]
            fc, fn = form(current), form(nxt)
            if fc >= 0:
                out.append(current)
            if (fc >= 0) != (fn >= 0) and fc != fn:
                t = fc / (fc - fn)
                out.append((current[0] + t * (nxt[0] - current[0]), current[1] + t * (nxt[1] - current[1])))
        return Polygon(tuple(out)) if out else None

    def to_dict(self) -> List[Dict[str, str]]:
        return [_point_dict(v) for v in self.vertices]


def omega_region() -> Polygon:
    """Ω = {0 ≤ α ≤ Z ≤ 8/5}"""
    return Polygon(((Fraction(0), Fraction(0)), (EIGHT_FIFTHS, Fraction(0)), (EIGHT_FIFTHS, EIGHT_FIFTHS)))


# ---- 指数族 h_i, w_i ----

FAMILY_NAMES = ("h1", "h2", "h3", "w1", "w2", "w3")


def _h2(n: int, m: int) -> AffineExponentForm:
    return (Fraction(4 * m, 3 * (n + 1)) * (B3_FORM + Z_FORM) + ALPHA_FORM / 4
            + Fraction(m, 6) * (Z_FORM - ALPHA_FORM) - Fraction(m, 4) * Z_FORM
            + Fraction(4 * m, 5 * (n + 1)) - Fraction(1, 10))


def _w2(n: int) -> AffineExponentForm:
    k = Fraction(24 + n)
    return (B2_FORM - k / (12 * (n + 1)) * B3_FORM + (n - 1) * k / (24 * (n + 1)) * Z_FORM
            + 4 - Fraction(15 * n + 21) * k / (120 * (n + 1)))


def _h1(n: int, m: int) -> AffineExponentForm:
    a = Fraction(4 * m, 3 * (n - 1))
    return (a * B3_FORM + Fraction(64 * m, 3 * (n - 1) * (n - 17)) * B2_FORM + ALPHA_FORM / 4
            + Fraction(m, 6) * (Z_FORM - ALPHA_FORM) - Fraction(m, 4) * Z_FORM
            + Fraction(24 * m, 5 * (n - 1)) - Fraction(3 * n - 59, n - 17) * a - Fraction(1, 10))


def _w1(n: int) -> AffineExponentForm:
    k = Fraction(24 + n, 24)
    return (1 + Fraction(16, n - 17) * k) * B2_FORM + 4 - Fraction(3 * n - 59, n - 17) * k


def _h3(n: int, m: int) -> AffineExponentForm:
    a = Fraction(4 * m, 3 * (n - 1))
    return (a * B3_FORM - Fraction(8 * m, 3 * (n + 1) * (n - 1)) * B2_FORM
            + (Fraction(4 * m, 3 * (n + 1)) - Fraction(m, 4)) * Z_FORM + ALPHA_FORM / 4
            + Fraction(m, 6) * (Z_FORM - ALPHA_FORM) - a * Fraction(3 * n + 4, n + 1)
            + Fraction(24 * m, 5 * (n - 1)) - Fraction(1, 10))


def _w3(n: int) -> AffineExponentForm:
    k = Fraction(24 + n, 24)
    return (B2_FORM * (1 - Fraction(2, n + 1) * k) + Fraction((n - 1) * (24 + n), 24 * (n + 1)) * Z_FORM
            + 4 - Fraction(3 * n + 4, n + 1) * k)


def family(name: str, n: int, eta: Optional[int] = None) -> AffineExponentForm:
    """
    h_i(Z, α, η) / w_i(Z, α) の一般 n の式

    Args:
        name: h1, h2, h3, w1, w2, w3
        n: 変数の数（25 以上）
        eta: h 族のみ。0 または n−2（既定 0）

    Raises:
        ArithmeticPreconditionError: 未対応の名前・η・n
    """
    if name not in FAMILY_NAMES:
        raise ArithmeticPreconditionError(f"unsupported exponent family: {name}")
    if n < 25:
        raise ArithmeticPreconditionError(f"exponent families need n ≥ 25, got {n}")
    if name.startswith("w"):
        if eta not in (None, 0):
            raise ArithmeticPreconditionError(f"{name} takes no η, got {eta}")
        return {"w1": _w1, "w2": _w2, "w3": _w3}[name](n)
    eta = 0 if eta is None else eta
    if eta not in (0, n - 2):
        raise ArithmeticPreconditionError(f"η must be 0 or n−2={n - 2}, got {eta}")
    return {"h1": _h1, "h2": _h2, "h3": _h3}[name](n, n - eta)


# ---- 最大最小 ----

@dataclass(frozen=True)
class MaxMinResult:
    value: Fraction
    point: Point
    candidates: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {"value": _fmt(self.value), "argmax": _point_dict(self.point), "candidates": self.candidates}


def _line_segment(form: AffineExponentForm, a: Point, b: Point) -> Optional[Point]:
    fa, fb = form(a), form(b)
    if fa == fb:
        return None
    t = fa / (fa - fb)
    if 0 <= t <= 1:
        return a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])
    return None


def _line_line(f: AffineExponentForm, g: AffineExponentForm) -> Optional[Point]:
    det = f.c_Z * g.c_alpha - f.c_alpha * g.c_Z
    if det == 0:
        return None
    return (f.c_alpha * g.c_0 - f.c_0 * g.c_alpha) / det, (f.c_0 * g.c_Z - f.c_Z * g.c_0) / det


def candidate_points(fs: Sequence[AffineExponentForm], region: Polygon) -> List[Point]:
    """
    min(fs) の最大を与え得る点：頂点、等値線と辺の交点、等値線同士の交点（領域内）
    """
    points = set(region.vertices)
    lines = [f - g for f, g in itertools.combinations(fs, 2)]
    lines = [line for line in lines if not line.is_constant()]
    for line in lines:
        for a, b in region.edges():
            hit = _line_segment(line, a, b)
            if hit is not None:
                points.add(hit)
    for first, second in itertools.combinations(lines, 2):
        hit = _line_line(first, second)
        if hit is not None and region.contains(hit):
            points.add(hit)
    return sorted(points)


def maxmin(fs: Sequence[AffineExponentForm], region: Optional[Polygon] = None) -> MaxMinResult:
    """
    max_{(Z,α) ∈ region} min_i f_i(Z, α) を厳密に求める

    同値の最大点が複数あれば辞書式で最小の点を返す。

    Raises:
        ArithmeticPreconditionError: 形式が空、または領域が空
    """
    if not fs:
        raise ArithmeticPreconditionError("maxmin needs at least one form")
    region = region if region is not None else omega_region()
    candidates = candidate_points(fs, region)
    best_value, best_point = None, None
    for point in candidates:
        value = min(f(point) for f in fs)
        if best_value is None or value > best_value:
            best_value, best_point = value, point
    return MaxMinResult(best_value, best_point, len(candidates))


def form_maximum(form: AffineExponentForm, region: Optional[Polygon] = None) -> MaxMinResult:
    return maxmin([form], region)


def range3_check(n: int = 30) -> Fraction:
    """max_Ω min{h₃(·,0), w₃}"""
    result = maxmin([family("h3", n, 0), family("w3", n)])
    logger.bound_info(f"range3 n={n}: max min{{h3(0), w3}} = {result.value} at {result.point}")
    return result.value


# ---- 条件と H の選択 ----

def vw1_threshold(n: int) -> Fraction:
    """B₂ ≤ P^{4n/45 − 179/90} の指数"""
    return Fraction(4 * n, 45) - Fraction(179, 90)


def vw2_pair(n: int) -> Tuple[Fraction, Fraction]:
    """T ≥ B₂^{a}·P^{b + 4φ} の (a, b)"""
    return Fraction(16, n - 17), -Fraction(3 * n - 59, n - 17)


def t_max(phi: Rational = 0) -> Fraction:
    """T の上限の指数 −8/5 − φ/2"""
    return -EIGHT_FIFTHS - _exact(phi, "phi") / 2


def t12_form(n: int) -> AffineExponentForm:
    """H = H₂ となる T の上限 B₃^{−2/(n+1)} R^{1−2/(n+1)} P^{−3−6/(5(n+1))}"""
    return (-Fraction(2, n + 1) * B3_FORM + (1 - Fraction(2, n + 1)) * Z_FORM
            - 3 - Fraction(6, 5 * (n + 1)))


def tvw2_form(n: int, phi: Rational = 0) -> AffineExponentForm:
    a, b = vw2_pair(n)
    return a * B2_FORM + b + 4 * _exact(phi, "phi")


def tvw3_form(n: int) -> AffineExponentForm:
    return -Fraction(2, n + 1) * B2_FORM + (1 - Fraction(2, n + 1)) * Z_FORM - 3 - Fraction(1, n + 1)


def t_weyl(n: int, point: Point, delta: Rational = 0) -> Fraction:
    """min{B₂^{24/(n−24)}P^{−4+δ}, P^{−2}} の指数"""
    return min(Fraction(24, n - 24) * B2_FORM(point) - 4 + _exact(delta, "delta"), Fraction(-2))


@dataclass(frozen=True)
class ConditionResult:
    name: str
    satisfied: bool
    margin: Fraction
    threshold: Fraction

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "satisfied": self.satisfied, "margin": _fmt(self.margin),
                "threshold": _fmt(self.threshold)}


def _param(params: Mapping[str, Any], key: str, name: str, default: Any = None) -> Fraction:
    if key not in params:
        if default is not None:
            return Fraction(default)
        raise ConfigError(f"condition {name} needs parameter '{key}'", config_key=key)
    try:
        return _exact(params[key], key)
    except (ValueError, TypeError, ZeroDivisionError, ArithmeticPreconditionError) as e:
        raise ConfigError(f"malformed parameter {key}={params[key]!r} for condition {name}", config_key=key) from e


def condition_check(name: str, params: Mapping[str, Any]) -> ConditionResult:
    """
    指数の不等式条件を厳密に比較する（margin ≥ 0 で成立）

    Args:
        name: vw1（B₂ の上限）、vw2・vw3・weyl（T の下限）
        params: n, b2, t, Z, phi, delta（P の指数。有理数または "p/q"）

    Raises:
        ConfigError: 未知の条件名・パラメータの欠落や不正
    """
    n = int(_param(params, "n", name))
    if name == "vw1":
        threshold = vw1_threshold(n)
        margin = threshold - _param(params, "b2", name)
    elif name in ("vw2", "vw3", "weyl"):
        b2, t = _param(params, "b2", name), _param(params, "t", name)
        if name == "vw2":
            a, b = vw2_pair(n)
            threshold = a * b2 + b + 4 * _param(params, "phi", name, 0)
        elif name == "vw3":
            Z = _param(params, "Z", name)
            threshold = -Fraction(2, n + 1) * b2 + (1 - Fraction(2, n + 1)) * Z - 3 - Fraction(1, n + 1)
        else:
            threshold = min(Fraction(24, n - 24) * b2 - 4 + _param(params, "delta", name, 0), Fraction(-2))
        margin = t - threshold
    else:
        raise ConfigError(f"unknown condition: {name}", config_key="condition")
    return ConditionResult(name, margin >= 0, margin, threshold)


H_REGIMES = ("H1", "H2", "pointwise")


def H_choice(regime: str, n: int, tau: Union[AffineExponentForm, Rational] = 0,
             b3: Optional[AffineExponentForm] = None, R: Optional[AffineExponentForm] = None,
             b2: Optional[AffineExponentForm] = None) -> AffineExponentForm:
    """
    H の P 指数をアフィン形式で返す

    H1 = 2/(n−1)·(b₃ + τ) + 36/(5(n−1))、H2 = 2/(n+1)·(b₃ + Z) + 6/(5(n+1))。
    pointwise は H = 1 + B₂^{4/n}(B₃TP⁴)^{2/n} の第2項の指数で、実際の指数は max(0, ·)。

    Raises:
        ArithmeticPreconditionError: 未知の regime
    """
    b3 = B3_FORM if b3 is None else b3
    R = Z_FORM if R is None else R
    b2 = B2_FORM if b2 is None else b2
    tau = AffineExponentForm._lift(tau)
    if regime == "H1":
        return Fraction(2, n - 1) * (b3 + tau) + Fraction(36, 5 * (n - 1))
    if regime == "H2":
        return Fraction(2, n + 1) * (b3 + R) + Fraction(6, 5 * (n + 1))
    if regime == "pointwise":
        return Fraction(4, n) * b2 + Fraction(2, n) * (b3 + tau + 4)
    raise ArithmeticPreconditionError(f"invalid H regime: {regime} (expected one of {H_REGIMES})")


def critical_point(phi: Rational = 0) -> Dict[str, Fraction]:
    """B₃ ≍ R^{1/2} ≍ P^{4/5+φ/2} となる臨界点"""
    return {"Z": EIGHT_FIFTHS, "alpha": EIGHT_FIFTHS, "tau": -EIGHT_FIFTHS, "T_max": t_max(phi)}


# ---- Weyl 型評価 ----

WEYL_KINDS = ("birch", "quartic")


def weyl_exponent(kind: str, n: int, q: Rational, z: Rational, H: Rational = 0) -> Fraction:
    """
    Weyl 型評価の P 指数（q, z, H は P の指数）

    birch:   n + (n/8)·max{−2, q+z+H, q−3, −(q+z+3)}
    quartic: n + (n/24)·max{q+z, −q−z−4}
    """
    q, z, H = _exact(q, "q"), _exact(z, "z"), _exact(H, "H")
    if kind == "birch":
        return n + Fraction(n, 8) * max(Fraction(-2), q + z + H, q - 3, -(q + z + 3))
    if kind == "quartic":
        return n + Fraction(n, 24) * max(q + z, -q - z - 4)
    raise ArithmeticPreconditionError(f"unknown Weyl bound kind: {kind}")


def k_exponent(n: int, tau: Union[AffineExponentForm, Rational]) -> AffineExponentForm:
    """K の指数 b₂ + (1 + n/24)·τ + n"""
    return B2_FORM + Fraction(24 + n, 24) * AffineExponentForm._lift(tau) + n


def weyl_consistency(n: int) -> Dict[str, bool]:
    """w_i = b₂ + (1 + n/24)·τ_i + 4（τ_i は各範囲の T の上限）"""
    k = Fraction(24 + n, 24)
    uppers = {"w1": tvw2_form(n), "w2": t12_form(n), "w3": tvw3_form(n)}
    return {name: family(name, n) == B2_FORM + k * upper + 4 for name, upper in uppers.items()}


# ---- 走査 ----

@dataclass
class CellMargin:
    """格子点 (Z, α) での各評価の指数と最良の余裕"""

    point: Point
    margin: Fraction
    terms: Dict[str, Fraction] = field(default_factory=dict)
    ranges: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"point": _point_dict(self.point), "margin": _fmt(self.margin), "ranges": self.ranges,
                "terms": {k: _fmt(v) for k, v in sorted(self.terms.items())}}


def _half_excess(E: Fraction) -> Fraction:
    return -Fraction(1, 10) + max(Fraction(0), E) / 2


def _range4_eta0(n: int, point: Point, tau: Fraction, h: Fraction) -> Fraction:
    Z, alpha = point
    return (B3_FORM(point) + alpha / 4 + max(tau, Z - 3) + Fraction(7, 2)
            + Fraction(n + 3, 6) * h - Fraction(n, 4) * B2_FORM(point))


def _range4_eta_top_form(n: int) -> AffineExponentForm:
    return (Fraction(8, 3 * (n - 1)) * B3_FORM + Fraction(16, 3 * (n - 1)) - Fraction(1, 10)
            + ALPHA_FORM / 4 + (Z_FORM - ALPHA_FORM) / 3 - Z_FORM / 2)


def scan_cell(n: int, Z: Rational, alpha: Rational, phi: Rational = 0, delta: Rational = 0) -> CellMargin:
    """
    (Z, α) での各評価の指数を並べ、適用できるものの最大を余裕とする

    T は上限 T_max に置き、H = max(H₁, H₂) とする。
    """
    point = (_exact(Z, "Z"), _exact(alpha, "alpha"))
    tau = t_max(phi)
    h = max(H_choice("H1", n, tau)(point), H_choice("H2", n)(point))
    v0 = max(point[0] / 2 - 1, (h + 1 + tau) / 2)
    positive_v0 = max(v0, Fraction(0))

    terms: Dict[str, Fraction] = {
        "one": -Fraction(1, 10),
        "Y0": _half_excess(n * h + (n - 1) * v0 + positive_v0),
        "Yn2": _half_excess(2 * h + v0 + positive_v0),
        "Yn1": _half_excess(Fraction(4, 3) * h - point[0] / 6 - point[1] / 3),
    }
    ranges: List[str] = []
    tweyl = t_weyl(n, point, delta)
    t12 = t12_form(n)(point)
    b2 = B2_FORM(point)
    below_vw1 = b2 < vw1_threshold(n)

    if tweyl <= min(t12, tau):
        ranges.append("range1")
        w2 = family("w2", n)(point)
        terms["range1_eta0"] = min(family("h2", n, 0)(point), w2)
        terms["range1_eta_top"] = min(family("h2", n, n - 2)(point), w2)
    if below_vw1 and max(t12, tweyl) < min(tvw2_form(n, phi)(point), tau):
        ranges.append("range2")
        w1 = family("w1", n)(point)
        terms["range2_eta0"] = min(family("h1", n, 0)(point), w1)
        terms["range2_eta_top"] = min(family("h1", n, n - 2)(point), w1)
    if below_vw1 and max(t12, tweyl) < min(tvw3_form(n)(point), tau):
        ranges.append("range3")
        w3 = family("w3", n)(point)
        terms["range3_eta0"] = min(family("h3", n, 0)(point), w3)
        terms["range3_eta_top"] = min(family("h3", n, n - 2)(point), w3)
    if not below_vw1:
        ranges.append("range4")
        terms["range4_eta0"] = _range4_eta0(n, point, tau, h)
        terms["range4_eta_top"] = max(family("h2", n, n - 2)(point), _range4_eta_top_form(n)(point))
    return CellMargin(point, max(terms.values()), terms, ranges)


class MinorArcScanner:
    """Ω 上の有理格子での全セル走査"""

    def __init__(self, n: int, phi: Rational = 0, delta: Rational = 0):
        if not 29 <= n <= 40:
            raise ArithmeticPreconditionError(f"minor arc scan supports 29 ≤ n ≤ 40, got {n}")
        self.n = n
        self.phi = _exact(phi, "phi")
        self.delta = _exact(delta, "delta")
        self.logger = get_logger("MinorArcScanner")

    def grid(self, denominator: int) -> List[Point]:
        """Z = 8i/(5N), α = 8j/(5N), 0 ≤ j ≤ i ≤ N"""
        if denominator < 1:
            raise ArithmeticPreconditionError(f"grid denominator must be positive, got {denominator}")
        unit = EIGHT_FIFTHS / denominator
        return [(i * unit, j * unit) for i in range(denominator + 1) for j in range(i + 1)]

    def scan(self, denominator: int) -> Dict[str, Any]:
        cells = [scan_cell(self.n, Z, alpha, self.phi, self.delta) for Z, alpha in self.grid(denominator)]
        worst = max(cells, key=lambda c: (c.margin, [-x for x in c.point]))
        nonnegative = [c for c in cells if c.margin >= 0]
        report = {
            "n": self.n, "grid_denominator": denominator, "phi": _fmt(self.phi), "delta": _fmt(self.delta),
            "cells": len(cells), "worst": worst.to_dict(), "nonnegative_cells": len(nonnegative),
            "all_negative": not nonnegative,
        }
        self.logger.check_info(f"minor arc scan n={self.n}: 最悪の余裕 {worst.margin} at {worst.point}",
                               not nonnegative)
        return report


@error_handler(severity=ErrorSeverity.LOW)
def minor_arc_scan(n: int, grid_denominator: int = 32, phi: Rational = 0, delta: Rational = 0) -> Dict[str, Any]:
    """Ω の格子全体で scan_cell の余裕を集計する"""
    return MinorArcScanner(n, phi, delta).scan(grid_denominator)


# ---- ケースごとの最適化 ----

OPTIMIZE_CASES = ("appendix", "range1", "range2", "range3", "range4")


def _entry(label: str, result: MaxMinResult, bound: Fraction, strict: bool = False) -> Dict[str, Any]:
    passed = result.value < bound if strict else result.value <= bound
    return {"label": label, **result.to_dict(), "bound": _fmt(bound), "strict": strict, "passed": passed}


def _range4_entries(n: int, phi: Fraction) -> List[Dict[str, Any]]:
    region = omega_region().clip(B2_FORM - vw1_threshold(n))
    if region is None:
        return [{"label": "range4", "empty": True, "passed": True}]
    tau = t_max(phi)
    H1, H2 = H_choice("H1", n, tau), H_choice("H2", n)
    base = B3_FORM + ALPHA_FORM / 4 + Fraction(7, 2) - Fraction(n, 4) * B2_FORM
    pieces = [base + t_part + Fraction(n + 3, 6) * h_part
              for t_part in (AffineExponentForm.constant(tau), Z_FORM - 3) for h_part in (H1, H2)]
    # 凸関数（アフィン形式の最大）の最大は頂点で取られる
    best = max(((max(p(v) for p in pieces), v) for v in sorted(region.vertices)), key=lambda item: item[0])
    top = max(((max(family("h2", n, n - 2)(v), _range4_eta_top_form(n)(v)), v) for v in sorted(region.vertices)),
              key=lambda item: item[0])
    return [
        _entry("range4_eta0", MaxMinResult(best[0], best[1], len(region.vertices)), Fraction(0), strict=True),
        _entry("range4_eta_top", MaxMinResult(top[0], top[1], len(region.vertices)), -Fraction(1, 20)),
    ]


@error_handler(severity=ErrorSeverity.LOW)
def optimize(case: str, n: int = 30, phi: Rational = 0) -> Dict[str, Any]:
    """
    各範囲の最大最小を厳密に計算し、閾値と比較する

    Raises:
        ArithmeticPreconditionError: 未知のケース
    """
    phi = _exact(phi, "phi")
    if case in ("appendix", "range1"):
        entries = [_entry("h2_w2", maxmin([family("h2", n), family("w2", n)]), -Fraction(1, 10), strict=True)]
        if case == "range1":
            entries.append(_entry("h2_eta_top", form_maximum(family("h2", n, n - 2)), -Fraction(15, 310)))
    elif case == "range2":
        entries = [
            _entry("h1_w1", maxmin([family("h1", n, 0), family("w1", n)]), -Fraction(1, 100)),
            _entry("h1_eta_top_w1", maxmin([family("h1", n, n - 2), family("w1", n)]), -Fraction(1, 50)),
        ]
    elif case == "range3":
        entries = [
            _entry("h3_w3", maxmin([family("h3", n, 0), family("w3", n)]), -Fraction(1, 125)),
            _entry("h3_eta_top", form_maximum(family("h3", n, n - 2)), -Fraction(1289, 26970)),
        ]
    elif case == "range4":
        entries = _range4_entries(n, phi)
    else:
        raise ArithmeticPreconditionError(f"unknown optimization case: {case} (expected one of {OPTIMIZE_CASES})")
    passed = all(e["passed"] for e in entries)
    for e in entries:
        logger.bound_info(f"{case}/{e['label']}: {e.get('value', '-')} (閾値 {e.get('bound', '-')})")
    return {"case": case, "n": n, "phi": _fmt(phi), "entries": entries, "passed": passed}

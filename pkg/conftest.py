"""
テスト共通設定

hypothesis のプロファイル（fast / ci）は環境変数 HYPOTHESIS_PROFILE で選ぶ。
"""

import os

os.environ.setdefault("CIRCLE_TOOLKIT_LOG_LEVEL", "WARNING")

from fractions import Fraction  # noqa: E402

import pytest  # noqa: E402
from hypothesis import HealthCheck, settings  # noqa: E402

from circle_method.poly import IntPolynomial  # noqa: E402
from circle_method.weights import WeightSpec  # noqa: E402
from common.config_loader import activate_config  # noqa: E402

settings.register_profile("fast", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture(autouse=True)
def packaged_config():
    """各テストは既定設定から始める"""
    activate_config(None)
    yield
    activate_config(None)


@pytest.fixture
def diag6() -> IntPolynomial:
    """x₁⁴ + x₂⁴ + x₃⁴ − x₄⁴ − x₅⁴ − x₆⁴"""
    return IntPolynomial.diagonal([1, 1, 1, -1, -1, -1], 4)


@pytest.fixture
def diag4() -> IntPolynomial:
    return IntPolynomial.diagonal([1, 1, -1, -1], 4)


@pytest.fixture
def centered_weight():
    """各座標 1/2 を中心とする γ 積の重み"""
    def build(n: int) -> WeightSpec:
        return WeightSpec.gamma_product([Fraction(1, 2)] * n)
    return build

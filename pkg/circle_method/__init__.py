"""
Circle Method Toolkit

四次超曲面に対する Kloosterman 型の円周法の各段階を、
厳密な有理数計算と小規模な数値実験で検証するためのパッケージ。
"""

from .bounds import AffineExponentForm, Polygon, family, maxmin, minor_arc_scan, optimize
from .count import count_projective, count_smoothed, growth_fit, meet_in_middle_diagonal
from .delta import DeltaKernel, delta_approx, make_kernel, p_q, verify_delta
from .expsums import S_alpha, S_qz, T_complete, T_star, Z_eval, multiplicativity_suite, vdc_sum
from .local import series_convergence, main_term, singular_integral, singular_series
from .poly import IntPolynomial, difference, scaled_norm
from .weights import WeightSpec

__version__ = "1.0.0"

__all__ = [
    "AffineExponentForm", "Polygon", "family", "maxmin", "minor_arc_scan", "optimize",
    "count_projective", "count_smoothed", "growth_fit", "meet_in_middle_diagonal",
    "DeltaKernel", "delta_approx", "make_kernel", "p_q", "verify_delta",
    "S_alpha", "S_qz", "T_complete", "T_star", "Z_eval", "multiplicativity_suite", "vdc_sum",
    "series_convergence", "main_term", "singular_integral", "singular_series",
    "IntPolynomial", "difference", "scaled_norm",
    "WeightSpec",
    "__version__",
]

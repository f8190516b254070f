"""Metric value conventions.

All energy-ratio metrics are reported in decibels as plain floats.  A
ratio whose denominator energy is negligible relative to its numerator
is reported as ``PERFECT_FIT`` (positive infinity), which compares
strictly greater than every finite value and equal to itself, so rank
statistics over mixed finite/perfect values stay well defined.
"""

import math

# A metric value is a float in dB; PERFECT_FIT marks an unbounded ratio.
MetricValue = float

PERFECT_FIT: MetricValue = math.inf

# Relative energy threshold below which a denominator counts as zero.
EPS_ZERO = 1e-12

# Gram systems with a condition number above this are treated as
# linearly dependent.
COND_LIMIT = 1e12


def is_perfect_fit(value: MetricValue) -> bool:
    return math.isinf(value) and value > 0


def energy_ratio_db(num: float, den: float, zero_ref: float | None = None) -> MetricValue:
    """10*log10(num/den) with degenerate denominators mapped to PERFECT_FIT.

    ``zero_ref`` sets the energy scale for the zero test; it defaults to
    the numerator.  The threshold comparison is strict, so a 0/0 ratio
    (e.g. an all-zero estimate) falls through to the zero-numerator
    branch and yields -inf, ranking below every finite value instead of
    scoring as perfect.
    """
    ref = num if zero_ref is None else zero_ref
    if den < EPS_ZERO * ref:
        return PERFECT_FIT
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)

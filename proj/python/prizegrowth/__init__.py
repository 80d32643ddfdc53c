"""Matched growth-gap analysis for longitudinal topic panels."""

from ._core import (
    InfeasibleError,
    InputError,
    Panel,
    __version__,
    binomial_two_sided_p,
    delta_series,
    did_beta3,
    generate,
    growth_transform,
    jaccard,
    ks_test,
    load_panel,
    match,
    pct_growth,
    shannon_entropy,
)

__all__ = [
    "InfeasibleError",
    "InputError",
    "Panel",
    "__version__",
    "binomial_two_sided_p",
    "delta_series",
    "did_beta3",
    "generate",
    "growth_transform",
    "jaccard",
    "ks_test",
    "load_panel",
    "match",
    "pct_growth",
    "shannon_entropy",
]

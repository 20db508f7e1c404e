"""Python access to the bookforge core algorithms."""

from ._core import (
    BookforgeError,
    classify,
    divide_pages,
    estimate_generation_seconds,
    eta_model,
    evaluate_thresholds,
    generation_time_table,
    locate_occurrences,
    popup_seconds,
    segment_words,
)

__all__ = [
    "BookforgeError",
    "classify",
    "divide_pages",
    "estimate_generation_seconds",
    "eta_model",
    "evaluate_thresholds",
    "generation_time_table",
    "locate_occurrences",
    "popup_seconds",
    "segment_words",
]

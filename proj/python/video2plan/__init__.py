"""Python bindings for the video2plan pipeline."""

from ._video2plan import (
    Error,
    InputError,
    ParseError,
    PlanError,
    StageError,
    canonical_tree,
    fixture_names,
    jaccard,
    precision_recall,
    recognize,
    run,
    sentence,
    version,
    write_fixture,
)

__all__ = [
    "Error",
    "InputError",
    "ParseError",
    "PlanError",
    "StageError",
    "canonical_tree",
    "fixture_names",
    "jaccard",
    "precision_recall",
    "recognize",
    "run",
    "sentence",
    "version",
    "write_fixture",
]

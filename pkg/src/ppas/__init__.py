"""Compound mean estimation with power-tuned prediction corrections and data-driven shrinkage."""

from ppas.compound import ESTIMATORS, fit_pas, fit_shrink_average, fit_shrink_classical, pas, run_estimators
from ppas.data import (
    AggregatedStats,
    LabeledPair,
    ProblemData,
    SecondMoments,
    get_means,
    ingest_csv,
    sample_moments,
    write_csv,
)
from ppas.errors import DataError, DegenerateWarning, NumericError
from ppas.uni import fit_unipas, unipas

__version__ = "0.1.0"

"""
Results store for experiment runs.
"""

from .database_manager import ResultsDatabase
from .db_models import Base, FinalMetric, RunRecord

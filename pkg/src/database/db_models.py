"""
Database models for the results store.
One RunRecord per (config, seed) execution, one FinalMetric row per final metric.
"""

from datetime import datetime

from sqlalchemy import JSON, Column, DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class RunRecord(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True)
    run_name = Column(String, nullable=False)
    mode = Column(String, nullable=False)
    seed = Column(Integer, nullable=False)
    swept_axis = Column(String, nullable=True)
    swept_value = Column(String, nullable=True)  # YAML text of the swept value
    run_dir = Column(String, nullable=True)
    wall_clock_seconds = Column(Float, nullable=True)
    detected_rounds = Column(JSON, default=dict)
    config = Column(JSON, default=dict)
    created_at = Column(DateTime, default=datetime.utcnow)

    metrics = relationship("FinalMetric", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<RunRecord {self.run_name} {self.mode} seed={self.seed}>"


class FinalMetric(Base):
    __tablename__ = "final_metrics"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    name = Column(String, nullable=False)
    value = Column(Float, nullable=True)

    run = relationship("RunRecord", back_populates="metrics")

    def __repr__(self):
        return f"<FinalMetric {self.name}={self.value}>"

"""Streaming performance analytics: online change detection, progressive
clustering and projection, and causal analysis over live telemetry."""

from .causality import (
    CausalityReport,
    RepresentativePanel,
    VarModel,
    build_report,
    granger_test,
    impulse_response,
    progressive_var_fit,
    variance_decomposition,
)
from .changepoint import DetectorState, MetricChangeDetector, RepresentativeSeriesState
from .clustering import ClusterModel, reassign_ids, refresh
from .engine import AnalysisEngine, AnalysisFrame, SessionState
from .generator import Scenario, generate, replay
from .ipca import Layout2D, PcaModel, ipca_update, procrustes_align, project, sign_align
from .projection import DrState, refresh_layout
from .server import AnalysisPipeline, StreamServer
from .tensor_store import CommGraphFrame, EntityId, TensorStore

__version__ = "0.1.0"

__all__ = [
    "AnalysisEngine",
    "AnalysisFrame",
    "AnalysisPipeline",
    "CausalityReport",
    "ClusterModel",
    "CommGraphFrame",
    "DetectorState",
    "DrState",
    "EntityId",
    "Layout2D",
    "MetricChangeDetector",
    "PcaModel",
    "RepresentativePanel",
    "RepresentativeSeriesState",
    "Scenario",
    "SessionState",
    "StreamServer",
    "TensorStore",
    "VarModel",
    "build_report",
    "generate",
    "granger_test",
    "impulse_response",
    "ipca_update",
    "procrustes_align",
    "progressive_var_fit",
    "project",
    "reassign_ids",
    "refresh",
    "refresh_layout",
    "replay",
    "sign_align",
    "variance_decomposition",
]

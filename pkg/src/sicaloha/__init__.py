"""Stability and delay analysis for slotted random access with successive
interference cancellation (two-copy, multi-copy and irregular-repetition
diversity ALOHA)."""

from .config import (DegreeDistribution, FinitePopulation, InfinitePopulation,
                     PopulationModel, RetransmitPolicy, SystemConfig, make_irregular,
                     make_regular, sample_degree, sample_degrees)
from .delay import DelayDistribution, delay_pmf, mean_delay, operating_point_delay, pmf_to_csv
from .equilibrium import (ChannelAnalysis, ChannelClass, ContourPoint, EquilibriumContour,
                          EquilibriumKind, EquilibriumPoint, LoadLine, analysis_to_json_obj,
                          compute_contour, contour_to_csv, design_population, drift,
                          find_equilibria, load_line_g_t, read_contour_csv, save_analysis,
                          total_load)
from .errors import NoOperatingPointError, ValidationError
from .frame import DecodeResult, FrameGraph, build_frame, sic_decode, throughput_of
from .plr import (PlrCurve, PlrSample, build_curve, curve_to_csv, default_grid,
                  estimate_plr, interpolate, load_curve, save_curve, smoothed)
from .simulation import (SimScenario, SimTrace, WindowSummary, detect_divergence,
                         read_trace_csv, run_simulation, save_summary, summarize_window,
                         trace_to_csv)

__version__ = "0.1.0"

__all__ = [
    "DegreeDistribution", "FinitePopulation", "InfinitePopulation", "PopulationModel",
    "RetransmitPolicy", "SystemConfig", "make_irregular", "make_regular",
    "sample_degree", "sample_degrees",
    "FrameGraph", "DecodeResult", "build_frame", "sic_decode", "throughput_of",
    "PlrCurve", "PlrSample", "build_curve", "curve_to_csv", "default_grid",
    "estimate_plr", "interpolate", "load_curve", "save_curve", "smoothed",
    "ContourPoint", "EquilibriumContour", "LoadLine", "EquilibriumPoint",
    "EquilibriumKind", "ChannelAnalysis", "ChannelClass", "compute_contour",
    "load_line_g_t", "total_load", "drift", "find_equilibria", "design_population",
    "contour_to_csv", "read_contour_csv", "analysis_to_json_obj", "save_analysis",
    "DelayDistribution", "delay_pmf", "mean_delay", "operating_point_delay", "pmf_to_csv",
    "SimScenario", "SimTrace", "WindowSummary", "run_simulation", "summarize_window",
    "detect_divergence", "trace_to_csv", "read_trace_csv", "save_summary",
    "ValidationError", "NoOperatingPointError",
]

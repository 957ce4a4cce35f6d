"""Photon-pair coincidence imaging: simulation, analysis, and metrics."""

__version__ = "0.1.0"

from .model import (AnalysisError, AnalysisReport, CorrelationGeometry,
                    CorrelationMap, CountImage, DetectorModel, Frame,
                    FrameStack, Roi, SceneConfig, ValidationError, load_scene,
                    make_map, save_scene, scene_from_dict, scene_to_dict,
                    validate_scene)
from .simulate import (PairSample, SimulationError, frame_rng, generate_frame,
                       generate_stack, sample_dark_events, sample_pair,
                       sample_thermal_events)
from .coincidence import (accidental_baseline, and_accumulate,
                          classical_accumulate, correlation_peak_stats,
                          cross_correlate, rotate_pi)
from .metrics import (cut_profiles, michelson_contrast, noise_rejection_ratio,
                      presence_ber, qi_advantage)
from .oracle import (RatePrediction, expected_rates, matched_pixel_prob,
                     predicted_contrasts)
from .pipeline_io import (FormatError, read_map, read_report, read_stack,
                          write_image, write_profiles, write_report,
                          write_stack)

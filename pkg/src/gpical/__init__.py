"""Blind gain-phase impairment calibration for a SIMO-OFDM sensing receiver."""

from .scenario import (ConfigError, GainPhase, RandomStreams, ScenarioBatch, ScenarioConfig,
                       ScenarioDraw, draw_batch, draw_gain_phase, draw_scenario, load_config)
from .signal import (Observation, ObservationBatch, delay_vector, steering_vector, synthesize,
                     synthesize_batch)
from .detector import (AngleDelayMap, DetectionResult, GridSpec, angle_delay_map,
                       build_dictionaries, estimate_gain, make_grid, maprt, reconstruct)
from .calibrate import (LossChoice, NonFiniteLossError, TrainState, adam_step, loss_gradient,
                        loss_map_max, loss_reconstruction, train)

__version__ = "0.1.0"

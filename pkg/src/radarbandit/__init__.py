"""Cognitive-radar waveform selection with constrained contextual bandits.

Submodules: waveforms (LFM catalog and distortion constraint), spectrum
(interference states and cost), bandit (Thompson sampling, EXP3, baselines),
scene (coexistence and jammer channels), rdproc (range-Doppler processing
and CFAR), tracker (Kalman tracking) and harness (episodes and campaigns).
"""

from .config import ExperimentConfig
from .harness import run_campaign, run_episode, sweep_dhat

__version__ = "0.1.0"

__all__ = ["ExperimentConfig", "run_campaign", "run_episode", "sweep_dhat", "__version__"]

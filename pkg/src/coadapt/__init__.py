"""Closed-loop co-adaptive learning over finite alphabets."""
from .core import (Alphabet, FeatureAlphabet, FunctionClass, LossMatrix, MarkovIntentionProcess,
                   compose, hamming_distance, lipschitz_constant, sample_intentions, validate_process)
from .mixing import MixingProfile, eta_bar_bruteforce, eta_bar_markov, mixing_profile, tv_distance
from .protocol import (Policy, Trajectory, best_comparator_loss, comparator_trajectory, regret,
                       run_episode)
from .certificate import (Certificate, EpsSchedule, check_certificate, deviation_term, eps_schedule,
                          eps_t, exact_expected_psi, validate_theorem1)
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"

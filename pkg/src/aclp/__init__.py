"""Process mining plus local causal discovery under latent confounding."""

from .bayesnet import BayesNet, DataSet, forward_sample, load_alarm, parse_network
from .blanket import MarkovBlanket
from .eventlog import Event, EventLog, Trace, parse_log
from .fuzzymine import MiningConfig, ProcessModel, mine
from .mag import Mag, latent_project, m_separated, true_mag_mb
from .smmb import smmb
from .structlearn import ScoringContext, local_bic

__version__ = "0.1.0"

__all__ = [
    "BayesNet", "DataSet", "Event", "EventLog", "Mag", "MarkovBlanket", "MiningConfig",
    "ProcessModel", "ScoringContext", "Trace", "forward_sample", "latent_project", "load_alarm",
    "local_bic", "m_separated", "mine", "parse_log", "parse_network", "smmb", "true_mag_mb",
]

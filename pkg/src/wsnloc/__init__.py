"""Sensor-network self-localization toolkit.

Particle belief propagation over noisy range graphs, a hop-count baseline,
an NSGA-II anchor placement search with variable-length genomes, and
joule-level energy accounting, plus a CLI experiment runner.
"""

from ._kernels import BACKEND
from .baselines import HopTable, dvhop_localize, hop_flood, multilaterate
from .energy import (EnergyConfig, EnergyLedger, MessageTrace, account_trace,
                     energy_report)
from .field import (FieldScenario, MeasurementModel, NodeRecord, RangeGraph,
                    build_scenario, connectivity_prob, load_scenario,
                    measure_ranges, neighbors, place_anchors_preset,
                    save_scenario, with_anchors)
from .moea import (AnchorChromosome, GaConfig, ObjectiveVector, ParetoArchive,
                   crossover, crowding_distance, dominates, evaluate_chromosome,
                   mutate, nondominated_sort, nsga2_run, random_chromosome)
from .nbp import (LocalizationResult, NbpParams, ParticleBelief, ParticleMessage,
                  draw_message, estimate_position, init_beliefs, kde_eval,
                  mean_error, pairwise_potential, run_nbp, update_belief)

__version__ = "0.1.0"

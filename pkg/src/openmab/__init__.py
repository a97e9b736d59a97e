"""Certified global UCB for open multi-agent bandits.

Agents arrive and leave over time, hold heterogeneous reward means, and all
active agents pull one common arm per round.  Arrivals enter with transferred
estimates plus a certificate bounding their error, and the global index adds
the summed certificates as an arrival bonus.
"""

from .exceptions import (ConfigError, EmptyPopulationError, InternalInvariantError, InvalidModelError,
                         InvalidParameterError, InvalidWeightsError, LemmaViolation, MalformedTraceError,
                         ModelMismatchError, OpenMABError, UndefinedEstimateError)
from .instances import (InstanceSpec, clustered_stable, flip_signs, gen_clustered, gen_linear, gen_pivotal,
                        gen_random_tabular, gen_stable_pair, gen_zero_knowledge_blocks, generate)
from .metrics import (CONVENTIONS, RegretLedger, bernoulli_kl, combined_tau, delta_good_event,
                      model_identification_term, n_id, n_stab, p_good, tau_id, tau_id_round_robin, tau_stab)
from .policy import (CertifiedGlobalUCB, ClusteredUCB, CommitAfterBurnin, GlobalIndex, LocalStats, Oracle,
                     RoundRobin, UniformRandom, aggregate_global, make_policy, select_arm, update_and_broadcast)
from .population import (AgentPattern, AgentProfile, ArrivalClass, LifetimeLaw, PopulationProcess,
                         PopulationSnapshot, population_sizes, population_trajectory)
from .rewards import (BernoulliNoise, ClusteredModel, GaussianNoise, GlobalValues, LinearModel, NonlinearModel,
                      TabularModel, global_values)
from .simulation import RunResult, simulate
from .streams import make_streams, replication_seeds
from .transfer import (ClusterStats, TransferOutcome, cluster_inherit, linear_param_transfer,
                       nonlinear_param_transfer, pretrained_init, zero_knowledge_init)

__version__ = "0.1.0"

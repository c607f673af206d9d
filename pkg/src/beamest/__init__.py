"""Raw mmWave MIMO channel estimation from analog beamformed measurements.

Synthesizes geometric multipath channels, simulates DFT-codebook beam
measurements, recovers the raw channel by sparse methods (OMP / ISTA over an
angular-grid dictionary, learned dictionaries via iterative hard-thresholding
sparse PCA and kSVD, and a trainable unrolled soft-thresholding network), and
evaluates refined beam selection by spectral-efficiency distributions.
"""

from .beameval import (BeamSelection, CdfSeries, build_cdf, custom_beam,
                       exhaustive_beam_search, rank2_digital_bound,
                       spectral_efficiency)
from .channel import (ArrayGeometry, ChannelTap, ClusterPool, PathGenConfig,
                      PathParams, ScenarioConfig, build_channel_tap,
                      channel_taps, dominant_taps, link_budget_noise_dbm,
                      steering_vector, synth_paths)
from .config import SCHEMA, ConfigError, ExperimentConfig, load_config, resolve_config
from .container import load_container, save_container
from .dictionary import (AngularGrid, GridAxis, GridDictionary,
                         LearnedDictionary, apply_dict, apply_dict_adj,
                         hard_threshold, ksvd, random_dictionary, spca_iht)
from .measure import (BeamPair, Codebook, MeasurementSet, SensingMatrix,
                      apply_phi, apply_phi_adj, beamform_measure,
                      build_sensing_matrix, dft_codebook, measure_channel,
                      refinement_pairs, rsrp_rank)
from .recovery import (Adam, DlistaBatch, DlistaParams, IstaConfig, OmpResult,
                       SparseEstimate, TrainConfig, dlista_forward,
                       dlista_gradients, dlista_predict, grid_search_ista,
                       init_dlista_params, ista, nmse_batch_db, nmse_db, omp,
                       soft_threshold, split_dataset, train_dlista)
from .vecops import crandn, unvec, vec

__version__ = "0.1.0"

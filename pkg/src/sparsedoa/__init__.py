"""2-D direction-of-arrival estimation with sparse planar microphone arrays.

Top-level surface: grid-based geometries and their difference co-arrays,
plane-wave scene synthesis, the bandpass/analytic/calibration chain,
co-array covariance processing with spatial smoothing, the MUSIC /
2-D Unitary ESPRIT / SRP-PHAT estimators, and the metrics used to score
them.
"""

from .geometry import (CoArray, CoherentSegment, GeometryKind, GridSpec, SensorSet,
                       build_geometry, coherent_segment, difference_coarray,
                       mask_channels)
from .wavefield import (Direction, NarrowbandSource, NoiseSpec, SnapshotMatrix,
                        bandlimit_and_mix, hadamard_codes, max_frequency,
                        random_directions, steering_matrix, steering_vector,
                        synthesize_scene, unit_vector, SPEED_OF_SOUND)
from .dsp import (FilterSpec, analytic, apply_calibration, bandpass, chunk, spl,
                  BandpassFilter, AnalyticSignal, CalibrationApplier)
from .covariance import (CoArrayObservation, CovarianceMatrix, SmoothedCovariance,
                         coarray_observation, effective_manifold, sample_covariance,
                         spatial_smoothing)
from .estimators import (AngularGrid, EigenPair, MusicDoa, Pseudospectrum, SrpPhat,
                         UnitaryEsprit2D, das_beampattern, eig_hermitian, music,
                         srp_phat, unitary_esprit_2d)
from .metrics import (BeamMetrics, ErrorSummary, beam_metrics, error_summary,
                      fov_fraction, spherical_error)
from .validation import EstimationError

__version__ = "0.1.0"

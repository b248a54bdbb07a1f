"""Optimal-transport flatness coefficients of discrete measures.

Exact discrete transport, transport-based and classical flatness
coefficients, dyadic and Whitney geometry, Knothe maps, martingale
machinery and a Carleson scanner, plus generators for test measures.
"""
from .coefficients import (CoefficientReport, PlaneSearch, alpha_dist, alpha_p,
                           alpha_p_at_plane, b_beta_inf, beta_inf, beta_p, dist_3b)
from .errors import *  # noqa: F401,F403
from .generators import (GraphSpec, gen_cantor, gen_density_cube, gen_flat, gen_graph,
                         kink_profile)
from .geometry import (AffinePlane, Ball, BumpFunction, DyadicCube, WhitneyDecomposition,
                       fit_plane_pca, sample_plane_measure, standard_bump, whitney_decompose)
from .kernels import BACKEND
from .measures import (DiscreteMeasure, ScalarField, load_measure, push_forward, restrict,
                       reweight, save_measure, total_mass)
from .multiscale import (CellValues, DyadicTree, ScanReport, build_tree, carleson_scan,
                         delta_sigma, good_set, haar_delta, key_lemma_rhs, localization_ratio,
                         localized_trim)
from .transport import (KnotheMap, TransportMap, TransportPlan, brute_force_wasserstein,
                        knothe_map, wasserstein, wasserstein_1d)

__version__ = "0.1.0"

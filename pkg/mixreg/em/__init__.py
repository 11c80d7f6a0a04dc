''' EM algorithms over grid densities (npmle) and particle kernel density estimates (npkmle) '''
from .npmle import posterior_density, em_npmle_step, run_em_npmle, expected_complete_loglik
from .npkmle import (NpkmleConfig, PosteriorField, q_function, inner_step_xi, m_step, run_em_npkmle,
                     aggregate_atoms, merge_close_points)

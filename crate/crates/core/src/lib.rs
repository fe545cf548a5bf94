//! Exact reverse dynamics of masked discrete diffusion with classifier-free
//! guidance on small finite grids.
//!
//! States live in `{1..N}^D` with token `N` as the mask. The forward process
//! masks each coordinate at unit rate; the reverse process unmasks with rates
//! that factor into a scalar time factor times a constant base generator.

pub mod analysis;
pub mod closed_form;
pub mod corpus;
pub mod distribution;
pub mod error;
pub mod forward;
pub mod mixture;
pub mod numerics;
pub mod oracle;
pub mod rates;
pub mod samplers;
pub mod space;
pub mod validation;

pub use distribution::{alpha_divergence, support_of, DenseDistribution, SupportSet};
pub use error::{Error, Result};
pub use forward::{forward_density, forward_density_at, ForwardKernel};
pub use mixture::{
    full_distribution, log_normalizer_z, normalizer_z, tilted_distribution, GuidanceConfig, MixtureModel,
};
pub use numerics::TimeRatio;
pub use space::StateSpace;
pub use rates::{guided_reverse, unguided_reverse, GeneratorKind, ReverseGenerator};
pub use oracle::{evolve_exact, evolve_ode, OracleMethod, OracleSolution};
pub use closed_form::{
    alpha_coefficient, coefficients_2d, sampled_distribution_2d, solve_1d_guided, solve_1d_unguided, solve_2d_guided,
    Coefficients2D,
};
pub use analysis::{
    decay_exponent_fit, limit_distribution_2d, local_moments, region_decomposition_2d, sampled_distribution_1d_cases, tv,
    tv_curve_1d_closed, tv_curve_2d, Region, RegionDecomposition, TVCurve,
};
pub use samplers::{
    empirical_distribution, sample_exact_event, sample_tau_leaping, sample_uniformization, SampleBatch, Scheme,
};

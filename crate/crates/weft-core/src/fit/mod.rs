//! Inverse fitting: recover fabric parameters from a reflection/transmission
//! capture pair by multi-start pattern selection and stochastic descent on a
//! shift-tolerant image objective.

mod loss;
mod optimize;

pub use loss::{
    pixel_loss, prior_loss, structure_prior, texture_stats_loss, total_loss, ImagePair,
    PIXEL_RES, PIXEL_WEIGHT, PRIOR_WEIGHT,
};
pub use optimize::{
    constrain, discrete_step_sizes, fd_gradient, fit_pipeline, multi_start, optimize,
    render_params, slot_names, unconstrain, DiscreteMove, FitConfig, FitReport, StartDraw,
    N_CONTINUOUS,
};

//! Post-processing over immutable run outputs: the density-deviation
//! criterion and its slope fit, scattering-channel classification with
//! transition-probability estimates, and the algebraic explorer for
//! acceleration-free motion and factor level surfaces.

mod bound_states;
mod channels;
mod kl;

pub use bound_states::{
    level_surface_sample, solution_set_dimension, zero_accel_residuals, zero_accel_solve,
    LevelSurface, ZeroAccelProblem, ZeroAccelSolution,
};
pub use channels::{
    channel_sample_from_shape, classify_channel, observable_window, pair_kinematics,
    transition_probability, ChannelLabel, ChannelSample, ChannelThresholds, TransitionEstimate,
    TransitionTable,
};
pub use kl::{chaos_slope, kl_divergence, KlReport, SlopeFit};

//! Low-light UHR sequence enhancement: tiled generator inference over
//! local/region patch pairs, Gaussian tile merging, and motion-adaptive
//! temporal smoothing.

pub mod imagecore;
pub mod nnforward;
pub mod patchwork;
pub mod temporalsmooth;

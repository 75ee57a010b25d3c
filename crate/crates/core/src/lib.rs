//! Design-to-G-code pipeline for multi-material printed antennas on curved
//! substrates: layout synthesis, conformal projection, cavity-model S11
//! prediction, toolpath planning for a two-rotary-axis printer, and G-code
//! emission with a simulator for verification.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod dimcheck;
pub mod em;
pub mod gcode;
pub mod job;
pub mod geom2d;
pub mod kinematics;
pub mod layout_io;
pub mod materials;
pub mod pathplan;
pub mod pipeline;
pub mod projection;
pub mod quad;
pub mod s11;
pub mod surface;

/// Speed of light in mm/s.
pub const SPEED_OF_LIGHT_MM_S: f64 = 299_792_458.0e3;

//! Sizing and verification toolkit for flexure-based grasper triggers.
//!
//! * [`tebc`]: closed-form force of tilted guided flexures.
//! * [`mechanism`]: multi-flexure trigger, latch and jaw models.
//! * [`fe`]: nonlinear planar frame solver used to check the closed form.
//! * [`design`]: grid and pattern search over flexure geometry.
//! * [`config`], [`report`], [`cli`]: configuration, CSV output and the
//!   `graspsynth` command.

pub mod cli;
pub mod config;
pub mod cubic;
pub mod design;
pub mod error;
pub mod fe;
pub mod mechanism;
pub mod report;
pub mod tebc;

pub use error::{Error, Result};

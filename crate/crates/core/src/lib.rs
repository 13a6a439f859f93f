//! Visual servoing of a tendon-driven continuum endoscope inside tubular
//! phantoms: simulated plant, camera, lumen segmentation and the
//! potential-field controller, with metrics and an experiment harness.

pub mod control;
pub mod harness;
pub mod metrics;
pub mod perception;
pub mod plant;
pub mod world;

//! Road layout randomization for road-marking segmentation datasets.
//!
//! The crate covers the label-space half of the pipeline and the training
//! and evaluation arithmetic around it:
//!
//! - [`geometry`]: pinhole camera over a planar road, ground <-> image maps;
//! - [`markings`]: parametric marking templates and the class palette;
//! - [`labelmap`]: label rasters, marking erasure, polygon fill with
//!   road-only writes, and road-surface compositing of RGB images;
//! - [`randomizer`]: seeded scene and dataset generation;
//! - [`balance`]: class statistics and EQ / FB / TB loss weights;
//! - [`losskernel`]: channel softmax, weighted cross-entropy, argmax;
//! - [`synthloss`]: GAN, feature-matching and perceptual loss combinators;
//! - [`metrics`]: per-image PRE / REC / F1 / IoU averaged over a test set;
//! - [`io`]: PNG and JSON file formats.

pub mod error;
pub mod geometry;
pub mod labelmap;
pub mod markings;
pub mod polygon;
pub mod balance;
pub mod losskernel;
pub mod metrics;
pub mod randomizer;
pub mod synthloss;
pub mod io;

pub use error::{Error, Result};

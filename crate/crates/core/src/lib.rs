//! Behavioral simulator and design-space-exploration toolkit for a
//! dual-engine sparse spiking accelerator.
//!
//! The crate models the datapath of an overlay accelerator for spiking
//! convolutional networks and spiking transformers: a multi-lane bitmap
//! sparse decoder, a broadcast-based load balancer (plus a crossbar-banked
//! baseline for comparison), a binary attention engine built on
//! AND-PopCount compressor trees and an implicit-transpose memory, an
//! im2col orchestrator, and the latency-hiding schedule that overlaps the
//! two engines. The `experiments` module reproduces the design-space
//! sweeps at desk scale and emits CSV/JSON tables.

pub mod balancer;
pub mod binary;
pub mod bitmap;
pub mod config;
pub mod decoder;
pub mod error;
pub mod experiments;
pub mod orchestrator;
pub mod pipeline;
pub mod workload;

pub use bitmap::SpikeBitmap;
pub use config::{
    AttentionBlock, LayerKind, LayerShape, NetworkConfig, ParallelismConfig, SparsityKind,
    SparsityModel,
};
pub use error::SimError;
pub use workload::{GridWorkload, SimResult};

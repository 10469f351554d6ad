//! Binary attention engine models: LUT6 AND-PopCount compressor networks,
//! the byte-granular implicit-transpose memory, and the systolic-array
//! timing plus functional reference for binary attention.

pub mod attention;
pub mod popcount;
pub mod transpose;

pub use attention::{
    binary_attention_reference, simulate_systolic, BinaryMatrix, SystolicConfig, ThresholdNeuron,
};
pub use popcount::{
    build_optimized_popcount, build_vanilla_popcount, evaluate_network, CircuitCost,
    CompressorNetwork,
};
pub use transpose::{reference_transpose, transpose_frame, Frame, TransposeMemory};

//! Feedforward neural metamodels: one `tanh` hidden layer, linear output.

mod network;
mod train;

pub use network::{rmse, Network, NeuralModelFile, TrainingMetadata};
pub use train::{train, EpochRecord, TrainedNetwork, Trainer, TrainingConfig, Topology, LM_JACOBIAN_LIMIT};

//! Dense autoencoder with hand-written backpropagation and Adam.

mod adam;
mod network;
mod train;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use network::{
    backward, default_topology, init_network, mse_loss, Activation, ForwardCache, Gradients, Layer,
    LayerSpec, Network, MODEL_FORMAT_VERSION,
};
pub use train::{mean_reconstruction_mse, train, train_rows, EpochRecord, TrainConfig, TrainReport};

//! Random streams, exponential moving averages and thinning shared by all simulators.

mod ewma;
mod rng;
mod thinning;

pub use ewma::EwmaState;
pub use rng::{stream_id_for, RngStream};
pub(crate) use thinning::pick_categorical;
pub use thinning::{sample_categorical, sample_next_event, sample_next_event_decaying, ThinnedEvent};

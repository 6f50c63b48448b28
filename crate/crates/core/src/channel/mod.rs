//! The simulated world: vehicle mobility and per-band wideband channels.

pub mod geometry;
pub mod mobility;
pub mod trace;

pub use geometry::{
    generate_channel, generate_geometric, large_scale_gain, ula_response, BandConfig, GeometricChannel, PathCluster,
};
pub use mobility::{generate_trajectory, Trajectory, Turn, TurnEvent};
pub use trace::{load_trace, save_trace, ChannelSource, ChannelTrace};

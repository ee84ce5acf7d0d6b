//! Santa Fe order book with squared-trend feedback on cancellations.

mod book;
mod map;
mod sim;

pub use book::{OrderBook, Side};
pub use map::{crisis_probability_map, CrisisMap, MapCell, WILSON_Z};
pub use sim::{
    init_equilibrium, run, run_from, BookSample, EventCounts, EventKind, SantaFeParams, SantaFeSim, SimOutcome,
    StepOutcome, DEFAULT_MAX_EVENTS, DEFAULT_SAMPLE_POINTS,
};

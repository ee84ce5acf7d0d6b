use serde::{Deserialize, Serialize};

use super::book::{OrderBook, Side};
use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::stochastic::{pick_categorical, sample_next_event_decaying, EwmaState, RngStream};

pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;
pub const DEFAULT_SAMPLE_POINTS: usize = 1000;

/// Parameters of the Santa Fe book with squared-trend feedback on cancellations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SantaFeParams {
    /// Limit-order rate per tick and side.
    pub lambda: f64,
    /// Market-order rate per side (total `2 mu`).
    pub mu: f64,
    /// Baseline cancellation rate per outstanding order.
    pub nu0: f64,
    pub alpha_k: f64,
    pub beta: f64,
    /// Grid size in ticks.
    pub n: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub max_events: u64,
    pub sample_points: usize,
}

impl Default for SantaFeParams {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            mu: 20.0,
            nu0: 1.0,
            alpha_k: 0.0,
            beta: 1.0,
            n: 280,
            horizon: 200.0,
            burn_in: 20.0,
            seed: 0,
            stream_id: 0,
            max_events: DEFAULT_MAX_EVENTS,
            sample_points: DEFAULT_SAMPLE_POINTS,
        }
    }
}

impl SantaFeParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("lambda", self.lambda)?;
        require_positive("mu", self.mu)?;
        require_positive("nu0", self.nu0)?;
        require_non_negative("alpha_k", self.alpha_k)?;
        require_positive("beta", self.beta)?;
        require_positive("horizon", self.horizon)?;
        require_non_negative("burn_in", self.burn_in)?;
        if self.n < 4 {
            return Err(invalid("n", format!("grid needs at least 4 ticks, got {}", self.n)));
        }
        if self.max_events == 0 {
            return Err(invalid("max_events", "must be positive"));
        }
        Ok(())
    }

    pub fn with_stream(mut self, seed: u64, stream_id: u64) -> Self {
        self.seed = seed;
        self.stream_id = stream_id;
        self
    }

    /// Orders per queue in the seeded pre-burn-in book, `ceil(lambda / nu0)`.
    pub fn seed_depth(&self) -> u32 {
        (self.lambda / self.nu0).ceil().max(1.0) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Limit(Side),
    Market(Side),
    Cancel(Side),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub limit_bid: u64,
    pub limit_ask: u64,
    pub market_bid: u64,
    pub market_ask: u64,
    pub cancel_bid: u64,
    pub cancel_ask: u64,
    /// Thinning proposals that were rejected.
    pub rejected: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.limit_bid + self.limit_ask + self.market_bid + self.market_ask + self.cancel_bid + self.cancel_ask
    }

    fn record(&mut self, kind: EventKind) {
        let slot = match kind {
            EventKind::Limit(Side::Bid) => &mut self.limit_bid,
            EventKind::Limit(Side::Ask) => &mut self.limit_ask,
            EventKind::Market(Side::Bid) => &mut self.market_bid,
            EventKind::Market(Side::Ask) => &mut self.market_ask,
            EventKind::Cancel(Side::Bid) => &mut self.cancel_bid,
            EventKind::Cancel(Side::Ask) => &mut self.cancel_ask,
        };
        *slot += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BookSample {
    pub time: f64,
    pub spread: u32,
    pub mid: f64,
}

/// Trajectory summary of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// First time one side of the book is empty.
    pub crisis_time: Option<f64>,
    /// The event budget ran out before crisis or horizon.
    pub aborted: bool,
    /// Time reached when the run stopped.
    pub end_time: f64,
    pub max_spread: u32,
    /// State on a uniform grid over `[0, horizon]`, up to the stopping time.
    pub samples: Vec<BookSample>,
    /// `(time, spread)` at every new running maximum of the spread.
    pub spread_records: Vec<(f64, u32)>,
    pub event_counts: EventCounts,
    /// Σ (ΔP)² over mid-price changes, in ticks².
    pub realized_variance: f64,
}

impl SimOutcome {
    pub fn n_events(&self) -> u64 {
        self.event_counts.total()
    }

    /// Running maximum of the spread at time `t` (exact, from the record list).
    pub fn running_max_spread(&self, t: f64) -> u32 {
        let i = self.spread_records.partition_point(|&(s, _)| s <= t);
        if i == 0 {
            0
        } else {
            self.spread_records[i - 1].1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BookEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Tick the event touched.
    pub price: usize,
    /// Mid-price change in ticks (multiple of 0.5).
    pub mid_change: f64,
    /// Queue size at `price` after the event.
    pub queue_after: u32,
}

/// What one call to [`SantaFeSim::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event(BookEvent),
    Crisis(BookEvent),
    Horizon,
    BudgetExhausted,
}

/// One replica of the feedback book.
///
/// Cancellation rate per order is `nu0 + alpha_k X_t²` with `X` the
/// exponential moving average (rate `beta`) of `sqrt(2 beta) ΔP` over
/// mid-price changes `ΔP` in ticks.
#[derive(Debug, Clone)]
pub struct SantaFeSim {
    params: SantaFeParams,
    book: OrderBook,
    feedback: EwmaState,
    time: f64,
    horizon: f64,
    alpha_k: f64,
    rng: RngStream,
    counts: EventCounts,
    realized_variance: f64,
    mark_scale: f64,
    mirrored: bool,
}

impl SantaFeSim {
    /// Starts at time 0 from `book` with zero feedback.
    pub fn new(params: &SantaFeParams, book: OrderBook, rng: RngStream) -> Result<Self> {
        params.validate()?;
        if book.len() != params.n {
            return Err(invalid("n", format!("book has {} ticks, params say {}", book.len(), params.n)));
        }
        Ok(Self {
            feedback: EwmaState::new(params.beta)?,
            horizon: params.horizon,
            alpha_k: params.alpha_k,
            mark_scale: (2.0 * params.beta).sqrt(),
            params: params.clone(),
            book,
            time: 0.0,
            rng,
            counts: EventCounts::default(),
            realized_variance: 0.0,
            mirrored: false,
        })
    }

    /// Reflect every side decision drawn from the stream. Driving the mirrored
    /// book with the same stream in mirrored mode yields the mirrored path.
    #[cfg(test)]
    pub(crate) fn set_mirrored(&mut self, mirrored: bool) {
        self.mirrored = mirrored;
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counts(&self) -> &EventCounts {
        &self.counts
    }

    pub fn feedback(&self) -> &EwmaState {
        &self.feedback
    }

    pub fn realized_variance(&self) -> f64 {
        self.realized_variance
    }

    pub fn into_parts(self) -> (OrderBook, RngStream) {
        (self.book, self.rng)
    }

    /// Cancellation rate per order at `t >= time of the last mid change`.
    #[inline]
    pub fn nu_at(&self, t: f64) -> f64 {
        let x = self.feedback.value_at(t);
        self.params.nu0 + self.alpha_k * x * x
    }

    /// Execute the next event, or report that the horizon or budget was hit.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.counts.total() >= self.params.max_events {
            return Ok(StepOutcome::BudgetExhausted);
        }
        let volume = self.book.total_volume() as f64;
        let n_bid = self.book.bid_deposit_ticks();
        let n_ask = self.book.ask_deposit_ticks();
        let (lam, mu) = (self.params.lambda, self.params.mu);
        let constant = 2.0 * mu + lam * (n_bid + n_ask) as f64;
        let bound = constant + self.nu_at(self.time) * volume;

        let event = {
            let feedback = self.feedback;
            let (nu0, alpha_k) = (self.params.nu0, self.alpha_k);
            let intensity = move |t: f64| {
                let x = feedback.value_at(t);
                constant + (nu0 + alpha_k * x * x) * volume
            };
            sample_next_event_decaying(self.time, self.horizon, bound, intensity, &mut self.rng)?
        };
        let Some(event) = event else {
            self.time = self.horizon;
            return Ok(StepOutcome::Horizon);
        };
        self.counts.rejected += event.rejected;
        let t = event.time;
        self.time = t;

        let nu = self.nu_at(t);
        let (w_lb, w_la) = (lam * n_bid as f64, lam * n_ask as f64);
        let weights = if self.mirrored {
            [mu, mu, w_la, w_lb, nu * volume]
        } else {
            [mu, mu, w_lb, w_la, nu * volume]
        };
        let total = weights.iter().sum::<f64>();
        let choice = pick_categorical(&weights, total, &mut self.rng);
        let flip = |s: Side| if self.mirrored { s.opposite() } else { s };

        let mid_before = self.book.mid_half_ticks();
        let n = self.book.len();
        let market = |book: &mut OrderBook, side: Side| {
            let p = match side {
                Side::Bid => book.best_bid(),
                Side::Ask => book.best_ask(),
            };
            (EventKind::Market(side), p, book.market_order(side))
        };
        let (kind, price, emptied) = match choice {
            0 => market(&mut self.book, flip(Side::Bid)),
            1 => market(&mut self.book, flip(Side::Ask)),
            2 | 3 => {
                let drawn = if choice == 2 { Side::Bid } else { Side::Ask };
                let side = flip(drawn);
                let ticks = match side {
                    Side::Bid => n_bid,
                    Side::Ask => n_ask,
                };
                // offset counted from the outer edge of the side's region
                let k = self.rng.below(ticks as u64) as usize;
                let p = match side {
                    Side::Bid => k,
                    Side::Ask => n - 1 - k,
                };
                self.book.add_limit(side, p);
                (EventKind::Limit(side), p, None)
            }
            _ => {
                let total_orders = self.book.total_volume();
                let k = self.rng.below(total_orders);
                let k = if self.mirrored { total_orders - 1 - k } else { k };
                let p = self.book.locate_order(k);
                let side = self.book.side_of(p).expect("orders rest outside the spread");
                (EventKind::Cancel(side), p, self.book.remove_at(p))
            }
        };
        self.counts.record(kind);
        let mut event = BookEvent {
            time: t,
            kind,
            price,
            mid_change: 0.0,
            queue_after: self.book.queue(price),
        };
        if emptied.is_some() {
            return Ok(StepOutcome::Crisis(event));
        }
        let mid_after = self.book.mid_half_ticks();
        if mid_after != mid_before {
            let dp = (mid_after as f64 - mid_before as f64) / 2.0;
            self.feedback.update(t, self.mark_scale * dp)?;
            self.realized_variance += dp * dp;
            event.mid_change = dp;
        }
        Ok(StepOutcome::Event(event))
    }
}

/// Equilibrium Santa Fe book: run without feedback for `burn_in` from the
/// seeded half-full book.
pub fn init_equilibrium(params: &SantaFeParams, rng: RngStream) -> Result<(OrderBook, RngStream)> {
    params.validate()?;
    let book = OrderBook::seeded(params.n, params.seed_depth());
    if params.burn_in == 0.0 {
        return Ok((book, rng));
    }
    let burn = SantaFeParams {
        alpha_k: 0.0,
        horizon: params.burn_in,
        max_events: u64::MAX,
        ..params.clone()
    };
    let mut sim = SantaFeSim::new(&burn, book, rng)?;
    loop {
        match sim.step()? {
            StepOutcome::Event { .. } => {}
            StepOutcome::Crisis(e) => return Err(Error::BurnInCrisis { time: e.time }),
            StepOutcome::Horizon | StepOutcome::BudgetExhausted => break,
        }
    }
    Ok(sim.into_parts())
}

/// Burn in, then run the feedback book until crisis, horizon or budget.
pub fn run(params: &SantaFeParams) -> Result<SimOutcome> {
    let rng = RngStream::new(params.seed, params.stream_id);
    let (book, rng) = init_equilibrium(params, rng)?;
    run_from(params, book, rng)
}

/// Run from a given initial book (time origin 0, no feedback memory).
pub fn run_from(params: &SantaFeParams, book: OrderBook, rng: RngStream) -> Result<SimOutcome> {
    let mut sim = SantaFeSim::new(params, book, rng)?;
    let n_samples = params.sample_points;
    let grid_time = |i: usize| {
        if n_samples <= 1 {
            0.0
        } else {
            params.horizon * i as f64 / (n_samples - 1) as f64
        }
    };
    let mut samples = Vec::with_capacity(n_samples);
    let spread0 = sim.book().spread() as u32;
    let mut max_spread = spread0;
    let mut spread_records = vec![(0.0, spread0)];
    let mut crisis_time = None;
    let mut aborted = false;

    loop {
        let before = BookSample {
            time: 0.0,
            spread: sim.book().spread() as u32,
            mid: sim.book().mid(),
        };
        let outcome = sim.step()?;
        let now = match outcome {
            StepOutcome::Event(e) | StepOutcome::Crisis(e) => e.time,
            StepOutcome::Horizon => params.horizon,
            StepOutcome::BudgetExhausted => sim.time(),
        };
        // grid points strictly before the event see the pre-event state
        while samples.len() < n_samples
            && (grid_time(samples.len()) < now
                || (matches!(outcome, StepOutcome::Horizon) && grid_time(samples.len()) <= now))
        {
            samples.push(BookSample {
                time: grid_time(samples.len()),
                ..before
            });
        }
        match outcome {
            StepOutcome::Event(e) => {
                let s = sim.book().spread() as u32;
                if s > max_spread {
                    max_spread = s;
                    spread_records.push((e.time, s));
                }
            }
            StepOutcome::Crisis(e) => {
                crisis_time = Some(e.time);
                break;
            }
            StepOutcome::Horizon => break,
            StepOutcome::BudgetExhausted => {
                aborted = true;
                break;
            }
        }
    }

    Ok(SimOutcome {
        crisis_time,
        aborted,
        end_time: sim.time(),
        max_spread: max_spread.min(params.n as u32),
        samples,
        spread_records,
        event_counts: *sim.counts(),
        realized_variance: sim.realized_variance(),
    })
}

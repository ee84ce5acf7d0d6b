use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

/// Fenwick tree of queue sizes, for drawing the k-th outstanding order.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Fenwick {
    tree: Vec<u64>,
    top: usize,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
            top: if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) },
        }
    }

    fn add(&mut self, index: usize, delta: i64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta) as u64;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `k`.
    fn find(&self, mut k: u64) -> usize {
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Queue sizes on a fixed grid of `N` ticks with best-quote bookkeeping.
///
/// Bid orders rest at ticks `<= best_bid`, ask orders at ticks `>= best_ask`.
/// The best quotes are only meaningful while the corresponding side holds
/// volume; once a side empties the book is in crisis and must not be mutated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBook {
    queues: Vec<u32>,
    fenwick: Fenwick,
    best_bid: usize,
    best_ask: usize,
    bid_volume: u64,
    ask_volume: u64,
}

impl OrderBook {
    /// Alternate ticks filled with `depth` orders on each side of the grid
    /// centre; best bid at `N/2 - 1`, best ask at `N/2`.
    pub fn seeded(n: usize, depth: u32) -> Self {
        assert!(n >= 4, "grid needs at least 4 ticks");
        assert!(depth > 0);
        let centre = n / 2;
        let mut queues = vec![0u32; n];
        let mut p = centre as isize - 1;
        while p >= 0 {
            queues[p as usize] = depth;
            p -= 2;
        }
        let mut p = centre;
        while p < n {
            queues[p] = depth;
            p += 2;
        }
        Self::from_queues(queues, centre - 1, centre)
    }

    /// Build from explicit queues; panics unless the quotes are consistent.
    pub fn from_queues(queues: Vec<u32>, best_bid: usize, best_ask: usize) -> Self {
        let n = queues.len();
        assert!(best_bid < best_ask && best_ask < n);
        let mut fenwick = Fenwick::new(n);
        for (i, &q) in queues.iter().enumerate() {
            fenwick.add(i, q as i64);
        }
        let bid_volume = queues[..=best_bid].iter().map(|&q| q as u64).sum();
        let ask_volume = queues[best_ask..].iter().map(|&q| q as u64).sum();
        let book = Self {
            queues,
            fenwick,
            best_bid,
            best_ask,
            bid_volume,
            ask_volume,
        };
        assert!(book.check_invariants().is_ok(), "{:?}", book.check_invariants());
        book
    }

    pub fn len(&self) -> usize {
        self.queues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.is_empty()
    }

    pub fn queues(&self) -> &[u32] {
        &self.queues
    }

    pub fn queue(&self, p: usize) -> u32 {
        self.queues[p]
    }

    pub fn best_bid(&self) -> usize {
        self.best_bid
    }

    pub fn best_ask(&self) -> usize {
        self.best_ask
    }

    pub fn spread(&self) -> usize {
        self.best_ask - self.best_bid
    }

    /// Mid-price in half ticks, `best_bid + best_ask`.
    pub fn mid_half_ticks(&self) -> usize {
        self.best_bid + self.best_ask
    }

    pub fn mid(&self) -> f64 {
        self.mid_half_ticks() as f64 / 2.0
    }

    pub fn bid_volume(&self) -> u64 {
        self.bid_volume
    }

    pub fn ask_volume(&self) -> u64 {
        self.ask_volume
    }

    pub fn total_volume(&self) -> u64 {
        self.bid_volume + self.ask_volume
    }

    pub fn side_volume(&self, side: Side) -> u64 {
        match side {
            Side::Bid => self.bid_volume,
            Side::Ask => self.ask_volume,
        }
    }

    pub fn in_crisis(&self) -> bool {
        self.bid_volume == 0 || self.ask_volume == 0
    }

    /// Number of ticks `{p <= min(b+1, a-1)}` open to bid deposits.
    pub fn bid_deposit_ticks(&self) -> usize {
        (self.best_bid + 1).min(self.best_ask - 1) + 1
    }

    /// Number of ticks `{p >= max(a-1, b+1)}` open to ask deposits.
    pub fn ask_deposit_ticks(&self) -> usize {
        self.len() - (self.best_ask - 1).max(self.best_bid + 1)
    }

    pub fn side_of(&self, p: usize) -> Option<Side> {
        if p <= self.best_bid {
            Some(Side::Bid)
        } else if p >= self.best_ask {
            Some(Side::Ask)
        } else {
            None
        }
    }

    /// Add one limit order. The tick must lie in the side's deposit region.
    pub fn add_limit(&mut self, side: Side, p: usize) {
        match side {
            Side::Bid => {
                debug_assert!(p < self.bid_deposit_ticks());
                self.bid_volume += 1;
                if p > self.best_bid {
                    self.best_bid = p;
                }
            }
            Side::Ask => {
                debug_assert!(p >= self.len() - self.ask_deposit_ticks());
                self.ask_volume += 1;
                if p < self.best_ask {
                    self.best_ask = p;
                }
            }
        }
        self.queues[p] += 1;
        self.fenwick.add(p, 1);
    }

    /// Remove one order at tick `p`. Returns the side that became empty, if any.
    pub fn remove_at(&mut self, p: usize) -> Option<Side> {
        debug_assert!(self.queues[p] > 0);
        let side = self.side_of(p).expect("order inside the spread");
        self.queues[p] -= 1;
        self.fenwick.add(p, -1);
        match side {
            Side::Bid => {
                self.bid_volume -= 1;
                if self.bid_volume == 0 {
                    return Some(Side::Bid);
                }
                if p == self.best_bid && self.queues[p] == 0 {
                    let mut q = p;
                    while self.queues[q] == 0 {
                        q -= 1;
                    }
                    self.best_bid = q;
                }
            }
            Side::Ask => {
                self.ask_volume -= 1;
                if self.ask_volume == 0 {
                    return Some(Side::Ask);
                }
                if p == self.best_ask && self.queues[p] == 0 {
                    let mut q = p;
                    while self.queues[q] == 0 {
                        q += 1;
                    }
                    self.best_ask = q;
                }
            }
        }
        None
    }

    /// Market order executing against the best queue of `side`.
    pub fn market_order(&mut self, side: Side) -> Option<Side> {
        let p = match side {
            Side::Bid => self.best_bid,
            Side::Ask => self.best_ask,
        };
        self.remove_at(p)
    }

    /// Tick holding the `k`-th outstanding order counted from tick 0.
    pub fn locate_order(&self, k: u64) -> usize {
        debug_assert!(k < self.total_volume());
        self.fenwick.find(k)
    }

    /// Queue sizes at least `min_distance` ticks behind the best quote of each side.
    pub fn deep_queues(&self, min_distance: usize) -> Vec<u32> {
        let mut out = Vec::new();
        if self.best_bid >= min_distance {
            out.extend_from_slice(&self.queues[..=self.best_bid - min_distance]);
        }
        if self.best_ask + min_distance < self.len() {
            out.extend_from_slice(&self.queues[self.best_ask + min_distance..]);
        }
        out
    }

    /// Reflection `p -> N - 1 - p`, exchanging the two sides.
    pub fn mirrored(&self) -> Self {
        let n = self.len();
        let queues: Vec<u32> = self.queues.iter().rev().copied().collect();
        Self::from_queues(queues, n - 1 - self.best_ask, n - 1 - self.best_bid)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.best_bid >= self.best_ask {
            return Err(format!("best_bid {} >= best_ask {}", self.best_bid, self.best_ask));
        }
        let inside: u64 = self.queues[self.best_bid + 1..self.best_ask]
            .iter()
            .map(|&q| q as u64)
            .sum();
        if inside != 0 {
            return Err("volume inside the spread".into());
        }
        let bid: u64 = self.queues[..=self.best_bid].iter().map(|&q| q as u64).sum();
        let ask: u64 = self.queues[self.best_ask..].iter().map(|&q| q as u64).sum();
        if bid != self.bid_volume || ask != self.ask_volume {
            return Err("side volume bookkeeping".into());
        }
        if bid > 0 && self.queues[self.best_bid] == 0 {
            return Err("best bid queue empty".into());
        }
        if ask > 0 && self.queues[self.best_ask] == 0 {
            return Err("best ask queue empty".into());
        }
        let total = bid + ask;
        if total > 0 && self.fenwick.find(total - 1) >= self.len() {
            return Err("fenwick out of sync".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_book_layout() {
        let b = OrderBook::seeded(10, 3);
        assert_eq!(b.queues(), &[3, 0, 3, 0, 3, 3, 0, 3, 0, 3]);
        assert_eq!((b.best_bid(), b.best_ask()), (4, 5));
        assert_eq!(b.bid_volume(), 9);
        assert_eq!(b.ask_volume(), 9);
        b.check_invariants().unwrap();
    }

    #[test]
    fn deposit_regions_follow_the_quotes() {
        // spread 1: bids up to b, asks from a
        let b = OrderBook::seeded(10, 1);
        assert_eq!(b.bid_deposit_ticks(), 5);
        assert_eq!(b.ask_deposit_ticks(), 5);
        // spread 3 (b=2, a=5): bids up to b+1 = 3, asks from a-1 = 4
        let b = OrderBook::from_queues(vec![1, 0, 1, 0, 0, 1, 0, 0, 0, 1], 2, 5);
        assert_eq!(b.bid_deposit_ticks(), 4);
        assert_eq!(b.ask_deposit_ticks(), 6);
    }

    #[test]
    fn emptying_best_queue_moves_quote() {
        let mut b = OrderBook::seeded(10, 1);
        assert_eq!(b.market_order(Side::Ask), None);
        assert_eq!(b.best_ask(), 7);
        assert_eq!(b.market_order(Side::Bid), None);
        assert_eq!(b.best_bid(), 2);
        b.check_invariants().unwrap();
    }

    #[test]
    fn crisis_when_side_empties() {
        let mut b = OrderBook::from_queues(vec![0, 1, 0, 2], 1, 3);
        assert_eq!(b.market_order(Side::Bid), Some(Side::Bid));
        assert!(b.in_crisis());
    }

    #[test]
    fn locate_order_walks_queues() {
        let b = OrderBook::from_queues(vec![2, 0, 1, 0, 3], 2, 4);
        let located: Vec<usize> = (0..6).map(|k| b.locate_order(k)).collect();
        assert_eq!(located, vec![0, 0, 2, 4, 4, 4]);
    }

    #[test]
    fn mirror_is_an_involution() {
        let b = OrderBook::from_queues(vec![2, 0, 1, 0, 3, 1], 2, 4);
        let m = b.mirrored();
        assert_eq!(m.queues(), &[1, 3, 0, 1, 0, 2]);
        assert_eq!((m.best_bid(), m.best_ask()), (1, 3));
        assert_eq!(m.mirrored(), b);
    }

    #[test]
    fn deep_queues_skip_the_top_of_book() {
        let b = OrderBook::seeded(40, 5);
        let deep = b.deep_queues(10);
        // bids 0..=9, asks 30..40
        assert_eq!(deep.len(), 10 + 10);
    }
}

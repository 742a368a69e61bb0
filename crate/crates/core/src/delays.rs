//! Bounded-staleness schedules.
//!
//! A schedule answers two kinds of queries:
//!
//! * `delays_at(k)` — an explicit delay vector `τ_k ∈ {0..min(τ,k)}^N`,
//!   driving history-mode runs in which every component gradient is
//!   re-evaluated at a past iterate each iteration.
//! * `refresh_set_at(k)` / `refresh_step` — the set of components whose
//!   cached gradient is re-evaluated at iteration `k`, driving cache-mode
//!   runs. Over any window of `τ+1` consecutive iterations every component
//!   is refreshed at least once, so realized staleness never exceeds `τ`.
//!
//! Both queries are pure given `(schedule, k)`; the `uniform-random` kind
//! derives its draws from a per-iteration stream of a seeded generator, so
//! equal seeds replay identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleKind {
    /// All delays zero: the FBS reduction.
    Zero,
    /// Constant delay (clamped by the iteration index).
    Fixed { delay: usize },
    /// Round robin: `⌈N/(τ+1)⌉` components refreshed per iteration.
    Cyclic,
    /// Delays drawn iid uniform on `{0..min(τ,k)}` in history mode; random
    /// refresh subsets with forced refresh at maximal age in cache mode.
    UniformRandom { seed: u64 },
    /// Every component maximally stale at every iteration.
    AdversarialMax,
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Zero => "zero",
            ScheduleKind::Fixed { .. } => "fixed",
            ScheduleKind::Cyclic => "cyclic",
            ScheduleKind::UniformRandom { .. } => "uniform-random",
            ScheduleKind::AdversarialMax => "adversarial-max",
        }
    }
}

/// Immutable delay policy for `n_components` components with delay
/// parameter `tau`.
#[derive(Debug, Clone)]
pub struct DelaySchedule {
    kind: ScheduleKind,
    tau: usize,
    n_components: usize,
}

impl DelaySchedule {
    pub fn new(kind: ScheduleKind, tau: usize, n_components: usize) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::InvalidParameter(
                "schedule needs at least one component".into(),
            ));
        }
        if let ScheduleKind::Fixed { delay } = kind {
            if delay > tau {
                return Err(Error::InvalidParameter(format!(
                    "fixed delay {delay} exceeds the delay parameter {tau}"
                )));
            }
        }
        Ok(DelaySchedule { kind, tau, n_components })
    }

    pub fn zero(n_components: usize) -> Self {
        DelaySchedule::new(ScheduleKind::Zero, 0, n_components).unwrap()
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Whether the kind has a cache-mode interpretation.
    pub fn supports_cache_mode(&self) -> bool {
        !matches!(
            self.kind,
            ScheduleKind::Fixed { .. } | ScheduleKind::AdversarialMax
        )
    }

    /// Per-iteration random stream: independent draws for every `k`, stable
    /// across queries.
    fn iteration_rng(seed: u64, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        rng
    }

    /// The delay vector `τ_k`: each entry lies in `{0..min(τ,k)}`.
    pub fn delays_at(&self, k: usize) -> Vec<usize> {
        let cap = self.tau.min(k);
        let n = self.n_components;
        match &self.kind {
            ScheduleKind::Zero => vec![0; n],
            ScheduleKind::Fixed { delay } => vec![(*delay).min(k); n],
            ScheduleKind::AdversarialMax => vec![cap; n],
            ScheduleKind::UniformRandom { seed } => {
                let mut rng = Self::iteration_rng(*seed, k);
                (0..n).map(|_| rng.random_range(0..=cap)).collect()
            }
            ScheduleKind::Cyclic => {
                // Delay of component n = age of its latest cyclic refresh;
                // the window property keeps the scan within τ+1 iterations.
                (0..n)
                    .map(|comp| {
                        let mut j = k;
                        loop {
                            if self.cyclic_refreshes(j, comp) {
                                break k - j;
                            }
                            debug_assert!(k - j <= self.tau, "cyclic window property broken");
                            j -= 1;
                        }
                    })
                    .collect()
            }
        }
    }

    /// Whether the cyclic pattern refreshes `comp` at iteration `k`.
    fn cyclic_refreshes(&self, k: usize, comp: usize) -> bool {
        if k == 0 {
            return true;
        }
        let n = self.n_components;
        let group = n.div_ceil(self.tau + 1);
        let start = (k * group) % n;
        // comp ∈ {start, start+1, …, start+group−1} (mod n)
        (comp + n - start) % n < group
    }

    /// One cache-mode step: the refresh set at iteration `k` given the last
    /// refresh iteration of every component. Pure in its inputs; the solver
    /// and the replaying [`DelaySchedule::refresh_set_at`] share it.
    pub fn refresh_step(&self, k: usize, last_refresh: &[usize]) -> Result<Vec<usize>> {
        if !self.supports_cache_mode() {
            return Err(Error::NoCacheMode(self.kind.name()));
        }
        let n = self.n_components;
        if k == 0 {
            return Ok((0..n).collect());
        }
        match &self.kind {
            ScheduleKind::Zero => Ok((0..n).collect()),
            ScheduleKind::Cyclic => {
                Ok((0..n).filter(|&c| self.cyclic_refreshes(k, c)).collect())
            }
            ScheduleKind::UniformRandom { seed } => {
                let mut rng = Self::iteration_rng(*seed, k);
                let p = 1.0 / (self.tau as f64 + 1.0);
                Ok((0..n)
                    .filter(|&c| {
                        let drawn = rng.random::<f64>() < p;
                        // Forced refresh: without it the realized delay at
                        // iteration k would exceed τ.
                        drawn || k - last_refresh[c] > self.tau
                    })
                    .collect())
            }
            ScheduleKind::Fixed { .. } | ScheduleKind::AdversarialMax => unreachable!(),
        }
    }

    /// The refresh set at iteration `k`, replayed from iteration 0 so the
    /// query is pure. Cache-mode engines should advance a [`RefreshCursor`]
    /// instead of calling this in a loop.
    pub fn refresh_set_at(&self, k: usize) -> Result<Vec<usize>> {
        let mut cursor = RefreshCursor::new(self.clone());
        let mut set = Vec::new();
        for j in 0..=k {
            set = cursor.advance(j)?;
        }
        Ok(set)
    }
}

/// Incremental cache-mode driver: tracks the last refresh iteration per
/// component and emits refresh sets one iteration at a time.
#[derive(Debug, Clone)]
pub struct RefreshCursor {
    schedule: DelaySchedule,
    last_refresh: Vec<usize>,
    next_k: usize,
}

impl RefreshCursor {
    pub fn new(schedule: DelaySchedule) -> Self {
        let n = schedule.n_components;
        RefreshCursor {
            schedule,
            last_refresh: vec![0; n],
            next_k: 0,
        }
    }

    pub fn last_refresh(&self) -> &[usize] {
        &self.last_refresh
    }

    /// Refresh set for iteration `k`; must be called with consecutive `k`.
    pub fn advance(&mut self, k: usize) -> Result<Vec<usize>> {
        assert_eq!(k, self.next_k, "refresh cursor must advance one iteration at a time");
        let set = self.schedule.refresh_step(k, &self.last_refresh)?;
        for &c in &set {
            self.last_refresh[c] = k;
        }
        self.next_k += 1;
        Ok(set)
    }
}

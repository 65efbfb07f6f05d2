use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::scalar::Scalar;

/// Monte-Carlo regression target with its importance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct WeightedReturnSample<S> {
    pub obs: Observation<S>,
    pub target: S,
    pub weight: S,
}

/// Samples of one oracle tagged with the iteration that produced them,
/// keeping only the last `window` iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ReplayBuffer<S> {
    pub window: usize,
    entries: Vec<(usize, WeightedReturnSample<S>)>,
    latest: Option<usize>,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            entries: Vec::new(),
            latest: None,
        }
    }

    /// Drops everything older than `iteration - window + 1`.
    pub fn advance(&mut self, iteration: usize) {
        let latest = self.latest.map_or(iteration, |l| l.max(iteration));
        self.latest = Some(latest);
        let oldest = (latest + 1).saturating_sub(self.window);
        self.entries.retain(|(it, _)| *it >= oldest);
    }

    pub fn insert(&mut self, iteration: usize, samples: impl IntoIterator<Item = WeightedReturnSample<S>>) {
        self.entries.extend(samples.into_iter().map(|s| (iteration, s)));
        self.advance(iteration);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &WeightedReturnSample<S>> {
        self.entries.iter().map(|(_, s)| s)
    }

    pub fn iterations(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(it, _)| *it)
    }

    pub fn latest_iteration(&self) -> Option<usize> {
        self.latest
    }

    pub fn get(&self, i: usize) -> &WeightedReturnSample<S> {
        &self.entries[i].1
    }
}

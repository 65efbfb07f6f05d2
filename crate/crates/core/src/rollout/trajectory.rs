use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Step<S> {
    pub t: usize,
    pub obs: Observation<S>,
    pub action: Action<S>,
    pub reward: S,
    pub next: Observation<S>,
    pub done: bool,
}

/// Time-ordered record of one episode, with RIRO switch metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Trajectory<S> {
    pub steps: Vec<Step<S>>,
    pub switch_time: Option<usize>,
    pub switch_oracle: Option<usize>,
    pub importance_weight: S,
    /// The episode ended before the switch time, so only the learner acted.
    pub learner_only: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct Header<S> {
    len: usize,
    switch_time: Option<usize>,
    switch_oracle: Option<usize>,
    importance_weight: S,
    learner_only: bool,
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(steps: Vec<Step<S>>) -> Self {
        Self {
            steps,
            switch_time: None,
            switch_oracle: None,
            importance_weight: S::one(),
            learner_only: false,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_return(&self) -> S {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Checks that time indices rise by one and the length fits the horizon.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.len() > horizon {
            return invalid(format!("trajectory of length {} exceeds horizon {horizon}", self.len()));
        }
        for pair in self.steps.windows(2) {
            if pair[1].t != pair[0].t + 1 {
                return invalid("trajectory time indices must increase by one");
            }
        }
        if !(self.importance_weight >= S::zero() && self.importance_weight.is_finite()) {
            return invalid("importance weight must be finite and nonnegative");
        }
        Ok(())
    }

    /// One header line with the switch metadata, then one line per step.
    pub fn to_jsonl(&self) -> Result<String> {
        let header = Header {
            len: self.len(),
            switch_time: self.switch_time,
            switch_oracle: self.switch_oracle,
            importance_weight: self.importance_weight,
            learner_only: self.learner_only,
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses any number of concatenated [`Trajectory::to_jsonl`] records.
    pub fn many_from_jsonl(text: &str) -> Result<Vec<Self>> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut out = Vec::new();
        while let Some(line) = lines.next() {
            let header: Header<S> = serde_json::from_str(line)?;
            let mut steps = Vec::with_capacity(header.len);
            for _ in 0..header.len {
                let Some(line) = lines.next() else {
                    return invalid("trajectory record truncated");
                };
                steps.push(serde_json::from_str(line)?);
            }
            out.push(Self {
                steps,
                switch_time: header.switch_time,
                switch_oracle: header.switch_oracle,
                importance_weight: header.importance_weight,
                learner_only: header.learner_only,
            });
        }
        Ok(out)
    }
}

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last step of its episode.
    pub terminal: bool,
}

/// A minibatch laid out one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub terminal: Vec<bool>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Shape("a minibatch needs at least one transition".into()))?;
        let (s_len, a_len) = (first.state.len(), first.action.len());
        let n = items.len();
        let mut states = Array2::zeros((n, s_len));
        let mut actions = Array2::zeros((n, a_len));
        let mut next_states = Array2::zeros((n, s_len));
        let mut rewards = Array1::zeros(n);
        let mut terminal = Vec::with_capacity(n);
        for (i, t) in items.iter().enumerate() {
            if t.state.len() != s_len || t.next_state.len() != s_len || t.action.len() != a_len {
                return Err(Error::Shape("transitions in a minibatch differ in size".into()));
            }
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&t.action));
            next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state));
            rewards[i] = t.reward;
            terminal.push(t.terminal);
        }
        Ok(Minibatch {
            states,
            actions,
            rewards,
            next_states,
            terminal,
        })
    }
}

/// Fixed-capacity FIFO of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("rl.buffer_capacity", "must be >= 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `count` slot indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::State("cannot sample from an empty buffer".into()));
        }
        Ok((0..count).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Minibatch> {
        let idx = self.sample_indices(rng, count)?;
        let items: Vec<&Transition> = idx.iter().map(|&i| &self.items[i]).collect();
        Minibatch::from_transitions(&items)
    }
}

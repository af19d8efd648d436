//! Uniform-replay ring buffer.

use rand::Rng;
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("not enough transitions in the replay buffer")]
    InsufficientData,
}

/// One stored interaction. `done` marks genuine terminals (goal or
/// collision); transitions cut off by the episode horizon keep
/// `done = false` so bootstrapping continues past the artificial limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<R: Real = f64> {
    pub s: Box<[R]>,
    pub a: Box<[R]>,
    pub r: R,
    pub s_next: Box<[R]>,
    pub done: bool,
}

/// Fixed-capacity ring: oldest transitions are overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<R: Real = f64> {
    data: Vec<Transition<R>>,
    capacity: usize,
    next: usize,
}

impl<R: Real> ReplayBuffer<R> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            data: Vec::new(),
            capacity,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition<R>) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample<G: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut G,
    ) -> Result<Vec<&Transition<R>>, ReplayError> {
        if self.data.len() < n || n == 0 {
            return Err(ReplayError::InsufficientData);
        }
        Ok((0..n)
            .map(|_| &self.data[rng.gen_range(0..self.data.len())])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<R>> {
        self.data.iter()
    }
}

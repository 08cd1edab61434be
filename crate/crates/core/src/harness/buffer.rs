use std::collections::VecDeque;

use crate::adversary::TrainingSet;
use crate::dynamics::Episode;
use crate::error::{Error, Result};

/// Episode store with FIFO eviction once the transition count exceeds
/// the capacity.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    episodes: VecDeque<Episode>,
    capacity: usize,
    transitions: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Invalid("buffer capacity must be positive".into()));
        }
        Ok(Self {
            episodes: VecDeque::new(),
            capacity,
            transitions: 0,
        })
    }

    /// Appends an episode and returns how many old episodes were evicted.
    pub fn push(&mut self, episode: Episode) -> Result<usize> {
        episode.validate()?;
        if episode.len() > self.capacity {
            return Err(Error::Invalid(format!(
                "episode of {} transitions exceeds buffer capacity {}",
                episode.len(),
                self.capacity
            )));
        }
        self.transitions += episode.len();
        self.episodes.push_back(episode);
        let mut evicted = 0;
        while self.transitions > self.capacity {
            let old = self.episodes.pop_front().unwrap();
            self.transitions -= old.len();
            evicted += 1;
        }
        Ok(evicted)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// All transitions plus every (context, horizon) window lying wholly
    /// inside one episode.
    pub fn training_set(&self, context_len: usize, horizon: usize) -> TrainingSet {
        TrainingSet::from_episodes(self.episodes.iter(), context_len, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(start: f64, len: usize) -> Episode {
        let mut e = Episode::new(vec![start]);
        for t in 0..len {
            e.push(vec![0.0], vec![start + t as f64 + 1.0]);
        }
        e
    }

    #[test]
    fn accounting_and_fifo_eviction() {
        let mut b = ReplayBuffer::new(70).unwrap();
        assert_eq!(b.push(episode(0.0, 30)).unwrap(), 0);
        assert_eq!(b.push(episode(100.0, 30)).unwrap(), 0);
        assert_eq!(b.transitions(), 60);
        assert_eq!(b.push(episode(200.0, 30)).unwrap(), 1);
        assert_eq!(b.transitions(), 60);
        assert_eq!(b.episodes().next().unwrap().states[0], vec![100.0]);
        assert!(b.push(episode(0.0, 71)).is_err());
    }

    #[test]
    fn windows_never_cross_episodes() {
        let mut b = ReplayBuffer::new(1000).unwrap();
        b.push(episode(0.0, 12)).unwrap();
        b.push(episode(100.0, 12)).unwrap();
        let set = b.training_set(2, 3);
        // per episode t runs from 1 while t + 3 <= 12
        assert_eq!(set.windows.len(), 2 * 9);
        assert_eq!(set.transitions.len(), 24);
        for w in &set.windows {
            let base = if w.context[0][0] >= 100.0 { 100.0 } else { 0.0 };
            assert!(w.future.iter().all(|s| s[0] >= base && s[0] <= base + 12.0));
        }
    }
}

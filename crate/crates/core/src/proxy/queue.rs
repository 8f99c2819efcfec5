use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};

use crate::alphabet::ConcreteMessage;

/// FIFO shared between receivers (producers) and the translator (consumer).
#[derive(Debug, Clone, Default)]
pub struct SharedQueue {
    inner: Arc<Mutex<VecDeque<(u64, ConcreteMessage)>>>,
}

impl SharedQueue {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, VecDeque<(u64, ConcreteMessage)>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, ts: u64, msg: ConcreteMessage) {
        self.lock().push_back((ts, msg));
    }

    /// Removes and returns every entry with `ts < end`, in arrival order.
    /// Later entries stay queued for the next window.
    pub fn drain_before(&self, end: u64) -> Vec<(u64, ConcreteMessage)> {
        let mut q = self.lock();
        let (taken, kept): (VecDeque<_>, VecDeque<_>) = q.drain(..).partition(|(ts, _)| *ts < end);
        *q = kept;
        taken.into()
    }

    pub fn clear(&self) {
        self.lock().clear();
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.lock().is_empty()
    }

    pub fn snapshot(&self) -> Vec<(u64, ConcreteMessage)> {
        self.lock().iter().cloned().collect()
    }
}

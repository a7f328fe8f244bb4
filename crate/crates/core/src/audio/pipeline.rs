//! Two-stage threaded wake pipeline: windowing feeds detection through a
//! bounded queue that sheds the oldest window when full.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use super::chunk::{AudioWindow, ChunkConfig, Chunker};
use super::wake::{detect_wake, WakeClassifier, WakeConfig};
use super::AudioError;

/// Bounded MPSC queue; `push` on a full queue evicts the front.
#[derive(Debug)]
pub struct DropOldestQueue<T> {
    state: Mutex<QueueState<T>>,
    ready: Condvar,
    capacity: usize,
}

#[derive(Debug)]
struct QueueState<T> {
    items: VecDeque<T>,
    closed: bool,
    dropped: usize,
}

impl<T> DropOldestQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        DropOldestQueue {
            state: Mutex::new(QueueState {
                items: VecDeque::with_capacity(capacity),
                closed: false,
                dropped: 0,
            }),
            ready: Condvar::new(),
            capacity,
        }
    }

    /// Returns the evicted item, if any.
    pub fn push(&self, item: T) -> Option<T> {
        let mut s = self.state.lock().expect("queue poisoned");
        let evicted = if s.items.len() == self.capacity {
            s.dropped += 1;
            s.items.pop_front()
        } else {
            None
        };
        s.items.push_back(item);
        self.ready.notify_one();
        evicted
    }

    /// Blocks until an item arrives; `None` once closed and drained.
    pub fn pop(&self) -> Option<T> {
        let mut s = self.state.lock().expect("queue poisoned");
        loop {
            if let Some(x) = s.items.pop_front() {
                return Some(x);
            }
            if s.closed {
                return None;
            }
            s = self.ready.wait(s).expect("queue poisoned");
        }
    }

    pub fn close(&self) {
        self.state.lock().expect("queue poisoned").closed = true;
        self.ready.notify_all();
    }

    pub fn dropped(&self) -> usize {
        self.state.lock().expect("queue poisoned").dropped
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("queue poisoned").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WakeEvent {
    pub window_start: f64,
    /// Stream time at which the whole window was available.
    pub decided_at: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub events: Vec<WakeEvent>,
    pub windows_classified: usize,
    pub windows_dropped: usize,
    pub classifier_errors: usize,
}

/// Stream `blocks` through chunking and wake detection on separate
/// threads. Windows beyond `high_water` waiting for the classifier are
/// dropped oldest-first.
pub fn run_wake_pipeline<I>(
    blocks: I,
    chunk: ChunkConfig,
    wake: &WakeConfig,
    classifier: &(dyn WakeClassifier + Sync),
    high_water: usize,
) -> Result<PipelineReport, AudioError>
where
    I: IntoIterator<Item = Vec<f64>>,
    I::IntoIter: Send,
{
    wake.validate()?;
    let mut chunker = Chunker::new(chunk)?;
    let queue: DropOldestQueue<AudioWindow> = DropOldestQueue::new(high_water);
    let blocks = blocks.into_iter();
    let mut report = thread::scope(|s| {
        s.spawn(|| {
            for b in blocks {
                for w in chunker.push(&b) {
                    if let Some(old) = queue.push(w) {
                        log::warn!("dropped window at {:.3}s", old.start_time);
                    }
                }
            }
            if let Some(w) = chunker.finish() {
                queue.push(w);
            }
            queue.close();
        });
        let mut report = PipelineReport::default();
        while let Some(w) = queue.pop() {
            report.windows_classified += 1;
            match detect_wake(&w, classifier, wake) {
                Ok(true) => report.events.push(WakeEvent {
                    window_start: w.start_time,
                    decided_at: w.end_time(chunk.sample_rate),
                }),
                Ok(false) => {}
                Err(e) => {
                    log::warn!("window at {:.3}s skipped: {e}", w.start_time);
                    report.classifier_errors += 1;
                }
            }
        }
        report
    });
    report.windows_dropped = queue.dropped();
    Ok(report)
}

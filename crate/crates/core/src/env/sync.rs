//! Timestamp synchronizer for the closed control loop: a decision runs only
//! when the latest image, odometry and goal messages lie within 100 ms of
//! each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SYNC_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Image,
    Odometry,
    Goal,
}

impl MessageKind {
    const ALL: [MessageKind; 3] = [MessageKind::Image, MessageKind::Odometry, MessageKind::Goal];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedMessage<T> {
    pub kind: MessageKind,
    pub timestamp: f64,
    pub payload: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncBundle<T> {
    pub image: TimedMessage<T>,
    pub odometry: TimedMessage<T>,
    pub goal: TimedMessage<T>,
}

impl<T> SyncBundle<T> {
    pub fn spread(&self) -> f64 {
        let ts = [self.image.timestamp, self.odometry.timestamp, self.goal.timestamp];
        ts.iter().copied().fold(f64::NEG_INFINITY, f64::max) - ts.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
struct Slot<T> {
    msg: TimedMessage<T>,
    stale: bool,
}

/// Holds the latest message of each kind.
#[derive(Debug, Clone)]
pub struct MessageSynchronizer<T> {
    slots: [Option<Slot<T>>; 3],
    pub window: f64,
}

impl<T: Clone> Default for MessageSynchronizer<T> {
    fn default() -> Self {
        MessageSynchronizer {
            slots: [None, None, None],
            window: SYNC_WINDOW,
        }
    }
}

impl<T: Clone> MessageSynchronizer<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replace the latest message of this kind.
    pub fn push(&mut self, msg: TimedMessage<T>) -> Result<()> {
        if !msg.timestamp.is_finite() {
            return Err(Error::InvalidConfig(format!("non-finite timestamp {}", msg.timestamp)));
        }
        let slot = msg.kind.slot();
        self.slots[slot] = Some(Slot { msg, stale: false });
        Ok(())
    }

    /// A bundle iff all three kinds have fresh messages no later than `now`
    /// whose pairwise timestamp gap is within the window. Returned messages
    /// become stale.
    pub fn sync_step(&mut self, now: f64) -> Option<SyncBundle<T>> {
        let mut ts = [0.0; 3];
        for k in MessageKind::ALL {
            match &self.slots[k.slot()] {
                Some(s) if !s.stale && s.msg.timestamp <= now => ts[k.slot()] = s.msg.timestamp,
                _ => return None,
            }
        }
        let max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ts.iter().copied().fold(f64::INFINITY, f64::min);
        if max - min > self.window {
            return None;
        }
        let mut take = |k: MessageKind| {
            let s = self.slots[k.slot()].as_mut().expect("checked above");
            s.stale = true;
            s.msg.clone()
        };
        Some(SyncBundle {
            image: take(MessageKind::Image),
            odometry: take(MessageKind::Odometry),
            goal: take(MessageKind::Goal),
        })
    }
}

use alloc::collections::VecDeque;

/// Per-agent state: resource `x`, momentum `y`, and the agent's own recent
/// transmitted payloads keyed by round stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub(crate) x: f64,
    pub(crate) y: f64,
    history: PayloadHistory,
}

impl AgentState {
    /// State at round 0: `x = b_i`, `y = 0`, history holding the round-0 payload.
    pub fn new(demand: f64, payload: f64, tau_bar: usize) -> Self {
        let mut history = PayloadHistory::new(tau_bar + 1);
        history.push(0, payload);
        Self {
            x: demand,
            y: 0.0,
            history,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn history(&self) -> &PayloadHistory {
        &self.history
    }

    pub(crate) fn history_mut(&mut self) -> &mut PayloadHistory {
        &mut self.history
    }
}

/// Ring buffer of the last `capacity` stamped payloads. Stamps are pushed in
/// strictly consecutive order.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadHistory {
    capacity: usize,
    first_stamp: u64,
    payloads: VecDeque<f64>,
}

impl PayloadHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            capacity,
            first_stamp: 0,
            payloads: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, stamp: u64, payload: f64) {
        if self.payloads.is_empty() {
            self.first_stamp = stamp;
        } else {
            debug_assert_eq!(stamp, self.first_stamp + self.payloads.len() as u64);
        }
        self.payloads.push_back(payload);
        if self.payloads.len() > self.capacity {
            self.payloads.pop_front();
            self.first_stamp += 1;
        }
    }

    pub fn get(&self, stamp: u64) -> Option<f64> {
        let offset = stamp.checked_sub(self.first_stamp)?;
        self.payloads.get(usize::try_from(offset).ok()?).copied()
    }

    pub fn latest(&self) -> Option<(u64, f64)> {
        let last = *self.payloads.back()?;
        Some((self.first_stamp + self.payloads.len() as u64 - 1, last))
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    /// Stamps currently retained, oldest first.
    pub fn stamps(&self) -> core::ops::Range<u64> {
        self.first_stamp..self.first_stamp + self.payloads.len() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_keeps_last_capacity_entries() {
        let mut h = PayloadHistory::new(3);
        for s in 0..10u64 {
            h.push(s, s as f64 * 0.5);
            assert_eq!(h.len(), (s as usize + 1).min(3));
        }
        assert_eq!(h.stamps(), 7..10);
        assert_eq!(h.get(6), None);
        assert_eq!(h.get(7), Some(3.5));
        assert_eq!(h.get(9), Some(4.5));
        assert_eq!(h.get(10), None);
        assert_eq!(h.latest(), Some((9, 4.5)));
    }

    #[test]
    fn initial_agent_state() {
        let a = AgentState::new(50.0, 1.25, 4);
        assert_eq!(a.x(), 50.0);
        assert_eq!(a.y(), 0.0);
        assert_eq!(a.history().get(0), Some(1.25));
        assert_eq!(a.history().len(), 1);
    }
}

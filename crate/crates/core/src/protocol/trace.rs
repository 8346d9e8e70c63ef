use alloc::vec::Vec;

/// State of the network after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Round index; row `k` holds `x(k)`.
    pub k: u64,
    /// `F(x(k))`.
    pub cost: f64,
    /// `|Σ (x_i(k) − b_i)|`.
    pub feas_gap: f64,
    /// `max_i ∂f_i − min_i ∂f_i` at `x(k)`.
    pub dispersion: f64,
    /// Links realized in the round that produced this state (0 for `k = 0`).
    pub edges: usize,
    /// Messages consumed in that round.
    pub msgs: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Per-round time series of a simulation run, starting with the initial state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub n: usize,
    pub total_demand: f64,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(n: usize, total_demand: f64) -> Self {
        Self {
            n,
            total_demand,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.cost)
    }

    pub fn max_feas_gap(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.feas_gap))
    }

    /// `max_k |Σ_i y_i(k)|`.
    pub fn max_momentum_sum(&self) -> f64 {
        self.rows
            .iter()
            .fold(0.0, |m, r| m.max(r.y.iter().sum::<f64>().abs()))
    }

    /// `max_k ‖x(k)‖∞`.
    pub fn max_state_norm(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.x.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

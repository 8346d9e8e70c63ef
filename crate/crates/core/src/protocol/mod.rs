//! The delay-tolerant momentum protocol and its synchronous round engine.
//!
//! At round `k` every agent `i` applies
//!
//! ```text
//! x_i(k+1) = x_i(k) + η Σ_j Σ_r W_ij (g(∂f_j(k−r)) − g(∂f_i(k−r))) I_{k−r,ij}(r) + μ y_i(k)
//! y_i(k+1) = x_i(k+1) − x_i(k)
//! ```
//!
//! where `g` is the channel map and `I` selects the single delay `r` with which
//! the payload stamped `k−r` over link `{i, j}` arrives. Each agent pairs a
//! neighbour's stamped payload with its *own* payload of the same stamp, so
//! every exchange is antisymmetric and `Σ x_i` never changes. With `τ̄ = 0`
//! this reduces to the delay-free nonlinear update, and with the identity map
//! to the linear one.

mod agent;
mod delay;
mod trace;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use agent::{AgentState, PayloadHistory};
pub use delay::{DelayDistribution, DelayModel};
pub use trace::{Trace, TraceRow};

use crate::analysis::{feasibility_gap, gradient_dispersion};
use crate::costs::{LocalCost, Problem};
use crate::graph::SwitchingNetwork;
use crate::nonlinearity::{MapError, SectorMap};

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    InvalidMomentum(f64),
    InvalidStep(f64),
    SizeMismatch { problem: usize, network: usize },
    InvalidMap(MapError),
    InvalidDelay(&'static str),
    /// A payload arrived with a stamp older than the retained history.
    HistoryMiss { agent: usize, stamp: u64, round: u64 },
    ZeroRounds,
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidMomentum(mu) => write!(f, "momentum rate {mu} outside [0, 1)"),
            Self::InvalidStep(eta) => write!(f, "step rate {eta} must be positive"),
            Self::SizeMismatch { problem, network } => write!(
                f,
                "problem has {problem} agents but network has {network} nodes"
            ),
            Self::InvalidMap(e) => write!(f, "{e}"),
            Self::InvalidDelay(what) => write!(f, "invalid delay model: {what}"),
            Self::HistoryMiss {
                agent,
                stamp,
                round,
            } => write!(
                f,
                "agent {agent} has no payload for stamp {stamp} at round {round} (delay bound violated)"
            ),
            Self::ZeroRounds => write!(f, "round count must be at least 1"),
        }
    }
}

impl core::error::Error for EngineError {}

/// A stamped payload in flight from `sender` to `receiver`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    pub stamp: u64,
    pub payload: f64,
    pub weight: f64,
}

/// One consumed message, recorded when delivery logging is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Delivery {
    pub sender: usize,
    pub receiver: usize,
    pub stamp: u64,
    pub round: u64,
}

/// What happened during one call to [`Engine::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundSummary {
    pub round: u64,
    pub edges: usize,
    pub delivered: usize,
}

/// Synchronous round-based simulator.
///
/// All round-`k` deliveries are consumed before any agent updates, and a run
/// is a deterministic function of its inputs.
#[derive(Debug, Clone)]
pub struct Engine {
    problem: Problem,
    network: SwitchingNetwork,
    map: SectorMap,
    delays: DelayModel,
    eta: f64,
    mu: f64,
    round: u64,
    agents: Vec<AgentState>,
    in_flight: BTreeMap<u64, Vec<Message>>,
    increments: Vec<f64>,
    scratch: Vec<f64>,
    log: Option<Vec<Delivery>>,
}

impl Engine {
    pub fn new(
        problem: Problem,
        network: SwitchingNetwork,
        map: SectorMap,
        delays: DelayModel,
        eta: f64,
        mu: f64,
    ) -> Result<Self, EngineError> {
        if !(0.0..1.0).contains(&mu) {
            return Err(EngineError::InvalidMomentum(mu));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(EngineError::InvalidStep(eta));
        }
        if problem.n() != network.n() {
            return Err(EngineError::SizeMismatch {
                problem: problem.n(),
                network: network.n(),
            });
        }
        map.validate().map_err(EngineError::InvalidMap)?;

        let tau_bar = delays.tau_bar();
        let agents = problem
            .costs()
            .iter()
            .zip(problem.demands())
            .map(|(c, &b)| AgentState::new(b, map.apply(c.gradient(b)), tau_bar))
            .collect();
        let n = problem.n();
        Ok(Self {
            problem,
            network,
            map,
            delays,
            eta,
            mu,
            round: 0,
            agents,
            in_flight: BTreeMap::new(),
            increments: vec![0.0; n],
            scratch: vec![0.0; n],
            log: None,
        })
    }

    /// Turns on recording of every consumed message (see [`Engine::deliveries`]).
    pub fn record_deliveries(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn deliveries(&self) -> &[Delivery] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn network(&self) -> &SwitchingNetwork {
        &self.network
    }

    pub fn map(&self) -> &SectorMap {
        &self.map
    }

    pub fn delays(&self) -> &DelayModel {
        &self.delays
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn x(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.x).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.y).collect()
    }

    /// The update `η·Σ(consumed terms) + μ·y_i` applied to each agent in the
    /// last round, before it was added to `x_i`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Messages scheduled for future rounds.
    pub fn pending(&self) -> usize {
        self.in_flight.values().map(Vec::len).sum()
    }

    pub fn step(&mut self) -> Result<RoundSummary, EngineError> {
        let k = self.round;
        let topo = self.network.realize(k);

        for e in topo.edges() {
            let r = self.delays.sample(k, topo.pair_key(e.i, e.j)) as u64;
            let pi = self.current_payload(e.i);
            let pj = self.current_payload(e.j);
            let queue = self.in_flight.entry(k + r).or_default();
            queue.push(Message {
                sender: e.i,
                receiver: e.j,
                stamp: k,
                payload: pi,
                weight: e.weight,
            });
            queue.push(Message {
                sender: e.j,
                receiver: e.i,
                stamp: k,
                payload: pj,
                weight: e.weight,
            });
        }

        let arrivals = self.in_flight.remove(&k).unwrap_or_default();
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        for m in &arrivals {
            let own = self.agents[m.receiver]
                .history()
                .get(m.stamp)
                .ok_or(EngineError::HistoryMiss {
                    agent: m.receiver,
                    stamp: m.stamp,
                    round: k,
                })?;
            self.scratch[m.receiver] += m.weight * (m.payload - own);
            if let Some(log) = &mut self.log {
                log.push(Delivery {
                    sender: m.sender,
                    receiver: m.receiver,
                    stamp: m.stamp,
                    round: k,
                });
            }
        }

        for ((agent, acc), inc) in self
            .agents
            .iter_mut()
            .zip(&self.scratch)
            .zip(&mut self.increments)
        {
            *inc = self.eta * acc + self.mu * agent.y;
            let next = agent.x + *inc;
            agent.y = next - agent.x;
            agent.x = next;
        }

        for (agent, cost) in self.agents.iter_mut().zip(self.problem.costs()) {
            let payload = self.map.apply(cost.gradient(agent.x));
            agent.history_mut().push(k + 1, payload);
        }

        self.round = k + 1;
        Ok(RoundSummary {
            round: k,
            edges: topo.edge_count(),
            delivered: arrivals.len(),
        })
    }

    fn current_payload(&self, i: usize) -> f64 {
        let (stamp, payload) = self.agents[i]
            .history()
            .latest()
            .expect("history always holds the current payload");
        debug_assert_eq!(stamp, self.round);
        payload
    }

    /// Snapshot of the current state as a trace row.
    pub fn snapshot(&self, edges: usize, msgs: usize) -> TraceRow {
        let x = self.x();
        TraceRow {
            k: self.round,
            cost: self.problem.value(&x),
            feas_gap: feasibility_gap(&self.problem, &x),
            dispersion: gradient_dispersion(&self.problem, &x),
            edges,
            msgs,
            y: self.y(),
            x,
        }
    }

    /// Runs `rounds` steps and returns the initial state followed by one row
    /// per step.
    pub fn run(&mut self, rounds: usize) -> Result<Trace, EngineError> {
        self.run_until(rounds, None)
    }

    /// Like [`Engine::run`] but stops early once the gradient dispersion falls
    /// below `dispersion_tol`.
    pub fn run_until(
        &mut self,
        rounds: usize,
        dispersion_tol: Option<f64>,
    ) -> Result<Trace, EngineError> {
        if rounds == 0 {
            return Err(EngineError::ZeroRounds);
        }
        let mut trace = Trace::new(self.problem.n(), self.problem.total_demand());
        trace.rows.reserve(rounds + 1);
        trace.rows.push(self.snapshot(0, 0));
        for _ in 0..rounds {
            let s = self.step()?;
            let row = self.snapshot(s.edges, s.delivered);
            let done = dispersion_tol.is_some_and(|tol| row.dispersion < tol);
            trace.rows.push(row);
            if done {
                break;
            }
        }
        Ok(trace)
    }
}

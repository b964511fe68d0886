use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gate::ResolvedGate;
use super::state::QuantumState;
use super::{memory_cap, Circuit, Layout, StateError};
use crate::relations::OracleTable;

/// Per-label oracle answer: receives the full basis label and the queried input.
pub type AnswerFn = dyn Fn(&[u32], u32) -> u32 + Send + Sync;

/// A non-unitary step supplied by a caller. It returns the surviving part of
/// its (unit-norm) input and the probability mass it removed.
pub type CustomOp = Arc<dyn Fn(&QuantumState) -> Result<(QuantumState, f64), StateError> + Send + Sync>;

/// How a query treats its input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QueryNoise {
    Coherent,
    /// Classical with probability `p`: the input is measured first.
    Noisy(f64),
    /// Always measure the input first.
    MeasureFirst,
}

#[derive(Clone)]
pub struct QueryOp {
    /// Index in the circuit's query pattern (or past it for appended queries).
    pub position: usize,
    pub input: usize,
    pub output: usize,
    /// History slot written by a purified classical query.
    pub history: Option<usize>,
    pub check_duplicates: bool,
    pub noise: QueryNoise,
    pub answer: Arc<AnswerFn>,
}

#[derive(Clone)]
pub enum Op {
    Unitary(ResolvedGate),
    Query(QueryOp),
    /// Full computational-basis measurement.
    Dephase,
    Measure(usize),
    Custom {
        name: &'static str,
        apply: CustomOp,
        /// Counts as one query to the reprogramming oracle.
        g_query: bool,
    },
}

/// Operations over a layout, plus the registers read out at the end.
#[derive(Clone)]
pub struct Program {
    pub layout: Arc<Layout>,
    pub ops: Vec<Op>,
    pub outputs: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Pure,
    Noisy { p: f64 },
    Depth { d: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Enumerate every noise coin and measurement outcome.
    Exhaustive,
    /// Sample `trials` paths from a seeded stream.
    Trajectories { trials: u64, seed: u64 },
}

/// How static classical queries are realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClassicalSemantics {
    /// Coherent query plus a history record.
    #[default]
    Purified,
    /// Measure the input, then answer.
    MeasureThenForward,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    pub backend: Backend,
    pub classical: ClassicalSemantics,
    pub memory_cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Pure,
            backend: Backend::Exhaustive,
            classical: ClassicalSemantics::Purified,
            memory_cap: memory_cap(),
        }
    }
}

/// The random choices along one branch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    /// Sampling stream, `None` for exhaustive branches.
    pub stream: Option<u64>,
    /// One coin per noisy query: `true` when answered classically.
    pub coins: Vec<bool>,
    pub outcomes: Vec<u32>,
    /// Product of the probabilities of the recorded choices.
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct Branch {
    /// Contribution of this branch to the final distribution.
    pub weight: f64,
    /// Unit-norm state.
    pub state: QuantumState,
    pub trace: Trajectory,
    pub g_queries: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunStats {
    pub unitary_steps: u64,
    /// Largest `|‖ψ'‖² − ‖ψ‖²|` over unitary gates and coherent queries.
    pub max_norm_drift: f64,
    pub peak_branches: usize,
}

impl RunStats {
    fn merge(&mut self, other: &RunStats) {
        self.unitary_steps += other.unitary_steps;
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        self.peak_branches = self.peak_branches.max(other.peak_branches);
    }
}

pub type Distribution = BTreeMap<Vec<u32>, f64>;

#[derive(Clone, Debug)]
pub struct Execution {
    pub branches: Vec<Branch>,
    /// Mass removed by custom (abort) steps.
    pub aborted: f64,
    pub outputs: Vec<usize>,
    pub stats: RunStats,
}

impl Execution {
    /// Surviving weight plus aborted mass; 1 for a complete branch set.
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum::<f64>() + self.aborted
    }

    /// Joint distribution of the output registers over surviving branches.
    pub fn distribution(&self) -> Distribution {
        self.distribution_of(&self.outputs)
    }

    pub fn distribution_of(&self, regs: &[usize]) -> Distribution {
        let mut out = Distribution::new();
        for b in &self.branches {
            for (label, p) in b.state.marginal(regs) {
                *out.entry(label).or_insert(0.0) += b.weight * p;
            }
        }
        out
    }
}

struct Walker<'a> {
    cap: usize,
    stats: RunStats,
    rng: Option<&'a mut ChaCha8Rng>,
}

impl Walker<'_> {
    fn unitary_step(&mut self, before: f64, after: &QuantumState) {
        self.stats.unitary_steps += 1;
        let drift = (after.norm_sqr() - before).abs();
        self.stats.max_norm_drift = self.stats.max_norm_drift.max(drift);
    }

    /// Chooses among weighted alternatives: all of them when exhaustive,
    /// one sampled entry (with weight 1) along a trajectory.
    fn choose<T>(&mut self, options: Vec<(f64, T)>) -> Vec<(f64, f64, T)> {
        match self.rng.as_deref_mut() {
            None => options.into_iter().map(|(p, t)| (p, p, t)).collect(),
            Some(rng) => {
                let total: f64 = options.iter().map(|o| o.0).sum();
                let mut u = rng.random::<f64>() * total;
                let last = options.len() - 1;
                for (i, (p, t)) in options.into_iter().enumerate() {
                    if u < p || i == last {
                        return vec![(1.0, p, t)];
                    }
                    u -= p;
                }
                unreachable!()
            }
        }
    }

    fn step(&mut self, op: &Op, b: Branch, aborted: &mut f64) -> Result<Vec<Branch>, StateError> {
        let mut out = Vec::new();
        match op {
            Op::Unitary(g) => {
                let before = b.state.norm_sqr();
                let state = b.state.apply(g);
                self.unitary_step(before, &state);
                out.push(Branch { state, ..b });
            }
            Op::Query(q) => {
                let coherent = |w: &mut Self, s: &QuantumState| -> Result<QuantumState, StateError> {
                    let before = s.norm_sqr();
                    let next = match q.history {
                        Some(slot) => s.classical_query(q.input, q.output, slot, q.check_duplicates, &*q.answer)?,
                        None => s.quantum_query(q.input, q.output, &*q.answer),
                    };
                    w.unitary_step(before, &next);
                    Ok(next)
                };
                let p = match q.noise {
                    QueryNoise::Coherent => 0.0,
                    QueryNoise::Noisy(p) => p,
                    QueryNoise::MeasureFirst => 1.0,
                };
                let mut options: Vec<(f64, Option<(u32, QuantumState)>)> = Vec::new();
                if p < 1.0 {
                    options.push((1.0 - p, None));
                }
                if p > 0.0 {
                    for (v, w, s) in b.state.measure(q.input) {
                        options.push((p * w, Some((v, s))));
                    }
                }
                let noisy = matches!(q.noise, QueryNoise::Noisy(_));
                for (scale, prob, choice) in self.choose(options) {
                    let mut trace = b.trace.clone();
                    trace.weight *= prob;
                    let state = match choice {
                        None => {
                            if noisy {
                                trace.coins.push(false);
                            }
                            coherent(self, &b.state)?
                        }
                        Some((v, s)) => {
                            if noisy {
                                trace.coins.push(true);
                            }
                            trace.outcomes.push(v);
                            coherent(self, &s)?
                        }
                    };
                    out.push(Branch {
                        weight: b.weight * scale,
                        state,
                        trace,
                        g_queries: b.g_queries,
                    });
                }
            }
            Op::Dephase | Op::Measure(_) => {
                let parts: Vec<(f64, (Option<u32>, QuantumState))> = match op {
                    Op::Measure(r) => b
                        .state
                        .measure(*r)
                        .into_iter()
                        .map(|(v, w, s)| (w, (Some(v), s)))
                        .collect(),
                    _ => b.state.dephase().into_iter().map(|(w, s)| (w, (None, s))).collect(),
                };
                for (scale, prob, (v, state)) in self.choose(parts) {
                    let mut trace = b.trace.clone();
                    trace.weight *= prob;
                    trace.outcomes.extend(v);
                    out.push(Branch {
                        weight: b.weight * scale,
                        state,
                        trace,
                        g_queries: b.g_queries,
                    });
                }
            }
            Op::Custom { apply, g_query, .. } => {
                let (kept, removed) = apply(&b.state)?;
                *aborted += b.weight * removed;
                let (state, survived) = kept.normalized();
                if survived > 0.0 {
                    out.push(Branch {
                        weight: b.weight * survived,
                        state,
                        g_queries: b.g_queries + *g_query as usize,
                        trace: b.trace,
                    });
                }
            }
        }
        out.retain(|br| br.weight > 0.0);
        for br in &out {
            br.state.check_cap(self.cap)?;
        }
        Ok(out)
    }

    fn run(&mut self, program: &Program, start: Branch) -> Result<(Vec<Branch>, f64), StateError> {
        let mut branches = vec![start];
        let mut aborted = 0.0;
        for op in &program.ops {
            let mut next = Vec::with_capacity(branches.len());
            for b in branches {
                next.extend(self.step(op, b, &mut aborted)?);
            }
            if next.len() > self.cap {
                return Err(StateError::MemoryCapExceeded {
                    size: next.len(),
                    cap: self.cap,
                });
            }
            self.stats.peak_branches = self.stats.peak_branches.max(next.len());
            branches = next;
        }
        Ok((branches, aborted))
    }
}

/// Runs `program` from `initial` (unit norm).
pub fn execute(
    program: &Program,
    initial: QuantumState,
    backend: Backend,
    cap: usize,
) -> Result<Execution, StateError> {
    if initial.layout().as_ref() != program.layout.as_ref() {
        return Err(StateError::LayoutMismatch("initial state layout differs from program".into()));
    }
    initial.check_cap(cap)?;
    let start = |stream: Option<u64>| Branch {
        weight: 1.0,
        state: initial.clone(),
        trace: Trajectory {
            stream,
            weight: 1.0,
            ..Default::default()
        },
        g_queries: 0,
    };
    match backend {
        Backend::Exhaustive => {
            let mut walker = Walker {
                cap,
                stats: RunStats::default(),
                rng: None,
            };
            let (branches, aborted) = walker.run(program, start(None))?;
            Ok(Execution {
                branches,
                aborted,
                outputs: program.outputs.clone(),
                stats: walker.stats,
            })
        }
        Backend::Trajectories { trials, seed } => {
            if trials == 0 {
                return Err(StateError::InvalidCircuit("trajectory mode needs at least one trial".into()));
            }
            let runs = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(t);
                    let mut walker = Walker {
                        cap,
                        stats: RunStats::default(),
                        rng: Some(&mut rng),
                    };
                    let (branches, aborted) = walker.run(program, start(Some(t)))?;
                    Ok((branches, aborted, walker.stats))
                })
                .collect::<Result<Vec<_>, StateError>>()?;
            let scale = 1.0 / trials as f64;
            let mut exec = Execution {
                branches: Vec::new(),
                aborted: 0.0,
                outputs: program.outputs.clone(),
                stats: RunStats::default(),
            };
            for (branches, aborted, stats) in runs {
                exec.aborted += aborted * scale;
                exec.stats.merge(&stats);
                exec.branches.extend(branches.into_iter().map(|b| Branch {
                    weight: b.weight * scale,
                    ..b
                }));
            }
            Ok(exec)
        }
    }
}

/// Runs a circuit against `oracle` from `|0…0⟩`.
pub fn run_circuit(circuit: &Circuit, oracle: &OracleTable, options: &RunOptions) -> Result<Execution, StateError> {
    let program = circuit.program(oracle, options.mode, options.classical)?;
    let initial = QuantumState::zero(program.layout.clone());
    execute(&program, initial, options.backend, options.memory_cap)
}

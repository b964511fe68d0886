//! The coherent measure-and-reprogram simulator for hybrid algorithms.
//!
//! The simulator runs the adversary with a control register holding the
//! reprogrammed pairs. At `k` scheduled query positions it coherently
//! records the current input together with `G(input)`, and every query is
//! answered through `H` patched by the recorded pairs. The adversary's
//! circuit is extended by `k` classical queries on its output registers, so
//! the position universe has `q` quantum and `c + k` classical positions.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_traits::ToPrimitive;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{binomial, Bounds, BoundsError};
use crate::relations::{reprogram, Oracle, OracleTable, OutputTuple, RelationError};
use crate::statevec::{
    decode_pair, encode_pair, execute, slot_dim, AnswerFn, Backend, Circuit, ClassicalSemantics,
    CustomOp, Mode, Op, Program, QuantumState, QueryKind, QueryNoise, QueryOp, RegisterRole,
    RunOptions, RunStats, StateError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprogramError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("the circuit has no output registers")]
    NoOutputs,
}

/// Which positions get reprogrammed, and on which side of the query.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReprogramSchedule {
    /// Number of chosen positions that are quantum queries.
    pub t: usize,
    /// Strictly increasing 0-based positions in the extended pattern.
    pub v: Vec<usize>,
    /// `false`: update the control register before the query; `true`: after.
    pub b: Vec<bool>,
}

impl ReprogramSchedule {
    pub fn validate(&self, pattern: &[QueryKind]) -> Result<(), ReprogramError> {
        let bad = |m: &str| Err(ReprogramError::InvalidSchedule(m.into()));
        if self.v.len() != self.b.len() {
            return bad("v and b differ in length");
        }
        if self.v.windows(2).any(|w| w[0] >= w[1]) {
            return bad("positions must be strictly increasing");
        }
        if self.v.iter().any(|&i| i >= pattern.len()) {
            return bad("position beyond the query pattern");
        }
        let t = self.v.iter().filter(|&&i| pattern[i] == QueryKind::Quantum).count();
        if t != self.t {
            return bad("t does not match the quantum positions in v");
        }
        Ok(())
    }
}

/// The circuit's pattern followed by `k` classical verification queries.
pub fn extended_pattern(circuit: &Circuit) -> Vec<QueryKind> {
    let mut p = circuit.pattern.clone();
    p.extend(std::iter::repeat_n(QueryKind::Classical, circuit.arity()));
    p
}

fn split_positions(pattern: &[QueryKind]) -> (Vec<usize>, Vec<usize>) {
    (0..pattern.len()).partition(|&i| pattern[i] == QueryKind::Quantum)
}

/// Draws `t ~ α_t`, then `v⃗` uniformly among position sets with exactly `t`
/// quantum positions, then `b⃗` uniformly.
pub fn sample_schedule<R: Rng + ?Sized>(
    k: usize,
    pattern: &[QueryKind],
    rng: &mut R,
) -> Result<ReprogramSchedule, ReprogramError> {
    let (quantum, classical) = split_positions(pattern);
    let alpha = Bounds::default().alpha_distribution(k as u64, quantum.len() as u64, classical.len() as u64)?;
    let weights: Vec<f64> = alpha.iter().map(|a| a.to_f64()).collect();
    let mut u = rng.random::<f64>();
    let mut t = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            t = i;
            break;
        }
        u -= w;
    }
    // guard against rounding landing on a zero-mass tail
    while weights[t] == 0.0 {
        t -= 1;
    }
    let mut v: Vec<usize> = sample(rng, quantum.len(), t)
        .into_iter()
        .map(|i| quantum[i])
        .chain(sample(rng, classical.len(), k - t).into_iter().map(|i| classical[i]))
        .collect();
    v.sort_unstable();
    let b = (0..k).map(|_| rng.random::<bool>()).collect();
    Ok(ReprogramSchedule { t, v, b })
}

/// All `k`-subsets of `items`, in lexicographic order.
fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn all_bits(k: usize) -> Vec<Vec<bool>> {
    (0..1u64 << k)
        .map(|m| (0..k).map(|j| m >> j & 1 == 1).collect())
        .collect()
}

/// Every schedule with its probability under [`sample_schedule`]:
/// `α_t / (C(q,t)·C(c,k−t)) / 2^k`.
pub fn enumerate_schedules(
    k: usize,
    pattern: &[QueryKind],
) -> Result<Vec<(f64, ReprogramSchedule)>, ReprogramError> {
    let (quantum, classical) = split_positions(pattern);
    let (q, c) = (quantum.len() as u64, classical.len() as u64);
    let alpha = Bounds::default().alpha_distribution(k as u64, q, c)?;
    let bits = all_bits(k);
    let mut out = Vec::new();
    for (t, a) in alpha.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let count = binomial(q, t as u64) * binomial(c, (k - t) as u64);
        let per_set = a.to_f64() / count.to_f64().expect("small count") / bits.len() as f64;
        for qs in subsets(&quantum, t) {
            for cs in subsets(&classical, k - t) {
                let mut v: Vec<usize> = qs.iter().chain(&cs).copied().collect();
                v.sort_unstable();
                for b in &bits {
                    out.push((per_set, ReprogramSchedule { t, v: v.clone(), b: b.clone() }));
                }
            }
        }
    }
    Ok(out)
}

/// Uniform schedules over all `C(T, k)` position sets and all `b⃗`, as used
/// by the noisy simulator.
pub fn enumerate_uniform_schedules(k: usize, pattern: &[QueryKind]) -> Vec<(f64, ReprogramSchedule)> {
    let positions: Vec<usize> = (0..pattern.len()).collect();
    let sets = subsets(&positions, k);
    let bits = all_bits(k);
    let w = 1.0 / (sets.len() * bits.len()) as f64;
    let mut out = Vec::new();
    for v in sets {
        let t = v.iter().filter(|&&i| pattern[i] == QueryKind::Quantum).count();
        for b in &bits {
            out.push((w, ReprogramSchedule { t, v: v.clone(), b: b.clone() }));
        }
    }
    out
}

/// Draws a uniform schedule for the noisy simulator.
pub fn sample_uniform_schedule<R: Rng + ?Sized>(k: usize, pattern: &[QueryKind], rng: &mut R) -> ReprogramSchedule {
    let mut v = sample(rng, pattern.len(), k).into_vec();
    v.sort_unstable();
    let t = v.iter().filter(|&&i| pattern[i] == QueryKind::Quantum).count();
    let b = (0..k).map(|_| rng.random::<bool>()).collect();
    ReprogramSchedule { t, v, b }
}

/// The reprogrammed pairs carried in the control slots of a basis label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControlList {
    pub pairs: Vec<(u32, u32)>,
}

impl ControlList {
    pub fn read(key: &[u32], slots: &[usize], n: u32) -> Self {
        ControlList {
            pairs: slots.iter().filter_map(|&r| decode_pair(key[r], n)).collect(),
        }
    }

    pub fn lookup(&self, x: u32) -> Option<u32> {
        self.pairs.iter().find(|p| p.0 == x).map(|p| p.1)
    }

    pub fn inputs(&self) -> Vec<u32> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    /// Sorted by input, pairwise distinct inputs, filled left to right.
    pub fn is_canonical(key: &[u32], slots: &[usize], n: u32) -> bool {
        let symbols: Vec<u32> = slots.iter().map(|&r| key[r]).collect();
        let filled = symbols.iter().take_while(|&&s| s != 0).count();
        if symbols[filled..].iter().any(|&s| s != 0) {
            return false;
        }
        let inputs: Vec<u32> = symbols[..filled].iter().map(|&s| decode_pair(s, n).unwrap().0).collect();
        inputs.windows(2).all(|w| w[0] < w[1])
    }
}

/// Answers `x` from the control list when it holds `x`, otherwise from `base`.
pub fn controlled_answer(base: OracleTable, slots: Vec<usize>, n: u32) -> Arc<AnswerFn> {
    Arc::new(move |key, x| {
        slots
            .iter()
            .find_map(|&r| decode_pair(key[r], n).filter(|p| p.0 == x).map(|p| p.1))
            .unwrap_or_else(|| base.lookup(x))
    })
}

/// Quantum query answered by `reprogram(base, L)` for the control list `L`
/// of each basis component.
pub fn controlled_query(
    state: &QuantumState,
    input: usize,
    output: usize,
    base: &OracleTable,
    slots: &[usize],
) -> QuantumState {
    let answer = controlled_answer(base.clone(), slots.to_vec(), base.codomain_size());
    state.quantum_query(input, output, &*answer)
}

/// The control-register update at one scheduled position. Components whose
/// input is already in the list are removed and reported as abort mass; the
/// rest get `(x, G(x))` inserted in sorted position.
pub fn update_control(
    state: &QuantumState,
    input: usize,
    g: &OracleTable,
    slots: &[usize],
) -> Result<(QuantumState, f64), StateError> {
    let n = g.codomain_size();
    let (kept, removed) = state.project(|key| ControlList::read(key, slots, n).lookup(key[input]).is_none());
    for (key, _) in kept.amplitudes() {
        if key[*slots.last().expect("at least one slot")] != 0 {
            return Err(StateError::ControlFull);
        }
    }
    let updated = kept.permute(|key| {
        let mut list = ControlList::read(key, slots, n).pairs;
        let x = key[input];
        list.push((x, g.lookup(x)));
        list.sort_unstable();
        let mut k = key.to_vec();
        for (j, &r) in slots.iter().enumerate() {
            k[r] = list.get(j).map_or(0, |&(x, y)| encode_pair(x, y, n));
        }
        k
    });
    Ok((updated, removed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AbortReason {
    /// The coherent membership check found the input already recorded.
    DuplicateInControl,
    /// The measured control inputs differ from the output `x⃗`.
    EquivalenceFailed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SimOutcome {
    Output(OutputTuple),
    Aborted(AbortReason),
}

/// Outcome distribution of one simulator execution.
#[derive(Clone, Debug, Default)]
pub struct SimulatorRun {
    pub outcomes: BTreeMap<SimOutcome, f64>,
    /// Reprogramming-oracle invocations along each surviving branch.
    pub g_queries: Vec<usize>,
    /// Total calls into the reprogramming oracle, across all branches.
    pub g_calls: usize,
    pub stats: RunStats,
}

impl SimulatorRun {
    pub fn total(&self) -> f64 {
        self.outcomes.values().sum()
    }

    /// Probability of an output whose `x⃗` is a permutation of `xo` and which
    /// satisfies `accept`.
    pub fn success(&self, xo: &[u32], accept: impl Fn(&OutputTuple) -> bool) -> f64 {
        self.outcomes
            .iter()
            .filter_map(|(o, p)| match o {
                SimOutcome::Output(t) if crate::relations::vectors_equivalent(&t.x, xo) && accept(t) => Some(*p),
                _ => None,
            })
            .sum()
    }
}

/// How the simulator answers the adversary's quantum queries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimMode {
    Pure,
    /// Each quantum query is answered classically with probability `p`.
    Noisy { p: f64 },
}

struct SimLayout {
    program_layout: crate::statevec::Layout,
    appended_outputs: Vec<usize>,
    appended_history: Vec<usize>,
    circuit_history: Vec<usize>,
    control: Vec<usize>,
}

fn sim_layout(circuit: &Circuit, m: u32, n: u32) -> Result<SimLayout, StateError> {
    let k = circuit.arity();
    let c = circuit.classical_queries();
    let mut layout = circuit.layout(m, n, k)?;
    let appended_outputs = (0..k)
        .map(|j| layout.push(&format!("_ay{j}"), n, RegisterRole::Work))
        .collect::<Result<Vec<_>, _>>()?;
    let control = (0..k)
        .map(|j| layout.push(&format!("_r{j}"), slot_dim(m, n), RegisterRole::Control { n }))
        .collect::<Result<Vec<_>, _>>()?;
    let history = (0..c + k)
        .map(|j| layout.index(&format!("_h{j}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimLayout {
        program_layout: layout,
        appended_outputs,
        appended_history: history[c..].to_vec(),
        circuit_history: history[..c].to_vec(),
        control,
    })
}

/// Runs the simulator on `circuit` with base oracle `h`, reprogramming
/// oracle `g`, and a fixed schedule. Noise branches are enumerated
/// exhaustively.
pub fn run_simulator(
    circuit: &Circuit,
    h: &OracleTable,
    g: &OracleTable,
    schedule: &ReprogramSchedule,
    mode: SimMode,
) -> Result<SimulatorRun, ReprogramError> {
    run_simulator_with(circuit, h, g, schedule, mode, Backend::Exhaustive, RunOptions::default().memory_cap)
}

pub fn run_simulator_with(
    circuit: &Circuit,
    h: &OracleTable,
    g: &OracleTable,
    schedule: &ReprogramSchedule,
    mode: SimMode,
    backend: Backend,
    cap: usize,
) -> Result<SimulatorRun, ReprogramError> {
    circuit.validate()?;
    let k = circuit.arity();
    if k == 0 {
        return Err(ReprogramError::NoOutputs);
    }
    let (m, n) = (h.domain_size(), h.codomain_size());
    if g.domain_size() != m || g.codomain_size() != n {
        return Err(StateError::LayoutMismatch("H and G differ in shape".into()).into());
    }
    circuit.check_shape(m, n)?;
    let pattern = extended_pattern(circuit);
    if schedule.v.len() != k {
        return Err(ReprogramError::InvalidSchedule(format!("{} positions for k = {k}", schedule.v.len())));
    }
    schedule.validate(&pattern)?;

    let sl = sim_layout(circuit, m, n)?;
    let layout = Arc::new(sl.program_layout);
    let answer = controlled_answer(h.clone(), sl.control.clone(), n);
    let calls = Arc::new(AtomicUsize::new(0));
    let update = |input: usize| -> Op {
        let g = g.clone();
        let slots = sl.control.clone();
        let calls = calls.clone();
        let apply: CustomOp = Arc::new(move |s: &QuantumState| {
            calls.fetch_add(1, Ordering::Relaxed);
            update_control(s, input, &g, &slots)
        });
        Op::Custom {
            name: "update-control",
            apply,
            g_query: true,
        }
    };

    let x_regs = circuit
        .output_registers
        .x
        .iter()
        .map(|name| layout.index(name))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ops = Vec::new();
    let mut classical_slot = 0;
    for (i, kind) in pattern.iter().enumerate() {
        let appended = i >= circuit.len();
        if !appended {
            ops.extend(circuit.gates_at(&layout, i)?.into_iter().map(Op::Unitary));
        }
        let (input, output, history, check_duplicates) = if appended {
            let j = i - circuit.len();
            (x_regs[j], sl.appended_outputs[j], Some(sl.appended_history[j]), false)
        } else {
            let qr = circuit.query_registers_at(i);
            let history = (*kind == QueryKind::Classical).then(|| {
                classical_slot += 1;
                sl.circuit_history[classical_slot - 1]
            });
            (layout.index(&qr.input)?, layout.index(&qr.output)?, history, true)
        };
        let noise = match (kind, mode) {
            (QueryKind::Quantum, SimMode::Noisy { p }) => QueryNoise::Noisy(p),
            _ => QueryNoise::Coherent,
        };
        let query = Op::Query(QueryOp {
            position: i,
            input,
            output,
            history,
            check_duplicates,
            noise,
            answer: answer.clone(),
        });
        match schedule.v.iter().position(|&v| v == i) {
            Some(j) if !schedule.b[j] => {
                ops.push(update(input));
                ops.push(query);
            }
            Some(_) => {
                ops.push(query);
                ops.push(update(input));
            }
            None => ops.push(query),
        }
        if i + 1 == circuit.len() {
            ops.extend(circuit.gates_at(&layout, circuit.len())?.into_iter().map(Op::Unitary));
        }
    }
    if circuit.is_empty() {
        ops.splice(0..0, circuit.gates_at(&layout, 0)?.into_iter().map(Op::Unitary));
    }

    let z_reg = circuit.output_registers.z.as_deref().map(|z| layout.index(z)).transpose()?;
    let mut outputs = x_regs.clone();
    outputs.extend(&sl.appended_outputs);
    outputs.extend(z_reg);
    outputs.extend(&sl.control);
    let program = Program {
        layout: layout.clone(),
        ops,
        outputs,
    };
    let exec = execute(&program, QuantumState::zero(layout), backend, cap)?;

    let mut run = SimulatorRun {
        g_queries: exec.branches.iter().map(|b| b.g_queries).collect(),
        stats: exec.stats,
        ..Default::default()
    };
    if exec.aborted > 0.0 {
        run.outcomes
            .insert(SimOutcome::Aborted(AbortReason::DuplicateInControl), exec.aborted);
    }
    let has_z = z_reg.is_some() as usize;
    for (label, p) in exec.distribution() {
        let x = label[..k].to_vec();
        let y = label[k..2 * k].to_vec();
        let z = if has_z == 1 { label[2 * k] as u64 } else { 0 };
        let control: Vec<u32> = label[2 * k + has_z..]
            .iter()
            .filter_map(|&s| decode_pair(s, n).map(|p| p.0))
            .collect();
        let outcome = if crate::relations::vectors_equivalent(&control, &x) {
            SimOutcome::Output(OutputTuple { x, y, z })
        } else {
            SimOutcome::Aborted(AbortReason::EquivalenceFailed)
        };
        *run.outcomes.entry(outcome).or_insert(0.0) += p;
    }
    run.g_calls = calls.load(Ordering::Relaxed);
    Ok(run)
}

/// Mixes simulator runs over weighted schedules into one distribution.
/// Runs execute in parallel and merge in schedule order.
pub fn run_averaged(
    circuit: &Circuit,
    h: &OracleTable,
    g: &OracleTable,
    schedules: &[(f64, ReprogramSchedule)],
    mode: SimMode,
) -> Result<SimulatorRun, ReprogramError> {
    use rayon::prelude::*;
    let runs = schedules
        .par_iter()
        .map(|(w, s)| run_simulator(circuit, h, g, s, mode).map(|r| (*w, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut merged = SimulatorRun::default();
    for (w, run) in runs {
        for (o, p) in run.outcomes {
            *merged.outcomes.entry(o).or_insert(0.0) += w * p;
        }
        merged.g_queries.extend(run.g_queries);
        merged.g_calls += run.g_calls;
        merged.stats.unitary_steps += run.stats.unitary_steps;
        merged.stats.max_norm_drift = merged.stats.max_norm_drift.max(run.stats.max_norm_drift);
        merged.stats.peak_branches = merged.stats.peak_branches.max(run.stats.peak_branches);
    }
    Ok(merged)
}

/// The noisy simulator: a uniform schedule over all positions of the
/// extended pattern, then every quantum query answered through `O_p`.
/// Noise branches are enumerated exhaustively.
pub fn run_noisy_simulator<R: Rng + ?Sized>(
    circuit: &Circuit,
    h: &OracleTable,
    g: &OracleTable,
    p: f64,
    rng: &mut R,
) -> Result<(ReprogramSchedule, SimulatorRun), ReprogramError> {
    let schedule = sample_uniform_schedule(circuit.arity(), &extended_pattern(circuit), rng);
    let run = run_simulator(circuit, h, g, &schedule, SimMode::Noisy { p })?;
    Ok((schedule, run))
}

/// Runs the plain circuit against `H` reprogrammed to `y⃗o` on `x⃗o` and
/// returns the distribution of `(x⃗, H'(x⃗), z)`.
pub fn run_reprogrammed_adversary(
    circuit: &Circuit,
    h: &OracleTable,
    xo: &[u32],
    yo: &[u32],
    mode: SimMode,
) -> Result<BTreeMap<OutputTuple, f64>, ReprogramError> {
    let patched = reprogram(h, xo, yo)?.to_table();
    let options = RunOptions {
        mode: match mode {
            SimMode::Pure => Mode::Pure,
            SimMode::Noisy { p } => Mode::Noisy { p },
        },
        classical: ClassicalSemantics::Purified,
        ..RunOptions::default()
    };
    let exec = crate::statevec::run_circuit(circuit, &patched, &options)?;
    let k = circuit.arity();
    let mut out = BTreeMap::new();
    for (label, p) in exec.distribution() {
        let x = label[..k].to_vec();
        let y = x.iter().map(|&v| patched.lookup(v)).collect();
        let z = label.get(k).map_or(0, |&v| v as u64);
        *out.entry(OutputTuple { x, y, z }).or_insert(0.0) += p;
    }
    Ok(out)
}

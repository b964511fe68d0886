//! Game execution and inequality checkers over exhaustively enumerated tiny
//! oracles, plus a seeded Monte Carlo estimator.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::bounds::{Bounds, BoundsError, ExactValue, Rounding};
use crate::relations::{
    evaluate_predicate, p_of_r_exact, reprogram, vectors_equivalent, GameSpec, Oracle, OracleTable, OutputTuple,
    RelationError,
};
use crate::reprogram::{
    enumerate_schedules, enumerate_uniform_schedules, extended_pattern, run_averaged, run_reprogrammed_adversary,
    sample_schedule, ReprogramError, ReprogramSchedule, SimMode,
};
use crate::statevec::{run_circuit, Circuit, QueryKind, RunOptions, StateError};

/// Slack on exhaustive cells for double-precision amplitude arithmetic.
pub const TOLERANCE: f64 = 1e-9;

/// Default cap on `(H, G, x⃗o)` cells in one grid.
pub const DEFAULT_CELL_CAP: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("circuit outputs {got} values, the game needs {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("{cells} cells exceed the cap {cap}")]
    CellCapExceeded { cells: String, cap: u64 },
    #[error("unsupported relation: {0}")]
    UnsupportedRelation(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("block {block} output {x} does not lie in row {block}")]
    BlockPrefix { block: usize, x: u32 },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Reprogram(#[from] ReprogramError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

impl VerifyError {
    /// True when the failure is a resource limit rather than bad input.
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self,
            VerifyError::CellCapExceeded { .. }
                | VerifyError::State(StateError::MemoryCapExceeded { .. })
                | VerifyError::Reprogram(ReprogramError::State(StateError::MemoryCapExceeded { .. }))
                | VerifyError::Relation(RelationError::EnumerationTooLarge { .. })
        )
    }
}

/// Exact win probability of one run of the game against `oracle`,
/// including the challenger's classical verification of `y⃗ = H(x⃗)`.
pub fn play_game(
    game: &GameSpec,
    circuit: &Circuit,
    oracle: &OracleTable,
    challenge: Option<u64>,
) -> Result<f64, VerifyError> {
    if circuit.arity() != game.k() {
        return Err(VerifyError::ArityMismatch {
            expected: game.k(),
            got: circuit.arity(),
        });
    }
    check_game_oracle(game, oracle)?;
    let ch = challenge.unwrap_or_else(|| game.challenge.sample());
    let exec = run_circuit(circuit, oracle, &RunOptions::default())?;
    let k = circuit.arity();
    let mut win = 0.0;
    for (label, p) in exec.distribution() {
        let out = readout(&label, k, oracle);
        if evaluate_predicate(game, oracle, ch, &out)? {
            win += p;
        }
    }
    Ok(win)
}

fn check_game_oracle(game: &GameSpec, oracle: &OracleTable) -> Result<(), VerifyError> {
    if oracle.domain_size() != game.domain || oracle.codomain_size() != game.codomain() {
        return Err(VerifyError::ShapeMismatch(format!(
            "oracle is {}→{}, game expects {}→{}",
            oracle.domain_size(),
            oracle.codomain_size(),
            game.domain,
            game.codomain()
        )));
    }
    Ok(())
}

fn readout(label: &[u32], k: usize, oracle: &dyn Oracle) -> OutputTuple {
    let x = label[..k].to_vec();
    let y = x.iter().map(|&v| oracle.lookup(v)).collect();
    let z = label.get(k).map_or(0, |&v| v as u64);
    OutputTuple { x, y, z }
}

fn table_count(m: u32, n: u32, cap: u64) -> Result<u64, VerifyError> {
    match OracleTable::count(m, n) {
        Some(c) if c <= cap => Ok(c),
        c => Err(VerifyError::CellCapExceeded {
            cells: c.map_or_else(|| format!("{n}^{m}"), |c| c.to_string()),
            cap,
        }),
    }
}

/// Average win probability over all `N^M` oracles.
pub fn average_win(game: &GameSpec, circuit: &Circuit, cap: u64) -> Result<f64, VerifyError> {
    let count = table_count(game.domain, game.codomain(), cap)?;
    let wins = (0..count)
        .into_par_iter()
        .map(|i| play_game(game, circuit, &OracleTable::from_index(game.domain, game.codomain(), i), None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(wins.iter().sum::<f64>() / count as f64)
}

/// `g` instances over disjoint rows of one table of size `g·M`, indexed
/// row-major. Block `i` of the output must lie in row `i`.
pub fn play_direct_product(
    g: usize,
    game: &GameSpec,
    circuit: &Circuit,
    oracle: &OracleTable,
) -> Result<f64, VerifyError> {
    let (m, n, k) = (game.domain, game.codomain(), game.k());
    if g == 0 || oracle.domain_size() as usize != g * m as usize || oracle.codomain_size() != n {
        return Err(VerifyError::ShapeMismatch(format!(
            "direct product of {g} needs a {}→{n} table",
            g * m as usize
        )));
    }
    if circuit.arity() != g * k {
        return Err(VerifyError::ArityMismatch {
            expected: g * k,
            got: circuit.arity(),
        });
    }
    let rows: Vec<OracleTable> = (0..g)
        .map(|i| OracleTable::new(n, oracle.entries()[i * m as usize..(i + 1) * m as usize].to_vec()))
        .collect::<Result<_, _>>()?;
    let ch = game.challenge.sample();
    let exec = run_circuit(circuit, oracle, &RunOptions::default())?;
    let mut win = 0.0;
    for (label, p) in exec.distribution() {
        let mut all = true;
        for (i, row) in rows.iter().enumerate() {
            let block = &label[i * k..(i + 1) * k];
            if let Some(&x) = block.iter().find(|&&x| x / m != i as u32) {
                return Err(VerifyError::BlockPrefix { block: i, x });
            }
            let local: Vec<u32> = block.iter().map(|&x| x % m).collect();
            all &= evaluate_predicate(game, row, ch, &readout(&local, k, row))?;
        }
        if all {
            win += p;
        }
    }
    Ok(win)
}

/// Instances sharing one oracle; the circuit outputs their blocks in order.
pub fn play_multi_instance(
    instances: &[GameSpec],
    circuit: &Circuit,
    oracle: &OracleTable,
) -> Result<f64, VerifyError> {
    let total: usize = instances.iter().map(GameSpec::k).sum();
    if circuit.arity() != total {
        return Err(VerifyError::ArityMismatch {
            expected: total,
            got: circuit.arity(),
        });
    }
    for game in instances {
        check_game_oracle(game, oracle)?;
    }
    let exec = run_circuit(circuit, oracle, &RunOptions::default())?;
    let mut win = 0.0;
    for (label, p) in exec.distribution() {
        let mut offset = 0;
        let mut all = true;
        for game in instances {
            let block = &label[offset..offset + game.k()];
            offset += game.k();
            all &= evaluate_predicate(game, oracle, game.challenge.sample(), &readout(block, game.k(), oracle))?;
        }
        if all {
            win += p;
        }
    }
    Ok(win)
}

/// How grid cells are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Enumeration {
    /// Every `(H, G, x⃗o)`.
    #[default]
    Exhaustive,
    /// `trials` cells drawn from a seeded stream.
    MonteCarlo { trials: u64, seed: u64 },
}

/// How the simulator side averages over schedules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Every schedule with its exact probability.
    #[default]
    Exhaustive,
    /// The empirical mix of `samples` drawn schedules.
    Sampled { samples: u64, seed: u64 },
}

/// One inequality-check experiment over a single circuit.
#[derive(Clone, Debug)]
pub struct ExperimentGrid {
    pub label: String,
    pub circuit: Circuit,
    /// Extra predicate on `(x⃗, y⃗, z)`; `None` checks the event `x⃗ ≡ x⃗o` alone.
    pub game: Option<GameSpec>,
    pub m: u32,
    pub n: u32,
    pub enumeration: Enumeration,
    pub schedule: ScheduleMode,
    pub cell_cap: u64,
}

impl ExperimentGrid {
    pub fn new(label: impl Into<String>, circuit: Circuit, m: u32, n: u32) -> Self {
        ExperimentGrid {
            label: label.into(),
            circuit,
            game: None,
            m,
            n,
            enumeration: Enumeration::Exhaustive,
            schedule: ScheduleMode::Exhaustive,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }

    pub fn with_game(mut self, game: GameSpec) -> Self {
        self.game = Some(game);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCell {
    pub id: String,
    pub h_index: u64,
    pub g_index: u64,
    pub xo: Vec<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub mode: String,
    pub seed: Option<u64>,
}

impl InequalityCell {
    pub fn passes(&self) -> bool {
        self.margin >= -TOLERANCE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub label: String,
    /// The multiplicative loss (or bound) the cells were checked against.
    pub loss: String,
    pub cells: Vec<InequalityCell>,
    pub verdict: Verdict,
    pub min_margin: f64,
}

impl InequalityReport {
    fn assemble(label: String, loss: String, cells: Vec<InequalityCell>) -> Self {
        let verdict = if cells.iter().all(InequalityCell::passes) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let min_margin = cells.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        InequalityReport {
            label,
            loss,
            cells,
            verdict,
            min_margin,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &InequalityCell> {
        self.cells.iter().filter(|c| !c.passes())
    }
}

/// All ordered `k`-tuples of distinct points of `[m]`.
pub fn distinct_tuples(m: u32, k: usize) -> Vec<Vec<u32>> {
    fn extend(m: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in 0..m {
            if !cur.contains(&x) {
                cur.push(x);
                extend(m, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(m, k, &mut Vec::new(), &mut out);
    out
}

struct CellPlan {
    h: u64,
    g: u64,
    xo_index: usize,
}

fn plan_cells(grid: &ExperimentGrid, xos: usize) -> Result<(Vec<CellPlan>, Option<u64>), VerifyError> {
    let count = OracleTable::count(grid.m, grid.n);
    match grid.enumeration {
        Enumeration::Exhaustive => {
            let cells = count.and_then(|c| c.checked_mul(c)).and_then(|c| c.checked_mul(xos as u64));
            match cells {
                Some(c) if c <= grid.cell_cap => {}
                c => {
                    return Err(VerifyError::CellCapExceeded {
                        cells: c.map_or_else(|| "more than 2^64".into(), |c| c.to_string()),
                        cap: grid.cell_cap,
                    })
                }
            }
            let count = count.expect("checked above");
            let mut plan = Vec::new();
            for h in 0..count {
                for g in 0..count {
                    for xo_index in 0..xos {
                        plan.push(CellPlan { h, g, xo_index });
                    }
                }
            }
            Ok((plan, None))
        }
        Enumeration::MonteCarlo { trials, seed } => {
            if trials > grid.cell_cap {
                return Err(VerifyError::CellCapExceeded {
                    cells: trials.to_string(),
                    cap: grid.cell_cap,
                });
            }
            let count = count.ok_or_else(|| VerifyError::ShapeMismatch("oracle space too large to index".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng;
            let plan = (0..trials)
                .map(|_| CellPlan {
                    h: rng.random_range(0..count),
                    g: rng.random_range(0..count),
                    xo_index: rng.random_range(0..xos),
                })
                .collect();
            Ok((plan, Some(seed)))
        }
    }
}

/// Probability under `dist` that `x⃗ ≡ x⃗o` and the grid predicate holds
/// against the reprogrammed oracle.
fn event_mass<'a>(
    grid: &ExperimentGrid,
    patched: &OracleTable,
    xo: &[u32],
    dist: impl Iterator<Item = (&'a OutputTuple, f64)>,
) -> Result<f64, VerifyError> {
    let mut total = 0.0;
    for (t, p) in dist {
        if !vectors_equivalent(&t.x, xo) {
            continue;
        }
        let ok = match &grid.game {
            None => true,
            Some(game) => evaluate_predicate(game, patched, game.challenge.sample(), t)?,
        };
        if ok {
            total += p;
        }
    }
    Ok(total)
}

fn run_grid(
    grid: &ExperimentGrid,
    schedules: &[(f64, ReprogramSchedule)],
    mode: SimMode,
    loss: &ExactValue,
    mode_label: &str,
) -> Result<InequalityReport, VerifyError> {
    grid.circuit.validate()?;
    grid.circuit.check_shape(grid.m, grid.n)?;
    let k = grid.circuit.arity();
    if let Some(game) = &grid.game {
        if game.k() != k {
            return Err(VerifyError::ArityMismatch { expected: game.k(), got: k });
        }
        if game.domain != grid.m || game.codomain() != grid.n {
            return Err(VerifyError::ShapeMismatch("game and grid disagree on M or N".into()));
        }
    }
    let xos = distinct_tuples(grid.m, k);
    let (plan, seed) = plan_cells(grid, xos.len())?;
    let loss_f = loss.to_f64();

    // group cells by H so adversary runs are shared across G
    let mut by_h: Vec<(u64, Vec<(usize, &CellPlan)>)> = Vec::new();
    for (i, cell) in plan.iter().enumerate() {
        match by_h.iter_mut().find(|(h, _)| *h == cell.h) {
            Some((_, v)) => v.push((i, cell)),
            None => by_h.push((cell.h, vec![(i, cell)])),
        }
    }
    let groups = by_h
        .par_iter()
        .map(|(h_index, cells)| -> Result<Vec<(usize, InequalityCell)>, VerifyError> {
            let h = OracleTable::from_index(grid.m, grid.n, *h_index);
            let mut sims = HashMap::new();
            let mut advs: HashMap<(usize, Vec<u32>), f64> = HashMap::new();
            let mut out = Vec::new();
            for &(i, cell) in cells {
                let g = OracleTable::from_index(grid.m, grid.n, cell.g);
                let xo = &xos[cell.xo_index];
                let yo: Vec<u32> = xo.iter().map(|&x| g.lookup(x)).collect();
                let patched = reprogram(&h, xo, &yo)?.to_table();
                let sim = match sims.entry(cell.g) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(run_averaged(&grid.circuit, &h, &g, schedules, mode)?)
                    }
                };
                let lhs = event_mass(
                    grid,
                    &patched,
                    xo,
                    sim.outcomes.iter().filter_map(|(o, p)| match o {
                        crate::reprogram::SimOutcome::Output(t) => Some((t, *p)),
                        _ => None,
                    }),
                )?;
                let key = (cell.xo_index, yo.clone());
                let adv = match advs.get(&key) {
                    Some(a) => *a,
                    None => {
                        let dist = run_reprogrammed_adversary(&grid.circuit, &h, xo, &yo, mode)?;
                        let a = event_mass(grid, &patched, xo, dist.iter().map(|(t, p)| (t, *p)))?;
                        advs.insert(key, a);
                        a
                    }
                };
                let rhs = adv / loss_f;
                out.push((
                    i,
                    InequalityCell {
                        id: format!("{}:{i}", grid.label),
                        h_index: *h_index,
                        g_index: cell.g,
                        xo: xo.clone(),
                        lhs,
                        rhs,
                        margin: lhs - rhs,
                        mode: mode_label.to_string(),
                        seed,
                    },
                ));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells: Vec<(usize, InequalityCell)> = groups.into_iter().flatten().collect();
    cells.sort_by_key(|(i, _)| *i);
    Ok(InequalityReport::assemble(
        grid.label.clone(),
        loss.to_string(),
        cells.into_iter().map(|(_, c)| c).collect(),
    ))
}

type ScheduleMix = Vec<(f64, ReprogramSchedule)>;

fn schedule_mix(
    grid: &ExperimentGrid,
    exhaustive: impl FnOnce() -> Result<Vec<(f64, ReprogramSchedule)>, ReprogramError>,
    uniform: bool,
) -> Result<(ScheduleMix, &'static str), VerifyError> {
    match grid.schedule {
        ScheduleMode::Exhaustive => Ok((exhaustive()?, "exhaustive")),
        ScheduleMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(VerifyError::InvalidManifest("sampled schedules need samples ≥ 1".into()));
            }
            let pattern = extended_pattern(&grid.circuit);
            let k = grid.circuit.arity();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = 1.0 / samples as f64;
            let mut mix = Vec::new();
            for _ in 0..samples {
                let s = if uniform {
                    crate::reprogram::sample_uniform_schedule(k, &pattern, &mut rng)
                } else {
                    sample_schedule(k, &pattern, &mut rng)?
                };
                mix.push((w, s));
            }
            Ok((mix, "sampled"))
        }
    }
}

/// Per cell `(H, G, x⃗o)` with `y⃗o = G(x⃗o)`: the simulator's probability of
/// outputting `x⃗ ≡ x⃗o` (and the predicate) is at least the adversary's
/// probability of the same event against `H` reprogrammed to `y⃗o`, divided
/// by `2^{2k}·k·A(k, q, c+k)` for the circuit extended by its `k`
/// verification queries.
pub fn check_reprogram_inequality(grid: &ExperimentGrid) -> Result<InequalityReport, VerifyError> {
    let k = grid.circuit.arity();
    let (q, c) = (grid.circuit.quantum_queries(), grid.circuit.classical_queries());
    let loss = Bounds::default().hybrid_loss_exact(k as u64, q as u64, (c + k) as u64)?;
    let pattern = extended_pattern(&grid.circuit);
    let (schedules, sched) = schedule_mix(grid, || enumerate_schedules(k, &pattern), false)?;
    run_grid(grid, &schedules, SimMode::Pure, &loss, &format!("pure/{sched}"))
}

/// The same check against `O_p`: uniform schedules over all `T + k`
/// positions and loss `noisy_loss_exact(p, T + k, k)`.
pub fn check_noisy_inequality(grid: &ExperimentGrid, p: &BigRational) -> Result<InequalityReport, VerifyError> {
    let k = grid.circuit.arity();
    let total = grid.circuit.len() + k;
    let loss = Bounds::default().noisy_loss_exact(p, total as u64, k as u64)?;
    let pattern = extended_pattern(&grid.circuit);
    let (schedules, sched) = schedule_mix(grid, || Ok(enumerate_uniform_schedules(k, &pattern)), true)?;
    let pf = p.to_f64().unwrap_or(f64::NAN);
    let label = format!("noisy(p={})/{sched}", crate::format_rational(p));
    let mut report = run_grid(grid, &schedules, SimMode::Noisy { p: pf }, &loss, &label)?;
    report.label = format!("{}@p={}", report.label, crate::format_rational(p));
    Ok(report)
}

/// `Pr[circuit wins] ≤ 2^{2k}·k·A(k,q,c+k)·p(R)`, averaged over all oracles.
/// The loss is the one [`check_reprogram_inequality`] certifies, so the
/// chain covers circuits with fewer than `k` queries too. The report's
/// single cell has `lhs` the bound and `rhs` the win rate.
pub fn check_lifting(game: &GameSpec, circuit: &Circuit, cap: u64) -> Result<InequalityReport, VerifyError> {
    if game.relation.oracle_dependent() {
        return Err(VerifyError::UnsupportedRelation(
            "lifting needs a relation that does not read the oracle".into(),
        ));
    }
    let k = game.k();
    let (q, c) = (circuit.quantum_queries() as u64, circuit.classical_queries() as u64);
    let b = Bounds::default();
    let loss = b.hybrid_loss_exact(k as u64, q, c + k as u64)?;
    let bound = loss.mul(&p_of_r_exact(&game.relation)?, Rounding::Up);
    let win = average_win(game, circuit, cap)?;
    let lhs = bound.to_f64();
    let cell = InequalityCell {
        id: "lifting:0".into(),
        h_index: 0,
        g_index: 0,
        xo: vec![],
        lhs,
        rhs: win,
        margin: lhs - win,
        mode: "exhaustive".into(),
        seed: None,
    };
    Ok(InequalityReport::assemble("lifting".into(), bound.to_string(), vec![cell]))
}

/// A frequency estimate with its two-sided Clopper-Pearson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// Runs `event` on `trials` independent streams of one seed (stream `t`
/// for trial `t`) and returns the frequency with a 99% interval. The
/// result does not depend on the thread count.
pub fn monte_carlo_estimate<F>(event: F, trials: u64, seed: u64) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            event(&mut rng)
        })
        .count() as u64;
    let confidence = 0.99;
    let (lower, upper) = if trials == 0 {
        (0.0, 1.0)
    } else {
        clopper_pearson(successes, trials, confidence)
    };
    Estimate {
        successes,
        trials,
        estimate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        lower,
        upper,
        confidence,
    }
}

/// Which inequality a manifest runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Reprogram,
    Noisy,
    Lifting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCircuit {
    /// Circuit JSON, relative to the manifest.
    pub file: PathBuf,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "N")]
    pub n: u32,
}

/// Experiment manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub check: CheckKind,
    pub circuits: Vec<ManifestCircuit>,
    /// Game JSON, relative to the manifest; required for lifting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<PathBuf>,
    /// Noise probabilities as fractions or decimals.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<String>,
    #[serde(default)]
    pub mode: Enumeration,
    #[serde(default)]
    pub schedule: ScheduleMode,
    #[serde(default = "default_cell_cap")]
    pub cell_cap: u64,
}

fn default_cell_cap() -> u64 {
    DEFAULT_CELL_CAP
}

/// A manifest with its files read and parsed.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub circuits: Vec<(String, Circuit, u32, u32)>,
    pub game: Option<GameSpec>,
    pub p: Vec<BigRational>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<LoadedManifest, VerifyError> {
        let text = std::fs::read_to_string(path).map_err(|e| VerifyError::Io(format!("{}: {e}", path.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| VerifyError::InvalidManifest(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let read = |rel: &Path| {
            std::fs::read_to_string(base.join(rel))
                .map_err(|e| VerifyError::InvalidManifest(format!("{}: {e}", rel.display())))
        };
        if manifest.circuits.is_empty() {
            return Err(VerifyError::InvalidManifest("no circuits listed".into()));
        }
        let mut circuits = Vec::new();
        for entry in &manifest.circuits {
            let circuit = Circuit::from_json(&read(&entry.file)?)
                .map_err(|e| VerifyError::InvalidManifest(format!("{}: {e}", entry.file.display())))?;
            circuit
                .check_shape(entry.m, entry.n)
                .map_err(|e| VerifyError::InvalidManifest(format!("{}: {e}", entry.file.display())))?;
            let label = entry
                .file
                .file_stem()
                .map_or_else(|| entry.file.display().to_string(), |s| s.to_string_lossy().into_owned());
            circuits.push((label, circuit, entry.m, entry.n));
        }
        let game = manifest
            .game
            .as_deref()
            .map(|g| GameSpec::from_json(&read(g)?).map_err(|e| VerifyError::InvalidManifest(e.to_string())))
            .transpose()?;
        let p = manifest
            .p
            .iter()
            .map(|s| crate::parse_rational(s).map_err(VerifyError::InvalidManifest))
            .collect::<Result<Vec<_>, _>>()?;
        match manifest.check {
            CheckKind::Noisy if p.is_empty() => {
                return Err(VerifyError::InvalidManifest("noisy checks need at least one p".into()))
            }
            CheckKind::Lifting if game.is_none() => {
                return Err(VerifyError::InvalidManifest("lifting checks need a game".into()))
            }
            _ => {}
        }
        Ok(LoadedManifest {
            manifest,
            circuits,
            game,
            p,
        })
    }
}

impl LoadedManifest {
    /// Runs every circuit (and every `p` for noisy checks). `trials`
    /// overrides the Monte Carlo cell count.
    pub fn run(&self, trials: Option<u64>) -> Result<Vec<InequalityReport>, VerifyError> {
        let m = &self.manifest;
        let enumeration = match (m.mode, trials) {
            (Enumeration::MonteCarlo { seed, .. }, Some(t)) => Enumeration::MonteCarlo { trials: t, seed },
            (e, _) => e,
        };
        let mut reports = Vec::new();
        for (label, circuit, mm, nn) in &self.circuits {
            if m.check == CheckKind::Lifting {
                let game = self.game.as_ref().expect("checked on load");
                let mut r = check_lifting(game, circuit, m.cell_cap)?;
                r.label = label.clone();
                for c in &mut r.cells {
                    c.id = format!("{label}:lifting");
                }
                reports.push(r);
                continue;
            }
            let grid = ExperimentGrid {
                label: label.clone(),
                circuit: circuit.clone(),
                game: self.game.clone(),
                m: *mm,
                n: *nn,
                enumeration,
                schedule: m.schedule,
                cell_cap: m.cell_cap,
            };
            match m.check {
                CheckKind::Reprogram => reports.push(check_reprogram_inequality(&grid)?),
                CheckKind::Noisy => {
                    for p in &self.p {
                        let mut g = grid.clone();
                        g.label = format!("{label}@p={}", crate::format_rational(p));
                        let mut r = check_noisy_inequality(&g, p)?;
                        r.label = g.label;
                        reports.push(r);
                    }
                }
                CheckKind::Lifting => unreachable!(),
            }
        }
        Ok(reports)
    }
}

pub const CSV_HEADER: [&str; 9] = ["cell_id", "h_index", "g_index", "xo", "lhs", "rhs", "margin", "mode", "seed"];

/// Writes one row per cell.
pub fn write_csv<W: Write>(reports: &[InequalityReport], out: W) -> Result<(), VerifyError> {
    let io = |e: csv::Error| VerifyError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in reports {
        for c in &r.cells {
            let xo = c.xo.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
            w.write_record([
                c.id.clone(),
                c.h_index.to_string(),
                c.g_index.to_string(),
                xo,
                c.lhs.to_string(),
                c.rhs.to_string(),
                c.margin.to_string(),
                c.mode.clone(),
                c.seed.map_or_else(String::new, |s| s.to_string()),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| VerifyError::Io(e.to_string()))
}

/// Pattern with every query quantum, used to compare noisy runs at `p = 0`.
pub fn all_quantum(circuit: &Circuit) -> Circuit {
    let mut c = circuit.clone();
    c.pattern = vec![QueryKind::Quantum; c.pattern.len()];
    c
}

/// Pattern with every query classical, used to compare noisy runs at `p = 1`.
pub fn all_classical(circuit: &Circuit) -> Circuit {
    let mut c = circuit.clone();
    c.pattern = vec![QueryKind::Classical; c.pattern.len()];
    c
}

//! Concrete hybrid adversaries: staged Grover for multi-image search,
//! classical exhaustive search, and a zero-query guesser.
//!
//! Every builder returns a static circuit in the `statevec` format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relations::{all_distinct, GameSpec, PredicateArgs};
use crate::statevec::{
    Circuit, ControlSpec, Gate, OutputRegisters, QueryKind, QueryRegisters, RegisterSpec, StateError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("budget mismatch: {0}")]
    BudgetMismatch(String),
    #[error("budget {budget} exceeds the domain size {m}")]
    BudgetExceedsDomain { budget: u32, m: u32 },
    #[error("the relation reads the oracle; a fixed-point prober cannot score it")]
    UnsupportedRelation,
    #[error("{k} distinct outputs do not fit in a domain of size {m}")]
    DomainTooSmall { k: usize, m: u32 },
    #[error(transparent)]
    State(#[from] StateError),
}

/// A built circuit together with its query budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryCircuit {
    pub label: String,
    pub circuit: Circuit,
}

impl AdversaryCircuit {
    pub fn q(&self) -> usize {
        self.circuit.quantum_queries()
    }

    pub fn c(&self) -> usize {
        self.circuit.classical_queries()
    }

    pub fn k(&self) -> usize {
        self.circuit.arity()
    }
}

/// Accumulates registers, gates and queries in program order.
#[derive(Default)]
struct Builder {
    registers: Vec<RegisterSpec>,
    pattern: Vec<QueryKind>,
    query_registers: Vec<QueryRegisters>,
    unitaries: Vec<Vec<Gate>>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            unitaries: vec![vec![]],
            ..Default::default()
        }
    }

    fn reg(&mut self, name: impl Into<String>, dim: u32) -> String {
        let name = name.into();
        self.registers.push(RegisterSpec { name: name.clone(), dim });
        name
    }

    fn gate(&mut self, g: Gate) {
        self.unitaries.last_mut().expect("open block").push(g);
    }

    fn query(&mut self, kind: QueryKind, input: &str, output: &str) {
        self.pattern.push(kind);
        self.query_registers.push(QueryRegisters {
            input: input.into(),
            output: output.into(),
        });
        self.unitaries.push(vec![]);
    }

    /// `target += f(inputs)` over every joint value of `inputs`.
    fn lookup(&mut self, inputs: &[(&str, u32)], target: &str, f: impl Fn(&[u32]) -> u32) {
        let size: usize = inputs.iter().map(|&(_, d)| d as usize).product();
        let mut values = vec![0u32; inputs.len()];
        let table = (0..size)
            .map(|mut idx| {
                for (v, &(_, d)) in values.iter_mut().zip(inputs) {
                    *v = (idx % d as usize) as u32;
                    idx /= d as usize;
                }
                f(&values)
            })
            .collect();
        self.gate(Gate::Lookup {
            inputs: inputs.iter().map(|&(n, _)| n.to_string()).collect(),
            target: target.into(),
            table,
        });
    }

    fn finish(self, label: String, x: Vec<String>) -> Result<AdversaryCircuit, AdversaryError> {
        let circuit = Circuit {
            registers: self.registers,
            pattern: self.pattern,
            query_registers: self.query_registers,
            unitaries: self.unitaries,
            output_registers: OutputRegisters { x, z: None },
        };
        circuit.validate()?;
        Ok(AdversaryCircuit { label, circuit })
    }
}

/// Parameters of the staged hybrid Grover search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedGroverSpec {
    pub k: usize,
    /// Grover iterations per stage.
    pub u: usize,
    /// Classical probes per stage.
    pub v: usize,
    pub targets: Vec<u32>,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "N")]
    pub n: u32,
}

impl StagedGroverSpec {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        let bad = |m: String| Err(AdversaryError::BudgetMismatch(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.targets.len() != self.k {
            return bad(format!("{} targets for k = {}", self.targets.len(), self.k));
        }
        if let Some(&y) = self.targets.iter().find(|&&y| y >= self.n) {
            return bad(format!("target {y} outside the codomain {}", self.n));
        }
        let probed = self.k * self.v;
        if probed > self.m as usize || (self.u > 0 && probed >= self.m as usize) {
            return bad(format!(
                "{} stages of {} probes leave no unprobed point in a domain of {}",
                self.k, self.v, self.m
            ));
        }
        Ok(())
    }

    /// Quantum queries of one Grover iteration: phase kickback costs one,
    /// compute-flip-uncompute costs two.
    fn queries_per_iteration(&self, stage: usize) -> usize {
        if self.kickback(stage) {
            1
        } else {
            2
        }
    }

    fn kickback(&self, stage: usize) -> bool {
        let distinct: BTreeSet<u32> = self.targets.iter().copied().collect();
        self.n == 2 && stage == 0 && distinct.len() == 1
    }

    /// Quantum queries the built circuit makes.
    pub fn quantum_queries(&self) -> usize {
        let readout = usize::from(self.k > 1);
        (0..self.k).map(|s| self.u * self.queries_per_iteration(s) + readout).sum()
    }

    pub fn classical_queries(&self) -> usize {
        self.k * self.v
    }
}

/// The staged search. Stage `s` probes `v` fresh points classically, runs
/// `u` Grover iterations over the points not yet probed (marking preimages
/// of every target not yet assigned), and assigns the first hit to the
/// output slot of its image. With `k > 1` each stage spends one extra
/// quantum query reading the image of the Grover candidate.
pub fn build_staged_grover(spec: &StagedGroverSpec) -> Result<AdversaryCircuit, AdversaryError> {
    spec.validate()?;
    let StagedGroverSpec { k, u, v, m, n, .. } = *spec;
    let targets = spec.targets.clone();
    let mut b = Builder::new();
    let xs: Vec<String> = (0..k).map(|j| b.reg(format!("x{j}"), m)).collect();
    let none = k as u32;
    // first unassigned slot whose target is `img`
    let slot_of = move |img: u32, prev: &[u32]| -> u32 {
        (0..k)
            .find(|&j| targets[j] == img && !prev.contains(&(j as u32)))
            .map_or(none, |j| j as u32)
    };
    let mut slots: Vec<String> = Vec::new();
    for s in 0..k {
        let first = (s * v) as u32;
        let points: Vec<u32> = (first..first + v as u32).collect();
        let mut probes = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            let pr = b.reg(format!("p{s}_{i}"), m);
            let py = b.reg(format!("py{s}_{i}"), n);
            b.gate(Gate::Shift { reg: pr.clone(), by: p });
            b.query(QueryKind::Classical, &pr, &py);
            probes.push(py);
        }
        let support: Vec<u32> = ((s + 1) as u32 * v as u32..m).collect();
        let w = b.reg(format!("w{s}"), m);
        if !support.is_empty() {
            b.gate(Gate::Prepare { reg: w.clone(), support: support.clone() });
        }
        let prev: Vec<(&str, u32)> = slots.iter().map(|r| (r.as_str(), k as u32 + 1)).collect();
        if u > 0 && spec.kickback(s) {
            let t = b.reg(format!("t{s}"), 2);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let hadamard = Gate::Matrix {
                reg: t.clone(),
                matrix: vec![vec![[h, 0.0], [h, 0.0]], vec![[h, 0.0], [-h, 0.0]]],
            };
            b.gate(Gate::Shift { reg: t.clone(), by: 1 });
            b.gate(hadamard.clone());
            for _ in 0..u {
                b.query(QueryKind::Quantum, &w, &t);
                b.gate(Gate::Diffusion { reg: w.clone(), support: support.clone() });
            }
            b.gate(hadamard);
            b.gate(Gate::Shift { reg: t, by: 1 });
        } else if u > 0 {
            let t = b.reg(format!("t{s}"), n);
            let f = b.reg(format!("f{s}"), 2);
            let mut flag_inputs = vec![(t.as_str(), n)];
            flag_inputs.extend(prev.iter().copied());
            let flag_inputs: Vec<(String, u32)> = flag_inputs.iter().map(|&(r, d)| (r.to_string(), d)).collect();
            for _ in 0..u {
                b.query(QueryKind::Quantum, &w, &t);
                let refs: Vec<(&str, u32)> = flag_inputs.iter().map(|(r, d)| (r.as_str(), *d)).collect();
                let slot_of = slot_of.clone();
                let mark = move |vals: &[u32]| u32::from(slot_of(vals[0], &vals[1..]) != none);
                b.lookup(&refs, &f, &mark);
                b.gate(Gate::PhaseFlip { reg: f.clone(), marked: vec![1] });
                b.lookup(&refs, &f, &mark);
                b.gate(Gate::Negate { reg: t.clone() });
                b.query(QueryKind::Quantum, &w, &t);
                b.gate(Gate::Diffusion { reg: w.clone(), support: support.clone() });
            }
        }

        if k == 1 {
            // a probe hit wins over the Grover candidate
            let mut inputs: Vec<(&str, u32)> = probes.iter().map(|r| (r.as_str(), n)).collect();
            inputs.push((w.as_str(), m));
            let target = spec.targets[0];
            let pts = points.clone();
            b.lookup(&inputs, &xs[0], move |vals| {
                let (ys, cand) = vals.split_at(vals.len() - 1);
                ys.iter().position(|&y| y == target).map_or(cand[0], |i| pts[i])
            });
            break;
        }

        let img = b.reg(format!("img{s}"), n);
        b.query(QueryKind::Quantum, &w, &img);
        let cand = b.reg(format!("cand{s}"), m);
        let sl = b.reg(format!("sl{s}"), k as u32 + 1);
        let mut inputs: Vec<(&str, u32)> = probes.iter().map(|r| (r.as_str(), n)).collect();
        inputs.push((img.as_str(), n));
        inputs.extend(prev.iter().copied());
        let nv = probes.len();
        // probe hits first, then the Grover candidate
        let choose = {
            let slot_of = slot_of.clone();
            move |vals: &[u32]| -> (Option<usize>, u32) {
                let (ys, rest) = vals.split_at(nv);
                let (img, prev) = (rest[0], &rest[1..]);
                for (i, &y) in ys.iter().enumerate() {
                    let j = slot_of(y, prev);
                    if j != none {
                        return (Some(i), j);
                    }
                }
                (None, slot_of(img, prev))
            }
        };
        let choose2 = choose.clone();
        b.lookup(&inputs, &sl, move |vals| choose(vals).1);
        let pts = points.clone();
        let mut with_w = inputs.clone();
        with_w.push((w.as_str(), m));
        b.lookup(&with_w, &cand, move |vals| {
            let (rest, wv) = vals.split_at(vals.len() - 1);
            choose2(rest).0.map_or(wv[0], |i| pts[i])
        });
        for (j, x) in xs.iter().enumerate() {
            b.gate(Gate::Controlled {
                controls: vec![ControlSpec { reg: sl.clone(), values: vec![j as u32] }],
                gate: Box::new(Gate::AddFrom { target: x.clone(), source: cand.clone() }),
            });
        }
        slots.push(sl);
    }
    let label = format!("staged-grover(k={k},u={u},v={v},M={m},N={n})");
    let built = b.finish(label, xs)?;
    debug_assert_eq!(built.q(), spec.quantum_queries());
    Ok(built)
}

/// Probes the points `0..budget` classically, then outputs the tuple with
/// the highest chance of winning given the recorded pairs, treating
/// unprobed images as uniform. Ties go to the lexicographically first tuple.
pub fn build_classical_exhaustive(k: usize, budget: u32, game: &GameSpec) -> Result<AdversaryCircuit, AdversaryError> {
    let (m, n) = (game.domain, game.codomain());
    if budget > m {
        return Err(AdversaryError::BudgetExceedsDomain { budget, m });
    }
    if game.relation.oracle_dependent() {
        return Err(AdversaryError::UnsupportedRelation);
    }
    if k != game.k() {
        return Err(AdversaryError::BudgetMismatch(format!("k = {k} but the game has arity {}", game.k())));
    }
    if game.outputs_distinct_required && k as u32 > m {
        return Err(AdversaryError::DomainTooSmall { k, m });
    }
    let mut b = Builder::new();
    let xs: Vec<String> = (0..k).map(|j| b.reg(format!("x{j}"), m)).collect();
    let mut probes = Vec::new();
    for p in 0..budget {
        let pr = b.reg(format!("p{p}"), m);
        let py = b.reg(format!("py{p}"), n);
        b.gate(Gate::Shift { reg: pr.clone(), by: p });
        b.query(QueryKind::Classical, &pr, &py);
        probes.push(py);
    }
    let tuples = candidate_tuples(k, m, game.outputs_distinct_required);
    let challenge = game.challenge.sample();
    let best = |seen: &[u32]| -> Vec<u32> {
        let mut best = (-1.0, &tuples[0]);
        for x in &tuples {
            let score = win_chance(game, challenge, x, seen);
            if score > best.0 + 1e-12 {
                best = (score, x);
            }
        }
        best.1.clone()
    };
    let inputs: Vec<(&str, u32)> = probes.iter().map(|r| (r.as_str(), n)).collect();
    let size = (n as usize).pow(budget);
    let mut seen = vec![0u32; budget as usize];
    let choices: Vec<Vec<u32>> = (0..size)
        .map(|mut idx| {
            for s in seen.iter_mut() {
                *s = (idx % n as usize) as u32;
                idx /= n as usize;
            }
            best(&seen)
        })
        .collect();
    for (j, x) in xs.iter().enumerate() {
        let table: Vec<u32> = choices.iter().map(|c| c[j]).collect();
        if inputs.is_empty() {
            b.gate(Gate::Shift { reg: x.clone(), by: table[0] });
        } else {
            b.lookup(&inputs, x, |vals| {
                let idx = vals.iter().rev().fold(0usize, |acc, &v| acc * n as usize + v as usize);
                table[idx]
            });
        }
    }
    b.finish(format!("classical-exhaustive(k={k},budget={budget})"), xs)
}

fn candidate_tuples(k: usize, m: u32, distinct: bool) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let total = (m as usize).pow(k as u32);
    for mut idx in 0..total {
        let mut x = vec![0u32; k];
        for slot in x.iter_mut().rev() {
            *slot = (idx % m as usize) as u32;
            idx /= m as usize;
        }
        if !distinct || all_distinct(&x) {
            out.push(x);
        }
    }
    out
}

/// Probability that `x⃗` wins when images of probed points (`0..seen.len()`)
/// are known and the others are uniform.
fn win_chance(game: &GameSpec, challenge: u64, x: &[u32], seen: &[u32]) -> f64 {
    let n = game.codomain();
    let unknown: Vec<u32> = x
        .iter()
        .filter(|&&p| p as usize >= seen.len())
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let completions = (n as usize).pow(unknown.len() as u32);
    let mut wins = 0usize;
    let mut y = vec![0u32; x.len()];
    for mut idx in 0..completions {
        let mut assign = vec![0u32; unknown.len()];
        for a in assign.iter_mut() {
            *a = (idx % n as usize) as u32;
            idx /= n as usize;
        }
        for (yi, &p) in y.iter_mut().zip(x) {
            *yi = match seen.get(p as usize) {
                Some(&v) => v,
                None => assign[unknown.iter().position(|&u| u == p).expect("unknown point")],
            };
        }
        let args = PredicateArgs {
            x,
            y: &y,
            z: 0,
            challenge,
            codomain: n,
            oracle: None,
        };
        wins += usize::from(game.relation.contains(&args));
    }
    wins as f64 / completions as f64
}

/// Zero-query circuit outputting `(0, 1, …, k−1)`.
pub fn build_random_guess(k: usize, m: u32) -> Result<AdversaryCircuit, AdversaryError> {
    if k as u32 > m {
        return Err(AdversaryError::DomainTooSmall { k, m });
    }
    let mut b = Builder::new();
    let xs: Vec<String> = (0..k).map(|j| b.reg(format!("x{j}"), m)).collect();
    for (j, x) in xs.iter().enumerate() {
        if j > 0 {
            b.gate(Gate::Shift { reg: x.clone(), by: j as u32 });
        }
    }
    b.finish(format!("random-guess(k={k})"), xs)
}

/// Outputs the fixed tuple `xs` after `quantum` uniform quantum queries whose
/// answers it ignores.
pub fn build_fixed_output(xs: &[u32], quantum: usize, m: u32, n: u32) -> Result<AdversaryCircuit, AdversaryError> {
    if let Some(&x) = xs.iter().find(|&&x| x >= m) {
        return Err(AdversaryError::BudgetMismatch(format!("output {x} outside the domain {m}")));
    }
    let mut b = Builder::new();
    let regs: Vec<String> = (0..xs.len()).map(|j| b.reg(format!("x{j}"), m)).collect();
    for (r, &x) in regs.iter().zip(xs) {
        b.gate(Gate::Shift { reg: r.clone(), by: x });
    }
    if quantum > 0 {
        let w = b.reg("w", m);
        let y = b.reg("y", n);
        b.gate(Gate::Prepare { reg: w.clone(), support: (0..m).collect() });
        for _ in 0..quantum {
            b.query(QueryKind::Quantum, &w, &y);
        }
    }
    b.finish(format!("fixed-output(k={},q={quantum})", xs.len()), regs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Bounds;
    use crate::relations::{evaluate_predicate, Oracle, OracleTable, Relation};
    use crate::statevec::{run_circuit, RunOptions};

    fn success(game: &GameSpec, circuit: &Circuit, h: &OracleTable) -> f64 {
        let exec = run_circuit(circuit, h, &RunOptions::default()).unwrap();
        let k = circuit.arity();
        exec.distribution()
            .into_iter()
            .filter(|(label, _)| {
                let x = label[..k].to_vec();
                let y = x.iter().map(|&v| h.lookup(v)).collect();
                let out = crate::relations::OutputTuple { x, y, z: 0 };
                evaluate_predicate(game, h, game.challenge.sample(), &out).unwrap()
            })
            .map(|(_, p)| p)
            .sum()
    }

    fn average(game: &GameSpec, circuit: &Circuit) -> f64 {
        let (m, n) = (game.domain, game.codomain());
        let tables: Vec<_> = OracleTable::enumerate(m, n).collect();
        tables.iter().map(|h| success(game, circuit, h)).sum::<f64>() / tables.len() as f64
    }

    fn spec(k: usize, u: usize, v: usize, targets: Vec<u32>, m: u32, n: u32) -> StagedGroverSpec {
        StagedGroverSpec { k, u, v, targets, m, n }
    }

    #[test]
    fn grover_finds_a_unique_preimage_with_certainty() {
        let adv = build_staged_grover(&spec(1, 1, 0, vec![1], 4, 4)).unwrap();
        assert_eq!((adv.q(), adv.c()), (2, 0));
        let game = GameSpec::new(Relation::multi_image(vec![1], 4), 4);
        let unique: Vec<_> = OracleTable::enumerate(4, 4).filter(|h| h.preimages(1).len() == 1).collect();
        assert_eq!(unique.len(), 108);
        for h in &unique {
            assert!((success(&game, &adv.circuit, h) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_classical_scan_always_succeeds_when_possible() {
        let adv = build_staged_grover(&spec(1, 0, 3, vec![0], 3, 2)).unwrap();
        assert_eq!((adv.q(), adv.c()), (0, 3));
        let game = GameSpec::new(Relation::multi_image(vec![0], 2), 3);
        for h in OracleTable::enumerate(3, 2) {
            let want = if h.preimages(0).is_empty() { 0.0 } else { 1.0 };
            assert!((success(&game, &adv.circuit, &h) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn staged_grover_beats_the_algorithm_bound() {
        let b = Bounds::default();
        for (k, u, v, m) in [(1, 1, 0, 3), (1, 0, 1, 3), (1, 1, 1, 3), (1, 1, 0, 4), (2, 1, 0, 3), (2, 0, 1, 3)] {
            let n = m;
            let mut total = 0.0;
            let mut count = 0;
            for t in 0..(n as usize).pow(k as u32) {
                let targets: Vec<u32> = (0..k).map(|j| (t / (n as usize).pow(j as u32)) as u32 % n).collect();
                let adv = build_staged_grover(&spec(k, u, v, targets.clone(), m, n)).unwrap();
                let game = GameSpec::new(Relation::multi_image(targets, n), m);
                total += average(&game, &adv.circuit);
                count += 1;
            }
            let measured = total / count as f64;
            let claim = b
                .multi_image_alg_success(k as u64, (k * u) as u64, (k * v) as u64, n as u64)
                .unwrap()
                .capped
                .to_f64();
            assert!(measured + 1e-9 >= claim, "k={k} u={u} v={v}: {measured} < {claim}");
        }
    }

    #[test]
    fn staged_grover_meets_the_search_floor() {
        let b = Bounds::default();
        for n in [3u32, 4] {
            for u in 0..=1 {
                for v in 0..=2 {
                    let adv = build_staged_grover(&spec(1, u, v, vec![0], n, n)).unwrap();
                    let game = GameSpec::new(Relation::multi_image(vec![0], n), n);
                    let unique: Vec<_> = OracleTable::enumerate(n, n).filter(|h| h.preimages(0).len() == 1).collect();
                    let avg = unique.iter().map(|h| success(&game, &adv.circuit, h)).sum::<f64>() / unique.len() as f64;
                    let floor = b.hybrid_search_floor(u as u64, v as u64, n as u64).unwrap().to_f64();
                    assert!(avg + 1e-9 >= floor, "N={n} u={u} v={v}: {avg} < {floor}");
                }
            }
        }
    }

    #[test]
    fn declared_budgets_match_the_pattern() {
        for s in [spec(1, 2, 1, vec![1], 4, 2), spec(2, 1, 1, vec![0, 1], 4, 2), spec(3, 1, 0, vec![0, 0, 1], 3, 3)] {
            let adv = build_staged_grover(&s).unwrap();
            assert_eq!(adv.q(), s.quantum_queries());
            assert_eq!(adv.c(), s.classical_queries());
            assert_eq!(adv.k(), s.k);
            let h = OracleTable::constant(s.m, s.n, 0);
            run_circuit(&adv.circuit, &h, &RunOptions::default()).unwrap();
        }
        assert!(build_staged_grover(&spec(2, 1, 2, vec![0, 0], 4, 2)).is_err());
        assert!(build_staged_grover(&spec(1, 1, 0, vec![0, 1], 4, 2)).is_err());
    }

    #[test]
    fn classical_exhaustive_examples() {
        let game = GameSpec::new(Relation::multi_collision(2, 2), 3);
        let full = build_classical_exhaustive(2, 3, &game).unwrap();
        for h in OracleTable::enumerate(3, 2) {
            // three points over two values always contain a collision
            assert!((success(&game, &full.circuit, &h) - 1.0).abs() < 1e-12);
        }
        let blind = build_classical_exhaustive(2, 0, &game).unwrap();
        let guess = build_random_guess(2, 3).unwrap();
        assert!((average(&game, &blind.circuit) - average(&game, &guess.circuit)).abs() < 1e-12);

        for n in 2..=4u32 {
            for m in 1..=4u32.min(n + 1) {
                let game = GameSpec::new(Relation::multi_search(1, n, 0), m);
                for budget in 0..=m {
                    let adv = build_classical_exhaustive(1, budget, &game).unwrap();
                    let miss = 1.0 - 1.0 / n as f64;
                    let tries = if budget < m { budget + 1 } else { budget };
                    let want = 1.0 - miss.powi(tries as i32);
                    assert!((average(&game, &adv.circuit) - want).abs() < 1e-12, "N={n} M={m} b={budget}");
                }
            }
        }
        assert!(matches!(
            build_classical_exhaustive(1, 4, &GameSpec::new(Relation::multi_search(1, 2, 0), 3)),
            Err(AdversaryError::BudgetExceedsDomain { .. })
        ));
    }

    #[test]
    fn random_guess_examples() {
        let search = GameSpec::new(Relation::multi_search(1, 2, 0), 4);
        let guess = build_random_guess(1, 4).unwrap();
        assert_eq!(average(&search, &guess.circuit), 0.5);
        let collision = GameSpec::new(Relation::multi_collision(2, 2), 4);
        assert_eq!(average(&collision, &build_random_guess(2, 4).unwrap().circuit), 0.5);
        assert!(build_random_guess(3, 2).is_err());
    }

    #[test]
    fn built_circuits_survive_json() {
        let adv = build_staged_grover(&spec(2, 1, 1, vec![1, 0], 3, 2)).unwrap();
        assert_eq!(Circuit::from_json(&adv.circuit.to_json()).unwrap(), adv.circuit);
        let fixed = build_fixed_output(&[2, 0], 1, 3, 2).unwrap();
        assert_eq!((fixed.q(), fixed.c(), fixed.k()), (1, 0, 2));
    }
}

//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process exits nonzero when a verdict differs from `EXPECTED`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use qlift::adversaries::{
    build_classical_exhaustive, build_fixed_output, build_random_guess, build_staged_grover, StagedGroverSpec,
};
use qlift::bounds::{Bounds, ExactValue};
use qlift::relations::{p_of_r_closed_form, p_of_r_exact, GameSpec, Oracle, OracleTable, Relation, RelationKind};
use qlift::reprogram::{
    enumerate_schedules, enumerate_uniform_schedules, extended_pattern, run_averaged, run_reprogrammed_adversary,
    run_simulator, ReprogramError, SimMode,
};
use qlift::statevec::{
    run_circuit, Circuit, Distribution, Gate, Mode, OutputRegisters, QueryKind, QueryRegisters, RegisterSpec,
    RunOptions, StateError,
};
use qlift::verify::{
    all_classical, all_quantum, average_win, check_noisy_inequality, check_reprogram_inequality,
    play_direct_product, play_game, ExperimentGrid, InequalityReport, Manifest, Verdict, TOLERANCE,
};

/// The constant reported for the optimality ratio.
const OPTIMALITY_C: f64 = 945.92;

/// Verdicts this build is known to produce. Criterion 5 fails: the noisy
/// loss from the proof omits the `2^{2k}` factor that the simulator's
/// before/after bit and the hybrid decomposition cost.
const EXPECTED: [(u32, bool); 10] = [
    (1, true),
    (2, true),
    (3, true),
    (4, true),
    (5, false),
    (6, true),
    (7, true),
    (8, true),
    (9, true),
    (10, true),
];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn exact(v: &ExactValue) -> BigRational {
    v.as_rational().cloned().expect("value fits in exact arithmetic")
}

fn grover(k: usize, u: usize, v: usize, targets: Vec<u32>, m: u32, n: u32) -> Circuit {
    build_staged_grover(&StagedGroverSpec { k, u, v, targets, m, n })
        .unwrap()
        .circuit
}

/// Counts `y⃗ ∈ [N]^k` by brute force, checking every reordering.
fn brute_p_of_r(n: u32, k: usize, member: impl Fn(&[u32]) -> bool) -> BigRational {
    fn perms(v: &[u32]) -> Vec<Vec<u32>> {
        if v.len() <= 1 {
            return vec![v.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..v.len() {
            let mut rest = v.to_vec();
            let head = rest.remove(i);
            for mut p in perms(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    let total = (n as u64).pow(k as u32);
    let mut hits = 0u64;
    for idx in 0..total {
        let y: Vec<u32> = (0..k).map(|i| ((idx / (n as u64).pow(i as u32)) % n as u64) as u32).collect();
        if perms(&y).iter().any(|p| member(p)) {
            hits += 1;
        }
    }
    rat(hits as i64, total as i64)
}

fn criterion_1() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 2..=6u32 {
        for k in 1..=3usize {
            let mut cases: Vec<(Relation, BigRational)> = vec![
                (
                    Relation::multi_collision(k, n),
                    brute_p_of_r(n, k, |y| y.iter().all(|&v| v == y[0])),
                ),
                (
                    Relation::multi_search(k, n, n - 1),
                    brute_p_of_r(n, k, |y| y.iter().all(|&v| v == n - 1)),
                ),
            ];
            let distinct: Vec<u32> = (0..k as u32).map(|t| t % n).collect();
            for targets in [distinct, vec![0; k]] {
                let t = targets.clone();
                let oracle = brute_p_of_r(n, k, move |y| y == t.as_slice());
                cases.push((Relation::multi_image(targets, n), oracle));
            }
            for (rel, oracle) in cases {
                let closed = exact(&p_of_r_closed_form(&rel).unwrap());
                let brute = exact(&p_of_r_exact(&rel).unwrap());
                checked += 1;
                if closed != brute || closed != oracle {
                    bad.push(format!("{:?} N={n} k={k}: {closed} vs {brute}", rel.kind()));
                }
            }
        }
    }
    for range in 1..=3u32 {
        let rel = Relation::three_sum(range);
        let closed = exact(&p_of_r_closed_form(&rel).unwrap());
        let brute = exact(&p_of_r_exact(&rel).unwrap());
        let r = range as i64;
        let oracle = brute_p_of_r(2 * range + 1, 3, |y| y.iter().map(|&v| v as i64 - r).sum::<i64>() == 0);
        checked += 1;
        if closed != brute || closed != oracle {
            bad.push(format!("3SUM range={range}: {closed} vs {brute}"));
        }
    }
    let tiny = exact(&p_of_r_exact(&Relation::three_sum(1)).unwrap());
    if tiny != rat(7, 27) {
        bad.push(format!("3SUM range=1 gives {tiny}"));
    }
    Outcome::new(bad.is_empty(), format!("{checked} relations agree exactly {bad:?}"))
}

fn criterion_2() -> Outcome {
    let b = Bounds::default();
    let base = rat(8, 1) * rat(739, 100);
    let mut checked = 0;
    let mut bad = Vec::new();
    for k in 1..=12u64 {
        for q in k..=12 {
            for c in k..=12 {
                let a = exact(&b.capital_a(k, q, c).unwrap());
                let inner = rat((q * q) as i64, (k * k) as i64) + rat(c as i64, k as i64);
                let bound = Pow::pow(&base * inner, k as u32);
                checked += 1;
                if a > bound {
                    bad.push((k, q, c));
                }
            }
        }
    }
    Outcome::new(bad.is_empty(), format!("{checked} triples, violations {bad:?}"))
}

fn criterion_3() -> Outcome {
    let b = Bounds::default();
    let mut checked = 0;
    let mut bad = Vec::new();
    for total in 1..=24u64 {
        for q in 0..=total {
            let c = total - q;
            for k in 1..=total {
                let alpha = b.alpha_distribution(k, q, c).unwrap();
                let sum = alpha
                    .iter()
                    .map(|a| a.as_rational().cloned())
                    .try_fold(BigRational::zero(), |acc, a| a.map(|a| acc + a));
                checked += 1;
                if sum != Some(BigRational::one()) {
                    bad.push((k, q, c));
                }
            }
        }
    }
    Outcome::new(bad.is_empty(), format!("{checked} (k, q, c) sum to exactly 1, failures {bad:?}"))
}

fn report_line(r: &InequalityReport) -> String {
    let tightest = r
        .cells
        .iter()
        .filter(|c| c.rhs > 0.0)
        .map(|c| c.lhs / c.rhs)
        .fold(f64::INFINITY, f64::min);
    format!("{} {} min_margin={:.3e} min lhs/rhs={tightest:.3}", r.label, r.verdict, r.min_margin)
}

fn criterion_4() -> Outcome {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests/thm31_tiny.json");
    let mut reports = Manifest::load(&manifest).unwrap().run(None).unwrap();
    let game = GameSpec::new(Relation::multi_search(2, 2, 0), 3);
    let pairs = [
        ("probe_k2", build_classical_exhaustive(2, 1, &game).unwrap().circuit),
        ("fixed_k2", build_fixed_output(&[2, 0], 1, 3, 2).unwrap().circuit),
        ("guess_k2", build_random_guess(2, 3).unwrap().circuit),
    ];
    for (label, circuit) in pairs {
        assert!(circuit.len() <= 3);
        reports.push(check_reprogram_inequality(&ExperimentGrid::new(label, circuit, 3, 2)).unwrap());
    }
    let cells: usize = reports.iter().map(|r| r.cells.len()).sum();
    let pass = reports.iter().all(|r| r.min_margin >= -TOLERANCE);
    let lines: Vec<String> = reports.iter().map(report_line).collect();
    Outcome::new(pass, format!("{cells} cells; {}", lines.join("; ")))
}

/// Simulator and adversary probabilities of one cell, computed directly.
/// `None` when the circuit repeats a classical input, which the pure
/// classical model excludes.
fn cell_values(circuit: &Circuit, h: &OracleTable, g: &OracleTable, xo: &[u32], mode: SimMode) -> Option<(f64, f64)> {
    let repeated = |e: &ReprogramError| matches!(e, ReprogramError::State(StateError::DuplicateClassicalQuery { .. }));
    let k = circuit.arity();
    let schedules = enumerate_uniform_schedules(k, &extended_pattern(circuit));
    let sim = match run_averaged(circuit, h, g, &schedules, mode) {
        Ok(sim) => sim,
        Err(e) if repeated(&e) => return None,
        Err(e) => panic!("{e}"),
    };
    let yo: Vec<u32> = xo.iter().map(|&x| g.lookup(x)).collect();
    let adv: f64 = match run_reprogrammed_adversary(circuit, h, xo, &yo, mode) {
        Ok(dist) => dist
            .iter()
            .filter(|(t, _)| qlift::relations::vectors_equivalent(&t.x, xo))
            .map(|(_, p)| p)
            .sum(),
        Err(e) if repeated(&e) => return None,
        Err(e) => panic!("{e}"),
    };
    Some((sim.success(xo, |_| true), adv))
}

fn criterion_5() -> Outcome {
    let (m, n) = (2, 2);
    let search = GameSpec::new(Relation::multi_search(1, n, 0), m);
    let circuits = [
        ("grover", grover(1, 2, 0, vec![0], m, n)),
        ("probe", all_quantum(&build_classical_exhaustive(1, 2, &search).unwrap().circuit)),
        ("fixed", build_fixed_output(&[1], 2, m, n).unwrap().circuit),
    ];
    let b = Bounds::default();
    let mut lines = Vec::new();
    let mut all_pass = true;
    let mut bit_match = true;
    let mut scaled_pass = true;
    let (mut compared, mut skipped) = (0, 0);
    for (label, circuit) in &circuits {
        assert_eq!(circuit.len(), 2);
        let grid = ExperimentGrid::new(*label, circuit.clone(), m, n);
        for p in [rat(0, 1), rat(1, 2), rat(1, 1)] {
            let report = check_noisy_inequality(&grid, &p).unwrap();
            all_pass &= report.verdict == Verdict::Pass;
            lines.push(report_line(&report));
            let loss = b.noisy_loss_exact(&p, circuit.len() as u64 + 1, 1).unwrap().to_f64();
            for cell in &report.cells {
                // the same cell with the loss scaled by 2^{2k}
                scaled_pass &= cell.lhs + TOLERANCE >= cell.rhs / 4.0;
                let pattern = if p.is_zero() {
                    Some(all_quantum(circuit))
                } else if p.is_one() {
                    Some(all_classical(circuit))
                } else {
                    None
                };
                if let Some(pure) = pattern {
                    let h = OracleTable::from_index(m, n, cell.h_index);
                    let g = OracleTable::from_index(m, n, cell.g_index);
                    match cell_values(&pure, &h, &g, &cell.xo, SimMode::Pure) {
                        Some((sim, adv)) => {
                            compared += 1;
                            bit_match &= (sim - cell.lhs).abs() <= 1e-12 && (adv - cell.rhs * loss).abs() <= 1e-12;
                        }
                        None => skipped += 1,
                    }
                }
            }
        }
    }
    let detail = format!(
        "bit-match with pure patterns on {compared} cells ({skipped} repeat a classical input): {bit_match}; passes with loss·4^k: {scaled_pass}; {}",
        lines.join("; ")
    );
    Outcome::new(all_pass && bit_match, detail)
}

fn criterion_6() -> Outcome {
    let b = Bounds::default();
    let mut worst: f64 = 0.0;
    let mut ratio_ok = true;
    for k in 1..=2u64 {
        for u in 1..=2u64 {
            for v in 0..=2u64 {
                for n in [8u64, 16] {
                    let (q, c) = (k * u, k * v);
                    let alg = b.multi_image_alg_success(k, q, c, n).unwrap().raw.to_f64();
                    let loss = b.hybrid_loss_exact(k, q, c).unwrap().to_f64();
                    let fact = (1..=k).product::<u64>() as f64;
                    let ratio = loss * fact / (n as f64).powi(k as i32) / alg;
                    ratio_ok &= ratio.is_finite() && ratio <= OPTIMALITY_C.powi(k as i32);
                    worst = worst.max(ratio.powf(1.0 / k as f64));
                }
            }
        }
    }
    let mut floor_ok = true;
    let mut floors = Vec::new();
    for n in [3u32, 4] {
        let game = GameSpec::new(Relation::multi_image(vec![0], n), n);
        let unique: Vec<OracleTable> = OracleTable::enumerate(n, n).filter(|h| h.preimages(0).len() == 1).collect();
        for u in 0..=1usize {
            for v in 0..=2usize {
                let circuit = grover(1, u, v, vec![0], n, n);
                let avg = unique
                    .iter()
                    .map(|h| play_game(&game, &circuit, h, None).unwrap())
                    .sum::<f64>()
                    / unique.len() as f64;
                let floor = b.hybrid_search_floor(u as u64, v as u64, n as u64).unwrap().to_f64();
                floor_ok &= avg + TOLERANCE >= floor;
                floors.push(format!("N={n} u={u} v={v}: {avg:.4}≥{floor:.4}"));
            }
        }
    }
    Outcome::new(
        ratio_ok && floor_ok,
        format!("C = {OPTIMALITY_C}, worst ratio^(1/k) = {worst:.2}; {}", floors.join(", ")),
    )
}

fn criterion_7() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut check = |game: GameSpec, expect: f64| {
        let guess = build_random_guess(game.k(), game.domain).unwrap().circuit;
        let avg = average_win(&game, &guess, 1 << 20).unwrap();
        checked += 1;
        if (avg - expect).abs() > 1e-12 {
            bad.push(format!("{:?} M={}: {avg} vs {expect}", game.relation.kind(), game.domain));
        }
    };
    for n in 1..=4u32 {
        for m in 1..=4u32 {
            for k in 1..=(m.min(3) as usize) {
                let p = |r: &Relation| p_of_r_exact(r).unwrap().to_f64();
                let rel = Relation::multi_collision(k, n);
                check(GameSpec::new(rel.clone(), m), p(&rel));
                let rel = Relation::multi_search(k, n, n - 1);
                check(GameSpec::new(rel.clone(), m), p(&rel));
                let rel = Relation::multi_image(vec![n - 1; k], n);
                check(GameSpec::new(rel.clone(), m), p(&rel));
                // ordered membership: only one of the #perms orderings wins
                if k >= 2 && n >= 2 {
                    let targets: Vec<u32> = (0..k as u32).map(|t| t % n).collect();
                    let rel = Relation::multi_image(targets, n);
                    let perms = match rel.kind() {
                        RelationKind::MultiImage { targets } => {
                            let mut counts = BTreeMap::new();
                            for t in targets {
                                *counts.entry(*t).or_insert(0u32) += 1;
                            }
                            let fact = |x: u32| (1..=x as u64).product::<u64>() as f64;
                            fact(k as u32) / counts.values().map(|&c| fact(c)).product::<f64>()
                        }
                        _ => unreachable!(),
                    };
                    check(GameSpec::new(rel.clone(), m), p(&rel) / perms);
                }
            }
            if m >= 3 {
                let rel = Relation::three_sum(1);
                check(GameSpec::new(rel.clone(), m), p_of_r_exact(&rel).unwrap().to_f64());
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!("{checked} games; distinct-target multi-image compared against p(R)/#orderings; failures {bad:?}"),
    )
}

fn criterion_8() -> Outcome {
    let (mut runs, mut g_ok, mut worst_drift, mut worst_weight) = (0usize, true, 0f64, 0f64);
    let game = GameSpec::new(Relation::multi_search(2, 2, 0), 3);
    let circuits = [
        (grover(1, 1, 1, vec![0], 3, 2), 3),
        (build_classical_exhaustive(1, 2, &GameSpec::new(Relation::multi_search(1, 2, 0), 3)).unwrap().circuit, 3),
        (build_classical_exhaustive(2, 1, &game).unwrap().circuit, 3),
        (build_fixed_output(&[1, 0], 1, 3, 2).unwrap().circuit, 3),
        (grover(1, 2, 0, vec![0], 2, 2), 2),
    ];
    for (circuit, m) in &circuits {
        let k = circuit.arity();
        let schedules = enumerate_schedules(k, &extended_pattern(circuit)).unwrap();
        for h in OracleTable::enumerate(*m, 2) {
            for g in OracleTable::enumerate(*m, 2) {
                for (_, s) in &schedules {
                    for mode in [SimMode::Pure, SimMode::Noisy { p: 0.5 }] {
                        let run = run_simulator(circuit, &h, &g, s, mode).unwrap();
                        runs += 1;
                        g_ok &= run.g_queries.iter().all(|&c| c == k);
                        worst_drift = worst_drift.max(run.stats.max_norm_drift);
                        worst_weight = worst_weight.max((run.total() - 1.0).abs());
                    }
                }
            }
            let options = RunOptions { mode: Mode::Noisy { p: 0.5 }, ..RunOptions::default() };
            let exec = run_circuit(circuit, &h, &options).unwrap();
            worst_drift = worst_drift.max(exec.stats.max_norm_drift);
            worst_weight = worst_weight.max((exec.total_weight() - 1.0).abs());
        }
    }
    let pass = g_ok && worst_drift <= 1e-12 && worst_weight <= 1e-10;
    Outcome::new(
        pass,
        format!("{runs} simulator runs; G count = k on all: {g_ok}; norm drift ≤ {worst_drift:.1e}; weight error ≤ {worst_weight:.1e}"),
    )
}

/// One uniform query on `[m]`, then a reflection about the uniform state.
fn one_query_circuit(m: u32, n: u32) -> Circuit {
    Circuit {
        registers: vec![RegisterSpec { name: "x".into(), dim: m }, RegisterSpec { name: "y".into(), dim: n }],
        pattern: vec![QueryKind::Quantum],
        query_registers: vec![QueryRegisters { input: "x".into(), output: "y".into() }],
        unitaries: vec![
            vec![Gate::Prepare { reg: "x".into(), support: (0..m).collect() }],
            vec![Gate::Diffusion { reg: "x".into(), support: (0..m).collect() }],
        ],
        output_registers: OutputRegisters { x: vec!["x".into()], z: Some("y".into()) },
    }
}

fn criterion_9() -> Outcome {
    let circuit = one_query_circuit(3, 2);
    let mut worst: f64 = 0.0;
    for h in OracleTable::enumerate(3, 2) {
        let dist = |p: f64| -> Distribution {
            let options = RunOptions { mode: Mode::Noisy { p }, ..RunOptions::default() };
            run_circuit(&circuit, &h, &options).unwrap().distribution()
        };
        let (d0, d1) = (dist(0.0), dist(1.0));
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let dp = dist(p);
            let keys: std::collections::BTreeSet<_> = d0.keys().chain(d1.keys()).chain(dp.keys()).collect();
            for key in keys {
                let get = |d: &Distribution| d.get(key).copied().unwrap_or(0.0);
                worst = worst.max((get(&dp) - ((1.0 - p) * get(&d0) + p * get(&d1))).abs());
            }
        }
    }
    Outcome::new(worst <= 1e-12, format!("max deviation {worst:.1e} over 8 oracles and 5 values of p"))
}

/// Fixed guesses `b·m + x`, one per block.
fn block_guess(g: usize, m: u32, x: u32) -> Circuit {
    let registers: Vec<RegisterSpec> =
        (0..g).map(|b| RegisterSpec { name: format!("x{b}"), dim: g as u32 * m }).collect();
    let gates = (0..g).map(|b| Gate::Shift { reg: format!("x{b}"), by: b as u32 * m + x }).collect();
    Circuit {
        output_registers: OutputRegisters { x: registers.iter().map(|r| r.name.clone()).collect(), z: None },
        registers,
        pattern: vec![],
        query_registers: vec![],
        unitaries: vec![gates],
    }
}

fn criterion_10() -> Outcome {
    let game = GameSpec::new(Relation::multi_search(1, 2, 0), 2);
    let avg = |g: usize| {
        let circuit = block_guess(g, 2, 1);
        let tables: Vec<OracleTable> = OracleTable::enumerate(2 * g as u32, 2).collect();
        tables.iter().map(|h| play_direct_product(g, &game, &circuit, h).unwrap()).sum::<f64>() / tables.len() as f64
    };
    let (one, two) = (avg(1), avg(2));
    let product_ok = (two - one * one).abs() <= 1e-12;
    let b = Bounds::default();
    let mut exact_ok = true;
    for (k, q, c, p) in [(1, 2, 3, rat(1, 100)), (2, 1, 1, rat(1, 1024)), (1, 0, 1, rat(1, 2)), (3, 4, 2, rat(6, 4096))] {
        let p = ExactValue::Exact(p);
        let single = exact(&b.lifting_bound(k, q, c, &p).unwrap());
        let dpt = exact(&b.dpt_bound(2, k, q, c, &p).unwrap());
        exact_ok &= dpt == &single * &single;
    }
    Outcome::new(
        product_ok && exact_ok,
        format!("g=1 {one}, g=2 {two}; dpt_bound(2) = lifting_bound² exactly: {exact_ok}"),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut unexpected = Vec::new();
    for (i, run) in criteria.iter().enumerate() {
        let id = i as u32 + 1;
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2}: {verdict} ({:.1}s) {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        let expected = EXPECTED.iter().find(|(c, _)| *c == id).map(|(_, e)| *e);
        if expected != Some(outcome.pass) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("verdicts differ from the recorded expectation for criteria {unexpected:?}");
        std::process::exit(1);
    }
}

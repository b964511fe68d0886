//! Oracles, winning relations and the game-only quantity p(R).

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::ExactValue;

/// Default cap on the number of `y⃗` tuples enumerated by [`p_of_r_exact`].
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelationError {
    #[error("patch inputs must be pairwise distinct")]
    DuplicateInputs,
    #[error("patch has {inputs} inputs but {outputs} outputs")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("enumerating {tuples} tuples exceeds the limit {limit}")]
    EnumerationTooLarge { tuples: String, limit: u64 },
    #[error("no closed form for custom predicate relations")]
    UnsupportedKind,
    #[error("p(R) is undefined for the oracle-dependent predicate {0}; use the harness")]
    OracleDependent(String),
    #[error("expected {expected} outputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid oracle table: {0}")]
    InvalidTable(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
}

/// Anything that answers `x ↦ H(x)` on a finite domain.
pub trait Oracle: Sync {
    fn domain_size(&self) -> u32;
    fn codomain_size(&self) -> u32;
    fn lookup(&self, x: u32) -> u32;
}

/// A function `[M] → [N]` stored as a table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OracleTable {
    codomain: u32,
    table: Vec<u32>,
}

impl OracleTable {
    pub fn new(codomain: u32, table: Vec<u32>) -> Result<Self, RelationError> {
        if table.is_empty() || codomain == 0 {
            return Err(RelationError::InvalidTable("M and N must be positive".into()));
        }
        if let Some(&bad) = table.iter().find(|&&y| y >= codomain) {
            return Err(RelationError::InvalidTable(format!(
                "entry {bad} outside [0, {codomain})"
            )));
        }
        Ok(OracleTable { codomain, table })
    }

    pub fn constant(domain: u32, codomain: u32, value: u32) -> Self {
        OracleTable::new(codomain, vec![value; domain as usize]).expect("value in range")
    }

    /// Number of distinct tables `N^M`, if it fits in a `u64`.
    pub fn count(domain: u32, codomain: u32) -> Option<u64> {
        (codomain as u64).checked_pow(domain)
    }

    /// The `index`-th table in little-endian base-`N` order: entry `x` is
    /// digit `x` of `index`.
    pub fn from_index(domain: u32, codomain: u32, mut index: u64) -> Self {
        let table = (0..domain)
            .map(|_| {
                let d = (index % codomain as u64) as u32;
                index /= codomain as u64;
                d
            })
            .collect();
        OracleTable { codomain, table }
    }

    /// All `N^M` tables in index order.
    pub fn enumerate(domain: u32, codomain: u32) -> impl Iterator<Item = OracleTable> {
        let count = Self::count(domain, codomain).expect("table count fits in u64");
        (0..count).map(move |i| Self::from_index(domain, codomain, i))
    }

    pub fn entries(&self) -> &[u32] {
        &self.table
    }

    /// Preimages of `y`, ascending.
    pub fn preimages(&self, y: u32) -> Vec<u32> {
        (0..self.domain_size()).filter(|&x| self.lookup(x) == y).collect()
    }
}

impl Oracle for OracleTable {
    fn domain_size(&self) -> u32 {
        self.table.len() as u32
    }
    fn codomain_size(&self) -> u32 {
        self.codomain
    }
    fn lookup(&self, x: u32) -> u32 {
        self.table[x as usize]
    }
}

/// `H` with the outputs on a few inputs overridden.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReprogrammedOracle<'a> {
    base: &'a OracleTable,
    patch: Vec<(u32, u32)>,
}

impl ReprogrammedOracle<'_> {
    pub fn patch(&self) -> &[(u32, u32)] {
        &self.patch
    }

    /// Materializes the patched function as a plain table.
    pub fn to_table(&self) -> OracleTable {
        let table = (0..self.domain_size()).map(|x| self.lookup(x)).collect();
        OracleTable {
            codomain: self.base.codomain,
            table,
        }
    }
}

impl Oracle for ReprogrammedOracle<'_> {
    fn domain_size(&self) -> u32 {
        self.base.domain_size()
    }
    fn codomain_size(&self) -> u32 {
        self.base.codomain
    }
    fn lookup(&self, x: u32) -> u32 {
        self.patch
            .iter()
            .find(|(px, _)| *px == x)
            .map(|&(_, y)| y)
            .unwrap_or_else(|| self.base.lookup(x))
    }
}

/// `H_{x⃗,y⃗}`: answers `y_i` on `x_i` and `H(z)` elsewhere.
pub fn reprogram<'a>(
    base: &'a OracleTable,
    xs: &[u32],
    ys: &[u32],
) -> Result<ReprogrammedOracle<'a>, RelationError> {
    if xs.len() != ys.len() {
        return Err(RelationError::LengthMismatch {
            inputs: xs.len(),
            outputs: ys.len(),
        });
    }
    if !all_distinct(xs) {
        return Err(RelationError::DuplicateInputs);
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= base.domain_size() || y >= base.codomain {
            return Err(RelationError::InvalidTable(format!("patch ({x}, {y}) out of range")));
        }
    }
    Ok(ReprogrammedOracle {
        base,
        patch: xs.iter().copied().zip(ys.iter().copied()).collect(),
    })
}

/// True iff the two vectors are permutations of each other.
pub fn vectors_equivalent<T: Ord + Clone>(a: &[T], b: &[T]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort();
    b.sort();
    a == b
}

pub fn all_distinct<T: Ord + Clone>(xs: &[T]) -> bool {
    let mut v = xs.to_vec();
    v.sort();
    v.windows(2).all(|w| w[0] != w[1])
}

/// Arguments handed to a registered predicate.
pub struct PredicateArgs<'a> {
    pub x: &'a [u32],
    pub y: &'a [u32],
    pub z: u64,
    pub challenge: u64,
    pub codomain: u32,
    /// `None` when the predicate is evaluated away from any oracle, as in p(R).
    pub oracle: Option<&'a dyn Oracle>,
}

/// A named black-box relation.
#[derive(Clone, Copy)]
pub struct CustomPredicate {
    pub name: &'static str,
    pub oracle_dependent: bool,
    pub permutation_invariant: bool,
    pub eval: fn(&PredicateArgs) -> bool,
}

impl std::fmt::Debug for CustomPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CustomPredicate({})", self.name)
    }
}

/// Predicates reachable by name from game files.
pub const PREDICATES: &[CustomPredicate] = &[
    CustomPredicate {
        name: "always",
        oracle_dependent: false,
        permutation_invariant: true,
        eval: |_| true,
    },
    CustomPredicate {
        name: "never",
        oracle_dependent: false,
        permutation_invariant: true,
        eval: |_| false,
    },
    CustomPredicate {
        name: "sum-zero",
        oracle_dependent: false,
        permutation_invariant: true,
        eval: |a| a.y.iter().map(|&y| y as u64).sum::<u64>() % a.codomain as u64 == 0,
    },
    CustomPredicate {
        name: "increasing",
        oracle_dependent: false,
        permutation_invariant: false,
        eval: |a| a.y.windows(2).all(|w| w[0] < w[1]),
    },
    CustomPredicate {
        name: "hits-image-of-zero",
        oracle_dependent: true,
        permutation_invariant: true,
        eval: |a| match a.oracle {
            Some(h) => a.y.iter().all(|&y| y == h.lookup(0)),
            None => false,
        },
    },
];

pub fn lookup_predicate(name: &str) -> Result<CustomPredicate, RelationError> {
    PREDICATES
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| RelationError::UnknownPredicate(name.into()))
}

#[derive(Clone, Debug)]
pub enum RelationKind {
    /// `y⃗` equals the ordered target vector.
    MultiImage { targets: Vec<u32> },
    /// All `k` outputs collide.
    MultiCollision,
    /// Every output equals `target`.
    MultiSearch { target: u32 },
    /// Outputs in `{−range, …, range}`, stored with offset `range`, summing to zero.
    ThreeSum { range: u32 },
    Custom(CustomPredicate),
}

#[derive(Clone, Debug)]
pub struct Relation {
    k: usize,
    codomain: u32,
    kind: RelationKind,
}

impl Relation {
    pub fn new(k: usize, codomain: u32, kind: RelationKind) -> Result<Self, RelationError> {
        if k == 0 || codomain == 0 {
            return Err(RelationError::InvalidGame("k and N must be positive".into()));
        }
        match &kind {
            RelationKind::MultiImage { targets } => {
                if targets.len() != k {
                    return Err(RelationError::InvalidGame(format!(
                        "{} targets for arity {k}",
                        targets.len()
                    )));
                }
                if targets.iter().any(|&t| t >= codomain) {
                    return Err(RelationError::InvalidGame("target outside codomain".into()));
                }
            }
            RelationKind::MultiSearch { target } if *target >= codomain => {
                return Err(RelationError::InvalidGame("target outside codomain".into()));
            }
            RelationKind::ThreeSum { range } => {
                if k != 3 {
                    return Err(RelationError::InvalidGame("3SUM has arity 3".into()));
                }
                if codomain != 2 * range + 1 {
                    return Err(RelationError::InvalidGame(format!(
                        "3SUM with range {range} needs N = {}",
                        2 * range + 1
                    )));
                }
            }
            _ => {}
        }
        Ok(Relation { k, codomain, kind })
    }

    pub fn multi_image(targets: Vec<u32>, codomain: u32) -> Self {
        Relation::new(targets.len(), codomain, RelationKind::MultiImage { targets }).unwrap()
    }

    pub fn multi_collision(k: usize, codomain: u32) -> Self {
        Relation::new(k, codomain, RelationKind::MultiCollision).unwrap()
    }

    pub fn multi_search(k: usize, codomain: u32, target: u32) -> Self {
        Relation::new(k, codomain, RelationKind::MultiSearch { target }).unwrap()
    }

    pub fn three_sum(range: u32) -> Self {
        Relation::new(3, 2 * range + 1, RelationKind::ThreeSum { range }).unwrap()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codomain(&self) -> u32 {
        self.codomain
    }

    pub fn kind(&self) -> &RelationKind {
        &self.kind
    }

    pub fn permutation_invariant(&self) -> bool {
        match &self.kind {
            RelationKind::MultiImage { .. } => false,
            RelationKind::Custom(p) => p.permutation_invariant,
            _ => true,
        }
    }

    pub fn oracle_dependent(&self) -> bool {
        matches!(&self.kind, RelationKind::Custom(p) if p.oracle_dependent)
    }

    /// Membership of `(x⃗, y⃗, z)` in `R_ch`, ignoring oracle consistency.
    pub fn contains(&self, args: &PredicateArgs) -> bool {
        let y = args.y;
        match &self.kind {
            RelationKind::MultiImage { targets } => y == targets.as_slice(),
            RelationKind::MultiCollision => y.windows(2).all(|w| w[0] == w[1]),
            RelationKind::MultiSearch { target } => y.iter().all(|v| v == target),
            RelationKind::ThreeSum { range } => {
                y.iter().map(|&v| v as i64 - *range as i64).sum::<i64>() == 0
            }
            RelationKind::Custom(p) => (p.eval)(args),
        }
    }

    fn contains_y(&self, y: &[u32]) -> bool {
        let x: Vec<u32> = (0..self.k as u32).collect();
        self.contains(&PredicateArgs {
            x: &x,
            y,
            z: 0,
            challenge: 0,
            codomain: self.codomain,
            oracle: None,
        })
    }

    /// `∃π: π(y⃗) ∈ R`, scanning every permutation.
    fn contains_some_permutation(&self, y: &[u32]) -> bool {
        let mut perm = y.to_vec();
        perm.sort();
        loop {
            if self.contains_y(&perm) {
                return true;
            }
            if !next_permutation(&mut perm) {
                return false;
            }
        }
    }
}

/// Advances to the next lexicographic permutation; false after the last one.
fn next_permutation(v: &mut [u32]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// p(R) by enumerating all `N^k` output tuples.
pub fn p_of_r_exact(relation: &Relation) -> Result<ExactValue, RelationError> {
    p_of_r_enumerated(relation, DEFAULT_ENUMERATION_LIMIT, relation.permutation_invariant())
}

/// Like [`p_of_r_exact`] but always scans every permutation, even for
/// permutation-invariant relations.
pub fn p_of_r_exact_full_scan(relation: &Relation) -> Result<ExactValue, RelationError> {
    p_of_r_enumerated(relation, DEFAULT_ENUMERATION_LIMIT, false)
}

pub fn p_of_r_enumerated(
    relation: &Relation,
    limit: u64,
    single_test: bool,
) -> Result<ExactValue, RelationError> {
    if let RelationKind::Custom(p) = &relation.kind {
        if p.oracle_dependent {
            return Err(RelationError::OracleDependent(p.name.into()));
        }
    }
    let n = relation.codomain as u64;
    let k = relation.k;
    let tuples = match n.checked_pow(k as u32) {
        Some(t) if t <= limit => t,
        _ => {
            return Err(RelationError::EnumerationTooLarge {
                tuples: format!("{n}^{k}"),
                limit,
            })
        }
    };
    let mut y = vec![0u32; k];
    let mut hits = 0u64;
    for _ in 0..tuples {
        let hit = if single_test {
            relation.contains_y(&y)
        } else {
            relation.contains_some_permutation(&y)
        };
        hits += hit as u64;
        for d in y.iter_mut() {
            *d += 1;
            if *d < relation.codomain {
                break;
            }
            *d = 0;
        }
    }
    Ok(ExactValue::ratio(hits, tuples))
}

/// Closed-form p(R) for the four named relations.
pub fn p_of_r_closed_form(relation: &Relation) -> Result<ExactValue, RelationError> {
    let n = BigUint::from(relation.codomain);
    let k = relation.k;
    let n_k = num_traits::pow(n.clone(), k);
    let value = match &relation.kind {
        RelationKind::MultiImage { targets } => {
            // distinct orderings of the target multiset
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for &t in targets {
                *counts.entry(t).or_default() += 1;
            }
            let perms = counts
                .values()
                .fold(factorial(k), |acc, &m| acc / factorial(m));
            ExactValue::ratio(perms, n_k)
        }
        RelationKind::MultiCollision => ExactValue::ratio(1, num_traits::pow(n, k - 1)),
        RelationKind::MultiSearch { .. } => ExactValue::ratio(1, n_k),
        RelationKind::ThreeSum { range } => {
            let r = *range as u64;
            let side = 2 * r + 1;
            ExactValue::ratio(3 * r * r + 3 * r + 1, side * side * side)
        }
        RelationKind::Custom(_) => return Err(RelationError::UnsupportedKind),
    };
    Ok(value)
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, i| acc * i)
}

/// How the challenger draws `ch`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Challenge {
    /// `ch = 0`.
    #[default]
    Fixed,
    /// `ch` drawn from a ChaCha stream keyed by `seed`.
    Seeded { seed: u64 },
}

impl Challenge {
    /// The challenge value. Samplers never look at the oracle.
    pub fn sample(&self) -> u64 {
        match self {
            Challenge::Fixed => 0,
            Challenge::Seeded { seed } => ChaCha8Rng::seed_from_u64(*seed).next_u64(),
        }
    }
}

/// A multi-output k-search game.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub relation: Relation,
    /// Oracle domain size `M`.
    pub domain: u32,
    pub outputs_distinct_required: bool,
    pub challenge: Challenge,
}

impl GameSpec {
    pub fn new(relation: Relation, domain: u32) -> Self {
        GameSpec {
            relation,
            domain,
            outputs_distinct_required: true,
            challenge: Challenge::Fixed,
        }
    }

    pub fn k(&self) -> usize {
        self.relation.k
    }

    pub fn codomain(&self) -> u32 {
        self.relation.codomain
    }

    pub fn from_json(text: &str) -> Result<Self, RelationError> {
        let file: GameFile =
            serde_json::from_str(text).map_err(|e| RelationError::InvalidGame(e.to_string()))?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GameFile::from(self)).expect("game serializes")
    }
}

/// `(x⃗, y⃗, z)` produced by an adversary.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputTuple {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub z: u64,
}

/// The verifier: `R` holds, `y⃗ = H(x⃗)`, and `x⃗` is duplicate-free when required.
pub fn evaluate_predicate(
    game: &GameSpec,
    oracle: &dyn Oracle,
    challenge: u64,
    out: &OutputTuple,
) -> Result<bool, RelationError> {
    let k = game.k();
    if out.x.len() != k || out.y.len() != k {
        return Err(RelationError::ArityMismatch {
            expected: k,
            got: out.x.len().max(out.y.len()),
        });
    }
    if out
        .x
        .iter()
        .zip(&out.y)
        .any(|(&x, &y)| x >= oracle.domain_size() || oracle.lookup(x) != y)
    {
        return Ok(false);
    }
    if game.outputs_distinct_required && !all_distinct(&out.x) {
        return Ok(false);
    }
    Ok(game.relation.contains(&PredicateArgs {
        x: &out.x,
        y: &out.y,
        z: out.z,
        challenge,
        codomain: game.codomain(),
        oracle: Some(oracle),
    }))
}

/// On-disk game description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub kind: String,
    pub k: usize,
    #[serde(rename = "M")]
    pub domain: u32,
    #[serde(rename = "N")]
    pub codomain: u32,
    #[serde(default)]
    pub parameters: GameParameters,
    #[serde(default = "yes")]
    pub outputs_distinct_required: bool,
    #[serde(default)]
    pub challenge: Challenge,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParameters {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub targets: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub range: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predicate: Option<String>,
}

impl TryFrom<GameFile> for GameSpec {
    type Error = RelationError;

    fn try_from(f: GameFile) -> Result<Self, Self::Error> {
        let missing = |what: &str| RelationError::InvalidGame(format!("{} needs {what}", f.kind));
        let kind = match f.kind.as_str() {
            "multi-image" => RelationKind::MultiImage {
                targets: f.parameters.targets.clone().ok_or_else(|| missing("targets"))?,
            },
            "multi-collision" => RelationKind::MultiCollision,
            "multi-search" => RelationKind::MultiSearch {
                target: f.parameters.target.unwrap_or(0),
            },
            "three-sum" => RelationKind::ThreeSum {
                range: f.parameters.range.ok_or_else(|| missing("range"))?,
            },
            "custom" => RelationKind::Custom(lookup_predicate(
                f.parameters.predicate.as_deref().ok_or_else(|| missing("predicate"))?,
            )?),
            other => return Err(RelationError::InvalidGame(format!("unknown kind {other:?}"))),
        };
        if f.domain == 0 {
            return Err(RelationError::InvalidGame("M must be positive".into()));
        }
        Ok(GameSpec {
            relation: Relation::new(f.k, f.codomain, kind)?,
            domain: f.domain,
            outputs_distinct_required: f.outputs_distinct_required,
            challenge: f.challenge,
        })
    }
}

impl From<&GameSpec> for GameFile {
    fn from(g: &GameSpec) -> Self {
        let mut parameters = GameParameters::default();
        let kind = match &g.relation.kind {
            RelationKind::MultiImage { targets } => {
                parameters.targets = Some(targets.clone());
                "multi-image"
            }
            RelationKind::MultiCollision => "multi-collision",
            RelationKind::MultiSearch { target } => {
                parameters.target = Some(*target);
                "multi-search"
            }
            RelationKind::ThreeSum { range } => {
                parameters.range = Some(*range);
                "three-sum"
            }
            RelationKind::Custom(p) => {
                parameters.predicate = Some(p.name.into());
                "custom"
            }
        };
        GameFile {
            kind: kind.into(),
            k: g.k(),
            domain: g.domain,
            codomain: g.codomain(),
            parameters,
            outputs_distinct_required: g.outputs_distinct_required,
            challenge: g.challenge,
        }
    }
}

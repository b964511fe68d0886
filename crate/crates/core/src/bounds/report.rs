use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{Bounds, BoundsError, ExactValue};

/// Which result a report entry instantiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremTag {
    /// Hybrid coherent measure-and-reprogram, exact constant chain.
    HybridReprogram,
    /// Same loss with the `(8e²(q²/k²+c/k))^k` simplification.
    HybridReprogramSimplified,
    /// Purely quantum measure-and-reprogram loss `(2q+1)^{2k}`.
    QuantumReprogram,
    /// Lifting against noisy oracles.
    NoisyLifting,
    /// Lifting for depth-bounded algorithms via the noisy reduction.
    BoundedDepthLifting,
    /// Lifting for image relations, `loss·p(R)`.
    ImageLifting,
    /// Direct product over `g` independent instances.
    DirectProduct,
    /// Classical-advice adversaries.
    Advice,
    /// Salted games against classical advice.
    Salting,
    /// Staged hybrid algorithm for multi-image search.
    MultiImageAlgorithm,
    /// Single-target hybrid search floor.
    HybridSearchFloor,
}

impl TheoremTag {
    pub const ALL: [TheoremTag; 11] = [
        TheoremTag::HybridReprogram,
        TheoremTag::HybridReprogramSimplified,
        TheoremTag::QuantumReprogram,
        TheoremTag::NoisyLifting,
        TheoremTag::BoundedDepthLifting,
        TheoremTag::ImageLifting,
        TheoremTag::DirectProduct,
        TheoremTag::Advice,
        TheoremTag::Salting,
        TheoremTag::MultiImageAlgorithm,
        TheoremTag::HybridSearchFloor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremTag::HybridReprogram => "hybrid-reprogram",
            TheoremTag::HybridReprogramSimplified => "hybrid-reprogram-simplified",
            TheoremTag::QuantumReprogram => "quantum-reprogram",
            TheoremTag::NoisyLifting => "noisy-lifting",
            TheoremTag::BoundedDepthLifting => "bounded-depth-lifting",
            TheoremTag::ImageLifting => "image-lifting",
            TheoremTag::DirectProduct => "direct-product",
            TheoremTag::Advice => "advice",
            TheoremTag::Salting => "salting",
            TheoremTag::MultiImageAlgorithm => "multi-image-algorithm",
            TheoremTag::HybridSearchFloor => "hybrid-search-floor",
        }
    }
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameter set for a report. `k`, `q`, `c` are always present; the rest
/// switch on the bounds that need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub k: u64,
    pub q: u64,
    pub c: u64,
    /// Total noisy queries.
    pub total: Option<u64>,
    #[serde(with = "opt_rational", default)]
    pub p: Option<BigRational>,
    pub depth: Option<u64>,
    pub codomain: Option<u64>,
    pub domain: Option<u64>,
    pub advice_bits: Option<u64>,
    pub salts: Option<u64>,
    pub instances: Option<u64>,
}

impl Params {
    pub fn new(k: u64, q: u64, c: u64) -> Self {
        Params {
            k,
            q,
            c,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if self.k == 0 {
            return Err(BoundsError::InvalidParams("k must be at least 1".into()));
        }
        if self.k > self.q + self.c {
            return Err(BoundsError::InvalidParams(format!(
                "k = {} exceeds q + c = {}",
                self.k,
                self.q + self.c
            )));
        }
        if self.p.is_some() && self.depth.is_some() {
            return Err(BoundsError::InvalidParams(
                "give either a noise probability or a depth, not both".into(),
            ));
        }
        for (name, v) in [
            ("N", self.codomain),
            ("M", self.domain),
            ("K", self.salts),
            ("g", self.instances),
            ("d", self.depth),
        ] {
            if v == Some(0) {
                return Err(BoundsError::InvalidParams(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

mod opt_rational {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_some(&format!("{}/{}", r.numer(), r.denom())),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| crate::parse_rational(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// One named value in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub value: ExactValue,
    /// Uncapped value, present only when capping changed it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raw: Option<ExactValue>,
    pub tag: TheoremTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: Params,
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn new(params: Params) -> Self {
        BoundReport {
            params,
            entries: Vec::new(),
        }
    }

    /// Appends an entry; names must be unique within a report.
    pub fn push(&mut self, name: impl Into<String>, value: ExactValue, tag: TheoremTag) {
        self.push_raw(name, value, None, tag);
    }

    pub fn push_raw(
        &mut self,
        name: impl Into<String>,
        value: ExactValue,
        raw: Option<ExactValue>,
        tag: TheoremTag,
    ) {
        let name = name.into();
        assert!(
            self.get(&name).is_none(),
            "duplicate report entry {name}"
        );
        let raw = raw.filter(|r| *r != value);
        self.entries.push(BoundEntry {
            name,
            value,
            raw,
            tag,
        });
    }

    pub fn get(&self, name: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn names_are_unique(&self) -> bool {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.name.as_str()).collect();
        set.len() == self.entries.len()
    }

    /// Every bound applicable to `params`. `p_r` is the game's p(R) and
    /// `p_r_mis` the caller-supplied p(R) of the S-fold multi-instance game.
    pub fn build(
        bounds: &Bounds,
        params: &Params,
        p_r: Option<&ExactValue>,
        p_r_mis: Option<&ExactValue>,
    ) -> Result<BoundReport, BoundsError> {
        params.validate()?;
        let Params { k, q, c, .. } = *params;
        let mut report = BoundReport::new(params.clone());

        report.push("capital_a", bounds.capital_a(k, q, c)?, TheoremTag::HybridReprogram);
        if k <= 16 {
            for (t, a) in bounds.alpha_distribution(k, q, c)?.into_iter().enumerate() {
                report.push(format!("alpha_{t}"), a, TheoremTag::HybridReprogram);
            }
        }
        report.push(
            "hybrid_loss_exact",
            bounds.hybrid_loss_exact(k, q, c)?,
            TheoremTag::HybridReprogram,
        );
        let simplified = bounds.hybrid_loss_simplified(k, q, c)?;
        report.push(
            "hybrid_loss_simplified_factor",
            simplified.bare,
            TheoremTag::HybridReprogramSimplified,
        );
        report.push(
            "hybrid_loss_simplified",
            simplified.full,
            TheoremTag::HybridReprogramSimplified,
        );
        report.push("dfm_loss", bounds.dfm_loss(k, q)?, TheoremTag::QuantumReprogram);

        if let (Some(p), Some(total)) = (&params.p, params.total) {
            report.push(
                "noisy_loss_exact",
                bounds.noisy_loss_exact(p, total, k)?,
                TheoremTag::NoisyLifting,
            );
            report.push(
                "noisy_loss_asymptotic",
                bounds.noisy_loss_asymptotic(p, total, k)?,
                TheoremTag::NoisyLifting,
            );
        }
        if let (Some(d), Some(total)) = (params.depth, params.total) {
            let (p, total2) = bounds.bounded_depth_params(d, total)?;
            report.push(
                "bounded_depth_noise",
                ExactValue::Exact(p.clone()),
                TheoremTag::BoundedDepthLifting,
            );
            report.push(
                "bounded_depth_queries",
                ExactValue::from_integer(total2),
                TheoremTag::BoundedDepthLifting,
            );
            report.push(
                "bounded_depth_loss_exact",
                bounds.noisy_loss_exact(&p, total2, k)?,
                TheoremTag::BoundedDepthLifting,
            );
            report.push(
                "bounded_depth_loss_asymptotic",
                bounds.noisy_loss_asymptotic(&p, total2, k)?,
                TheoremTag::BoundedDepthLifting,
            );
        }
        if let Some(p_r) = p_r {
            report.push("p_of_r", p_r.clone(), TheoremTag::ImageLifting);
            report.push_raw(
                "lifting_bound",
                bounds.lifting_bound(k, q, c, p_r)?,
                Some(bounds.lifting_bound_raw(k, q, c, p_r)?),
                TheoremTag::ImageLifting,
            );
            if let Some(g) = params.instances {
                report.push(
                    "dpt_bound",
                    bounds.dpt_bound(g, k, q, c, p_r)?,
                    TheoremTag::DirectProduct,
                );
            }
            if let (Some(s), Some(salts)) = (params.advice_bits, params.salts) {
                report.push(
                    "salted_bound",
                    bounds.salted_bound(k, q, c, s, salts, p_r)?,
                    TheoremTag::Salting,
                );
            }
        }
        if let (Some(s), Some(p_mis)) = (params.advice_bits, p_r_mis) {
            if s > 0 {
                report.push(
                    "advice_bound",
                    bounds.advice_bound(k, q, c, s, p_mis)?,
                    TheoremTag::Advice,
                );
            }
        }
        if let Some(n) = params.codomain {
            if q % k == 0 && c % k == 0 {
                let alg = bounds.multi_image_alg_success(k, q, c, n)?;
                report.push_raw(
                    "multi_image_alg_success",
                    alg.capped,
                    Some(alg.raw),
                    TheoremTag::MultiImageAlgorithm,
                );
                let (u, v) = (q / k, c / k);
                if v < n {
                    report.push(
                        "hybrid_search_floor",
                        bounds.hybrid_search_floor(u, v, n)?,
                        TheoremTag::HybridSearchFloor,
                    );
                }
            }
        }
        debug_assert!(report.names_are_unique());
        Ok(report)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(4);
        writeln!(f, "{:<width$}  {:<28}  value", "name", "tag")?;
        for e in &self.entries {
            write!(f, "{:<width$}  {:<28}  {}", e.name, e.tag.as_str(), e.value)?;
            if let Some(raw) = &e.raw {
                write!(f, "  (uncapped {raw})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Default for BoundReport {
    fn default() -> Self {
        BoundReport::new(Params::default())
    }
}

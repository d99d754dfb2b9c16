use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Sorted distinct eigenvalues with multiplicities, complete up to `lambda_trust`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    eigenvalues: Vec<f64>,
    multiplicities: Vec<u64>,
    /// cumulative[i] = sum of multiplicities[..=i]
    cumulative: Vec<u64>,
    lambda_trust: f64,
    model_tag: String,
    parameters: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    model_tag: String,
    lambda_trust: f64,
    parameters: serde_json::Value,
}

const MERGE_TOL: f64 = 1e-12;

impl SpectrumTable {
    /// Builds a table from unsorted `(eigenvalue, multiplicity)` pairs. Values above
    /// `lambda_trust` are dropped and values within relative distance 1e-12 are merged.
    pub fn from_levels(
        mut levels: Vec<(f64, u64)>,
        lambda_trust: f64,
        model_tag: &str,
        parameters: serde_json::Value,
    ) -> Result<Self> {
        if levels.iter().any(|(v, _)| !v.is_finite()) {
            return Err(domain("non-finite eigenvalue"));
        }
        if lambda_trust.is_nan() {
            return Err(domain("lambda_trust is NaN"));
        }
        levels.retain(|&(v, m)| v <= lambda_trust && m > 0);
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut eigenvalues: Vec<f64> = Vec::with_capacity(levels.len());
        let mut multiplicities: Vec<u64> = Vec::with_capacity(levels.len());
        let mut anchor = f64::NAN;
        for (v, m) in levels {
            if let Some(last) = multiplicities.last_mut() {
                if (v - anchor).abs() <= MERGE_TOL * anchor.abs().max(1.0) {
                    *last += m;
                    continue;
                }
            }
            anchor = v;
            eigenvalues.push(v);
            multiplicities.push(m);
        }
        Ok(Self::assemble(eigenvalues, multiplicities, lambda_trust, model_tag.to_string(), parameters))
    }

    fn assemble(
        eigenvalues: Vec<f64>,
        multiplicities: Vec<u64>,
        lambda_trust: f64,
        model_tag: String,
        parameters: serde_json::Value,
    ) -> Self {
        let mut cumulative = Vec::with_capacity(multiplicities.len());
        let mut acc = 0u64;
        for &m in &multiplicities {
            acc += m;
            cumulative.push(acc);
        }
        SpectrumTable { eigenvalues, multiplicities, cumulative, lambda_trust, model_tag, parameters }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn lambda_trust(&self) -> f64 {
        self.lambda_trust
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn parameters(&self) -> &serde_json::Value {
        &self.parameters
    }

    /// Number of distinct eigenvalues.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Total number of eigenvalues with multiplicity.
    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    /// Index of the first eigenvalue strictly above `lam`.
    pub(crate) fn upper_index(&self, lam: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v <= lam)
    }

    /// Index of the first eigenvalue at or above `lam`.
    pub(crate) fn lower_index(&self, lam: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v < lam)
    }

    pub(crate) fn cumulative_before(&self, idx: usize) -> u64 {
        if idx == 0 {
            0
        } else {
            self.cumulative[idx - 1]
        }
    }

    pub(crate) fn check_trust(&self, lam: f64) -> Result<()> {
        if lam > self.lambda_trust || lam.is_nan() {
            return Err(Error::Trust { requested: lam, trust: self.lambda_trust });
        }
        Ok(())
    }

    /// `N(lam)`: eigenvalues in `(-inf, lam]` counted with multiplicity.
    pub fn count(&self, lam: f64) -> Result<u64> {
        self.check_trust(lam)?;
        Ok(self.cumulative_before(self.upper_index(lam)))
    }

    /// Disjoint union of two tables; the trust level is the smaller of the two.
    pub fn union(&self, other: &SpectrumTable) -> Result<SpectrumTable> {
        let trust = self.lambda_trust.min(other.lambda_trust);
        let levels = self
            .eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .chain(other.eigenvalues.iter().zip(&other.multiplicities))
            .map(|(&v, &m)| (v, m))
            .collect();
        SpectrumTable::from_levels(
            levels,
            trust,
            &format!("{}+{}", self.model_tag, other.model_tag),
            serde_json::json!({ "left": self.parameters, "right": other.parameters }),
        )
    }

    /// CSV with header `eigenvalue,multiplicity`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(32 * self.len() + 32);
        s.push_str("eigenvalue,multiplicity\n");
        for (v, m) in self.eigenvalues.iter().zip(&self.multiplicities) {
            s.push_str(&format!("{v:.16e},{m}\n"));
        }
        s
    }

    pub fn metadata_json(&self) -> String {
        let meta = Metadata {
            model_tag: self.model_tag.clone(),
            lambda_trust: self.lambda_trust,
            parameters: self.parameters.clone(),
        };
        serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"
    }

    pub fn from_csv(csv: &str, metadata: &str) -> Result<Self> {
        let meta: Metadata = serde_json::from_str(metadata)?;
        let mut lines = csv.lines();
        match lines.next() {
            Some("eigenvalue,multiplicity") => {}
            other => return Err(domain(format!("unexpected spectrum header {other:?}"))),
        }
        let mut eigenvalues = Vec::new();
        let mut multiplicities = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| domain(format!("line {}: expected two columns", k + 2)))?;
            let v: f64 = a.parse().map_err(|e| domain(format!("line {}: {e}", k + 2)))?;
            let m: u64 = b.parse().map_err(|e| domain(format!("line {}: {e}", k + 2)))?;
            if let Some(&last) = eigenvalues.last() {
                if v <= last {
                    return Err(domain(format!("line {}: eigenvalues not strictly increasing", k + 2)));
                }
            }
            if m == 0 {
                return Err(domain(format!("line {}: zero multiplicity", k + 2)));
            }
            eigenvalues.push(v);
            multiplicities.push(m);
        }
        Ok(Self::assemble(eigenvalues, multiplicities, meta.lambda_trust, meta.model_tag, meta.parameters))
    }
}

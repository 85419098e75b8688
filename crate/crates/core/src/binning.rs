//! Vocabulary-change discretizations of the number line.

use serde::{Deserialize, Serialize};

use crate::numparse::{decompose, pow10, N_EXPONENTS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentativeRule {
    /// Mantissa 5, the arithmetic mean of the decade's mantissa range.
    Am,
    /// Mantissa sqrt(10), the geometric mean.
    Gm,
}

/// One bin per decade exponent, 0 through 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecadeBins {
    pub rule: RepresentativeRule,
}

impl DecadeBins {
    pub const N_BINS: usize = N_EXPONENTS;

    pub fn new(rule: RepresentativeRule) -> Self {
        DecadeBins { rule }
    }

    pub fn bin_of(&self, value: f64) -> Result<usize> {
        Ok(decompose(value)?.exponent as usize)
    }

    pub fn representative(&self, bin: usize) -> Result<f64> {
        if bin >= Self::N_BINS {
            return Err(Error::IndexOutOfRange { index: bin, len: Self::N_BINS });
        }
        // Bin 16 holds only 1e16, so its representative lies above the
        // supported range; callers that need an in-range value clamp.
        Ok(match self.rule {
            RepresentativeRule::Am => 5.0 * pow10(bin),
            RepresentativeRule::Gm => 10f64.sqrt() * pow10(bin),
        })
    }
}

/// Equal-frequency bins with upper-inclusive edges: bin `k` holds
/// `(edges[k-1], edges[k]]`; values below the first edge fall in bin 0 and
/// values above the last edge in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqBins {
    pub edges: Vec<f64>,
    pub representatives: Vec<f64>,
}

/// The 21 bin edges reported for the FinNews corpus.
pub const FINNEWS_EDGES: [f64; 21] = [
    1.0,
    2.0,
    3.0,
    4.0,
    6.0,
    10.0,
    14.0,
    21.0,
    30.0,
    31.0,
    70.0,
    415.0,
    2011.0,
    2017.0,
    2018.0,
    5131.0,
    30207.0,
    252178.0,
    1700000.0,
    30000000.0,
    1152337024.0,
];

impl FreqBins {
    pub fn new(edges: Vec<f64>, representatives: Vec<f64>) -> Result<Self> {
        let bins = FreqBins { edges, representatives };
        bins.validate()?;
        Ok(bins)
    }

    /// The shipped FinNews edges. Without the corpus the in-bin means are
    /// unknown, so each representative is the geometric midpoint of its
    /// interval (the first bin's is its edge).
    pub fn finnews() -> Self {
        let edges = FINNEWS_EDGES.to_vec();
        let representatives = edges
            .iter()
            .enumerate()
            .map(|(k, &hi)| if k == 0 { hi } else { (edges[k - 1] * hi).sqrt() })
            .collect();
        FreqBins { edges, representatives }
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.edges.len() != self.representatives.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} edges vs {} representatives",
                self.edges.len(),
                self.representatives.len()
            )));
        }
        if self.edges.iter().any(|e| !e.is_finite() || *e <= 0.0)
            || self.edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParam("edges must be positive and strictly ascending".into()));
        }
        for (k, &r) in self.representatives.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 || self.bin_of(r)? != k {
                return Err(Error::InvalidParam(format!("representative {r} is not inside bin {k}")));
            }
        }
        Ok(())
    }

    pub fn bin_of(&self, value: f64) -> Result<usize> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::OutOfRange(value));
        }
        let k = self.edges.partition_point(|&e| e < value);
        Ok(k.min(self.edges.len() - 1))
    }

    pub fn representative(&self, bin: usize) -> Result<f64> {
        self.representatives
            .get(bin)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: bin, len: self.representatives.len() })
    }
}

/// Sorts `values` and cuts at the `i/n_bins` quantile positions. Repeated
/// cut values collapse into one bin, so tied data can yield fewer bins.
/// Each representative is the mean of the values that land in its bin.
pub fn fit_freq_bins(values: &[f64], n_bins: usize) -> Result<FreqBins> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_bins == 0 {
        return Err(Error::InvalidParam("n_bins must be at least 1".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(Error::OutOfRange(*bad));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..=n_bins)
        .map(|i| sorted[(i * n).div_ceil(n_bins).max(1) - 1])
        .collect();
    edges.dedup();

    let mut representatives = Vec::with_capacity(edges.len());
    let mut lo = 0;
    for &edge in &edges {
        let hi = sorted.partition_point(|&v| v <= edge);
        let bin = &sorted[lo..hi];
        representatives.push(bin.iter().sum::<f64>() / bin.len() as f64);
        lo = hi;
    }
    Ok(FreqBins { edges, representatives })
}

//! Corpus and model introspection: mantissa histograms, leading-digit
//! (Benford) checks, and a top-k neuron trigger probe.

use serde::{Deserialize, Serialize};

use crate::numparse::decompose;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MantissaHistogram {
    /// `n_bins + 1` ascending edges from 1 to 10.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl MantissaHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Index of the fullest bin (lowest index on ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower,upper,count,frequency\n");
        for (i, (&c, f)) in self.counts.iter().zip(self.frequencies()).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", self.bin_edges[i], self.bin_edges[i + 1], c, f));
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (480.0, 240.0, 24.0);
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let bar_w = (w - 2.0 * pad) / self.counts.len() as f64;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        for (i, &c) in self.counts.iter().enumerate() {
            let bh = (h - 2.0 * pad) * c as f64 / max;
            let x = pad + i as f64 * bar_w;
            let y = h - pad - bh;
            svg.push_str(&format!(
                "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" fill=\"#4c72b0\"><title>[{}, {}): {c}</title></rect>\n",
                bar_w * 0.9,
                self.bin_edges[i],
                self.bin_edges[i + 1]
            ));
        }
        for (x, label) in [(pad, "1"), (w - pad, "10")] {
            svg.push_str(&format!("  <text x=\"{x}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{label}</text>\n", h - 8.0));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Equal-width histogram of mantissas over `[1, 10)`.
pub fn mantissa_histogram(values: &[f64], n_bins: usize) -> Result<MantissaHistogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_bins < 2 {
        return Err(Error::InvalidParam("a mantissa histogram needs at least 2 bins".into()));
    }
    let width = 9.0 / n_bins as f64;
    let mut bin_edges: Vec<f64> = (0..n_bins).map(|i| 1.0 + i as f64 * width).collect();
    bin_edges.push(10.0);
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        let m = decompose(v)?.mantissa;
        let mut i = (((m - 1.0) / width) as usize).min(n_bins - 1);
        // float division can land one cell off near an edge
        while i > 0 && m < bin_edges[i] {
            i -= 1;
        }
        while i + 1 < n_bins && m >= bin_edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    Ok(MantissaHistogram { bin_edges, counts, total: values.len() as u64 })
}

/// `P(d) = log10(1 + 1/d)` for leading digits 1..=9.
pub fn benford_reference() -> [f64; 9] {
    std::array::from_fn(|i| (1.0 + 1.0 / (i + 1) as f64).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenfordReport {
    pub n: u64,
    /// Empirical frequency of leading digits 1..=9.
    pub frequencies: [f64; 9],
    pub reference: [f64; 9],
    /// Half the L1 distance between `frequencies` and `reference`.
    pub tv_distance: f64,
}

pub fn benford_deviation(values: &[f64]) -> Result<BenfordReport> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = [0u64; 9];
    for &v in values {
        let d = decompose(v)?.mantissa.floor() as usize;
        counts[d.clamp(1, 9) - 1] += 1;
    }
    let n = values.len() as u64;
    let frequencies = counts.map(|c| c as f64 / n as f64);
    let reference = benford_reference();
    let tv_distance = 0.5 * frequencies.iter().zip(&reference).map(|(f, p)| (f - p).abs()).sum::<f64>();
    Ok(BenfordReport { n, frequencies, reference, tv_distance })
}

/// Dense row-major activation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Activations {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Activations { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Parses `"N D"` on the first line, then N comma-separated rows.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let (rows, cols) = parse_header(lines.next().ok_or(Error::EmptyInput)?)?;
        let mut data = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            let before = data.len();
            for field in line.split(',') {
                let x: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("row {}: bad value {field:?}", i + 1)))?;
                data.push(x);
            }
            if data.len() - before != cols {
                return Err(Error::ShapeMismatch(format!("row {} has {} values, expected {cols}", i + 1, data.len() - before)));
            }
        }
        Self::new(rows, cols, data)
    }

    /// `"N D\n"` followed by `N * D` little-endian f64 values.
    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or(Error::InvalidInput("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::InvalidInput("header is not UTF-8".into()))?;
        let (rows, cols) = parse_header(header)?;
        let body = &bytes[nl + 1..];
        if body.len() != rows * cols * 8 {
            return Err(Error::ShapeMismatch(format!("{} payload bytes for a {rows}x{cols} f64 matrix", body.len())));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Self::new(rows, cols, data)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = format!("{} {}\n", self.rows, self.cols).into_bytes();
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        [n, d] => match (n.parse(), d.parse()) {
            (Ok(n), Ok(d)) => Ok((n, d)),
            _ => Err(Error::InvalidInput(format!("bad header {line:?}"))),
        },
        _ => Err(Error::InvalidInput(format!("header must be \"N D\", got {line:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronProbeResult {
    pub neuron_id: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub k: usize,
    pub target_exponent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronProbe {
    /// Sorted by F1 descending, then neuron index.
    pub ranked: Vec<NeuronProbeResult>,
    /// `curves[j]` sweeps the trigger cutoff `k = 1..=D` for neuron `j`.
    pub curves: Vec<Vec<PrPoint>>,
}

fn prf(tp: u64, triggered: u64, positives: u64) -> (f64, f64, f64) {
    let precision = if triggered == 0 { 0.0 } else { tp as f64 / triggered as f64 };
    let recall = if positives == 0 { 0.0 } else { tp as f64 / positives as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

/// Rank of every column within `row`, largest activation first; ties go to
/// the lower column index.
pub fn row_ranks(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; row.len()];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r;
    }
    ranks
}

/// A neuron triggers on an example when it is among that example's `k`
/// largest activations. Precision and recall are measured against
/// `labels[i] == target_exponent`.
pub fn neuron_pr(acts: &Activations, labels: &[u32], target_exponent: u32, k: usize) -> Result<NeuronProbe> {
    if acts.rows == 0 || acts.rows != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} activation rows vs {} labels", acts.rows, labels.len())));
    }
    if k == 0 || k > acts.cols {
        return Err(Error::ShapeMismatch(format!("k={k} must lie in 1..={}", acts.cols)));
    }
    let d = acts.cols;
    // rank histograms: how often neuron j had rank r, overall and on targets
    let mut all_hist = vec![0u32; d * d];
    let mut pos_hist = vec![0u32; d * d];
    let positives = labels.iter().filter(|&&l| l == target_exponent).count() as u64;
    for (i, &label) in labels.iter().enumerate() {
        let ranks = row_ranks(acts.row(i));
        for (j, &r) in ranks.iter().enumerate() {
            all_hist[j * d + r] += 1;
            if label == target_exponent {
                pos_hist[j * d + r] += 1;
            }
        }
    }
    let mut ranked = Vec::with_capacity(d);
    let mut curves = Vec::with_capacity(d);
    for j in 0..d {
        let (mut triggered, mut tp) = (0u64, 0u64);
        let mut curve = Vec::with_capacity(d);
        for cut in 1..=d {
            triggered += u64::from(all_hist[j * d + cut - 1]);
            tp += u64::from(pos_hist[j * d + cut - 1]);
            let (precision, recall, f1) = prf(tp, triggered, positives);
            curve.push(PrPoint { k: cut, precision, recall });
            if cut == k {
                ranked.push(NeuronProbeResult { neuron_id: j, precision, recall, f1, k, target_exponent });
            }
        }
        curves.push(curve);
    }
    ranked.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(a.neuron_id.cmp(&b.neuron_id)));
    Ok(NeuronProbe { ranked, curves })
}

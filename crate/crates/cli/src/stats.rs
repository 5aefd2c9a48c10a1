use serde::Serialize;

/// Order statistics of a latency sample, in milliseconds. Quartiles use
/// linear interpolation between closest ranks and are absent for a single
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub median_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q3_ms: Option<f64>,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(samples: &[f64]) -> Option<Summary> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let quart = |q| (s.len() > 1).then(|| quantile(&s, q));
    Some(Summary {
        n: s.len(),
        median_ms: quantile(&s, 0.5),
        q1_ms: quart(0.25),
        q3_ms: quart(0.75),
        mean_ms: s.iter().sum::<f64>() / s.len() as f64,
        min_ms: s[0],
        max_ms: s[s.len() - 1],
    })
}

use serde::{Deserialize, Serialize};

/// Monte Carlo result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
    pub meta: String,
}

impl Estimate {
    /// Bernoulli frequency with the plug-in standard error.
    pub fn bernoulli(successes: u64, n: u64, seed: u64, meta: impl Into<String>) -> Self {
        let (mean, stderr) = if n == 0 {
            (0.0, 0.0)
        } else {
            let p = successes as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        };
        Self { mean, stderr, n, seed, meta: meta.into() }
    }

    /// Sample mean and standard error of iid real observations.
    pub fn from_samples(xs: &[f64], seed: u64, meta: impl Into<String>) -> Self {
        let n = xs.len();
        let (mean, stderr) = match n {
            0 => (0.0, 0.0),
            1 => (xs[0], 0.0),
            _ => {
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (mean, (var / n as f64).sqrt())
            }
        };
        Self { mean, stderr, n: n as u64, seed, meta: meta.into() }
    }

    pub fn successes(&self) -> u64 {
        (self.mean * self.n as f64).round() as u64
    }

    /// Wilson score interval at `z` standard deviations.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson(self.successes(), self.n, z)
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Mergeable success counter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub successes: u64,
    pub trials: u64,
}

impl Tally {
    pub fn record(&mut self, hit: bool) {
        self.successes += hit as u64;
        self.trials += 1;
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally { successes: self.successes + other.successes, trials: self.trials + other.trials }
    }

    pub fn estimate(&self, seed: u64, meta: impl Into<String>) -> Estimate {
        Estimate::bernoulli(self.successes, self.trials, seed, meta)
    }
}

impl FromIterator<bool> for Tally {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut t = Tally::default();
        for hit in iter {
            t.record(hit);
        }
        t
    }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some((a, b, r2))
}

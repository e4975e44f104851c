//! Gauss–Legendre rules and compensated summation.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d.is_finite() { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (z * p - pm1) / (z * z - 1.0);
    (p, d)
}

/// Nodes and weights of a rule mapped onto each panel `[b_i, b_{i+1}]`.
pub fn composite_rule(breaks: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let (x, w) = rule;
    let mut out = Vec::with_capacity(x.len() * breaks.len().saturating_sub(1));
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + half * xi, half * wi));
        }
    }
    out
}

/// Sorted, deduplicated breakpoints with every panel split into `2^level` pieces.
pub fn refine_breaks(breaks: &[f64], level: u32) -> Vec<f64> {
    let mut b: Vec<f64> = breaks.iter().copied().filter(|v| v.is_finite()).collect();
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1e-300));
    let parts = 1usize << level;
    let mut out = Vec::with_capacity((b.len().max(1) - 1) * parts + 1);
    for pair in b.windows(2) {
        for j in 0..parts {
            out.push(pair[0] + (pair[1] - pair[0]) * j as f64 / parts as f64);
        }
    }
    if let Some(&last) = b.last() {
        out.push(last);
    }
    out
}

/// Neumaier's improved Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

//! Fixed-step Runge-Kutta and composite quadrature on a uniform grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{CMat, C64};

/// States that can be combined linearly with real coefficients.
pub trait Linear: Clone {
    /// `self += s * other`
    fn add_scaled(&mut self, s: f64, other: &Self);

    fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.add_scaled(s - 1.0, self);
        out
    }
}

impl Linear for Vec<C64> {
    fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b * s;
        }
    }
}

impl Linear for CMat {
    fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.data_mut().iter_mut().zip(other.data()) {
            *a += b * s;
        }
    }
}

impl<T: Linear> Linear for Vec<T>
where
    Vec<T>: Clone,
{
    fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            a.add_scaled(s, b);
        }
    }
}

impl<A: Linear, B: Linear> Linear for (A, B) {
    fn add_scaled(&mut self, s: f64, other: &Self) {
        self.0.add_scaled(s, &other.0);
        self.1.add_scaled(s, &other.1);
    }
}

impl<A: Linear, B: Linear, C: Linear> Linear for (A, B, C) {
    fn add_scaled(&mut self, s: f64, other: &Self) {
        self.0.add_scaled(s, &other.0);
        self.1.add_scaled(s, &other.1);
        self.2.add_scaled(s, &other.2);
    }
}

/// Where a Runge-Kutta stage sits inside the step `[t, t + h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Start,
    Mid,
    End,
}

/// One classical RK4 step of `y' = f(stage, y)`.
pub fn rk4_step<Y: Linear>(y: &Y, h: f64, mut f: impl FnMut(Stage, &Y) -> Y) -> Y {
    let k1 = f(Stage::Start, y);
    let mut y2 = y.clone();
    y2.add_scaled(0.5 * h, &k1);
    let k2 = f(Stage::Mid, &y2);
    let mut y3 = y.clone();
    y3.add_scaled(0.5 * h, &k2);
    let k3 = f(Stage::Mid, &y3);
    let mut y4 = y.clone();
    y4.add_scaled(h, &k3);
    let k4 = f(Stage::End, &y4);
    let mut out = y.clone();
    out.add_scaled(h / 6.0, &k1);
    out.add_scaled(h / 3.0, &k2);
    out.add_scaled(h / 3.0, &k3);
    out.add_scaled(h / 6.0, &k4);
    out
}

/// Quadrature weights for `∫_0^{k h} f` from samples `f_0..f_k`.
///
/// Composite Simpson when `k` is even; for odd `k ≥ 3` the last three
/// intervals use the 3/8 rule; `k = 1` falls back to the trapezoid.
pub fn cumulative_weights(k: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; k + 1];
    if k == 0 {
        return w;
    }
    if k == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let even_end = if k % 2 == 0 { k } else { k - 3 };
    let mut i = 0;
    while i + 2 <= even_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if k % 2 == 1 {
        let s = even_end;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Streaming version of [`cumulative_weights`]: feed samples in order and
/// read back the running integral after each one.
#[derive(Debug, Clone)]
pub struct CumulativeSimpson<Y: Linear> {
    h: f64,
    count: usize,
    recent: Vec<Y>,
    even_sums: Vec<Y>,
    zero: Y,
}

impl<Y: Linear> CumulativeSimpson<Y> {
    pub fn new(h: f64, zero: Y) -> Self {
        CumulativeSimpson { h, count: 0, recent: Vec::new(), even_sums: Vec::new(), zero }
    }

    /// Adds `f_k` and returns `∫_0^{t_k} f`.
    pub fn push(&mut self, f: Y) -> Y {
        let k = self.count;
        self.count += 1;
        self.recent.push(f);
        if self.recent.len() > 4 {
            self.recent.remove(0);
        }
        let h = self.h;
        let r = &self.recent;
        let n = r.len();
        let out = if k == 0 {
            self.zero.clone()
        } else if k == 1 {
            let mut s = r[n - 2].scaled(0.5 * h);
            s.add_scaled(0.5 * h, &r[n - 1]);
            s
        } else if k % 2 == 0 {
            let mut s = self.even_sums.last().cloned().unwrap_or_else(|| self.zero.clone());
            s.add_scaled(h / 3.0, &r[n - 3]);
            s.add_scaled(4.0 * h / 3.0, &r[n - 2]);
            s.add_scaled(h / 3.0, &r[n - 1]);
            s
        } else {
            // even sums hold S_0, S_2, ..., so S_{k-3} is the second to last
            let idx = self.even_sums.len() - 2;
            let mut s = self.even_sums[idx].clone();
            let c = 3.0 * h / 8.0;
            s.add_scaled(c, &r[n - 4]);
            s.add_scaled(3.0 * c, &r[n - 3]);
            s.add_scaled(3.0 * c, &r[n - 2]);
            s.add_scaled(c, &r[n - 1]);
            s
        };
        if k % 2 == 0 {
            self.even_sums.push(out.clone());
            if self.even_sums.len() > 2 {
                self.even_sums.remove(0);
            }
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_integrates_exponential() {
        let err = |steps: usize| {
            let h = 1.0 / steps as f64;
            let mut y = vec![C64::new(1.0, 0.0)];
            for _ in 0..steps {
                y = rk4_step(&y, h, |_, y| y.iter().map(|z| z * C64::new(0.0, -2.0)).collect());
            }
            (y[0] - C64::new(0.0, -2.0).exp()).norm()
        };
        let (e1, e2) = (err(50), err(100));
        assert!(e2 < 1e-7);
        assert!(e1 / e2 > 14.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn weights_integrate_cubics_exactly() {
        let h = 0.1;
        for k in 2..12 {
            let w = cumulative_weights(k, h);
            let approx: f64 = w.iter().enumerate().map(|(i, wi)| {
                let x = i as f64 * h;
                wi * (x * x * x - 2.0 * x + 1.0)
            }).sum();
            let t = k as f64 * h;
            let exact = t.powi(4) / 4.0 - t * t + t;
            assert!((approx - exact).abs() < 1e-13, "k = {k}");
        }
    }

    #[test]
    fn streaming_matches_weights() {
        let h = 0.05;
        let samples: Vec<f64> = (0..15).map(|i| libm::sin(i as f64 * h * 3.0)).collect();
        let mut acc = CumulativeSimpson::new(h, vec![C64::new(0.0, 0.0)]);
        for (k, &f) in samples.iter().enumerate() {
            let got = acc.push(vec![C64::new(f, 0.0)])[0].re;
            let w = cumulative_weights(k, h);
            let want: f64 = w.iter().zip(&samples).map(|(a, b)| a * b).sum();
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|x| libm::log(*x)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 * x + 0.3).collect();
        assert!((fit_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }
}

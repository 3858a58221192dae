//! Max-min power splits for decode-and-forward with correlated codewords.
//!
//! Each reception SNR `gamma_t(alpha) = sum_j (sum_i sqrt(alpha_ij g_it))^2`
//! is a sum of positively homogeneous, quasi-concave (hence concave)
//! functions of the split coefficients, so `min_t gamma_t` is concave and the
//! max-min problem is convex over the product of per-transmitter simplices.
//! It is solved in epigraph form
//!
//! ```text
//! maximize s  subject to  gamma_t(alpha) >= s,  alpha >= 0,  sum_j alpha_ij <= 1
//! ```
//!
//! with a log-barrier interior-point method (damped Newton centering, barrier
//! weight shrunk geometrically). With exact centering the optimality gap in
//! `s` is at most `(number of barrier terms) * weight`, which drives the stop
//! rule.

use nalgebra::{DMatrix, DVector};

use crate::network::Network;
use crate::rate::{awgn_rate, pair_count, PowerSplit, Route};

const MAX_NEWTON_STEPS: usize = 20_000;
const MAX_CENTERING_STEPS: usize = 200;
const WEIGHT_SHRINK: f64 = 0.1;
const ARMIJO: f64 = 0.25;

pub(crate) struct SplitOutcome {
    pub splits: PowerSplit,
    pub converged: bool,
    pub newton_steps: usize,
}

/// Channel coefficients for one route, noise-normalized and scaled so the
/// starting point has unit minimum SNR.
struct Problem {
    len: usize,
    pairs: usize,
    /// `gain[i][t]` for route positions, 1-based; `P_{m_i m_t} / (N_{m_t} * scale)`.
    gain: Vec<f64>,
    /// Multiply a scaled SNR by this to get the true SNR.
    scale: f64,
    /// `(i, j)` for each coefficient index.
    coords: Vec<(usize, usize)>,
}

impl Problem {
    fn new(net: &Network, route: &Route) -> Self {
        let len = route.len();
        let mut gain = vec![0.0; (len + 1) * (len + 1)];
        for i in 1..len {
            for t in i + 1..=len {
                let rx = route.at(t);
                gain[i * (len + 1) + t] = net.power(route.at(i), rx) / net.noise(rx);
            }
        }
        let mut coords = Vec::with_capacity(pair_count(len));
        for i in 1..len {
            for j in i + 1..=len {
                coords.push((i, j));
            }
        }
        let mut p = Self {
            len,
            pairs: pair_count(len),
            gain,
            scale: 1.0,
            coords,
        };
        let min_snr = p.min_snr(&p.start());
        p.scale = min_snr;
        for g in &mut p.gain {
            *g /= min_snr;
        }
        p
    }

    #[inline]
    fn g(&self, i: usize, t: usize) -> f64 {
        self.gain[i * (self.len + 1) + t]
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.len - (i - 1) * i / 2 + (j - i - 1)
    }

    /// Strictly interior start: every transmitter spreads evenly, keeping
    /// one share in reserve.
    fn start(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&(i, _)| 1.0 / (self.len - i + 1) as f64)
            .collect()
    }

    fn snr(&self, alpha: &[f64], t: usize) -> f64 {
        let mut total = 0.0;
        for j in 2..=t {
            let amp: f64 = (1..j).map(|i| (alpha[self.idx(i, j)] * self.g(i, t)).sqrt()).sum();
            total += amp * amp;
        }
        total
    }

    fn min_snr(&self, alpha: &[f64]) -> f64 {
        (2..=self.len)
            .map(|t| self.snr(alpha, t))
            .fold(f64::INFINITY, f64::min)
    }

    fn row_slack(&self, alpha: &[f64], i: usize) -> f64 {
        1.0 - (i + 1..=self.len).map(|j| alpha[self.idx(i, j)]).sum::<f64>()
    }

    fn dim(&self) -> usize {
        self.pairs + 1
    }

    /// Barrier objective `s + w * (sum log slacks)`; `None` outside the
    /// domain.
    fn objective(&self, x: &[f64], weight: f64) -> Option<f64> {
        let (alpha, s) = (&x[..self.pairs], x[self.pairs]);
        let mut barrier = 0.0;
        for &a in alpha {
            if a <= 0.0 {
                return None;
            }
            barrier += a.ln();
        }
        for i in 1..self.len {
            let r = self.row_slack(alpha, i);
            if r <= 0.0 {
                return None;
            }
            barrier += r.ln();
        }
        for t in 2..=self.len {
            let h = self.snr(alpha, t) - s;
            if h <= 0.0 {
                return None;
            }
            barrier += h.ln();
        }
        Some(s + weight * barrier)
    }

    /// Gradient and Hessian of the barrier objective at an interior point.
    fn derivatives(&self, x: &[f64], weight: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let sidx = self.pairs;
        let alpha = &x[..self.pairs];
        let s = x[sidx];
        let mut grad = DVector::<f64>::zeros(n);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        grad[sidx] = 1.0;

        let sqrt_alpha: Vec<f64> = alpha.iter().map(|a| a.sqrt()).collect();
        let mut g_snr = vec![0.0; n];
        let mut h_snr = DMatrix::<f64>::zeros(self.pairs, self.pairs);
        for t in 2..=self.len {
            g_snr.iter_mut().for_each(|v| *v = 0.0);
            h_snr.fill(0.0);
            let mut value = 0.0;
            for j in 2..=t {
                let amp: f64 = (1..j)
                    .map(|i| sqrt_alpha[self.idx(i, j)] * self.g(i, t).sqrt())
                    .sum();
                value += amp * amp;
                for i in 1..j {
                    let a = self.idx(i, j);
                    let root_g = self.g(i, t).sqrt();
                    // d(amp^2)/d(alpha) = amp * sqrt(g / alpha)
                    let d_amp = 0.5 * root_g / sqrt_alpha[a];
                    g_snr[a] = 2.0 * amp * d_amp;
                    for k in 1..j {
                        let b = self.idx(k, j);
                        let d_amp_k = 0.5 * self.g(k, t).sqrt() / sqrt_alpha[b];
                        h_snr[(a, b)] += 2.0 * d_amp * d_amp_k;
                    }
                    h_snr[(a, a)] -= 0.5 * amp * root_g / (alpha[a] * sqrt_alpha[a]);
                }
            }
            g_snr[sidx] = -1.0;
            let h = value - s;
            for a in 0..n {
                grad[a] += weight * g_snr[a] / h;
            }
            let w1 = weight / h;
            let w2 = weight / (h * h);
            for a in 0..n {
                for b in 0..n {
                    let mut v = -w2 * g_snr[a] * g_snr[b];
                    if a < self.pairs && b < self.pairs {
                        v += w1 * h_snr[(a, b)];
                    }
                    hess[(a, b)] += v;
                }
            }
        }
        for (a, &al) in alpha.iter().enumerate() {
            grad[a] += weight / al;
            hess[(a, a)] -= weight / (al * al);
        }
        for i in 1..self.len {
            let r = self.row_slack(alpha, i);
            let row: Vec<usize> = (i + 1..=self.len).map(|j| self.idx(i, j)).collect();
            for &a in &row {
                grad[a] -= weight / r;
                for &b in &row {
                    hess[(a, b)] -= weight / (r * r);
                }
            }
        }
        (grad, hess)
    }

    fn barrier_terms(&self) -> usize {
        self.pairs + 2 * (self.len - 1)
    }
}

/// Solves `(-hess) * step = grad`, regularizing if the factorization fails.
fn newton_step(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -hess;
    if let Some(ch) = neg.clone().cholesky() {
        return Some(ch.solve(grad));
    }
    let scale = neg.diagonal().amax().max(1e-300);
    let mut shift = scale * 1e-14;
    for _ in 0..40 {
        let mut m = neg.clone();
        for k in 0..m.nrows() {
            m[(k, k)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(grad));
        }
        shift *= 10.0;
    }
    None
}

/// Runs damped Newton until the barrier objective is centered. Returns the
/// number of steps, or `None` if numerics broke down.
fn center(p: &Problem, x: &mut Vec<f64>, weight: f64, budget: usize) -> Option<usize> {
    let mut steps = 0;
    let mut fx = p.objective(x, weight)?;
    while steps < MAX_CENTERING_STEPS.min(budget) {
        let (grad, hess) = p.derivatives(x, weight);
        let dir = newton_step(&grad, &hess)?;
        let decrement = grad.dot(&dir);
        steps += 1;
        if !decrement.is_finite() {
            return None;
        }
        // decrement = lambda^2 * weight for the unscaled barrier problem
        if decrement <= 1e-10 * weight {
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(ft) = p.objective(&trial, weight) {
                if ft >= fx + ARMIJO * step * decrement {
                    *x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No representable ascent left at this weight.
            break;
        }
    }
    Some(steps)
}

/// Max-min split for `route`, within `tol` (in rate) of the optimum.
pub(crate) fn maximize_min_snr(net: &Network, route: &Route, tol: f64) -> SplitOutcome {
    let len = route.len();
    if len == 2 {
        return SplitOutcome {
            splits: PowerSplit::independent(2),
            converged: true,
            newton_steps: 0,
        };
    }
    let p = Problem::new(net, route);
    let mut x = p.start();
    // Start with every SNR at >= 1 (scaled); s = 1/2 is strictly feasible.
    x.push(0.5);
    let mut weight = 1.0;
    let mut steps = 0;
    let mut converged = false;
    let m = p.barrier_terms() as f64;
    while let Some(used) = center(&p, &mut x, weight, MAX_NEWTON_STEPS - steps) {
        steps += used;
        // The optimum is at most s + m * weight; the current split achieves
        // its own minimum SNR.
        let upper = p.scale * (x[p.pairs] + m * weight).max(0.0);
        let achieved = p.scale * p.min_snr(&x[..p.pairs]);
        if awgn_rate(upper) - awgn_rate(achieved) <= 0.1 * tol {
            converged = true;
            break;
        }
        if steps >= MAX_NEWTON_STEPS {
            break;
        }
        weight *= WEIGHT_SHRINK;
    }
    SplitOutcome {
        splits: full_power(&p, &x[..p.pairs]),
        converged,
        newton_steps: steps,
    }
}

/// Scales each transmitter's split up to its full power budget. SNRs are
/// non-decreasing in every coefficient, so this never lowers a rate.
fn full_power(p: &Problem, alpha: &[f64]) -> PowerSplit {
    let mut out = alpha.to_vec();
    for i in 1..p.len {
        let row: Vec<usize> = (i + 1..=p.len).map(|j| p.idx(i, j)).collect();
        let sum: f64 = row.iter().map(|&k| out[k]).sum();
        if sum > 0.0 {
            for &k in &row {
                out[k] /= sum;
            }
        } else {
            out[p.idx(i, i + 1)] = 1.0;
        }
    }
    PowerSplit::from_raw(p.len, out)
}

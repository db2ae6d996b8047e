//! Exact transient analysis on a closed segment `{0, .., n-1}` by
//! uniformization over the `2^n` infection states.
//!
//! State `s` has site `x` infected iff bit `x` of `s` is set. State 0 is
//! absorbing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::Params;

/// Largest segment handled.
pub const MAX_SITES: usize = 14;

/// Poisson truncation error allowed in uniformization.
pub const TRUNCATION_ERROR: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SegmentModel {
    pub n: usize,
    pub params: Params,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

/// Builds the generator of the process restricted to `[0, n-1]`, with
/// every infection leaving the segment suppressed.
pub fn build_generator(n: usize, params: Params) -> Result<SegmentModel> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidParams("segment needs at least one site".into()));
    }
    if n > MAX_SITES {
        return Err(Error::TooLarge { n, cap: MAX_SITES });
    }
    let states = 1usize << n;
    let eps = params.boost_rate();
    let mut offsets = Vec::with_capacity(states + 1);
    let mut targets = Vec::new();
    let mut rates = Vec::new();
    let mut exit = Vec::with_capacity(states);
    offsets.push(0);
    for s in 0..states {
        let mut out = 0.0;
        if s != 0 {
            let left = s.trailing_zeros() as usize;
            let right = usize::BITS as usize - 1 - s.leading_zeros() as usize;
            for x in 0..n {
                let bit = 1usize << x;
                if s & bit != 0 {
                    let r = params.recovery_rate;
                    targets.push((s & !bit) as u32);
                    rates.push(r);
                    out += r;
                    continue;
                }
                let mut r = 0.0;
                if x > 0 && s & (bit >> 1) != 0 {
                    r += params.lambda_i;
                }
                if x + 1 < n && s & (bit << 1) != 0 {
                    r += params.lambda_i;
                }
                if params.variant.boosts_right() && x == right + 1 {
                    r += eps;
                }
                if params.variant.boosts_left() && left > 0 && x == left - 1 {
                    r += eps;
                }
                if r > 0.0 {
                    targets.push((s | bit) as u32);
                    rates.push(r);
                    out += r;
                }
            }
        }
        exit.push(out);
        offsets.push(targets.len());
    }
    Ok(SegmentModel {
        n,
        params,
        offsets,
        targets,
        rates,
        exit,
    })
}

impl SegmentModel {
    pub fn state_count(&self) -> usize {
        1 << self.n
    }

    /// Off-diagonal transitions `(target, rate)` out of `state`.
    pub fn transitions(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[state]..self.offsets[state + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.rates[r])
            .map(|(&t, &q)| (t as usize, q))
    }

    /// Total exit rate of `state`, i.e. minus the diagonal entry.
    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state]
    }

    /// Generator row of `state` as a dense vector.
    pub fn row(&self, state: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.state_count()];
        for (t, q) in self.transitions(state) {
            row[t] += q;
        }
        row[state] = -self.exit[state];
        row
    }

    /// Off-diagonal entries of the row summed in storage order, plus the
    /// diagonal.
    pub fn row_sum(&self, state: usize) -> f64 {
        self.transitions(state).map(|(_, q)| q).sum::<f64>() - self.exit[state]
    }

    fn uniformization_rate(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max).max(1.0)
    }

    /// `P(tau <= t)` from every initial state.
    pub fn extinction_probability_by(&self, t: f64) -> Vec<f64> {
        assert!(t >= 0.0, "negative time {t}");
        let m = self.state_count();
        let mut v = vec![0.0; m];
        v[0] = 1.0;
        self.backward(v, t)
    }

    /// `u(s) = E_s[f(X_t)]` for every `s`.
    pub fn backward(&self, f: Vec<f64>, t: f64) -> Vec<f64> {
        let lam = self.uniformization_rate();
        let mut v = f;
        let mut next = vec![0.0; v.len()];
        let mut acc = vec![0.0; v.len()];
        for w in poisson_weights(lam * t) {
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
            for s in 0..v.len() {
                let mut y = (1.0 - self.exit[s] / lam) * v[s];
                for (j, q) in self.transitions(s) {
                    y += q / lam * v[j];
                }
                next[s] = y;
            }
            std::mem::swap(&mut v, &mut next);
        }
        acc
    }

    /// Distribution at time `t` started from `p0`.
    pub fn forward(&self, p0: &[f64], t: f64) -> Vec<f64> {
        let lam = self.uniformization_rate();
        let mut p = p0.to_vec();
        let mut next = vec![0.0; p.len()];
        let mut acc = vec![0.0; p.len()];
        for w in poisson_weights(lam * t) {
            for (a, x) in acc.iter_mut().zip(&p) {
                *a += w * x;
            }
            for s in 0..p.len() {
                next[s] = (1.0 - self.exit[s] / lam) * p[s];
            }
            for s in 0..p.len() {
                if p[s] != 0.0 {
                    for (j, q) in self.transitions(s) {
                        next[j] += p[s] * q / lam;
                    }
                }
            }
            std::mem::swap(&mut p, &mut next);
        }
        acc
    }

    /// Distribution at time `t` started from `state`.
    pub fn distribution_at(&self, state: usize, t: f64) -> Vec<f64> {
        let mut p0 = vec![0.0; self.state_count()];
        p0[state] = 1.0;
        self.forward(&p0, t)
    }

    /// Expected extinction time from every state (0 for the empty state).
    pub fn expected_extinction_time(&self) -> Result<Vec<f64>> {
        if self.n <= 10 {
            self.expected_time_dense()
        } else {
            self.expected_time_iterative()
        }
    }

    fn expected_time_dense(&self) -> Result<Vec<f64>> {
        let m = self.state_count() - 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for s in 1..=m {
            a[(s - 1, s - 1)] = self.exit[s];
            for (j, q) in self.transitions(s) {
                if j != 0 {
                    a[(s - 1, j - 1)] -= q;
                }
            }
        }
        let b = DVector::from_element(m, 1.0);
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SolveFailure("singular transient block".into()))?;
        if x.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::SolveFailure("non-positive expected time".into()));
        }
        let mut out = vec![0.0];
        out.extend(x.iter());
        Ok(out)
    }

    fn expected_time_iterative(&self) -> Result<Vec<f64>> {
        let m = self.state_count();
        let mut x = vec![0.0; m];
        // Sweeping from large to small states follows the drift towards 0.
        for _ in 0..200_000 {
            let mut change: f64 = 0.0;
            for s in (1..m).rev() {
                let mut y = 1.0;
                for (j, q) in self.transitions(s) {
                    y += q * x[j];
                }
                let y = y / self.exit[s];
                change = change.max((y - x[s]).abs() / y);
                x[s] = y;
            }
            if change < 1e-13 {
                return Ok(x);
            }
        }
        Err(Error::SolveFailure(
            "Gauss-Seidel did not converge within 200000 sweeps".into(),
        ))
    }
}

/// Poisson(`mean`) probabilities from 0 up to the point where the
/// remaining mass is below `TRUNCATION_ERROR`.
pub fn poisson_weights(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let mut out = Vec::new();
    let mut total = 0.0;
    let ln_mean = mean.ln();
    let mut log_w = -mean;
    let mut k = 0u64;
    loop {
        let w = log_w.exp();
        out.push(w);
        total += w;
        k += 1;
        if k as f64 > mean && 1.0 - total < TRUNCATION_ERROR * 0.1 {
            break;
        }
        log_w += ln_mean - (k as f64).ln();
        if k > 10 * (mean as u64 + 100) {
            break;
        }
    }
    out
}

/// Bit mask of a set of sites.
pub fn mask_of(sites: &[i64]) -> usize {
    sites.iter().fold(0, |m, &x| m | 1 << x)
}

/// Bit string with site 0 first.
pub fn bits_string(state: usize, n: usize) -> String {
    (0..n)
        .map(|x| if state >> x & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// CSV rows `initial_state_bits,t,extinction_prob` for the given initial
/// states (all nonempty states when `states` is empty).
pub fn extinction_csv(model: &SegmentModel, times: &[f64], states: &[usize]) -> String {
    let all: Vec<usize> = if states.is_empty() {
        (1..model.state_count()).collect()
    } else {
        states.to_vec()
    };
    let mut out = String::from("initial_state_bits,t,extinction_prob\n");
    for &t in times {
        let p = model.extinction_probability_by(t);
        for &s in &all {
            out.push_str(&format!("{},{t},{:.12}\n", bits_string(s, model.n), p[s]));
        }
    }
    out
}

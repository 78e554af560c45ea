//! Warm-up adaptation: dual-averaging step size and windowed diagonal
//! mass-matrix estimation.

use rand::Rng;

use super::nuts::{sample_momentum, ChainState};
use super::LogDensity;
use crate::{Error, Result};

/// Nesterov dual averaging of `ln(step_size)` towards a target acceptance statistic.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target_accept: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
}

impl DualAveraging {
    pub fn new(target_accept: f64, initial_step: f64) -> Self {
        let mut da = Self {
            target_accept,
            gamma: 0.1,
            t0: 10.0,
            kappa: 0.75,
            mu: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
            counter: 0.0,
        };
        da.restart(initial_step);
        da
    }

    pub fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.s_bar = 0.0;
        self.x_bar = 0.0;
        self.counter = 0.0;
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target_accept - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Averaged step size to freeze after warm-up.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Running per-coordinate variance (Welford).
#[derive(Debug, Clone)]
pub struct RunningVariance {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Sample variance shrunk towards 1e-3, as an inverse mass diagonal.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|&s| {
                let var = s / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Warm-up phases: a fast initial buffer, doubling slow windows that feed the
/// mass-matrix estimate, and a terminal buffer for the final step size.
#[derive(Debug, Clone)]
pub struct WindowSchedule {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window_end: usize,
}

impl WindowSchedule {
    pub fn new(n_warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base_window) = (75, 50, 25);
        if init_buffer + base_window + term_buffer > n_warmup {
            init_buffer = (0.15 * n_warmup as f64) as usize;
            term_buffer = (0.1 * n_warmup as f64) as usize;
            base_window = n_warmup - (init_buffer + term_buffer);
        }
        Self {
            n_warmup,
            init_buffer,
            term_buffer,
            window_size: base_window,
            next_window_end: init_buffer + base_window - 1,
        }
    }

    /// Whether iteration `i` (0-based) contributes to the variance estimate.
    pub fn in_window(&self, i: usize) -> bool {
        i >= self.init_buffer && i < self.n_warmup - self.term_buffer
    }

    /// Whether a slow window closes after iteration `i`.
    pub fn window_ends(&self, i: usize) -> bool {
        i == self.next_window_end && i + 1 != self.n_warmup
    }

    fn last_window_end(&self) -> usize {
        self.n_warmup - self.term_buffer - 1
    }

    /// Schedules the next (doubled) window after one closes at iteration `i`.
    pub fn advance(&mut self, i: usize) {
        if self.next_window_end == self.last_window_end() {
            return;
        }
        self.window_size *= 2;
        self.next_window_end = i + self.window_size;
        if self.next_window_end != self.last_window_end() {
            let boundary = self.next_window_end + 2 * self.window_size;
            if boundary >= self.n_warmup - self.term_buffer {
                self.next_window_end = self.last_window_end();
            }
        }
    }
}

/// Doubles or halves `step_size` until a single leapfrog step from `state`
/// crosses an acceptance probability of 0.8.
pub fn find_reasonable_step_size<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &ChainState,
    inv_mass: &[f64],
    step_size: f64,
    rng: &mut R,
) -> Result<f64> {
    let threshold = 0.8f64.ln();
    let delta_h = |eps: f64, rng: &mut R| -> f64 {
        let p = sample_momentum(inv_mass, rng);
        let kinetic = |p: &[f64]| 0.5 * p.iter().zip(inv_mass).map(|(x, m)| m * x * x).sum::<f64>();
        let h0 = -state.logp + kinetic(&p);
        let mut p1: Vec<f64> = p.iter().zip(&state.grad).map(|(p, g)| p + 0.5 * eps * g).collect();
        let q1: Vec<f64> = state
            .position
            .iter()
            .zip(&p1)
            .zip(inv_mass)
            .map(|((q, p), m)| q + eps * m * p)
            .collect();
        let mut grad = vec![0.0; q1.len()];
        let logp = target.logp_grad(&q1, &mut grad);
        if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return f64::NEG_INFINITY;
        }
        for (p, g) in p1.iter_mut().zip(&grad) {
            *p += 0.5 * eps * g;
        }
        let h = -logp + kinetic(&p1);
        if h.is_nan() {
            f64::NEG_INFINITY
        } else {
            h0 - h
        }
    };

    let mut eps = step_size;
    let direction = if delta_h(eps, rng) > threshold { 1 } else { -1 };
    for _ in 0..200 {
        let dh = delta_h(eps, rng);
        if direction == 1 && !(dh > threshold) {
            break;
        }
        if direction == -1 && !(dh < threshold) {
            break;
        }
        eps = if direction == 1 { 2.0 * eps } else { 0.5 * eps };
        if eps > 1e7 {
            return Err(Error::Adaptation("step size diverged; posterior may be improper".into()));
        }
        if eps < 1e-300 {
            return Err(Error::Adaptation("no acceptably small step size could be found".into()));
        }
    }
    Ok(eps)
}

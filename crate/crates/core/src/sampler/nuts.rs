//! One multinomial NUTS transition with a diagonal Euclidean metric.
//!
//! Trajectories double in a random direction until the generalized no-U-turn
//! criterion fails (checked on the merged tree and across the two halves of
//! every merge), the maximum depth is reached, or the energy error exceeds the
//! divergence threshold. Within a subtree states are drawn proportionally to
//! `exp(-H)`; at the top level the draw is biased towards the newest subtree.

use rand::Rng;
use rand_distr::StandardNormal;

use super::LogDensity;
use crate::special::log_add_exp;

/// Position of a chain with its cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl ChainState {
    /// Evaluates the target at `position`. Returns `None` when the log
    /// density or its gradient is not finite.
    pub fn new<T: LogDensity + ?Sized>(target: &T, position: Vec<f64>) -> Option<Self> {
        let mut grad = vec![0.0; position.len()];
        let logp = target.logp_grad(&position, &mut grad);
        if logp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Some(Self { position, logp, grad })
        } else {
            None
        }
    }
}

/// Per-iteration sampler statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    /// Hamiltonian at the selected state.
    pub energy: f64,
    pub step_size: f64,
}

/// Integration settings shared by every leapfrog step of one transition.
#[derive(Debug, Clone, Copy)]
pub struct NutsSettings {
    pub step_size: f64,
    pub max_tree_depth: usize,
    pub max_energy_error: f64,
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Subtree {
    log_sum_weight: f64,
    proposal: Point,
    p_beg: Vec<f64>,
    p_sharp_beg: Vec<f64>,
    p_end: Vec<f64>,
    p_sharp_end: Vec<f64>,
    rho: Vec<f64>,
}

struct Integrator<'a, T: ?Sized> {
    target: &'a T,
    inv_mass: &'a [f64],
    settings: NutsSettings,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_minus, rho) > 0.0 && dot(p_sharp_plus, rho) > 0.0
}

impl<T: LogDensity + ?Sized> Integrator<'_, T> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(self.inv_mass).map(|(pi, m)| m * pi * pi).sum::<f64>()
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.inv_mass).map(|(pi, m)| m * pi).collect()
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(self.inv_mass) {
            *q += eps * m * p;
        }
        z.logp = self.target.logp_grad(&z.q, &mut z.grad);
        if !z.logp.is_finite() || z.grad.iter().any(|g| !g.is_finite()) {
            z.logp = f64::NEG_INFINITY;
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    /// Extends the trajectory from `edge` by `2^depth` steps in `direction`.
    /// Returns `None` when the subtree diverged or made a U-turn.
    fn build_tree<R: Rng + ?Sized>(
        &mut self,
        edge: &mut Point,
        depth: usize,
        direction: f64,
        rng: &mut R,
    ) -> Option<Subtree> {
        if depth == 0 {
            self.leapfrog(edge, direction * self.settings.step_size);
            self.n_leapfrog += 1;
            let h = self.hamiltonian(edge);
            let log_weight = self.h0 - h;
            self.sum_metro_prob += if log_weight > 0.0 { 1.0 } else { log_weight.exp() };
            if h - self.h0 > self.settings.max_energy_error {
                self.divergent = true;
                return None;
            }
            let p_sharp = self.p_sharp(&edge.p);
            return Some(Subtree {
                log_sum_weight: log_weight,
                proposal: edge.clone(),
                p_beg: edge.p.clone(),
                p_sharp_beg: p_sharp.clone(),
                p_end: edge.p.clone(),
                p_sharp_end: p_sharp,
                rho: edge.p.clone(),
            });
        }
        let init = self.build_tree(edge, depth - 1, direction, rng)?;
        let last = self.build_tree(edge, depth - 1, direction, rng)?;

        let log_sum_weight = log_add_exp(init.log_sum_weight, last.log_sum_weight);
        let take_last = rng.random::<f64>() < (last.log_sum_weight - log_sum_weight).exp();
        let rho = add(&init.rho, &last.rho);
        let persist = no_u_turn(&init.p_sharp_beg, &last.p_sharp_end, &rho)
            && no_u_turn(&init.p_sharp_beg, &last.p_sharp_beg, &add(&init.rho, &last.p_beg))
            && no_u_turn(&init.p_sharp_end, &last.p_sharp_end, &add(&last.rho, &init.p_end));
        if !persist {
            return None;
        }
        Some(Subtree {
            log_sum_weight,
            proposal: if take_last { last.proposal } else { init.proposal },
            p_beg: init.p_beg,
            p_sharp_beg: init.p_sharp_beg,
            p_end: last.p_end,
            p_sharp_end: last.p_sharp_end,
            rho,
        })
    }
}

/// Draws a momentum `p ~ N(0, M)` for the diagonal metric with inverse mass `inv_mass`.
pub fn sample_momentum<R: Rng + ?Sized>(inv_mass: &[f64], rng: &mut R) -> Vec<f64> {
    inv_mass
        .iter()
        .map(|&m| {
            let z: f64 = rng.sample(StandardNormal);
            z / m.sqrt()
        })
        .collect()
}

/// Advances `state` by one NUTS transition.
///
/// On divergence the chain stays at its current position and the returned
/// statistics carry `divergent = true`.
pub fn nuts_transition<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &mut ChainState,
    inv_mass: &[f64],
    settings: NutsSettings,
    rng: &mut R,
) -> TransitionStats {
    let p0 = sample_momentum(inv_mass, rng);
    let z0 = Point { q: state.position.clone(), p: p0, grad: state.grad.clone(), logp: state.logp };
    let mut integ = Integrator {
        target,
        inv_mass,
        settings,
        h0: 0.0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };
    integ.h0 = integ.hamiltonian(&z0);

    let mut fwd_edge = z0.clone();
    let mut bck_edge = z0.clone();
    let mut p_fwd = z0.p.clone();
    let mut p_bck = z0.p.clone();
    let mut p_sharp_fwd = integ.p_sharp(&z0.p);
    let mut p_sharp_bck = p_sharp_fwd.clone();
    let mut rho = z0.p.clone();
    let mut sample = z0.clone();
    let mut log_sum_weight = 0.0;
    let mut depth = 0;

    while depth < settings.max_tree_depth {
        let forward = rng.random::<f64>() > 0.5;
        let sub = if forward {
            integ.build_tree(&mut fwd_edge, depth, 1.0, rng)
        } else {
            integ.build_tree(&mut bck_edge, depth, -1.0, rng)
        };
        let Some(sub) = sub else { break };
        depth += 1;

        if sub.log_sum_weight > log_sum_weight
            || rng.random::<f64>() < (sub.log_sum_weight - log_sum_weight).exp()
        {
            sample = sub.proposal.clone();
        }
        log_sum_weight = log_add_exp(log_sum_weight, sub.log_sum_weight);

        // Orient the old tree along the direction of travel: its "beginning" is
        // the far end, its "end" touches the new subtree.
        let (old_sharp_beg, old_end, old_sharp_end) = if forward {
            (&p_sharp_bck, &p_fwd, &p_sharp_fwd)
        } else {
            (&p_sharp_fwd, &p_bck, &p_sharp_bck)
        };
        let rho_total = add(&rho, &sub.rho);
        let persist = no_u_turn(old_sharp_beg, &sub.p_sharp_end, &rho_total)
            && no_u_turn(old_sharp_beg, &sub.p_sharp_beg, &add(&rho, &sub.p_beg))
            && no_u_turn(old_sharp_end, &sub.p_sharp_end, &add(&sub.rho, old_end));
        rho = rho_total;
        if forward {
            p_fwd = sub.p_end;
            p_sharp_fwd = sub.p_sharp_end;
        } else {
            p_bck = sub.p_end;
            p_sharp_bck = sub.p_sharp_end;
        }
        if !persist {
            break;
        }
    }

    let accept_stat = if integ.n_leapfrog > 0 {
        integ.sum_metro_prob / integ.n_leapfrog as f64
    } else {
        0.0
    };
    let divergent = integ.divergent;
    let energy = if divergent {
        integ.h0
    } else {
        let h = integ.hamiltonian(&sample);
        state.position = sample.q;
        state.logp = sample.logp;
        state.grad = sample.grad;
        h
    };
    TransitionStats {
        accept_stat,
        tree_depth: depth,
        n_leapfrog: integ.n_leapfrog,
        divergent,
        energy,
        step_size: settings.step_size,
    }
}

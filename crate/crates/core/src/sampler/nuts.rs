//! Multinomial No-U-Turn sampler with a diagonal metric.
//!
//! Trajectories are built by repeated doubling in a random direction; states
//! are drawn from the trajectory with weights `exp(-H)`, biased towards the
//! newest subtree. The generalised U-turn criterion is checked across each
//! merged subtree and across the boundaries between subtrees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapt::{DualAveraging, WindowedMetric};
use super::diagnostics::Diagnostics;
use super::{LogDensity, SamplerConfig};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;

const INIT_RADIUS: f64 = 2.0;
const INIT_ATTEMPTS: usize = 100;

/// Post-warm-up draws from every chain plus per-chain sampler statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSet {
    pub dim: usize,
    pub iters: usize,
    /// One row-major `iters x dim` block per chain.
    pub draws: Vec<Vec<f64>>,
    pub divergence_count: Vec<usize>,
    pub treedepth_saturation_count: Vec<usize>,
    pub step_size: Vec<f64>,
    pub acceptance_mean: Vec<f64>,
}

impl ChainSet {
    pub fn chains(&self) -> usize {
        self.draws.len()
    }

    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        &self.draws[chain][iter * self.dim..(iter + 1) * self.dim]
    }

    /// Draws of coordinate `param`, one vector per chain.
    pub fn param_chains(&self, param: usize) -> Vec<Vec<f64>> {
        self.draws.iter().map(|c| c.iter().skip(param).step_by(self.dim).copied().collect()).collect()
    }

    /// Draws of coordinate `param` pooled across chains.
    pub fn pooled(&self, param: usize) -> Vec<f64> {
        self.param_chains(param).concat()
    }

    pub fn divergences_total(&self) -> usize {
        self.divergence_count.iter().sum()
    }

    /// Applies `f` to every draw, e.g. to move to the constrained scale.
    pub fn map_draws<F>(&self, out_dim: usize, mut f: F) -> Result<ChainSet>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut draws = Vec::with_capacity(self.chains());
        for chain in &self.draws {
            let mut out = Vec::with_capacity(self.iters * out_dim);
            for row in chain.chunks_exact(self.dim) {
                let mapped = f(row)?;
                debug_assert_eq!(mapped.len(), out_dim);
                out.extend(mapped);
            }
            draws.push(out);
        }
        Ok(ChainSet { dim: out_dim, draws, ..self.clone() })
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics::compute(self)
    }
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

impl Point {
    fn kinetic(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        let h = -self.logp + self.kinetic(inv_metric);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn sharp(&self, inv_metric: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
    }
}

struct Chain<'a, T: LogDensity> {
    target: &'a T,
    rng: ChaCha8Rng,
    inv_metric: Vec<f64>,
    step_size: f64,
    max_depth: usize,
    max_delta_h: f64,
    z: Point,
}

struct Transition {
    accept_stat: f64,
    depth: usize,
    divergent: bool,
}

/// Scratch state shared by one trajectory's recursion.
struct Build {
    h0: f64,
    step: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl<'a, T: LogDensity> Chain<'a, T> {
    fn new(target: &'a T, rng: ChaCha8Rng, q: Vec<f64>, cfg: &SamplerConfig) -> Self {
        let dim = q.len();
        let mut grad = vec![0.0; dim];
        let logp = target.log_density_and_grad(&q, &mut grad);
        Self {
            target,
            rng,
            inv_metric: vec![1.0; dim],
            step_size: 1.0,
            max_depth: cfg.max_tree_depth,
            max_delta_h: cfg.divergence_energy_threshold,
            z: Point { q, p: vec![0.0; dim], grad, logp },
        }
    }

    fn sample_momentum(&mut self) {
        for (p, m) in self.z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = self.rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut Point, step: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * step * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += step * m * p;
        }
        z.logp = self.target.log_density_and_grad(&z.q, &mut z.grad);
        if z.logp.is_finite() {
            for (p, g) in z.p.iter_mut().zip(&z.grad) {
                *p += 0.5 * step * g;
            }
        }
    }

    /// Step-size heuristic: double or halve until a single leapfrog step
    /// crosses an acceptance probability of 0.8.
    fn init_step_size(&mut self) {
        if self.step_size == 0.0 || self.step_size > 1e7 || !self.step_size.is_finite() {
            return;
        }
        let z_init = self.z.clone();
        let probe = |chain: &mut Self| -> f64 {
            chain.z = z_init.clone();
            chain.sample_momentum();
            let h0 = chain.z.hamiltonian(&chain.inv_metric);
            let mut z = chain.z.clone();
            chain.leapfrog(&mut z, chain.step_size);
            h0 - z.hamiltonian(&chain.inv_metric)
        };
        let threshold = 0.8f64.ln();
        let up = probe(self) > threshold;
        loop {
            let delta_h = probe(self);
            if (up && !(delta_h > threshold)) || (!up && !(delta_h < threshold)) {
                break;
            }
            self.step_size = if up { 2.0 * self.step_size } else { 0.5 * self.step_size };
            if self.step_size > 1e7 || self.step_size < 1e-12 {
                break;
            }
        }
        self.z = z_init;
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        b: &mut Build,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut Vec<f64>,
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, b.step);
            b.n_leapfrog += 1;
            let h = z.hamiltonian(&self.inv_metric);
            if h - b.h0 > self.max_delta_h {
                b.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, b.h0 - h);
            b.sum_metro_prob += if b.h0 - h > 0.0 { 1.0 } else { (b.h0 - h).exp() };
            *z_propose = z.clone();
            *p_sharp_beg = z.sharp(&self.inv_metric);
            *p_sharp_end = p_sharp_beg.clone();
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            *p_beg = z.p.clone();
            *p_end = p_beg.clone();
            return !b.divergent;
        }

        let dim = z.q.len();
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        if !self.build_tree(
            b,
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            &mut log_sum_weight_init,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        if !self.build_tree(
            b,
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            &mut log_sum_weight_final,
        ) {
            return false;
        }

        let log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (log_sum_weight_final - log_sum_weight_subtree).exp();
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &add(&rho_init, &p_final_beg));
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &add(&rho_final, &p_init_end));
        persist
    }

    fn transition(&mut self) -> Transition {
        self.sample_momentum();
        let dim = self.z.q.len();
        let inv = self.inv_metric.clone();
        let mut z_fwd = self.z.clone();
        let mut z_bck = self.z.clone();
        let mut z_sample = self.z.clone();
        let mut z_propose = self.z.clone();

        let p0 = self.z.p.clone();
        let sharp0 = self.z.sharp(&inv);
        let (mut p_fwd_fwd, mut p_sharp_fwd_fwd) = (p0.clone(), sharp0.clone());
        let (mut p_fwd_bck, mut p_sharp_fwd_bck) = (p0.clone(), sharp0.clone());
        let (mut p_bck_fwd, mut p_sharp_bck_fwd) = (p0.clone(), sharp0.clone());
        let (mut p_bck_bck, mut p_sharp_bck_bck) = (p0.clone(), sharp0);
        let mut rho = p0;

        let mut log_sum_weight = 0.0;
        let mut b = Build {
            h0: self.z.hamiltonian(&inv),
            step: self.step_size,
            n_leapfrog: 0,
            sum_metro_prob: 0.0,
            divergent: false,
        };
        let mut depth = 0;

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut log_sum_weight_subtree = f64::NEG_INFINITY;
            let valid;

            if self.rng.random::<f64>() > 0.5 {
                let mut z = z_fwd.clone();
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                p_sharp_bck_fwd.clone_from(&p_sharp_fwd_bck);
                b.step = self.step_size.abs();
                valid = self.build_tree(
                    &mut b,
                    depth,
                    &mut z,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    &mut log_sum_weight_subtree,
                );
                z_fwd = z;
            } else {
                let mut z = z_bck.clone();
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                p_sharp_fwd_bck.clone_from(&p_sharp_bck_fwd);
                b.step = -self.step_size.abs();
                valid = self.build_tree(
                    &mut b,
                    depth,
                    &mut z,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    &mut log_sum_weight_subtree,
                );
                z_bck = z;
            }

            if !valid {
                break;
            }
            depth += 1;

            if log_sum_weight_subtree > log_sum_weight {
                z_sample = z_propose.clone();
            } else {
                let accept = (log_sum_weight_subtree - log_sum_weight).exp();
                if self.rng.random::<f64>() < accept {
                    z_sample = z_propose.clone();
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

            rho = add(&rho_bck, &rho_fwd);
            let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &add(&rho_bck, &p_fwd_bck));
            persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
            if !persist {
                break;
            }
        }

        self.z = z_sample;
        let accept_stat = if b.n_leapfrog > 0 { b.sum_metro_prob / b.n_leapfrog as f64 } else { 0.0 };
        Transition { accept_stat, depth, divergent: b.divergent }
    }
}

struct ChainOutput {
    draws: Vec<f64>,
    divergences: usize,
    saturations: usize,
    step_size: f64,
    acceptance_mean: f64,
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initial_point<T: LogDensity>(target: &T, rng: &mut ChaCha8Rng, supplied: Option<&[f64]>) -> Result<Vec<f64>> {
    let dim = target.dim();
    let mut grad = vec![0.0; dim];
    if let Some(q) = supplied {
        if q.len() != dim {
            return Err(Error::Sampler(format!("initial point has {} coordinates, target has {dim}", q.len())));
        }
        if target.log_density_and_grad(q, &mut grad).is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(q.to_vec());
        }
    }
    for _ in 0..INIT_ATTEMPTS {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-INIT_RADIUS..INIT_RADIUS)).collect();
        if target.log_density_and_grad(&q, &mut grad).is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(q);
        }
    }
    Err(Error::Sampler(format!("log-density non-finite at {INIT_ATTEMPTS} initial points")))
}

fn run_chain<T: LogDensity>(target: &T, cfg: &SamplerConfig, chain: usize, init: Option<&[f64]>) -> Result<ChainOutput> {
    let mut rng = chain_rng(cfg.seed, chain);
    let q = initial_point(target, &mut rng, init)?;
    let dim = q.len();
    let mut ch = Chain::new(target, rng, q, cfg);
    ch.init_step_size();

    let mut step_adapt = DualAveraging::new(cfg.target_accept, ch.step_size);
    let mut metric_adapt = WindowedMetric::new(dim, cfg.warmup_iters);
    for _ in 0..cfg.warmup_iters {
        let t = ch.transition();
        ch.step_size = step_adapt.learn(t.accept_stat);
        let mut inv = std::mem::take(&mut ch.inv_metric);
        let updated = metric_adapt.learn(&ch.z.q, &mut inv);
        ch.inv_metric = inv;
        if updated {
            ch.init_step_size();
            step_adapt.restart(ch.step_size);
        }
    }
    ch.step_size = step_adapt.final_step_size();

    let mut out = ChainOutput {
        draws: Vec::with_capacity(cfg.sampling_iters * dim),
        divergences: 0,
        saturations: 0,
        step_size: ch.step_size,
        acceptance_mean: 0.0,
    };
    for _ in 0..cfg.sampling_iters {
        let t = ch.transition();
        out.divergences += t.divergent as usize;
        out.saturations += (t.depth >= cfg.max_tree_depth) as usize;
        out.acceptance_mean += t.accept_stat;
        out.draws.extend_from_slice(&ch.z.q);
    }
    out.acceptance_mean /= cfg.sampling_iters as f64;
    Ok(out)
}

/// Runs `config.chains` independent chains in parallel.
///
/// Chain `c` draws from its own stream of a ChaCha generator keyed by
/// `config.seed`, so output does not depend on thread scheduling. Without
/// supplied initial points each chain starts from a uniform(-2, 2) draw.
/// Divergent transitions are counted; their states are kept.
pub fn nuts_run<T: LogDensity>(target: &T, inits: Option<&[Vec<f64>]>, config: &SamplerConfig) -> Result<ChainSet> {
    config.validate()?;
    if let Some(inits) = inits {
        if inits.len() != config.chains {
            return Err(Error::Sampler(format!("{} initial points for {} chains", inits.len(), config.chains)));
        }
    }
    let outputs: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c, inits.map(|i| i[c].as_slice())))
        .collect::<Result<_>>()?;
    Ok(ChainSet {
        dim: target.dim(),
        iters: config.sampling_iters,
        divergence_count: outputs.iter().map(|o| o.divergences).collect(),
        treedepth_saturation_count: outputs.iter().map(|o| o.saturations).collect(),
        step_size: outputs.iter().map(|o| o.step_size).collect(),
        acceptance_mean: outputs.iter().map(|o| o.acceptance_mean).collect(),
        draws: outputs.into_iter().map(|o| o.draws).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct StdNormal(usize);

    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            for (g, xi) in grad.iter_mut().zip(x) {
                *g = -xi;
            }
            -0.5 * x.iter().map(|v| v * v).sum::<f64>()
        }
    }

    struct Nowhere;

    impl LogDensity for Nowhere {
        fn dim(&self) -> usize {
            2
        }
        fn log_density_and_grad(&self, _: &[f64], _: &mut [f64]) -> f64 {
            f64::NEG_INFINITY
        }
    }

    /// Finite only for x > 0: a cliff that forces divergent transitions.
    struct HalfLine;

    impl LogDensity for HalfLine {
        fn dim(&self) -> usize {
            1
        }
        fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            if x[0] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            grad[0] = -1.0;
            -x[0]
        }
    }

    fn small_config(seed: u64) -> SamplerConfig {
        SamplerConfig { chains: 2, warmup_iters: 300, sampling_iters: 300, seed, ..SamplerConfig::default() }
    }

    #[test]
    fn shape_and_determinism() {
        let cfg = small_config(42);
        let a = nuts_run(&StdNormal(3), None, &cfg).unwrap();
        let b = nuts_run(&StdNormal(3), None, &cfg).unwrap();
        assert_eq!(a.draws.len(), 2);
        assert_eq!(a.draws[0].len(), 300 * 3);
        assert_eq!(a, b);
        let c = nuts_run(&StdNormal(3), None, &small_config(43)).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn chains_use_distinct_streams() {
        let a = nuts_run(&StdNormal(1), None, &small_config(5)).unwrap();
        assert_ne!(a.draws[0], a.draws[1]);
    }

    #[test]
    fn fails_fast_without_support() {
        let err = nuts_run(&Nowhere, None, &small_config(1)).unwrap_err();
        assert!(matches!(err, Error::Sampler(_)));
    }

    #[test]
    fn cliff_produces_divergences_and_valid_draws() {
        let cfg = SamplerConfig { target_accept: 0.6, ..small_config(9) };
        let set = nuts_run(&HalfLine, Some(&[vec![1.0], vec![2.0]]), &cfg).unwrap();
        assert!(set.divergences_total() > 0);
        assert!(set.pooled(0).iter().all(|x| *x > 0.0));
    }

    #[test]
    fn rejects_mismatched_inits() {
        assert!(nuts_run(&StdNormal(2), Some(&[vec![0.0, 0.0]]), &small_config(1)).is_err());
    }
}

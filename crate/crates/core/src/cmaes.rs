//! CMA-ES over the unit box, with the tool-segment decoding used to embed
//! a discrete tool choice in the first coordinate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

const EIG_FLOOR: f64 = 1e-12;
const SIGMA_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaParams {
    /// Population size λ.
    pub lambda: usize,
    pub iterations: usize,
    pub seed: u64,
    pub sigma0: f64,
    /// Initial mean; the box center when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for CmaParams {
    fn default() -> Self {
        CmaParams { lambda: 100, iterations: 20, seed: 0, sigma0: 0.3, x0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Best objective so far after each generation.
    pub history: Vec<f64>,
    /// Distribution mean after each generation.
    pub means: Vec<Vec<f64>>,
    /// Step size after each generation.
    pub sigmas: Vec<f64>,
    pub evaluations: usize,
}

/// Mutable optimizer state. Exposed for inspection in tests.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: usize,
    b: DMatrix<f64>,
    d: DVector<f64>,
}

struct Strategy {
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(d: usize, lambda: usize) -> Self {
        let n = d as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Strategy { mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }
}

impl CmaState {
    fn new(mean: DVector<f64>, sigma: f64) -> Self {
        let d = mean.len();
        CmaState {
            mean,
            sigma,
            cov: DMatrix::identity(d, d),
            p_sigma: DVector::zeros(d),
            p_c: DVector::zeros(d),
            generation: 0,
            b: DMatrix::identity(d, d),
            d: DVector::from_element(d, 1.0),
        }
    }

    /// Symmetrizes C, floors its eigenvalues and refreshes the factorization.
    fn refresh(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let vals = eig.eigenvalues.map(|v| v.max(EIG_FLOOR));
        let b = eig.eigenvectors;
        self.cov = &b * DMatrix::from_diagonal(&vals) * b.transpose();
        self.d = vals.map(f64::sqrt);
        self.b = b;
    }
}

fn clamp_unit(x: &DVector<f64>) -> (Vec<f64>, f64) {
    let mut pen = 0.0;
    let c = x
        .iter()
        .map(|v| {
            let cv = v.clamp(0.0, 1.0);
            pen += (v - cv).powi(2);
            cv
        })
        .collect();
    (c, pen)
}

/// Minimizes `objective` over [0,1]^d, evaluating each generation in parallel.
pub fn optimize<F>(objective: F, d: usize, p: &CmaParams) -> Result<CmaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_batch(|xs| xs.par_iter().map(|x| objective(x)).collect(), d, p)
}

/// Like [`optimize`] but hands each whole generation to `objective`, which
/// must return one value per candidate in order.
pub fn optimize_batch<F>(mut objective: F, d: usize, p: &CmaParams) -> Result<CmaResult>
where
    F: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    if d == 0 || p.lambda < 4 {
        return Err(Error::InvalidArgument("cma-es needs d >= 1 and lambda >= 4".into()));
    }
    if !(p.sigma0 > 0.0) {
        return Err(Error::InvalidArgument("sigma0 must be > 0".into()));
    }
    let x0 = match &p.x0 {
        Some(x) if x.len() != d => return Err(Error::DimensionMismatch { expected: d, got: x.len() }),
        Some(x) => DVector::from_iterator(d, x.iter().map(|v| v.clamp(0.0, 1.0))),
        None => DVector::from_element(d, 0.5),
    };
    let s = Strategy::new(d, p.lambda);
    let mut st = CmaState::new(x0, p.sigma0.min(SIGMA_MAX));
    let mut rng = stream_rng(p.seed, streams::CMAES, 0);
    let mut res = CmaResult {
        best_x: st.mean.iter().copied().collect(),
        best_f: f64::INFINITY,
        history: Vec::with_capacity(p.iterations),
        means: Vec::with_capacity(p.iterations),
        sigmas: Vec::with_capacity(p.iterations),
        evaluations: 0,
    };

    for g in 0..p.iterations {
        let ys: Vec<DVector<f64>> = (0..p.lambda)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                &st.b * z.component_mul(&st.d)
            })
            .collect();
        let xs: Vec<DVector<f64>> = ys.iter().map(|y| &st.mean + y * st.sigma).collect();
        let clamped: Vec<(Vec<f64>, f64)> = xs.iter().map(clamp_unit).collect();
        let pts: Vec<Vec<f64>> = clamped.iter().map(|c| c.0.clone()).collect();
        let raw = objective(&pts);
        if raw.len() != p.lambda {
            return Err(Error::DimensionMismatch { expected: p.lambda, got: raw.len() });
        }
        res.evaluations += p.lambda;
        let vals: Vec<f64> = raw.iter().map(|v| if v.is_finite() { *v } else { f64::INFINITY }).collect();
        if g == 0 && vals.iter().all(|v| v.is_infinite()) {
            return Err(Error::Infeasible("every candidate of the first generation was non-finite".into()));
        }
        for (i, v) in vals.iter().enumerate() {
            if *v < res.best_f {
                res.best_f = *v;
                res.best_x = pts[i].clone();
            }
        }
        let fitness: Vec<f64> = vals.iter().zip(&clamped).map(|(v, c)| v + c.1).collect();
        let mut order: Vec<usize> = (0..p.lambda).collect();
        order.sort_by(|a, b| fitness[*a].total_cmp(&fitness[*b]).then(a.cmp(b)));

        let mut y_w = DVector::zeros(d);
        for (w, &i) in s.weights.iter().zip(&order[..s.mu]) {
            y_w += &ys[i] * *w;
        }
        st.mean += &y_w * st.sigma;
        st.mean.apply(|v| *v = v.clamp(0.0, 1.0));

        let inv_sqrt = &st.b * DMatrix::from_diagonal(&st.d.map(|v| 1.0 / v)) * st.b.transpose();
        st.p_sigma =
            &st.p_sigma * (1.0 - s.c_sigma) + (&inv_sqrt * &y_w) * (s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff).sqrt();
        let ps_norm = st.p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - s.c_sigma).powi(2 * (g as i32 + 1))).sqrt()
            < (1.4 + 2.0 / (d as f64 + 1.0)) * s.chi_n;
        let hs = if h_sigma { 1.0 } else { 0.0 };
        st.p_c = &st.p_c * (1.0 - s.c_c) + &y_w * (hs * (s.c_c * (2.0 - s.c_c) * s.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(d, d);
        for (w, &i) in s.weights.iter().zip(&order[..s.mu]) {
            rank_mu += &ys[i] * ys[i].transpose() * *w;
        }
        let decay = 1.0 - s.c_1 - s.c_mu + (1.0 - hs) * s.c_1 * s.c_c * (2.0 - s.c_c);
        st.cov = &st.cov * decay + &st.p_c * st.p_c.transpose() * s.c_1 + rank_mu * s.c_mu;
        st.sigma = (st.sigma * ((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0)).exp()).min(SIGMA_MAX);
        st.refresh();
        st.generation += 1;

        res.history.push(res.best_f);
        res.means.push(st.mean.iter().copied().collect());
        res.sigmas.push(st.sigma);
    }
    Ok(res)
}

/// Maps the first decision coordinate to one of `n` tools: equal half-open
/// cells, the last one closed.
pub fn decode_tool(x0: f64, n: usize) -> usize {
    assert!(n >= 1, "need at least one tool");
    ((x0.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n - 1)
}

/// Benchmark fixtures used by the `bench-cmaes` command and the benches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// 5-D sphere centered at 0.6 in every coordinate.
    Sphere,
    /// 2-D Rosenbrock with its minimum mapped to (0.75, 0.75).
    Rosenbrock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub benchmark: Benchmark,
    pub seed: u64,
    pub best_f: f64,
    pub evaluations: usize,
    pub target: f64,
    pub max_evaluations: usize,
    pub passed: bool,
}

impl Benchmark {
    pub const ALL: [Benchmark; 2] = [Benchmark::Sphere, Benchmark::Rosenbrock];

    pub fn dims(self) -> usize {
        match self {
            Benchmark::Sphere => 5,
            Benchmark::Rosenbrock => 2,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Sphere => x.iter().map(|v| (v - 0.6).powi(2)).sum(),
            Benchmark::Rosenbrock => {
                let a = 4.0 * x[0] - 2.0;
                let b = 4.0 * x[1] - 2.0;
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            }
        }
    }

    /// Budget and success threshold: (params without seed, target, max evaluations).
    pub fn budget(self) -> (CmaParams, f64, usize) {
        match self {
            Benchmark::Sphere => (CmaParams { lambda: 20, iterations: 200, ..Default::default() }, 1e-8, 4000),
            Benchmark::Rosenbrock => (CmaParams { lambda: 10, iterations: 500, ..Default::default() }, 1e-4, 5000),
        }
    }

    pub fn run(self, seed: u64) -> Result<BenchOutcome> {
        let (p, target, max_evaluations) = self.budget();
        let r = optimize(|x| self.eval(x), self.dims(), &CmaParams { seed, ..p })?;
        Ok(BenchOutcome {
            benchmark: self,
            seed,
            best_f: r.best_f,
            evaluations: r.evaluations,
            target,
            max_evaluations,
            passed: r.best_f < target && r.evaluations <= max_evaluations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_tool_cells() {
        assert_eq!(decode_tool(0.5, 3), 1);
        assert_eq!(decode_tool(1.0, 3), 2);
        assert_eq!(decode_tool(0.0, 3), 0);
        assert_eq!(decode_tool(1.0 / 3.0, 3), 1);
        assert_eq!(decode_tool(0.999, 1), 0);
    }

    #[test]
    fn rejects_small_population() {
        let r = optimize(|_| 0.0, 2, &CmaParams { lambda: 3, ..Default::default() });
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn all_infeasible_first_generation_is_an_error() {
        let r = optimize(|_| f64::NAN, 2, &CmaParams::default());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }
}

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Tensors larger than this are checked on a random subsample of this
    /// many entries.
    pub max_entries_per_tensor: usize,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-6,
            max_entries_per_tensor: 200,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub worst: Option<WorstEntry>,
    pub passed: bool,
}

/// Compares `analytic` gradients against central differences of `loss`.
///
/// `params` is perturbed in place and restored entry by entry.
pub fn check_gradients_with<A, L>(
    params: &mut ParamStore<f64>,
    analytic: A,
    loss: L,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport>
where
    A: Fn(&ParamStore<f64>) -> Result<Vec<Tensor<f64>>>,
    L: Fn(&ParamStore<f64>) -> Result<f64>,
{
    let grads = analytic(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        tolerance: cfg.tolerance,
        worst: None,
        passed: true,
    };
    for ti in 0..params.len() {
        let n = params.tensors()[ti].numel();
        let entries: Vec<usize> = if n <= cfg.max_entries_per_tensor {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, cfg.max_entries_per_tensor).into_vec();
            v.sort_unstable();
            v
        };
        for j in entries {
            let orig = params.tensors()[ti].data()[j];
            params.tensors_mut()[ti].data_mut()[j] = orig + cfg.step;
            let plus = loss(params);
            params.tensors_mut()[ti].data_mut()[j] = orig - cfg.step;
            let minus = loss(params);
            params.tensors_mut()[ti].data_mut()[j] = orig;
            let numeric = (plus? - minus?) / (2.0 * cfg.step);
            let a = grads[ti].data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = Some(WorstEntry {
                    tensor: params.names()[ti].clone(),
                    index: j,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    report.passed = report.max_rel_error <= cfg.tolerance;
    Ok(report)
}

/// Gradient check of a loss built on a [`Graph`]. `forward` receives the
/// bound parameter handles in store order and returns the scalar loss.
pub fn check_gradients<F>(params: &mut ParamStore<f64>, forward: F, cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&mut Graph<'g, f64>, &[Var]) -> Result<Var>,
{
    let analytic = |p: &ParamStore<f64>| -> Result<Vec<Tensor<f64>>> {
        let mut g = Graph::new();
        let vars = p.bind(&mut g, true);
        let loss = forward(&mut g, &vars)?;
        let mut grads = g.backward(loss)?;
        Ok(vars
            .iter()
            .zip(p.tensors())
            .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect())
    };
    let loss = |p: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let vars = p.bind(&mut g, false);
        let l = forward(&mut g, &vars)?;
        Ok(g.value(l).item().unwrap_or(f64::NAN))
    };
    check_gradients_with(params, analytic, loss, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bilinear_store() -> ParamStore<f64> {
        let mut p = ParamStore::new();
        p.insert("m", Tensor::from_f64_slice(&[3, 3], &[0.2, -0.5, 0.1, 0.7, 0.3, -0.9, -0.4, 0.6, 0.05]).unwrap());
        p.insert("b", Tensor::scalar(0.1));
        p
    }

    fn bilinear_loss(g: &mut Graph<'_, f64>, v: &[Var]) -> Result<Var> {
        let u = g.constant(Tensor::vector(vec![0.5, -1.0, 1.5]));
        let w = g.constant(Tensor::vector(vec![-0.3, 0.8, 1.1]));
        let um = g.matmul(u, v[0])?;
        let prod = g.mul(um, w)?;
        let s = g.sum(prod);
        let z = g.add(s, v[1])?;
        g.bce_with_logits(z, 1.0)
    }

    #[test]
    fn bilinear_scorer_passes() {
        let mut p = bilinear_store();
        let cfg = GradCheckConfig { tolerance: 1e-7, ..Default::default() };
        let r = check_gradients(&mut p, bilinear_loss, cfg).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 10);
        // parameters restored
        assert_eq!(p, bilinear_store());
    }

    #[test]
    fn zero_parameter_model_is_vacuous_pass() {
        let mut p = ParamStore::new();
        let r = check_gradients(
            &mut p,
            |g, _| {
                let c = g.constant(Tensor::scalar(1.0));
                Ok(g.sigmoid(c))
            },
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(r.passed);
        assert_eq!(r.checked, 0);
    }

    #[test]
    fn corrupted_backward_rule_is_caught() {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::vector(vec![0.3, -0.7]));
        let r = check_gradients(
            &mut p,
            |g, v| {
                let s = g.broken_sigmoid(v[0]);
                Ok(g.sum(s))
            },
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(!r.passed, "{r:?}");
    }

    #[test]
    fn large_tensors_are_subsampled() {
        let mut p = ParamStore::new();
        p.insert("big", Tensor::filled(&[30, 30], 0.01));
        let r = check_gradients(
            &mut p,
            |g, v| {
                let t = g.tanh(v[0]);
                Ok(g.sum(t))
            },
            GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(r.checked, 200);
        assert!(r.passed);
    }
}

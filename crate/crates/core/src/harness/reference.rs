//! Reference posteriors for the mixture experiment.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    GridQuadrature,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReferencePosterior {
    pub kind: ReferenceKind,
    /// points per axis for grid quadrature
    pub resolution: Option<usize>,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// sum of normalized quadrature weights
    pub weight_sum: f64,
}

/// Two-component mixture with known unit-free likelihood scale.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixtureModel {
    pub data: Vec<f64>,
    pub prior_mean: f64,
    /// prior standard deviation of each cluster mean
    pub prior_sd: f64,
    pub likelihood_sd: f64,
    pub weights: [f64; 2],
}

impl MixtureModel {
    pub fn benchmark_data() -> Self {
        MixtureModel {
            data: super::programs::GMM_DATA.to_vec(),
            prior_mean: 0.0,
            prior_sd: 2.0,
            likelihood_sd: 1.0,
            weights: [0.5, 0.5],
        }
    }

    fn log_normal(x: f64, m: f64, s: f64) -> f64 {
        let z = (x - m) / s;
        -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
    }

    /// Log posterior of the two cluster means up to a constant, with each
    /// assignment summed out.
    pub fn log_posterior(&self, mu1: f64, mu2: f64) -> f64 {
        let mut lp = Self::log_normal(mu1, self.prior_mean, self.prior_sd)
            + Self::log_normal(mu2, self.prior_mean, self.prior_sd);
        for &y in &self.data {
            let a = self.weights[0].ln() + Self::log_normal(y, mu1, self.likelihood_sd);
            let b = self.weights[1].ln() + Self::log_normal(y, mu2, self.likelihood_sd);
            let m = a.max(b);
            lp += m + ((a - m).exp() + (b - m).exp()).ln();
        }
        lp
    }

    /// Midpoint-rule quadrature on `[lo, hi]²` of the canonically ordered
    /// means `(min(μ1, μ2), max(μ1, μ2))`.
    pub fn grid_reference(&self, resolution: usize, lo: f64, hi: f64) -> ReferencePosterior {
        let h = (hi - lo) / resolution as f64;
        let at = |i: usize| lo + (i as f64 + 0.5) * h;
        let mut logs = Vec::with_capacity(resolution * resolution);
        for i in 0..resolution {
            for j in 0..resolution {
                logs.push(self.log_posterior(at(i), at(j)));
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let (mut weight_sum, mut m) = (0.0, [0.0; 2]);
        let mut sq = [0.0; 2];
        for i in 0..resolution {
            for j in 0..resolution {
                let w = (logs[i * resolution + j] - max).exp() / total;
                let (a, b) = (at(i), at(j));
                let ordered = [a.min(b), a.max(b)];
                for k in 0..2 {
                    m[k] += w * ordered[k];
                    sq[k] += w * ordered[k] * ordered[k];
                }
                weight_sum += w;
            }
        }
        ReferencePosterior {
            kind: ReferenceKind::GridQuadrature,
            resolution: Some(resolution),
            names: vec!["mu_low".into(), "mu_high".into()],
            means: m.to_vec(),
            variances: (0..2).map(|k| sq[k] - m[k] * m[k]).collect(),
            weight_sum,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_normalized_and_converged() {
        let model = MixtureModel::benchmark_data();
        let coarse = model.grid_reference(200, -6.0, 6.0);
        let fine = model.grid_reference(400, -6.0, 6.0);
        assert!((fine.weight_sum - 1.0).abs() < 1e-9);
        for k in 0..2 {
            assert!((coarse.means[k] - fine.means[k]).abs() < 1e-3);
        }
        assert!(fine.means[0] < -1.5 && fine.means[1] > 1.5);
    }

    #[test]
    fn single_component_matches_conjugate_update() {
        // with all weight on the first cluster, μ1 is conjugate normal
        let model = MixtureModel { data: vec![1.0, 2.0, 3.0], prior_mean: 0.0, prior_sd: 2.0, likelihood_sd: 1.0, weights: [1.0, 1e-300] };
        let precision = 3.0 + 0.25;
        let post_mean = 6.0 / precision;
        let eps = 1e-4;
        let d = (model.log_posterior(post_mean + eps, 0.0) - model.log_posterior(post_mean - eps, 0.0)) / (2.0 * eps);
        assert!(d.abs() < 1e-6, "{d}");
    }
}

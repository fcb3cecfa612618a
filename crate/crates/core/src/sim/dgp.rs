//! Data-generating processes for the simulation studies.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DesignMatrix, FeatureSchema, TargetVector};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Response {
    /// `3 + 4x1 + x1x2 + 3x3² + 2x4x5` over seven features.
    Main,
    /// `2 + x1 + x2` over two correlated features.
    CorrelatedToy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub response: Response,
    pub p: usize,
    /// Common correlation of the features (0 for independent).
    pub rho: f64,
    /// Noise standard deviation.
    pub sigma: f64,
}

impl DgpSpec {
    pub fn main() -> Self {
        DgpSpec { response: Response::Main, p: 7, rho: 0.0, sigma: 0.01 }
    }

    /// Noise variance 10, i.e. standard deviation √10.
    pub fn correlated_toy() -> Self {
        DgpSpec { response: Response::CorrelatedToy, p: 2, rho: 0.85, sigma: 10f64.sqrt() }
    }

    pub fn validate(&self) -> Result<()> {
        let needed = match self.response {
            Response::Main => 5,
            Response::CorrelatedToy => 2,
        };
        if self.p < needed {
            return Err(invalid(format!("response needs at least {needed} features")));
        }
        // equicorrelation is positive definite for -1/(p-1) < rho < 1
        if !(self.rho < 1.0 && self.rho > -1.0 / (self.p as f64 - 1.0).max(1.0)) {
            return Err(invalid(format!("correlation {} is not positive definite for p = {}", self.rho, self.p)));
        }
        if !(self.sigma >= 0.0) {
            return Err(invalid("noise stddev must be nonnegative"));
        }
        Ok(())
    }

    /// Noise-free response for one feature vector (no intercept).
    pub fn mean_response(&self, x: &[f64]) -> f64 {
        match self.response {
            Response::Main => 3.0 + 4.0 * x[0] + x[0] * x[1] + 3.0 * x[2] * x[2] + 2.0 * x[3] * x[4],
            Response::CorrelatedToy => 2.0 + x[0] + x[1],
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return Err(invalid("need at least one row"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.p;
        // equicorrelated normals: sqrt(rho) * shared + sqrt(1 - rho) * own
        let (shared_w, own_w) = if self.rho >= 0.0 {
            (self.rho.sqrt(), (1.0 - self.rho).sqrt())
        } else {
            (0.0, 1.0)
        };
        let mut feats = Array2::zeros((n, p));
        let mut y = Vec::with_capacity(n);
        let mut row = vec![0.0; p];
        for i in 0..n {
            let shared: f64 = if shared_w > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            for v in row.iter_mut() {
                let own: f64 = rng.sample(StandardNormal);
                *v = shared_w * shared + own_w * own;
            }
            let noise: f64 = rng.sample(StandardNormal);
            y.push(self.mean_response(&row) + self.sigma * noise);
            feats.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        }
        let x = DesignMatrix::with_intercept(feats.view(), FeatureSchema::numeric(p))?;
        Dataset::new(x, TargetVector::regression(y))
    }
}

/// Seven independent standard normals, `σ = 0.01`.
pub fn gen_main_dgp(n: usize, seed: u64) -> Result<Dataset> {
    DgpSpec::main().generate(n, seed)
}

/// Two standard normals with correlation 0.85, noise variance 10.
pub fn gen_correlated_toy(n: usize, seed: u64) -> Result<Dataset> {
    DgpSpec::correlated_toy().generate(n, seed)
}

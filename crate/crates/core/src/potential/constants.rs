use serde::{Deserialize, Serialize};

use crate::math::{pow, tgamma, PI};

/// Ball and sphere constants for boundary dimension `n` (ambient `n + 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    /// Volume of the unit ball of R^{n+1}.
    pub omega_np1: f64,
    /// Area of the unit sphere of R^{n+1}, `(n + 1) ω_{n+1}`.
    pub sigma_n: f64,
    /// Volume of the unit ball of R^n (flat density normalization).
    pub omega_n: f64,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "boundary dimension must be at least 2");
        let omega_np1 = unit_ball_volume(n + 1);
        DimensionConstants {
            n,
            omega_np1,
            sigma_n: (n + 1) as f64 * omega_np1,
            omega_n: unit_ball_volume(n),
        }
    }

    /// Radius `R` with `σ_n R^n = 1`.
    pub fn unit_measure_radius(&self) -> f64 {
        pow(self.sigma_n, -1.0 / self.n as f64)
    }
}

fn unit_ball_volume(k: usize) -> f64 {
    let h = k as f64 / 2.0;
    pow(PI, h) / tgamma(h + 1.0)
}

//! Unconstrained reparameterization of the full parameter vector.
//!
//! Positive parameters are optimized on the log scale by default; any
//! parameter can be frozen through the fixed mask. The parameter order is
//! fixed: `mu, tau2, phi, sigma2, alpha, c, sigma_beta, sigma_x, sigma_y,
//! beta0` (the Matérn smoothness is an integer constant, never estimated).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ThetaFull;

pub const N_PARAMS: usize = 10;
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "mu", "tau2", "phi", "sigma2", "alpha", "c", "sigma_beta", "sigma_x", "sigma_y", "beta0",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    Log,
    /// Identity divided by a characteristic scale, so unconstrained steps
    /// of order one move the parameter by order `scale`.
    Scaled(f64),
}

impl Transform {
    pub fn to_unconstrained(self, v: f64) -> Result<f64> {
        match self {
            Transform::Identity => Ok(v),
            Transform::Log => {
                if v > 0.0 {
                    Ok(v.ln())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "log transform needs a positive value, got {v}"
                    )))
                }
            }
            Transform::Scaled(s) => Ok(v / s),
        }
    }

    pub fn to_natural(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
            Transform::Scaled(s) => u * s,
        }
    }

    /// d natural / d unconstrained, for delta-method standard errors.
    pub fn jacobian(self, natural: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => natural,
            Transform::Scaled(s) => s,
        }
    }
}

/// Which parameters stay at their initial values during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedMask {
    pub mu: bool,
    pub tau2: bool,
    pub phi: bool,
    pub sigma2: bool,
    pub alpha: bool,
    pub c: bool,
    pub sigma_beta: bool,
    pub sigma_x: bool,
    pub sigma_y: bool,
    pub beta0: bool,
}

impl Default for FixedMask {
    /// The nugget is treated as known, as are the user-chosen field offset
    /// and the initial behavioural state; everything else is estimated.
    fn default() -> Self {
        FixedMask {
            mu: false,
            tau2: true,
            phi: false,
            sigma2: false,
            alpha: false,
            c: true,
            sigma_beta: false,
            sigma_x: false,
            sigma_y: false,
            beta0: true,
        }
    }
}

impl FixedMask {
    pub fn all_fixed() -> Self {
        FixedMask {
            mu: true,
            tau2: true,
            phi: true,
            sigma2: true,
            alpha: true,
            c: true,
            sigma_beta: true,
            sigma_x: true,
            sigma_y: true,
            beta0: true,
        }
    }

    /// Field-only fitting: movement parameters all frozen.
    pub fn standard_default() -> Self {
        FixedMask {
            mu: false,
            tau2: true,
            phi: false,
            sigma2: false,
            alpha: true,
            c: true,
            sigma_beta: true,
            sigma_x: true,
            sigma_y: true,
            beta0: true,
        }
    }

    pub fn as_array(&self) -> [bool; N_PARAMS] {
        [
            self.mu,
            self.tau2,
            self.phi,
            self.sigma2,
            self.alpha,
            self.c,
            self.sigma_beta,
            self.sigma_x,
            self.sigma_y,
            self.beta0,
        ]
    }
}

fn get(theta: &ThetaFull, i: usize) -> f64 {
    match i {
        0 => theta.field.mu,
        1 => theta.field.tau2,
        2 => theta.field.phi,
        3 => theta.field.sigma2,
        4 => theta.movement.alpha,
        5 => theta.movement.c,
        6 => theta.movement.sigma_beta,
        7 => theta.movement.sigma[0],
        8 => theta.movement.sigma[1],
        9 => theta.movement.beta0,
        _ => unreachable!(),
    }
}

fn set(theta: &mut ThetaFull, i: usize, v: f64) {
    match i {
        0 => theta.field.mu = v,
        1 => theta.field.tau2 = v,
        2 => theta.field.phi = v,
        3 => theta.field.sigma2 = v,
        4 => theta.movement.alpha = v,
        5 => theta.movement.c = v,
        6 => theta.movement.sigma_beta = v,
        7 => theta.movement.sigma[0] = v,
        8 => theta.movement.sigma[1] = v,
        9 => theta.movement.beta0 = v,
        _ => unreachable!(),
    }
}

/// Maps between `ThetaFull` and the unconstrained free-parameter vector.
#[derive(Debug, Clone)]
pub struct ParamSpace {
    transforms: [Transform; N_PARAMS],
    fixed: [bool; N_PARAMS],
    free_indices: Vec<usize>,
}

impl ParamSpace {
    pub fn new(mask: &FixedMask) -> ParamSpace {
        use Transform::*;
        // the preferential strength routinely lives in the hundreds, so it
        // gets a characteristic scale instead of raw identity
        let transforms =
            [Identity, Log, Log, Log, Scaled(100.0), Identity, Log, Log, Log, Identity];
        Self::with_transforms(mask, transforms)
    }

    pub fn with_transforms(mask: &FixedMask, transforms: [Transform; N_PARAMS]) -> ParamSpace {
        let fixed = mask.as_array();
        let free_indices = (0..N_PARAMS).filter(|&i| !fixed[i]).collect();
        ParamSpace { transforms, fixed, free_indices }
    }

    pub fn n_free(&self) -> usize {
        self.free_indices.len()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.free_indices.iter().map(|&i| PARAM_NAMES[i].to_string()).collect()
    }

    pub fn is_fixed(&self, name: &str) -> bool {
        let i = PARAM_NAMES.iter().position(|&n| n == name).expect("unknown parameter");
        self.fixed[i]
    }

    /// Free parameters of `theta` in unconstrained space.
    pub fn pack(&self, theta: &ThetaFull) -> Result<Vec<f64>> {
        self.free_indices
            .iter()
            .map(|&i| self.transforms[i].to_unconstrained(get(theta, i)))
            .collect()
    }

    /// Rebuilds a full parameter vector from unconstrained free values,
    /// taking fixed entries from `base`.
    pub fn unpack(&self, base: &ThetaFull, free: &[f64]) -> Result<ThetaFull> {
        if free.len() != self.n_free() {
            return Err(Error::Dimension(format!(
                "{} free values for {} free parameters",
                free.len(),
                self.n_free()
            )));
        }
        let mut theta = *base;
        for (slot, &i) in self.free_indices.iter().enumerate() {
            set(&mut theta, i, self.transforms[i].to_natural(free[slot]));
        }
        Ok(theta)
    }

    /// Natural-scale values of the free parameters.
    pub fn free_natural(&self, theta: &ThetaFull) -> Vec<f64> {
        self.free_indices.iter().map(|&i| get(theta, i)).collect()
    }

    /// Jacobians d natural / d unconstrained at `theta`, free entries only.
    pub fn jacobians(&self, theta: &ThetaFull) -> Vec<f64> {
        self.free_indices
            .iter()
            .map(|&i| self.transforms[i].jacobian(get(theta, i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldParams;
    use crate::movement::MovementParams;

    fn theta() -> ThetaFull {
        ThetaFull {
            field: FieldParams { mu: 5.0, tau2: 0.1, kappa: 2, phi: 25.0, sigma2: 1.5 },
            movement: MovementParams {
                alpha: 100.0,
                c: 0.0,
                sigma_beta: 0.1,
                sigma: [3.0, 3.0],
                beta0: -1.5,
            },
        }
    }

    #[test]
    fn pack_unpack_round_trip() {
        let space = ParamSpace::new(&FixedMask::default());
        let t = theta();
        let packed = space.pack(&t).unwrap();
        assert_eq!(packed.len(), 7);
        let back = space.unpack(&t, &packed).unwrap();
        approx::assert_relative_eq!(back.field.phi, t.field.phi, max_relative = 1e-14);
        approx::assert_relative_eq!(back.field.sigma2, t.field.sigma2, max_relative = 1e-14);
        approx::assert_relative_eq!(back.movement.sigma[0], t.movement.sigma[0], max_relative = 1e-14);
        assert_eq!(back.field.mu, t.field.mu);
        assert_eq!(back.movement.alpha, t.movement.alpha);
        assert_eq!(back.field.tau2, t.field.tau2);
    }

    #[test]
    fn fixed_entries_come_from_base() {
        let space = ParamSpace::new(&FixedMask::default());
        let t = theta();
        let mut packed = space.pack(&t).unwrap();
        packed[0] += 1.0; // mu is the first free parameter
        let back = space.unpack(&t, &packed).unwrap();
        assert_eq!(back.field.mu, 6.0);
        assert_eq!(back.field.tau2, t.field.tau2);
        assert_eq!(back.movement.c, t.movement.c);
    }

    #[test]
    fn log_transform_enforces_positivity() {
        let space = ParamSpace::new(&FixedMask::default());
        let mut t = theta();
        t.field.phi = -1.0;
        assert!(space.pack(&t).is_err());
        // unpack always produces positive values for log-parameters
        let t = theta();
        let mut packed = space.pack(&t).unwrap();
        for v in packed.iter_mut() {
            *v = -30.0;
        }
        let back = space.unpack(&t, &packed).unwrap();
        assert!(back.field.phi > 0.0);
        assert!(back.field.sigma2 > 0.0);
    }

    #[test]
    fn all_fixed_has_no_free_parameters() {
        let space = ParamSpace::new(&FixedMask::all_fixed());
        assert_eq!(space.n_free(), 0);
        assert!(space.pack(&theta()).unwrap().is_empty());
    }
}

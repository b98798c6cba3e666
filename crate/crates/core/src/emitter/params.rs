use serde::{Deserialize, Serialize};

use super::levels::CgTable;
use super::EmitterError;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cooperativity {
    pub mean: f64,
    pub std: f64,
}

/// Atomic and cavity constants of one emitter.
///
/// Splittings, detuning and Rabi frequencies enter the Hamiltonian as given;
/// decay and leakage rates are angular rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    pub delta: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub delta7: f64,
    pub delta8: f64,
    pub delta10: f64,
    pub delta11: f64,
    pub delta13: f64,
    pub delta15: f64,
    pub gamma2: f64,
    pub gamma3a: f64,
    pub gamma3b: f64,
    pub gamma4: f64,
    pub kappa_t: f64,
    pub kappa_o: f64,
    pub coop_t: Cooperativity,
    pub coop_o: Cooperativity,
    /// Intended-polarization fractions of first laser, second laser,
    /// telecom cavity and visible cavity.
    pub purity: [f64; 4],
    pub cg: CgTable,
}

impl Default for EmitterParams {
    fn default() -> Self {
        EmitterParams {
            delta: 1.73e9,
            omega1: 2.0e8,
            omega2: 2.0e9,
            delta7: 157e6,
            delta8: 267e6,
            delta10: 50.2e6,
            delta11: 75.3e6,
            delta13: 817e6,
            delta15: 6.83e9,
            gamma2: TWO_PI * 6.1e6,
            gamma3a: TWO_PI * 0.19e6,
            gamma3b: TWO_PI * 1.5e6,
            gamma4: TWO_PI * 5.7e6,
            kappa_t: TWO_PI * 1.5e9,
            kappa_o: TWO_PI * 1.0e9,
            coop_t: Cooperativity {
                mean: 34.4,
                std: 5.0,
            },
            coop_o: Cooperativity {
                mean: 11.2,
                std: 2.2,
            },
            purity: [0.98, 0.99, 0.83, 0.67],
            cg: CgTable::rubidium87(),
        }
    }
}

fn bad(field: &str, value: f64, bound: &str) -> EmitterError {
    EmitterError::Config(format!("emitter.{field} = {value} violates {bound}"))
}

impl EmitterParams {
    pub fn validate(&self) -> Result<(), EmitterError> {
        let nonneg = [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("delta7", self.delta7),
            ("delta8", self.delta8),
            ("delta10", self.delta10),
            ("delta11", self.delta11),
            ("delta13", self.delta13),
            ("delta15", self.delta15),
            ("gamma2", self.gamma2),
            ("gamma3a", self.gamma3a),
            ("gamma3b", self.gamma3b),
            ("gamma4", self.gamma4),
            ("kappa_t", self.kappa_t),
            ("kappa_o", self.kappa_o),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad(name, v, ">= 0"));
            }
        }
        if !self.delta.is_finite() {
            return Err(bad("delta", self.delta, "finite"));
        }
        for (k, p) in self.purity.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(EmitterError::Config(format!(
                    "emitter.purity{} = {p} violates [0, 1]",
                    k + 1
                )));
            }
        }
        for (name, c) in [("coop_t", self.coop_t), ("coop_o", self.coop_o)] {
            if !(c.mean > 0.0) {
                return Err(bad(&format!("{name}_mean"), c.mean, "> 0"));
            }
            if !(c.std >= 0.0 && c.std < c.mean) {
                return Err(bad(&format!("{name}_std"), c.std, "0 <= std < mean"));
            }
        }
        Ok(())
    }

    pub fn g_t_from(&self, coop: f64) -> f64 {
        (coop * self.kappa_t * (self.gamma3a + self.gamma3b)).sqrt()
    }

    pub fn g_o_from(&self, coop: f64) -> f64 {
        (coop * self.kappa_o * self.gamma4).sqrt()
    }

    /// Couplings at the mean cooperativities.
    pub fn mean_couplings(&self) -> Couplings {
        Couplings {
            g_t: self.g_t_from(self.coop_t.mean),
            g_o: self.g_o_from(self.coop_o.mean),
        }
    }

    /// Couplings with the telecom cooperativity shifted by `k` standard
    /// deviations.
    pub fn shifted_couplings(&self, k: f64) -> Couplings {
        Couplings {
            g_t: self.g_t_from(self.coop_t.mean + k * self.coop_t.std),
            g_o: self.g_o_from(self.coop_o.mean),
        }
    }

    /// Returns a copy with every rate multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut p = self.clone();
        for v in [
            &mut p.delta,
            &mut p.omega1,
            &mut p.omega2,
            &mut p.delta7,
            &mut p.delta8,
            &mut p.delta10,
            &mut p.delta11,
            &mut p.delta13,
            &mut p.delta15,
            &mut p.gamma2,
            &mut p.gamma3a,
            &mut p.gamma3b,
            &mut p.gamma4,
            &mut p.kappa_t,
            &mut p.kappa_o,
        ] {
            *v *= lambda;
        }
        p
    }
}

/// Atom-cavity couplings for one realization of the trapped atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub g_t: f64,
    pub g_o: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EmitterParams::default().validate().unwrap();
    }

    #[test]
    fn couplings_reproduce_cooperativity() {
        let p = EmitterParams::default();
        let g = p.mean_couplings();
        let ct = g.g_t * g.g_t / (p.kappa_t * (p.gamma3a + p.gamma3b));
        let co = g.g_o * g.g_o / (p.kappa_o * p.gamma4);
        assert!((ct - 34.4).abs() < 1e-9);
        assert!((co - 11.2).abs() < 1e-9);
    }

    #[test]
    fn bad_purity_is_named() {
        let mut p = EmitterParams::default();
        p.purity[2] = 1.2;
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains("purity3"), "{e}");
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared numerical tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Generic absolute arithmetic tolerance.
    pub arithmetic: f64,
    /// Minimum eigenvalue accepted as PSD.
    pub psd: f64,
    /// No-signalling / reduced-state consistency of ensembles.
    pub no_signalling: f64,
    /// Unit-trace and normalisation checks.
    pub trace: f64,
    /// Linear-relation residual for Z-sets.
    pub zset_relation: f64,
    /// Margin by which a criterion must be violated to count as detection.
    pub detection: f64,
    /// Band around a threshold reported as inconclusive.
    pub near_boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            arithmetic: 1e-10,
            psd: 1e-10,
            no_signalling: 1e-9,
            trace: 1e-9,
            zset_relation: 1e-9,
            detection: 1e-9,
            near_boundary: 1e-7,
        }
    }
}

pub const ENV_VAR: &str = "STEERMAP_TOL";

impl Tolerances {
    /// Defaults, overridden by `STEERMAP_TOL` when set.
    ///
    /// The variable is either a single number (applied to every field) or a
    /// comma-separated `key=value` list, e.g. `psd=1e-8,no_signalling=1e-6`.
    pub fn from_env() -> Result<Self> {
        let mut tol = Self::default();
        if let Ok(spec) = std::env::var(ENV_VAR) {
            tol.apply_overrides(&spec)?;
        }
        Ok(tol)
    }

    pub fn uniform(value: f64) -> Self {
        Self {
            arithmetic: value,
            psd: value,
            no_signalling: value,
            trace: value,
            zset_relation: value,
            detection: value,
            near_boundary: value,
        }
    }

    pub fn apply_overrides(&mut self, spec: &str) -> Result<()> {
        let spec = spec.trim();
        if spec.is_empty() {
            return Ok(());
        }
        if let Ok(v) = spec.parse::<f64>() {
            check_positive(ENV_VAR, v)?;
            *self = Self::uniform(v);
            return Ok(());
        }
        for item in spec.split(',') {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("tolerance override `{item}` is not key=value")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v: f64 = value
            .parse()
            .map_err(|_| Error::validation(format!("tolerance `{key}`: `{value}` is not a number")))?;
        check_positive(key, v)?;
        let slot = match key {
            "arithmetic" => &mut self.arithmetic,
            "psd" => &mut self.psd,
            "no_signalling" => &mut self.no_signalling,
            "trace" => &mut self.trace,
            "zset_relation" => &mut self.zset_relation,
            "detection" => &mut self.detection,
            "near_boundary" => &mut self.near_boundary,
            _ => return Err(Error::validation(format!("unknown tolerance key `{key}`"))),
        };
        *slot = v;
        Ok(())
    }
}

fn check_positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("tolerance `{key}` must be positive and finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let mut t = Tolerances::default();
        t.apply_overrides("psd=1e-8, detection=2e-9").unwrap();
        assert_eq!(t.psd, 1e-8);
        assert_eq!(t.detection, 2e-9);
        assert_eq!(t.trace, 1e-9);
        t.apply_overrides("1e-6").unwrap();
        assert_eq!(t, Tolerances::uniform(1e-6));
        assert!(t.apply_overrides("bogus=1").is_err());
        assert!(t.apply_overrides("psd=-1").is_err());
    }
}

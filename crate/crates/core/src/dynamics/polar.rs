use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DynamicsError, ALPHA_MAX_DEG, ALPHA_MIN_DEG};

/// Lift and drag coefficients tabulated against the attack angle, evaluated
/// piecewise-linearly between knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroPolar {
    knots: Vec<(f64, f64, f64)>,
}

impl AeroPolar {
    pub fn new(knots: Vec<(f64, f64, f64)>) -> Result<Self, DynamicsError> {
        if knots.len() < 2 {
            return Err(DynamicsError::Polar("need at least two knots".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(DynamicsError::Polar(format!(
                    "alpha must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(a, cl, cd) in &knots {
            if !(a.is_finite() && cl.is_finite() && cd.is_finite()) {
                return Err(DynamicsError::Polar(format!("non-finite entry at alpha {a}")));
            }
            if cd <= 0.0 {
                return Err(DynamicsError::Polar(format!("C_D must be positive at alpha {a}")));
            }
        }
        let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
        if lo > ALPHA_MIN_DEG || hi < ALPHA_MAX_DEG {
            return Err(DynamicsError::Polar(format!(
                "table spans [{lo}, {hi}] deg, must cover [{ALPHA_MIN_DEG}, {ALPHA_MAX_DEG}]"
            )));
        }
        Ok(AeroPolar { knots })
    }

    /// Placeholder polar: C_L ramps linearly from 0.2 to 1.0 over the attack
    /// range and C_D = 0.05 + 0.06 C_L^2, tabulated at every whole degree.
    pub fn placeholder() -> Self {
        let span = ALPHA_MAX_DEG - ALPHA_MIN_DEG;
        let knots = (ALPHA_MIN_DEG as i32..=ALPHA_MAX_DEG as i32)
            .map(|a| {
                let a = a as f64;
                let cl = 0.2 + 0.8 * (a - ALPHA_MIN_DEG) / span;
                (a, cl, 0.05 + 0.06 * cl * cl)
            })
            .collect();
        AeroPolar { knots }
    }

    /// Parses `alpha_deg C_L C_D` triples, one per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DynamicsError> {
        let mut knots = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            match vals {
                Ok(v) if v.len() == 3 => knots.push((v[0], v[1], v[2])),
                _ => {
                    return Err(DynamicsError::Polar(format!(
                        "line {}: expected `alpha_deg C_L C_D`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(knots)
    }

    pub fn load(path: &Path) -> Result<Self, DynamicsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DynamicsError::Polar(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# alpha_deg C_L C_D\n");
        for (a, cl, cd) in &self.knots {
            out.push_str(&format!("{a} {cl} {cd}\n"));
        }
        out
    }

    pub fn knots(&self) -> &[(f64, f64, f64)] {
        &self.knots
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// `(C_L, C_D)` at the given attack angle in degrees.
    pub fn coefficients(&self, alpha_deg: f64) -> Result<(f64, f64), DynamicsError> {
        let (lo, hi) = self.alpha_range();
        if !(alpha_deg >= lo && alpha_deg <= hi) {
            return Err(DynamicsError::OutOfRange {
                alpha_deg,
                min: lo,
                max: hi,
            });
        }
        let idx = self.knots.partition_point(|k| k.0 <= alpha_deg);
        if idx == 0 {
            let k = self.knots[0];
            return Ok((k.1, k.2));
        }
        let (a0, cl0, cd0) = self.knots[idx - 1];
        if a0 == alpha_deg || idx == self.knots.len() {
            return Ok((cl0, cd0));
        }
        let (a1, cl1, cd1) = self.knots[idx];
        let w = (alpha_deg - a0) / (a1 - a0);
        Ok((cl0 + w * (cl1 - cl0), cd0 + w * (cd1 - cd0)))
    }
}

impl Default for AeroPolar {
    fn default() -> Self {
        Self::placeholder()
    }
}

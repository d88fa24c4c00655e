use serde::{Deserialize, Serialize};

use super::Phase;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseLedger {
    pub energy_kwh: f64,
    pub duration_s: f64,
    /// The phase ran (possibly zero steps if skipped).
    pub visited: bool,
    pub skipped: bool,
    /// `(t, kW)` samples; empty unless power recording was enabled.
    #[serde(skip)]
    pub power_trace: Vec<(f64, f64)>,
}

impl PhaseLedger {
    pub fn average_power_kw(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.energy_kwh * 3600.0 / self.duration_s
        } else {
            0.0
        }
    }

    /// Trapezoid integral of the power trace (kWh).
    pub fn trace_energy_kwh(&self) -> f64 {
        self.power_trace
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum::<f64>()
            / 3600.0
    }
}

/// Per-phase energy and duration of one cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub phases: [PhaseLedger; 4],
}

impl EnergyLedger {
    pub fn get(&self, phase: Phase) -> &PhaseLedger {
        &self.phases[phase.index()]
    }

    pub fn get_mut(&mut self, phase: Phase) -> &mut PhaseLedger {
        &mut self.phases[phase.index()]
    }

    pub fn total_energy_kwh(&self) -> f64 {
        self.phases.iter().map(|p| p.energy_kwh).sum()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_s).sum()
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interferometer and detection scales for the time-bin gates. The simulator
/// only uses these to decide whether the S/L bins are orthogonal and
/// mutually coherent; lengths and times share whatever units `c` implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeBinConfig {
    /// Path-length difference between long and short arms.
    pub delta_l: f64,
    /// Coherence length of the down-converted photons.
    pub l_spdc: f64,
    /// Coherence length of the pump.
    pub l_pump: f64,
    /// Coincidence window.
    pub delta_t: f64,
    /// Propagation speed.
    pub c: f64,
}

impl Default for TimeBinConfig {
    fn default() -> Self {
        TimeBinConfig {
            delta_l: 0.3,
            l_spdc: 1e-4,
            l_pump: 300.0,
            delta_t: 0.5e-9,
            c: 3e8,
        }
    }
}

impl TimeBinConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.delta_l, self.l_spdc, self.l_pump, self.delta_t, self.c];
        if fields.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidTimeBinConfig("all scales must be positive and finite".into()));
        }
        if !(self.l_spdc <= self.delta_l && self.delta_l <= self.l_pump) {
            return Err(Error::InvalidTimeBinConfig(format!(
                "need l_spdc <= delta_l <= l_pump, got {} <= {} <= {}",
                self.l_spdc, self.delta_l, self.l_pump
            )));
        }
        let bin_separation = self.delta_l / self.c;
        if self.delta_t >= bin_separation {
            return Err(Error::InvalidTimeBinConfig(format!(
                "coincidence window {} does not resolve bins {} apart",
                self.delta_t, bin_separation
            )));
        }
        Ok(())
    }
}

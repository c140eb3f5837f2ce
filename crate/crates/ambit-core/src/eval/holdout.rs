use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldoutMode {
    /// Hold out this fraction of zones uniformly at random (at least one).
    ZoneFraction(f64),
    /// Hold out every zone of one borough.
    Borough(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassPolicy {
    /// Held-out zones keep only the smoothing floor in flow-based masses.
    Zero,
    /// Held-out zones get borough-mean flow masses from surviving zones.
    BoroughImputed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutSpec {
    pub mode: HoldoutMode,
    pub mass_policy: MassPolicy,
    pub seed: u64,
}

impl HoldoutSpec {
    pub fn zone_fraction(fraction: f64, mass_policy: MassPolicy, seed: u64) -> Self {
        Self {
            mode: HoldoutMode::ZoneFraction(fraction),
            mass_policy,
            seed,
        }
    }
}

/// A rebuilt task whose train/val rows avoid the held-out zones and whose
/// test rows all touch them.
#[derive(Debug, Clone)]
pub struct HoldoutTask {
    pub task: Task,
    pub heldout_zone_idxs: Vec<usize>,
}

impl HoldoutTask {
    /// Evaluation rows (test rows touching held-out zones).
    pub fn eval_rows(&self) -> &[usize] {
        &self.task.split.test
    }
}

/// Select held-out zones per the spec and rebuild the task around them.
/// Models are refit on the returned task by the caller and evaluated on
/// `eval_rows`.
pub fn spatial_holdout(task: &Task, spec: &HoldoutSpec) -> Result<HoldoutTask> {
    let n = task.zones.len();
    let heldout: Vec<usize> = match &spec.mode {
        HoldoutMode::ZoneFraction(fraction) => {
            if !(0.0 < *fraction && *fraction < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "holdout fraction must be in (0,1), got {fraction}"
                )));
            }
            let k = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
            let mut idx: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            idx.shuffle(&mut rng);
            idx.truncate(k);
            idx.sort_unstable();
            idx
        }
        HoldoutMode::Borough(label) => {
            let idx: Vec<usize> = (0..n)
                .filter(|&i| &task.zones.zone(i).borough == label)
                .collect();
            if idx.is_empty() {
                return Err(Error::InvalidConfig(format!("unknown borough `{label}`")));
            }
            if idx.len() == n {
                return Err(Error::InvalidConfig(format!(
                    "borough `{label}` covers every zone"
                )));
            }
            idx
        }
    };
    let rebuilt = task.with_spatial_holdout(
        &heldout,
        matches!(spec.mass_policy, MassPolicy::BoroughImputed),
    )?;
    Ok(HoldoutTask {
        task: rebuilt,
        heldout_zone_idxs: heldout,
    })
}

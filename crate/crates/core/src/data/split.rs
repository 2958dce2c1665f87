use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MIN_PATIENTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seeded shuffle into 70 % / 20 % / remainder partitions by patient.
pub fn split_patients(patient_ids: &[u32], seed: u64) -> Result<Split> {
    let n = patient_ids.len();
    if n < MIN_PATIENTS {
        return Err(Error::Config(format!("need at least {MIN_PATIENTS} patients to split, got {n}")));
    }
    let mut ids = patient_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != n {
        return Err(Error::Config("duplicate patient ids".into()));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (0.7 * n as f64).round() as usize;
    let n_val = (0.2 * n as f64).round() as usize;
    let test = ids.split_off(n_train + n_val);
    let val = ids.split_off(n_train);
    Ok(Split { train: ids, val, test })
}

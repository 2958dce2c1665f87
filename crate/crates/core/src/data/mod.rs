//! Synthetic phantom data: generation, augmentation, patient splits and the
//! on-disk dataset format.

mod augment;
mod dataset;
mod phantom;
mod split;

pub use augment::{apply_frame, augment_pair, periphery_augment, Frame, PeripheryConfig};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, DatasetReader, DATASET_MAGIC};
pub use phantom::{
    gen_patient, gen_patient_images, masked_image, PhantomSlice, PhantomSpec, SliceSample, Span,
};
pub use split::{split_patients, Split, MIN_PATIENTS};

use rayon::prelude::*;

use crate::error::Result;

/// `patients × slices` samples ordered by patient then slice; patients are
/// generated in parallel.
pub fn gen_dataset(spec: &PhantomSpec, patients: usize, slices: usize) -> Result<Vec<SliceSample>> {
    let per: Vec<Vec<SliceSample>> =
        (0..patients as u32).into_par_iter().map(|p| gen_patient(spec, p, slices)).collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Sorted distinct patient ids.
pub fn patient_ids(samples: &[SliceSample]) -> Vec<u32> {
    let mut ids: Vec<u32> = samples.iter().map(|s| s.patient_id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Samples whose patient is in `ids`, in dataset order.
pub fn select_patients<'a>(samples: &'a [SliceSample], ids: &[u32]) -> Vec<&'a SliceSample> {
    samples.iter().filter(|s| ids.contains(&s.patient_id)).collect()
}

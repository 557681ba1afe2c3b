use rayon::prelude::*;

use super::PulseRecord;
use crate::error::{Error, Result};

/// Subtracts the local vacuum level from every record.
///
/// The level is the mean raw value of the `window` vacuum records nearest in
/// index; ties go to the earlier record. A vacuum record is calibrated
/// against its neighbours, excluding itself. Records must be in strictly
/// increasing index order.
pub fn calibrate(records: &[PulseRecord], window: usize) -> Result<Vec<PulseRecord>> {
    if window < 2 {
        return Err(Error::Validation(vec![format!(
            "calibration window = {window} must be >= 2"
        )]));
    }
    if let Some(pair) = records.windows(2).find(|p| p[1].index <= p[0].index) {
        return Err(Error::Validation(vec![format!(
            "records must be in increasing index order (index {} follows {})",
            pair[1].index, pair[0].index
        )]));
    }
    let vacuum: Vec<(u64, f64)> = records
        .iter()
        .filter(|r| !r.is_signal())
        .map(|r| (r.index, r.raw))
        .collect();
    if vacuum.len() <= window {
        return Err(Error::InsufficientData(format!(
            "{} vacuum records cannot fill a calibration window of {window} (need at least {})",
            vacuum.len(),
            window + 1
        )));
    }

    Ok(records
        .par_iter()
        .map(|r| {
            let level = local_vacuum_level(&vacuum, r.index, window, !r.is_signal());
            PulseRecord {
                calibrated: Some(r.raw - level),
                ..*r
            }
        })
        .collect())
}

fn local_vacuum_level(vacuum: &[(u64, f64)], index: u64, window: usize, exclude_self: bool) -> f64 {
    let split = vacuum.partition_point(|v| v.0 < index);
    let mut left = split; // candidates are vacuum[..left], nearest last
    let mut right = split;
    if exclude_self && right < vacuum.len() && vacuum[right].0 == index {
        right += 1;
    }
    let mut sum = 0.0;
    for _ in 0..window {
        let take_left = match (left > 0, right < vacuum.len()) {
            (true, true) => index - vacuum[left - 1].0 <= vacuum[right].0 - index,
            (true, false) => true,
            (false, true) => false,
            (false, false) => unreachable!("window exceeds available vacuum records"),
        };
        if take_left {
            left -= 1;
            sum += vacuum[left].1;
        } else {
            sum += vacuum[right].1;
            right += 1;
        }
    }
    sum / window as f64
}

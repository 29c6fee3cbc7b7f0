use super::{ReducedUnitSequence, UnitSequence};

/// Collapses runs of repeated units, recording each run length.
///
/// `[0, 0, 1, 1, 1, 2]` becomes units `[0, 1, 2]` with durations `[2, 3, 1]`.
pub fn reduce(seq: &UnitSequence) -> ReducedUnitSequence {
    let mut units = Vec::new();
    let mut durations: Vec<u32> = Vec::new();
    for &u in &seq.units {
        match (units.last(), durations.last_mut()) {
            (Some(&prev), Some(d)) if prev == u => *d += 1,
            _ => {
                units.push(u);
                durations.push(1);
            }
        }
    }
    ReducedUnitSequence { units, durations }
}

/// Repeats each unit by its duration. Inverse of [`reduce`].
pub fn expand(reduced: &ReducedUnitSequence, frame_period: f64) -> UnitSequence {
    let mut units = Vec::with_capacity(reduced.total_frames());
    for (&u, &d) in reduced.units.iter().zip(&reduced.durations) {
        units.extend(std::iter::repeat_n(u, d as usize));
    }
    UnitSequence::new(units, frame_period)
}

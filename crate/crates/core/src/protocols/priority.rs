//! Mappings from a service priority (0 = highest, 100 = lowest) to the
//! per-user knob each service-priority protocol adjusts.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriorityError {
    #[error("priority {0} outside [0, 100]")]
    OutOfRange(u32),
}

// Half-up rounding of a * b / 100 for non-negative integers.
fn scale(a: u32, b: u32) -> u32 {
    ((a as u64 * b as u64 + 50) / 100) as u32
}

/// Replica cap for SP-IRSA: `clamp(round(d_m (100 - p) / 100), 1, d_m)`.
pub fn priority_degree_cap(priority: u32, d_max: u32) -> Result<u32, PriorityError> {
    if priority > 100 {
        return Err(PriorityError::OutOfRange(priority));
    }
    Ok(scale(d_max, 100 - priority).clamp(1, d_max.max(1)))
}

/// Backoff limit for SP-S-ALOHA: `clamp(round(b_off p / 100), 1, b_off)`.
pub fn priority_backoff_limit(priority: u32, b_off: u32) -> Result<u32, PriorityError> {
    if priority > 100 {
        return Err(PriorityError::OutOfRange(priority));
    }
    Ok(scale(b_off, priority).clamp(1, b_off.max(1)))
}

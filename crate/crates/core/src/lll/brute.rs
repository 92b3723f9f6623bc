//! Exhaustive search oracle for small instances.

use super::LllInstance;
use crate::error::{Error, Result};

pub const DEFAULT_BRUTE_FORCE_CAP: u64 = 1 << 20;

/// Lexicographic search with variable 0 most significant. `Ok(None)` means
/// unsatisfiable.
pub fn brute_force_solve(inst: &LllInstance, cap: u64) -> Result<Option<Vec<u32>>> {
    let doms = inst.domains();
    let size: f64 = doms.iter().map(|&d| d as f64).product();
    if size > cap as f64 {
        return Err(Error::SearchSpace { size, cap });
    }
    let mut a = vec![0u32; doms.len()];
    let (mut values, mut counts) = (Vec::new(), Vec::new());
    loop {
        if (0..inst.event_count() as u32).all(|e| !inst.event_violated(e, &a, &mut values, &mut counts)) {
            return Ok(Some(a));
        }
        let mut i = a.len();
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            a[i] += 1;
            if a[i] < doms[i] {
                break;
            }
            a[i] = 0;
        }
    }
}

//! Seeded random evaluation points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `count` points uniformly from the box `lo..hi`, keeping only those
/// accepted by `accept`.
pub fn sample_box(
    rng: &mut ChaCha8Rng,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    mut accept: impl FnMut(&[f64]) -> bool,
) -> Result<Vec<Vec<f64>>> {
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
        return Err(Error::InvalidInput(format!("bad sampling box {lo:?}..{hi:?}")));
    }
    let max_tries = 1000 * count.max(1);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > max_tries {
            return Err(Error::InvalidInput(format!(
                "only {} of {count} admissible points found in {lo:?}..{hi:?}",
                out.len()
            )));
        }
        let p: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| rng.gen_range(l..h)).collect();
        if accept(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Minimum gradient magnitude for admissible points.
pub const GRADIENT_FLOOR: f64 = 1e-6;

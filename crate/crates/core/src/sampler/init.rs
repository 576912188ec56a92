//! Starting latent sequences.

use rand::Rng;

use crate::model::{LatentStates, StateSpace};

/// Probability of staying in a non-corridor state of the start chain.
const STAY: f64 = 0.8;

/// Random start sequences that avoid the absence state.
///
/// Each area follows a chain over the count states only: clone corridors are
/// kept, the last clone of each block stays with probability 0.8 and
/// otherwise moves to the other block. Avoiding absence guarantees the
/// starting likelihood is finite whatever the counts.
pub fn init_latent_chains<R: Rng + ?Sized>(
    n_areas: usize,
    n_times: usize,
    space: &StateSpace,
    rng: &mut R,
) -> LatentStates {
    let fe = space.first_endemic();
    let le = space.last_endemic();
    let fo = space.first_outbreak();
    let lo = space.last_outbreak();
    let mut st = LatentStates::filled(n_areas, n_times, fe as u8);
    for i in 0..n_areas {
        let path = st.area_mut(i);
        let mut s = rng.random_range(fe..=lo);
        path[0] = s as u8;
        for slot in path.iter_mut().skip(1) {
            s = if s == le {
                if rng.random::<f64>() < STAY { le } else { fo }
            } else if s == lo {
                if rng.random::<f64>() < STAY { lo } else { fe }
            } else {
                s + 1
            };
            *slot = s as u8;
        }
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn never_absent_and_corridors_hold() {
        let ss = StateSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = init_latent_chains(20, 50, &ss, &mut rng);
        assert!(st.as_slice().iter().all(|&s| s != 0));
        assert!(st.respects(&ss));
    }

    #[test]
    fn stay_frequency() {
        let ss = StateSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let st = init_latent_chains(1, 100_001, &ss, &mut rng);
        let p = st.area(0);
        let (mut stays, mut visits) = (0usize, 0usize);
        for w in p.windows(2) {
            let s = w[0] as usize;
            if s == ss.last_endemic() || s == ss.last_outbreak() {
                visits += 1;
                stays += usize::from(w[1] == w[0]);
            }
        }
        let f = stays as f64 / visits as f64;
        assert!((f - 0.8).abs() < 0.01, "{f}");
    }
}

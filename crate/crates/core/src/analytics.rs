//! Exact combinatorics of the symmetric single-bubble state `|Sₙ⟩`.

pub use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::{Error, Result};

/// A bubble of `n` flipped spins on a ring of `L` sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BubblePrediction {
    pub sites: usize,
    pub n: usize,
}

impl BubblePrediction {
    pub fn new(sites: usize, n: usize) -> Result<Self> {
        if n == 0 || n >= sites {
            return Err(Error::OutOfRange(format!("bubble size must lie in 1..{sites}, got {n}")));
        }
        Ok(BubblePrediction { sites, n })
    }

    /// `min(n, L − n)`.
    pub fn k(&self) -> usize {
        self.n.min(self.sites - self.n)
    }

    fn check_r(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.sites / 2 {
            return Err(Error::OutOfRange(format!(
                "distance must lie in 1..={}, got {r}",
                self.sites / 2
            )));
        }
        Ok(())
    }

    /// Number of site pairs at distance `r` with opposite spins.
    pub fn opposite_pairs(&self, r: usize) -> Result<usize> {
        self.check_r(r)?;
        let k = self.k();
        Ok(if r < k { 2 * r } else { 2 * k })
    }

    /// `⟨Z₀Z_r⟩ = (L − 2N)/L`.
    pub fn correlator(&self, r: usize) -> Result<Rational64> {
        let l = self.sites as i64;
        Ok(Rational64::new(l - 2 * self.opposite_pairs(r)? as i64, l))
    }

    /// `(L − 2n)/L`.
    pub fn magnetization(&self) -> Rational64 {
        let l = self.sites as i64;
        Rational64::new(l - 2 * self.n as i64, l)
    }

    /// `⟨Z₀Z_r⟩` for `r = 1..=⌊L/2⌋`.
    pub fn correlator_table(&self) -> Vec<Rational64> {
        (1..=self.sites / 2)
            .map(|r| self.correlator(r).expect("r in range"))
            .collect()
    }
}

pub fn opposite_pair_count(sites: usize, n: usize, r: usize) -> Result<usize> {
    BubblePrediction::new(sites, n)?.opposite_pairs(r)
}

pub fn predicted_correlator(sites: usize, n: usize, r: usize) -> Result<Rational64> {
    BubblePrediction::new(sites, n)?.correlator(r)
}

pub fn predicted_magnetization(sites: usize, n: usize) -> Result<Rational64> {
    Ok(BubblePrediction::new(sites, n)?.magnetization())
}

/// Float conversion at the output boundary.
pub fn to_f64(x: Rational64) -> f64 {
    x.to_f64().expect("small rationals convert")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Observable;
    use crate::lattice::Ring;
    use crate::states::{symmetric_pattern_state, FlipPattern};
    use proptest::prelude::*;

    fn r(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    #[test]
    fn three_bubble_on_eight_sites() {
        let counts: Vec<usize> = (1..=4).map(|r| opposite_pair_count(8, 3, r).unwrap()).collect();
        assert_eq!(counts, vec![2, 4, 6, 6]);
        let b = BubblePrediction::new(8, 3).unwrap();
        assert_eq!(b.correlator_table(), vec![r(1, 2), r(0, 1), r(-1, 2), r(-1, 2)]);
        assert_eq!(b.magnetization(), r(1, 4));
    }

    #[test]
    fn other_examples() {
        assert_eq!(opposite_pair_count(12, 6, 6).unwrap(), 12);
        assert_eq!(predicted_correlator(12, 6, 6).unwrap(), r(-1, 1));
        assert_eq!(predicted_magnetization(12, 3).unwrap(), r(1, 2));
        assert_eq!(predicted_magnetization(10, 5).unwrap(), r(0, 1));
        assert!(opposite_pair_count(8, 3, 5).is_err());
        assert!(opposite_pair_count(8, 0, 1).is_err());
        assert!(opposite_pair_count(8, 8, 1).is_err());
    }

    #[test]
    fn predictions_match_constructed_states() {
        for l in 3..=12usize {
            let ring = Ring::new(l).unwrap();
            for n in 1..l {
                let psi = symmetric_pattern_state(l, &FlipPattern::bubble(n)).unwrap();
                let b = BubblePrediction::new(l, n).unwrap();
                let m = Observable::Magnetization.expectation(ring, psi.amplitudes());
                assert!((m - to_f64(b.magnetization())).abs() < 1e-12);
                for r in 1..=l / 2 {
                    let c = Observable::Correlator(r).expectation(ring, psi.amplitudes());
                    assert!((c - to_f64(b.correlator(r).unwrap())).abs() < 1e-12, "{l} {n} {r}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn counts_are_symmetric_and_monotone(l in 3usize..40, n in 1usize..40) {
            prop_assume!(n < l);
            let mut last = 0;
            for r in 1..=l / 2 {
                let c = opposite_pair_count(l, n, r).unwrap();
                prop_assert_eq!(c, opposite_pair_count(l, l - n, r).unwrap());
                prop_assert!(c >= last);
                prop_assert!(c <= 2 * n.min(l - n));
                last = c;
            }
        }
    }
}

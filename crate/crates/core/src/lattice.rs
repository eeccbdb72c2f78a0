//! Spin configurations on a periodic ring.
//!
//! A configuration is an `L`-bit word: bit `i` set means site `i` points up
//! (`σᶻ = +1`). Sites are 0-based and wrap modulo `L`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest supported ring. At `L = 2` the periodic bond sum counts the one
/// bond twice.
pub const MIN_SITES: usize = 3;

/// Largest supported ring (`2^28` amplitudes per state).
pub const MAX_SITES: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfig(u32);

impl SpinConfig {
    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_up(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    /// `σᶻ` eigenvalue of `site`.
    #[inline]
    pub fn z(self, site: usize) -> f64 {
        if self.is_up(site) {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn flipped(self, site: usize) -> Self {
        SpinConfig(self.0 ^ (1 << site))
    }

    #[inline]
    pub fn up_count(self) -> u32 {
        self.0.count_ones()
    }
}

/// Periodic ring of `L` sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ring {
    sites: usize,
}

impl Ring {
    pub fn new(sites: usize) -> Result<Self> {
        if sites < MIN_SITES {
            return Err(Error::InvalidModel(format!(
                "ring needs at least {MIN_SITES} sites, got {sites}"
            )));
        }
        if sites > MAX_SITES {
            return Err(Error::ResourceCap { sites, cap: MAX_SITES });
        }
        Ok(Ring { sites })
    }

    #[inline]
    pub fn sites(self) -> usize {
        self.sites
    }

    /// Hilbert-space dimension `2^L`.
    #[inline]
    pub fn dim(self) -> usize {
        1 << self.sites
    }

    #[inline]
    pub fn mask(self) -> u32 {
        ((1u64 << self.sites) - 1) as u32
    }

    pub fn config(self, bits: u64) -> Result<SpinConfig> {
        if bits >> self.sites != 0 {
            return Err(Error::InvalidConfiguration {
                config: bits,
                max_site: self.sites - 1,
            });
        }
        Ok(SpinConfig(bits as u32))
    }

    pub fn all_up(self) -> SpinConfig {
        SpinConfig(self.mask())
    }

    pub fn all_down(self) -> SpinConfig {
        SpinConfig(0)
    }

    /// Reduce any (possibly negative) site label onto `0..L`.
    #[inline]
    pub fn site(self, i: isize) -> usize {
        i.rem_euclid(self.sites as isize) as usize
    }

    #[inline]
    pub fn minimal_distance(self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j) % self.sites;
        d.min(self.sites - d)
    }

    /// Cyclic rotation moving the spin on site `i` to site `i + shift`.
    #[inline]
    pub fn rotate(self, c: SpinConfig, shift: isize) -> SpinConfig {
        let s = self.site(shift) as u32;
        if s == 0 {
            return c;
        }
        let l = self.sites as u32;
        let b = c.0 as u64;
        SpinConfig((((b << s) | (b >> (l - s))) & self.mask() as u64) as u32)
    }

    pub fn translate(self, c: SpinConfig, shift: isize) -> Result<SpinConfig> {
        let c = self.config(c.0 as u64)?;
        Ok(self.rotate(c, shift))
    }

    /// Mean magnetization `(2·#up − L)/L` of a basis configuration.
    pub fn magnetization(self, c: SpinConfig) -> f64 {
        (2.0 * c.up_count() as f64 - self.sites as f64) / self.sites as f64
    }

    /// Configuration with every listed site flipped down from all-up.
    pub fn flip_down(self, sites: impl IntoIterator<Item = isize>) -> SpinConfig {
        let mut c = self.all_up();
        for s in sites {
            c.0 &= !(1 << self.site(s));
        }
        c
    }
}

/// Rotate the `L`-bit word `config` by `shift` sites.
pub fn translate(config: u64, shift: isize, sites: usize) -> Result<u64> {
    let ring = Ring::new(sites)?;
    let c = ring.config(config)?;
    Ok(ring.rotate(c, shift).bits() as u64)
}

pub fn minimal_distance(i: usize, j: usize, sites: usize) -> usize {
    let d = i.abs_diff(j) % sites;
    d.min(sites - d)
}

pub fn basis_magnetization(config: u64, sites: usize) -> Result<f64> {
    let ring = Ring::new(sites)?;
    Ok(ring.magnetization(ring.config(config)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn translate_examples() {
        assert_eq!(translate(0b0000_0111, 0, 8).unwrap(), 0b0000_0111);
        assert_eq!(translate(0b0000_0111, 8, 8).unwrap(), 0b0000_0111);
        assert_eq!(translate(0b0000_0111, 1, 8).unwrap(), 0b0000_1110);
        assert_eq!(translate(0b1000_0001, 1, 8).unwrap(), 0b0000_0011);
        assert_eq!(translate(0b0000_0011, -1, 8).unwrap(), 0b1000_0001);
    }

    #[test]
    fn translate_rejects_high_bits() {
        let err = translate(1 << 8, 1, 8).unwrap_err();
        assert!(matches!(err, Error::InvalidConfiguration { max_site: 7, .. }));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(minimal_distance(0, 0, 12), 0);
        assert_eq!(minimal_distance(0, 11, 12), 1);
        assert_eq!(minimal_distance(1, 4, 12), 3);
        assert_eq!(minimal_distance(0, 6, 12), 6);
    }

    #[test]
    fn magnetization_examples() {
        assert_eq!(basis_magnetization(0xff, 8).unwrap(), 1.0);
        assert_eq!(basis_magnetization(0, 8).unwrap(), -1.0);
        assert_eq!(basis_magnetization(0b1111_1000, 8).unwrap(), 0.25);
    }

    #[test]
    fn ring_bounds() {
        assert!(Ring::new(2).is_err());
        assert!(matches!(Ring::new(29), Err(Error::ResourceCap { .. })));
        assert!(Ring::new(28).is_ok());
    }

    proptest! {
        #[test]
        fn translation_composes(l in 3usize..=16, raw in any::<u32>(), a in -40isize..40, b in -40isize..40) {
            let ring = Ring::new(l).unwrap();
            let c = SpinConfig(raw & ring.mask());
            let once = ring.rotate(ring.rotate(c, a), b);
            prop_assert_eq!(once, ring.rotate(c, a + b));
            prop_assert_eq!(ring.rotate(once, -(a + b)), c);
            prop_assert_eq!(once.up_count(), c.up_count());
            prop_assert_eq!(once.bits() & !ring.mask(), 0);
        }

        #[test]
        fn translation_moves_site_i_to_i_plus_shift(l in 3usize..=16, raw in any::<u32>(), s in -20isize..20) {
            let ring = Ring::new(l).unwrap();
            let c = SpinConfig(raw & ring.mask());
            let t = ring.rotate(c, s);
            for i in 0..l {
                prop_assert_eq!(c.is_up(i), t.is_up(ring.site(i as isize + s)));
            }
        }

        #[test]
        fn distance_is_a_translation_invariant_metric(l in 3usize..=20, i in 0usize..20, j in 0usize..20, k in 0usize..20, s in 0usize..20) {
            let (i, j, k) = (i % l, j % l, k % l);
            let d = |a: usize, b: usize| minimal_distance(a, b, l);
            prop_assert_eq!(d(i, j), d(j, i));
            prop_assert!(d(i, k) <= d(i, j) + d(j, k));
            prop_assert_eq!(d((i + s) % l, (j + s) % l), d(i, j));
            if i != j {
                prop_assert!(d(i, j) >= 1 && d(i, j) <= l / 2);
            }
        }
    }
}

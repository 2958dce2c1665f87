use crate::error::{dim_err, Result};

/// Boolean `H × W` grid, row-major, unit pixel spacing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    h: usize,
    w: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w, bits: vec![false; h * w] }
    }

    pub fn from_bits(h: usize, w: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != h * w {
            return dim_err(format!("mask {h}x{w} needs {} bits, got {}", h * w, bits.len()));
        }
        Ok(Self { h, w, bits })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits = (0..h * w).map(|i| f(i / w, i % w)).collect();
        Self { h, w, bits }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.w + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.w + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.contains(&true)
    }

    /// Coordinates `(y, x)` of set pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.w;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i / w, i % w))
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a && b)
    }

    pub fn complement(&self) -> Self {
        Self { h: self.h, w: self.w, bits: self.bits.iter().map(|b| !b).collect() }
    }

    fn zip(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        self.check_same(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { h: self.h, w: self.w, bits })
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return dim_err(format!("mask shapes {:?} and {:?} differ", self.shape(), other.shape()));
        }
        Ok(())
    }

    /// LSB-first packing, eight pixels per byte.
    pub fn pack(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn unpack(h: usize, w: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != (h * w).div_ceil(8) {
            return dim_err(format!("packed mask for {h}x{w} has {} bytes", bytes.len()));
        }
        Ok(Self::from_fn(h, w, |y, x| {
            let i = y * w + x;
            bytes[i / 8] >> (i % 8) & 1 == 1
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn count_and_points() {
        let m = BinaryMask::from_fn(3, 4, |y, x| y == x);
        assert_eq!(m.count(), 3);
        assert_eq!(m.points().collect::<Vec<_>>(), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(!m.is_empty());
        assert!(BinaryMask::new(2, 2).is_empty());
    }

    #[test]
    fn shape_checks() {
        assert!(BinaryMask::from_bits(2, 2, vec![true; 3]).is_err());
        assert!(BinaryMask::new(2, 2).and(&BinaryMask::new(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn pack_roundtrip(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
            let m = BinaryMask::from_fn(h, w, |y, x| (seed >> ((y * w + x) % 64)) & 1 == 1);
            prop_assert_eq!(BinaryMask::unpack(h, w, &m.pack()).unwrap(), m);
        }
    }
}

use crate::error::{Error, Result};
use crate::image::{Dims, PixelLocation};

/// One probed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub location: PixelLocation,
    pub value: f64,
}

/// Append-only record of measured pixels plus a mask over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    dims: Dims,
    entries: Vec<Measurement>,
    mask: Vec<bool>,
    values: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(dims: Dims) -> Self {
        MeasurementSet {
            dims,
            entries: Vec::new(),
            mask: vec![false; dims.len()],
            values: vec![0.0; dims.len()],
        }
    }

    pub fn from_measurements(
        dims: Dims,
        items: impl IntoIterator<Item = (PixelLocation, f64)>,
    ) -> Result<Self> {
        let mut set = Self::new(dims);
        for (loc, v) in items {
            set.add_measurement(loc, v)?;
        }
        Ok(set)
    }

    /// Records a new measurement. Fails on a duplicate or out-of-bounds
    /// location without touching the set.
    pub fn add_measurement(&mut self, location: PixelLocation, value: f64) -> Result<()> {
        let i = self.dims.check(location)?;
        if self.mask[i] {
            return Err(Error::AlreadyMeasured(location));
        }
        self.mask[i] = true;
        self.values[i] = value;
        self.entries.push(Measurement { location, value });
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Number of measurements taken so far.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.dims.len()
    }

    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    pub fn latest(&self) -> Option<&Measurement> {
        self.entries.last()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_measured(&self, loc: PixelLocation) -> bool {
        self.dims.contains(loc) && self.mask[self.dims.index(loc)]
    }

    /// Measured value at a linear index, if any.
    pub fn value_at(&self, index: usize) -> Option<f64> {
        self.mask[index].then(|| self.values[index])
    }

    pub fn density(&self) -> f64 {
        self.len() as f64 / self.dims.len() as f64
    }

    /// Linear indices of unmeasured pixels in ascending order.
    pub fn unmeasured(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| (!m).then_some(i))
    }

    /// Mask as bytes: 255 for measured, 0 otherwise.
    pub fn mask_bytes(&self) -> Vec<u8> {
        self.mask.iter().map(|&m| if m { 255 } else { 0 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_measurement() {
        let mut s = MeasurementSet::new(Dims::new(3, 2));
        s.add_measurement(PixelLocation::new(0, 0), 7.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.mask()[0]);
        assert_eq!(s.value_at(0), Some(7.0));
    }

    #[test]
    fn duplicate_and_out_of_bounds() {
        let mut s = MeasurementSet::new(Dims::new(3, 2));
        s.add_measurement(PixelLocation::new(1, 2), 1.0).unwrap();
        assert!(matches!(
            s.add_measurement(PixelLocation::new(1, 2), 2.0),
            Err(Error::AlreadyMeasured(_))
        ));
        assert!(matches!(
            s.add_measurement(PixelLocation::new(2, 0), 2.0),
            Err(Error::OutOfBounds { .. })
        ));
        assert_eq!(s.len(), 1);
        assert_eq!(s.value_at(5), Some(1.0));
    }

    #[test]
    fn exhaust_grid() {
        let d = Dims::new(4, 3);
        let mut s = MeasurementSet::new(d);
        for i in 0..d.len() {
            s.add_measurement(d.location(i), i as f64).unwrap();
        }
        assert!(s.is_full());
        assert!(s.mask().iter().all(|&m| m));
        assert_eq!(s.unmeasured().count(), 0);
    }

    proptest! {
        #[test]
        fn append_only(order in Just((0..30usize).collect::<Vec<_>>()).prop_shuffle()) {
            let d = Dims::new(6, 5);
            let mut s = MeasurementSet::new(d);
            let mut history = Vec::new();
            for &i in &order {
                s.add_measurement(d.location(i), i as f64 * 0.5).unwrap();
                prop_assert_eq!(&s.entries()[..history.len()], &history[..]);
                history = s.entries().to_vec();
                prop_assert_eq!(s.len(), s.mask().iter().filter(|&&m| m).count());
            }
        }
    }
}

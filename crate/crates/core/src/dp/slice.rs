use super::{Bound, Precision};
use crate::model::LatticeSpec;

#[derive(Clone, Debug, PartialEq)]
pub enum SliceData {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

impl SliceData {
    pub fn len(&self) -> usize {
        match self {
            SliceData::F64(v) => v.len(),
            SliceData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision(&self) -> Precision {
        match self {
            SliceData::F64(_) => Precision::F64,
            SliceData::F32(_) => Precision::F32,
        }
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        match self {
            SliceData::F64(v) => v[idx],
            SliceData::F32(v) => v[idx] as f64,
        }
    }
}

/// Grid value function `J_k(bound, i, j, l / M)` at one time step.
///
/// Laid out row-major in `(i, j, l)` with `i, j in [-k, k]` and `l in [0, M]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSlice {
    /// Number of lattice steps of the run this slice belongs to.
    pub n: usize,
    pub k: usize,
    pub bound: Bound,
    pub m: usize,
    pub data: SliceData,
    pub digest: [u8; 32],
}

impl ValueSlice {
    pub fn width(&self) -> usize {
        LatticeSpec::width(self.k)
    }

    pub fn expected_len(k: usize, m: usize) -> usize {
        let w = LatticeSpec::width(k);
        w * w * (m + 1)
    }

    #[inline]
    pub fn index(&self, i: i32, j: i32, l: usize) -> usize {
        let k = self.k as i32;
        let w = self.width();
        ((i + k) as usize * w + (j + k) as usize) * (self.m + 1) + l
    }

    #[inline]
    pub fn get(&self, i: i32, j: i32, l: usize) -> f64 {
        self.data.get(self.index(i, j, l))
    }

    /// Value at the root node for `lambda = l / M`; meaningful when `k == 0`.
    pub fn root_value(&self, l: usize) -> f64 {
        self.get(0, 0, l)
    }

    /// The `lambda` column at node `(i, j)`.
    pub fn column(&self, i: i32, j: i32) -> Vec<f64> {
        (0..=self.m).map(|l| self.get(i, j, l)).collect()
    }

    /// Iterates over every stored value as `f64`.
    pub fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match &self.data {
            SliceData::F64(v) => Box::new(v.iter().copied()),
            SliceData::F32(v) => Box::new(v.iter().map(|x| *x as f64)),
        }
    }
}

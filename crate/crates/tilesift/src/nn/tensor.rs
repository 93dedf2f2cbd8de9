//! Dense 4-D tensors in (batch, channel, row, column) layout.

use super::{NnError, Scalar};

/// Row-major NCHW tensor. The value buffer is contiguous: index
/// `((n * C + c) * H + y) * W + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<S> {
    dims: [usize; 4],
    data: Vec<S>,
}

impl<S: Scalar> Tensor4<S> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        assert!(n * c * h * w > 0, "tensor dims must be nonzero");
        Self {
            dims: [n, c, h, w],
            data: vec![S::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<S>) -> Result<Self, NnError> {
        let expected: usize = dims.iter().product();
        if expected == 0 || data.len() != expected {
            return Err(NnError::ShapeMismatch(format!(
                "{} values do not fill dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> S {
        let [_, ch, h, w] = self.dims;
        self.data[((n * ch + c) * h + y) * w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut S {
        let [_, ch, h, w] = self.dims;
        &mut self.data[((n * ch + c) * h + y) * w + x]
    }

    /// The contiguous (h*w) slice holding sample `n`, channel `c`.
    pub(crate) fn plane(&self, n: usize, c: usize) -> &[S] {
        let [_, ch, h, w] = self.dims;
        let start = (n * ch + c) * h * w;
        &self.data[start..start + h * w]
    }

    /// Reinterpret the buffer under new dims of equal volume.
    pub fn reshaped(self, dims: [usize; 4]) -> Result<Self, NnError> {
        let expected: usize = dims.iter().product();
        if expected != self.data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "cannot reshape {:?} into {dims:?}",
                self.dims
            )));
        }
        Ok(Self {
            dims,
            data: self.data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major_nchw() {
        let t = Tensor4::<f32>::from_vec(
            [1, 2, 2, 3],
            (0..12).map(|v| v as f32).collect(),
        )
        .unwrap();
        assert_eq!(t.at(0, 0, 0, 0), 0.0);
        assert_eq!(t.at(0, 0, 1, 2), 5.0);
        assert_eq!(t.at(0, 1, 0, 0), 6.0);
        assert_eq!(t.plane(0, 1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn from_vec_validates_volume() {
        assert!(Tensor4::<f32>::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor4::<f32>::from_vec([1, 0, 2, 2], vec![]).is_err());
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor4::<f64>::from_vec([2, 1, 1, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let r = t.clone().reshaped([1, 6, 1, 1]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshaped([1, 5, 1, 1]).is_err());
    }
}

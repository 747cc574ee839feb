use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned 2-D FFT for a fixed grid size. The inverse is normalized.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, data: &mut Array2<Complex64>, rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.dim(), (self.height, self.width));
        if !data.is_standard_layout() {
            *data = data.as_standard_layout().into_owned();
        }
        rows.process(data.as_slice_mut().expect("standard layout"));
        let mut t = data.t().as_standard_layout().into_owned();
        cols.process(t.as_slice_mut().expect("standard layout"));
        data.assign(&t.t());
    }

    pub fn forward(&self, data: &mut Array2<Complex64>) {
        let (r, c) = (self.row_fwd.clone(), self.col_fwd.clone());
        self.transform(data, &r, &c);
    }

    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        let (r, c) = (self.row_inv.clone(), self.col_inv.clone());
        self.transform(data, &r, &c);
        let scale = 1.0 / (self.height * self.width) as f64;
        data.mapv_inplace(|v| v * scale);
    }

    pub fn forward_real(&self, x: &Array2<f64>) -> Array2<Complex64> {
        let mut data = x.mapv(|v| Complex64::new(v, 0.0));
        self.forward(&mut data);
        data
    }

    pub fn inverse_real(&self, mut data: Array2<Complex64>) -> Array2<f64> {
        self.inverse(&mut data);
        data.mapv(|v| v.re)
    }
}

//! Orthonormal type-I discrete sine transform on the interior nodes.
//!
//! `S_jk = sqrt(2/M) sin(pi j k / M)` for `j, k = 1..M-1`. `S` is symmetric
//! and its own inverse, and it diagonalizes both the central-difference
//! Laplacian and the sine-spectral matrix.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct SineTransform {
    cells: usize,
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform").field("cells", &self.cells).finish()
    }
}

impl SineTransform {
    /// Transform for vectors of length `cells - 1`.
    pub fn new(cells: usize) -> Self {
        assert!(cells >= 2, "sine transform needs at least 2 cells");
        let fft = FftPlanner::new().plan_fft_forward(2 * cells);
        SineTransform {
            cells,
            fft,
            scale: (2.0 / cells as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place orthonormal transform of a complex vector. Real and
    /// imaginary parts are transformed independently.
    pub fn apply_complex(&self, x: &mut [Complex64]) {
        let m = self.cells;
        assert_eq!(x.len(), m - 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * m];
        for j in 1..m {
            buf[j] = x[j - 1];
            buf[2 * m - j] = -x[j - 1];
        }
        self.fft.process(&mut buf);
        // Y_k = -2i sum_j x_j sin(pi j k / M)
        let f = 0.5 * self.scale;
        for k in 1..m {
            let y = buf[k];
            x[k - 1] = Complex64::new(-y.im * f, y.re * f);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply_complex(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }

    /// Transforms two real vectors with one FFT.
    pub fn apply_pair(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut c: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.apply_complex(&mut c);
        (c.iter().map(|z| z.re).collect(), c.iter().map(|z| z.im).collect())
    }
}

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest Stokes eigenvalue on the 2pi-periodic torus.
pub const LAMBDA_1: f64 = 1.0;

/// One divergence-free Fourier mode `e_k(x) = p_k exp(i k.x) / (2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub k: [i32; 2],
    /// Stokes eigenvalue `|k|^2`.
    pub lambda: f64,
    /// Unit polarization, `+-k_perp/|k|` with the sign chosen so that `p_{-k} = p_k`.
    pub polarization: [f64; 2],
}

impl Mode {
    fn new(k: [i32; 2]) -> Self {
        let lambda = (k[0] * k[0] + k[1] * k[1]) as f64;
        let norm = lambda.sqrt();
        let sign = if is_upper(k) { 1.0 } else { -1.0 };
        Mode {
            k,
            lambda,
            polarization: [sign * -(k[1] as f64) / norm, sign * k[0] as f64 / norm],
        }
    }
}

/// Upper half plane representative of the pair `{k, -k}`.
pub(crate) fn is_upper(k: [i32; 2]) -> bool {
    k[1] > 0 || (k[1] == 0 && k[0] > 0)
}

/// Minimum collocation resolution that dealiases products of order `order`.
pub fn required_grid(k_max: usize, order: usize) -> usize {
    (order + 1) * k_max
}

/// Order of the pointwise product formed by the damping operator for exponent `r`.
pub fn damping_order(r: f64) -> usize {
    r.max(2.0).ceil() as usize
}

/// Divergence-free Fourier basis on the 2pi torus together with the
/// collocation grid used for pseudo-spectral products.
pub struct StokesBasis {
    k_max: usize,
    grid: usize,
    modes: Vec<Mode>,
    partner: Vec<usize>,
    reps: Vec<usize>,
    grid_index: Vec<usize>,
    dealias_mask: Vec<bool>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StokesBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StokesBasis")
            .field("k_max", &self.k_max)
            .field("grid", &self.grid)
            .field("modes", &self.modes.len())
            .finish()
    }
}

impl StokesBasis {
    /// Enumerates every nonzero `k` with `|k|_inf <= k_max`, sorted by eigenvalue.
    ///
    /// The grid must dealias the quadratic convection term, i.e.
    /// `grid_size >= 3 * k_max`.
    pub fn new(k_max: usize, grid_size: usize) -> Result<Arc<Self>> {
        Self::with_order(k_max, grid_size, 2)
    }

    /// Like [`StokesBasis::new`] but additionally requires dealiasing for
    /// products of order `order` (use [`damping_order`] for a damping exponent).
    pub fn with_order(k_max: usize, grid_size: usize, order: usize) -> Result<Arc<Self>> {
        if k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        let order = order.max(2);
        let required = required_grid(k_max, order);
        if grid_size < required {
            return Err(Error::Dealias {
                k_max,
                grid: grid_size,
                order,
                required,
            });
        }

        let km = k_max as i32;
        let mut modes: Vec<Mode> = (-km..=km)
            .flat_map(|a| (-km..=km).map(move |b| [a, b]))
            .filter(|k| *k != [0, 0])
            .map(Mode::new)
            .collect();
        modes.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap().then(a.k.cmp(&b.k)));

        let m = grid_size as i32;
        let wrap = |v: i32| v.rem_euclid(m) as usize;
        let grid_index: Vec<usize> = modes
            .iter()
            .map(|md| wrap(md.k[0]) * grid_size + wrap(md.k[1]))
            .collect();
        let partner: Vec<usize> = modes
            .iter()
            .map(|md| {
                let neg = [-md.k[0], -md.k[1]];
                modes.iter().position(|o| o.k == neg).unwrap()
            })
            .collect();
        let reps = (0..modes.len()).filter(|&i| is_upper(modes[i].k)).collect();

        let mut dealias_mask = vec![false; grid_size * grid_size];
        for &g in &grid_index {
            dealias_mask[g] = true;
        }

        let mut planner = FftPlanner::new();
        Ok(Arc::new(StokesBasis {
            k_max,
            grid: grid_size,
            fft_fwd: planner.plan_fft_forward(grid_size),
            fft_inv: planner.plan_fft_inverse(grid_size),
            modes,
            partner,
            reps,
            grid_index,
            dealias_mask,
        }))
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.lambda)
    }

    pub fn lambda_1(&self) -> f64 {
        self.modes[0].lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.modes.last().unwrap().lambda
    }

    /// Index of the mode `-k` for mode index `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }

    /// Indices of the upper half plane representatives, one per `{k, -k}` pair.
    pub fn representatives(&self) -> &[usize] {
        &self.reps
    }

    pub fn index_of(&self, k: [i32; 2]) -> Option<usize> {
        self.modes.iter().position(|m| m.k == k)
    }

    /// Retained physical wavenumbers on the `grid x grid` spectral lattice.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    /// Largest product order this grid dealiases.
    pub fn max_order(&self) -> usize {
        self.grid / self.k_max - 1
    }

    pub fn check_order(&self, order: usize) -> Result<()> {
        let required = required_grid(self.k_max, order);
        if self.grid < required {
            return Err(Error::Dealias {
                k_max: self.k_max,
                grid: self.grid,
                order,
                required,
            });
        }
        Ok(())
    }

    /// Two bases are interchangeable when they enumerate the same modes on the same grid.
    pub fn same_as(&self, other: &StokesBasis) -> bool {
        std::ptr::eq(self, other) || (self.k_max == other.k_max && self.grid == other.grid)
    }

    /// Quadrature weight of one collocation point, `(2 pi / M)^2`.
    pub fn cell_area(&self) -> f64 {
        let h = 2.0 * PI / self.grid as f64;
        h * h
    }

    /// Physical coordinates of grid node `j`.
    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.grid as f64
    }

    /// Packed physical values `w1 + i w2` of the real vector field whose
    /// per-mode vector amplitudes are `amp(i) -> [c1, c2]`.
    pub(crate) fn synthesize<F>(&self, amp: F) -> Vec<Complex64>
    where
        F: Fn(usize) -> [Complex64; 2],
    {
        let n = self.grid * self.grid;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let norm = 1.0 / (2.0 * PI);
        let i = Complex64::new(0.0, 1.0);
        for (idx, &g) in self.grid_index.iter().enumerate() {
            let [c1, c2] = amp(idx);
            buf[g] += (c1 + i * c2) * norm;
        }
        self.fft2(&mut buf, true);
        buf
    }

    /// Divergence-free coefficients `<w, e_k>` of the packed real vector
    /// field `w1 + i w2`; discards everything outside the mode list.
    pub(crate) fn analyze(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        let m = self.grid;
        self.fft2(&mut buf, false);
        let scale = 2.0 * PI / (m * m) as f64;
        self.modes
            .iter()
            .enumerate()
            .map(|(idx, md)| {
                let g = self.grid_index[idx];
                let gn = self.grid_index[self.partner[idx]];
                let z = buf[g];
                let zn = buf[gn].conj();
                let w1 = (z + zn) * 0.5;
                let w2 = (z - zn) * Complex64::new(0.0, -0.5);
                (w1 * md.polarization[0] + w2 * md.polarization[1]) * scale
            })
            .collect()
    }

    /// Unnormalized 2D DFT, row-major `buf[i1 * M + i2]`.
    pub(crate) fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.grid;
        let fft = if inverse {
            &self.fft_inv
        } else {
            &self.fft_fwd
        };
        fft.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); m * m];
        transpose(buf, &mut t, m);
        fft.process(&mut t);
        transpose(&t, buf, m);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    for r in 0..m {
        for c in 0..m {
            dst[c * m + r] = src[r * m + c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_basis_enumerates_eight_modes() {
        let b = StokesBasis::new(1, 8).unwrap();
        assert_eq!(b.len(), 8);
        let lams: Vec<f64> = b.eigenvalues().collect();
        assert_eq!(lams, vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(b.lambda_1(), LAMBDA_1);
    }

    #[test]
    fn undersized_grid_is_rejected() {
        assert!(matches!(
            StokesBasis::new(1, 2),
            Err(Error::Dealias { required: 3, .. })
        ));
        assert!(StokesBasis::with_order(4, 24, 5).is_ok());
        assert!(StokesBasis::with_order(4, 24, 6).is_err());
    }

    #[test]
    fn modes_are_divergence_free_and_paired() {
        let b = StokesBasis::new(4, 24).unwrap();
        assert_eq!(b.len(), 80);
        assert_eq!(b.representatives().len(), 40);
        let mut prev = 0.0;
        for (i, md) in b.modes().iter().enumerate() {
            // the polarization is a rescaling of the integer vector k_perp
            let kp = [-md.k[1], md.k[0]];
            assert_eq!(md.k[0] * kp[0] + md.k[1] * kp[1], 0);
            let s = md.lambda.sqrt();
            assert!((md.polarization[0].abs() * s - kp[0].abs() as f64).abs() < 1e-14);
            assert!((md.polarization[1].abs() * s - kp[1].abs() as f64).abs() < 1e-14);
            let dot = md.k[0] as f64 * md.polarization[0] + md.k[1] as f64 * md.polarization[1];
            assert!(dot.abs() < 1e-15);
            let pn = md.polarization[0].hypot(md.polarization[1]);
            assert!((pn - 1.0).abs() < 1e-15);
            assert!(md.lambda >= prev);
            prev = md.lambda;
            let j = b.partner(i);
            assert_eq!(b.modes()[j].k, [-md.k[0], -md.k[1]]);
            assert_eq!(b.modes()[j].polarization, md.polarization);
            assert_eq!(b.partner(j), i);
        }
        assert_eq!(b.lambda_1(), 1.0);
        assert_eq!(b.lambda_max(), 32.0);
    }

    #[test]
    fn damping_order_rounds_up() {
        assert_eq!(damping_order(1.0), 2);
        assert_eq!(damping_order(3.0), 3);
        assert_eq!(damping_order(3.5), 4);
    }
}

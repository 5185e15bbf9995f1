//! Symmetric skyline (variable band) matrix with an in-place `L·D·Lᵀ`
//! factorization.
//!
//! Column `j` stores rows `first[j]..=j`. No pivoting is done; the number
//! of negative pivots equals the number of negative eigenvalues, which the
//! solver uses as its stability test.

#[derive(Debug, Clone)]
pub struct Skyline {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Factorized {
    sky: Skyline,
    pub negative_pivots: usize,
}

impl Skyline {
    /// `first[j]` is the smallest row index with a structural entry in
    /// column `j` (at most `j`).
    pub fn with_profile(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (j, &m) in first.iter().enumerate() {
            debug_assert!(m <= j);
            offset.push(total);
            total += j - m + 1;
        }
        offset.push(total);
        Self {
            first,
            offset,
            data: vec![0.0; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && i >= self.first[j]);
        self.offset[j] + (i - self.first[j])
    }

    /// Adds `v` to entry `(i, j)`; only the upper triangle is stored, so
    /// callers pass each symmetric pair once.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = self.index(i, j);
        self.data[k] += v;
    }

    /// Consumes the matrix and factorizes it; `None` on a (near) zero pivot.
    pub fn factorize(mut self) -> Option<Factorized> {
        let n = self.dim();
        let scale = (0..n)
            .map(|j| self.data[self.index(j, j)].abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut negative = 0;
        for j in 0..n {
            let mj = self.first[j];
            for i in mj..j {
                let mi = self.first[i];
                let start = mi.max(mj);
                let mut sum = 0.0;
                for r in start..i {
                    sum += self.data[self.index(r, i)] * self.data[self.index(r, j)];
                }
                let k = self.index(i, j);
                self.data[k] -= sum;
            }
            let mut diag = self.data[self.index(j, j)];
            for i in mj..j {
                let k = self.index(i, j);
                let g = self.data[k];
                let l = g / self.data[self.index(i, i)];
                diag -= l * g;
                self.data[k] = l;
            }
            if !diag.is_finite() || diag.abs() <= 1e-14 * scale {
                return None;
            }
            if diag < 0.0 {
                negative += 1;
            }
            let k = self.index(j, j);
            self.data[k] = diag;
        }
        Some(Factorized {
            sky: self,
            negative_pivots: negative,
        })
    }
}

impl Factorized {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let s = &self.sky;
        let n = s.dim();
        let mut x = rhs.to_vec();
        for j in 0..n {
            let mut sum = 0.0;
            for r in s.first[j]..j {
                sum += s.data[s.index(r, j)] * x[r];
            }
            x[j] -= sum;
        }
        for j in 0..n {
            x[j] /= s.data[s.index(j, j)];
        }
        self.back_substitute(&mut x);
        x
    }

    fn back_substitute(&self, x: &mut [f64]) {
        let s = &self.sky;
        for j in (0..s.dim()).rev() {
            let xj = x[j];
            for r in s.first[j]..j {
                x[r] -= s.data[s.index(r, j)] * xj;
            }
        }
    }

    /// Sum of the directions `L⁻ᵀ e_j` over all negative pivots `j`; each
    /// has curvature `d_j < 0`, so the result points downhill in energy.
    pub fn negative_curvature_direction(&self) -> Option<Vec<f64>> {
        let s = &self.sky;
        let n = s.dim();
        let mut x = vec![0.0; n];
        let mut any = false;
        for j in 0..n {
            if s.data[s.index(j, j)] < 0.0 {
                x[j] = 1.0;
                any = true;
            }
        }
        if !any {
            return None;
        }
        self.back_substitute(&mut x);
        Some(x)
    }
}

//! Real roots of cubic polynomials `a·x³ + b·x² + c·x + d`.
//!
//! Roots come from the depressed-cubic closed form (Cardano for a single
//! real root, the trigonometric form for three) and are then polished with
//! a couple of Newton steps on the original polynomial.

pub type Roots = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        ((self.a * x + self.b) * x + self.c) * x + self.d
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (3.0 * self.a * x + 2.0 * self.b) * x + self.c
    }

    /// All real roots in ascending order, repeated roots reported once.
    ///
    /// Requires `a != 0`.
    pub fn real_roots(&self) -> Roots {
        debug_assert!(self.a != 0.0);
        let a2 = self.b / self.a;
        let a1 = self.c / self.a;
        let a0 = self.d / self.a;

        let shift = a2 / 3.0;
        let p = a1 - a2 * shift;
        let q = 2.0 * shift * shift * shift - shift * a1 + a0;

        let mut roots = Roots::with_capacity(3);
        if p == 0.0 && q == 0.0 {
            roots.push(-shift);
        } else {
            let half_q = 0.5 * q;
            let third_p = p / 3.0;
            let disc = half_q * half_q + third_p * third_p * third_p;
            if disc > 0.0 {
                // Pick the cube root that avoids cancellation.
                let u = (-half_q - half_q.signum() * disc.sqrt()).cbrt();
                let y = if u == 0.0 { 0.0 } else { u - third_p / u };
                roots.push(y - shift);
            } else if disc == 0.0 {
                let u = (-half_q).cbrt();
                roots.push(2.0 * u - shift);
                roots.push(-u - shift);
            } else {
                // Three distinct real roots, p < 0.
                let m = 2.0 * (-third_p).sqrt();
                let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
                let phi = arg.acos() / 3.0;
                for k in 0..3 {
                    let y = m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                    roots.push(y - shift);
                }
            }
        }

        for r in roots.iter_mut() {
            *r = self.polish(*r);
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
        roots
    }

    /// The real root closest to `seed`.
    pub fn root_nearest(&self, seed: f64) -> f64 {
        self.real_roots()
            .into_iter()
            .min_by(|x, y| (x - seed).abs().total_cmp(&(y - seed).abs()))
            .expect("a cubic always has a real root")
    }

    fn polish(&self, mut x: f64) -> f64 {
        for _ in 0..3 {
            let fx = self.eval(x);
            let dfx = self.derivative(x);
            if fx == 0.0 || dfx == 0.0 || !dfx.is_finite() {
                break;
            }
            let next = x - fx / dfx;
            // Newton can only help if it reduces the residual.
            if self.eval(next).abs() < fx.abs() {
                x = next;
            } else {
                break;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(r: [f64; 3]) -> Cubic {
        // (x - r0)(x - r1)(x - r2)
        let b = -(r[0] + r[1] + r[2]);
        let c = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let d = -r[0] * r[1] * r[2];
        Cubic::new(1.0, b, c, d)
    }

    #[test]
    fn three_distinct_roots() {
        let roots = from_roots([-3.0, 0.5, 2.0]).real_roots();
        assert_eq!(roots.len(), 3);
        for (got, want) in roots.iter().zip([-3.0, 0.5, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn single_real_root() {
        // (x - 2)(x² + 1)
        let cubic = Cubic::new(1.0, -2.0, 1.0, -2.0);
        let roots = cubic.real_roots();
        assert_eq!(roots.as_slice(), &[2.0]);
    }

    #[test]
    fn triple_root_at_zero() {
        let roots = Cubic::new(3.0, 0.0, 0.0, 0.0).real_roots();
        assert_eq!(roots.as_slice(), &[0.0]);
    }

    #[test]
    fn double_root() {
        let roots = from_roots([1.0, 1.0, -2.0]).real_roots();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 2.0).abs() < 1e-12);
        assert!((roots[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn nearest_root_selection() {
        let cubic = from_roots([-3.0, 0.5, 2.0]);
        assert!((cubic.root_nearest(1.4) - 2.0).abs() < 1e-12);
        assert!((cubic.root_nearest(-0.9) - 0.5).abs() < 1e-12);
    }
}

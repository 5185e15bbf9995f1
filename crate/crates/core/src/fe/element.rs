//! Two-node corotational Euler–Bernoulli frame element.
//!
//! The rigid rotation of the chord is split off and the remaining local
//! deformation (chord stretch, two end rotations relative to the chord) is
//! treated with the linear Hermitian beam. Element DOFs are
//! `[u1, v1, θ1, u2, v2, θ2]` in global axes.

use nalgebra::{SMatrix, SVector};

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorotationalBeam {
    /// Undeformed chord `(dx, dy)` from node 1 to node 2.
    pub chord: [f64; 2],
    pub youngs_modulus: f64,
    pub area: f64,
    pub inertia: f64,
}

/// Local resultants and kinematics of a deformed element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalState {
    pub stretch: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub axial: f64,
    pub moment1: f64,
    pub moment2: f64,
    pub length: f64,
    pub cos: f64,
    pub sin: f64,
}

impl CorotationalBeam {
    pub fn initial_length(&self) -> f64 {
        self.chord[0].hypot(self.chord[1])
    }

    pub fn local_state(&self, u: &Vec6) -> LocalState {
        let [dx0, dy0] = self.chord;
        let l0 = self.initial_length();
        let du = u[3] - u[0];
        let dv = u[4] - u[1];
        let dx = dx0 + du;
        let dy = dy0 + dv;
        let length = dx.hypot(dy);
        // l² - L0² without cancellation.
        let stretch = ((2.0 * dx0 + du) * du + (2.0 * dy0 + dv) * dv) / (length + l0);

        let (c0, s0) = (dx0 / l0, dy0 / l0);
        let (cos, sin) = (dx / length, dy / length);
        let rigid = (c0 * sin - s0 * cos).atan2(c0 * cos + s0 * sin);
        let theta1 = u[2] - rigid;
        let theta2 = u[5] - rigid;

        let ea = self.youngs_modulus * self.area / l0;
        let ei = 2.0 * self.youngs_modulus * self.inertia / l0;
        LocalState {
            stretch,
            theta1,
            theta2,
            axial: ea * stretch,
            moment1: ei * (2.0 * theta1 + theta2),
            moment2: ei * (theta1 + 2.0 * theta2),
            length,
            cos,
            sin,
        }
    }

    /// Internal force vector and consistent tangent stiffness.
    pub fn internal_force_and_tangent(&self, u: &Vec6) -> (Vec6, Mat6) {
        let st = self.local_state(u);
        let (c, s, l) = (st.cos, st.sin, st.length);
        let r = Vec6::from([-c, -s, 0.0, c, s, 0.0]);
        let z = Vec6::from([s, -c, 0.0, -s, c, 0.0]);

        let mut b = SMatrix::<f64, 3, 6>::zeros();
        b.set_row(0, &r.transpose());
        let mut row = -z / l;
        row[2] = 1.0;
        b.set_row(1, &row.transpose());
        let mut row = -z / l;
        row[5] = 1.0;
        b.set_row(2, &row.transpose());

        let l0 = self.initial_length();
        let ea = self.youngs_modulus * self.area / l0;
        let ei = 2.0 * self.youngs_modulus * self.inertia / l0;
        let d = SMatrix::<f64, 3, 3>::new(ea, 0.0, 0.0, 0.0, 2.0 * ei, ei, 0.0, ei, 2.0 * ei);

        let resultants = SVector::<f64, 3>::new(st.axial, st.moment1, st.moment2);
        let force = b.transpose() * resultants;

        let zz = z * z.transpose();
        let rz = r * z.transpose();
        let tangent = b.transpose() * d * b
            + zz * (st.axial / l)
            + (rz + rz.transpose()) * ((st.moment1 + st.moment2) / (l * l));
        (force, tangent)
    }

    pub fn strain_energy(&self, u: &Vec6) -> f64 {
        let st = self.local_state(u);
        let l0 = self.initial_length();
        let ea = self.youngs_modulus * self.area / l0;
        let ei = 2.0 * self.youngs_modulus * self.inertia / l0;
        0.5 * ea * st.stretch * st.stretch
            + ei * (st.theta1 * st.theta1 + st.theta1 * st.theta2 + st.theta2 * st.theta2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn element() -> CorotationalBeam {
        let angle = 0.3f64;
        CorotationalBeam {
            chord: [2.5 * angle.cos(), 2.5 * angle.sin()],
            youngs_modulus: 1800.0,
            area: 6.0,
            inertia: 0.72,
        }
    }

    fn state() -> Vec6 {
        Vec6::from([0.01, -0.02, 0.05, -0.03, 0.12, -0.08])
    }

    #[test]
    fn rigid_rotation_is_force_free() {
        let el = element();
        for &rot in &[0.1, 0.7, 1.5, -2.0, 3.0] {
            let (sin, cos) = f64::sin_cos(rot);
            let [dx, dy] = el.chord;
            // Rotate node 2 about node 1 and translate both.
            let u = Vec6::from([
                0.3,
                -0.4,
                rot,
                0.3 + cos * dx - sin * dy - dx,
                -0.4 + sin * dx + cos * dy - dy,
                rot,
            ]);
            let (f, _) = el.internal_force_and_tangent(&u);
            assert!(f.amax() < 1e-10, "rot {rot}: {f}");
            assert!(el.strain_energy(&u) < 1e-20);
        }
    }

    #[test]
    fn force_is_energy_gradient() {
        let el = element();
        let u = state();
        let (f, _) = el.internal_force_and_tangent(&u);
        let h = 1e-6;
        for i in 0..6 {
            let mut up = u;
            let mut um = u;
            up[i] += h;
            um[i] -= h;
            let fd = (el.strain_energy(&up) - el.strain_energy(&um)) / (2.0 * h);
            assert!((fd - f[i]).abs() < 1e-5 * f.amax().max(1.0), "dof {i}: {fd} vs {}", f[i]);
        }
    }

    #[test]
    fn tangent_is_force_jacobian() {
        let el = element();
        let u = state();
        let (_, k) = el.internal_force_and_tangent(&u);
        let h = 1e-7;
        for j in 0..6 {
            let mut up = u;
            let mut um = u;
            up[j] += h;
            um[j] -= h;
            let (fp, _) = el.internal_force_and_tangent(&up);
            let (fm, _) = el.internal_force_and_tangent(&um);
            let col = (fp - fm) / (2.0 * h);
            for i in 0..6 {
                assert!(
                    (col[i] - k[(i, j)]).abs() < 1e-4 * k.amax(),
                    "K[{i},{j}] = {} vs fd {}",
                    k[(i, j)],
                    col[i]
                );
            }
        }
        assert!((k - k.transpose()).amax() < 1e-9 * k.amax());
    }

    #[test]
    fn small_displacement_tangent_matches_linear_frame() {
        let el = CorotationalBeam {
            chord: [2.0, 0.0],
            youngs_modulus: 200.0,
            area: 3.0,
            inertia: 0.5,
        };
        let (_, k) = el.internal_force_and_tangent(&Vec6::zeros());
        let l = 2.0;
        let ei = 200.0 * 0.5;
        assert!((k[(0, 0)] - 200.0 * 3.0 / l).abs() < 1e-9);
        assert!((k[(1, 1)] - 12.0 * ei / l.powi(3)).abs() < 1e-9);
        assert!((k[(1, 2)] - 6.0 * ei / l.powi(2)).abs() < 1e-9);
        assert!((k[(2, 2)] - 4.0 * ei / l).abs() < 1e-9);
        assert!((k[(2, 5)] - 2.0 * ei / l).abs() < 1e-9);
    }
}

//! Geometrically nonlinear planar frame solver used as an independent check
//! on the closed-form flexure model.
//!
//! Frames are built from corotational beam elements and linear springs.
//! Motion is imposed by prescribing displacements proportional to a single
//! control parameter, and equilibrium is followed step by step with
//! Newton's method, step bisection and an arc-length fallback.

mod compare;
mod element;
mod mesh;
mod skyline;
mod solver;

pub use compare::{
    compare_curves, path_to_curve, verify_against_closed_form, CurveComparison, VerifyReport,
};
pub use element::{CorotationalBeam, LocalState};
pub use mesh::{build_multibeam_assembly, build_vbeam_mesh, MultibeamModel};
pub use solver::{
    solve_guided_sweep, solve_multibeam_assembly, write_path_csv, EquilibriumPath, FeSettings,
    NonConvergence, PathStep, Reaction, PATH_CSV_HEADER,
};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dof {
    Ux = 0,
    Uy = 1,
    Rz = 2,
}

impl Dof {
    pub const ALL: [Dof; 3] = [Dof::Ux, Dof::Uy, Dof::Rz];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Beam {
        node_i: usize,
        node_j: usize,
        youngs_modulus: f64,
        area: f64,
        inertia: f64,
    },
    /// Linear spring coupling one DOF of two nodes.
    Spring {
        node_i: usize,
        node_j: usize,
        dof: Dof,
        stiffness: f64,
    },
}

/// A DOF driven as `scale · control`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prescribed {
    pub node: usize,
    pub dof: Dof,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameModel {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    /// Per-node `[u_x, u_y, rotation]` flags; `true` holds the DOF at zero.
    pub fixed: Vec<[bool; 3]>,
    pub prescribed: Vec<Prescribed>,
}

impl FrameModel {
    pub fn add_node(&mut self, x: f64, y: f64) -> usize {
        self.nodes.push(Node { x, y });
        self.fixed.push([false; 3]);
        self.nodes.len() - 1
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.fixed.len() == self.nodes.len(),
            "frame model needs one constraint record per node",
        )?;
        ensure(
            self.fixed.iter().any(|f| f.iter().all(|&b| b)),
            "frame model needs at least one fully constrained node",
        )?;
        let n = self.nodes.len();
        for el in &self.elements {
            match *el {
                Element::Beam {
                    node_i,
                    node_j,
                    youngs_modulus,
                    area,
                    inertia,
                } => {
                    ensure(node_i < n && node_j < n, "element references a missing node")?;
                    let (a, b) = (self.nodes[node_i], self.nodes[node_j]);
                    ensure(
                        (b.x - a.x).hypot(b.y - a.y) > 0.0,
                        "beam elements must have non-zero length",
                    )?;
                    ensure(
                        youngs_modulus > 0.0 && area > 0.0 && inertia > 0.0,
                        "beam section properties must be positive",
                    )?;
                }
                Element::Spring {
                    node_i,
                    node_j,
                    stiffness,
                    ..
                } => {
                    ensure(node_i < n && node_j < n, "spring references a missing node")?;
                    ensure(
                        node_i != node_j && stiffness > 0.0,
                        "springs need two distinct nodes and positive stiffness",
                    )?;
                }
            }
        }
        for p in &self.prescribed {
            ensure(p.node < n, "prescribed displacement references a missing node")?;
            ensure(
                !self.fixed[p.node][p.dof as usize],
                "a DOF cannot be both fixed and prescribed",
            )?;
            ensure(p.scale.is_finite(), "prescribed scale must be finite")?;
        }
        Ok(())
    }

    pub(crate) fn beam(&self, el: &Element) -> Option<(CorotationalBeam, [usize; 2])> {
        match *el {
            Element::Beam {
                node_i,
                node_j,
                youngs_modulus,
                area,
                inertia,
            } => {
                let (a, b) = (self.nodes[node_i], self.nodes[node_j]);
                Some((
                    CorotationalBeam {
                        chord: [b.x - a.x, b.y - a.y],
                        youngs_modulus,
                        area,
                        inertia,
                    },
                    [node_i, node_j],
                ))
            }
            Element::Spring { .. } => None,
        }
    }

    /// Shortest beam element, used to size branch-switching perturbations.
    pub(crate) fn min_beam_length(&self) -> f64 {
        self.elements
            .iter()
            .filter_map(|el| self.beam(el))
            .map(|(b, _)| b.initial_length())
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_models() {
        let mut m = FrameModel::default();
        let a = m.add_node(0.0, 0.0);
        let b = m.add_node(1.0, 0.0);
        m.elements.push(Element::Beam {
            node_i: a,
            node_j: b,
            youngs_modulus: 1.0,
            area: 1.0,
            inertia: 1.0,
        });
        assert!(m.validate().is_err(), "no constrained node");
        m.fixed[a] = [true; 3];
        m.validate().unwrap();

        let mut bad = m.clone();
        bad.elements.push(Element::Beam {
            node_i: a,
            node_j: 7,
            youngs_modulus: 1.0,
            area: 1.0,
            inertia: 1.0,
        });
        assert!(bad.validate().is_err());

        let mut bad = m.clone();
        let c = bad.add_node(0.0, 0.0);
        bad.elements.push(Element::Beam {
            node_i: a,
            node_j: c,
            youngs_modulus: 1.0,
            area: 1.0,
            inertia: 1.0,
        });
        assert!(bad.validate().unwrap_err().to_string().contains("non-zero length"));

        let mut bad = m.clone();
        bad.prescribed.push(Prescribed {
            node: a,
            dof: Dof::Uy,
            scale: 1.0,
        });
        assert!(bad.validate().is_err());
    }
}

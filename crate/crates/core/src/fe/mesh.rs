use super::{Dof, Element, FrameModel, Prescribed};
use crate::error::{ensure, Result};
use crate::mechanism::MechanismConfig;
use crate::tebc::{MaterialModel, VBeamGeometry};

/// Height of the ring node above the shuttle. Only the spring connects
/// them, so the value is cosmetic.
const RING_OFFSET: f64 = 10.0;

/// A multi-flexure assembly with its two named nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MultibeamModel {
    pub model: FrameModel,
    pub shuttle: usize,
    pub ring: usize,
}

/// One tilted flexure: clamped at the origin, guided at the far end, which
/// is pushed transversely downward by the control.
pub fn build_vbeam_mesh(
    geom: &VBeamGeometry,
    mat: &MaterialModel,
    n_elements: usize,
) -> Result<FrameModel> {
    geom.validate()?;
    mat.validate()?;
    ensure(n_elements >= 4, "FE mesh needs at least 4 elements per beam")?;

    let (c, s) = (geom.tilt.cos(), geom.tilt.sin());
    let mut model = FrameModel::default();
    for k in 0..=n_elements {
        let r = geom.length * k as f64 / n_elements as f64;
        model.add_node(r * c, r * s);
    }
    for k in 0..n_elements {
        model.elements.push(Element::Beam {
            node_i: k,
            node_j: k + 1,
            youngs_modulus: mat.youngs_modulus,
            area: geom.area(),
            inertia: geom.second_moment(),
        });
    }
    model.fixed[0] = [true; 3];
    model.fixed[n_elements] = [true, false, true];
    model.prescribed.push(Prescribed {
        node: n_elements,
        dof: Dof::Uy,
        scale: -1.0,
    });
    Ok(model)
}

/// `n_beams` flexures on alternating sides of a shared shuttle, which is
/// pulled through a series spring by the ring node.
pub fn build_multibeam_assembly(
    config: &MechanismConfig,
    n_elements: usize,
) -> Result<MultibeamModel> {
    config.validate()?;
    ensure(n_elements >= 4, "FE mesh needs at least 4 elements per beam")?;
    let geom = &config.beam_geometry;
    let (c, s) = (geom.tilt.cos(), geom.tilt.sin());

    // Interior nodes first, shuttle and ring last, to keep the profile small.
    let mut model = FrameModel::default();
    let mut grounds = Vec::new();
    for k in 0..config.n_beams {
        let side = if k % 2 == 0 { -1.0 } else { 1.0 };
        let g = model.add_node(side * geom.length * c, -geom.length * s);
        model.fixed[g] = [true; 3];
        grounds.push(g);
    }
    let interior_start = model.nodes.len();
    let per_beam = n_elements - 1;
    let shuttle = interior_start + per_beam * config.n_beams as usize;
    let ring = shuttle + 1;

    for &g in &grounds {
        let a = model.nodes[g];
        let mut prev = g;
        for k in 1..=n_elements {
            let next = if k == n_elements {
                shuttle
            } else {
                let t = k as f64 / n_elements as f64;
                model.add_node(a.x * (1.0 - t), a.y * (1.0 - t))
            };
            model.elements.push(Element::Beam {
                node_i: prev,
                node_j: next,
                youngs_modulus: config.material.youngs_modulus,
                area: geom.area(),
                inertia: geom.second_moment(),
            });
            prev = next;
        }
    }
    assert_eq!(model.add_node(0.0, 0.0), shuttle);
    assert_eq!(model.add_node(0.0, RING_OFFSET), ring);
    model.fixed[shuttle] = [true, false, true];
    model.fixed[ring] = [true, false, true];
    model.elements.push(Element::Spring {
        node_i: shuttle,
        node_j: ring,
        dof: Dof::Uy,
        stiffness: config.series_stiffness_ks,
    });
    model.prescribed.push(Prescribed {
        node: ring,
        dof: Dof::Uy,
        scale: -1.0,
    });
    model.validate()?;
    Ok(MultibeamModel {
        model,
        shuttle,
        ring,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vbeam_mesh_layout() {
        let g = VBeamGeometry::table1();
        let m = build_vbeam_mesh(&g, &MaterialModel::pla(), 8).unwrap();
        assert_eq!(m.nodes.len(), 9);
        assert_eq!(m.elements.len(), 8);
        let tip = m.nodes[8];
        assert!((tip.x - 40.0 * g.tilt.cos()).abs() < 1e-12);
        assert!((tip.y - 40.0 * g.tilt.sin()).abs() < 1e-12);
        assert_eq!(m.fixed[8], [true, false, true]);
        let total: f64 = m
            .elements
            .iter()
            .filter_map(|e| m.beam(e))
            .map(|(b, _)| b.initial_length())
            .sum();
        assert!((total - 40.0).abs() < 1e-9);
    }

    #[test]
    fn multibeam_layout() {
        let cfg = MechanismConfig::table1();
        let mb = build_multibeam_assembly(&cfg, 6).unwrap();
        assert_eq!(mb.model.nodes.len(), 12 + 12 * 5 + 2);
        assert_eq!(mb.ring, mb.model.nodes.len() - 1);
        let beams = mb.model.elements.iter().filter(|e| mb.model.beam(e).is_some()).count();
        assert_eq!(beams, 72);
    }
}

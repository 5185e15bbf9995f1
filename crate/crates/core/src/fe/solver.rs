use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::element::Vec6;
use super::mesh::build_multibeam_assembly;
use super::skyline::{Factorized, Skyline};
use super::{Dof, Element, FrameModel};
use crate::error::{ensure, Error, Result};
use crate::mechanism::MechanismConfig;

pub const PATH_CSV_HEADER: &str = "step,control_mm,reaction_N,iters,residual";

/// Perturbation amplitudes, as fractions of the shortest element, tried
/// when a converged state turns out to be unstable.
const SWITCH_AMPLITUDES: [f64; 5] = [1e-3, 1e-2, 5e-2, 2e-1, 5e-1];
const MAX_SWITCH_ROUNDS: usize = 8;
const MAX_ARC_STEPS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeSettings {
    pub n_elements: usize,
    pub n_steps: usize,
    /// Absolute tolerance on the free-DOF force residual norm, N.
    pub tol: f64,
    pub max_iterations: usize,
    /// Smallest bisected step, as a fraction of the total travel.
    pub bisection_floor: f64,
    pub arc_length: bool,
    /// Perturb unstable equilibria onto a stable neighbouring branch.
    pub branch_switching: bool,
}

impl Default for FeSettings {
    fn default() -> Self {
        Self {
            n_elements: 16,
            n_steps: 100,
            tol: 1e-8,
            max_iterations: 25,
            bisection_floor: 1.0 / 4096.0,
            arc_length: true,
            branch_switching: true,
        }
    }
}

impl FeSettings {
    pub fn validate(&self) -> Result<()> {
        ensure(self.n_elements >= 4, "FE mesh needs at least 4 elements per beam")?;
        ensure(self.n_steps >= 1, "FE sweep needs at least one step")?;
        ensure(
            self.tol.is_finite() && self.tol > 0.0,
            "FE residual tolerance must be positive",
        )?;
        ensure(self.max_iterations >= 1, "FE needs at least one Newton iteration")?;
        ensure(
            self.bisection_floor > 0.0 && self.bisection_floor <= 1.0,
            "FE bisection floor must be in (0, 1]",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reaction {
    pub node: usize,
    pub dof: Dof,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub control: f64,
    pub displacements: Vec<f64>,
    /// Support forces at every fixed or prescribed DOF.
    pub reactions: Vec<Reaction>,
    /// Force work-conjugate to the control parameter.
    pub drive_force: f64,
    pub iterations: usize,
    pub residual: f64,
    pub strain_energy: f64,
    /// The state was moved off an unstable equilibrium during this step.
    pub branch_switched: bool,
    /// Arc-length continuation was needed to reach this step.
    pub arc_length_used: bool,
    pub stable: bool,
}

impl PathStep {
    pub fn displacement(&self, node: usize, dof: Dof) -> f64 {
        self.displacements[3 * node + dof as usize]
    }

    pub fn reaction(&self, node: usize, dof: Dof) -> Option<f64> {
        self.reactions
            .iter()
            .find(|r| r.node == node && r.dof == dof)
            .map(|r| r.value)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquilibriumPath {
    pub steps: Vec<PathStep>,
}

impl EquilibriumPath {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.steps.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<&PathStep> {
        self.steps.last()
    }
}

#[derive(Debug, Clone, Error)]
#[error(
    "FE solve did not converge at control {control} mm (last converged {last_converged} mm, \
     residual {residual:e} N)"
)]
pub struct NonConvergence {
    pub control: f64,
    pub last_converged: f64,
    pub residual: f64,
    pub path: EquilibriumPath,
}

#[derive(Debug, Clone, Copy)]
enum DofKind {
    Free(usize),
    Fixed,
    Prescribed(f64),
}

struct Assembly {
    force: Vec<f64>,
    tangent: Skyline,
    /// `∂(free forces)/∂control`.
    control_gradient: Vec<f64>,
}

struct System<'m> {
    model: &'m FrameModel,
    kinds: Vec<DofKind>,
    free: Vec<usize>,
    first: Vec<usize>,
    settings: FeSettings,
}

#[derive(Debug, Clone)]
struct Converged {
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
    arc: bool,
}

impl<'m> System<'m> {
    fn new(model: &'m FrameModel, settings: FeSettings) -> Self {
        let n = model.n_dofs();
        let mut kinds = vec![DofKind::Fixed; n];
        for (node, flags) in model.fixed.iter().enumerate() {
            for dof in Dof::ALL {
                if !flags[dof as usize] {
                    kinds[3 * node + dof as usize] = DofKind::Free(0);
                }
            }
        }
        for p in &model.prescribed {
            kinds[3 * p.node + p.dof as usize] = DofKind::Prescribed(p.scale);
        }
        let mut free = Vec::new();
        for (g, kind) in kinds.iter_mut().enumerate() {
            if let DofKind::Free(idx) = kind {
                *idx = free.len();
                free.push(g);
            }
        }

        let mut first: Vec<usize> = (0..free.len()).collect();
        for el in &model.elements {
            let dofs = element_dofs(el);
            let idx: Vec<usize> = dofs
                .iter()
                .filter_map(|&g| match kinds[g] {
                    DofKind::Free(i) => Some(i),
                    _ => None,
                })
                .collect();
            if let Some(&lo) = idx.iter().min() {
                for &i in &idx {
                    first[i] = first[i].min(lo);
                }
            }
        }

        Self {
            model,
            kinds,
            free,
            first,
            settings,
        }
    }

    fn n_free(&self) -> usize {
        self.free.len()
    }

    fn set_control(&self, u: &mut [f64], control: f64) {
        for p in &self.model.prescribed {
            u[3 * p.node + p.dof as usize] = p.scale * control;
        }
    }

    fn assemble(&self, u: &[f64]) -> Assembly {
        let mut force = vec![0.0; self.model.n_dofs()];
        let mut tangent = Skyline::with_profile(self.first.clone());
        let mut control_gradient = vec![0.0; self.n_free()];

        let mut scatter = |dofs: &[usize], fe: &[f64], ke: &dyn Fn(usize, usize) -> f64| {
            for (a, &ga) in dofs.iter().enumerate() {
                force[ga] += fe[a];
                let DofKind::Free(ia) = self.kinds[ga] else {
                    continue;
                };
                for (b, &gb) in dofs.iter().enumerate() {
                    match self.kinds[gb] {
                        DofKind::Free(ib) if ib >= ia => tangent.add(ia, ib, ke(a, b)),
                        DofKind::Prescribed(scale) => control_gradient[ia] += ke(a, b) * scale,
                        _ => {}
                    }
                }
            }
        };

        for el in &self.model.elements {
            let dofs = element_dofs(el);
            match *el {
                Element::Beam { .. } => {
                    let (beam, _) = self.model.beam(el).expect("beam element");
                    let ue = Vec6::from_fn(|i, _| u[dofs[i]]);
                    let (fe, ke) = beam.internal_force_and_tangent(&ue);
                    scatter(&dofs, fe.as_slice(), &|a, b| ke[(a, b)]);
                }
                Element::Spring { stiffness, .. } => {
                    let stretch = u[dofs[1]] - u[dofs[0]];
                    let fe = [-stiffness * stretch, stiffness * stretch];
                    scatter(&dofs, &fe, &|a, b| if a == b { stiffness } else { -stiffness });
                }
            }
        }

        Assembly {
            force,
            tangent,
            control_gradient,
        }
    }

    fn residual(&self, asm: &Assembly) -> Vec<f64> {
        self.free.iter().map(|&g| asm.force[g]).collect()
    }

    fn strain_energy(&self, u: &[f64]) -> f64 {
        self.model
            .elements
            .iter()
            .map(|el| {
                let dofs = element_dofs(el);
                match *el {
                    Element::Beam { .. } => {
                        let (beam, _) = self.model.beam(el).expect("beam element");
                        beam.strain_energy(&Vec6::from_fn(|i, _| u[dofs[i]]))
                    }
                    Element::Spring { stiffness, .. } => {
                        let stretch = u[dofs[1]] - u[dofs[0]];
                        0.5 * stiffness * stretch * stretch
                    }
                }
            })
            .sum()
    }

    fn add_free(&self, u: &mut [f64], delta: &[f64], factor: f64) {
        for (i, &g) in self.free.iter().enumerate() {
            u[g] += factor * delta[i];
        }
    }

    /// Newton iteration at fixed control. On failure returns the last
    /// residual norm.
    fn newton(&self, start: &[f64], control: f64) -> std::result::Result<Converged, f64> {
        let mut u = start.to_vec();
        self.set_control(&mut u, control);
        let mut last = f64::INFINITY;
        for it in 0..=self.settings.max_iterations {
            let asm = self.assemble(&u);
            let r = self.residual(&asm);
            let norm = norm(&r);
            if !norm.is_finite() {
                return Err(last);
            }
            last = norm;
            if norm <= self.settings.tol {
                return Ok(Converged {
                    u,
                    iterations: it,
                    residual: norm,
                    arc: false,
                });
            }
            if it == self.settings.max_iterations {
                break;
            }
            let Some(fact) = asm.tangent.factorize() else {
                return Err(norm);
            };
            let delta = fact.solve(&r);
            self.add_free(&mut u, &delta, -1.0);
        }
        Err(last)
    }

    fn factorize_at(&self, u: &[f64]) -> Option<Factorized> {
        self.assemble(u).tangent.factorize()
    }

    /// Reaches `to` from a converged state at `from`, halving the increment
    /// on failure and falling back to arc-length continuation below the
    /// bisection floor.
    fn advance(
        &self,
        start: &[f64],
        from: f64,
        to: f64,
        floor: f64,
        arc_step: f64,
    ) -> std::result::Result<Converged, f64> {
        match self.newton(start, to) {
            Ok(c) => Ok(c),
            Err(res) if (to - from).abs() > floor => {
                log::debug!("bisecting step {from} -> {to} (residual {res:e})");
                let mid = 0.5 * (from + to);
                let a = self.advance(start, from, mid, floor, arc_step)?;
                let b = self.advance(&a.u, mid, to, floor, arc_step)?;
                Ok(Converged {
                    u: b.u,
                    iterations: a.iterations + b.iterations,
                    residual: b.residual,
                    arc: a.arc || b.arc,
                })
            }
            Err(res) if self.settings.arc_length => {
                log::debug!("arc-length fallback from control {from} (residual {res:e})");
                self.arc_length(start, from, to, arc_step).map_err(|r| r.max(res))
            }
            Err(res) => Err(res),
        }
    }

    /// Spherical arc-length continuation from `(start, from)` until the
    /// control passes `to`, then a displacement-controlled correction at `to`.
    fn arc_length(
        &self,
        start: &[f64],
        from: f64,
        to: f64,
        arc: f64,
    ) -> std::result::Result<Converged, f64> {
        let forward = (to - from).signum();
        let mut u = start.to_vec();
        let mut control = from;
        let mut radius = arc;
        let mut prev: Option<(Vec<f64>, f64)> = None;
        let mut iterations = 0;
        let min_radius = arc * 1e-6;

        for _ in 0..MAX_ARC_STEPS {
            if (control - to) * forward >= 0.0 {
                let mut c = self.newton(&u, to)?;
                c.iterations += iterations;
                c.arc = true;
                return Ok(c);
            }
            match self.arc_step(&u, control, radius, prev.as_ref(), forward) {
                Some((du, dc, it)) => {
                    iterations += it;
                    self.add_free(&mut u, &du, 1.0);
                    control += dc;
                    self.set_control(&mut u, control);
                    prev = Some((du, dc));
                    radius = (radius * 1.5).min(arc);
                }
                None => {
                    radius *= 0.5;
                    if radius < min_radius {
                        return Err(f64::INFINITY);
                    }
                }
            }
        }
        Err(f64::INFINITY)
    }

    /// One constrained step of radius `radius`; returns the free-DOF and
    /// control increments.
    fn arc_step(
        &self,
        u0: &[f64],
        c0: f64,
        radius: f64,
        prev: Option<&(Vec<f64>, f64)>,
        forward: f64,
    ) -> Option<(Vec<f64>, f64, usize)> {
        let asm = self.assemble(u0);
        let g = asm.control_gradient.clone();
        let fact = asm.tangent.factorize()?;
        let v: Vec<f64> = fact.solve(&g).iter().map(|x| -x).collect();

        let mut dc = radius / (dot(&v, &v) + 1.0).sqrt();
        let orient = match prev {
            Some((du_p, dc_p)) => dot(&v, du_p) + dc_p,
            None => forward,
        };
        if orient < 0.0 {
            dc = -dc;
        }
        let mut du: Vec<f64> = v.iter().map(|x| x * dc).collect();
        let reference = (du.clone(), dc);

        let mut u = u0.to_vec();
        for it in 0..=self.settings.max_iterations {
            u.copy_from_slice(u0);
            self.add_free(&mut u, &du, 1.0);
            self.set_control(&mut u, c0 + dc);
            let asm = self.assemble(&u);
            let r = self.residual(&asm);
            let rn = norm(&r);
            if !rn.is_finite() {
                return None;
            }
            if rn <= self.settings.tol {
                return Some((du, dc, it));
            }
            if it == self.settings.max_iterations {
                break;
            }
            let g = asm.control_gradient.clone();
            let fact = asm.tangent.factorize()?;
            let a: Vec<f64> = fact.solve(&r).iter().map(|x| -x).collect();
            let b: Vec<f64> = fact.solve(&g).iter().map(|x| -x).collect();

            let ua: Vec<f64> = du.iter().zip(&a).map(|(x, y)| x + y).collect();
            let qa = dot(&b, &b) + 1.0;
            let qb = 2.0 * (dot(&b, &ua) + dc);
            let qc = dot(&ua, &ua) + dc * dc - radius * radius;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let candidates = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)];
            let score = |d: f64| {
                let step: Vec<f64> = ua.iter().zip(&b).map(|(x, y)| x + d * y).collect();
                dot(&step, &reference.0) + (dc + d) * reference.1
            };
            let pick = if score(candidates[0]) >= score(candidates[1]) {
                candidates[0]
            } else {
                candidates[1]
            };
            du = ua.iter().zip(&b).map(|(x, y)| x + pick * y).collect();
            dc += pick;
        }
        None
    }

    /// If the converged state has negative-curvature directions, push it
    /// along them and re-converge until a stable state is found.
    fn stabilize(&self, state: Converged, control: f64) -> (Converged, bool, bool) {
        let Some(fact) = self.factorize_at(&state.u) else {
            return (state, false, false);
        };
        if fact.negative_pivots == 0 || !self.settings.branch_switching {
            return (state, false, fact.negative_pivots == 0);
        }

        let h = self.model.min_beam_length();
        let mut current = state;
        let mut extra = 0;
        for _ in 0..MAX_SWITCH_ROUNDS {
            let Some(fact) = self.factorize_at(&current.u) else {
                break;
            };
            let Some(mut dir) = fact.negative_curvature_direction() else {
                current.iterations += extra;
                return (current, true, true);
            };
            let start_negatives = fact.negative_pivots;
            normalize_direction(&mut dir, &self.free);

            let mut improved = None;
            'search: for amp in SWITCH_AMPLITUDES {
                for sign in [1.0, -1.0] {
                    let mut trial = current.u.clone();
                    self.add_free(&mut trial, &dir, sign * amp * h);
                    if let Ok(c) = self.newton(&trial, control) {
                        extra += c.iterations;
                        let neg = self
                            .factorize_at(&c.u)
                            .map_or(usize::MAX, |f| f.negative_pivots);
                        if neg < start_negatives {
                            improved = Some(c);
                            break 'search;
                        }
                    }
                }
            }
            match improved {
                Some(c) => current = c,
                None => break,
            }
        }
        current.iterations += extra;
        let stable = self
            .factorize_at(&current.u)
            .is_some_and(|f| f.negative_pivots == 0);
        if !stable {
            log::warn!("could not leave an unstable equilibrium at control {control}");
        }
        (current, true, stable)
    }

    fn record(&self, c: &Converged, control: f64, switched: bool, stable: bool) -> PathStep {
        let asm = self.assemble(&c.u);
        let mut reactions = Vec::new();
        let mut drive_force = 0.0;
        for (g, kind) in self.kinds.iter().enumerate() {
            match kind {
                DofKind::Free(_) => continue,
                DofKind::Prescribed(scale) => drive_force += scale * asm.force[g],
                DofKind::Fixed => {}
            }
            reactions.push(Reaction {
                node: g / 3,
                dof: Dof::ALL[g % 3],
                value: asm.force[g],
            });
        }
        PathStep {
            control,
            displacements: c.u.clone(),
            reactions,
            drive_force,
            iterations: c.iterations,
            residual: c.residual,
            strain_energy: self.strain_energy(&c.u),
            branch_switched: switched,
            arc_length_used: c.arc,
            stable,
        }
    }
}

fn element_dofs(el: &Element) -> Vec<usize> {
    match *el {
        Element::Beam { node_i, node_j, .. } => {
            let (a, b) = (3 * node_i, 3 * node_j);
            vec![a, a + 1, a + 2, b, b + 1, b + 2]
        }
        Element::Spring {
            node_i,
            node_j,
            dof,
            ..
        } => vec![3 * node_i + dof as usize, 3 * node_j + dof as usize],
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales so the largest translational component is 1 and is positive.
fn normalize_direction(dir: &mut [f64], free: &[usize]) {
    let mut best = 0.0f64;
    for (i, &g) in free.iter().enumerate() {
        if g % 3 != Dof::Rz as usize && dir[i].abs() > best.abs() {
            best = dir[i];
        }
    }
    if best == 0.0 {
        best = dir.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
    }
    if best != 0.0 {
        for x in dir.iter_mut() {
            *x /= best;
        }
    }
}

/// Displacement-controlled sweep of the model's prescribed DOFs from zero
/// to `travel_max` in `n_steps` equal increments.
///
/// Step 0 is the undeformed state. The drive force of each step is the
/// force work-conjugate to the control, i.e. for a single guided beam the
/// push needed at the shuttle.
pub fn solve_guided_sweep(
    model: &FrameModel,
    travel_max: f64,
    n_steps: usize,
    settings: &FeSettings,
) -> Result<EquilibriumPath> {
    model.validate()?;
    ensure(
        travel_max.is_finite() && travel_max >= 0.0,
        "FE travel must be non-negative",
    )?;
    ensure(n_steps >= 1, "FE sweep needs at least one step")?;
    ensure(!model.prescribed.is_empty(), "FE sweep needs a prescribed DOF")?;
    let settings = FeSettings {
        n_steps,
        ..*settings
    };
    settings.validate()?;

    let system = System::new(model, settings);
    let zero = Converged {
        u: vec![0.0; model.n_dofs()],
        iterations: 0,
        residual: 0.0,
        arc: false,
    };
    let mut path = EquilibriumPath {
        steps: vec![system.record(&zero, 0.0, false, true)],
    };
    if travel_max == 0.0 {
        return Ok(path);
    }

    let step = travel_max / n_steps as f64;
    let floor = travel_max * settings.bisection_floor;
    let mut state = zero;
    let mut control = 0.0;
    for k in 1..=n_steps {
        let target = if k == n_steps { travel_max } else { step * k as f64 };
        let converged = match system.advance(&state.u, control, target, floor, 0.5 * step) {
            Ok(c) => c,
            Err(residual) => {
                return Err(Error::NonConvergence(Box::new(NonConvergence {
                    control: target,
                    last_converged: control,
                    residual,
                    path,
                })));
            }
        };
        let (converged, switched, stable) = system.stabilize(converged, target);
        path.steps.push(system.record(&converged, target, switched, stable));
        state = converged;
        control = target;
    }
    Ok(path)
}

/// Ring pull of `ring_disp` on `n_beams` flexures behind a series spring.
/// Returns `(shuttle displacement, ring force)`.
pub fn solve_multibeam_assembly(
    config: &MechanismConfig,
    ring_disp: f64,
    settings: &FeSettings,
) -> Result<(f64, f64)> {
    config.validate()?;
    ensure(
        ring_disp.is_finite() && ring_disp >= 0.0,
        "ring displacement must be non-negative",
    )?;
    if ring_disp == 0.0 {
        return Ok((0.0, 0.0));
    }
    let assembly = build_multibeam_assembly(config, settings.n_elements)?;
    let path = solve_guided_sweep(&assembly.model, ring_disp, settings.n_steps, settings)?;
    let last = path.last().expect("non-empty path");
    Ok((-last.displacement(assembly.shuttle, Dof::Uy), last.drive_force))
}

/// Writes `step,control_mm,reaction_N,iters,residual` rows.
pub fn write_path_csv<W: Write>(path: &EquilibriumPath, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PATH_CSV_HEADER}")?;
    for (i, s) in path.steps.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{:e}",
            crate::report::format_sig(s.control),
            crate::report::format_sig(s.drive_force),
            s.iterations,
            s.residual
        )?;
    }
    Ok(())
}

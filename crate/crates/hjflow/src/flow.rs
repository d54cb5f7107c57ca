//! Hamilton-Jacobi flows over the grid: the upper flow T^t u (sup-convolution
//! with the action) and the lower flow T_t u, slope functionals S+/S-, and the
//! discrete sup-energy of a gradient field.
//!
//! Stepping is the default method: it iterates the one-step dynamic program,
//! is unconditionally stable and satisfies the semigroup law exactly. The
//! kernel method evaluates the sup against a per-source action field over a
//! localized ball and exists to validate stepping.

use crate::action::{step_costs, StepCosts};
use crate::error::{Error, Result};
use crate::geometry::{GridDomain, NodeId};
use crate::hamiltonian::{CoercivityProfile, Hamiltonian};
use crate::math::Vec2;
use crate::INF_SENTINEL;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMethod {
    Stepping,
    Kernel,
}

/// Flow slices over a uniform time grid; slice 0 is the input field.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub direction: FlowDirection,
    pub delta: f64,
    pub slices: Vec<Vec<f64>>,
    /// Localization radius per step for the kernel method (length units).
    pub localization_radius: Option<f64>,
    /// Kernel requests outside the validity window fall back to stepping.
    pub kernel_fell_back: bool,
}

impl FlowTrace {
    pub fn final_slice(&self) -> &[f64] {
        self.slices.last().unwrap()
    }
}

/// One upper step: out[x] = max over stencil z and z = x of in[z] - cost(x -> z).
pub fn upper_step(grid: &GridDomain, costs: &StepCosts, input: &[f64], output: &mut Vec<f64>) {
    let n = grid.node_count();
    output.clear();
    (0..n)
        .into_par_iter()
        .map(|x| {
            if !grid.is_inside(x) {
                return f64::INFINITY;
            }
            let mut best = input[x];
            for k in 0..grid.offsets().len() {
                if let Some(z) = grid.neighbor(x, k) {
                    let cand = input[z] - costs.cost(x, z, k);
                    if cand > best {
                        best = cand;
                    }
                }
            }
            best
        })
        .collect_into_vec(output);
}

/// One lower step: out[x] = min over stencil z and z = x of in[z] + cost(z -> x).
pub fn lower_step(grid: &GridDomain, costs: &StepCosts, input: &[f64], output: &mut Vec<f64>) {
    let n = grid.node_count();
    output.clear();
    (0..n)
        .into_par_iter()
        .map(|x| {
            if !grid.is_inside(x) {
                return f64::INFINITY;
            }
            let mut best = input[x];
            for k in 0..grid.offsets().len() {
                if let Some(z) = grid.neighbor(x, k) {
                    let ko = grid.offsets()[k].opposite;
                    let cand = input[z] + costs.cost(z, x, ko);
                    if cand < best {
                        best = cand;
                    }
                }
            }
            best
        })
        .collect_into_vec(output);
}

fn check_input(grid: &GridDomain, u: &[f64]) -> Result<()> {
    if u.len() != grid.node_count() {
        return Err(Error::Precondition("flow: field length does not match the grid".into()));
    }
    for node in grid.inside_nodes() {
        if !u[node].is_finite() {
            return Err(Error::Precondition(format!(
                "flow: input is not finite at node {node}"
            )));
        }
    }
    Ok(())
}

/// Run the stepping flow for `steps` steps of size `delta`.
pub fn flow_trace(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    direction: FlowDirection,
    delta: f64,
    steps: usize,
) -> Result<FlowTrace> {
    check_input(grid, u)?;
    let costs = step_costs(grid, spec, delta)?;
    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(u.to_vec());
    let mut next = Vec::new();
    for k in 0..steps {
        match direction {
            FlowDirection::Upper => upper_step(grid, &costs, &slices[k], &mut next),
            FlowDirection::Lower => lower_step(grid, &costs, &slices[k], &mut next),
        }
        slices.push(std::mem::take(&mut next));
    }
    Ok(FlowTrace {
        direction,
        delta,
        slices,
        localization_radius: None,
        kernel_fell_back: false,
    })
}

/// Discrete Lipschitz bound of a field: max edge increment over edge length.
pub fn lip_bound(grid: &GridDomain, u: &[f64]) -> f64 {
    let mut k: f64 = 0.0;
    for a in grid.inside_nodes() {
        for ko in 0..grid.offsets().len() {
            if let Some(b) = grid.neighbor(a, ko) {
                let len = grid.offsets()[ko].norm * grid.h;
                let d = (u[b] - u[a]).abs() / len;
                if d.is_finite() && d > k {
                    k = d;
                }
            }
        }
    }
    k
}

pub fn oscillation(grid: &GridDomain, u: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for node in grid.inside_nodes() {
        lo = lo.min(u[node]);
        hi = hi.max(u[node]);
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Localization constants computed from the coercivity profile: the
/// sup-escape window eta0, the Lipschitz speed cap a_K, the curve-excursion
/// cap a_0(r), and the working window eta1 = min of the three scales.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LocalizationWindow {
    pub eta0: f64,
    pub eta1: f64,
    pub a_k: f64,
    pub a0: f64,
    /// sup over sampled x, |q| <= 1 of L(x, q).
    pub c_r: f64,
}

/// Compute the localization window for fields with oscillation `alpha` and
/// Lipschitz bound `k_lip`, at interior margin `r`.
pub fn localization(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    alpha: f64,
    k_lip: f64,
    r: f64,
) -> Result<LocalizationWindow> {
    if !(r > 0.0) {
        return Err(Error::Precondition("localization: margin r must be positive".into()));
    }
    // eta0(alpha, r/2): smallest tabulated s with M(s) > 2 alpha / r + 1
    let need = alpha / (0.5 * r) + 1.0;
    let s_star = profile
        .m_grid
        .iter()
        .zip(&profile.m_table)
        .find(|(_, m)| **m > need)
        .map(|(s, _)| *s)
        .ok_or_else(|| Error::Coercivity("localization: M never clears the eta0 bound".into()))?;
    let eta0 = 0.5 * r / s_star;
    let a_k = profile
        .a_for(k_lip)
        .ok_or_else(|| Error::Coercivity("localization: M never clears the Lipschitz bound".into()))?;
    // C(r): sampled sup of L(x, q) over |q| = 1
    let mut c_r: f64 = 0.0;
    let samples: Vec<NodeId> = grid.inside_nodes().step_by(17).take(64).collect();
    for node in samples {
        let x = grid.pos(node);
        for i in 0..16 {
            let q = Vec2::unit(std::f64::consts::PI * 2.0 * i as f64 / 16.0);
            c_r = c_r.max(spec.lagrangian(x, q)?.min(INF_SENTINEL));
        }
    }
    let a0 = profile
        .m_grid
        .iter()
        .zip(&profile.m_table)
        .find(|(s, _)| 0.5 * **s * profile.m_at(0.5 * **s) > c_r + 1.0)
        .map(|(s, _)| s.max(2.0))
        .ok_or_else(|| Error::Coercivity("localization: M never clears the excursion bound".into()))?;
    let eta1 = eta0.min(r / a_k).min(r / a0);
    Ok(LocalizationWindow {
        eta0,
        eta1,
        a_k,
        a0,
        c_r,
    })
}

/// Upper flow at time t. Stepping iterates the one-step DP; the kernel method
/// evaluates sup over a localized ball against per-source action fields and
/// falls back to stepping outside its validity window.
pub fn t_upper(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    u: &[f64],
    t: f64,
    delta: f64,
    method: FlowMethod,
) -> Result<FlowTrace> {
    flow_at_time(grid, spec, profile, u, t, delta, method, FlowDirection::Upper)
}

/// Lower flow at time t; mirror of `t_upper` through to-source actions.
pub fn t_lower(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    u: &[f64],
    t: f64,
    delta: f64,
    method: FlowMethod,
) -> Result<FlowTrace> {
    flow_at_time(grid, spec, profile, u, t, delta, method, FlowDirection::Lower)
}

fn steps_for(t: f64, delta: f64) -> Result<usize> {
    if t < 0.0 {
        return Err(Error::Precondition("flow: t must be nonnegative".into()));
    }
    let k = (t / delta).round();
    if (k * delta - t).abs() > 1e-9 * delta.max(1.0) {
        return Err(Error::Config(format!(
            "flow: t = {t} is not a multiple of delta = {delta}"
        )));
    }
    Ok(k as usize)
}

#[allow(clippy::too_many_arguments)]
fn flow_at_time(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    u: &[f64],
    t: f64,
    delta: f64,
    method: FlowMethod,
    direction: FlowDirection,
) -> Result<FlowTrace> {
    let steps = steps_for(t, delta)?;
    match method {
        FlowMethod::Stepping => flow_trace(grid, spec, u, direction, delta, steps),
        FlowMethod::Kernel => {
            check_input(grid, u)?;
            if steps == 0 {
                return flow_trace(grid, spec, u, direction, delta, 0);
            }
            let alpha = oscillation(grid, u);
            let k_lip = lip_bound(grid, u);
            // margin: distance from the evaluation set to the mask edge; use
            // the whole grid, so take one cell as the conservative floor
            let r = (grid.h * 4.0).max(0.25 * domain_diameter(grid));
            let window = localization(grid, spec, profile, alpha, k_lip, r);
            let valid = match &window {
                Ok(w) => t < w.eta0,
                Err(_) => false,
            };
            if !valid {
                let mut tr = flow_trace(grid, spec, u, direction, delta, steps)?;
                tr.kernel_fell_back = true;
                return Ok(tr);
            }
            let w = window.unwrap();
            let radius = (w.a_k.max(w.a0) * t + 2.0 * grid.h).min(domain_diameter(grid));
            let out = kernel_apply(grid, spec, u, t, delta, steps, radius, direction)?;
            Ok(FlowTrace {
                direction,
                delta,
                slices: vec![u.to_vec(), out],
                localization_radius: Some(radius),
                kernel_fell_back: false,
            })
        }
    }
}

fn domain_diameter(grid: &GridDomain) -> f64 {
    let (nx, ny) = grid.dims();
    ((nx * nx + ny * ny) as f64).sqrt() * grid.h
}

/// Kernel evaluation: per node, a localized action DP and a sup/inf over the
/// ball of the localization radius.
#[allow(clippy::too_many_arguments)]
fn kernel_apply(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    _t: f64,
    delta: f64,
    steps: usize,
    radius: f64,
    direction: FlowDirection,
) -> Result<Vec<f64>> {
    let costs = step_costs(grid, spec, delta)?;
    let n = grid.node_count();
    let result: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            if !grid.is_inside(x) {
                return f64::INFINITY;
            }
            // action from x (upper) or to x (lower) by a restricted DP
            let mut cur = vec![INF_SENTINEL; n];
            cur[x] = 0.0;
            let px = grid.pos(x);
            let mut next = vec![INF_SENTINEL; n];
            for _ in 0..steps {
                for y in grid.inside_nodes() {
                    if (grid.pos(y) - px).norm() > radius + grid.h {
                        next[y] = INF_SENTINEL;
                        continue;
                    }
                    let mut best = cur[y];
                    for k in 0..grid.offsets().len() {
                        if let Some(z) = grid.neighbor(y, k) {
                            let c = match direction {
                                // curve runs x -> ... -> z -> y
                                FlowDirection::Upper => {
                                    costs.cost(z, y, grid.offsets()[k].opposite)
                                }
                                // curve runs y -> z -> ... -> x
                                FlowDirection::Lower => costs.cost(y, z, k),
                            };
                            let cand = cur[z] + c;
                            if cand < best {
                                best = cand;
                            }
                        }
                    }
                    next[y] = best.min(INF_SENTINEL);
                }
                std::mem::swap(&mut cur, &mut next);
            }
            let mut best = u[x]; // y = x always admissible
            for y in grid.inside_nodes() {
                if (grid.pos(y) - px).norm() > radius {
                    continue;
                }
                if crate::action::is_unreached(cur[y]) {
                    continue;
                }
                match direction {
                    FlowDirection::Upper => best = best.max(u[y] - cur[y]),
                    FlowDirection::Lower => best = best.min(u[y] + cur[y]),
                }
            }
            best
        })
        .collect();
    Ok(result)
}

/// Residual of the semigroup law |T^{t+s} u - T^t (T^s u)| with the given method.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SemigroupReport {
    pub max_residual: f64,
    pub argmax: Option<(usize, usize)>,
    pub method: String,
}

pub fn semigroup_check(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    u: &[f64],
    t: f64,
    s: f64,
    delta: f64,
    method: FlowMethod,
) -> Result<SemigroupReport> {
    let direct = t_upper(grid, spec, profile, u, t + s, delta, method)?;
    let inner = t_upper(grid, spec, profile, u, s, delta, method)?;
    let outer = t_upper(grid, spec, profile, inner.final_slice(), t, delta, method)?;
    let mut max_residual: f64 = 0.0;
    let mut argmax = None;
    for node in grid.inside_nodes() {
        let r = (direct.final_slice()[node] - outer.final_slice()[node]).abs();
        if r > max_residual {
            max_residual = r;
            argmax = Some(grid.coords(node));
        }
    }
    Ok(SemigroupReport {
        max_residual,
        argmax,
        method: format!("{method:?}"),
    })
}

/// Slope estimates from probe times: S+ ~ max_s (T^s u - u)/s with each probe
/// taken as a single step of size s (a lower estimate; the quotient sequence
/// is nondecreasing in s exactly when the flow window is convex, and the
/// monotone flag records where that held).
#[derive(Debug, Clone)]
pub struct SlopeField {
    pub s_plus: Vec<f64>,
    pub s_minus: Vec<f64>,
    pub monotone_plus: Vec<bool>,
    pub monotone_minus: Vec<bool>,
    /// False near the mask where the probe ball clips against the boundary.
    pub interior_ok: Vec<bool>,
    pub probe_times: Vec<f64>,
}

pub fn slope_fields(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    probe_times: &[f64],
) -> Result<SlopeField> {
    check_input(grid, u)?;
    if probe_times.is_empty() {
        return Err(Error::Config("slope_fields: need at least one probe time".into()));
    }
    let mut times = probe_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if times[0] <= 0.0 {
        return Err(Error::Config("slope_fields: probe times must be positive".into()));
    }
    let n = grid.node_count();
    let mut plus_quotients: Vec<Vec<f64>> = Vec::new();
    let mut minus_quotients: Vec<Vec<f64>> = Vec::new();
    let mut buf = Vec::new();
    for s in &times {
        let costs = step_costs(grid, spec, *s)?;
        upper_step(grid, &costs, u, &mut buf);
        plus_quotients.push(
            (0..n)
                .map(|x| {
                    if grid.is_inside(x) {
                        (buf[x] - u[x]) / s
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
        lower_step(grid, &costs, u, &mut buf);
        minus_quotients.push(
            (0..n)
                .map(|x| {
                    if grid.is_inside(x) {
                        (u[x] - buf[x]) / s
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    let mut s_plus = vec![0.0f64; n];
    let mut s_minus = vec![0.0f64; n];
    let mut monotone_plus = vec![true; n];
    let mut monotone_minus = vec![true; n];
    for x in grid.inside_nodes() {
        let tol = 1e-10;
        for j in 0..times.len() {
            s_plus[x] = s_plus[x].max(plus_quotients[j][x]);
            s_minus[x] = s_minus[x].max(minus_quotients[j][x]);
            if j > 0 {
                if plus_quotients[j][x] + tol < plus_quotients[j - 1][x] {
                    monotone_plus[x] = false;
                }
                if minus_quotients[j][x] + tol < minus_quotients[j - 1][x] {
                    monotone_minus[x] = false;
                }
            }
        }
        debug_assert!(s_plus[x] >= -1e-12 && s_minus[x] >= -1e-12);
    }
    let max_cells = grid
        .offsets()
        .iter()
        .map(|o| o.dx.abs().max(o.dy.abs()))
        .max()
        .unwrap_or(1) as usize;
    let interior_ok = grid.interior_mask(max_cells);
    Ok(SlopeField {
        s_plus,
        s_minus,
        monotone_plus,
        monotone_minus,
        interior_ok,
        probe_times: times,
    })
}

/// Central-difference gradient, one-sided at boundary-adjacent nodes.
pub fn gradient_at(grid: &GridDomain, u: &[f64], node: NodeId) -> Vec2 {
    let (i, j) = grid.coords(node);
    let (nx, ny) = grid.dims();
    let h = grid.h;
    let at = |i: usize, j: usize| -> Option<f64> {
        let n = grid.idx(i, j);
        (grid.is_inside(n) && u[n].is_finite()).then(|| u[n])
    };
    let axis = |lo: Option<f64>, mid: f64, hi: Option<f64>| -> f64 {
        match (lo, hi) {
            (Some(a), Some(b)) => (b - a) / (2.0 * h),
            (None, Some(b)) => (b - mid) / h,
            (Some(a), None) => (mid - a) / h,
            (None, None) => 0.0,
        }
    };
    let mid = u[node];
    let gx = axis(
        (i > 0).then(|| at(i - 1, j)).flatten(),
        mid,
        (i + 1 < nx).then(|| at(i + 1, j)).flatten(),
    );
    let gy = axis(
        (j > 0).then(|| at(i, j - 1)).flatten(),
        mid,
        (j + 1 < ny).then(|| at(i, j + 1)).flatten(),
    );
    Vec2::new(gx, gy)
}

/// max over V of H(x, Du(x)) with central-difference gradients.
pub fn discrete_energy(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    subset: &[NodeId],
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Domain("discrete_energy: empty node subset".into()));
    }
    let mut worst: f64 = 0.0;
    for node in subset {
        if !grid.is_inside(*node) {
            continue;
        }
        let g = gradient_at(grid, u, *node);
        worst = worst.max(spec.eval(grid.pos(*node), g)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec, Stencil};
    use crate::hamiltonian::{coercivity_profile, SupportParams};
    use approx::assert_relative_eq;

    fn unit_box(h: f64, stencil: Stencil) -> GridDomain {
        build_grid(
            &DomainSpec::Box {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(1.0, 1.0),
            },
            h,
            stencil,
        )
        .unwrap()
    }

    fn profile_for(spec: &Hamiltonian) -> CoercivityProfile {
        coercivity_profile(
            spec,
            &[0.0625, 0.25, 1.0, 4.0, 16.0],
            &[],
            &SupportParams::default(),
        )
        .unwrap()
    }

    fn linear_field(grid: &GridDomain, e: Vec2) -> Vec<f64> {
        (0..grid.node_count()).map(|n| grid.pos(n).dot(e)).collect()
    }

    #[test]
    fn zero_time_is_identity_and_constants_are_fixed_points() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let prof = profile_for(&spec);
        let u = linear_field(&g, Vec2::new(0.7, -0.3));
        let tr = t_upper(&g, &spec, &prof, &u, 0.0, 1.0 / 16.0, FlowMethod::Stepping).unwrap();
        for node in g.inside_nodes() {
            assert_eq!(tr.final_slice()[node], u[node]);
        }
        let c = vec![3.25; g.node_count()];
        let up = flow_trace(&g, &spec, &c, FlowDirection::Upper, 1.0 / 16.0, 5).unwrap();
        let lo = flow_trace(&g, &spec, &c, FlowDirection::Lower, 1.0 / 16.0, 5).unwrap();
        for node in g.inside_nodes() {
            assert_eq!(up.final_slice()[node], 3.25);
            assert_eq!(lo.final_slice()[node], 3.25);
        }
    }

    #[test]
    fn chain_inequality_and_time_monotonicity_exact() {
        let g = unit_box(1.0 / 24.0, Stencil::N16);
        let spec = Hamiltonian::rotation_counterexample(2.0).unwrap();
        let u: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let p = g.pos(n);
                (3.0 * p.x).sin() * 0.3 + p.y * p.y
            })
            .collect();
        let steps = 6;
        let up = flow_trace(&g, &spec, &u, FlowDirection::Upper, 1.0 / 24.0, steps).unwrap();
        let lo = flow_trace(&g, &spec, &u, FlowDirection::Lower, 1.0 / 24.0, steps).unwrap();
        let (inf_u, sup_u) = (
            g.inside_nodes().map(|n| u[n]).fold(f64::INFINITY, f64::min),
            g.inside_nodes().map(|n| u[n]).fold(f64::NEG_INFINITY, f64::max),
        );
        for k in 0..=steps {
            for node in g.inside_nodes() {
                assert!(lo.slices[k][node] <= u[node] && u[node] <= up.slices[k][node]);
                assert!(inf_u <= lo.slices[k][node] && up.slices[k][node] <= sup_u);
                if k > 0 {
                    assert!(up.slices[k][node] >= up.slices[k - 1][node]);
                    assert!(lo.slices[k][node] <= lo.slices[k - 1][node]);
                }
            }
        }
    }

    #[test]
    fn upper_flow_monotone_in_the_field_and_commutes_with_constants() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let u = linear_field(&g, Vec2::new(0.5, 0.2));
        let v: Vec<f64> = u.iter().map(|x| x + 0.1).collect();
        let fu = flow_trace(&g, &spec, &u, FlowDirection::Upper, 1.0 / 16.0, 4).unwrap();
        let fv = flow_trace(&g, &spec, &v, FlowDirection::Upper, 1.0 / 16.0, 4).unwrap();
        for node in g.inside_nodes() {
            assert!(fu.final_slice()[node] <= fv.final_slice()[node]);
            assert_relative_eq!(
                fv.final_slice()[node] - fu.final_slice()[node],
                0.1,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn gauge_flow_of_linear_field_adds_time() {
        // H(p) = |p|: T^t u = u + t for u with unit gradient along an axis
        let g = unit_box(1.0 / 32.0, Stencil::N16);
        let spec = Hamiltonian::norm_power(2.0, 1.0).unwrap();
        let u = linear_field(&g, Vec2::new(1.0, 0.0));
        let steps = 8;
        let tr = flow_trace(&g, &spec, &u, FlowDirection::Upper, 1.0 / 32.0, steps).unwrap();
        let t = steps as f64 / 32.0;
        let interior = g.interior_mask(steps * 2 + 1);
        // brute-force oracle: T^t u(x) = sup over the euclidean ball B(x, t)
        for node in g.inside_nodes().filter(|n| interior[*n]) {
            let oracle = u[node] + t;
            assert_relative_eq!(tr.final_slice()[node], oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn lower_flow_is_reflected_upper_flow_bitwise() {
        let g = unit_box(1.0 / 24.0, Stencil::N16);
        let spec = Hamiltonian::rotation_counterexample(2.0).unwrap();
        let hat = spec.clone().reflected();
        let u: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let p = g.pos(n);
                (2.0 * p.x + p.y).cos() * 0.4
            })
            .collect();
        let minus_u: Vec<f64> = u.iter().map(|v| -v).collect();
        let lo = flow_trace(&g, &spec, &u, FlowDirection::Lower, 1.0 / 24.0, 5).unwrap();
        let up_hat = flow_trace(&g, &hat, &minus_u, FlowDirection::Upper, 1.0 / 24.0, 5).unwrap();
        for k in 0..=5 {
            for node in g.inside_nodes() {
                assert_eq!(
                    lo.slices[k][node].to_bits(),
                    (-up_hat.slices[k][node]).to_bits(),
                    "duality must be exact at node {node}, step {k}"
                );
            }
        }
    }

    #[test]
    fn stepping_semigroup_residual_is_zero() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let prof = profile_for(&spec);
        let u = linear_field(&g, Vec2::new(0.4, 0.6));
        let rep = semigroup_check(
            &g, &spec, &prof, &u, 0.125, 0.125, 1.0 / 16.0, FlowMethod::Stepping,
        )
        .unwrap();
        assert_eq!(rep.max_residual, 0.0);
        // s = 0 edge case
        let rep0 = semigroup_check(
            &g, &spec, &prof, &u, 0.125, 0.0, 1.0 / 16.0, FlowMethod::Stepping,
        )
        .unwrap();
        assert_eq!(rep0.max_residual, 0.0);
    }

    #[test]
    fn kernel_semigroup_residual_within_grid_tolerance() {
        let g = unit_box(0.025, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let prof = profile_for(&spec);
        let u: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let p = g.pos(n);
                0.25 * ((2.2 * p.x).sin() + (1.7 * p.y).cos())
            })
            .collect();
        let k = lip_bound(&g, &u);
        let rep = semigroup_check(&g, &spec, &prof, &u, 0.2, 0.2, 0.025, FlowMethod::Kernel)
            .unwrap();
        assert!(
            rep.max_residual <= 2.0 * k * g.h,
            "kernel residual {} vs tolerance {}",
            rep.max_residual,
            2.0 * k * g.h
        );
    }

    #[test]
    fn slope_fields_for_constant_linear_and_quadratic_probes() {
        let g = unit_box(1.0 / 32.0, Stencil::N16);
        let h = g.h;
        let probes: Vec<f64> = [
            0.25, 0.3, 0.36, 0.43, 0.5, 0.6, 0.72, 0.86, 1.0, 1.2, 1.44, 1.7, 2.0,
        ]
        .iter()
        .map(|c| c * 2.0 * h)
        .collect();
        // constant
        let spec = Hamiltonian::quadratic();
        let c = vec![1.0; g.node_count()];
        let sf = slope_fields(&g, &spec, &c, &probes).unwrap();
        for n in g.inside_nodes() {
            assert_eq!(sf.s_plus[n], 0.0);
            assert_eq!(sf.s_minus[n], 0.0);
        }
        // gauge + unit linear: S+ = 1 exactly along the axis
        let gauge = Hamiltonian::norm_power(2.0, 1.0).unwrap();
        let u = linear_field(&g, Vec2::new(1.0, 0.0));
        let sf = slope_fields(&g, &gauge, &u, &probes).unwrap();
        for n in g.inside_nodes().filter(|n| sf.interior_ok[*n]) {
            assert_relative_eq!(sf.s_plus[n], 1.0, epsilon = 1e-10);
        }
        // quadratic + linear e: sup_V S+ = |e|^2 within 5%
        for e in [Vec2::new(0.8, 0.0), Vec2::new(0.55, 0.45), Vec2::new(-0.3, 0.85)] {
            let u = linear_field(&g, e);
            let sf = slope_fields(&g, &spec, &u, &probes).unwrap();
            let sup = g
                .inside_nodes()
                .filter(|n| sf.interior_ok[*n])
                .map(|n| sf.s_plus[n])
                .fold(0.0f64, f64::max);
            let exact = e.norm_sq();
            assert!(
                (sup - exact).abs() <= 0.05 * exact,
                "slope identity for e = ({}, {}): {} vs {}",
                e.x,
                e.y,
                sup,
                exact
            );
        }
    }

    #[test]
    fn discrete_energy_linear_is_exact_and_rejects_empty() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let e = Vec2::new(0.6, -0.8);
        let u = linear_field(&g, e);
        let all: Vec<NodeId> = g.inside_nodes().collect();
        let en = discrete_energy(&g, &spec, &u, &all).unwrap();
        assert_relative_eq!(en, e.norm_sq(), epsilon = 1e-12);
        assert!(discrete_energy(&g, &spec, &u, &[]).is_err());
        let c = vec![2.0; g.node_count()];
        assert_eq!(discrete_energy(&g, &spec, &c, &all).unwrap(), 0.0);
    }

    #[test]
    fn time_lipschitz_constant_is_measured_and_bounded() {
        let g = unit_box(1.0 / 32.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let v = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        let cone = crate::geometry::cone_function(
            &g,
            &spec,
            1.0,
            v,
            crate::geometry::DistanceDirection::FromSource,
            0.0,
        )
        .unwrap();
        let delta = 1.0 / 32.0;
        let tr = flow_trace(&g, &spec, &cone, FlowDirection::Upper, delta, 6).unwrap();
        let mut measured: f64 = 0.0;
        for k in 1..=6 {
            for node in g.inside_nodes() {
                measured = measured.max((tr.slices[k][node] - tr.slices[k - 1][node]).abs() / delta);
            }
        }
        // flow gains of a level-1 cone are bounded by the level
        assert!(measured <= 1.0 + 1e-9, "measured time-Lipschitz constant {measured}");
        assert!(measured > 0.5, "flow should actually move");
    }
}

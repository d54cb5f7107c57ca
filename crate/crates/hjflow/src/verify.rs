//! Pass/fail checks: convexity of the flow window, comparison with intrinsic
//! cones from above, the comparison principle, and the small-slope closeness
//! property. A report never hides a failure: each carries the worst violation
//! and a witness location.

use crate::error::{Error, Result};
use crate::flow::{flow_trace, slope_fields, FlowDirection};
use crate::geometry::{distance_dlambda, DistanceDirection, GridDomain, NodeId};
use crate::hamiltonian::{AssumptionReport, CoercivityProfile, Hamiltonian};
use crate::math::Vec2;
use serde::Serialize;

/// Outcome of one check with its witness and parameters.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub pass: bool,
    pub worst_violation: f64,
    /// Grid coordinates (i, j) of the worst offender, when one exists.
    pub witnesses: Vec<(usize, usize)>,
    pub tolerance: f64,
    pub detail: String,
}

impl VerificationReport {
    fn new(name: &str, worst: f64, tol: f64, witnesses: Vec<(usize, usize)>, detail: String) -> Self {
        VerificationReport {
            name: name.into(),
            pass: worst <= tol,
            worst_violation: worst,
            witnesses,
            tolerance: tol,
            detail,
        }
    }
}

/// Convexity criteria: second differences of t -> T^t u(x) over a window of
/// `n_steps` steps of size `delta / n_steps` must not dip below -tol on `subset`.
pub fn check_convexity(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    subset: &[NodeId],
    delta: f64,
    n_steps: usize,
    tol: f64,
) -> Result<VerificationReport> {
    if subset.is_empty() {
        return Err(Error::Domain("check_convexity: empty node subset".into()));
    }
    if n_steps < 3 {
        return Err(Error::Precondition("check_convexity: need n_steps >= 3".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Precondition("check_convexity: window must be positive".into()));
    }
    let step = delta / n_steps as f64;
    let tr = flow_trace(grid, spec, u, FlowDirection::Upper, step, n_steps)?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for &node in subset {
        if !grid.is_inside(node) {
            continue;
        }
        for k in 1..n_steps {
            let second =
                tr.slices[k + 1][node] - 2.0 * tr.slices[k][node] + tr.slices[k - 1][node];
            let violation = -second;
            if violation > worst {
                worst = violation;
                witness = Some(grid.coords(node));
            }
        }
    }
    Ok(VerificationReport::new(
        "convexity",
        worst.max(0.0),
        tol,
        witness.into_iter().collect(),
        format!("window {delta}, {n_steps} steps of {step}"),
    ))
}

/// Comparison with intrinsic cones from above: for each (vertex, lambda,
/// subdomain), max over the closed subdomain of u - d_lambda(vertex, .) must
/// not exceed the max over its boundary (the cone offset cancels).
pub fn check_cica(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    vertices: &[NodeId],
    lambdas: &[f64],
    subdomains: &[Vec<NodeId>],
    tol: f64,
) -> Result<VerificationReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut cases = 0usize;
    for &x0 in vertices {
        for &lambda in lambdas {
            let dist = distance_dlambda(grid, spec, lambda, x0, DistanceDirection::FromSource)?;
            for v_nodes in subdomains {
                cases += 1;
                let mut in_v = vec![false; grid.node_count()];
                for n in v_nodes {
                    in_v[*n] = true;
                }
                // rim: inside nodes adjacent to V but not in V
                let mut rim = Vec::new();
                for &n in v_nodes {
                    for k in 0..grid.offsets().len() {
                        if let Some(m) = grid.neighbor(n, k) {
                            if !in_v[m] {
                                rim.push(m);
                            }
                        }
                    }
                }
                rim.sort_unstable();
                rim.dedup();
                let g = |n: NodeId| -> Option<f64> {
                    let d = dist.values[n];
                    d.is_finite().then(|| u[n] - d)
                };
                let mut m_bd = f64::NEG_INFINITY;
                for &n in &rim {
                    if let Some(v) = g(n) {
                        m_bd = m_bd.max(v);
                    }
                }
                if in_v.get(x0).copied().unwrap_or(false) {
                    // removing the vertex turns it into boundary
                    m_bd = m_bd.max(u[x0]);
                }
                let mut m_int = f64::NEG_INFINITY;
                let mut int_witness = None;
                for &n in v_nodes.iter().chain(rim.iter()) {
                    if n == x0 {
                        continue;
                    }
                    if let Some(v) = g(n) {
                        if v > m_int {
                            m_int = v;
                            int_witness = Some(n);
                        }
                    }
                }
                if !m_int.is_finite() || !m_bd.is_finite() {
                    continue;
                }
                let violation = m_int - m_bd;
                if violation > worst {
                    worst = violation;
                    witness = int_witness.map(|n| grid.coords(n));
                }
            }
        }
    }
    Ok(VerificationReport::new(
        "cica",
        worst.max(0.0),
        tol,
        witness.into_iter().collect(),
        format!(
            "{} (vertex, lambda, subdomain) cases over {} vertices x {} levels x {} subdomains",
            cases,
            vertices.len(),
            lambdas.len(),
            subdomains.len()
        ),
    ))
}

/// Comparison principle: max over the interior of u - v against the boundary.
pub fn check_comparison(
    grid: &GridDomain,
    u: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    let mut interior_max = f64::NEG_INFINITY;
    let mut boundary_max = f64::NEG_INFINITY;
    let mut witness = None;
    for node in grid.inside_nodes() {
        let d = u[node] - v[node];
        if grid.is_boundary(node) {
            boundary_max = boundary_max.max(d);
        } else if d > interior_max {
            interior_max = d;
            witness = Some(grid.coords(node));
        }
    }
    if !interior_max.is_finite() || !boundary_max.is_finite() {
        return Err(Error::Domain("check_comparison: degenerate interior or boundary".into()));
    }
    let violation = interior_max - boundary_max;
    Ok(VerificationReport::new(
        "comparison",
        violation.max(0.0),
        tol,
        witness.into_iter().collect(),
        format!("interior max {interior_max}, boundary max {boundary_max}"),
    ))
}

/// One (slope, gap) sample of the closeness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ClosenessSample {
    pub lambda: f64,
    pub slope: f64,
    pub gap: f64,
}

/// Small-slope closeness: if u = v on the boundary and both slopes are small,
/// the fields must be uniformly close. The bound eps(s) comes from the
/// zero-set hyperplane normal: eps(s) = 2 diam * sup_x max(L_s(x, q), L_s(x, -q)).
/// Requires the zero-set assumption (A2); the report fails when it is violated.
#[allow(clippy::too_many_arguments)]
pub fn check_small_slope_closeness(
    grid: &GridDomain,
    spec: &Hamiltonian,
    assumptions: &AssumptionReport,
    u: &[f64],
    v: &[f64],
    probe_times: &[f64],
    sweep: &[ClosenessSample],
    tol_grid: f64,
) -> Result<VerificationReport> {
    // boundary agreement is a hard precondition
    let mut bmax: f64 = 0.0;
    for node in grid.boundary_nodes() {
        bmax = bmax.max((u[node] - v[node]).abs());
    }
    let scale = crate::flow::oscillation(grid, u).max(1.0);
    if bmax > 1e-9 * scale {
        return Err(Error::Precondition(format!(
            "check_small_slope_closeness: boundary mismatch {bmax}"
        )));
    }
    let sweep_detail = format!(
        "sweep trend (lambda, slope, gap): {:?}",
        sweep
            .iter()
            .map(|c| (c.lambda, c.slope, c.gap))
            .collect::<Vec<_>>()
    );
    if !assumptions.a2_zeroset_ok {
        // without a planar zero set there is no closeness bound to certify
        let d = grid
            .inside_nodes()
            .map(|n| (u[n] - v[n]).abs())
            .fold(0.0f64, f64::max);
        return Ok(VerificationReport {
            name: "small_slope_closeness".into(),
            pass: false,
            worst_violation: d,
            witnesses: Vec::new(),
            tolerance: 0.0,
            detail: format!("(A2) violated: no zero-set hyperplane; gap {d}. {sweep_detail}"),
        });
    }
    let normal = assumptions
        .zero_set_hyperplane_normal
        .unwrap_or(Vec2::new(0.0, 1.0));
    let sf_u = slope_fields(grid, spec, u, probe_times)?;
    let sf_v = slope_fields(grid, spec, v, probe_times)?;
    let mut s: f64 = 0.0;
    for node in grid.inside_nodes() {
        if sf_u.interior_ok[node] {
            s = s.max(sf_u.s_plus[node]).max(sf_v.s_plus[node]);
        }
    }
    let mut d: f64 = 0.0;
    let mut witness = None;
    for node in grid.inside_nodes() {
        let gap = (u[node] - v[node]).abs();
        if gap > d {
            d = gap;
            witness = Some(grid.coords(node));
        }
    }
    // eps(s): traverse the domain along the zero-set normal at level s
    let diam = {
        let (nx, ny) = grid.dims();
        ((nx * nx + ny * ny) as f64).sqrt() * grid.h
    };
    let mut lsup: f64 = 0.0;
    for node in grid.inside_nodes().step_by(7) {
        let x = grid.pos(node);
        lsup = lsup.max(spec.sublevel_support(x, s, normal)?);
        lsup = lsup.max(spec.sublevel_support(x, s, -normal)?);
    }
    let eps = 2.0 * diam * lsup + tol_grid;
    Ok(VerificationReport::new(
        "small_slope_closeness",
        d,
        eps,
        witness.into_iter().collect(),
        format!("slope sup {s}, gap {d}, eps(s) {eps}. {sweep_detail}"),
    ))
}

/// Calibration sweep behind the closeness check: for each level, build the
/// lower and upper cone extensions of compatible linear boundary data and
/// record (slope sup, uniform gap). The gap must trend to zero with the slope
/// when the zero-set assumption holds.
pub fn closeness_sweep(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    levels: &[f64],
    probe_times: &[f64],
) -> Result<Vec<ClosenessSample>> {
    let mut out = Vec::new();
    for (i, lambda) in levels.iter().enumerate() {
        let r_l = profile
            .r_of_lambda
            .get(profile.lambda_samples.iter().position(|l| l == lambda).unwrap_or(i))
            .copied()
            .unwrap_or_else(|| profile.r_at(*lambda));
        let c = 0.5 * r_l;
        let seeds: Vec<(NodeId, f64)> = grid
            .boundary_nodes()
            .map(|b| (b, c * grid.pos(b).x))
            .collect();
        let above = crate::solver::extension_above(grid, spec, *lambda, &seeds)?;
        let below = crate::solver::extension_below(grid, spec, *lambda, &seeds)?;
        let sf_above = slope_fields(grid, spec, &above, probe_times)?;
        let sf_below = slope_fields(grid, spec, &below, probe_times)?;
        let mut slope: f64 = 0.0;
        let mut gap: f64 = 0.0;
        for node in grid.inside_nodes() {
            if sf_above.interior_ok[node] {
                slope = slope.max(sf_above.s_plus[node]).max(sf_below.s_plus[node]);
            }
            gap = gap.max(above[node] - below[node]);
        }
        out.push(ClosenessSample {
            lambda: *lambda,
            slope,
            gap,
        });
    }
    Ok(out)
}

/// Seeded random inside nodes, for vertex sampling.
pub fn sample_vertices(grid: &GridDomain, count: usize, seed: u64) -> Vec<NodeId> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<NodeId> = grid.inside_nodes().collect();
    (0..count).map(|_| all[rng.gen_range(0..all.len())]).collect()
}

/// Seeded random disks for subdomain sampling: `per_scale` disks at each
/// radius scale (fractions of the domain diameter), clipped to the interior.
pub fn sample_disks(
    grid: &GridDomain,
    scales: &[f64],
    per_scale: usize,
    seed: u64,
) -> Vec<Vec<NodeId>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny) = grid.dims();
    let diam = ((nx * nx + ny * ny) as f64).sqrt() * grid.h;
    let mut out = Vec::new();
    for scale in scales {
        let radius = scale * diam;
        let margin_cells = (radius / grid.h).ceil() as usize + 2;
        let ok = grid.interior_mask(margin_cells);
        let centers: Vec<NodeId> = grid.inside_nodes().filter(|n| ok[*n]).collect();
        if centers.is_empty() {
            continue;
        }
        for _ in 0..per_scale {
            let c = centers[rng.gen_range(0..centers.len())];
            let pc = grid.pos(c);
            let disk: Vec<NodeId> = grid
                .inside_nodes()
                .filter(|n| (grid.pos(*n) - pc).norm() < radius)
                .collect();
            if !disk.is_empty() {
                out.push(disk);
            }
        }
    }
    out
}

//! Candidate absolute minimizers for Dirichlet data via the midpoint
//! fixed-point iteration u <- (T^d u + T_d u)/2, plus the sigma-patching
//! operator that lifts small-slope regions to slope sigma, and the annulus
//! non-uniqueness scenario.

use crate::action::step_costs;
use crate::error::{Error, Result};
use crate::flow::{gradient_at, lip_bound, localization, lower_step, oscillation, upper_step, LocalizationWindow, SlopeField};
use crate::geometry::{build_grid, dijkstra, DistanceDirection, DomainSpec, GridDomain, NodeId, Stencil};
use crate::hamiltonian::{CoercivityProfile, Hamiltonian};
use crate::math::Vec2;

/// min over seeds b of [value(b) + d_lambda(b, .)]: the largest field whose
/// increments respect the level-lambda cones (extension from above).
pub fn extension_above(
    grid: &GridDomain,
    spec: &Hamiltonian,
    lambda: f64,
    seeds: &[(NodeId, f64)],
) -> Result<Vec<f64>> {
    let h = grid.h;
    let (values, _, _) = dijkstra(
        grid,
        seeds,
        DistanceDirection::FromSource,
        None,
        |a, b, k| {
            let o = &grid.offsets()[k];
            let mid = grid.edge_midpoint(a, b);
            spec.sublevel_support(mid, lambda, Vec2::new(o.dx as f64 * h, o.dy as f64 * h))
                .unwrap_or(f64::INFINITY)
        },
    );
    Ok(values)
}

/// max over seeds b of [value(b) - d_lambda(., b)]: the smallest compatible
/// field (extension from below).
pub fn extension_below(
    grid: &GridDomain,
    spec: &Hamiltonian,
    lambda: f64,
    seeds: &[(NodeId, f64)],
) -> Result<Vec<f64>> {
    let h = grid.h;
    let neg: Vec<(NodeId, f64)> = seeds.iter().map(|(n, v)| (*n, -v)).collect();
    let (values, _, _) = dijkstra(
        grid,
        &neg,
        DistanceDirection::ToSource,
        None,
        |a, b, k| {
            let o = &grid.offsets()[k];
            let mid = grid.edge_midpoint(a, b);
            spec.sublevel_support(mid, lambda, Vec2::new(o.dx as f64 * h, o.dy as f64 * h))
                .unwrap_or(f64::INFINITY)
        },
    );
    Ok(values.into_iter().map(|v| -v).collect())
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub delta: f64,
    pub max_iters: usize,
    pub eps: f64,
}

/// Solver output: the field, convergence data, and the localization window of
/// the initialization (the midpoint step size should sit inside it).
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub delta: f64,
    /// Level chosen for the cone-based initialization.
    pub lambda_init: f64,
    pub init: Vec<f64>,
    pub window: Option<LocalizationWindow>,
    pub delta_in_window: bool,
}

/// Fixed-point iteration for Dirichlet data `g` (read at boundary nodes):
/// u_{k+1} = (T^d u_k + T_d u_k) / 2 on interior nodes, boundary clamped.
/// Initialization is the cone-based extension at the smallest admissible
/// tabulated level.
pub fn solve_dirichlet(
    grid: &GridDomain,
    spec: &Hamiltonian,
    profile: &CoercivityProfile,
    g: &[f64],
    params: &SolveParams,
) -> Result<SolveResult> {
    let boundary: Vec<NodeId> = grid.boundary_nodes().collect();
    if boundary.is_empty() {
        return Err(Error::Domain("solve_dirichlet: domain has no boundary nodes".into()));
    }
    for &b in &boundary {
        if !g[b].is_finite() {
            return Err(Error::Precondition(format!(
                "solve_dirichlet: boundary data not finite at node {b}"
            )));
        }
    }
    let scale = boundary.iter().map(|b| g[*b].abs()).fold(1.0f64, f64::max);

    // lambda scan: a level is admissible exactly when the cone extension
    // reproduces every boundary value. The iteration starts from the midpoint
    // of the lower and upper extensions, which reproduces constants exactly.
    let seeds: Vec<(NodeId, f64)> = boundary.iter().map(|b| (*b, g[*b])).collect();
    let mut init = None;
    let mut lambda_init = f64::NAN;
    for lambda in &profile.lambda_samples {
        let above = extension_above(grid, spec, *lambda, &seeds)?;
        let worst = boundary
            .iter()
            .map(|b| (above[*b] - g[*b]).abs())
            .fold(0.0f64, f64::max);
        if worst <= 1e-9 * scale {
            let below = extension_below(grid, spec, *lambda, &seeds)?;
            init = Some(
                above
                    .iter()
                    .zip(&below)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect::<Vec<f64>>(),
            );
            lambda_init = *lambda;
            break;
        }
    }
    let Some(init) = init else {
        return Err(Error::DataIncompatibility(
            "solve_dirichlet: no tabulated level admits the boundary data (data too steep)".into(),
        ));
    };

    let window = {
        let alpha = oscillation(grid, &init);
        let k_lip = lip_bound(grid, &init);
        let r = 4.0 * grid.h;
        localization(grid, spec, profile, alpha, k_lip, r).ok()
    };
    let delta_in_window = window.as_ref().map(|w| params.delta <= w.eta1).unwrap_or(false);

    let costs = step_costs(grid, spec, params.delta)?;
    let mut u = init.clone();
    let mut up = Vec::new();
    let mut lo = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    for it in 0..params.max_iters {
        upper_step(grid, &costs, &u, &mut up);
        lower_step(grid, &costs, &u, &mut lo);
        let mut worst: f64 = 0.0;
        for node in grid.inside_nodes() {
            let new = if grid.is_boundary(node) {
                g[node]
            } else {
                0.5 * (up[node] + lo[node])
            };
            worst = worst.max((new - u[node]).abs());
            u[node] = new;
        }
        residual = worst;
        iterations = it + 1;
        if worst < params.eps {
            break;
        }
    }
    Ok(SolveResult {
        u,
        iterations,
        residual,
        delta: params.delta,
        lambda_init,
        init,
        window,
        delta_in_window,
    })
}

/// Patching output: the lowered field and its diagnostics.
#[derive(Debug, Clone)]
pub struct PatchResult {
    pub sigma: f64,
    /// Nodes of the small-slope region V_sigma.
    pub v_mask: Vec<bool>,
    pub u_sigma: Vec<f64>,
    /// Positive excess of the raw chain extension over u (clamped away);
    /// float-scale in exact arithmetic.
    pub max_excess: f64,
    pub max_change: f64,
    /// V_sigma nodes with no admissible chain to the region boundary (kept at u).
    pub unreachable: usize,
    pub noop: bool,
}

/// Lower u on its small-slope region V_sigma = { S+ u < sigma } by chained
/// level-sigma cone extensions from the region boundary. Chains run through
/// V_sigma only; their last node lies on the region boundary.
pub fn patch(
    grid: &GridDomain,
    spec: &Hamiltonian,
    u: &[f64],
    sigma: f64,
    slope: &SlopeField,
) -> Result<PatchResult> {
    if !(sigma > 0.0) {
        return Err(Error::Precondition("patch: sigma must be positive".into()));
    }
    let n = grid.node_count();
    let mut v_mask = vec![false; n];
    for node in grid.inside_nodes() {
        if !grid.is_boundary(node) && slope.s_plus[node] < sigma {
            v_mask[node] = true;
        }
    }
    if !v_mask.iter().any(|b| *b) {
        return Ok(PatchResult {
            sigma,
            v_mask,
            u_sigma: u.to_vec(),
            max_excess: 0.0,
            max_change: 0.0,
            unreachable: 0,
            noop: true,
        });
    }
    // region boundary: inside nodes adjacent to V_sigma but not in it
    let mut rim = vec![false; n];
    for node in grid.inside_nodes() {
        if v_mask[node] {
            continue;
        }
        for k in 0..grid.offsets().len() {
            if let Some(m) = grid.neighbor(node, k) {
                if v_mask[m] {
                    rim[node] = true;
                    break;
                }
            }
        }
    }
    // multi-source on the edge-reversed graph restricted to chains whose
    // non-terminal nodes stay in V_sigma: relaxation may only land on V_sigma
    let seeds: Vec<(NodeId, f64)> = (0..n).filter(|i| rim[*i]).map(|b| (b, -u[b])).collect();
    let h = grid.h;
    let (neg_v, _, _) = dijkstra(
        grid,
        &seeds,
        DistanceDirection::ToSource,
        Some(&v_mask),
        |a, b, k| {
            let o = &grid.offsets()[k];
            let mid = grid.edge_midpoint(a, b);
            spec.sublevel_support(mid, sigma, Vec2::new(o.dx as f64 * h, o.dy as f64 * h))
                .unwrap_or(f64::INFINITY)
        },
    );
    let mut u_sigma = u.to_vec();
    let mut max_excess: f64 = 0.0;
    let mut max_change: f64 = 0.0;
    let mut unreachable = 0usize;
    for node in grid.inside_nodes() {
        if !v_mask[node] {
            continue;
        }
        let m = neg_v[node];
        if !m.is_finite() {
            unreachable += 1;
            continue;
        }
        let v = -m;
        if v > u[node] {
            max_excess = max_excess.max(v - u[node]);
        }
        let new = v.min(u[node]);
        max_change = max_change.max(u[node] - new);
        u_sigma[node] = new;
    }
    Ok(PatchResult {
        sigma,
        v_mask,
        u_sigma,
        max_excess,
        max_change,
        unreachable,
        noop: false,
    })
}

/// The annulus non-uniqueness scenario: two explicit fields with identical
/// boundary values and vanishing energy whose interior gap stays away from 0.
#[derive(Debug)]
pub struct CounterexampleBundle {
    pub grid: GridDomain,
    pub spec: Hamiltonian,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// max |u - v| over boundary nodes (snapped to the true circles).
    pub boundary_residual: f64,
    pub energy_u: f64,
    pub energy_v: f64,
    /// max over non-boundary nodes of u - v.
    pub interior_gap: f64,
    pub gap_node: NodeId,
}

/// Evaluate u(x) = |x| - 1/2 and v(x) = 2(|x|^2 - 1/4)/5 on the annulus
/// 1/2 < |x| < 2 under the rotation Hamiltonian. Boundary nodes are evaluated
/// at their radial projection onto the true circle so the two traces agree
/// there identically.
pub fn counterexample_scenario(h: f64) -> Result<CounterexampleBundle> {
    if h > 0.05 {
        return Err(Error::Precondition(format!(
            "counterexample_scenario: h = {h} too coarse for a connected annulus (need <= 0.05)"
        )));
    }
    let grid = build_grid(&DomainSpec::Annulus { r_in: 0.5, r_out: 2.0 }, h, Stencil::N16)?;
    let spec = Hamiltonian::rotation_counterexample(2.0)?;
    let n = grid.node_count();
    let mut u = vec![f64::INFINITY; n];
    let mut v = vec![f64::INFINITY; n];
    let eval_u = |r: f64| r - 0.5;
    let eval_v = |r: f64| 2.0 * (r * r - 0.25) / 5.0;
    for node in grid.inside_nodes() {
        let mut r = grid.pos(node).norm();
        if grid.is_boundary(node) {
            r = if r < 1.25 { 0.5 } else { 2.0 };
        }
        u[node] = eval_u(r);
        v[node] = eval_v(r);
    }
    let mut boundary_residual: f64 = 0.0;
    for node in grid.boundary_nodes() {
        boundary_residual = boundary_residual.max((u[node] - v[node]).abs());
    }
    // energies over nodes whose central differences cannot touch a snapped
    // boundary value (the 16-neighborhood boundary ring is two cells thick)
    let interior = grid.interior_mask(3);
    let mut energy_u: f64 = 0.0;
    let mut energy_v: f64 = 0.0;
    let mut interior_gap = f64::NEG_INFINITY;
    let mut gap_node = 0;
    for node in grid.inside_nodes() {
        if interior[node] {
            let x = grid.pos(node);
            energy_u = energy_u.max(spec.eval(x, gradient_at(&grid, &u, node))?);
            energy_v = energy_v.max(spec.eval(x, gradient_at(&grid, &v, node))?);
        }
        if !grid.is_boundary(node) {
            let gap = u[node] - v[node];
            if gap > interior_gap {
                interior_gap = gap;
                gap_node = node;
            }
        }
    }
    Ok(CounterexampleBundle {
        grid,
        spec,
        u,
        v,
        boundary_residual,
        energy_u,
        energy_v,
        interior_gap,
        gap_node,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::slope_fields;
    use crate::hamiltonian::{coercivity_profile, SupportParams};
    use approx::assert_relative_eq;

    fn unit_box(h: f64) -> GridDomain {
        build_grid(
            &DomainSpec::Box {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(1.0, 1.0),
            },
            h,
            Stencil::N16,
        )
        .unwrap()
    }

    fn quadratic_profile() -> CoercivityProfile {
        coercivity_profile(
            &Hamiltonian::quadratic(),
            &[0.01, 0.04, 0.16, 0.64, 2.56, 10.24],
            &[],
            &SupportParams::default(),
        )
        .unwrap()
    }

    fn boundary_data(grid: &GridDomain, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        (0..grid.node_count()).map(|n| f(grid.pos(n))).collect()
    }

    #[test]
    fn constant_data_solves_in_one_iteration() {
        let g = unit_box(1.0 / 16.0);
        let spec = Hamiltonian::quadratic();
        let prof = quadratic_profile();
        let data = boundary_data(&g, |_| 0.75);
        let res = solve_dirichlet(
            &g,
            &spec,
            &prof,
            &data,
            &SolveParams {
                delta: 2.0 / 16.0,
                max_iters: 50,
                eps: 1e-13,
            },
        )
        .unwrap();
        assert!(res.iterations <= 2, "constants are exact fixed points");
        for node in g.inside_nodes() {
            assert_eq!(res.u[node], 0.75);
        }
    }

    #[test]
    fn linear_data_converges_to_the_linear_function() {
        let g = unit_box(1.0 / 16.0);
        let spec = Hamiltonian::quadratic();
        let prof = quadratic_profile();
        let e = Vec2::new(0.5, 0.25);
        let data = boundary_data(&g, |p| p.dot(e));
        let res = solve_dirichlet(
            &g,
            &spec,
            &prof,
            &data,
            &SolveParams {
                delta: 2.0 / 16.0,
                max_iters: 4000,
                eps: 1e-12,
            },
        )
        .unwrap();
        let osc = 0.75; // oscillation of the data over the box
        for node in g.inside_nodes() {
            let exact = g.pos(node).dot(e);
            assert!(
                (res.u[node] - exact).abs() <= 0.02 * osc,
                "node {node}: {} vs {exact}",
                res.u[node]
            );
        }
        assert!(res.residual < 1e-12);
    }

    #[test]
    fn ordered_data_gives_ordered_solutions() {
        let g = unit_box(1.0 / 12.0);
        let spec = Hamiltonian::quadratic();
        let prof = quadratic_profile();
        let g1 = boundary_data(&g, |p| (2.0 * p.x).sin() * 0.2);
        let g2 = boundary_data(&g, |p| (2.0 * p.x).sin() * 0.2 + 0.1 * p.y + 0.05);
        let params = SolveParams {
            delta: 2.0 / 12.0,
            max_iters: 3000,
            eps: 1e-11,
        };
        let r1 = solve_dirichlet(&g, &spec, &prof, &g1, &params).unwrap();
        let r2 = solve_dirichlet(&g, &spec, &prof, &g2, &params).unwrap();
        for node in g.inside_nodes() {
            assert!(
                r1.u[node] <= r2.u[node] + 2.0 * params.eps + 1e-9,
                "monotonicity at {node}"
            );
        }
        // range preservation
        let (lo, hi) = (
            g.boundary_nodes().map(|b| g1[b]).fold(f64::INFINITY, f64::min),
            g.boundary_nodes().map(|b| g1[b]).fold(f64::NEG_INFINITY, f64::max),
        );
        for node in g.inside_nodes() {
            assert!(r1.u[node] >= lo - 1e-12 && r1.u[node] <= hi + 1e-12);
        }
    }

    #[test]
    fn too_steep_data_is_rejected() {
        let g = unit_box(1.0 / 12.0);
        let spec = Hamiltonian::quadratic();
        // tiny level table: max slope r_lambda stays below the data slope
        let prof = coercivity_profile(
            &spec,
            &[1e-6, 4e-6],
            &[],
            &SupportParams::default(),
        )
        .unwrap();
        let data = boundary_data(&g, |p| p.x);
        let err = solve_dirichlet(
            &g,
            &spec,
            &prof,
            &data,
            &SolveParams {
                delta: 0.1,
                max_iters: 10,
                eps: 1e-9,
            },
        );
        assert!(matches!(err, Err(Error::DataIncompatibility(_))));
    }

    #[test]
    fn stationarity_residual_at_convergence() {
        let g = unit_box(1.0 / 12.0);
        let spec = Hamiltonian::quadratic();
        let prof = quadratic_profile();
        let data = boundary_data(&g, |p| 0.3 * p.x + 0.1 * (3.0 * p.y).sin());
        let params = SolveParams {
            delta: 2.0 / 12.0,
            max_iters: 5000,
            eps: 1e-12,
        };
        let res = solve_dirichlet(&g, &spec, &prof, &data, &params).unwrap();
        // |T^d u + T_d u - 2u| <= 2 eps on the interior at convergence
        let costs = step_costs(&g, &spec, params.delta).unwrap();
        let mut up = Vec::new();
        let mut lo = Vec::new();
        upper_step(&g, &costs, &res.u, &mut up);
        lower_step(&g, &costs, &res.u, &mut lo);
        for node in g.inside_nodes() {
            if !g.is_boundary(node) {
                let r = (up[node] + lo[node] - 2.0 * res.u[node]).abs();
                assert!(r <= 2.0 * params.eps + 1e-12, "stationarity at {node}: {r}");
            }
        }
    }

    #[test]
    fn patch_noop_below_the_minimum_slope() {
        let g = unit_box(1.0 / 24.0);
        let spec = Hamiltonian::quadratic();
        let u: Vec<f64> = (0..g.node_count()).map(|n| g.pos(n).x * 0.8).collect();
        let probes: Vec<f64> = [0.7, 1.0, 1.4, 2.0].iter().map(|c| c * 2.0 * g.h).collect();
        let sf = slope_fields(&g, &spec, &u, &probes).unwrap();
        // S+ ~ 0.64 everywhere: sigma below that leaves u untouched
        let res = patch(&g, &spec, &u, 0.05, &sf).unwrap();
        assert!(res.noop);
        assert_eq!(res.u_sigma, u);
    }

    #[test]
    fn patch_lowers_flat_regions_and_pins_the_rim() {
        let g = unit_box(1.0 / 32.0);
        let spec = Hamiltonian::quadratic();
        // flat around the center, linear ramp outside
        let u: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let p = g.pos(n);
                ((p - Vec2::new(0.5, 0.5)).norm() - 0.2).max(0.0) * 0.8
            })
            .collect();
        let probes: Vec<f64> = [0.5, 0.7, 1.0, 1.4, 2.0].iter().map(|c| c * 2.0 * g.h).collect();
        let sf = slope_fields(&g, &spec, &u, &probes).unwrap();
        let sigma = 0.1;
        let res = patch(&g, &spec, &u, sigma, &sf).unwrap();
        assert!(!res.noop);
        assert!(res.unreachable == 0);
        // u_sigma <= u exactly, equality off V_sigma
        for node in g.inside_nodes() {
            assert!(res.u_sigma[node] <= u[node]);
            if !res.v_mask[node] {
                assert_eq!(res.u_sigma[node], u[node]);
            }
        }
        // the construction really lowered the flat plateau
        let c = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        assert!(res.v_mask[c]);
        assert!(res.u_sigma[c] < u[c] - 1e-4);
        // raw chain excess is float-level
        assert!(res.max_excess <= 1e-9, "claim-1 excess: {}", res.max_excess);
        // patched slope reaches sigma inside V_sigma (within probe tolerance)
        let sf2 = slope_fields(&g, &spec, &res.u_sigma, &probes).unwrap();
        let margin = g.interior_mask(3);
        for node in g.inside_nodes() {
            if res.v_mask[node] && margin[node] {
                // skip nodes on the rim of V_sigma where the max clips
                let near_rim = (0..g.offsets().len()).any(|k| {
                    g.neighbor(node, k).map(|m| !res.v_mask[m]).unwrap_or(true)
                });
                if !near_rim {
                    assert!(
                        sf2.s_plus[node] >= sigma * 0.9,
                        "slope after patching at {node}: {}",
                        sf2.s_plus[node]
                    );
                }
            }
        }
    }

    #[test]
    fn counterexample_scenario_reproduces_the_frozen_oracle() {
        // scalar oracle: maximize r - 1/2 - 2(r^2 - 1/4)/5 on [1/2, 2] by a
        // dense scan; the exact maximum is 9/40 at r = 5/4
        let mut best = f64::NEG_INFINITY;
        let mut best_r = 0.0;
        for i in 0..=300000 {
            let r = 0.5 + 1.5 * (i as f64) / 300000.0;
            let v = r - 0.5 - 2.0 * (r * r - 0.25) / 5.0;
            if v > best {
                best = v;
                best_r = r;
            }
        }
        assert_relative_eq!(best, 0.225, epsilon = 1e-9);
        assert_relative_eq!(best_r, 1.25, epsilon = 1e-4);

        let bundle = counterexample_scenario(0.02).unwrap();
        assert!(bundle.boundary_residual <= 1e-12, "boundary values agree identically");
        assert!(bundle.energy_u <= 1e-2, "energy of u: {}", bundle.energy_u);
        assert!(bundle.energy_v <= 1e-2, "energy of v: {}", bundle.energy_v);
        assert!(
            (bundle.interior_gap - 0.225).abs() <= 0.01,
            "gap {} vs oracle 0.225",
            bundle.interior_gap
        );
        let r_at_gap = bundle.grid.pos(bundle.gap_node).norm();
        assert!((r_at_gap - 1.25).abs() <= 0.05, "gap at r = {r_at_gap}");
        assert!(counterexample_scenario(0.2).is_err());
    }
}

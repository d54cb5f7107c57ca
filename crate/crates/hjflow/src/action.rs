//! The action function over a time grid, its closed-form oracle for
//! x-independent Hamiltonians, and extraction of the level-lambda front sets.

use crate::error::{Error, Result};
use crate::geometry::{DistanceField, GridDomain, NodeId};
use crate::hamiltonian::Hamiltonian;
use crate::math::Vec2;
use crate::INF_SENTINEL;
use rayon::prelude::*;

/// Per-edge one-step costs delta * L(midpoint, offset/delta).
///
/// For x-independent Hamiltonians a single per-offset vector serves every
/// edge; otherwise costs are evaluated on demand.
pub enum StepCosts<'a> {
    Uniform(Vec<f64>),
    PerEdge {
        grid: &'a GridDomain,
        spec: &'a Hamiltonian,
        delta: f64,
    },
}

impl<'a> StepCosts<'a> {
    /// Cost of traversing the original-graph edge from `from` to `to` (offset
    /// index `k` points from -> to) in one step of length delta.
    #[inline]
    pub fn cost(&self, from: NodeId, to: NodeId, k: usize) -> f64 {
        match self {
            StepCosts::Uniform(v) => v[k],
            StepCosts::PerEdge { grid, spec, delta } => {
                let o = &grid.offsets()[k];
                let mid = grid.edge_midpoint(from, to);
                let q = Vec2::new(o.dx as f64 * grid.h / delta, o.dy as f64 * grid.h / delta);
                match spec.lagrangian(mid, q) {
                    Ok(l) => (delta * l).min(INF_SENTINEL),
                    Err(_) => INF_SENTINEL,
                }
            }
        }
    }
}

/// Build the one-step cost table for a grid/spec/delta triple.
pub fn step_costs<'a>(
    grid: &'a GridDomain,
    spec: &'a Hamiltonian,
    delta: f64,
) -> Result<StepCosts<'a>> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {delta}")));
    }
    if spec.is_x_dependent() {
        return Ok(StepCosts::PerEdge { grid, spec, delta });
    }
    let mut v = Vec::with_capacity(grid.offsets().len());
    for o in grid.offsets() {
        let q = Vec2::new(o.dx as f64 * grid.h / delta, o.dy as f64 * grid.h / delta);
        let l = spec.lagrangian(Vec2::ZERO, q)?;
        v.push((delta * l).min(INF_SENTINEL));
    }
    Ok(StepCosts::Uniform(v))
}

/// Action slices from one source over a uniform time grid. Slice k holds the
/// k-step dynamic-programming value at time k * delta; unreached nodes carry
/// the saturating sentinel.
#[derive(Debug, Clone)]
pub struct ActionField {
    pub source: NodeId,
    pub delta: f64,
    pub slices: Vec<Vec<f64>>,
}

impl ActionField {
    pub fn steps(&self) -> usize {
        self.slices.len() - 1
    }
}

/// Fraction of the sentinel above which a value counts as unreached.
pub fn is_unreached(v: f64) -> bool {
    v >= 0.5 * INF_SENTINEL
}

/// One dynamic-programming sweep: out[y] = min over stencil z and z = y of
/// in[z] + cost(z -> y). Node-parallel.
pub fn dp_min_step(grid: &GridDomain, costs: &StepCosts, input: &[f64], output: &mut Vec<f64>) {
    let n = grid.node_count();
    output.clear();
    output.reserve(n);
    (0..n)
        .into_par_iter()
        .map(|y| {
            if !grid.is_inside(y) {
                return f64::INFINITY;
            }
            let mut best = input[y]; // resting curve, L(y, 0) = 0
            for k in 0..grid.offsets().len() {
                if let Some(z) = grid.neighbor(y, k) {
                    // the curve travels z -> y: original edge offset is the opposite
                    let ko = grid.offsets()[k].opposite;
                    let c = costs.cost(z, y, ko);
                    let cand = input[z] + c;
                    if cand < best {
                        best = cand;
                    }
                }
            }
            best.min(INF_SENTINEL)
        })
        .collect_into_vec(output);
}

/// Compute the action field from `source` by dynamic programming over
/// piecewise-linear curves with node breakpoints, one step per delta.
///
/// Emits a starvation warning (in the returned field's construction, via
/// `reachability_warning`) when delta is too small for the stencil to move a
/// cell at the configured speed cap.
pub fn action_dp(
    grid: &GridDomain,
    spec: &Hamiltonian,
    source: NodeId,
    delta: f64,
    steps: usize,
) -> Result<ActionField> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("action_dp: delta must be positive, got {delta}")));
    }
    if steps < 1 {
        return Err(Error::Config("action_dp: need at least one step".into()));
    }
    if !grid.is_inside(source) {
        return Err(Error::Domain("action_dp: source is outside the domain".into()));
    }
    let costs = step_costs(grid, spec, delta)?;
    let n = grid.node_count();
    let mut slice0 = vec![f64::INFINITY; n];
    for node in grid.inside_nodes() {
        slice0[node] = if node == source { 0.0 } else { INF_SENTINEL };
    }
    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(slice0);
    let mut next = Vec::new();
    for k in 0..steps {
        dp_min_step(grid, &costs, &slices[k], &mut next);
        slices.push(std::mem::take(&mut next));
    }
    Ok(ActionField {
        source,
        delta,
        slices,
    })
}

/// True when one step cannot move a full cell at the given speed cap
/// (CFL-like reachability starvation; a warning condition, not an error).
pub fn reachability_warning(grid: &GridDomain, delta: f64, speed_cap: f64) -> bool {
    delta < grid.h / speed_cap
}

/// Closed-form action t * L((y - x)/t) for x-independent Hamiltonians; serves
/// as the oracle for `action_dp`. The segment [x, y] must stay inside.
pub fn action_hopf_lax(
    grid: &GridDomain,
    spec: &Hamiltonian,
    x: Vec2,
    y: Vec2,
    t: f64,
) -> Result<f64> {
    if spec.is_x_dependent() {
        return Err(Error::NotApplicable(
            "hopf-lax formula requires an x-independent Hamiltonian".into(),
        ));
    }
    if t < 0.0 {
        return Err(Error::Domain("action_hopf_lax: t must be nonnegative".into()));
    }
    if t == 0.0 {
        return Ok(if (y - x).norm() == 0.0 { 0.0 } else { f64::INFINITY });
    }
    // formula is only valid when the straight segment stays inside
    let steps = ((y - x).norm() / grid.h).ceil() as usize + 1;
    for i in 0..=steps {
        let p = x + (y - x) * (i as f64 / steps as f64);
        if grid.node_at(p).is_none() {
            return Err(Error::NotApplicable(
                "hopf-lax formula: segment leaves the domain".into(),
            ));
        }
    }
    Ok(t * spec.lagrangian(Vec2::ZERO, (y - x) * (1.0 / t))?)
}

/// Per-time-step front node sets: nodes where the action meets the cone
/// identity |L_t - (d_lambda - lambda t)| <= tau.
#[derive(Debug, Clone)]
pub struct FrontFamily {
    pub lambda: f64,
    pub tau: f64,
    /// fronts[k] = nodes matching at time k * delta.
    pub fronts: Vec<Vec<NodeId>>,
    /// Ball-containment diagnostics per time step, see `ContainmentStats`.
    pub containment: Vec<ContainmentStats>,
    /// Nodes matching the identity at more than one time index.
    pub multiplicity_counts: Vec<usize>,
}

/// Reach diagnostics at one time step: how the sub-lambda-t distance ball
/// sits inside the union of earlier fronts, and how far fronts overshoot the
/// outer a_lambda R_lambda t ball.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ContainmentStats {
    /// Nodes with d_lambda < lambda t not covered by fronts before t.
    pub missing_inner: usize,
    /// Worst d_lambda-slack by which an uncovered inner-ball node misses the ball edge.
    pub worst_inner_slack: f64,
    /// Front nodes beyond the closed outer ball of radius `outer_radius`.
    pub beyond_outer: usize,
    pub outer_radius: f64,
}

/// Identify the approximate front sets from an action field and the matching
/// distance field (same grid, same source). Empty fronts are legal.
pub fn extract_fronts(
    grid: &GridDomain,
    action: &ActionField,
    dist: &DistanceField,
    lambda: f64,
    tau: f64,
    a_lambda: f64,
    big_r_lambda: f64,
) -> Result<FrontFamily> {
    if dist.source != action.source {
        return Err(Error::Precondition(
            "extract_fronts: action and distance fields must share the source".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::Precondition("extract_fronts: tau must be positive".into()));
    }
    let delta = action.delta;
    let mut fronts = Vec::with_capacity(action.slices.len());
    let mut hits = vec![0usize; grid.node_count()];
    for (k, slice) in action.slices.iter().enumerate() {
        let t = k as f64 * delta;
        let mut front = Vec::new();
        for node in grid.inside_nodes() {
            let a = slice[node];
            let d = dist.values[node];
            if is_unreached(a) || !d.is_finite() {
                continue;
            }
            if (a - (d - lambda * t)).abs() <= tau {
                front.push(node);
                hits[node] += 1;
            }
        }
        fronts.push(front);
    }

    // containment diagnostics against Theorem-style inner/outer balls
    let mut covered = vec![false; grid.node_count()];
    let mut containment = Vec::with_capacity(fronts.len());
    for (k, front) in fronts.iter().enumerate() {
        let t = k as f64 * delta;
        let outer_radius = a_lambda * big_r_lambda * t;
        let mut missing_inner = 0usize;
        let mut worst_inner_slack: f64 = 0.0;
        let mut beyond_outer = 0usize;
        if k > 0 {
            for node in grid.inside_nodes() {
                let d = dist.values[node];
                if d.is_finite() && d < lambda * t && !covered[node] {
                    missing_inner += 1;
                    worst_inner_slack = worst_inner_slack.max(lambda * t - d);
                }
            }
        }
        for node in front {
            if dist.values[*node] > outer_radius + tau {
                beyond_outer += 1;
            }
        }
        containment.push(ContainmentStats {
            missing_inner,
            worst_inner_slack,
            beyond_outer,
            outer_radius,
        });
        for node in front {
            covered[*node] = true;
        }
    }
    let multiplicity_counts = hits.iter().cloned().filter(|h| *h > 1).collect();
    Ok(FrontFamily {
        lambda,
        tau,
        fronts,
        containment,
        multiplicity_counts,
    })
}

/// Default front-matching tolerance: one time step of drift plus spatial slack.
pub fn default_front_tau(grid: &GridDomain, lambda: f64, delta: f64, big_r_lambda: f64) -> f64 {
    lambda * delta + 2.0 * big_r_lambda * grid.h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, distance_dlambda, DistanceDirection, DomainSpec, Stencil};
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

    #[test]
    fn slice_zero_is_the_point_mass_and_source_stays_zero() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let s = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        let f = action_dp(&g, &spec, s, 1.0 / 16.0, 8).unwrap();
        assert_eq!(f.slices[0][s], 0.0);
        let other = g.node_at(Vec2::new(0.25, 0.5)).unwrap();
        assert!(is_unreached(f.slices[0][other]));
        for k in 0..=8 {
            assert_eq!(f.slices[k][s], 0.0, "resting curve keeps the source at zero");
        }
    }

    #[test]
    fn slices_decrease_in_time_and_respect_duality() {
        let g = unit_box(1.0 / 32.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let s = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        let f = action_dp(&g, &spec, s, 1.0 / 32.0, 10).unwrap();
        let lambdas = [0.5, 1.0, 4.0];
        let dists: Vec<_> = lambdas
            .iter()
            .map(|l| distance_dlambda(&g, &spec, *l, s, DistanceDirection::FromSource).unwrap())
            .collect();
        for k in 1..=10 {
            let t = k as f64 / 32.0;
            for node in g.inside_nodes() {
                assert!(
                    f.slices[k][node] <= f.slices[k - 1][node] + 1e-12,
                    "monotonicity in t"
                );
                if !is_unreached(f.slices[k][node]) {
                    for (l, d) in lambdas.iter().zip(&dists) {
                        // exact graph arithmetic: k-step costs dominate the level weights
                        assert!(
                            f.slices[k][node] >= d.values[node] - l * t - 1e-9,
                            "duality lower bound at node {node}, lambda {l}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dp_matches_hopf_lax_for_quadratic() {
        // fine velocity lattice: disk stencil, few steps
        let g = unit_box(1.0 / 48.0, Stencil::Disk { radius: 7 });
        let spec = Hamiltonian::quadratic();
        let s = g.node_at(Vec2::new(0.25, 0.3)).unwrap();
        let steps = 6;
        let t = 0.25;
        let f = action_dp(&g, &spec, s, t / steps as f64, steps).unwrap();
        let x = g.pos(s);
        for target in [
            Vec2::new(0.55, 0.3),
            Vec2::new(0.45, 0.55),
            Vec2::new(0.6, 0.55),
        ] {
            let y = g.node_at(target).unwrap();
            let oracle = action_hopf_lax(&g, &spec, x, g.pos(y), t).unwrap();
            assert_relative_eq!(f.slices[steps][y], oracle, max_relative = 0.05);
        }
    }

    #[test]
    fn hopf_lax_edge_cases() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let x = Vec2::new(0.5, 0.5);
        assert_eq!(action_hopf_lax(&g, &spec, x, x, 0.7).unwrap(), 0.0);
        assert_eq!(action_hopf_lax(&g, &spec, x, x, 0.0).unwrap(), 0.0);
        // |y - x| = 1 at t = 0.5 gives |y-x|^2 / (4t) = 0.5 on a segment test
        let g2 = build_grid(
            &DomainSpec::Box {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(2.0, 1.0),
            },
            1.0 / 16.0,
            Stencil::N16,
        )
        .unwrap();
        let a = Vec2::new(0.25, 0.5);
        let b = Vec2::new(1.25, 0.5);
        assert_relative_eq!(
            action_hopf_lax(&g2, &spec, a, b, 0.5).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        // linearity along the segment
        let theta = 0.25;
        let mid = a + (b - a) * (theta / 0.5);
        assert_relative_eq!(
            action_hopf_lax(&g2, &spec, a, mid, theta).unwrap(),
            (theta / 0.5) * action_hopf_lax(&g2, &spec, a, b, 0.5).unwrap(),
            epsilon = 1e-12
        );
        // leaving the domain is rejected
        let outside = Vec2::new(3.5, 0.5);
        assert!(action_hopf_lax(&g2, &spec, a, outside, 0.5).is_err());
        // x-dependent specs are rejected
        let rot = Hamiltonian::rotation_counterexample(2.0).unwrap();
        assert!(action_hopf_lax(&g, &rot, x, x, 1.0).is_err());
    }

    #[test]
    fn gauge_hamiltonian_action_is_a_reachability_indicator() {
        // H(p) = |p|: L = 0 on the unit ball, sentinel outside; the brute-force
        // Legendre oracle fixes the dual ball radius at 1
        let spec = Hamiltonian::norm_power(2.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let q = Vec2::unit(0.031415 * i as f64) * (0.99);
            worst = worst.max(spec.lagrangian(Vec2::ZERO, q).unwrap());
        }
        assert_eq!(worst, 0.0);
        assert!(spec.lagrangian(Vec2::ZERO, Vec2::new(1.01, 0.0)).unwrap().is_infinite());

        // delta = 4h makes the disk-4 stencil exactly the unit speed ball
        let g = unit_box(1.0 / 32.0, Stencil::Disk { radius: 4 });
        let s = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        let steps = 2;
        let t = 0.25;
        let f = action_dp(&g, &spec, s, t / steps as f64, steps).unwrap();
        for node in g.inside_nodes() {
            let r = (g.pos(node) - g.pos(s)).norm();
            let v = f.slices[steps][node];
            if r <= t * 0.85 {
                assert_eq!(v, 0.0, "inside the cone: node at r = {r}");
            }
            if r > t * 1.05 {
                assert!(is_unreached(v), "outside the cone: node at r = {r}, v = {v}");
            }
        }
    }

    #[test]
    fn concatenation_superadditivity() {
        let g = unit_box(1.0 / 16.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let s = g.node_at(Vec2::new(0.25, 0.25)).unwrap();
        let delta = 1.0 / 16.0;
        let f = action_dp(&g, &spec, s, delta, 8).unwrap();
        let mids = [
            g.node_at(Vec2::new(0.5, 0.25)).unwrap(),
            g.node_at(Vec2::new(0.375, 0.5)).unwrap(),
            g.node_at(Vec2::new(0.625, 0.5)).unwrap(),
        ];
        for z in mids {
            let fz = action_dp(&g, &spec, z, delta, 4).unwrap();
            for node in g.inside_nodes() {
                let direct = f.slices[8][node];
                let through = f.slices[4][z] + fz.slices[4][node];
                assert!(
                    direct <= through + 1e-9,
                    "splitting through {z} undercuts the DP at {node}"
                );
            }
        }
    }

    #[test]
    fn superlinearity_bound_from_profile() {
        let g = unit_box(1.0 / 32.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let prof = crate::hamiltonian::coercivity_profile(
            &spec,
            &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            &[],
            &crate::hamiltonian::SupportParams::default(),
        )
        .unwrap();
        let s = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        let f = action_dp(&g, &spec, s, 1.0 / 32.0, 6).unwrap();
        let du = crate::geometry::distance_du(&g, s).unwrap();
        for k in 1..=6 {
            let t = k as f64 / 32.0;
            for node in g.inside_nodes() {
                let v = f.slices[k][node];
                if is_unreached(v) {
                    continue;
                }
                let d = du.values[node];
                let bound = prof.m_at(d / t) * d;
                assert!(
                    v >= bound - 1e-7 - 0.05 * bound,
                    "superlinearity bound at node {node}: {v} < {bound}"
                );
            }
        }
    }

    #[test]
    fn fronts_at_k0_reduce_to_the_source() {
        let g = unit_box(1.0 / 32.0, Stencil::N16);
        let spec = Hamiltonian::quadratic();
        let s = g.node_at(Vec2::new(0.5, 0.5)).unwrap();
        let delta = 1.0 / 32.0;
        let f = action_dp(&g, &spec, s, delta, 4).unwrap();
        let d = distance_dlambda(&g, &spec, 1.0, s, DistanceDirection::FromSource).unwrap();
        let tau = default_front_tau(&g, 1.0, delta, 1.0);
        let fam = extract_fronts(&g, &f, &d, 1.0, tau, 4.0, 1.0).unwrap();
        assert!(fam.fronts[0].contains(&s));
        // at k = 0 every other node is unreached, so the front is at most {source}
        assert_eq!(fam.fronts[0].len(), 1);
    }
}

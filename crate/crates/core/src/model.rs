//! Synthetic world model: hidden per-group sources, piecewise-linear member
//! functions, instance drawing, and exact validation of the extrema and
//! intersection budgets.
//!
//! A world partitions the `n` coordinates into groups. Every group owns one
//! hidden variable `z` drawn from its source distribution; each member value
//! is a piecewise-linear function of `z`. Functions carry at most `mu`
//! interior extrema and any two members of a group intersect in at most
//! `sigma` points. Both budgets are counted exactly in rational arithmetic,
//! never with a tolerance, so the validator can certify a world rather than
//! assume it.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
#[allow(unused_imports)] // Float supplies ln/sqrt/cos on no_std builds
use num_traits::Float;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Exact rational scalar used for function geometry.
pub type Rat = BigRational;

/// Shorthand constructor for small rationals.
pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorldError {
    /// Fewer than two vertices, so there is no positive-length domain.
    DegenerateFunction,
    /// Vertex z-coordinates must be strictly increasing.
    UnorderedBreakpoints,
    /// Evaluation outside the function domain.
    OutOfDomain,
    /// Pairwise operations require identical domains.
    DomainMismatch,
    /// Invalid generation or source parameters.
    BadParameters(String),
    /// Rejection sampling exhausted its attempt budget; the requested
    /// (mu, sigma, group-size) combination is likely infeasible.
    GenerationFailed { group: usize, attempts: u32 },
    /// Operation requires a discrete source.
    NotDiscrete,
}

impl fmt::Display for WorldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldError::DegenerateFunction => write!(f, "function needs at least two vertices"),
            WorldError::UnorderedBreakpoints => {
                write!(f, "vertex z-coordinates must be strictly increasing")
            }
            WorldError::OutOfDomain => write!(f, "evaluation point outside function domain"),
            WorldError::DomainMismatch => write!(f, "functions have different domains"),
            WorldError::BadParameters(msg) => write!(f, "bad parameters: {msg}"),
            WorldError::GenerationFailed { group, attempts } => write!(
                f,
                "world generation failed for group {group} after {attempts} attempts \
                 (infeasible mu/sigma/group-size combination?)"
            ),
            WorldError::NotDiscrete => write!(f, "operation requires a discrete source"),
        }
    }
}

// ── Piecewise-linear functions ────────────────────────────────────────

/// A piecewise-linear map from the hidden variable to an element value,
/// stored as vertices with exact rational coordinates. Evaluation is linear
/// interpolation between consecutive vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseLinearFunction {
    vertices: Vec<(Rat, Rat)>,
}

impl PiecewiseLinearFunction {
    pub fn new(vertices: Vec<(Rat, Rat)>) -> Result<Self, WorldError> {
        if vertices.len() < 2 {
            return Err(WorldError::DegenerateFunction);
        }
        if !vertices.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(WorldError::UnorderedBreakpoints);
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[(Rat, Rat)] {
        &self.vertices
    }

    /// Domain endpoints (first and last vertex z).
    pub fn domain(&self) -> (&Rat, &Rat) {
        (&self.vertices[0].0, &self.vertices[self.vertices.len() - 1].0)
    }

    /// Exact evaluation; exact at vertices by construction.
    pub fn eval(&self, z: &Rat) -> Result<Rat, WorldError> {
        let (lo, hi) = self.domain();
        if z < lo || z > hi {
            return Err(WorldError::OutOfDomain);
        }
        // Largest vertex index with z_t <= z.
        let t = self.vertices.partition_point(|(vz, _)| vz <= z) - 1;
        if t + 1 == self.vertices.len() {
            return Ok(self.vertices[t].1.clone());
        }
        let (z0, y0) = &self.vertices[t];
        let (z1, y1) = &self.vertices[t + 1];
        Ok(y0 + (z - z0) * (y1 - y0) / (z1 - z0))
    }

    /// Number of interior extrema: sign alternations in the sequence of
    /// nonzero segment slopes. Flat segments extend the current direction.
    pub fn extremum_count(&self) -> u32 {
        let mut count = 0;
        let mut last_sign = 0i8;
        for w in self.vertices.windows(2) {
            let dy = &w[1].1 - &w[0].1;
            let sign = if dy.is_zero() {
                0
            } else if dy.is_positive() {
                1
            } else {
                -1
            };
            if sign != 0 {
                if last_sign != 0 && sign != last_sign {
                    count += 1;
                }
                last_sign = sign;
            }
        }
        count
    }

    /// Vertically shifted copy.
    fn shifted(&self, offset: &Rat) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|(z, y)| (z.clone(), y + offset))
                .collect(),
        }
    }

    fn to_f64(&self) -> PlfF64 {
        PlfF64 {
            zs: self.vertices.iter().map(|(z, _)| r2f(z)).collect(),
            ys: self.vertices.iter().map(|(_, y)| r2f(y)).collect(),
        }
    }
}

fn r2f(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// f64 evaluation table for the sampling hot path.
#[derive(Debug, Clone)]
struct PlfF64 {
    zs: Vec<f64>,
    ys: Vec<f64>,
}

impl PlfF64 {
    fn eval(&self, z: f64) -> f64 {
        if z <= self.zs[0] {
            return self.ys[0];
        }
        let last = self.zs.len() - 1;
        if z >= self.zs[last] {
            return self.ys[last];
        }
        let t = self.zs.partition_point(|&v| v <= z) - 1;
        let dz = self.zs[t + 1] - self.zs[t];
        self.ys[t] + (z - self.zs[t]) * (self.ys[t + 1] - self.ys[t]) / dz
    }
}

/// Exact number of intersection points between two functions on a shared
/// domain, or the fact that they overlap on a whole segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionCount {
    Finite(u32),
    /// The functions coincide on a positive-length segment; the intersection
    /// set is infinite and the pair is invalid in any group.
    CoincidentOverlap,
}

/// Counts solutions of `f = g` exactly. Both functions must share a domain.
pub fn intersection_count(
    f: &PiecewiseLinearFunction,
    g: &PiecewiseLinearFunction,
) -> Result<IntersectionCount, WorldError> {
    if f.domain() != g.domain() {
        return Err(WorldError::DomainMismatch);
    }
    let mut grid: BTreeSet<Rat> = BTreeSet::new();
    for (z, _) in f.vertices().iter().chain(g.vertices().iter()) {
        grid.insert(z.clone());
    }
    let grid: Vec<Rat> = grid.into_iter().collect();
    let diff: Vec<Rat> = grid
        .iter()
        .map(|z| Ok(f.eval(z)? - g.eval(z)?))
        .collect::<Result<_, WorldError>>()?;

    let mut zeros: BTreeSet<Rat> = BTreeSet::new();
    for t in 0..grid.len() - 1 {
        let (ha, hb) = (&diff[t], &diff[t + 1]);
        if ha.is_zero() && hb.is_zero() {
            return Ok(IntersectionCount::CoincidentOverlap);
        }
        if ha.is_zero() {
            zeros.insert(grid[t].clone());
        } else if ha.is_positive() != hb.is_positive() && !hb.is_zero() {
            // One interior crossing: solve the linear segment exactly.
            let z = &grid[t] + (&grid[t + 1] - &grid[t]) * ha / (ha - hb);
            zeros.insert(z);
        }
    }
    if diff[grid.len() - 1].is_zero() {
        zeros.insert(grid[grid.len() - 1].clone());
    }
    Ok(IntersectionCount::Finite(zeros.len() as u32))
}

// ── Sources and groups ────────────────────────────────────────────────

/// The hidden per-group distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HiddenSource {
    ContinuousUniform { lo: Rat, hi: Rat },
    TruncatedGaussian { mean: Rat, sd: Rat, lo: Rat, hi: Rat },
    /// Uniform over a grid of distinct atoms (sorted ascending).
    DiscreteUniform { atoms: Vec<Rat> },
}

impl HiddenSource {
    /// Closed support interval.
    pub fn support(&self) -> (&Rat, &Rat) {
        match self {
            HiddenSource::ContinuousUniform { lo, hi } => (lo, hi),
            HiddenSource::TruncatedGaussian { lo, hi, .. } => (lo, hi),
            HiddenSource::DiscreteUniform { atoms } => (&atoms[0], &atoms[atoms.len() - 1]),
        }
    }

    /// Number of atoms for discrete sources.
    pub fn atom_count(&self) -> Option<usize> {
        match self {
            HiddenSource::DiscreteUniform { atoms } => Some(atoms.len()),
            _ => None,
        }
    }

    fn check(&self) -> Result<(), String> {
        match self {
            HiddenSource::ContinuousUniform { lo, hi } => {
                if lo >= hi {
                    return Err(String::from("continuous-uniform needs lo < hi"));
                }
            }
            HiddenSource::TruncatedGaussian { sd, lo, hi, .. } => {
                if !sd.is_positive() {
                    return Err(String::from("truncated-gaussian needs sd > 0"));
                }
                if lo >= hi {
                    return Err(String::from("truncated-gaussian needs lo < hi"));
                }
            }
            HiddenSource::DiscreteUniform { atoms } => {
                if atoms.is_empty() {
                    return Err(String::from("discrete-uniform needs at least one atom"));
                }
                if !atoms.windows(2).all(|w| w[0] < w[1]) {
                    return Err(String::from("discrete atoms must be sorted and distinct"));
                }
            }
        }
        Ok(())
    }
}

/// One group: global member indices (sorted ascending), one function per
/// member, and the hidden source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupModel {
    pub members: Vec<u32>,
    pub functions: Vec<PiecewiseLinearFunction>,
    pub source: HiddenSource,
}

impl GroupModel {
    /// Exact per-atom value table for discrete sources: `table[a][m]` is the
    /// value of member `m` at atom `a`, evaluated exactly before the single
    /// conversion to f64.
    pub fn atom_values(&self) -> Result<Vec<Vec<f64>>, WorldError> {
        let HiddenSource::DiscreteUniform { atoms } = &self.source else {
            return Err(WorldError::NotDiscrete);
        };
        atoms
            .iter()
            .map(|z| {
                self.functions
                    .iter()
                    .map(|f| f.eval(z).map(|y| r2f(&y)))
                    .collect()
            })
            .collect()
    }
}

/// A full ground-truth world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub n: u32,
    pub mu: u32,
    pub sigma: u32,
    pub seed: u64,
    pub groups: Vec<GroupModel>,
}

impl World {
    /// Group index of each element, or an error string if the member lists do
    /// not partition `0..n`.
    pub fn group_of(&self) -> Result<Vec<u32>, String> {
        let n = self.n as usize;
        let mut owner = vec![u32::MAX; n];
        for (k, g) in self.groups.iter().enumerate() {
            for &m in &g.members {
                if m as usize >= n {
                    return Err(alloc::format!("member {m} out of range for n={n}"));
                }
                if owner[m as usize] != u32::MAX {
                    return Err(alloc::format!("element {m} appears in two groups"));
                }
                owner[m as usize] = k as u32;
            }
        }
        if let Some(m) = owner.iter().position(|&g| g == u32::MAX) {
            return Err(alloc::format!("element {m} belongs to no group"));
        }
        Ok(owner)
    }

    /// Member lists of all groups (the ground-truth partition).
    pub fn partition(&self) -> Vec<Vec<u32>> {
        self.groups.iter().map(|g| g.members.clone()).collect()
    }

    /// True when every group has a discrete source (joint outcome space is
    /// enumerable).
    pub fn all_discrete(&self) -> bool {
        self.groups.iter().all(|g| g.source.atom_count().is_some())
    }
}

// ── Validation ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionExtrema {
    pub group: usize,
    pub member: u32,
    pub extrema: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIntersections {
    pub group: usize,
    pub member_a: u32,
    pub member_b: u32,
    /// `None` means the pair overlaps on a segment.
    pub count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ExtremaBudget { group: usize, member: u32, count: u32, mu: u32 },
    IntersectionBudget { group: usize, member_a: u32, member_b: u32, count: u32, sigma: u32 },
    CoincidentPair { group: usize, member_a: u32, member_b: u32 },
    BadMembership(String),
    MembersUnsorted { group: usize },
    DomainMismatch { group: usize },
    SupportOutsideDomain { group: usize },
    BadSource { group: usize, reason: String },
    FunctionCountMismatch { group: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ExtremaBudget { group, member, count, mu } => write!(
                f,
                "group {group} member {member}: {count} extrema exceeds mu={mu}"
            ),
            Violation::IntersectionBudget { group, member_a, member_b, count, sigma } => write!(
                f,
                "group {group} pair ({member_a},{member_b}): {count} intersections exceeds sigma={sigma}"
            ),
            Violation::CoincidentPair { group, member_a, member_b } => write!(
                f,
                "group {group} pair ({member_a},{member_b}): coincident overlapping segments"
            ),
            Violation::BadMembership(msg) => write!(f, "membership: {msg}"),
            Violation::MembersUnsorted { group } => {
                write!(f, "group {group}: members not sorted ascending")
            }
            Violation::DomainMismatch { group } => {
                write!(f, "group {group}: functions have different domains")
            }
            Violation::SupportOutsideDomain { group } => {
                write!(f, "group {group}: source support outside function domain")
            }
            Violation::BadSource { group, reason } => write!(f, "group {group}: {reason}"),
            Violation::FunctionCountMismatch { group } => {
                write!(f, "group {group}: one function per member required")
            }
        }
    }
}

/// Exact audit of a world against the `mu`/`sigma` budgets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub function_extrema: Vec<FunctionExtrema>,
    pub pair_intersections: Vec<PairIntersections>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Counts every function's extrema and every same-group pair's intersections
/// exactly, flagging budget violations and structural defects.
pub fn validate_world(world: &World, mu: u32, sigma: u32) -> ValidationReport {
    let mut report = ValidationReport {
        function_extrema: Vec::new(),
        pair_intersections: Vec::new(),
        violations: Vec::new(),
    };

    if let Err(msg) = world.group_of() {
        report.violations.push(Violation::BadMembership(msg));
    }

    for (k, group) in world.groups.iter().enumerate() {
        if !group.members.windows(2).all(|w| w[0] < w[1]) {
            report.violations.push(Violation::MembersUnsorted { group: k });
        }
        if group.functions.len() != group.members.len() {
            report
                .violations
                .push(Violation::FunctionCountMismatch { group: k });
            continue;
        }
        if let Err(reason) = group.source.check() {
            report.violations.push(Violation::BadSource { group: k, reason });
            continue;
        }

        let domain = group.functions[0].domain();
        if group.functions.iter().any(|f| f.domain() != domain) {
            report.violations.push(Violation::DomainMismatch { group: k });
            continue;
        }
        let (s_lo, s_hi) = group.source.support();
        if s_lo < domain.0 || s_hi > domain.1 {
            report
                .violations
                .push(Violation::SupportOutsideDomain { group: k });
        }

        for (i, f) in group.functions.iter().enumerate() {
            let count = f.extremum_count();
            report.function_extrema.push(FunctionExtrema {
                group: k,
                member: group.members[i],
                extrema: count,
            });
            if count > mu {
                report.violations.push(Violation::ExtremaBudget {
                    group: k,
                    member: group.members[i],
                    count,
                    mu,
                });
            }
        }

        for i in 0..group.functions.len() {
            for j in i + 1..group.functions.len() {
                let (a, b) = (group.members[i], group.members[j]);
                match intersection_count(&group.functions[i], &group.functions[j]) {
                    Ok(IntersectionCount::Finite(count)) => {
                        report.pair_intersections.push(PairIntersections {
                            group: k,
                            member_a: a,
                            member_b: b,
                            count: Some(count),
                        });
                        if count > sigma {
                            report.violations.push(Violation::IntersectionBudget {
                                group: k,
                                member_a: a,
                                member_b: b,
                                count,
                                sigma,
                            });
                        }
                    }
                    Ok(IntersectionCount::CoincidentOverlap) => {
                        report.pair_intersections.push(PairIntersections {
                            group: k,
                            member_a: a,
                            member_b: b,
                            count: None,
                        });
                        report.violations.push(Violation::CoincidentPair {
                            group: k,
                            member_a: a,
                            member_b: b,
                        });
                    }
                    Err(_) => {
                        report.violations.push(Violation::DomainMismatch { group: k });
                    }
                }
            }
        }
    }
    report
}

// ── Generation ────────────────────────────────────────────────────────

/// Source family selection for generated worlds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePolicy {
    /// Seeded pick among the three families, group by group.
    Mixed,
    Continuous,
    Gaussian,
    /// Discrete-uniform with the given atom count.
    Discrete { atoms: u32 },
    /// Single-atom discrete source (deterministic group).
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremaPolicy {
    /// Each function gets a seeded extrema count in `0..=mu`.
    UpTo,
    /// Each function gets exactly `mu` extrema.
    Exact,
}

/// Knobs for [`generate_world_with`].
#[derive(Debug, Clone)]
pub struct WorldSpec {
    pub n: u32,
    pub g: u32,
    pub mu: u32,
    pub sigma: u32,
    pub seed: u64,
    pub sources: SourcePolicy,
    pub extrema: ExtremaPolicy,
    /// Proposal budget per group before giving up or falling back.
    pub attempt_budget: u32,
    /// On budget exhaustion, rebuild the group from vertically shifted copies
    /// of one base function (always zero intersections) instead of failing.
    pub offset_fallback: bool,
}

impl WorldSpec {
    pub fn new(n: u32, g: u32, mu: u32, sigma: u32, seed: u64) -> Self {
        Self {
            n,
            g,
            mu,
            sigma,
            seed,
            sources: SourcePolicy::Mixed,
            extrema: ExtremaPolicy::UpTo,
            attempt_budget: 10_000,
            offset_fallback: true,
        }
    }
}

// Shared breakpoint grid: 8 segments over [0,1] with dyadic spacing, y values
// on the 1/64 lattice. Dyadic coordinates keep every exact evaluation at a
// dyadic atom representable in f64 without rounding.
const GRID_SEGMENTS: i64 = 8;
const Y_LATTICE: i64 = 64;

fn lattice_z(k: i64) -> Rat {
    rat(k, GRID_SEGMENTS)
}

fn fisher_yates<T>(rng: &mut ChaCha12Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// One random piecewise-linear function on the shared grid with exactly
/// `extrema` interior direction changes and no flat segments.
fn gen_function(rng: &mut ChaCha12Rng, extrema: u32) -> PiecewiseLinearFunction {
    let interior = (GRID_SEGMENTS - 1) as usize;
    debug_assert!((extrema as usize) <= interior);
    let mut idx: Vec<usize> = (1..=interior).collect();
    fisher_yates(rng, &mut idx);
    let mut turns = idx[..extrema as usize].to_vec();
    turns.sort_unstable();

    let mut dir: i64 = if rng.gen::<bool>() { 1 } else { -1 };
    let mut y = rat(rng.gen_range(0..=2 * Y_LATTICE), Y_LATTICE);
    let mut vertices = vec![(lattice_z(0), y.clone())];
    let mut next_turn = 0usize;
    for seg in 0..GRID_SEGMENTS {
        if next_turn < turns.len() && turns[next_turn] == seg as usize {
            dir = -dir;
            next_turn += 1;
        }
        let step = rng.gen_range(1..=16) * dir;
        y += rat(step, Y_LATTICE);
        vertices.push((lattice_z(seg + 1), y.clone()));
    }
    PiecewiseLinearFunction::new(vertices).expect("generated grid is ordered")
}

fn gen_source(rng: &mut ChaCha12Rng, policy: SourcePolicy) -> Result<HiddenSource, WorldError> {
    let pick_atoms = |rng: &mut ChaCha12Rng, k: u32| -> Result<Vec<Rat>, WorldError> {
        let lattice = Y_LATTICE; // z lattice: multiples of 1/64 inside [0,1]
        if k == 0 || k as i64 > lattice + 1 {
            return Err(WorldError::BadParameters(String::from(
                "discrete atom count must be in 1..=65",
            )));
        }
        let mut points: Vec<i64> = (0..=lattice).collect();
        fisher_yates(rng, &mut points);
        let mut chosen = points[..k as usize].to_vec();
        chosen.sort_unstable();
        Ok(chosen.into_iter().map(|p| rat(p, lattice)).collect())
    };
    Ok(match policy {
        SourcePolicy::Mixed => {
            let kind = rng.gen_range(0u8..3);
            match kind {
                0 => HiddenSource::ContinuousUniform { lo: rat(0, 1), hi: rat(1, 1) },
                1 => HiddenSource::TruncatedGaussian {
                    mean: rat(rng.gen_range(16..=48), 64),
                    sd: rat(1, 8),
                    lo: rat(0, 1),
                    hi: rat(1, 1),
                },
                _ => {
                    let k = rng.gen_range(2..=16);
                    HiddenSource::DiscreteUniform { atoms: pick_atoms(rng, k)? }
                }
            }
        }
        SourcePolicy::Continuous => {
            HiddenSource::ContinuousUniform { lo: rat(0, 1), hi: rat(1, 1) }
        }
        SourcePolicy::Gaussian => HiddenSource::TruncatedGaussian {
            mean: rat(rng.gen_range(16..=48), 64),
            sd: rat(1, 8),
            lo: rat(0, 1),
            hi: rat(1, 1),
        },
        SourcePolicy::Discrete { atoms } => HiddenSource::DiscreteUniform {
            atoms: pick_atoms(rng, atoms)?,
        },
        SourcePolicy::PointMass => HiddenSource::DiscreteUniform {
            atoms: pick_atoms(rng, 1)?,
        },
    })
}

/// Generates a valid world by bounded rejection sampling; deterministic per
/// seed. See [`generate_world_with`] for the knobs.
pub fn generate_world(
    n: u32,
    g: u32,
    mu: u32,
    sigma: u32,
    seed: u64,
) -> Result<World, WorldError> {
    generate_world_with(&WorldSpec::new(n, g, mu, sigma, seed))
}

pub fn generate_world_with(spec: &WorldSpec) -> Result<World, WorldError> {
    if spec.n == 0 || spec.g == 0 || spec.g > spec.n {
        return Err(WorldError::BadParameters(String::from(
            "need n >= g >= 1",
        )));
    }
    if spec.mu as i64 >= GRID_SEGMENTS {
        return Err(WorldError::BadParameters(alloc::format!(
            "mu must be below the grid segment count {GRID_SEGMENTS}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // Random membership, then sorted member lists: group sizes are as even
    // as possible, membership assignment is seeded.
    let mut elements: Vec<u32> = (0..spec.n).collect();
    fisher_yates(&mut rng, &mut elements);
    let base = (spec.n / spec.g) as usize;
    let extra = (spec.n % spec.g) as usize;
    let mut groups = Vec::with_capacity(spec.g as usize);
    let mut cursor = 0usize;
    for k in 0..spec.g as usize {
        let size = base + usize::from(k < extra);
        let mut members = elements[cursor..cursor + size].to_vec();
        cursor += size;
        members.sort_unstable();

        let functions = gen_group_functions(&mut rng, spec, k, size)?;
        let source = gen_source(&mut rng, spec.sources)?;
        groups.push(GroupModel { members, functions, source });
    }
    let world = World {
        n: spec.n,
        mu: spec.mu,
        sigma: spec.sigma,
        seed: spec.seed,
        groups,
    };
    debug_assert!(validate_world(&world, spec.mu, spec.sigma).is_valid());
    Ok(world)
}

fn gen_group_functions(
    rng: &mut ChaCha12Rng,
    spec: &WorldSpec,
    group: usize,
    size: usize,
) -> Result<Vec<PiecewiseLinearFunction>, WorldError> {
    let extrema_for = |rng: &mut ChaCha12Rng| match spec.extrema {
        ExtremaPolicy::UpTo => rng.gen_range(0..=spec.mu),
        ExtremaPolicy::Exact => spec.mu,
    };
    let mut accepted: Vec<PiecewiseLinearFunction> = Vec::with_capacity(size);
    let mut attempts = 0u32;
    while accepted.len() < size {
        if attempts >= spec.attempt_budget {
            if spec.offset_fallback {
                // Vertically shifted copies of one base function: zero
                // pairwise intersections for any sigma.
                let e = extrema_for(rng);
                let base = gen_function(rng, e);
                return Ok((0..size)
                    .map(|i| base.shifted(&rat(i as i64, 32)))
                    .collect());
            }
            return Err(WorldError::GenerationFailed { group, attempts });
        }
        attempts += 1;
        let e = extrema_for(rng);
        let candidate = gen_function(rng, e);
        let ok = accepted.iter().all(|f| {
            matches!(
                intersection_count(f, &candidate),
                Ok(IntersectionCount::Finite(c)) if c <= spec.sigma
            )
        });
        if ok {
            accepted.push(candidate);
        }
    }
    Ok(accepted)
}

// ── Instances and sampling ────────────────────────────────────────────

/// The hidden draw behind one group in one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDraw {
    pub z: f64,
    /// Atom index for discrete sources.
    pub atom: Option<u32>,
}

/// One observed input: `n` element values, plus the hidden draws when the
/// instance was produced synthetically.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub values: Vec<f64>,
    pub provenance: Option<Vec<GroupDraw>>,
}

enum SourceRuntime {
    Uniform { lo: f64, span: f64 },
    Gaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
    Discrete { count: u32 },
}

struct GroupRuntime {
    members: Vec<u32>,
    source: SourceRuntime,
    funcs: Vec<PlfF64>,
    /// `atom_table[a][m]`: precomputed exact values for discrete sources.
    atom_table: Vec<Vec<f64>>,
    atoms_f64: Vec<f64>,
}

/// Precomputed fast-path sampler for a world. Construction does all rational
/// work once; each draw is table lookups and f64 arithmetic.
pub struct Sampler {
    n: usize,
    groups: Vec<GroupRuntime>,
}

impl Sampler {
    pub fn new(world: &World) -> Result<Self, WorldError> {
        let mut groups = Vec::with_capacity(world.groups.len());
        for g in &world.groups {
            let (source, atom_table, atoms_f64) = match &g.source {
                HiddenSource::ContinuousUniform { lo, hi } => {
                    let (lo, hi) = (r2f(lo), r2f(hi));
                    (
                        SourceRuntime::Uniform { lo, span: hi - lo },
                        Vec::new(),
                        Vec::new(),
                    )
                }
                HiddenSource::TruncatedGaussian { mean, sd, lo, hi } => (
                    SourceRuntime::Gaussian {
                        mean: r2f(mean),
                        sd: r2f(sd),
                        lo: r2f(lo),
                        hi: r2f(hi),
                    },
                    Vec::new(),
                    Vec::new(),
                ),
                HiddenSource::DiscreteUniform { atoms } => (
                    SourceRuntime::Discrete { count: atoms.len() as u32 },
                    g.atom_values()?,
                    atoms.iter().map(r2f).collect(),
                ),
            };
            groups.push(GroupRuntime {
                members: g.members.clone(),
                source,
                funcs: g.functions.iter().map(|f| f.to_f64()).collect(),
                atom_table,
                atoms_f64,
            });
        }
        Ok(Self { n: world.n as usize, groups })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn draw(&self, rng: &mut ChaCha12Rng) -> Instance {
        let mut values = vec![0.0f64; self.n];
        let mut draws = Vec::with_capacity(self.groups.len());
        for group in &self.groups {
            let draw = match &group.source {
                SourceRuntime::Uniform { lo, span } => {
                    let z = lo + span * rng.gen::<f64>();
                    for (m, f) in group.members.iter().zip(&group.funcs) {
                        values[*m as usize] = f.eval(z);
                    }
                    GroupDraw { z, atom: None }
                }
                SourceRuntime::Gaussian { mean, sd, lo, hi } => {
                    let z = sample_truncated_gaussian(rng, *mean, *sd, *lo, *hi);
                    for (m, f) in group.members.iter().zip(&group.funcs) {
                        values[*m as usize] = f.eval(z);
                    }
                    GroupDraw { z, atom: None }
                }
                SourceRuntime::Discrete { count } => {
                    let a = rng.gen_range(0..*count) as usize;
                    for (i, m) in group.members.iter().enumerate() {
                        values[*m as usize] = group.atom_table[a][i];
                    }
                    GroupDraw { z: group.atoms_f64[a], atom: Some(a as u32) }
                }
            };
            draws.push(draw);
        }
        Instance { values, provenance: Some(draws) }
    }
}

fn sample_truncated_gaussian(rng: &mut ChaCha12Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..1000 {
        // Box-Muller; the second variate is discarded to keep the stream
        // layout simple and deterministic.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let normal = (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos();
        let z = mean + sd * normal;
        if (lo..=hi).contains(&z) {
            return z;
        }
    }
    // Degenerate truncation window; fall back to uniform on the window.
    lo + (hi - lo) * rng.gen::<f64>()
}

/// One-shot convenience draw. Loops should build a [`Sampler`] once instead.
pub fn draw_instance(world: &World, rng: &mut ChaCha12Rng) -> Result<Instance, WorldError> {
    Ok(Sampler::new(world)?.draw(rng))
}

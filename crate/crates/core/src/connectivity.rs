//! Sound tri-state connectivity verdicts.
//!
//! An attractor is connected exactly when the family of its first-level
//! pieces `f_i(A)` is chainable through nonempty pairwise intersections. With
//! only a surrogate cloud at hand, separation of pieces can be certified (it
//! survives perturbation) but contact cannot, so connectivity is only ever
//! reported on the strength of an exact algebraic witness.

use std::fmt;

use crate::geometry::{min_distance, squared_distance, Point};
use crate::ifs::{apply_map, fixed_point, AttractorApprox, IfsSystem};
use crate::{Error, Result};

/// Tolerance on algebraic witness identities.
pub const WITNESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// The true attractor is disconnected; `gap` is the certified separation
    /// left after subtracting the approximation slack.
    ProvablyDisconnected { gap: f64 },
    /// Connectivity established by an exact witness, identified by `witness`.
    ProvablyConnected { witness: String },
    /// No certificate either way; `min_gap` is the smallest observed distance
    /// between surrogate pieces.
    Undecided { min_gap: f64 },
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::ProvablyDisconnected { .. } => "DISCONNECTED",
            Verdict::ProvablyConnected { .. } => "CONNECTED",
            Verdict::Undecided { .. } => "UNDECIDED",
        }
    }

    pub fn is_disconnected(&self) -> bool {
        matches!(self, Verdict::ProvablyDisconnected { .. })
    }
}

/// `DISCONNECTED gap=<x>` | `CONNECTED witness=<tag>` | `UNDECIDED mingap=<x>`.
impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::ProvablyDisconnected { gap } => {
                write!(f, "DISCONNECTED gap={}", crate::io::format_f64(*gap))
            }
            Verdict::ProvablyConnected { witness } => write!(f, "CONNECTED witness={witness}"),
            Verdict::Undecided { min_gap } => {
                write!(f, "UNDECIDED mingap={}", crate::io::format_f64(*min_gap))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    /// Smallest distance between the surrogate pieces `f_i(cloud)` and `f_j(cloud)`.
    pub min_distance: f64,
    /// `(lip_i + lip_j) * r`.
    pub slack: f64,
}

impl PairRecord {
    /// Ties count as contact.
    pub fn is_edge(&self) -> bool {
        self.min_distance <= self.slack
    }
}

/// One node per map; an edge wherever the surrogate pieces come within slack.
#[derive(Debug, Clone)]
pub struct FamilyGraph {
    pub nodes: usize,
    pub pairs: Vec<PairRecord>,
}

impl FamilyGraph {
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().filter(|p| p.is_edge()).map(|p| (p.i, p.j))
    }

    /// Component label of every node (the smallest node index in its component).
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.nodes);
        for (i, j) in self.edges() {
            uf.union(i, j);
        }
        let mut label = vec![usize::MAX; self.nodes];
        for node in 0..self.nodes {
            let root = uf.find(node);
            if label[root] == usize::MAX {
                label[root] = node;
            }
        }
        (0..self.nodes).map(|n| label[uf.find(n)]).collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

pub fn family_graph(sys: &IfsSystem, approx: &AttractorApprox) -> Result<FamilyGraph> {
    if sys.dim() != approx.cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: approx.cloud.dim(),
        });
    }
    let pieces = sys
        .maps()
        .iter()
        .map(|f| apply_map(f, &approx.cloud))
        .collect::<Result<Vec<_>>>()?;
    let n = sys.len();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let lips = sys.maps()[i].lip() + sys.maps()[j].lip();
            pairs.push(PairRecord {
                i,
                j,
                min_distance: min_distance(&pieces[i], &pieces[j])?,
                slack: lips * approx.radius,
            });
        }
    }
    Ok(FamilyGraph { nodes: n, pairs })
}

/// Geometric classification. Never reports connectivity except for the
/// single-map case, whose attractor is a point.
pub fn classify(sys: &IfsSystem, approx: &AttractorApprox) -> Result<Verdict> {
    let graph = family_graph(sys, approx)?;
    if graph.nodes == 1 {
        return Ok(Verdict::ProvablyConnected {
            witness: "single-map".into(),
        });
    }
    let labels = graph.components();
    let gap = graph
        .pairs
        .iter()
        .filter(|p| labels[p.i] != labels[p.j])
        .map(|p| p.min_distance - p.slack)
        .fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        return Ok(Verdict::ProvablyDisconnected { gap });
    }
    let min_gap = graph
        .pairs
        .iter()
        .map(|p| p.min_distance)
        .fold(f64::INFINITY, f64::min);
    Ok(Verdict::Undecided { min_gap })
}

/// `(f_1^[m], f_2)` for a two-map system.
pub fn iterate_first_map(sys: &IfsSystem, m: u32) -> Result<IfsSystem> {
    if sys.len() != 2 {
        return Err(Error::MapCount {
            expected: 2,
            found: sys.len(),
        });
    }
    let first = sys.maps()[0].iterate(m)?;
    IfsSystem::new(vec![first, sys.maps()[1].clone()])
}

/// An attractor point obtained by applying the maps listed in `chain` (first
/// entry applied first) to the fixed point of map `origin`. Such points are
/// attractor members because fixed points are and the attractor is invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorMember {
    pub point: Point,
    pub origin: usize,
    pub chain: Vec<usize>,
}

impl AttractorMember {
    pub fn fixed_point_of(point: Point, origin: usize) -> Self {
        Self {
            point,
            origin,
            chain: Vec::new(),
        }
    }
}

/// Evidence that the first two pieces intersect: `f_1(left) = f_2(right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionWitness {
    pub tag: String,
    pub left: AttractorMember,
    pub right: AttractorMember,
}

fn certify_member(sys: &IfsSystem, member: &AttractorMember) -> Result<Vec<f64>> {
    let map = |k: usize| {
        sys.maps().get(k).ok_or_else(|| {
            Error::InvalidParameter(format!("witness refers to map {k} of a {}-map system", sys.len()))
        })
    };
    let mut x = fixed_point(map(member.origin)?)?.into_coords();
    for &k in &member.chain {
        x = map(k)?.apply(&x);
    }
    if x.len() != member.point.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: member.point.dim(),
        });
    }
    let deviation = squared_distance(&x, member.point.coords()).sqrt();
    let scale = crate::geometry::norm(&x).max(1.0);
    if !(deviation <= WITNESS_TOLERANCE * scale) {
        return Err(Error::WitnessNotCertified { deviation });
    }
    Ok(x)
}

/// Checks `witness` against `(f_1^[m], f_2)` and lifts the resulting
/// connectivity back to `sys`: if the attractor of the iterated system is
/// connected, so is the attractor of `sys`.
pub fn attach_witness(sys: &IfsSystem, witness: &IntersectionWitness, m: u32) -> Result<Verdict> {
    let lifted = iterate_first_map(sys, m)?;
    let p = certify_member(&lifted, &witness.left)?;
    let q = certify_member(&lifted, &witness.right)?;
    let fp = lifted.maps()[0].apply(&p);
    let fq = lifted.maps()[1].apply(&q);
    let residual = squared_distance(&fp, &fq).sqrt();
    if !(residual <= WITNESS_TOLERANCE) {
        return Err(Error::WitnessResidual { residual });
    }
    Ok(Verdict::ProvablyConnected {
        witness: witness.tag.clone(),
    })
}

/// Geometric classification reconciled with an algebraic witness. A valid
/// witness alongside a certified disconnection means one of the two
/// certificates is broken, which is reported as an error.
pub fn classify_with_witness(
    sys: &IfsSystem,
    approx: &AttractorApprox,
    witness: &IntersectionWitness,
    m: u32,
) -> Result<Verdict> {
    let attached = attach_witness(sys, witness, m)?;
    match classify(sys, approx)? {
        Verdict::ProvablyDisconnected { gap } => Err(Error::InconsistentVerdict { gap }),
        _ => Ok(attached),
    }
}

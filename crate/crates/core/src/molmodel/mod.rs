//! Molecule specifications, rigid-body partitioning and torsion kinematics.
//!
//! A molecule is split by its rotatable bonds into rigid bodies. Because every
//! rotatable bond must be a bridge of the bond graph, the bodies and torsions
//! form a tree. Body 0 always contains atom 0 and acts as the fixed root:
//! rotating torsion `i` by `t_i` degrees moves the subtree on the far side of
//! the bond, using the right-hand rule about the axis pointing away from the
//! root.

mod builders;

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::uff::{element_of_type, UffTable};
use crate::unionfind::UnionFind;

pub use builders::{generate_alkane, generate_star, C_C_BOND, C_H_BOND};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum MolError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("atom {index}: unknown element {element:?}")]
    UnknownElement { index: usize, element: String },
    #[error("atom {index}: unknown uff type {uff_type:?}")]
    UnknownUffType { index: usize, uff_type: String },
    #[error("atom {index}: uff type {uff_type:?} does not match element {element:?}")]
    ElementMismatch { index: usize, element: String, uff_type: String },
    #[error("atom {index}: non-finite coordinates")]
    NonFinite { index: usize },
    #[error("atom indices must be exactly 0..{n} (problem at {index})")]
    AtomIndex { index: usize, n: usize },
    #[error("bond {i}-{j}: {msg}")]
    BadBond { i: usize, j: usize, msg: String },
    #[error("torsion {i}-{j} is not a declared bond")]
    TorsionNotBond { i: usize, j: usize },
    #[error("torsion {i}-{j} declared twice")]
    DuplicateTorsion { i: usize, j: usize },
    #[error("rotatable bond on cycle: {i}-{j}")]
    RotatableOnCycle { i: usize, j: usize },
    #[error("bond graph is disconnected")]
    Disconnected,
    #[error("molecule has no atoms")]
    Empty,
    #[error("torsion vector has length {got}, molecule has {expected} torsions")]
    LengthMismatch { expected: usize, got: usize },
    #[error("rigid-body graph is not a tree")]
    NotATree,
    #[error("body id {0} out of range")]
    UnknownBody(usize),
    #[error("need at least {min} carbons, got {got}")]
    TooFewCarbons { min: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: usize,
    pub element: String,
    pub uff_type: String,
    pub position: [f64; 3],
}

impl Atom {
    pub fn pos(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// Torsion angles in degrees, one per rotatable bond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorsionVector(pub Vec<f64>);

impl TorsionVector {
    pub fn zeros(m: usize) -> Self {
        TorsionVector(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for TorsionVector {
    fn from(v: Vec<f64>) -> Self {
        TorsionVector(v)
    }
}

/// Cartesian coordinates for every atom, Å.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformation {
    pub positions: Vec<Vec3>,
}

/// A validated molecule: atoms, bonds and the ordered list of rotatable bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeSpec {
    atoms: Vec<Atom>,
    bonds: Vec<(usize, usize)>,
    rotatable: Vec<usize>,
}

impl MoleculeSpec {
    /// Validates against the bundled parameter table.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<(usize, usize)>, rotatable: Vec<usize>) -> Result<Self, MolError> {
        Self::with_table(atoms, bonds, rotatable, UffTable::bundled())
    }

    pub fn with_table(
        mut atoms: Vec<Atom>,
        bonds: Vec<(usize, usize)>,
        rotatable: Vec<usize>,
        table: &UffTable,
    ) -> Result<Self, MolError> {
        if atoms.is_empty() {
            return Err(MolError::Empty);
        }
        atoms.sort_by_key(|a| a.index);
        let n = atoms.len();
        for (k, a) in atoms.iter().enumerate() {
            if a.index != k {
                return Err(MolError::AtomIndex { index: a.index, n });
            }
            if !a.position.iter().all(|c| c.is_finite()) {
                return Err(MolError::NonFinite { index: k });
            }
            if !table.knows_element(&a.element) {
                return Err(MolError::UnknownElement { index: k, element: a.element.clone() });
            }
            if !table.contains(&a.uff_type) {
                return Err(MolError::UnknownUffType { index: k, uff_type: a.uff_type.clone() });
            }
            if element_of_type(&a.uff_type) != a.element {
                return Err(MolError::ElementMismatch {
                    index: k,
                    element: a.element.clone(),
                    uff_type: a.uff_type.clone(),
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &bonds {
            if i >= n || j >= n {
                return Err(MolError::BadBond { i, j, msg: "atom index out of range".into() });
            }
            if i == j {
                return Err(MolError::BadBond { i, j, msg: "self bond".into() });
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(MolError::BadBond { i, j, msg: "duplicate bond".into() });
            }
        }
        let mut uf = UnionFind::new(n);
        for &(i, j) in &bonds {
            uf.union(i, j);
        }
        if uf.labels().1 != 1 {
            return Err(MolError::Disconnected);
        }
        let mut rot_seen = std::collections::HashSet::new();
        for &b in &rotatable {
            let (i, j) = *bonds.get(b).ok_or(MolError::BadBond {
                i: b,
                j: b,
                msg: "rotatable bond index out of range".into(),
            })?;
            if !rot_seen.insert(b) {
                return Err(MolError::DuplicateTorsion { i, j });
            }
            // A bridge disconnects its endpoints when removed.
            let mut uf = UnionFind::new(n);
            for (k, &(p, q)) in bonds.iter().enumerate() {
                if k != b {
                    uf.union(p, q);
                }
            }
            if uf.find(i) == uf.find(j) {
                return Err(MolError::RotatableOnCycle { i, j });
            }
        }
        Ok(MoleculeSpec { atoms, bonds, rotatable })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Bond indices of the torsions, in declaration order.
    pub fn rotatable(&self) -> &[usize] {
        &self.rotatable
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_torsions(&self) -> usize {
        self.rotatable.len()
    }

    /// Same topology and typing with new input coordinates.
    pub fn with_positions(&self, positions: &[Vec3]) -> Result<Self, MolError> {
        if positions.len() != self.atoms.len() {
            return Err(MolError::LengthMismatch { expected: self.atoms.len(), got: positions.len() });
        }
        let mut out = self.clone();
        for (a, p) in out.atoms.iter_mut().zip(positions) {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(MolError::NonFinite { index: a.index });
            }
            a.position = [p.x, p.y, p.z];
        }
        Ok(out)
    }

    /// Atom adjacency lists over all bonds.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for &(i, j) in &self.bonds {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Renders the line-oriented text format accepted by [`parse_molecule`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for a in &self.atoms {
            let [x, y, z] = a.position;
            let _ = writeln!(s, "atom {} {} {} {:.10} {:.10} {:.10}", a.index, a.element, a.uff_type, x, y, z);
        }
        for &(i, j) in &self.bonds {
            let _ = writeln!(s, "bond {i} {j}");
        }
        for &b in &self.rotatable {
            let (i, j) = self.bonds[b];
            let _ = writeln!(s, "torsion {i} {j}");
        }
        s
    }
}

/// Parses a molecule document using the bundled parameter table.
pub fn parse_molecule(text: &str) -> Result<MoleculeSpec, MolError> {
    parse_molecule_with(text, UffTable::bundled())
}

pub fn parse_molecule_with(text: &str, table: &UffTable) -> Result<MoleculeSpec, MolError> {
    let mut atoms = Vec::new();
    let mut bonds: Vec<(usize, usize)> = Vec::new();
    let mut torsions = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let syntax = |msg: String| MolError::Syntax { line: line_no, msg };
        let idx = |s: &str| s.parse::<usize>().map_err(|e| syntax(format!("bad index {s:?}: {e}")));
        match fields[0] {
            "atom" => {
                if fields.len() != 7 {
                    return Err(syntax(format!("atom needs 6 fields, found {}", fields.len() - 1)));
                }
                let mut position = [0.0; 3];
                for (c, s) in position.iter_mut().zip(&fields[4..7]) {
                    *c = s.parse::<f64>().map_err(|e| syntax(format!("bad coordinate {s:?}: {e}")))?;
                }
                atoms.push(Atom {
                    index: idx(fields[1])?,
                    element: fields[2].to_string(),
                    uff_type: fields[3].to_string(),
                    position,
                });
            }
            "bond" | "torsion" => {
                if fields.len() != 3 {
                    return Err(syntax(format!("{} needs 2 atom indices", fields[0])));
                }
                let (i, j) = (idx(fields[1])?, idx(fields[2])?);
                if fields[0] == "bond" {
                    bonds.push((i, j));
                } else {
                    torsions.push((line_no, i, j));
                }
            }
            other => return Err(syntax(format!("unknown record {other:?}"))),
        }
    }
    let mut seen_atoms = std::collections::HashSet::new();
    for a in &atoms {
        if !seen_atoms.insert(a.index) {
            return Err(MolError::AtomIndex { index: a.index, n: atoms.len() });
        }
    }
    let mut rotatable = Vec::with_capacity(torsions.len());
    for (_, i, j) in torsions {
        let b = bonds
            .iter()
            .position(|&(p, q)| (p, q) == (i, j) || (q, p) == (i, j))
            .ok_or(MolError::TorsionNotBond { i, j })?;
        rotatable.push(b);
    }
    MoleculeSpec::with_table(atoms, bonds, rotatable, table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidBody {
    pub id: usize,
    pub atom_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorsionEdge {
    /// Position in the torsion vector.
    pub index: usize,
    /// Index into the molecule's bond list, when built from a molecule.
    pub bond: Option<usize>,
    pub bodies: (usize, usize),
}

/// Tree of rigid bodies (vertices) joined by torsions (edges).
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyGraph {
    bodies: Vec<RigidBody>,
    torsions: Vec<TorsionEdge>,
    /// Per body: (neighbour body, torsion index).
    adjacency: Vec<Vec<(usize, usize)>>,
    body_of_atom: Vec<usize>,
}

impl RigidBodyGraph {
    /// Abstract tree with `n_bodies` empty bodies; edge `k` is torsion `k`.
    pub fn from_edges(n_bodies: usize, edges: &[(usize, usize)]) -> Result<Self, MolError> {
        let bodies = (0..n_bodies).map(|id| RigidBody { id, atom_indices: Vec::new() }).collect();
        let torsions =
            edges.iter().enumerate().map(|(index, &bodies)| TorsionEdge { index, bond: None, bodies }).collect();
        Self::build(bodies, torsions, Vec::new())
    }

    fn build(bodies: Vec<RigidBody>, torsions: Vec<TorsionEdge>, body_of_atom: Vec<usize>) -> Result<Self, MolError> {
        let n = bodies.len();
        if n == 0 || torsions.len() + 1 != n {
            return Err(MolError::NotATree);
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut uf = UnionFind::new(n);
        for e in &torsions {
            let (a, b) = e.bodies;
            if a >= n || b >= n || !uf.union(a, b) {
                return Err(MolError::NotATree);
            }
            adjacency[a].push((b, e.index));
            adjacency[b].push((a, e.index));
        }
        Ok(RigidBodyGraph { bodies, torsions, adjacency, body_of_atom })
    }

    pub fn bodies(&self) -> &[RigidBody] {
        &self.bodies
    }

    pub fn torsions(&self) -> &[TorsionEdge] {
        &self.torsions
    }

    pub fn n_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn n_torsions(&self) -> usize {
        self.torsions.len()
    }

    /// (neighbour body, torsion index) pairs of `body`.
    pub fn adjacent(&self, body: usize) -> &[(usize, usize)] {
        &self.adjacency[body]
    }

    /// Body containing an atom; empty for abstract graphs.
    pub fn body_of_atom(&self) -> &[usize] {
        &self.body_of_atom
    }

    /// Torsion indices along the unique tree path from `a` to `b`, ordered from `a`.
    pub fn torsion_path(&self, a: usize, b: usize) -> Result<Vec<usize>, MolError> {
        let n = self.n_bodies();
        if a >= n {
            return Err(MolError::UnknownBody(a));
        }
        if b >= n {
            return Err(MolError::UnknownBody(b));
        }
        if a == b {
            return Ok(Vec::new());
        }
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut visited = vec![false; n];
        visited[a] = true;
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            if u == b {
                break;
            }
            for &(v, t) in &self.adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    prev[v] = Some((u, t));
                    queue.push_back(v);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = b;
        while let Some((p, t)) = prev[cur] {
            path.push(t);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }
}

/// Splits the molecule at its rotatable bonds.
pub fn partition_rigid_bodies(spec: &MoleculeSpec) -> RigidBodyGraph {
    let n = spec.n_atoms();
    let mut uf = UnionFind::new(n);
    for (k, &(i, j)) in spec.bonds.iter().enumerate() {
        if !spec.rotatable.contains(&k) {
            uf.union(i, j);
        }
    }
    let (body_of_atom, n_bodies) = uf.labels();
    let mut bodies: Vec<RigidBody> = (0..n_bodies).map(|id| RigidBody { id, atom_indices: Vec::new() }).collect();
    for (atom, &b) in body_of_atom.iter().enumerate() {
        bodies[b].atom_indices.push(atom);
    }
    let torsions = spec
        .rotatable
        .iter()
        .enumerate()
        .map(|(index, &bond)| {
            let (i, j) = spec.bonds[bond];
            TorsionEdge { index, bond: Some(bond), bodies: (body_of_atom[i], body_of_atom[j]) }
        })
        .collect();
    RigidBodyGraph::build(bodies, torsions, body_of_atom).expect("validated spec yields a tree")
}

#[derive(Debug, Clone)]
struct Joint {
    torsion: usize,
    /// Bond atom on the root side.
    base: usize,
    /// Bond atom on the distal side.
    tip: usize,
    moving: Vec<usize>,
}

/// A molecule together with its rigid-body tree and precomputed rotation plan.
#[derive(Debug, Clone)]
pub struct Molecule {
    spec: MoleculeSpec,
    graph: RigidBodyGraph,
    /// Joints sorted deepest first.
    joints: Vec<Joint>,
    input: Vec<Vec3>,
}

impl Molecule {
    pub fn new(spec: MoleculeSpec) -> Self {
        let graph = partition_rigid_bodies(&spec);
        let nb = graph.n_bodies();
        // Root the tree at the body of atom 0 (always body 0).
        let mut parent_edge: Vec<Option<usize>> = vec![None; nb];
        let mut depth = vec![0usize; nb];
        let mut order = Vec::with_capacity(nb);
        let mut visited = vec![false; nb];
        visited[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, t) in graph.adjacent(u) {
                if !visited[v] {
                    visited[v] = true;
                    parent_edge[v] = Some(t);
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        // Subtree atom sets, accumulated leaves-up.
        let mut subtree: Vec<Vec<usize>> = graph.bodies().iter().map(|b| b.atom_indices.clone()).collect();
        for &u in order.iter().rev() {
            if let Some(t) = parent_edge[u] {
                let (a, b) = graph.torsions()[t].bodies;
                let p = if a == u { b } else { a };
                let child = std::mem::take(&mut subtree[u]);
                subtree[p].extend_from_slice(&child);
                subtree[u] = child;
            }
        }
        let body_of_atom = graph.body_of_atom();
        let mut joints: Vec<(usize, Joint)> = Vec::new();
        for (child, edge) in parent_edge.iter().enumerate() {
            let Some(t) = *edge else { continue };
            let (i, j) = spec.bonds[spec.rotatable[t]];
            let (base, tip) = if body_of_atom[j] == child { (i, j) } else { (j, i) };
            let mut moving = subtree[child].clone();
            moving.sort_unstable();
            joints.push((depth[child], Joint { torsion: t, base, tip, moving }));
        }
        joints.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.torsion.cmp(&b.1.torsion)));
        let input = spec.atoms.iter().map(Atom::pos).collect();
        Molecule { spec, graph, joints: joints.into_iter().map(|(_, j)| j).collect(), input }
    }

    pub fn spec(&self) -> &MoleculeSpec {
        &self.spec
    }

    pub fn graph(&self) -> &RigidBodyGraph {
        &self.graph
    }

    pub fn n_atoms(&self) -> usize {
        self.spec.n_atoms()
    }

    pub fn n_torsions(&self) -> usize {
        self.spec.n_torsions()
    }

    pub fn input_positions(&self) -> &[Vec3] {
        &self.input
    }

    /// Atoms moved by rotating `torsion` (the side away from the root body).
    pub fn moving_atoms(&self, torsion: usize) -> &[usize] {
        &self.joints.iter().find(|j| j.torsion == torsion).expect("torsion index in range").moving
    }

    pub fn apply_torsions(&self, t: &TorsionVector) -> Result<Conformation, MolError> {
        let mut positions = self.input.clone();
        self.apply_into(t.as_slice(), &mut positions)?;
        Ok(Conformation { positions })
    }

    /// Writes the conformation for `angles` into `out`, reusing its allocation.
    pub fn apply_into(&self, angles: &[f64], out: &mut Vec<Vec3>) -> Result<(), MolError> {
        if angles.len() != self.n_torsions() {
            return Err(MolError::LengthMismatch { expected: self.n_torsions(), got: angles.len() });
        }
        out.clear();
        out.extend_from_slice(&self.input);
        // Deeper joints first: their axes are untouched by the shallower rotations
        // that follow, which carry the already-rotated subtrees rigidly.
        for joint in &self.joints {
            let angle = angles[joint.torsion];
            if angle == 0.0 {
                continue;
            }
            let origin = out[joint.base];
            let axis = Unit::new_normalize(out[joint.tip] - origin);
            let rot = Rotation3::from_axis_angle(&axis, angle.to_radians());
            for &a in &joint.moving {
                out[a] = origin + rot * (out[a] - origin);
            }
        }
        Ok(())
    }
}

/// Convenience wrapper building the rotation plan on the fly.
pub fn apply_torsions(spec: &MoleculeSpec, t: &TorsionVector) -> Result<Conformation, MolError> {
    Molecule::new(spec.clone()).apply_torsions(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUTANE_LIKE: &str = "\
# four carbons, central bond rotatable
atom 0 C C_3 0.0 0.0 0.0
atom 1 C C_3 1.54 0.0 0.0
atom 2 C C_3 2.05 1.45 0.0
atom 3 C C_3 3.59 1.45 0.0
bond 0 1
bond 1 2
bond 2 3
torsion 1 2
";

    #[test]
    fn parses_explicit_document() {
        let spec = parse_molecule(BUTANE_LIKE).unwrap();
        assert_eq!(spec.n_atoms(), 4);
        assert_eq!(spec.n_torsions(), 1);
        assert_eq!(spec.rotatable(), &[1]);
        let g = partition_rigid_bodies(&spec);
        assert_eq!(g.n_bodies(), 2);
        assert_eq!(g.bodies()[0].atom_indices, vec![0, 1]);
        assert_eq!(g.bodies()[1].atom_indices, vec![2, 3]);
    }

    #[test]
    fn text_round_trip() {
        let spec = generate_alkane(6).unwrap();
        let again = parse_molecule(&spec.to_text()).unwrap();
        assert_eq!(again.bonds(), spec.bonds());
        assert_eq!(again.rotatable(), spec.rotatable());
        for (a, b) in again.atoms().iter().zip(spec.atoms()) {
            assert!((a.pos() - b.pos()).norm() < 1e-9);
        }
    }

    #[test]
    fn ring_torsion_rejected() {
        let text = "\
atom 0 C C_3 0 0 0
atom 1 C C_3 1.5 0 0
atom 2 C C_3 0.75 1.3 0
bond 0 1
bond 1 2
bond 2 0
torsion 0 1
";
        assert_eq!(parse_molecule(text), Err(MolError::RotatableOnCycle { i: 0, j: 1 }));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(parse_molecule("atom 0 C C_3 0 0"), Err(MolError::Syntax { line: 1, .. })));
        assert!(matches!(parse_molecule("atom 0 Xx Xx_9 0 0 0"), Err(MolError::UnknownElement { .. })));
        assert!(matches!(parse_molecule("atom 0 C C_9 0 0 0"), Err(MolError::UnknownUffType { .. })));
        assert!(matches!(parse_molecule("atom 0 C H_ 0 0 0"), Err(MolError::ElementMismatch { .. })));
        assert!(matches!(parse_molecule("atom 0 C C_3 0 0 nan"), Err(MolError::NonFinite { .. })));
        assert!(matches!(parse_molecule("frobnicate 1 2"), Err(MolError::Syntax { .. })));
        let disconnected = "atom 0 C C_3 0 0 0\natom 1 C C_3 5 0 0\n";
        assert_eq!(parse_molecule(disconnected), Err(MolError::Disconnected));
        let no_bond = "atom 0 C C_3 0 0 0\natom 1 C C_3 1.5 0 0\nbond 0 1\ntorsion 1 0\ntorsion 0 1\n";
        assert!(matches!(parse_molecule(no_bond), Err(MolError::DuplicateTorsion { .. })));
        let missing = "atom 0 C C_3 0 0 0\natom 1 C C_3 1.5 0 0\nbond 0 1\ntorsion 0 2\n";
        assert!(matches!(parse_molecule(missing), Err(MolError::TorsionNotBond { .. })));
        let gap = "atom 0 C C_3 0 0 0\natom 2 C C_3 1.5 0 0\nbond 0 2\n";
        assert!(matches!(parse_molecule(gap), Err(MolError::AtomIndex { .. })));
    }

    #[test]
    fn tree_paths() {
        let g = RigidBodyGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.torsion_path(0, 1).unwrap(), vec![0]);
        assert_eq!(g.torsion_path(3, 0).unwrap(), vec![2, 1, 0]);
        assert!(g.torsion_path(2, 2).unwrap().is_empty());
        assert_eq!(g.torsion_path(0, 9), Err(MolError::UnknownBody(9)));
        assert_eq!(RigidBodyGraph::from_edges(3, &[(0, 1), (1, 0)]), Err(MolError::NotATree));
        assert_eq!(RigidBodyGraph::from_edges(3, &[(0, 1)]), Err(MolError::NotATree));
    }

    #[test]
    fn zero_rotation_is_bit_identical() {
        let mol = Molecule::new(generate_alkane(8).unwrap());
        let conf = mol.apply_torsions(&TorsionVector::zeros(5)).unwrap();
        assert_eq!(conf.positions, mol.input_positions());
        assert!(matches!(
            mol.apply_torsions(&TorsionVector::zeros(4)),
            Err(MolError::LengthMismatch { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn full_turn_is_identity() {
        let mol = Molecule::new(generate_alkane(8).unwrap());
        for i in 0..5 {
            let mut t = TorsionVector::zeros(5);
            t.0[i] = 360.0;
            let conf = mol.apply_torsions(&t).unwrap();
            for (p, q) in conf.positions.iter().zip(mol.input_positions()) {
                assert!((p - q).norm() < 1e-8);
            }
        }
    }
}

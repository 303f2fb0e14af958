//! Idealized sp3 hydrocarbon fixtures.

use super::{Atom, MolError, MoleculeSpec, Vec3};

pub const C_C_BOND: f64 = 1.54;
pub const C_H_BOND: f64 = 1.09;

/// cos of the tetrahedral angle.
const COS_TET: f64 = -1.0 / 3.0;

struct Builder {
    atoms: Vec<Atom>,
    bonds: Vec<(usize, usize)>,
    rotatable: Vec<usize>,
}

impl Builder {
    fn new() -> Self {
        Builder { atoms: Vec::new(), bonds: Vec::new(), rotatable: Vec::new() }
    }

    fn add(&mut self, element: &str, uff_type: &str, p: Vec3) -> usize {
        let index = self.atoms.len();
        self.atoms.push(Atom { index, element: element.into(), uff_type: uff_type.into(), position: [p.x, p.y, p.z] });
        index
    }

    fn pos(&self, i: usize) -> Vec3 {
        self.atoms[i].pos()
    }

    fn bond(&mut self, i: usize, j: usize, rotatable: bool) {
        self.bonds.push((i, j));
        if rotatable {
            self.rotatable.push(self.bonds.len() - 1);
        }
    }

    fn neighbours(&self, i: usize) -> Vec<usize> {
        self.bonds
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Fills every carbon up to four bonds with hydrogens.
    fn saturate(&mut self) {
        let carbons: Vec<usize> = (0..self.atoms.len()).filter(|&i| self.atoms[i].element == "C").collect();
        for c in carbons {
            let nbrs = self.neighbours(c);
            let x = self.pos(c);
            let dirs: Vec<Vec3> = nbrs.iter().map(|&n| (self.pos(n) - x).normalize()).collect();
            let free = match dirs.len() {
                1 => {
                    let p = nbrs[0];
                    let reference = self
                        .neighbours(p)
                        .into_iter()
                        .find(|&g| g != c)
                        .map(|g| self.pos(g) - self.pos(p))
                        .unwrap_or_else(|| any_perpendicular(dirs[0]));
                    staggered(dirs[0], reference).to_vec()
                }
                2 => {
                    let bis = (dirs[0] + dirs[1]).normalize();
                    let normal = dirs[0].cross(&dirs[1]).normalize();
                    let half = COS_TET.acos() / 2.0;
                    vec![-bis * half.cos() + normal * half.sin(), -bis * half.cos() - normal * half.sin()]
                }
                3 => vec![-(dirs[0] + dirs[1] + dirs[2]).normalize()],
                _ => Vec::new(),
            };
            for d in free {
                let h = self.add("H", "H_", x + d * C_H_BOND);
                self.bond(c, h, false);
            }
        }
    }

    fn finish(self) -> Result<MoleculeSpec, MolError> {
        MoleculeSpec::new(self.atoms, self.bonds, self.rotatable)
    }
}

fn any_perpendicular(b: Vec3) -> Vec3 {
    let trial = if b.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    trial - b * trial.dot(&b)
}

/// The three remaining tetrahedral directions at an atom whose single bond points
/// along `b`; the first is anti-periplanar to `reference` (a vector from the
/// neighbour to one of its own neighbours).
fn staggered(b: Vec3, reference: Vec3) -> [Vec3; 3] {
    let mut w = reference - b * reference.dot(&b);
    if w.norm() < 1e-9 {
        w = any_perpendicular(b);
    }
    let w = w.normalize();
    let v = b.cross(&w);
    let sin_tet = (1.0 - COS_TET * COS_TET).sqrt();
    let at = |phi: f64| b * COS_TET + (w * phi.cos() + v * phi.sin()) * sin_tet;
    use std::f64::consts::PI;
    [at(PI), at(PI / 3.0), at(-PI / 3.0)]
}

/// All-anti n-alkane with the n-3 internal C-C bonds rotatable.
/// Carbons are atoms `0..n`, hydrogens follow.
pub fn generate_alkane(n_carbons: usize) -> Result<MoleculeSpec, MolError> {
    if n_carbons < 2 {
        return Err(MolError::TooFewCarbons { min: 2, got: n_carbons });
    }
    let mut b = Builder::new();
    b.add("C", "C_3", Vec3::zeros());
    b.add("C", "C_3", Vec3::new(C_C_BOND, 0.0, 0.0));
    for k in 2..n_carbons {
        let (x, p) = (b.pos(k - 1), b.pos(k - 2));
        let reference = if k >= 3 { b.pos(k - 3) - p } else { Vec3::y() };
        let dir = staggered((p - x).normalize(), reference)[0];
        b.add("C", "C_3", x + dir * C_C_BOND);
    }
    for k in 1..n_carbons {
        let internal = k >= 2 && k + 1 < n_carbons;
        b.bond(k - 1, k, internal);
    }
    b.saturate();
    b.finish()
}

/// Quaternary carbon with four all-anti n-alkyl arms of `arm_len` carbons.
///
/// The hub-to-arm bonds and every arm C-C bond not ending in a methyl group
/// are rotatable, so the hub atom is a rigid body of its own with four arms.
pub fn generate_star(arm_len: usize) -> Result<MoleculeSpec, MolError> {
    if arm_len < 1 {
        return Err(MolError::TooFewCarbons { min: 1, got: arm_len });
    }
    let mut b = Builder::new();
    let hub = b.add("C", "C_3", Vec3::zeros());
    let s = 1.0 / 3f64.sqrt();
    let tet = [Vec3::new(s, s, s), Vec3::new(s, -s, -s), Vec3::new(-s, s, -s), Vec3::new(-s, -s, s)];
    let mut arms: Vec<Vec<usize>> = Vec::new();
    for dir in tet {
        arms.push(vec![b.add("C", "C_3", dir * C_C_BOND)]);
    }
    for k in 0..4 {
        for j in 1..arm_len {
            let x = b.pos(arms[k][j - 1]);
            let (p, g) = if j == 1 {
                (b.pos(hub), b.pos(arms[(k + 1) % 4][0]))
            } else {
                (b.pos(arms[k][j - 2]), if j == 2 { b.pos(hub) } else { b.pos(arms[k][j - 3]) })
            };
            let dir = staggered((p - x).normalize(), g - p)[0];
            let c = b.add("C", "C_3", x + dir * C_C_BOND);
            arms[k].push(c);
        }
    }
    for arm in &arms {
        b.bond(hub, arm[0], true);
        for j in 1..arm.len() {
            b.bond(arm[j - 1], arm[j], j + 1 < arm.len());
        }
    }
    b.saturate();
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molmodel::partition_rigid_bodies;

    fn check_geometry(spec: &MoleculeSpec) {
        let pos: Vec<Vec3> = spec.atoms().iter().map(|a| a.pos()).collect();
        for &(i, j) in spec.bonds() {
            let len = (pos[i] - pos[j]).norm();
            let expect =
                if spec.atoms()[i].element == "H" || spec.atoms()[j].element == "H" { C_H_BOND } else { C_C_BOND };
            assert!((len - expect).abs() < 1e-9, "bond {i}-{j} = {len}");
        }
        let adj = spec.neighbours();
        for (c, nbrs) in adj.iter().enumerate() {
            if spec.atoms()[c].element != "C" {
                continue;
            }
            assert_eq!(nbrs.len(), 4, "carbon {c} valence");
            for a in 0..4 {
                for b in a + 1..4 {
                    let u = (pos[nbrs[a]] - pos[c]).normalize();
                    let v = (pos[nbrs[b]] - pos[c]).normalize();
                    assert!((u.dot(&v) - COS_TET).abs() < 1e-9);
                }
            }
        }
        // no close contacts in the extended geometry
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                assert!((pos[i] - pos[j]).norm() > 1.0, "{i}-{j} too close");
            }
        }
    }

    #[test]
    fn alkane_torsion_counts() {
        assert_eq!(generate_alkane(10).unwrap().n_torsions(), 7);
        assert_eq!(generate_alkane(15).unwrap().n_torsions(), 12);
        assert_eq!(generate_alkane(20).unwrap().n_torsions(), 17);
        assert_eq!(generate_alkane(3).unwrap().n_torsions(), 0);
        assert_eq!(generate_alkane(2).unwrap().n_torsions(), 0);
        assert_eq!(generate_alkane(1), Err(MolError::TooFewCarbons { min: 2, got: 1 }));
    }

    #[test]
    fn alkane_geometry_is_ideal() {
        for n in [2, 3, 4, 10] {
            let spec = generate_alkane(n).unwrap();
            assert_eq!(spec.n_atoms(), 3 * n + 2);
            check_geometry(&spec);
        }
    }

    #[test]
    fn star_geometry_and_topology() {
        let spec = generate_star(3).unwrap();
        check_geometry(&spec);
        assert_eq!(spec.n_torsions(), 8);
        let g = partition_rigid_bodies(&spec);
        assert_eq!(g.bodies()[0].atom_indices, vec![0]);
        assert_eq!(g.adjacent(0).len(), 4);
        assert_eq!(generate_star(1).unwrap().n_torsions(), 4);
    }
}

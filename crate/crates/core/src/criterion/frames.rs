use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PAIR_TOL: f64 = 1e-10;

/// Two orthogonal unit vectors spanning a measurement plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalPair {
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl OrthonormalPair {
    pub fn new(e1: Vector3<f64>, e2: Vector3<f64>) -> Result<Self> {
        let pair = OrthonormalPair { e1: e1.into(), e2: e2.into() };
        pair.check()?;
        Ok(pair)
    }

    pub fn xy() -> Self {
        OrthonormalPair { e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] }
    }

    pub fn yz() -> Self {
        OrthonormalPair { e1: [0.0, 1.0, 0.0], e2: [0.0, 0.0, 1.0] }
    }

    pub fn xz() -> Self {
        OrthonormalPair { e1: [1.0, 0.0, 0.0], e2: [0.0, 0.0, 1.0] }
    }

    /// Gram-Schmidt on nonzero, non-parallel inputs.
    pub(crate) fn orthonormalized(a: &Vector3<f64>, b: &Vector3<f64>) -> Self {
        let e1 = a.normalize();
        let mut e2 = b - e1 * e1.dot(b);
        if e2.norm() < 1e-8 {
            // Degenerate input: any vector orthogonal to e1.
            let helper = if e1.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            e2 = e1.cross(&helper);
        }
        OrthonormalPair { e1: e1.into(), e2: e2.normalize().into() }
    }

    pub fn check(&self) -> Result<()> {
        let (a, b) = self.vectors();
        if (a.norm() - 1.0).abs() > PAIR_TOL || (b.norm() - 1.0).abs() > PAIR_TOL {
            return Err(Error::MalformedFrameTree(format!("pair vectors are not unit: {:?}", self)));
        }
        if a.dot(&b).abs() > PAIR_TOL {
            return Err(Error::MalformedFrameTree(format!("pair vectors are not orthogonal: {:?}", self)));
        }
        Ok(())
    }

    pub fn vectors(&self) -> (Vector3<f64>, Vector3<f64>) {
        (Vector3::from(self.e1), Vector3::from(self.e2))
    }

    /// Image of `(x̂, ŷ)` under `Rz(a) Ry(b) Rz(c)`.
    pub fn from_angles([a, b, c]: [f64; 3]) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), a)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), b)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), c);
        let m = r.matrix();
        OrthonormalPair { e1: m.column(0).into_owned().into(), e2: m.column(1).into_owned().into() }
    }

    /// Angles `[a, b, c]` with `from_angles([a, b, c]) == self`.
    pub fn to_angles(&self) -> [f64; 3] {
        let (e1, e2) = self.vectors();
        let r = Matrix3::from_columns(&[e1, e2, e1.cross(&e2)]);
        let b = r[(2, 2)].clamp(-1.0, 1.0).acos();
        if b.sin().abs() > 1e-9 {
            [r[(1, 2)].atan2(r[(0, 2)]), b, r[(2, 1)].atan2(-r[(2, 0)])]
        } else if r[(2, 2)] > 0.0 {
            [r[(1, 0)].atan2(r[(0, 0)]), 0.0, 0.0]
        } else {
            [(-r[(1, 0)]).atan2(-r[(0, 0)]), std::f64::consts::PI, 0.0]
        }
    }
}

/// Frames for the hierarchical criterion. A branch holds the pair of the last
/// party of its block and one subtree per pair vector (`e1`, then `e2`); a leaf
/// holds the pairs of the first two parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTree {
    Leaf { first: OrthonormalPair, second: OrthonormalPair },
    Branch { pair: OrthonormalPair, children: Box<[FrameTree; 2]> },
}

impl FrameTree {
    /// The same pair for every branch of a party; `pairs[j]` belongs to party `j+1`.
    pub fn layered(pairs: &[OrthonormalPair]) -> Result<Self> {
        match pairs.len() {
            0 | 1 => Err(Error::MalformedFrameTree("a frame tree needs at least two parties".into())),
            2 => Ok(FrameTree::Leaf { first: pairs[0], second: pairs[1] }),
            n => {
                let sub = FrameTree::layered(&pairs[..n - 1])?;
                Ok(FrameTree::Branch { pair: pairs[n - 1], children: Box::new([sub.clone(), sub]) })
            }
        }
    }

    /// Number of parties covered; errors if the two subtrees of a branch differ in depth.
    pub fn n_parties(&self) -> Result<usize> {
        match self {
            FrameTree::Leaf { .. } => Ok(2),
            FrameTree::Branch { children, .. } => {
                let a = children[0].n_parties()?;
                let b = children[1].n_parties()?;
                if a != b {
                    return Err(Error::MalformedFrameTree(format!("unbalanced branch: {a} vs {b} parties")));
                }
                Ok(a + 1)
            }
        }
    }

    pub fn check_pairs(&self) -> Result<()> {
        match self {
            FrameTree::Leaf { first, second } => {
                first.check()?;
                second.check()
            }
            FrameTree::Branch { pair, children } => {
                pair.check()?;
                children[0].check_pairs()?;
                children[1].check_pairs()
            }
        }
    }
}

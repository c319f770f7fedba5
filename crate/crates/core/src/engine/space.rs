//! Block structure of the Hilbert space.
//!
//! Translation-invariant operators are block diagonal in the momentum basis
//! `|r,k> = p_r^{-1/2} sum_{j<p_r} w^{-kj} T^j |r>` (`w = e^{2 pi i / N}`,
//! `r` an orbit representative of period `p_r`, `k p_r = 0 mod N`).
//! [`Space::Full`] keeps one dense block and accepts any operator.

use std::f64::consts::TAU;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{domain, Error, Result};
use crate::pauli::{ChainGeometry, OperatorClass, PauliString, PauliSum};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Block-diagonal operator; one dense matrix per block of a [`Space`].
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    pub blocks: Vec<Mat<C64>>,
}

impl BlockMatrix {
    pub fn identity(space: &Space) -> Self {
        Self { blocks: space.block_dims().iter().map(|&d| Mat::identity(d, d)).collect() }
    }

    pub fn zeros(space: &Space) -> Self {
        Self { blocks: space.block_dims().iter().map(|&d| Mat::zeros(d, d)).collect() }
    }

    /// `self * rhs`, block by block.
    pub fn matmul(&self, rhs: &BlockMatrix) -> BlockMatrix {
        Self { blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a * b).collect() }
    }

    pub fn adjoint(&self) -> BlockMatrix {
        Self { blocks: self.blocks.iter().map(|a| a.adjoint().to_owned()).collect() }
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, rho: &BlockMatrix) -> BlockMatrix {
        Self {
            blocks: self.blocks.iter().zip(&rho.blocks).map(|(u, r)| u * r * u.adjoint()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .map(|b| (0..b.nrows()).map(|i| b[(i, i)]).sum::<C64>())
            .sum()
    }

    /// `self^n` by repeated squaring.
    pub fn power(&self, mut n: u64) -> BlockMatrix {
        let mut result: Option<BlockMatrix> = None;
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.matmul(&base),
                });
            }
            n >>= 1;
            if n > 0 {
                base = base.matmul(&base);
            }
        }
        result.unwrap_or_else(|| Self {
            blocks: self.blocks.iter().map(|b| Mat::identity(b.nrows(), b.ncols())).collect(),
        })
    }

    /// Largest entry of `|A^dagger A - 1|` over all blocks.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|u| {
                let p = u.adjoint() * u;
                let mut m: f64 = 0.0;
                for i in 0..p.nrows() {
                    for j in 0..p.ncols() {
                        let target = if i == j { 1.0 } else { 0.0 };
                        m = m.max((p[(i, j)] - target).norm());
                    }
                }
                m
            })
            .fold(0.0, f64::max)
    }
}

/// Orbit bookkeeping for translation-invariant blocks.
#[derive(Clone, Debug)]
pub struct MomentumBasis {
    geometry: ChainGeometry,
    /// representative state and orbit period for each orbit
    reps: Vec<(usize, usize)>,
    /// orbit index of every basis state
    orbit_of: Vec<u32>,
    /// shift `l` with `x = T^l rep(x)`
    shift_of: Vec<u8>,
    /// orbit indices contained in each momentum sector
    sector_members: Vec<Vec<u32>>,
    /// position of orbit `r` inside sector `k` (`u32::MAX` if absent), laid out `k * n_orbits + r`
    position: Vec<u32>,
    /// `w^m` for `m = 0..N`
    roots: Vec<C64>,
}

impl MomentumBasis {
    pub fn new(geometry: ChainGeometry) -> Self {
        let n = geometry.n_sites();
        let dim = geometry.dim();
        let mut orbit_of = vec![u32::MAX; dim];
        let mut shift_of = vec![0u8; dim];
        let mut reps = Vec::new();
        for x in 0..dim {
            if orbit_of[x] != u32::MAX {
                continue;
            }
            // x is the smallest member of its orbit since lower states were visited first
            let r = reps.len() as u32;
            let mut y = x;
            let mut period = 0;
            loop {
                if orbit_of[y] != u32::MAX {
                    break;
                }
                orbit_of[y] = r;
                shift_of[y] = period as u8;
                period += 1;
                y = geometry.translate(y);
            }
            reps.push((x, period));
        }
        let n_orbits = reps.len();
        let mut sector_members = vec![Vec::new(); n];
        let mut position = vec![u32::MAX; n * n_orbits];
        for k in 0..n {
            for (r, &(_, p)) in reps.iter().enumerate() {
                if (k * p) % n == 0 {
                    position[k * n_orbits + r] = sector_members[k].len() as u32;
                    sector_members[k].push(r as u32);
                }
            }
        }
        let roots = (0..n).map(|m| C64::from_polar(1.0, TAU * m as f64 / n as f64)).collect();
        Self { geometry, reps, orbit_of, shift_of, sector_members, position, roots }
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn n_sectors(&self) -> usize {
        self.sector_members.len()
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.sector_members.iter().map(Vec::len).collect()
    }

    #[inline]
    fn root(&self, m: i64) -> C64 {
        let n = self.roots.len() as i64;
        self.roots[m.rem_euclid(n) as usize]
    }

    #[inline]
    fn pos(&self, k: usize, orbit: usize) -> Option<usize> {
        let p = self.position[k * self.reps.len() + orbit];
        (p != u32::MAX).then_some(p as usize)
    }

    /// Matrix blocks of a translation-invariant operator.
    pub fn project(&self, op: &PauliSum) -> Vec<Mat<C64>> {
        let n = self.n_sectors();
        let mut blocks: Vec<Mat<C64>> = self.sector_dims().iter().map(|&d| Mat::zeros(d, d)).collect();
        // one column per (orbit, sector): apply H to the representative only
        let mut images: Vec<(usize, C64)> = Vec::new();
        for (r, &(rep, p_r)) in self.reps.iter().enumerate() {
            images.clear();
            op.for_each_image(rep, |y, a| images.push((y, a)));
            for k in 0..n {
                let Some(col) = self.pos(k, r) else { continue };
                let block = &mut blocks[k];
                for &(s, h) in &images {
                    let orbit = self.orbit_of[s] as usize;
                    let Some(row) = self.pos(k, orbit) else { continue };
                    let p_row = self.reps[orbit].1;
                    let l = self.shift_of[s] as i64;
                    let factor = (p_r as f64 / p_row as f64).sqrt();
                    block[(row, col)] += h * self.root(k as i64 * l) * factor;
                }
            }
        }
        blocks
    }

    /// `<x|r,k>` for basis state `x` in sector `k` (zero if the orbit is absent).
    fn amplitude(&self, x: usize, k: usize) -> Option<(usize, C64)> {
        let orbit = self.orbit_of[x] as usize;
        let row = self.pos(k, orbit)?;
        let p = self.reps[orbit].1 as f64;
        let l = self.shift_of[x] as i64;
        Some((row, self.root(-(k as i64) * l) / p.sqrt()))
    }

    /// Dense full-space matrix of a block-diagonal operator.
    pub fn embed(&self, m: &BlockMatrix) -> Mat<C64> {
        let dim = self.geometry.dim();
        let n = self.n_sectors();
        Mat::from_fn(dim, dim, |y, x| {
            let mut acc = ZERO;
            for k in 0..n {
                if let (Some((ry, ay)), Some((rx, ax))) = (self.amplitude(y, k), self.amplitude(x, k)) {
                    acc += ay * m.blocks[k][(ry, rx)] * ax.conj();
                }
            }
            acc
        })
    }

    /// `Tr[P rho]` for a single string and block-diagonal `rho`.
    pub fn string_expectation(&self, rho: &BlockMatrix, s: &PauliString) -> C64 {
        let dim = self.geometry.dim();
        let n = self.n_sectors();
        let (xm, zm, ph) = s.masks();
        let mut acc = ZERO;
        for y in 0..dim {
            let x = y ^ xm;
            let (ry, py, ly) = self.orbit_data(y);
            let (rx, px, lx) = self.orbit_data(x);
            let mut entry = ZERO;
            for k in 0..n {
                let (Some(iy), Some(ix)) = (self.pos(k, ry), self.pos(k, rx)) else { continue };
                entry += rho.blocks[k][(iy, ix)] * self.root(k as i64 * (lx - ly));
            }
            let sign = if (y & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += entry * sign / ((py * px) as f64).sqrt();
        }
        acc * ph
    }

    #[inline]
    fn orbit_data(&self, x: usize) -> (usize, usize, i64) {
        let r = self.orbit_of[x] as usize;
        (r, self.reps[r].1, self.shift_of[x] as i64)
    }

    /// Block-diagonal part of a full-space state's density matrix.
    pub fn project_state(&self, psi: &[C64]) -> Vec<Vec<C64>> {
        let n = self.n_sectors();
        let mut out: Vec<Vec<C64>> = self.sector_dims().iter().map(|&d| vec![ZERO; d]).collect();
        for (x, &a) in psi.iter().enumerate() {
            for (k, sector) in out.iter_mut().enumerate().take(n) {
                if let Some((row, amp)) = self.amplitude(x, k) {
                    sector[row] += amp.conj() * a;
                }
            }
        }
        out
    }
}

/// Hilbert space of a chain, either as one dense block or split into
/// momentum sectors.
#[derive(Clone, Debug)]
pub enum Space {
    Full(ChainGeometry),
    Momentum(Box<MomentumBasis>),
}

impl Space {
    pub fn full(geometry: ChainGeometry) -> Self {
        Space::Full(geometry)
    }

    pub fn momentum(geometry: ChainGeometry) -> Self {
        Space::Momentum(Box::new(MomentumBasis::new(geometry)))
    }

    pub fn geometry(&self) -> ChainGeometry {
        match self {
            Space::Full(g) => *g,
            Space::Momentum(b) => b.geometry(),
        }
    }

    pub fn is_momentum(&self) -> bool {
        matches!(self, Space::Momentum(_))
    }

    pub fn block_dims(&self) -> Vec<usize> {
        match self {
            Space::Full(g) => vec![g.dim()],
            Space::Momentum(b) => b.sector_dims(),
        }
    }

    /// Blocks of `op`; in momentum mode `op` must be translation invariant.
    pub fn project(&self, op: &PauliSum) -> Result<BlockMatrix> {
        if op.geometry() != self.geometry() {
            return Err(Error::DimensionMismatch { expected: self.geometry().n_sites(), found: op.geometry().n_sites() });
        }
        match self {
            Space::Full(_) => Ok(BlockMatrix { blocks: vec![op.to_dense()] }),
            Space::Momentum(b) => {
                if !op.is_translation_invariant() {
                    return domain("operator is not translation invariant; use the full space");
                }
                Ok(BlockMatrix { blocks: b.project(op) })
            }
        }
    }

    /// Wraps a dense full-space matrix (full mode only).
    pub fn from_dense(&self, m: Mat<C64>) -> Result<BlockMatrix> {
        match self {
            Space::Full(g) if m.nrows() == g.dim() && m.ncols() == g.dim() => Ok(BlockMatrix { blocks: vec![m] }),
            Space::Full(g) => Err(Error::DimensionMismatch { expected: g.dim(), found: m.nrows() }),
            Space::Momentum(_) => domain("dense operators require the full space"),
        }
    }

    pub fn to_dense(&self, m: &BlockMatrix) -> Mat<C64> {
        match self {
            Space::Full(_) => m.blocks[0].clone(),
            Space::Momentum(b) => b.embed(m),
        }
    }

    /// `Tr[P rho]` for one placed string.
    pub fn string_expectation(&self, rho: &BlockMatrix, s: &PauliString) -> C64 {
        match self {
            Space::Full(_) => {
                let r = &rho.blocks[0];
                let (xm, zm, ph) = s.masks();
                let mut acc = ZERO;
                for y in 0..r.nrows() {
                    let sign = if (y & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    acc += r[(y, y ^ xm)] * sign;
                }
                acc * ph
            }
            Space::Momentum(b) => b.string_expectation(rho, s),
        }
    }

    /// Per-site expectation `Tr[O(alpha) rho] / N` of a class.
    ///
    /// In momentum mode `rho` is translation invariant, so the anchored
    /// string alone carries the per-site value.
    pub fn class_expectation(&self, rho: &BlockMatrix, class: &OperatorClass) -> Result<f64> {
        let g = self.geometry();
        match self {
            Space::Full(_) => {
                let strings = class.strings(g)?;
                let total: C64 = strings.iter().map(|s| self.string_expectation(rho, s)).sum();
                Ok(total.re / g.n_sites() as f64)
            }
            Space::Momentum(_) => Ok(self.string_expectation(rho, &class.anchor_string(g)?).re),
        }
    }

    /// `Tr[H rho]` for a Pauli sum.
    pub fn sum_expectation(&self, rho: &BlockMatrix, op: &PauliSum) -> f64 {
        op.terms().iter().map(|(c, s)| c * self.string_expectation(rho, s).re).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{enumerate_classes, OperatorClass};

    fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    fn sample_sum(n: usize) -> PauliSum {
        let g = ChainGeometry::new(n).unwrap();
        PauliSum::parse_terms(g, &[("ZZ", 1.0), ("X", 0.7), ("Z", -0.3), ("YZ", 0.2), ("XIY", -0.45)]).unwrap()
    }

    #[test]
    fn sector_dims_sum_to_full_dimension() {
        for n in 2..=8 {
            let g = ChainGeometry::new(n).unwrap();
            let b = MomentumBasis::new(g);
            assert_eq!(b.sector_dims().iter().sum::<usize>(), g.dim());
        }
    }

    #[test]
    fn blocks_embed_back_to_dense() {
        for n in [3, 4, 6] {
            let op = sample_sum(n);
            let space = Space::momentum(op.geometry());
            let blocks = space.project(&op).unwrap();
            let dense = op.to_dense();
            assert!(max_abs_diff(&space.to_dense(&blocks), &dense) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn string_expectation_matches_dense_trace() {
        let n = 6;
        let op = sample_sum(n);
        let space = Space::momentum(op.geometry());
        // A translation-invariant "density": any block-diagonal matrix works for the trace identity.
        let rho = space.project(&op).unwrap().matmul(&space.project(&op).unwrap());
        let dense = space.to_dense(&rho);
        let g = op.geometry();
        let cat = enumerate_classes(3, g).unwrap();
        for class in cat.classes().iter().step_by(5) {
            let s = class.anchor_string(g).unwrap();
            let p = s.to_dense();
            let prod = &p * &dense;
            let tr: C64 = (0..g.dim()).map(|i| prod[(i, i)]).sum();
            let got = space.string_expectation(&rho, &s);
            assert!((tr - got).norm() < 1e-9, "{class}: {tr} vs {got}");
        }
        let full = Space::full(g);
        let rho_full = full.from_dense(dense).unwrap();
        let c = OperatorClass::parse(0, "XZ").unwrap();
        let a = full.class_expectation(&rho_full, &c).unwrap();
        let b = space.class_expectation(&rho, &c).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn non_invariant_operator_rejected() {
        let g = ChainGeometry::new(4).unwrap();
        let mut op = PauliSum::zero(g);
        op.add_string(1.0, PauliString::placed(&[crate::pauli::PauliLetter::X], 0, g).unwrap());
        assert!(Space::momentum(g).project(&op).is_err());
        assert!(Space::full(g).project(&op).is_ok());
    }

    #[test]
    fn power_by_squaring() {
        let g = ChainGeometry::new(3).unwrap();
        let space = Space::full(g);
        let m = space.project(&sample_sum(3).scaled(0.1)).unwrap();
        let mut direct = BlockMatrix::identity(&space);
        for _ in 0..5 {
            direct = direct.matmul(&m);
        }
        let fast = m.power(5);
        assert!(max_abs_diff(&direct.blocks[0], &fast.blocks[0]) < 1e-12);
        assert!(max_abs_diff(&m.power(0).blocks[0], &Mat::identity(8, 8)) < 1e-15);
    }

    #[test]
    fn projected_state_norm() {
        let g = ChainGeometry::new(5).unwrap();
        let b = MomentumBasis::new(g);
        let psi: Vec<C64> = (0..g.dim()).map(|x| C64::new((x as f64).sin(), (x as f64 * 0.3).cos())).collect();
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let parts = b.project_state(&psi);
        let total: f64 = parts.iter().flatten().map(|a| a.norm_sqr()).sum();
        assert!((norm - total).abs() < 1e-9);
    }
}

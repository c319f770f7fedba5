//! Pauli strings on periodic spin-1/2 chains.
//!
//! Basis states are integers whose most significant bit (of `n_sites` bits)
//! is site 0, so `|s_0 s_1 ... s_{n-1}>` maps to the binary number
//! `s_0 s_1 ... s_{n-1}` with `1` meaning spin down (`sigma^z = -1`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest chain handled by the bit-mask representation.
pub const MAX_SITES: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub const ALL: [PauliLetter; 4] = [PauliLetter::I, PauliLetter::X, PauliLetter::Y, PauliLetter::Z];

    pub fn is_identity(self) -> bool {
        self == PauliLetter::I
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(PauliLetter::I),
            'X' => Ok(PauliLetter::X),
            'Y' => Ok(PauliLetter::Y),
            'Z' => Ok(PauliLetter::Z),
            _ => domain(format!("invalid Pauli letter {c:?}")),
        }
    }

    /// The 2x2 matrix of the letter.
    pub fn matrix(self) -> Mat<C64> {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let entries = match self {
            PauliLetter::I => [[one, z], [z, one]],
            PauliLetter::X => [[z, one], [one, z]],
            PauliLetter::Y => [[z, -i], [i, z]],
            PauliLetter::Z => [[one, z], [z, -one]],
        };
        Mat::from_fn(2, 2, |r, c| entries[r][c])
    }
}

impl fmt::Display for PauliLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

pub fn parse_pattern(s: &str) -> Result<Vec<PauliLetter>> {
    s.chars().map(PauliLetter::from_char).collect()
}

pub fn pattern_to_string(pattern: &[PauliLetter]) -> String {
    pattern.iter().map(|l| l.as_char()).collect()
}

/// Periodic chain of spin-1/2 sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainGeometry {
    n_sites: usize,
}

impl ChainGeometry {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return domain(format!("chain length {n_sites} outside 1..={MAX_SITES}"));
        }
        Ok(Self { n_sites })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    fn bit(&self, site: usize) -> u64 {
        1u64 << (self.n_sites - 1 - site)
    }

    /// Cyclic shift moving the spin on site `s` to site `s + 1`.
    pub fn translate(&self, state: usize) -> usize {
        let n = self.n_sites;
        (state >> 1) | ((state & 1) << (n - 1))
    }

    /// Cyclic shift by `shift` sites.
    pub fn translate_by(&self, state: usize, shift: usize) -> usize {
        let n = self.n_sites;
        let shift = shift % n;
        if shift == 0 {
            return state;
        }
        let mask = (1usize << n) - 1;
        ((state >> shift) | (state << (n - shift))) & mask
    }
}

/// One Pauli string placed on definite sites, stored as bit masks.
///
/// Acting on a basis state `x` it yields `phase * i^{n_y} * (-1)^{|x & z|} |x ^ xmask>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_sites: usize,
    x_mask: u64,
    z_mask: u64,
    n_y: u32,
}

impl PauliString {
    pub fn identity(geometry: ChainGeometry) -> Self {
        Self { n_sites: geometry.n_sites(), x_mask: 0, z_mask: 0, n_y: 0 }
    }

    /// Places `pattern` starting at `offset` (0-based) with periodic wraparound.
    pub fn placed(pattern: &[PauliLetter], offset: usize, geometry: ChainGeometry) -> Result<Self> {
        let n = geometry.n_sites();
        if offset >= n {
            return domain(format!("offset {offset} outside a chain of {n} sites"));
        }
        if pattern.len() > n {
            return domain(format!("pattern of length {} exceeds {n} sites", pattern.len()));
        }
        let mut s = Self::identity(geometry);
        for (k, &letter) in pattern.iter().enumerate() {
            let bit = geometry.bit((offset + k) % n);
            match letter {
                PauliLetter::I => {}
                PauliLetter::X => s.x_mask |= bit,
                PauliLetter::Z => s.z_mask |= bit,
                PauliLetter::Y => {
                    s.x_mask |= bit;
                    s.z_mask |= bit;
                    s.n_y += 1;
                }
            }
        }
        Ok(s)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn x_mask(&self) -> usize {
        self.x_mask as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    fn y_phase(&self) -> C64 {
        match self.n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// Image of basis state `x`: returns `(y, amplitude)` with `P|x> = amplitude |y>`.
    #[inline]
    pub fn apply(&self, x: usize) -> (usize, C64) {
        let y = x ^ self.x_mask as usize;
        let sign = if ((x as u64) & self.z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        (y, self.y_phase() * sign)
    }

    /// Real-valued sign pattern used when iterating many states: returns
    /// `(x_mask, z_mask, i^{n_y})`.
    #[inline]
    pub fn masks(&self) -> (usize, usize, C64) {
        (self.x_mask as usize, self.z_mask as usize, self.y_phase())
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let dim = 1usize << self.n_sites;
        let mut m = Mat::<C64>::zeros(dim, dim);
        for x in 0..dim {
            let (y, a) = self.apply(x);
            m[(y, x)] += a;
        }
        m
    }

    /// `<psi| P |psi>` for a full-space state vector.
    pub fn expectation(&self, psi: &[C64]) -> C64 {
        let (xm, zm, ph) = self.masks();
        let mut acc = C64::new(0.0, 0.0);
        for (x, &amp) in psi.iter().enumerate() {
            let sign = if (x & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += psi[x ^ xm].conj() * amp * sign;
        }
        acc * ph
    }
}

/// Translation-invariant class `O(alpha) = sum_j O_j(alpha)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorClass {
    pub id: usize,
    pattern: Vec<PauliLetter>,
}

impl OperatorClass {
    pub fn new(id: usize, pattern: Vec<PauliLetter>) -> Result<Self> {
        match (pattern.first(), pattern.last()) {
            (Some(a), Some(b)) if !a.is_identity() && !b.is_identity() => Ok(Self { id, pattern }),
            _ => domain(format!(
                "class pattern {:?} must start and end with a non-identity letter",
                pattern_to_string(&pattern)
            )),
        }
    }

    pub fn parse(id: usize, pattern: &str) -> Result<Self> {
        Self::new(id, parse_pattern(pattern)?)
    }

    pub fn pattern(&self) -> &[PauliLetter] {
        &self.pattern
    }

    pub fn support(&self) -> usize {
        self.pattern.len()
    }

    pub fn label(&self) -> String {
        pattern_to_string(&self.pattern)
    }

    /// The string anchored at site 0.
    pub fn anchor_string(&self, geometry: ChainGeometry) -> Result<PauliString> {
        PauliString::placed(&self.pattern, 0, geometry)
    }

    /// All `n_sites` translates of the pattern.
    pub fn strings(&self, geometry: ChainGeometry) -> Result<Vec<PauliString>> {
        (0..geometry.n_sites()).map(|j| PauliString::placed(&self.pattern, j, geometry)).collect()
    }
}

impl fmt::Display for OperatorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Number of classes with support at most `max_support`: `3 + sum_{l=2}^{S} 9 * 4^{l-2}`.
pub fn class_count(max_support: usize) -> usize {
    if max_support == 0 {
        return 0;
    }
    3 + (2..=max_support).map(|l| 9 * 4usize.pow(l as u32 - 2)).sum::<usize>()
}

/// Ordered collection of every class with support `<= max_support`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalog {
    geometry: ChainGeometry,
    max_support: usize,
    classes: Vec<OperatorClass>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ClassRecord {
    id: usize,
    pattern: String,
    support: usize,
}

impl Catalog {
    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn max_support(&self) -> usize {
        self.max_support
    }

    pub fn classes(&self) -> &[OperatorClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&OperatorClass> {
        self.classes.get(id)
    }

    pub fn id_of(&self, pattern: &str) -> Option<usize> {
        self.index.get(&pattern.to_ascii_uppercase()).copied()
    }

    pub fn by_pattern(&self, pattern: &str) -> Option<&OperatorClass> {
        self.id_of(pattern).map(|id| &self.classes[id])
    }

    /// Ids of all classes with exactly this support.
    pub fn ids_with_support(&self, support: usize) -> Vec<usize> {
        self.classes.iter().filter(|c| c.support() == support).map(|c| c.id).collect()
    }

    pub fn to_json(&self) -> String {
        let records: Vec<ClassRecord> = self
            .classes
            .iter()
            .map(|c| ClassRecord { id: c.id, pattern: c.label(), support: c.support() })
            .collect();
        serde_json::to_string(&records).expect("class records serialize")
    }
}

/// Every class with support `1..=max_support`, ordered by support and then
/// lexicographically (`I < X < Y < Z`) by pattern.
pub fn enumerate_classes(max_support: usize, geometry: ChainGeometry) -> Result<Catalog> {
    let n = geometry.n_sites();
    if max_support == 0 || 2 * max_support > n {
        return domain(format!("max support {max_support} must lie in 1..={} for {n} sites", n / 2));
    }
    let mut classes = Vec::with_capacity(class_count(max_support));
    for support in 1..=max_support {
        // base-4 codes with the first letter most significant enumerate
        // patterns in lexicographic order
        for code in 0..4usize.pow(support as u32) {
            let pattern: Vec<PauliLetter> = (0..support)
                .map(|k| PauliLetter::ALL[(code >> (2 * (support - 1 - k))) & 3])
                .collect();
            if !pattern[0].is_identity() && !pattern[support - 1].is_identity() {
                let id = classes.len();
                classes.push(OperatorClass { id, pattern });
            }
        }
    }
    let index = classes.iter().map(|c| (c.label(), c.id)).collect();
    Ok(Catalog { geometry, max_support, classes, index })
}

/// Dense matrix of `sum_j O_j(alpha)` over all translates.
pub fn class_to_matrix(class: &OperatorClass, geometry: ChainGeometry) -> Result<Mat<C64>> {
    let dim = geometry.dim();
    let mut m = Mat::<C64>::zeros(dim, dim);
    for s in class.strings(geometry)? {
        for x in 0..dim {
            let (y, a) = s.apply(x);
            m[(y, x)] += a;
        }
    }
    Ok(m)
}

/// Dense matrix of one copy of `pattern` starting at `site` (0-based).
pub fn single_string_to_matrix(pattern: &[PauliLetter], site: usize, geometry: ChainGeometry) -> Result<Mat<C64>> {
    Ok(PauliString::placed(pattern, site, geometry)?.to_dense())
}

/// Real linear combination of Pauli strings; Hermitian by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    geometry: ChainGeometry,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(geometry: ChainGeometry) -> Self {
        Self { geometry, terms: Vec::new() }
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.geometry
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_string(&mut self, coeff: f64, s: PauliString) {
        if coeff != 0.0 {
            self.terms.push((coeff, s));
        }
    }

    /// Adds `coeff * sum_j O_j(pattern)`.
    pub fn add_pattern(&mut self, coeff: f64, pattern: &[PauliLetter]) -> Result<()> {
        for j in 0..self.geometry.n_sites() {
            self.add_string(coeff, PauliString::placed(pattern, j, self.geometry)?);
        }
        Ok(())
    }

    pub fn add_class(&mut self, coeff: f64, class: &OperatorClass) -> Result<()> {
        self.add_pattern(coeff, class.pattern())
    }

    /// Builds `sum_alpha c_alpha O(alpha)`.
    pub fn from_classes<'a>(
        geometry: ChainGeometry,
        terms: impl IntoIterator<Item = (&'a OperatorClass, f64)>,
    ) -> Result<Self> {
        let mut sum = Self::zero(geometry);
        for (class, c) in terms {
            sum.add_class(c, class)?;
        }
        Ok(sum.simplified())
    }

    pub fn parse_terms(geometry: ChainGeometry, terms: &[(&str, f64)]) -> Result<Self> {
        let mut sum = Self::zero(geometry);
        for (p, c) in terms {
            sum.add_pattern(*c, &parse_pattern(p)?)?;
        }
        Ok(sum.simplified())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { geometry: self.geometry, terms: self.terms.iter().map(|(c, s)| (c * factor, *s)).collect() }
    }

    pub fn plus(&self, other: &PauliSum) -> Result<Self> {
        if self.geometry != other.geometry {
            return Err(Error::DimensionMismatch { expected: self.geometry.n_sites(), found: other.geometry.n_sites() });
        }
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(Self { geometry: self.geometry, terms }.simplified())
    }

    /// Merges repeated strings and drops zero coefficients, keeping first-seen order.
    pub fn simplified(&self) -> Self {
        let mut order: Vec<PauliString> = Vec::new();
        let mut acc: HashMap<PauliString, f64> = HashMap::new();
        for (c, s) in &self.terms {
            match acc.get_mut(s) {
                Some(v) => *v += c,
                None => {
                    acc.insert(*s, *c);
                    order.push(*s);
                }
            }
        }
        let terms = order.into_iter().map(|s| (acc[&s], s)).filter(|(c, _)| *c != 0.0).collect();
        Self { geometry: self.geometry, terms }
    }

    /// Calls `f(y, amplitude)` for each term of `H|x>`.
    #[inline]
    pub fn for_each_image(&self, x: usize, mut f: impl FnMut(usize, C64)) {
        for (c, s) in &self.terms {
            let (y, a) = s.apply(x);
            f(y, a * *c);
        }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let dim = self.geometry.dim();
        let mut m = Mat::<C64>::zeros(dim, dim);
        for x in 0..dim {
            self.for_each_image(x, |y, a| m[(y, x)] += a);
        }
        m
    }

    /// `H |psi>` on a full-space vector.
    pub fn apply_vec(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for (x, &amp) in psi.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            self.for_each_image(x, |y, a| out[y] += a * amp);
        }
        out
    }

    /// Whether the sum is invariant under the one-site cyclic shift.
    pub fn is_translation_invariant(&self) -> bool {
        let g = self.geometry;
        let shifted = PauliSum {
            geometry: g,
            terms: self
                .terms
                .iter()
                .map(|(c, s)| {
                    let t = PauliString {
                        n_sites: s.n_sites,
                        x_mask: g.translate(s.x_mask as usize) as u64,
                        z_mask: g.translate(s.z_mask as usize) as u64,
                        n_y: s.n_y,
                    };
                    (*c, t)
                })
                .collect(),
        };
        let a = self.simplified();
        let b = shifted.simplified();
        let map: HashMap<PauliString, f64> = a.terms.iter().map(|(c, s)| (*s, *c)).collect();
        a.terms.len() == b.terms.len()
            && b.terms.iter().all(|(c, s)| map.get(s).is_some_and(|v| (v - c).abs() <= 1e-14 * (1.0 + c.abs())))
    }
}

impl FromStr for OperatorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorClass::parse(0, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize) -> ChainGeometry {
        ChainGeometry::new(n).unwrap()
    }

    fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    fn diag(values: &[f64]) -> Mat<C64> {
        Mat::from_fn(values.len(), values.len(), |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
        Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
    }

    /// Brute-force count: every pattern over {I,X,Y,Z}^l with non-identity ends.
    fn brute_force_count(max_support: usize) -> usize {
        let mut count = 0;
        for l in 1..=max_support {
            for code in 0..4usize.pow(l as u32) {
                let first = code / 4usize.pow(l as u32 - 1);
                let last = code % 4;
                if first != 0 && last != 0 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn class_counts() {
        let g = geom(8);
        assert_eq!(enumerate_classes(1, g).unwrap().len(), 3);
        assert_eq!(enumerate_classes(2, g).unwrap().len(), 12);
        assert_eq!(enumerate_classes(3, g).unwrap().len(), 48);
        for s in 1..=4 {
            assert_eq!(enumerate_classes(s, g).unwrap().len(), brute_force_count(s));
            assert_eq!(class_count(s), brute_force_count(s));
        }
    }

    #[test]
    fn enumeration_order_is_support_then_lexicographic() {
        let cat = enumerate_classes(2, geom(4)).unwrap();
        let labels: Vec<String> = cat.classes().iter().map(|c| c.label()).collect();
        assert_eq!(&labels[..4], &["X", "Y", "Z", "XX"]);
        assert_eq!(labels.last().unwrap(), "ZZ");
        for (k, c) in cat.classes().iter().enumerate() {
            assert_eq!(c.id, k);
        }
        assert_eq!(cat.id_of("xz"), cat.id_of("XZ"));
    }

    #[test]
    fn support_out_of_range() {
        assert!(enumerate_classes(0, geom(8)).is_err());
        assert!(enumerate_classes(5, geom(8)).is_err());
        assert!(enumerate_classes(4, geom(8)).is_ok());
    }

    #[test]
    fn z_class_two_sites() {
        let z = OperatorClass::parse(0, "Z").unwrap();
        let m = class_to_matrix(&z, geom(2)).unwrap();
        assert!(max_abs_diff(&m, &diag(&[2.0, 0.0, 0.0, -2.0])) < 1e-15);
    }

    #[test]
    fn xx_class_two_sites() {
        let xx = OperatorClass::parse(0, "XX").unwrap();
        let m = class_to_matrix(&xx, geom(2)).unwrap();
        let x = PauliLetter::X.matrix();
        let expected = kron(&x, &x);
        let expected = Mat::from_fn(4, 4, |i, j| expected[(i, j)] * 2.0);
        assert!(max_abs_diff(&m, &expected) < 1e-15);
    }

    #[test]
    fn xix_trace_and_norm() {
        let c = OperatorClass::parse(0, "XIX").unwrap();
        let m = class_to_matrix(&c, geom(6)).unwrap();
        let mut tr = C64::new(0.0, 0.0);
        let mut fro = 0.0;
        for i in 0..64 {
            tr += m[(i, i)];
            for j in 0..64 {
                fro += m[(i, j)].norm_sqr();
            }
        }
        assert!(tr.norm() < 1e-12);
        assert!((fro - 6.0 * 64.0).abs() < 1e-9);
    }

    #[test]
    fn single_strings() {
        let x = single_string_to_matrix(&[PauliLetter::X], 0, geom(1)).unwrap();
        assert!(max_abs_diff(&x, &PauliLetter::X.matrix()) < 1e-15);
        let z2 = single_string_to_matrix(&[PauliLetter::Z], 1, geom(2)).unwrap();
        assert!(max_abs_diff(&z2, &diag(&[1.0, -1.0, 1.0, -1.0])) < 1e-15);
        assert!(single_string_to_matrix(&[PauliLetter::Z], 2, geom(2)).is_err());
    }

    #[test]
    fn wrapped_string_is_translated_copy() {
        // YZ placed on the last site wraps to the first; compare with an
        // explicit permutation-matrix conjugation of YZ on sites (0,1).
        let g = geom(4);
        let pat = parse_pattern("YZ").unwrap();
        let wrapped = single_string_to_matrix(&pat, 3, g).unwrap();
        let base = single_string_to_matrix(&pat, 0, g).unwrap();
        let dim = g.dim();
        let mut perm = Mat::<C64>::zeros(dim, dim);
        for x in 0..dim {
            perm[(g.translate_by(x, 3), x)] = C64::new(1.0, 0.0);
        }
        let conj = &perm * &base * perm.adjoint();
        assert!(max_abs_diff(&wrapped, &conj) < 1e-15);
    }

    #[test]
    fn product_of_letter_matrices_matches_bitmask_action() {
        let g = geom(3);
        let pat = parse_pattern("YXZ").unwrap();
        let dense = single_string_to_matrix(&pat, 0, g).unwrap();
        let explicit = kron(&kron(&PauliLetter::Y.matrix(), &PauliLetter::X.matrix()), &PauliLetter::Z.matrix());
        assert!(max_abs_diff(&dense, &explicit) < 1e-15);
    }

    #[test]
    fn invalid_class_patterns() {
        assert!(OperatorClass::parse(0, "IX").is_err());
        assert!(OperatorClass::parse(0, "XI").is_err());
        assert!(OperatorClass::parse(0, "").is_err());
        assert!(OperatorClass::parse(0, "XQ").is_err());
        assert!(OperatorClass::parse(0, "XIIY").is_ok());
    }

    #[test]
    fn catalog_json() {
        let cat = enumerate_classes(1, geom(4)).unwrap();
        assert_eq!(
            cat.to_json(),
            r#"[{"id":0,"pattern":"X","support":1},{"id":1,"pattern":"Y","support":1},{"id":2,"pattern":"Z","support":1}]"#
        );
    }

    #[test]
    fn pauli_sum_merges_duplicates() {
        let g = geom(2);
        // XX on a 2-ring: both translates coincide.
        let s = PauliSum::parse_terms(g, &[("XX", 0.5)]).unwrap();
        assert_eq!(s.terms().len(), 1);
        assert!((s.terms()[0].0 - 1.0).abs() < 1e-15);
        assert!(s.is_translation_invariant());
        let mut t = PauliSum::zero(g);
        t.add_string(1.0, PauliString::placed(&[PauliLetter::Z], 0, g).unwrap());
        assert!(!t.is_translation_invariant());
    }
}

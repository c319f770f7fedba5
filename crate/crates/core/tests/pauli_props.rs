//! Pauli strings against a Kronecker-product oracle built from 2x2 matrices.

use faer::Mat;
use hamlearn::pauli::{ChainGeometry, PauliLetter, PauliString, PauliSum};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTERS: [PauliLetter; 4] = [PauliLetter::I, PauliLetter::X, PauliLetter::Y, PauliLetter::Z];

fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |r, c| {
        a[(r / b.nrows(), c / b.ncols())] * b[(r % b.nrows(), c % b.ncols())]
    })
}

/// Site 0 is the leftmost tensor factor.
fn oracle(pattern: &[PauliLetter], offset: usize, n: usize) -> Mat<C64> {
    let mut per_site = vec![PauliLetter::I; n];
    for (k, &l) in pattern.iter().enumerate() {
        per_site[(offset + k) % n] = l;
    }
    per_site.iter().skip(1).fold(per_site[0].matrix(), |acc, l| kron(&acc, &l.matrix()))
}

fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            worst = worst.max((a[(r, c)] - b[(r, c)]).norm());
        }
    }
    worst
}

fn placement() -> impl Strategy<Value = (usize, Vec<PauliLetter>, usize)> {
    (2usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec(prop::sample::select(LETTERS.to_vec()), 1..=n), 0..n))
}

proptest! {
    #[test]
    fn placed_string_matches_kronecker((n, pattern, offset) in placement()) {
        let g = ChainGeometry::new(n).unwrap();
        let s = PauliString::placed(&pattern, offset, g).unwrap();
        prop_assert_eq!(max_diff(&s.to_dense(), &oracle(&pattern, offset, n)), 0.0);
    }

    #[test]
    fn expectation_is_the_quadratic_form((n, pattern, offset) in placement(), seed in any::<u64>()) {
        let g = ChainGeometry::new(n).unwrap();
        let s = PauliString::placed(&pattern, offset, g).unwrap();
        let dim = 1 << n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi: Vec<C64> = (0..dim).map(|_| C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))).collect();
        let m = oracle(&pattern, offset, n);
        let mut want = C64::new(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                want += psi[r].conj() * m[(r, c)] * psi[c];
            }
        }
        prop_assert!((s.expectation(&psi) - want).norm() < 1e-12);
    }

    #[test]
    fn real_sums_are_hermitian((n, pattern, offset) in placement(), c in -2.0f64..2.0) {
        let g = ChainGeometry::new(n).unwrap();
        let mut h = PauliSum::zero(g);
        h.add_pattern(c, &pattern).unwrap();
        h.add_string(0.5, PauliString::placed(&pattern, offset, g).unwrap());
        let d = h.to_dense();
        let adjoint = Mat::from_fn(d.ncols(), d.nrows(), |r, k| d[(k, r)].conj());
        prop_assert!(max_diff(&d, &adjoint) < 1e-12);
    }
}

//! Exact dense linear algebra over integers and rationals.
//!
//! Everything here is fraction-free where possible: Bareiss elimination
//! keeps every intermediate entry an integer minor of the input, which is
//! what makes exact Laplacian work tractable beyond a handful of vertices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

pub type IntMatrix = Vec<Vec<BigInt>>;

/// Determinant by Bareiss elimination with row pivoting.
pub fn determinant(mut a: IntMatrix) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &a[k][k] * &a[i][j] - &a[i][k] * &a[k][j];
                a[i][j] = exact_div(num, &prev);
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Fraction-free Gauss-Jordan on `[A | I]` for a matrix whose leading
/// principal minors are all nonzero (e.g. a grounded Laplacian).
/// Returns `(adj(A), det(A))`, so `A^{-1} = adj / det`.
/// Returns `None` if a zero pivot is met.
pub fn adjugate_and_det(a: &IntMatrix) -> Option<(IntMatrix, BigInt)> {
    let n = a.len();
    if n == 0 {
        return Some((Vec::new(), BigInt::one()));
    }
    let mut aug: IntMatrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            r
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        if aug[k][k].is_zero() {
            return None;
        }
        let pivot_row = aug[k].clone();
        for (i, row) in aug.iter_mut().enumerate() {
            if i == k {
                continue;
            }
            let factor = row[k].clone();
            for j in 0..2 * n {
                if j == k {
                    continue;
                }
                let num = &pivot_row[k] * &row[j] - &factor * &pivot_row[j];
                row[j] = exact_div(num, &prev);
            }
            row[k] = BigInt::zero();
        }
        prev = pivot_row[k].clone();
    }
    let det = prev;
    let adj = aug.into_iter().map(|row| row[n..].to_vec()).collect();
    Some((adj, det))
}

fn exact_div(num: BigInt, den: &BigInt) -> BigInt {
    if den.is_one() {
        return num;
    }
    let (q, r) = num.div_rem(den);
    debug_assert!(r.is_zero(), "Bareiss division must be exact");
    q
}

/// Solves `A x = b` over the rationals by Gaussian elimination with
/// partial pivoting on the first nonzero entry. `None` if singular.
pub fn solve_rational(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n).find(|&r| !m[r][k].is_zero())?;
        m.swap(k, p);
        let pivot = m[k][k].clone();
        for j in k..=n {
            m[k][j] = &m[k][j] / &pivot;
        }
        let pivot_row = m[k].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == k || row[k].is_zero() {
                continue;
            }
            let f = row[k].clone();
            for j in k..=n {
                row[j] = &row[j] - &f * &pivot_row[j];
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

pub fn quadratic_form(a: &[Vec<Rational>], x: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (i, row) in a.iter().enumerate() {
        if x[i].is_zero() {
            continue;
        }
        for (j, aij) in row.iter().enumerate() {
            if !x[j].is_zero() && !aij.is_zero() {
                acc += &x[i] * aij * &x[j];
            }
        }
    }
    acc
}

pub fn is_nonneg(r: &Rational) -> bool {
    !r.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use proptest::prelude::*;

    fn im(rows: &[&[i64]]) -> IntMatrix {
        rows.iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect()
    }

    #[test]
    fn small_determinants() {
        assert_eq!(determinant(im(&[&[2, 1], &[1, 3]])), BigInt::from(5));
        assert_eq!(determinant(im(&[&[0, 1], &[1, 0]])), BigInt::from(-1));
        assert_eq!(determinant(im(&[&[1, 2], &[2, 4]])), BigInt::zero());
        assert_eq!(determinant(Vec::new()), BigInt::one());
    }

    #[test]
    fn adjugate_of_two_by_two() {
        let (adj, det) = adjugate_and_det(&im(&[&[2, -1], &[-1, 2]])).unwrap();
        assert_eq!(det, BigInt::from(3));
        assert_eq!(adj, im(&[&[2, 1], &[1, 2]]));
    }

    fn spd(n: usize, seed: &[i64]) -> IntMatrix {
        // B^T B + I is symmetric positive definite.
        let b: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| seed[(i * n + j) % seed.len()]).collect())
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let s: i64 = (0..n).map(|k| b[k][i] * b[k][j]).sum();
                        BigInt::from(s + i64::from(i == j))
                    })
                    .collect()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn adjugate_agrees_with_rational_solve(
            n in 1usize..6,
            seed in proptest::collection::vec(-4i64..5, 1..30),
        ) {
            let a = spd(n, &seed);
            let (adj, det) = adjugate_and_det(&a).unwrap();
            prop_assert_eq!(&det, &determinant(a.clone()));
            let ar: Vec<Vec<Rational>> = a
                .iter()
                .map(|r| r.iter().map(|v| Rational::from_integer(v.clone())).collect())
                .collect();
            for col in 0..n {
                let e: Vec<Rational> = (0..n).map(|i| int(i64::from(i == col))).collect();
                let x = solve_rational(&ar, &e).unwrap();
                for row in 0..n {
                    let expect = Rational::new(adj[row][col].clone(), det.clone());
                    prop_assert_eq!(&x[row], &expect);
                }
            }
        }
    }
}

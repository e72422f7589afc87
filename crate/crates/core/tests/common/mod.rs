#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Published table of z(ell, n) for ell, n in 1..=10; row ell - 1, column n - 1.
pub const TABLE_I: [[u64; 10]; 10] = [
    [0, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [0, 2, 2, 8, 22, 52, 114, 240, 494, 1004],
    [0, 3, 3, 21, 63, 243, 969, 3657, 12987, 43959],
    [0, 4, 4, 40, 124, 664, 3196, 15712, 79228, 396616],
    [0, 5, 5, 65, 205, 1405, 7425, 44385, 271205, 1666925],
    [0, 6, 6, 96, 306, 2556, 14286, 100176, 691146, 4916436],
    [0, 7, 7, 133, 427, 4207, 24409, 196105, 1471519, 11773699],
    [0, 8, 8, 176, 568, 6448, 38424, 347712, 2775032, 24547664],
    [0, 9, 9, 225, 729, 9369, 56961, 573057, 4794633, 46341081],
    [0, 10, 10, 280, 910, 13060, 80650, 892720, 7753510, 81163900],
];

/// z(ell, n) counted by row occupancy instead of pivots: choose which `j`
/// rows are used (in order, `ell (ell-1) ... (ell-j+1)` ways up to the
/// block labelling) and split the `n` columns into `j` blocks of size at
/// least two. Block counts follow
/// `S2(n, j) = j S2(n-1, j) + (n-1) S2(n-2, j-1)`.
pub fn z_by_occupancy(ell: usize, n: usize) -> BigUint {
    // s2[a][j] for a <= n
    let mut s2 = vec![vec![BigUint::zero(); n / 2 + 2]; n + 1];
    s2[0][0] = BigUint::one();
    for a in 1..=n {
        for j in 1..=a / 2 {
            let mut v = &s2[a - 1][j] * j;
            if a >= 2 {
                v += &s2[a - 2][j - 1] * (a - 1);
            }
            s2[a][j] = v;
        }
    }
    let mut total = BigUint::zero();
    let mut falling = BigUint::one();
    for j in 0..=(n / 2).min(ell) {
        if j > 0 {
            falling *= ell - j + 1;
        }
        total += &falling * &s2[n][j];
    }
    total
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

//! Small complex linear algebra over phase-masked 3-vectors and 3x3 blocks.
//!
//! Absent phases are carried as zero entries; operations that need an
//! inverse work on the sub-matrix selected by a phase mask and embed the
//! result back with zeros.

use num_complex::Complex64;

pub type C = Complex64;
pub type Vec3 = [C; 3];
pub type Mat3 = [[C; 3]; 3];
pub type Mask = [bool; 3];

pub const ZERO_V: Vec3 = [C::new(0.0, 0.0); 3];
pub const ZERO_M: Mat3 = [[C::new(0.0, 0.0); 3]; 3];

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = ZERO_V;
    for r in 0..3 {
        let mut acc = C::new(0.0, 0.0);
        for c in 0..3 {
            acc += m[r][c] * v[c];
        }
        out[r] = acc;
    }
    out
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = ZERO_M;
    for r in 0..3 {
        for c in 0..3 {
            let mut acc = C::new(0.0, 0.0);
            for k in 0..3 {
                acc += a[r][k] * b[k][c];
            }
            out[r][c] = acc;
        }
    }
    out
}

pub fn mat_add_assign(a: &mut Mat3, b: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] += b[r][c];
        }
    }
}

pub fn vec_add_assign(a: &mut Vec3, b: &Vec3) {
    for i in 0..3 {
        a[i] += b[i];
    }
}

pub fn vec_sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Identity restricted to a mask (zero elsewhere).
pub fn identity_masked(mask: Mask) -> Mat3 {
    let mut m = ZERO_M;
    for (i, &on) in mask.iter().enumerate() {
        if on {
            m[i][i] = C::new(1.0, 0.0);
        }
    }
    m
}

/// Invert the sub-matrix selected by `mask`, embedding the result back with
/// zero rows/columns. Returns `None` if the sub-matrix is singular.
pub fn invert_masked(m: &Mat3, mask: Mask) -> Option<Mat3> {
    let idx: Vec<usize> = (0..3).filter(|&i| mask[i]).collect();
    let n = idx.len();
    if n == 0 {
        return Some(ZERO_M);
    }
    // Gauss-Jordan with partial pivoting on the reduced system.
    let mut a = vec![vec![C::new(0.0, 0.0); 2 * n]; n];
    for (r, &ri) in idx.iter().enumerate() {
        for (c, &ci) in idx.iter().enumerate() {
            a[r][c] = m[ri][ci];
        }
        a[r][n + r] = C::new(1.0, 0.0);
    }
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, a[r][col].norm_sqr()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        let inv = C::new(1.0, 0.0) / a[col][col];
        for c in col..2 * n {
            a[col][c] *= inv;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != C::new(0.0, 0.0) {
                    for c in col..2 * n {
                        let sub = f * a[col][c];
                        a[r][c] -= sub;
                    }
                }
            }
        }
    }
    let mut out = ZERO_M;
    for (r, &ri) in idx.iter().enumerate() {
        for (c, &ci) in idx.iter().enumerate() {
            out[ri][ci] = a[r][n + c];
        }
    }
    Some(out)
}

/// Wrap an angle into (-pi, pi].
pub fn principal_angle(a: f64) -> f64 {
    let mut x = a;
    while x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    }
    while x <= -std::f64::consts::PI {
        x += 2.0 * std::f64::consts::PI;
    }
    x
}

//! Selling's algorithm: decomposition of a symmetric positive-definite
//! matrix into a nonnegative combination of rank-one integer tensors
//! `D = Σ ρ_k e_k e_kᵀ`.

type V2 = [i64; 2];
type V3 = [i64; 3];

fn dot2(d: &[[f64; 2]; 2], a: V2, b: V2) -> f64 {
    let (a0, a1, b0, b1) = (a[0] as f64, a[1] as f64, b[0] as f64, b[1] as f64);
    a0 * (d[0][0] * b0 + d[0][1] * b1) + a1 * (d[1][0] * b0 + d[1][1] * b1)
}

fn dot3(d: &[[f64; 3]; 3], a: V3, b: V3) -> f64 {
    let mut s = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            s += a[r] as f64 * d[r][c] * b[c] as f64;
        }
    }
    s
}

const MAX_ITERATIONS: usize = 10_000;

/// Decomposes a 2×2 SPD matrix into three weighted integer offsets.
pub fn selling_2d(d: &[[f64; 2]; 2]) -> [(f64, [i32; 2]); 3] {
    let mut b: [V2; 3] = [[1, 0], [0, 1], [-1, -1]];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        'search: for i in 0..3 {
            for j in (i + 1)..3 {
                if dot2(d, b[i], b[j]) > 0.0 {
                    let k = 3 - i - j;
                    let (ei, ej) = (b[i], b[j]);
                    b[i] = [-ei[0], -ei[1]];
                    b[k] = [ei[0] - ej[0], ei[1] - ej[1]];
                    changed = true;
                    break 'search;
                }
            }
        }
        if !changed {
            break;
        }
    }
    std::array::from_fn(|k| {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let w = -dot2(d, b[i], b[j]);
        let e = b[k];
        (w.max(0.0), [-e[1] as i32, e[0] as i32])
    })
}

/// Decomposes a 3×3 SPD matrix into six weighted integer offsets.
pub fn selling_3d(d: &[[f64; 3]; 3]) -> [(f64, [i32; 3]); 6] {
    let mut b: [V3; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, -1, -1]];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        'search: for i in 0..4 {
            for j in (i + 1)..4 {
                if dot3(d, b[i], b[j]) > 0.0 {
                    let ei = b[i];
                    for (k, v) in b.iter_mut().enumerate() {
                        if k != i && k != j {
                            *v = [v[0] + ei[0], v[1] + ei[1], v[2] + ei[2]];
                        }
                    }
                    b[i] = [-ei[0], -ei[1], -ei[2]];
                    changed = true;
                    break 'search;
                }
            }
        }
        if !changed {
            break;
        }
    }
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    std::array::from_fn(|p| {
        let (i, j) = PAIRS[p];
        let mut rest = (0..4).filter(|&k| k != i && k != j);
        let (k, l) = (rest.next().unwrap_or(0), rest.next().unwrap_or(0));
        let (a, c) = (b[k], b[l]);
        let e = [
            a[1] * c[2] - a[2] * c[1],
            a[2] * c[0] - a[0] * c[2],
            a[0] * c[1] - a[1] * c[0],
        ];
        let w = -dot3(d, b[i], b[j]);
        (w.max(0.0), [e[0] as i32, e[1] as i32, e[2] as i32])
    })
}

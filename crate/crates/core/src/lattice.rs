//! Integer lattice helpers: Smith normal form with unimodular transforms,
//! exact rational rank and null vectors for small weight matrices.

use num_integer::Integer;
use num_rational::Ratio;

type Q = Ratio<i128>;

/// Smith normal form `U * M * V = S` of an integer matrix.
///
/// `diag` holds the nonzero elementary divisors `e_1 | e_2 | ...` (all positive),
/// its length is the rank of `M`.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub diag: Vec<i128>,
    pub u: Vec<Vec<i128>>,
    pub v: Vec<Vec<i128>>,
    pub rows: usize,
    pub cols: usize,
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.diag.len()
    }

    /// Product of the elementary divisors, i.e. the index of the lattice spanned by the
    /// columns inside `Z^rows` when the rank is full.
    pub fn index(&self) -> Option<i128> {
        if self.rank() < self.rows {
            return None;
        }
        Some(self.diag.iter().product())
    }
}

fn identity(n: usize) -> Vec<Vec<i128>> {
    (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect()
}

fn swap_rows(m: &mut [Vec<i128>], a: usize, b: usize) {
    m.swap(a, b);
}

fn swap_cols(m: &mut [Vec<i128>], a: usize, b: usize) {
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

/// row_a += c * row_b
fn add_row(m: &mut [Vec<i128>], a: usize, b: usize, c: i128) {
    let src = m[b].clone();
    for (x, y) in m[a].iter_mut().zip(src) {
        *x += c * y;
    }
}

/// col_a += c * col_b
fn add_col(m: &mut [Vec<i128>], a: usize, b: usize, c: i128) {
    for row in m.iter_mut() {
        let y = row[b];
        row[a] += c * y;
    }
}

fn negate_row(m: &mut [Vec<i128>], a: usize) {
    for x in m[a].iter_mut() {
        *x = -*x;
    }
}

/// Computes the Smith normal form of `m` (given row-major, `rows x cols`).
pub fn smith_normal_form(m: &[Vec<i64>]) -> SmithForm {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&x| i128::from(x)).collect())
        .collect();
    let mut u = identity(rows);
    let mut v = identity(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: smallest nonzero |entry| in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        swap_rows(&mut a, t, pi);
        swap_rows(&mut u, t, pi);
        swap_cols(&mut a, t, pj);
        swap_cols(&mut v, t, pj);

        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if a[i][t] != 0 {
                    let q = Integer::div_floor(&a[i][t], &a[t][t]);
                    add_row(&mut a, i, t, -q);
                    add_row(&mut u, i, t, -q);
                    if a[i][t] != 0 {
                        swap_rows(&mut a, t, i);
                        swap_rows(&mut u, t, i);
                        dirty = true;
                    }
                }
            }
            for j in t + 1..cols {
                if a[t][j] != 0 {
                    let q = Integer::div_floor(&a[t][j], &a[t][t]);
                    add_col(&mut a, j, t, -q);
                    add_col(&mut v, j, t, -q);
                    if a[t][j] != 0 {
                        swap_cols(&mut a, t, j);
                        swap_cols(&mut v, t, j);
                        dirty = true;
                    }
                }
            }
            if dirty {
                continue;
            }
            // divisibility of the trailing block
            let mut fix = None;
            'outer: for i in t + 1..rows {
                for j in t + 1..cols {
                    if a[i][j] % a[t][t] != 0 {
                        fix = Some(i);
                        break 'outer;
                    }
                }
            }
            match fix {
                Some(i) => {
                    add_row(&mut a, t, i, 1);
                    add_row(&mut u, t, i, 1);
                }
                None => break,
            }
        }
        if a[t][t] < 0 {
            negate_row(&mut a, t);
            negate_row(&mut u, t);
        }
        t += 1;
    }
    let diag = (0..rows.min(cols))
        .map(|i| a[i][i])
        .take_while(|&x| x != 0)
        .collect();
    SmithForm { diag, u, v, rows, cols }
}

fn to_q(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    m.iter()
        .map(|r| r.iter().map(|&x| Q::from_integer(i128::from(x))).collect())
        .collect()
}

/// Reduced row echelon form over the rationals; returns the pivot columns.
fn rref(a: &mut [Vec<Q>]) -> Vec<usize> {
    let rows = a.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = a[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| a[i][c] != Q::from_integer(0)) else {
            continue;
        };
        a.swap(r, p);
        let inv = Q::from_integer(1) / a[r][c];
        for x in a[r].iter_mut() {
            *x *= inv;
        }
        for i in 0..rows {
            if i != r && a[i][c] != Q::from_integer(0) {
                let f = a[i][c];
                let src = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(src) {
                    *x -= f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Exact rank of an integer matrix (row-major).
pub fn rank(m: &[Vec<i64>]) -> usize {
    let mut a = to_q(m);
    rref(&mut a).len()
}

/// Rank of a set of integer vectors.
pub fn rank_of_vectors(vectors: &[&[i64]]) -> usize {
    let rows: Vec<Vec<i64>> = vectors.iter().map(|v| v.to_vec()).collect();
    rank(&rows)
}

/// A basis of the rational null space of `m` (vectors `c` with `m * c = 0`).
pub fn null_space(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    let mut a = to_q(m);
    let cols = if a.is_empty() { 0 } else { a[0].len() };
    let pivots = rref(&mut a);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::from_integer(0); cols];
            v[f] = Q::from_integer(1);
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f];
            }
            v
        })
        .collect()
}

/// Integer determinant by fraction-free (Bareiss) elimination.
pub fn determinant(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&x| i128::from(x)).collect())
        .collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return 0;
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Integer normal vector to the hyperplane spanned by `r - 1` vectors in `Z^r`
/// (generalized cross product via cofactors). Zero when they are dependent.
pub fn hyperplane_normal(vectors: &[&[i64]], r: usize) -> Vec<i128> {
    debug_assert_eq!(vectors.len() + 1, r);
    (0..r)
        .map(|i| {
            let minor: Vec<Vec<i64>> = vectors
                .iter()
                .map(|v| (0..r).filter(|&c| c != i).map(|c| v[c]).collect())
                .collect();
            let sign = if i % 2 == 0 { 1 } else { -1 };
            sign * determinant(&minor)
        })
        .collect()
}

/// All subsets of `0..n` of the given size, in lexicographic order.
pub fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

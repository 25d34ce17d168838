//! Truncated-basis operators: quadratic generators, their invariant blocks, and local maps.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::expm::expm;

/// Row-major tensor layout: mode 0 is the most significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub modes: usize,
    pub levels: usize,
}

impl Layout {
    pub fn new(modes: usize, cutoff: usize) -> Self {
        Layout {
            modes,
            levels: cutoff + 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(self.modes as u32)
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.levels.pow((self.modes - 1 - mode) as u32)
    }

    pub fn digit(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.levels
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        (0..self.modes).map(|m| self.digit(index, m)).collect()
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.levels + d)
    }

    /// Copies `data` laid out as `self` into `target`, dropping entries beyond its cutoff.
    pub fn remap(&self, data: &[Complex64], target: Layout) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); target.dim()];
        for (i, v) in data.iter().enumerate() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let d = self.digits(i);
            if d.iter().all(|&x| x < target.levels) {
                out[target.index(&d)] = *v;
            }
        }
        out
    }

    /// Index with `mode` removed, plus that mode's occupation.
    pub fn split(&self, index: usize, mode: usize) -> (usize, usize) {
        let stride = self.stride(mode);
        let high = index / (stride * self.levels);
        let low = index % stride;
        (high * stride + low, (index / stride) % self.levels)
    }

    pub fn without(&self) -> Layout {
        Layout {
            modes: self.modes - 1,
            levels: self.levels,
        }
    }
}

/// A product of ladder operators on local modes, applied right to left.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub coeff: Complex64,
    /// `(local mode, is_creation)`.
    pub ops: Vec<(usize, bool)>,
}

impl Term {
    pub fn new(coeff: Complex64, ops: &[(usize, bool)]) -> Self {
        Term {
            coeff,
            ops: ops.to_vec(),
        }
    }
}

/// Sum of terms acting on `k` local modes truncated at `levels` per mode.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    pub local_modes: usize,
    pub terms: Vec<Term>,
}

/// An invariant subspace of the generator with the exponential restricted to it.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub indices: Vec<usize>,
    pub u: DMatrix<Complex64>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Generator {
    /// Sparse matrix entries `(row, col, value)` in the local space.
    fn entries(&self, levels: usize) -> Vec<(usize, usize, Complex64)> {
        let local = Layout::new(self.local_modes, levels - 1);
        let mut out = Vec::new();
        for col in 0..local.dim() {
            for term in &self.terms {
                let mut digits = local.digits(col);
                let mut factor = term.coeff;
                let mut alive = true;
                for &(m, create) in term.ops.iter().rev() {
                    if create {
                        if digits[m] + 1 >= levels {
                            alive = false;
                            break;
                        }
                        digits[m] += 1;
                        factor *= (digits[m] as f64).sqrt();
                    } else {
                        if digits[m] == 0 {
                            alive = false;
                            break;
                        }
                        factor *= (digits[m] as f64).sqrt();
                        digits[m] -= 1;
                    }
                }
                if alive && factor.norm() > 0.0 {
                    out.push((local.index(&digits), col, factor));
                }
            }
        }
        out
    }

    /// Exponential of the truncated generator, one dense block per connected component.
    pub fn exp_blocks(&self, levels: usize) -> Vec<Block> {
        let dim = levels.pow(self.local_modes as u32);
        let entries = self.entries(levels);
        let mut parent: Vec<usize> = (0..dim).collect();
        for &(r, c, _) in &entries {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a] = b;
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..dim {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        let mut position = vec![0usize; dim];
        let mut blocks = Vec::new();
        let mut members: Vec<Vec<usize>> = groups.into_values().collect();
        members.sort_by_key(|g| g[0]);
        let mut block_of = vec![0usize; dim];
        for (b, g) in members.iter().enumerate() {
            for (p, &i) in g.iter().enumerate() {
                position[i] = p;
                block_of[i] = b;
            }
        }
        let mut mats: Vec<DMatrix<Complex64>> =
            members.iter().map(|g| DMatrix::zeros(g.len(), g.len())).collect();
        for &(r, c, v) in &entries {
            mats[block_of[r]][(position[r], position[c])] += v;
        }
        for (g, m) in members.into_iter().zip(mats) {
            if m.iter().all(|v| v.norm() == 0.0) {
                continue;
            }
            blocks.push(Block { indices: g, u: expm(&m) });
        }
        blocks
    }
}

/// Applies a local operator, given as blocks over the local space of `modes`, to a vector.
pub(crate) fn apply_blocks(data: &mut [Complex64], layout: Layout, modes: &[usize], blocks: &[Block]) {
    let local = Layout::new(modes.len(), layout.levels - 1);
    let offsets: Vec<usize> = (0..local.dim())
        .map(|l| {
            local
                .digits(l)
                .iter()
                .zip(modes)
                .map(|(&d, &m)| d * layout.stride(m))
                .sum()
        })
        .collect();
    let mut buf = Vec::new();
    for base in 0..layout.dim() {
        if modes.iter().any(|&m| layout.digit(base, m) != 0) {
            continue;
        }
        for block in blocks {
            buf.clear();
            buf.extend(block.indices.iter().map(|&l| data[base + offsets[l]]));
            if buf.iter().all(|v| v.norm_sqr() == 0.0) {
                continue;
            }
            for (row, &l) in block.indices.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, x) in buf.iter().enumerate() {
                    acc += block.u[(row, col)] * x;
                }
                data[base + offsets[l]] = acc;
            }
        }
    }
}

/// Applies a dense single-mode operator (`levels × levels`) along one tensor axis.
pub(crate) fn apply_mode_matrix(data: &[Complex64], layout: Layout, mode: usize, m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let block = Block {
        indices: (0..layout.levels).collect(),
        u: m.clone(),
    };
    let mut out = data.to_vec();
    apply_blocks(&mut out, layout, &[mode], std::slice::from_ref(&block));
    out
}

/// `M ρ M†` for a density stored column-major, with `M` given as a vector map.
pub(crate) fn sandwich<F: Fn(&[Complex64]) -> Vec<Complex64>>(rho: &DMatrix<Complex64>, apply: F) -> DMatrix<Complex64> {
    let dim = rho.nrows();
    let mut x = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let col = rho.column(j);
        if col.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let mapped = apply(col.as_slice());
        x.set_column(j, &nalgebra::DVector::from_vec(mapped));
    }
    let xa = x.adjoint();
    let mut y = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let col = xa.column(j);
        if col.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        y.set_column(j, &nalgebra::DVector::from_vec(apply(col.as_slice())));
    }
    y.adjoint()
}

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

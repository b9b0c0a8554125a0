//! Prime-field linear algebra and partition matroids.
//!
//! A partition matroid is stored both combinatorially (disjoint blocks with capacities) and as
//! a block-diagonal matrix over GF(p): block `i` with capacity `c` and roles `x_1..x_m` gets
//! the `c x m` Vandermonde slice whose column for the `j`-th role is `(1, j, j^2, ..., j^(c-1))`.
//! Every `c` columns of a slice form a nonsingular Vandermonde matrix whenever `p > m`.

use thiserror::Error;

use crate::model::{Instance, RoleId};
use crate::reduce::BranchLeaf;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatroidError {
    #[error("{0} is not a prime modulus")]
    NotPrime(u64),
    #[error("role {role} lies in blocks {first} and {second}")]
    OverlappingBlocks {
        role: RoleId,
        first: usize,
        second: usize,
    },
    #[error("block {block} mentions role {role} outside a ground set of size {ground}")]
    OutOfGround {
        block: usize,
        role: RoleId,
        ground: usize,
    },
    #[error("field GF({p}) is too small to represent a block of {width} roles")]
    FieldTooSmall { p: u64, width: usize },
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Least prime strictly greater than `n`.
pub fn smallest_prime_above(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, MatroidError> {
        // Products are reduced through u128, so any u64 prime works.
        if is_prime(p) {
            Ok(PrimeField { p })
        } else {
            Err(MatroidError::NotPrime(p))
        }
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.p
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.p as u128) as u64
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.p - (b - a)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.p as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `a` must be nonzero.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(!a.is_multiple_of(self.p), "inverse of zero");
        self.pow(a, self.p - 2)
    }
}

/// Row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(field: PrimeField, rows: &[Vec<u64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(field, rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            for (j, &x) in row.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: u64) {
        self.data[i * self.cols + j] = self.field.reduce(x);
    }

    pub fn mul(&self, other: &FieldMatrix) -> FieldMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        assert_eq!(self.field, other.field, "field mismatch");
        let f = self.field;
        let mut out = FieldMatrix::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = f.add(out.data[idx], f.mul(a, other.get(k, j)));
                }
            }
        }
        out
    }

    /// The submatrix on `rows` x `cols`, row-major.
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> Vec<u64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Row-reduces `data` (`rows x cols`, row-major) in place and returns its rank.
pub fn eliminate(field: PrimeField, data: &mut [u64], rows: usize, cols: usize) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| data[r * cols + col] != 0) else {
            continue;
        };
        if pivot != rank {
            for j in 0..cols {
                data.swap(pivot * cols + j, rank * cols + j);
            }
        }
        let inv = field.inv(data[rank * cols + col]);
        for r in rank + 1..rows {
            let factor = data[r * cols + col];
            if factor == 0 {
                continue;
            }
            let factor = field.mul(factor, inv);
            for j in col..cols {
                let sub = field.mul(factor, data[rank * cols + j]);
                data[r * cols + j] = field.sub(data[r * cols + j], sub);
            }
        }
        rank += 1;
    }
    rank
}

/// Determinant of the `n x n` row-major matrix `data` (consumed as scratch).
pub fn determinant(field: PrimeField, data: &mut [u64], n: usize) -> u64 {
    let mut det = 1u64;
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| data[r * n + col] != 0) else {
            return 0;
        };
        if pivot != col {
            for j in 0..n {
                data.swap(pivot * n + j, col * n + j);
            }
            det = field.neg(det);
        }
        let d = data[col * n + col];
        det = field.mul(det, d);
        let inv = field.inv(d);
        for r in col + 1..n {
            let factor = data[r * n + col];
            if factor == 0 {
                continue;
            }
            let factor = field.mul(factor, inv);
            for j in col..n {
                let sub = field.mul(factor, data[col * n + j]);
                data[r * n + j] = field.sub(data[r * n + j], sub);
            }
        }
    }
    det
}

/// Rank of the columns `cols` of `mat`.
pub fn rank_of_columns(mat: &FieldMatrix, cols: &[usize]) -> usize {
    if cols.is_empty() || mat.rows() == 0 {
        return 0;
    }
    // Transposed: one row per selected column.
    let mut data = Vec::with_capacity(cols.len() * mat.rows());
    for &j in cols {
        for i in 0..mat.rows() {
            data.push(mat.get(i, j));
        }
    }
    eliminate(mat.field(), &mut data, cols.len(), mat.rows())
}

/// A uniform block of a partition matroid: at most `capacity` of `roles` may be chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub roles: Vec<RoleId>,
    pub capacity: usize,
}

#[derive(Debug, Clone)]
pub struct PartitionMatroid {
    ground: Vec<RoleId>,
    blocks: Vec<Block>,
    block_of: Vec<usize>,
    /// First representation row of each block.
    row_offset: Vec<usize>,
    rep: FieldMatrix,
    rank: usize,
}

impl PartitionMatroid {
    /// Builds the matroid on ground `0..n` from disjoint `blocks`; every role not covered gets a
    /// singleton block of capacity 1. Capacities above the block width are clamped to it.
    /// The field is the least prime above max(n, widest block, 2 * rank).
    pub fn from_blocks(n: usize, blocks: Vec<Block>) -> Result<Self, MatroidError> {
        let (blocks, block_of) = complete_blocks(n, blocks)?;
        let rank: usize = blocks.iter().map(|b| b.capacity).sum();
        let widest = blocks.iter().map(|b| b.roles.len()).max().unwrap_or(0);
        let p = smallest_prime_above(n.max(widest).max(2 * rank) as u64);
        let field = PrimeField::new(p).expect("smallest_prime_above returns primes");
        Self::assemble(n, blocks, block_of, field)
    }

    /// Same blocks, represented over `field` instead.
    pub fn with_field(&self, field: PrimeField) -> Result<Self, MatroidError> {
        Self::assemble(
            self.ground.len(),
            self.blocks.clone(),
            self.block_of.clone(),
            field,
        )
    }

    fn assemble(
        n: usize,
        blocks: Vec<Block>,
        block_of: Vec<usize>,
        field: PrimeField,
    ) -> Result<Self, MatroidError> {
        let rank: usize = blocks.iter().map(|b| b.capacity).sum();
        let mut rep = FieldMatrix::zeros(field, rank, n);
        let mut row_offset = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for b in &blocks {
            if b.capacity > 0 && (b.roles.len() as u64) >= field.modulus() {
                return Err(MatroidError::FieldTooSmall {
                    p: field.modulus(),
                    width: b.roles.len(),
                });
            }
            row_offset.push(offset);
            for (j, &r) in b.roles.iter().enumerate() {
                let x = (j + 1) as u64;
                for k in 0..b.capacity {
                    rep.set(offset + k, r, field.pow(x, k as u64));
                }
            }
            offset += b.capacity;
        }
        Ok(PartitionMatroid {
            ground: (0..n).collect(),
            blocks,
            block_of,
            row_offset,
            rep,
            rank,
        })
    }

    /// Ground set, in column order.
    pub fn ground(&self) -> &[RoleId] {
        &self.ground
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn rep(&self) -> &FieldMatrix {
        &self.rep
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn field(&self) -> PrimeField {
        self.rep.field()
    }

    /// Combinatorial test: `s` takes at most `capacity` elements from every block.
    pub fn is_independent(&self, s: &[RoleId]) -> bool {
        let mut used = vec![0usize; self.blocks.len()];
        for &r in s {
            let Some(&b) = self.block_of.get(r) else {
                return false;
            };
            used[b] += 1;
            if used[b] > self.blocks[b].capacity {
                return false;
            }
        }
        true
    }

    /// Linear test on the representation: the columns of `s` are linearly independent.
    pub fn is_independent_linear(&self, s: &[RoleId]) -> bool {
        let mut cols = s.to_vec();
        cols.sort_unstable();
        cols.dedup();
        cols.len() == s.len() && rank_of_columns(&self.rep, &cols) == cols.len()
    }

    /// Rows of the representation that belong to the block of role `r`.
    pub fn rows_of(&self, r: RoleId) -> std::ops::Range<usize> {
        let b = self.block_of[r];
        self.row_offset[b]..self.row_offset[b] + self.blocks[b].capacity
    }
}

fn complete_blocks(n: usize, blocks: Vec<Block>) -> Result<(Vec<Block>, Vec<usize>), MatroidError> {
    let mut block_of = vec![usize::MAX; n];
    let mut out = Vec::with_capacity(blocks.len());
    for (i, mut b) in blocks.into_iter().enumerate() {
        b.roles.sort_unstable();
        for &r in &b.roles {
            if r >= n {
                return Err(MatroidError::OutOfGround {
                    block: i,
                    role: r,
                    ground: n,
                });
            }
            if block_of[r] != usize::MAX {
                return Err(MatroidError::OverlappingBlocks {
                    role: r,
                    first: block_of[r],
                    second: i,
                });
            }
            block_of[r] = i;
        }
        b.capacity = b.capacity.min(b.roles.len());
        out.push(b);
    }
    for r in 0..n {
        if block_of[r] == usize::MAX {
            block_of[r] = out.len();
            out.push(Block {
                roles: vec![r],
                capacity: 1,
            });
        }
    }
    Ok((out, block_of))
}

/// The constraint-satisfaction matroid of an instance: one block of capacity `t - 1` per
/// constraint, singletons elsewhere. Fails if constraint role sets overlap.
pub fn csm_of(inst: &Instance) -> Result<PartitionMatroid, MatroidError> {
    let blocks = inst
        .constraints()
        .iter()
        .map(|c| Block {
            roles: c.roles.clone(),
            capacity: c.threshold.saturating_sub(1),
        })
        .collect();
    PartitionMatroid::from_blocks(inst.n_roles(), blocks)
}

pub fn build_csm(leaf: &BranchLeaf) -> Result<PartitionMatroid, MatroidError> {
    csm_of(&leaf.inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;

    #[test]
    fn primes() {
        assert_eq!(smallest_prime_above(0), 2);
        assert_eq!(smallest_prime_above(1), 2);
        assert_eq!(smallest_prime_above(10), 11);
        assert_eq!(smallest_prime_above(13), 17);
        assert_eq!(smallest_prime_above(1 << 31), 2_147_483_659);
        assert!(PrimeField::new(15).is_err());
    }

    #[test]
    fn field_arithmetic() {
        let f = PrimeField::new(13).unwrap();
        assert_eq!(f.mul(7, 2), 1);
        assert_eq!(f.inv(7), 2);
        assert_eq!(f.sub(3, 5), 11);
        assert_eq!(f.pow(2, 12), 1);
        let big = PrimeField::new(2_147_483_659).unwrap();
        let a = 2_147_483_000;
        assert_eq!(big.mul(a, big.inv(a)), 1);
    }

    #[test]
    fn column_ranks() {
        let f = PrimeField::new(7).unwrap();
        let id = FieldMatrix::identity(f, 3);
        assert_eq!(rank_of_columns(&id, &[]), 0);
        assert_eq!(rank_of_columns(&id, &[0, 1]), 2);
        let m = FieldMatrix::from_rows(f, &[vec![1, 1, 2], vec![3, 3, 6]]);
        assert_eq!(rank_of_columns(&m, &[0, 1]), 1);
        assert_eq!(rank_of_columns(&m, &[0, 1, 2]), 1);
    }

    #[test]
    fn determinants() {
        let f = PrimeField::new(101).unwrap();
        let mut m = vec![2, 0, 1, 1, 3, 2, 1, 1, 1];
        // 2(3-2) - 0 + 1(1-3) = 0
        assert_eq!(determinant(f, &mut m, 3), 0);
        let mut m = vec![0, 1, 1, 0];
        assert_eq!(determinant(f, &mut m, 2), 100);
    }

    #[test]
    fn free_matroid_without_constraints() {
        let inst = InstanceBuilder::new()
            .role("a")
            .role("b")
            .role("c")
            .build()
            .unwrap();
        let m = csm_of(&inst).unwrap();
        assert_eq!(m.rank(), 3);
        assert_eq!(m.blocks().len(), 3);
        assert_eq!(rank_of_columns(m.rep(), &[0, 1, 2]), 3);
        assert!(m.is_independent(&[0, 1, 2]));
    }

    #[test]
    fn constraint_block_and_singleton() {
        let inst = InstanceBuilder::new()
            .role("r1")
            .role("r2")
            .role("r3")
            .role("r4")
            .constraint(["r1", "r2", "r3"], 2)
            .build()
            .unwrap();
        let m = csm_of(&inst).unwrap();
        assert_eq!(
            m.blocks(),
            [
                Block {
                    roles: vec![0, 1, 2],
                    capacity: 1
                },
                Block {
                    roles: vec![3],
                    capacity: 1
                }
            ]
        );
        assert_eq!(m.rank(), 2);
        assert!(m.is_independent(&[0, 3]));
        assert!(!m.is_independent(&[0, 1]));
        assert!(!m.is_independent_linear(&[0, 1]));
        assert!(m.is_independent_linear(&[2, 3]));
    }

    #[test]
    fn zero_capacity_block_makes_members_dependent() {
        let m = PartitionMatroid::from_blocks(
            3,
            vec![Block {
                roles: vec![0, 1],
                capacity: 0,
            }],
        )
        .unwrap();
        assert_eq!(m.rank(), 1);
        assert!(m.is_independent(&[]));
        assert!(!m.is_independent(&[0]));
        assert!(!m.is_independent_linear(&[0]));
        assert!(m.is_independent(&[2]));
    }

    #[test]
    fn overlapping_blocks_are_rejected() {
        let err = PartitionMatroid::from_blocks(
            3,
            vec![
                Block {
                    roles: vec![0, 1],
                    capacity: 1,
                },
                Block {
                    roles: vec![1, 2],
                    capacity: 1,
                },
            ],
        )
        .unwrap_err();
        assert_eq!(
            err,
            MatroidError::OverlappingBlocks {
                role: 1,
                first: 0,
                second: 1
            }
        );
    }

    #[test]
    fn small_fields_are_rejected_for_wide_blocks() {
        let m = PartitionMatroid::from_blocks(
            4,
            vec![Block {
                roles: vec![0, 1, 2, 3],
                capacity: 2,
            }],
        )
        .unwrap();
        assert!(m.with_field(PrimeField::new(3).unwrap()).is_err());
        assert!(m.with_field(PrimeField::new(5).unwrap()).is_ok());
    }
}

//! q-representative families of independent sets in a partition matroid.
//!
//! Each member `A` of a family is mapped to its wedge vector: the `p x p` minors of the
//! representation restricted to the columns of `A`, one coordinate per `p`-subset of rows.
//! For any `B`, whether `A ∪ B` is independent (and `A ∩ B = ∅`) is decided by the nonvanishing
//! of some Laplace expansion that is linear in the wedge vector of `A`. A family whose wedge
//! vectors span those of the input therefore fits every `B` the input fits, so a greedy basis
//! of the wedge vectors is q-representative for every q.
//!
//! * [`RepMode::Exact`] works in the full representation (rank `n` rows), so the output has at
//!   most `C(n, p)` members and the result is deterministic.
//! * [`RepMode::Truncated`] first multiplies the representation by a random `(p+q) x n`
//!   matrix over a large prime field, which preserves independence of all sets of size at most
//!   `p + q` with high probability, and brings the output size down to `C(p+q, p)`.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matroid::{
    determinant, is_prime, FieldMatrix, MatroidError, PartitionMatroid, PrimeField,
};
use crate::model::RoleId;

/// Least prime above 2^31.
pub const DEFAULT_TRUNCATION_FIELD: u64 = 2_147_483_659;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepFamError {
    #[error("member {index} has {len} elements, expected {p}")]
    WrongSize { index: usize, len: usize, p: usize },
    #[error("member {index} is not independent in the matroid")]
    NotIndependent { index: usize },
    #[error("invalid truncation field {field}: {reason}")]
    Config { field: u64, reason: String },
    #[error(transparent)]
    Matroid(#[from] MatroidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepMode {
    #[default]
    Exact,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepConfig {
    pub mode: RepMode,
    pub seed: u64,
    pub truncation_field: u64,
}

impl Default for RepConfig {
    fn default() -> Self {
        RepConfig {
            mode: RepMode::Exact,
            seed: 0,
            truncation_field: DEFAULT_TRUNCATION_FIELD,
        }
    }
}

impl RepConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn truncated(seed: u64) -> Self {
        RepConfig {
            mode: RepMode::Truncated,
            seed,
            ..Self::default()
        }
    }
}

/// A family of equal-size role sets. Members are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    p: usize,
    sets: Vec<Vec<RoleId>>,
}

impl Family {
    pub fn empty(p: usize) -> Self {
        Family {
            p,
            sets: Vec::new(),
        }
    }

    /// The family `{∅}`.
    pub fn unit() -> Self {
        Family {
            p: 0,
            sets: vec![Vec::new()],
        }
    }

    pub fn new(p: usize, sets: impl IntoIterator<Item = Vec<RoleId>>) -> Self {
        let sets = sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s
            })
            .collect();
        Family { p, sets }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sets(&self) -> &[Vec<RoleId>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn first(&self) -> Option<&[RoleId]> {
        self.sets.first().map(Vec::as_slice)
    }

    fn push(&mut self, set: Vec<RoleId>) {
        self.sets.push(set);
    }
}

/// Lexicographic `k`-subsets of `0..n`, in order.
pub(crate) fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = (k <= n).then(|| (0..k).collect::<Vec<_>>());
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut c = current.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if c[i] < n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                next = Some(c);
                break;
            }
        }
        Some(current)
    })
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Position of the sorted subset `rows` among the lexicographic `rows.len()`-subsets of `0..n`.
fn subset_rank(rows: &[usize], n: usize) -> usize {
    let k = rows.len();
    let mut rank = 0u128;
    let mut prev = 0;
    for (i, &r) in rows.iter().enumerate() {
        for skipped in prev..r {
            rank += binomial(n - skipped - 1, k - i - 1);
        }
        prev = r + 1;
    }
    rank as usize
}

/// Dense wedge vector of the columns `s` of `working_rep`, indexed by the lexicographic
/// `|s|`-subsets of its rows.
pub fn wedge_vector(working_rep: &FieldMatrix, s: &[RoleId]) -> Vec<u64> {
    let f = working_rep.field();
    combinations(working_rep.rows(), s.len())
        .map(|rows| {
            let mut minor = working_rep.minor(&rows, s);
            determinant(f, &mut minor, s.len())
        })
        .collect()
}

/// Nonzero coordinates of the wedge vector of `s` in the matroid's own block-diagonal
/// representation. A minor can only be nonzero when it takes, from every block, as many rows
/// as `s` has elements there, so only those row sets are evaluated.
fn sparse_wedge(m: &PartitionMatroid, s: &[RoleId]) -> Vec<(usize, u64)> {
    let f = m.field();
    let mut groups: BTreeMap<usize, (std::ops::Range<usize>, usize)> = BTreeMap::new();
    for &r in s {
        let rows = m.rows_of(r);
        groups.entry(rows.start).or_insert((rows, 0)).1 += 1;
    }
    let choices: Vec<Vec<Vec<usize>>> = groups
        .values()
        .map(|(rows, count)| {
            combinations(rows.len(), *count)
                .map(|c| c.iter().map(|&i| rows.start + i).collect())
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut pick = vec![0usize; choices.len()];
    if choices.iter().any(Vec::is_empty) {
        return out;
    }
    loop {
        let mut rows: Vec<usize> = pick
            .iter()
            .zip(&choices)
            .flat_map(|(&i, c)| c[i].iter().copied())
            .collect();
        rows.sort_unstable();
        let mut minor = m.rep().minor(&rows, s);
        let det = determinant(f, &mut minor, s.len());
        if det != 0 {
            out.push((subset_rank(&rows, m.rank()), det));
        }
        // Odometer over the per-block choices.
        let mut i = 0;
        loop {
            if i == pick.len() {
                out.sort_unstable();
                return out;
            }
            pick[i] += 1;
            if pick[i] < choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

/// Incremental row echelon form over sparse vectors; a row's pivot is its first nonzero.
struct Echelon {
    field: PrimeField,
    rows: BTreeMap<usize, BTreeMap<usize, u64>>,
}

impl Echelon {
    fn new(field: PrimeField) -> Self {
        Echelon {
            field,
            rows: BTreeMap::new(),
        }
    }

    /// Adds `v` if it is independent of the rows so far.
    fn insert(&mut self, v: impl IntoIterator<Item = (usize, u64)>) -> bool {
        let f = self.field;
        let mut v: BTreeMap<usize, u64> = v.into_iter().filter(|&(_, x)| x != 0).collect();
        while let Some((&lead, &x)) = v.iter().next() {
            let Some(row) = self.rows.get(&lead) else {
                self.rows.insert(lead, v);
                return true;
            };
            let factor = f.mul(x, f.inv(row[&lead]));
            for (&c, &y) in row {
                let entry = v.entry(c).or_insert(0);
                *entry = f.sub(*entry, f.mul(factor, y));
                if *entry == 0 {
                    v.remove(&c);
                }
            }
        }
        false
    }
}

fn validate(m: &PartitionMatroid, fam: &Family) -> Result<(), RepFamError> {
    for (index, s) in fam.sets().iter().enumerate() {
        if s.len() != fam.p() {
            return Err(RepFamError::WrongSize {
                index,
                len: s.len(),
                p: fam.p(),
            });
        }
        if !m.is_independent(s) || s.windows(2).any(|w| w[0] == w[1]) {
            return Err(RepFamError::NotIndependent { index });
        }
    }
    Ok(())
}

/// Computes a q-representative subfamily of `fam` (members must be independent and of equal
/// size). Output members keep their input order.
pub fn compute_repfam(
    m: &PartitionMatroid,
    fam: &Family,
    q: usize,
    cfg: &RepConfig,
) -> Result<Family, RepFamError> {
    validate(m, fam)?;
    let p = fam.p();
    let mut out = Family::empty(p);
    if fam.is_empty() {
        return Ok(out);
    }
    // Only B = ∅ needs a witness, and every independent member fits it.
    if q == 0 || p == 0 {
        out.push(fam.sets()[0].clone());
        return Ok(out);
    }
    match cfg.mode {
        RepMode::Exact => {
            let mut basis = Echelon::new(m.field());
            for s in fam.sets() {
                if basis.insert(sparse_wedge(m, s)) {
                    out.push(s.clone());
                }
            }
        }
        RepMode::Truncated => {
            let working = truncated_representation(m, p + q, cfg)?;
            let mut basis = Echelon::new(working.field());
            for s in fam.sets() {
                if basis.insert(wedge_vector(&working, s).into_iter().enumerate()) {
                    out.push(s.clone());
                }
            }
        }
    }
    Ok(out)
}

/// The representation over `cfg.truncation_field`, compressed to `min(k, rank)` rows by a
/// seeded random linear map.
pub fn truncated_representation(
    m: &PartitionMatroid,
    k: usize,
    cfg: &RepConfig,
) -> Result<FieldMatrix, RepFamError> {
    let big = cfg.truncation_field;
    let widest = m.blocks().iter().map(|b| b.roles.len()).max().unwrap_or(0);
    if !is_prime(big) {
        return Err(RepFamError::Config {
            field: big,
            reason: "not prime".into(),
        });
    }
    if big <= (m.ground().len().max(widest) as u64) {
        return Err(RepFamError::Config {
            field: big,
            reason: format!("must exceed the ground set size {}", m.ground().len()),
        });
    }
    let field = PrimeField::new(big)?;
    let full = m.with_field(field)?;
    if k >= m.rank() {
        return Ok(full.rep().clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mix = FieldMatrix::zeros(field, k, m.rank());
    for i in 0..k {
        for j in 0..m.rank() {
            mix.set(i, j, rng.random_range(0..big));
        }
    }
    Ok(mix.mul(full.rep()))
}

/// Union bound on the probability that truncation loses some independent set:
/// `n^2 * C(n, p) / field`.
pub fn declared_failure_bound(n: usize, p: usize, field: u64) -> f64 {
    (n * n) as f64 * binomial(n, p) as f64 / field as f64
}

fn fits(m: &PartitionMatroid, a: &[RoleId], b: &[RoleId]) -> bool {
    if a.iter().any(|x| b.contains(x)) {
        return false;
    }
    let mut union = a.to_vec();
    union.extend_from_slice(b);
    m.is_independent(&union)
}

/// Exhaustive check of `sub ⊆_rep^q fam`: `sub` is a subfamily of `fam`, and for every
/// `B ⊆ universe` with `|B| <= q`, some member of `sub` fits `B` whenever some member of
/// `fam` does.
pub fn oracle_is_representative(
    m: &PartitionMatroid,
    fam: &Family,
    sub: &Family,
    q: usize,
    universe: &[RoleId],
) -> bool {
    let members: HashSet<&Vec<RoleId>> = fam.sets().iter().collect();
    if !sub.sets().iter().all(|s| members.contains(s)) {
        return false;
    }
    for size in 0..=q.min(universe.len()) {
        for idx in combinations(universe.len(), size) {
            let b: Vec<RoleId> = idx.iter().map(|&i| universe[i]).collect();
            let wanted = fam.sets().iter().any(|a| fits(m, a, &b));
            if wanted && !sub.sets().iter().any(|a| fits(m, a, &b)) {
                return false;
            }
        }
    }
    true
}

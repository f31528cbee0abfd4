//! The unipotent group N_d, its action on ℤ^d, and the exact piecewise-affine
//! realization on [0,1] obtained by packing intervals lexicographically.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lattice::{symmetric_geometric, Block, LengthFamily, Progression, Support};
use crate::num::{exponent_to_f64, ratio_string, ratio_to_f64, Exponent};

/// A (d+1)×(d+1) integer matrix, lower triangular with unit diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct UnipotentMatrix {
    rows: Vec<Vec<i64>>,
}

impl TryFrom<Vec<Vec<i64>>> for UnipotentMatrix {
    type Error = CoreError;

    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        UnipotentMatrix::from_rows(rows)
    }
}

impl From<UnipotentMatrix> for Vec<Vec<i64>> {
    fn from(m: UnipotentMatrix) -> Self {
        m.rows
    }
}

fn overflow(what: &str) -> CoreError {
    CoreError::Overflow(format!("{what} leaves 64-bit integers"))
}

impl UnipotentMatrix {
    pub fn identity(d: usize) -> UnipotentMatrix {
        let n = d + 1;
        let rows = (0..n)
            .map(|i| (0..n).map(|j| (i == j) as i64).collect())
            .collect();
        UnipotentMatrix { rows }
    }

    /// f_{i,j}: 1-based, i > j, both in 1..=d+1.
    pub fn elementary(d: usize, i: usize, j: usize) -> Result<UnipotentMatrix> {
        if !(1..=d + 1).contains(&i) || j < 1 || j >= i {
            return Err(CoreError::Domain(format!(
                "f({i},{j}) is not a generator of N_{d}"
            )));
        }
        let mut m = UnipotentMatrix::identity(d);
        m.rows[i - 1][j - 1] = 1;
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<UnipotentMatrix> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(CoreError::Domain(
                "need a square matrix of size at least 2".into(),
            ));
        }
        for (i, r) in rows.iter().enumerate() {
            if r[i] != 1 || r[i + 1..].iter().any(|&x| x != 0) {
                return Err(CoreError::Domain(format!(
                    "row {} is not unipotent lower-triangular",
                    i + 1
                )));
            }
        }
        Ok(UnipotentMatrix { rows })
    }

    /// d, so the matrix is (d+1)×(d+1).
    pub fn d(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    /// 1-based entry.
    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.rows[i - 1][j - 1]
    }

    pub fn is_identity(&self) -> bool {
        *self == UnipotentMatrix::identity(self.d())
    }

    pub fn mul(&self, o: &UnipotentMatrix) -> Result<UnipotentMatrix> {
        if self.d() != o.d() {
            return Err(CoreError::Domain("matrix sizes differ".into()));
        }
        let n = self.rows.len();
        let mut rows = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0i64;
                for k in j..=i {
                    let t = self.rows[i][k]
                        .checked_mul(o.rows[k][j])
                        .ok_or_else(|| overflow("product"))?;
                    s = s.checked_add(t).ok_or_else(|| overflow("product"))?;
                }
                rows[i][j] = s;
            }
        }
        Ok(UnipotentMatrix { rows })
    }

    /// Exact inverse by forward substitution.
    pub fn inverse(&self) -> Result<UnipotentMatrix> {
        let n = self.rows.len();
        let mut inv = UnipotentMatrix::identity(self.d());
        for j in 0..n {
            for i in j + 1..n {
                let mut s = 0i64;
                for k in j..i {
                    let t = self.rows[i][k]
                        .checked_mul(inv.rows[k][j])
                        .ok_or_else(|| overflow("inverse"))?;
                    s = s.checked_add(t).ok_or_else(|| overflow("inverse"))?;
                }
                inv.rows[i][j] = -s;
            }
        }
        Ok(inv)
    }

    pub fn pow(&self, k: i64) -> Result<UnipotentMatrix> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut acc = UnipotentMatrix::identity(self.d());
        let mut b = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b)?;
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b)?;
            }
        }
        Ok(acc)
    }

    pub fn commutes_with(&self, o: &UnipotentMatrix) -> Result<bool> {
        Ok(self.mul(o)? == o.mul(self)?)
    }

    /// a b a⁻¹ b⁻¹.
    pub fn commutator(&self, o: &UnipotentMatrix) -> Result<UnipotentMatrix> {
        self.mul(o)?.mul(&self.inverse()?)?.mul(&o.inverse()?)
    }

    /// Last row and column trivial: the copy of N_{d−1} acting on the first d−1 coordinates.
    pub fn in_star_subgroup(&self) -> bool {
        let n = self.rows.len();
        (0..n - 1).all(|j| self.rows[n - 1][j] == 0)
    }

    /// First column trivial.
    pub fn first_column_trivial(&self) -> bool {
        (1..self.rows.len()).all(|i| self.rows[i][0] == 0)
    }
}

impl fmt::Display for UnipotentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            write!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

/// The last d coordinates of f·(1, v).
pub fn act(f: &UnipotentMatrix, v: &[i64]) -> Result<Vec<i64>> {
    let d = f.d();
    if v.len() != d {
        return Err(CoreError::Domain(format!(
            "N_{d} acts on ℤ^{d}, got a vector of length {}",
            v.len()
        )));
    }
    let mut x = Vec::with_capacity(d + 1);
    x.push(1i64);
    x.extend_from_slice(v);
    let mut out = Vec::with_capacity(d);
    for i in 1..=d {
        let mut s = 0i64;
        for (j, &xj) in x.iter().enumerate().take(i + 1) {
            let t = f.rows[i][j]
                .checked_mul(xj)
                .ok_or_else(|| overflow("action"))?;
            s = s.checked_add(t).ok_or_else(|| overflow("action"))?;
        }
        out.push(s);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutatorTable {
    pub d: usize,
    /// g = f_{d+1,1}.
    pub center: (usize, usize),
    pub generators: Vec<(usize, usize)>,
    /// commutes[a][b] for generators a, b.
    pub commutes: Vec<Vec<bool>>,
    /// Commutators [f_a, f_b] of the non-commuting pairs.
    pub commutators: Vec<(Generator, Generator, UnipotentMatrix)>,
    pub center_ok: bool,
}

/// (i, j) for f_{i,j}.
pub type Generator = (usize, usize);

pub fn generators(d: usize) -> Vec<(usize, usize)> {
    (2..=d + 1)
        .flat_map(|i| (1..i).map(move |j| (i, j)))
        .collect()
}

/// Generators of the copy of N_{d−1} with trivial last row and column.
pub fn star_generators(d: usize) -> Vec<(usize, usize)> {
    generators(d).into_iter().filter(|&(i, _)| i <= d).collect()
}

pub fn center_and_commutators(d: usize) -> Result<CommutatorTable> {
    if d < 1 {
        return Err(CoreError::Domain("N_d needs d ≥ 1".into()));
    }
    let gens = generators(d);
    let mats: Vec<UnipotentMatrix> = gens
        .iter()
        .map(|&(i, j)| UnipotentMatrix::elementary(d, i, j))
        .collect::<Result<_>>()?;
    let g = UnipotentMatrix::elementary(d, d + 1, 1)?;
    let mut commutes = vec![vec![true; gens.len()]; gens.len()];
    let mut commutators = Vec::new();
    for a in 0..gens.len() {
        for b in 0..gens.len() {
            let c = mats[a].commutator(&mats[b])?;
            commutes[a][b] = c.is_identity();
            if a < b && !c.is_identity() {
                commutators.push((gens[a], gens[b], c));
            }
        }
    }
    let center_ok = mats
        .iter()
        .map(|m| g.commutes_with(m))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .all(|b| b);
    Ok(CommutatorTable {
        d,
        center: (d + 1, 1),
        generators: gens,
        commutes,
        commutators,
        center_ok,
    })
}

/// The two interval models: coordinate shifts on ℤ^{dim}, or N_d acting on ℤ^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum Model {
    Translation { dim: usize },
    FarbFranks { d: usize },
}

impl Model {
    /// Dimension of the index lattice.
    pub fn index_dim(&self) -> usize {
        match *self {
            Model::Translation { dim } => dim,
            Model::FarbFranks { d } => d,
        }
    }

    /// The element commuting with every letter: the last shift, or f_{d+1,1}.
    pub fn center(&self) -> Letter {
        match *self {
            Model::Translation { dim } => Letter::Shift { axis: dim },
            Model::FarbFranks { d } => Letter::Elementary { i: d + 1, j: 1 },
        }
    }

    /// Letters moving the base of the fiber: shifts 1..dim−1, or N_{d−1}^* generators.
    pub fn base_letters(&self) -> Vec<Letter> {
        match *self {
            Model::Translation { dim } => (1..dim).map(|axis| Letter::Shift { axis }).collect(),
            Model::FarbFranks { d } => star_generators(d)
                .into_iter()
                .map(|(i, j)| Letter::Elementary { i, j })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Letter {
    /// v ↦ v + e_axis (1-based).
    Shift { axis: usize },
    /// f_{i,j}.
    Elementary { i: usize, j: usize },
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Shift { axis } => write!(f, "f({axis})"),
            Letter::Elementary { i, j } => write!(f, "f({i},{j})"),
        }
    }
}

/// A word kept as its letters; the first letter acts first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub model: Model,
    pub letters: Vec<(Letter, i64)>,
}

impl Word {
    pub fn identity(model: Model) -> Word {
        Word {
            model,
            letters: Vec::new(),
        }
    }

    pub fn letter(model: Model, l: Letter, e: i64) -> Result<Word> {
        let w = Word {
            model,
            letters: vec![(l, e)],
        };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        for (l, _) in &self.letters {
            let ok = match (*l, self.model) {
                (Letter::Shift { axis }, Model::Translation { dim }) => (1..=dim).contains(&axis),
                (Letter::Elementary { i, j }, Model::FarbFranks { d }) => {
                    j >= 1 && j < i && i <= d + 1
                }
                _ => false,
            };
            if !ok {
                return Err(CoreError::Domain(format!(
                    "letter {l} does not belong to this model"
                )));
            }
        }
        Ok(())
    }

    /// Parses `f(i,j)^±k` letters (or `f(j)` shifts), separated by spaces or `*`.
    pub fn parse(model: Model, text: &str) -> Result<Word> {
        let mut letters = Vec::new();
        for tok in text
            .split(|c: char| c.is_whitespace() || c == '*')
            .filter(|t| !t.is_empty())
        {
            if tok == "id" || tok == "e" {
                continue;
            }
            let bad =
                || CoreError::Parse(format!("bad letter {tok:?}; expected f(i,j)^±k or f(j)^±k"));
            let rest = tok.strip_prefix("f(").ok_or_else(bad)?;
            let close = rest.find(')').ok_or_else(bad)?;
            let inside = &rest[..close];
            let tail = &rest[close + 1..];
            let exp = if tail.is_empty() {
                1
            } else {
                let e = tail.strip_prefix('^').ok_or_else(bad)?;
                let e = e.strip_prefix('+').unwrap_or(e);
                e.parse::<i64>().map_err(|_| bad())?
            };
            let nums: Vec<usize> = inside
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            let l = match nums.as_slice() {
                [axis] => Letter::Shift { axis: *axis },
                [i, j] => Letter::Elementary { i: *i, j: *j },
                _ => return Err(bad()),
            };
            if exp != 0 {
                letters.push((l, exp));
            }
        }
        let w = Word { model, letters };
        w.validate()?;
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// h_j: the first j letters.
    pub fn prefix(&self, j: usize) -> Word {
        Word {
            model: self.model,
            letters: self.letters[..j].to_vec(),
        }
    }

    /// `self` then `other`.
    pub fn then(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word {
            model: self.model,
            letters,
        }
    }

    pub fn inverse(&self) -> Word {
        Word {
            model: self.model,
            letters: self.letters.iter().rev().map(|&(l, e)| (l, -e)).collect(),
        }
    }

    pub fn power(&self, k: u32) -> Word {
        let mut letters = Vec::with_capacity(self.letters.len() * k as usize);
        for _ in 0..k {
            letters.extend_from_slice(&self.letters);
        }
        Word {
            model: self.model,
            letters,
        }
    }

    /// The group element, as a matrix (FF model only).
    pub fn to_matrix(&self) -> Result<UnipotentMatrix> {
        let Model::FarbFranks { d } = self.model else {
            return Err(CoreError::Unsupported(
                "shift words have no matrix form here".into(),
            ));
        };
        let mut m = UnipotentMatrix::identity(d);
        for &(l, e) in &self.letters {
            let Letter::Elementary { i, j } = l else {
                unreachable!("validated")
            };
            m = UnipotentMatrix::elementary(d, i, j)?.pow(e)?.mul(&m)?;
        }
        Ok(m)
    }

    pub fn act(&self, v: &[i64]) -> Result<Vec<i64>> {
        let mut x = v.to_vec();
        for &(l, e) in &self.letters {
            x = apply_letter(l, e, &x)?;
        }
        Ok(x)
    }

    pub fn random<R: Rng>(model: Model, len: usize, pool: &[Letter], rng: &mut R) -> Word {
        let letters = (0..len)
            .map(|_| {
                (
                    pool[rng.gen_range(0..pool.len())],
                    if rng.gen_bool(0.5) { 1 } else { -1 },
                )
            })
            .collect();
        Word { model, letters }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "id");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|(l, e)| format!("{l}^{e}"))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

fn apply_letter(l: Letter, e: i64, v: &[i64]) -> Result<Vec<i64>> {
    let mut x = v.to_vec();
    match l {
        Letter::Shift { axis } => {
            x[axis - 1] = x[axis - 1]
                .checked_add(e)
                .ok_or_else(|| overflow("shift"))?;
        }
        Letter::Elementary { i, j } => {
            // Row i of f_{i,j}^e adds e times coordinate j of (1, v).
            let src = if j == 1 { 1 } else { v[j - 2] };
            let t = src.checked_mul(e).ok_or_else(|| overflow("action"))?;
            x[i - 2] = x[i - 2].checked_add(t).ok_or_else(|| overflow("action"))?;
        }
    }
    Ok(x)
}

/// Whether a letter commutes with the element `g` (matrix level; shifts always do).
fn letters_commute(model: Model, a: Letter, b: &Word) -> Result<bool> {
    match model {
        Model::Translation { .. } => Ok(true),
        Model::FarbFranks { .. } => {
            let w = Word {
                model,
                letters: vec![(a, 1)],
            };
            w.to_matrix()?.commutes_with(&b.to_matrix()?)
        }
    }
}

/// Intervals I_v ⊂ [0,1] indexed by ℤ^m and laid out in lexicographic order,
/// |I_v| = ℓ(v)/L.
pub struct IntervalPacking {
    pub model: Model,
    family: Box<dyn LengthFamily>,
    /// Lengths of the fiber hulls, indexed by the first m−1 coordinates.
    base_family: Option<Box<dyn LengthFamily>>,
    total: BigRational,
    cache: Mutex<HashMap<Vec<i64>, (BigRational, BigRational)>>,
}

impl fmt::Debug for IntervalPacking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalPacking")
            .field("model", &self.model)
            .field("family", &self.family.name())
            .finish()
    }
}

impl IntervalPacking {
    pub fn new(
        model: Model,
        family: Box<dyn LengthFamily>,
        base_family: Option<Box<dyn LengthFamily>>,
    ) -> Result<IntervalPacking> {
        let m = model.index_dim();
        if family.dim() != m {
            return Err(CoreError::Domain(format!(
                "the model indexes ℤ^{m}, the family lives in dimension {}",
                family.dim()
            )));
        }
        if let Some(b) = &base_family {
            if b.dim() + 1 != m {
                return Err(CoreError::Domain(
                    "fiber family must have one dimension less".into(),
                ));
            }
        }
        let total = family.total_mass()?;
        if !total.is_positive() {
            return Err(CoreError::Domain("total length must be positive".into()));
        }
        Ok(IntervalPacking {
            model,
            family,
            base_family,
            total,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Symmetric geometric lengths on ℤ^m; fiber hulls have the (m−1)-dimensional product length.
    pub fn symmetric(model: Model) -> Result<IntervalPacking> {
        let m = model.index_dim();
        if m < 2 {
            return Err(CoreError::Domain(
                "the index lattice needs at least two axes".into(),
            ));
        }
        IntervalPacking::new(
            model,
            Box::new(symmetric_geometric(m)),
            Some(Box::new(symmetric_geometric(m - 1))),
        )
    }

    pub fn family_name(&self) -> String {
        self.family.name()
    }

    /// (left endpoint, length) of I_v, exact.
    pub fn interval(&self, v: &[i64]) -> Result<(BigRational, BigRational)> {
        if let Some(hit) = self.cache.lock().unwrap().get(v) {
            return Ok(hit.clone());
        }
        let w = self.family.weight(v)?;
        if !w.is_positive() {
            return Err(CoreError::Domain(format!("ℓ{v:?} is not positive")));
        }
        let left = self.family.lex_prefix_mass(v)? / &self.total;
        let out = (left, w / &self.total);
        self.cache.lock().unwrap().insert(v.to_vec(), out.clone());
        Ok(out)
    }

    /// |I| of the hull of the fiber over `base`.
    pub fn fiber_length(&self, base: &[i64]) -> Result<BigRational> {
        if let Some(b) = &self.base_family {
            return Ok(b.weight(base)? / b.total_mass()?);
        }
        if let Support::Finite(sup) = self.family.support() {
            let last = sup.dim() - 1;
            let mut axes: Vec<Progression> = base.iter().map(|&x| Progression::single(x)).collect();
            axes.push(Progression::interval(sup.lo[last], sup.hi[last]));
            let m = self.family.block_mass(&Block { axes })?;
            return match m.as_exact() {
                Some(r) => Ok(r / &self.total),
                None => Err(CoreError::Unsupported("inexact fiber mass".into())),
            };
        }
        Err(CoreError::Unsupported(
            "fiber lengths need a fiber family or a finite support".into(),
        ))
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// The piecewise-affine homeomorphism of a word, evaluated on demand.
#[derive(Debug)]
pub struct AffineRealization<'a> {
    pub packing: &'a IntervalPacking,
    pub word: Word,
}

pub fn realize<'a>(packing: &'a IntervalPacking, word: &Word) -> Result<AffineRealization<'a>> {
    if word.model != packing.model {
        return Err(CoreError::Domain(
            "word and packing use different models".into(),
        ));
    }
    Ok(AffineRealization {
        packing,
        word: word.clone(),
    })
}

/// Image of a point under a word, with the derivative accumulated by the chain rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub index: Vec<i64>,
    pub point: BigRational,
    pub derivative: BigRational,
}

impl<'a> AffineRealization<'a> {
    /// Slope on I_v: ℓ(f·v)/ℓ(v).
    pub fn slope(&self, v: &[i64]) -> Result<BigRational> {
        let (_, a) = self.packing.interval(v)?;
        let (_, b) = self.packing.interval(&self.word.act(v)?)?;
        Ok(b / a)
    }

    /// The image of I_v, which must be I_{f·v}.
    pub fn image(&self, v: &[i64]) -> Result<(Vec<i64>, BigRational, BigRational)> {
        let e0 = self.eval(v, &self.packing.interval(v)?.0)?;
        let (l, len) = self.packing.interval(v)?;
        let e1 = self.eval(v, &(l + len))?;
        Ok((e0.index, e0.point, e1.point))
    }

    /// Letter by letter, for x ∈ I_v.
    pub fn eval(&self, v: &[i64], x: &BigRational) -> Result<Evaluation> {
        let (l0, len0) = self.packing.interval(v)?;
        if *x < l0 || *x > &l0 + &len0 {
            return Err(CoreError::Domain(format!("point outside I_{v:?}")));
        }
        let mut idx = v.to_vec();
        let mut p = x.clone();
        let mut der = BigRational::one();
        let (mut left, mut len) = (l0, len0);
        for &(l, e) in &self.word.letters {
            let next = apply_letter(l, e, &idx)?;
            let (nl, nlen) = self.packing.interval(&next)?;
            let s = &nlen / &len;
            p = &nl + (&p - &left) * &s;
            der *= s;
            idx = next;
            left = nl;
            len = nlen;
        }
        Ok(Evaluation {
            index: idx,
            point: p,
            derivative: der,
        })
    }

    /// self ∘ other.
    pub fn compose(&self, other: &AffineRealization<'a>) -> AffineRealization<'a> {
        AffineRealization {
            packing: self.packing,
            word: other.word.then(&self.word),
        }
    }

    /// Same slope and same image interval on every index.
    pub fn agrees_with(&self, other: &AffineRealization<'_>, indices: &[Vec<i64>]) -> Result<bool> {
        for v in indices {
            if self.slope(v)? != other.slope(v)? || self.image(v)? != other.image(v)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionRow {
    pub index: Vec<i64>,
    #[serde(with = "ratio_string")]
    pub x: BigRational,
    /// Dg^k(x).
    #[serde(with = "ratio_string")]
    pub lhs: BigRational,
    /// Dh(x)/Dh(g^k x) · Dg^k(h x).
    #[serde(with = "ratio_string")]
    pub rhs: BigRational,
    #[serde(with = "ratio_string")]
    pub residual: BigRational,
    /// h⁻¹ g^k h (x) = g^k(x).
    pub conjugacy_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub word: String,
    pub g: String,
    pub k: u32,
    pub rows: Vec<DistortionRow>,
    pub all_zero: bool,
    /// Σ_{j<n} |h_j(I)|^τ.
    pub m_n: f64,
    pub c: f64,
    /// exp(C·M_n).
    pub bound: f64,
    /// max over the rows of Dg^k(x)/Dg^k(h x), which exp(C·M_n) should dominate.
    pub distortion: f64,
}

/// Checks Dg^k(x) = Dh(x)/Dh(g^k x) · Dg^k(h x) exactly at the midpoint of
/// each sampled I_v, and returns the Hölder budget M_n of the prefixes of h.
pub fn conjugacy_distortion_check(
    packing: &IntervalPacking,
    h: &Word,
    g: &Word,
    k: u32,
    samples: &[Vec<i64>],
    tau: Exponent,
    c: f64,
) -> Result<DistortionReport> {
    for &(l, _) in &h.letters {
        if !letters_commute(packing.model, l, g)? {
            return Err(CoreError::pre(
                "nilpotent.commutation",
                format!("letter {l} of h does not commute with g = {g}"),
            ));
        }
    }
    let gk = realize(packing, &g.power(k))?;
    let hr = realize(packing, h)?;
    let conj = realize(packing, &h.then(&g.power(k)).then(&h.inverse()))?;
    let mut rows = Vec::with_capacity(samples.len());
    let mut distortion: f64 = 1.0;
    for v in samples {
        let (l, len) = packing.interval(v)?;
        let x = l + len / BigRational::from_integer(BigInt::from(2));
        let lhs_e = gk.eval(v, &x)?;
        let hx = hr.eval(v, &x)?;
        let hy = hr.eval(&lhs_e.index, &lhs_e.point)?;
        let ghx = gk.eval(&hx.index, &hx.point)?;
        let rhs = &hx.derivative / &hy.derivative * &ghx.derivative;
        let residual = &lhs_e.derivative - &rhs;
        let cj = conj.eval(v, &x)?;
        distortion = distortion.max(ratio_to_f64(&(&lhs_e.derivative / &ghx.derivative)));
        rows.push(DistortionRow {
            index: v.clone(),
            x,
            lhs: lhs_e.derivative,
            rhs,
            residual,
            conjugacy_holds: cj.point == lhs_e.point && cj.index == lhs_e.index,
        });
    }
    let m = packing.model.index_dim();
    let origin = vec![0i64; m];
    let mut m_n = 0.0;
    for j in 0..h.len() {
        let base = h.prefix(j).act(&origin)?;
        m_n += ratio_to_f64(&packing.fiber_length(&base[..m - 1])?).powf(exponent_to_f64(tau));
    }
    let all_zero = rows
        .iter()
        .all(|r| r.residual.is_zero() && r.conjugacy_holds);
    Ok(DistortionReport {
        word: h.to_string(),
        g: g.to_string(),
        k,
        rows,
        all_zero,
        m_n,
        c,
        bound: (c * m_n).exp(),
        distortion,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum Growth {
    Bounded,
    Polynomial { degree: f64 },
    Exponential { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    pub k: u32,
    #[serde(with = "ratio_string")]
    pub max_slope: BigRational,
    pub argmax: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeScan {
    pub base: Vec<i64>,
    pub window: (i64, i64),
    pub rows: Vec<SlopeRow>,
    pub growth: Growth,
}

fn ln_ratio(r: &BigRational) -> f64 {
    fn ln_int(n: &BigInt) -> f64 {
        let bits = n.bits();
        if bits < 1000 {
            return n.to_string().parse::<f64>().unwrap().ln();
        }
        let shift = bits - 60;
        let top: BigInt = n >> shift;
        top.to_string().parse::<f64>().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
    ln_int(r.numer()) - ln_int(r.denom())
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs
        .iter()
        .map(|x| (x - mx).powi(2))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let slope = sxy / sxx;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, sse)
}

fn classify(rows: &[SlopeRow]) -> Growth {
    let kmax = rows.last().map_or(0, |r| r.k);
    let tail: Vec<&SlopeRow> = rows.iter().filter(|r| r.k >= (kmax / 2).max(1)).collect();
    if tail.len() < 3 {
        return Growth::Bounded;
    }
    let ys: Vec<f64> = tail.iter().map(|r| ln_ratio(&r.max_slope)).collect();
    if ys.last().unwrap() - ys[0] < 0.05 {
        return Growth::Bounded;
    }
    let ks: Vec<f64> = tail.iter().map(|r| r.k as f64).collect();
    let lks: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let (rate, e_lin) = least_squares(&ks, &ys);
    let (degree, e_pow) = least_squares(&lks, &ys);
    if e_lin < e_pow {
        Growth::Exponential { rate }
    } else {
        Growth::Polynomial { degree }
    }
}

/// Max over the fiber window of ℓ(g^k v)/ℓ(v) for k = 1..=k_max, where v
/// runs over (base, i) with both v and g^k v in the window.
pub fn slope_growth_scan(
    packing: &IntervalPacking,
    g: &Word,
    base: &[i64],
    window: (i64, i64),
    k_max: u32,
) -> Result<SlopeScan> {
    let m = packing.model.index_dim();
    if base.len() + 1 != m {
        return Err(CoreError::Domain(format!(
            "base must have {} coordinates",
            m - 1
        )));
    }
    let (lo, hi) = window;
    if lo > hi {
        return Err(CoreError::Domain("empty fiber window".into()));
    }
    let at = |i: i64| {
        let mut v = base.to_vec();
        v.push(i);
        v
    };
    for i in [lo, hi] {
        if g.act(&at(i))?[..m - 1] != *base {
            return Err(CoreError::pre(
                "nilpotent.fiber",
                format!("g = {g} moves the fiber over {base:?}"),
            ));
        }
    }
    let weights: Vec<BigRational> = (lo..=hi)
        .map(|i| packing.interval(&at(i)).map(|x| x.1))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(k_max as usize);
    let mut cur: Vec<i64> = (lo..=hi).collect();
    for k in 1..=k_max {
        for x in cur.iter_mut() {
            *x = *g.act(&at(*x))?.last().unwrap();
        }
        let mut best: Option<(BigRational, i64)> = None;
        for (t, &y) in cur.iter().enumerate() {
            if y < lo || y > hi {
                continue;
            }
            let r = &weights[(y - lo) as usize] / &weights[t];
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, lo + t as i64));
            }
        }
        let Some((max_slope, argmax)) = best else {
            break;
        };
        rows.push(SlopeRow {
            k,
            max_slope,
            argmax,
        });
    }
    let growth = classify(&rows);
    Ok(SlopeScan {
        base: base.to_vec(),
        window,
        rows,
        growth,
    })
}

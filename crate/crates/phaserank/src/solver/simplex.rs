//! Exact two-phase primal simplex.
//!
//! Arithmetic first runs on `Ratio<i128>` with overflow checks and falls back
//! to arbitrary precision when an intermediate value does not fit.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Cmp {
    Le,
    Eq,
}

/// `Σ coeffs·x  cmp  rhs`.
#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, BigRational)>,
    pub cmp: Cmp,
    pub rhs: BigRational,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Lp {
    pub nvars: usize,
    /// Unrestricted variables; all others are nonnegative.
    pub free: Vec<bool>,
    pub rows: Vec<Row>,
    /// Minimized if present.
    pub objective: Option<Vec<(usize, BigRational)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Infeasible,
    /// Feasible point; optimal when the objective is bounded below.
    Optimal(Vec<BigRational>),
    /// Feasible but the objective is unbounded; carries a feasible point.
    Unbounded(Vec<BigRational>),
    Timeout,
}

trait Field: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_big(r: &BigRational) -> Option<Self>;
    fn to_big(&self) -> BigRational;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn is_zero(&self) -> bool;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn lt(&self, o: &Self) -> bool;
}

type Small = Ratio<i128>;

impl Field for Small {
    fn zero() -> Self {
        <Small as Zero>::zero()
    }
    fn one() -> Self {
        <Small as One>::one()
    }
    fn from_big(r: &BigRational) -> Option<Self> {
        Some(Ratio::new_raw(r.numer().to_i128()?, r.denom().to_i128()?))
    }
    fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn lt(&self, o: &Self) -> bool {
        self < o
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_big(r: &BigRational) -> Option<Self> {
        Some(r.clone())
    }
    fn to_big(&self) -> BigRational {
        self.clone()
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn lt(&self, o: &Self) -> bool {
        self < o
    }
}

struct Overflow;

enum Stop {
    Overflow,
    Timeout,
}

impl From<Overflow> for Stop {
    fn from(_: Overflow) -> Self {
        Stop::Overflow
    }
}

fn ck<T>(v: Option<T>) -> Result<T, Overflow> {
    v.ok_or(Overflow)
}

struct Tableau<F> {
    rows: Vec<Vec<F>>,
    rhs: Vec<F>,
    basis: Vec<usize>,
    /// Reduced costs and the negated objective value.
    obj: Vec<F>,
    obj_rhs: F,
    ncols: usize,
    blocked: Vec<bool>,
    deadline: Option<Instant>,
    pivots: usize,
    degenerate: usize,
}

const BLAND_AFTER: usize = 50;

impl<F: Field> Tableau<F> {
    fn pivot(&mut self, r: usize, c: usize) -> Result<(), Overflow> {
        let p = self.rows[r][c].clone();
        let nz: Vec<usize> = (0..self.ncols).filter(|k| !self.rows[r][*k].is_zero()).collect();
        for &k in &nz {
            self.rows[r][k] = ck(self.rows[r][k].div(&p))?;
        }
        self.rhs[r] = ck(self.rhs[r].div(&p))?;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &k in &nz {
                let d = ck(f.mul(&self.rows[r][k]))?;
                self.rows[i][k] = ck(self.rows[i][k].sub(&d))?;
            }
            let d = ck(f.mul(&self.rhs[r]))?;
            self.rhs[i] = ck(self.rhs[i].sub(&d))?;
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &k in &nz {
                let d = ck(f.mul(&self.rows[r][k]))?;
                self.obj[k] = ck(self.obj[k].sub(&d))?;
            }
            let d = ck(f.mul(&self.rhs[r]))?;
            self.obj_rhs = ck(self.obj_rhs.sub(&d))?;
        }
        self.basis[r] = c;
        self.pivots += 1;
        Ok(())
    }

    /// Runs simplex iterations; returns false when the objective is unbounded.
    fn optimize(&mut self) -> Result<bool, Stop> {
        loop {
            if self.pivots % 32 == 0 {
                if let Some(d) = self.deadline {
                    if Instant::now() > d {
                        return Err(Stop::Timeout);
                    }
                }
            }
            // Dantzig's rule, falling back to Bland's rule after a run of
            // degenerate pivots so that cycling is impossible.
            let entering = if self.degenerate >= BLAND_AFTER {
                (0..self.ncols).find(|&k| !self.blocked[k] && self.obj[k].is_neg())
            } else {
                let mut best: Option<usize> = None;
                for k in 0..self.ncols {
                    if !self.blocked[k] && self.obj[k].is_neg() && best.map_or(true, |b| self.obj[k].lt(&self.obj[b])) {
                        best = Some(k);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut best: Option<(usize, F)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = ck(self.rhs[i].div(a))?;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio.lt(br) || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, ratio)) = best else { return Ok(false) };
            if ratio.is_zero() {
                self.degenerate += 1;
            } else {
                self.degenerate = 0;
            }
            self.pivot(r, c)?;
        }
    }

    fn set_objective(&mut self, costs: &[F]) -> Result<(), Overflow> {
        self.obj = costs.to_vec();
        self.obj_rhs = F::zero();
        for i in 0..self.rows.len() {
            let cb = costs[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for k in 0..self.ncols {
                if !self.rows[i][k].is_zero() {
                    let d = ck(cb.mul(&self.rows[i][k]))?;
                    self.obj[k] = ck(self.obj[k].sub(&d))?;
                }
            }
            let d = ck(cb.mul(&self.rhs[i]))?;
            self.obj_rhs = ck(self.obj_rhs.sub(&d))?;
        }
        Ok(())
    }
}

fn run<F: Field>(lp: &Lp, deadline: Option<Instant>) -> Result<LpOutcome, Stop> {
    // Column layout: structural (free vars split into p - n), slacks, artificials.
    let mut pos_col = Vec::with_capacity(lp.nvars);
    let mut neg_col = Vec::with_capacity(lp.nvars);
    let mut ncols = 0;
    for j in 0..lp.nvars {
        pos_col.push(ncols);
        ncols += 1;
        if lp.free[j] {
            neg_col.push(Some(ncols));
            ncols += 1;
        } else {
            neg_col.push(None);
        }
    }
    let nstruct = ncols;
    let nslack = lp.rows.iter().filter(|r| r.cmp == Cmp::Le).count();
    let nart = lp
        .rows
        .iter()
        .filter(|r| r.cmp == Cmp::Eq || r.rhs.is_negative())
        .count();
    let total = nstruct + nslack + nart;
    let mut rows: Vec<Vec<F>> = Vec::with_capacity(lp.rows.len());
    let mut rhs: Vec<F> = Vec::with_capacity(lp.rows.len());
    let mut basis = Vec::with_capacity(lp.rows.len());
    let (mut next_slack, mut next_art) = (nstruct, nstruct + nslack);
    for row in &lp.rows {
        let flip = row.rhs.is_negative();
        let mut dense = vec![F::zero(); total];
        for (j, a) in &row.coeffs {
            let a = if flip { -a.clone() } else { a.clone() };
            let fa = ck(F::from_big(&a))?;
            dense[pos_col[*j]] = ck(dense[pos_col[*j]].add(&fa))?;
            if let Some(nc) = neg_col[*j] {
                dense[nc] = ck(dense[nc].sub(&fa))?;
            }
        }
        let b = if flip { -row.rhs.clone() } else { row.rhs.clone() };
        if row.cmp == Cmp::Le {
            dense[next_slack] = if flip { F::zero().sub(&F::one()).unwrap() } else { F::one() };
            if !flip {
                basis.push(next_slack);
            }
            next_slack += 1;
        }
        if row.cmp == Cmp::Eq || flip {
            dense[next_art] = F::one();
            basis.push(next_art);
            next_art += 1;
        }
        rows.push(dense);
        rhs.push(ck(F::from_big(&b))?);
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis,
        obj: vec![F::zero(); total],
        obj_rhs: F::zero(),
        ncols: total,
        blocked: vec![false; total],
        deadline,
        pivots: 0,
        degenerate: 0,
    };
    // Phase 1.
    if nart > 0 {
        let mut c1 = vec![F::zero(); total];
        for c in c1.iter_mut().skip(nstruct + nslack) {
            *c = F::one();
        }
        t.set_objective(&c1)?;
        t.optimize()?;
        if !t.obj_rhs.is_zero() {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= nstruct + nslack {
                if let Some(k) = (0..nstruct + nslack).find(|&k| !t.rows[i][k].is_zero()) {
                    t.pivot(i, k)?;
                } else {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
        for k in nstruct + nslack..total {
            t.blocked[k] = true;
        }
    }
    let extract = |t: &Tableau<F>| -> Vec<BigRational> {
        let mut colval = vec![<BigRational as Zero>::zero(); total];
        for (i, b) in t.basis.iter().enumerate() {
            colval[*b] = t.rhs[i].to_big();
        }
        (0..lp.nvars)
            .map(|j| {
                let p = colval[pos_col[j]].clone();
                match neg_col[j] {
                    Some(n) => p - &colval[n],
                    None => p,
                }
            })
            .collect()
    };
    let Some(obj) = &lp.objective else {
        return Ok(LpOutcome::Optimal(extract(&t)));
    };
    let mut c2 = vec![F::zero(); total];
    for (j, a) in obj {
        let fa = ck(F::from_big(a))?;
        c2[pos_col[*j]] = ck(c2[pos_col[*j]].add(&fa))?;
        if let Some(n) = neg_col[*j] {
            c2[n] = ck(c2[n].sub(&fa))?;
        }
    }
    t.set_objective(&c2)?;
    if t.optimize()? {
        Ok(LpOutcome::Optimal(extract(&t)))
    } else {
        Ok(LpOutcome::Unbounded(extract(&t)))
    }
}

/// `x_var = (rhs - Σ coeffs·x) / pivot`, recorded by the presolve.
struct Elimination {
    var: usize,
    pivot: BigRational,
    rest: Vec<(usize, BigRational)>,
    rhs: BigRational,
}

fn substitute(row: &mut Vec<(usize, BigRational)>, rhs: &mut BigRational, e: &Elimination) {
    let Some(pos) = row.iter().position(|(j, _)| *j == e.var) else { return };
    let (_, a) = row.remove(pos);
    let f = a / &e.pivot;
    *rhs -= &f * &e.rhs;
    for (k, c) in &e.rest {
        let d = &f * c;
        match row.iter_mut().find(|(j, _)| j == k) {
            Some((_, x)) => *x -= d,
            None => row.push((*k, -d)),
        }
    }
    row.retain(|(_, c)| !Zero::is_zero(c));
}

/// Uses equality rows to eliminate free variables, which spares the simplex
/// one artificial variable per eliminated row.
fn presolve(lp: &Lp) -> (Lp, Vec<Elimination>) {
    let mut lp = lp.clone();
    let mut elims: Vec<Elimination> = Vec::new();
    loop {
        let pick = lp
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.cmp == Cmp::Eq)
            .filter_map(|(i, r)| r.coeffs.iter().find(|(j, c)| lp.free[*j] && !Zero::is_zero(c)).map(|(j, _)| (i, *j, r.coeffs.len())))
            .min_by_key(|(_, _, n)| *n);
        let Some((i, var, _)) = pick else { break };
        let row = lp.rows.remove(i);
        let pivot = row.coeffs.iter().find(|(j, _)| *j == var).unwrap().1.clone();
        let rest: Vec<(usize, BigRational)> = row.coeffs.into_iter().filter(|(j, _)| *j != var).collect();
        let e = Elimination { var, pivot, rest, rhs: row.rhs };
        for r in &mut lp.rows {
            substitute(&mut r.coeffs, &mut r.rhs, &e);
        }
        if let Some(obj) = &mut lp.objective {
            let mut unused = <BigRational as Zero>::zero();
            substitute(obj, &mut unused, &e);
        }
        elims.push(e);
    }
    (lp, elims)
}

fn back_substitute(x: &mut [BigRational], elims: &[Elimination]) {
    for e in elims.iter().rev() {
        let mut v = e.rhs.clone();
        for (k, c) in &e.rest {
            v -= c * &x[*k];
        }
        x[e.var] = v / &e.pivot;
    }
}

fn solve_reduced(lp: &Lp, deadline: Option<Instant>) -> LpOutcome {
    match run::<Small>(lp, deadline) {
        Ok(o) => o,
        Err(Stop::Timeout) => LpOutcome::Timeout,
        Err(Stop::Overflow) => match run::<BigRational>(lp, deadline) {
            Ok(o) => o,
            Err(_) => LpOutcome::Timeout,
        },
    }
}

pub(crate) fn solve_lp(lp: &Lp, deadline: Option<Instant>) -> LpOutcome {
    let (reduced, elims) = presolve(lp);
    // A row left without variables is decided by its constant alone.
    for r in &reduced.rows {
        if r.coeffs.is_empty() {
            let ok = match r.cmp {
                Cmp::Le => !r.rhs.is_negative(),
                Cmp::Eq => Zero::is_zero(&r.rhs),
            };
            if !ok {
                return LpOutcome::Infeasible;
            }
        }
    }
    let mut out = solve_reduced(&reduced, deadline);
    if let LpOutcome::Optimal(x) | LpOutcome::Unbounded(x) = &mut out {
        back_substitute(x, &elims);
    }
    out
}

use crate::error::{Error, Result};
use crate::opensets::UniformSeq;
use crate::prefix::PrefixSet;
use crate::rat::Rat;

/// A frozen uniform family `(U_i)` read as eventually constant: rows past
/// the last represented one are copies of it, and stages past a row's last
/// stage repeat that stage.
pub(crate) struct Family {
    rows: Vec<Vec<PrefixSet>>,
    stages: usize,
}

impl Family {
    pub fn new(u: &UniformSeq) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::input("the family has no rows"));
        }
        if !u.is_frozen() {
            return Err(Error::NotFrozen);
        }
        let rows: Vec<Vec<PrefixSet>> = u
            .normalize_monotone()
            .rows
            .iter()
            .map(|r| {
                let mut st: Vec<PrefixSet> = r.stages().iter().map(PrefixSet::minimize).collect();
                if st.is_empty() {
                    st.push(PrefixSet::new());
                }
                st
            })
            .collect();
        let stages = rows.iter().map(Vec::len).max().unwrap_or(1);
        Ok(Family { rows, stages })
    }

    /// Every row has measure at most `q`.
    pub fn check_bound(&self, q: &Rat) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            let m = r.last().expect("nonempty").measure();
            if m > *q {
                return Err(Error::invariant(
                    "row-measure-bound",
                    format!("row {i} has measure {m} > {q}"),
                ));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn eff(&self, i: usize) -> usize {
        i.min(self.rows.len() - 1)
    }

    /// `U_{i,s}`, or the limit `𝒰_i` when `s` is `None`.
    pub fn at(&self, i: usize, s: Option<usize>) -> &PrefixSet {
        let row = &self.rows[self.eff(i)];
        let s = s.map_or(row.len() - 1, |s| s.min(row.len() - 1));
        &row[s]
    }

    /// `⋂_{i=a}^{b} U_{i,s}`.
    pub fn inter(&self, a: usize, b: usize, s: Option<usize>) -> PrefixSet {
        let (lo, hi) = (self.eff(a), self.eff(b));
        let mut acc = self.at(lo, s).clone();
        for i in lo + 1..=hi {
            if acc.is_empty() {
                break;
            }
            acc = acc.intersect(self.at(i, s));
        }
        acc
    }

    /// `S_{⟨b_0,…,b_{n-1}⟩} = ⋃_{j<n} U_{j…b_j}` at stage `s`.
    pub fn s_set(&self, bs: &[usize], s: Option<usize>) -> PrefixSet {
        let mut out = PrefixSet::new();
        for (j, &b) in bs.iter().enumerate() {
            out.extend_from(&self.inter(j, b, s));
        }
        out.minimize()
    }

    /// Natural row indices `i > b`, one per distinct effective row, paired
    /// with that effective row.
    pub fn rows_above(&self, b: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let last = self.k() - 1;
        let lo = (b + 1).min(last);
        (lo..=last).map(move |r| if r == last { (r.max(b + 1), r) } else { (r, r) })
    }

    /// First natural `i > b` with `μ(base ∪ U_{i,s}) > q`, looking only at
    /// effective rows below `row_cap`.
    pub fn first_violation(
        &self,
        base: &PrefixSet,
        b: usize,
        q: &Rat,
        s: Option<usize>,
        row_cap: usize,
    ) -> Option<usize> {
        self.rows_above(b)
            .filter(|&(_, r)| r < row_cap)
            .find(|&(i, _)| base.union(self.at(i, s)).measure() > *q)
            .map(|(i, _)| i)
    }
}

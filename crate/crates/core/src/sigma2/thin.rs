//! Thinning a weak 2-test into a Σ⁰₂ test. Row `n` of the output codes
//! `𝒰_m` for the least `m` with `μ(𝒰_m) ≤ 2^{-n}`.

use serde::Serialize;

use super::{Sigma2Code, Sigma2Test, TreeCode};
use crate::bits::BitStr;
use crate::error::{Error, Result};
use crate::opensets::W2TestCode;
use crate::prefix::PrefixSet;
use crate::rat::Rat;

/// Index `⟨σ, m, s⟩` of one output tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ThinIndex {
    pub sigma: BitStr,
    pub m: usize,
    pub s: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Thinned {
    pub test: Sigma2Test,
    /// Tree indices per row; `None` marks the placeholder empty tree.
    pub indices: Vec<Vec<Option<ThinIndex>>>,
    /// The least `m` with `μ(𝒰_m) ≤ 2^{-n}`, per output row.
    pub least_m: Vec<usize>,
}

/// One output row per entry of the modulus.
///
/// For each `σ` and `m` only the least stage `s` at which both admission
/// checks pass is emitted; every later stage gives the same tree, and every
/// earlier one the empty tree.
pub fn thin_w2_to_sigma2(w2: &W2TestCode) -> Result<Thinned> {
    let seq = w2.seq();
    if !seq.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let rows: Vec<Vec<PrefixSet>> = seq
        .normalize_monotone()
        .rows
        .iter()
        .map(|r| r.stages().to_vec())
        .collect();
    let stages = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let at = |m: usize, s: usize| -> PrefixSet {
        let r = &rows[m];
        r.get(s.min(r.len().saturating_sub(1))).cloned().unwrap_or_default()
    };
    let measures: Vec<Vec<Rat>> = rows
        .iter()
        .map(|r| (0..stages).map(|s| at_measure(r, s)).collect())
        .collect();
    let depth = seq.max_len().max(stages) + 1;

    let mut out_rows = Vec::new();
    let mut indices = Vec::new();
    let mut least_m = Vec::new();
    for n in 0..w2.modulus().len() {
        let bound = Rat::pow2_neg(n);
        let m0 = measures
            .iter()
            .position(|m| m.last().is_some_and(|x| *x <= bound))
            .ok_or_else(|| {
                Error::insufficient(format!("no frozen row has measure at most 2^-{n}"))
            })?;
        least_m.push(m0);
        let mut trees = Vec::new();
        let mut idx = Vec::new();
        for m in 0..rows.len() {
            let mut sigmas: Vec<BitStr> = Vec::new();
            for s in 0..stages {
                sigmas.extend(at(m, s).iter().copied());
            }
            sigmas.sort();
            sigmas.dedup();
            let cut = (0..=depth)
                .find(|&l| measures[m][l.min(stages - 1)] > bound)
                .unwrap_or(usize::MAX);
            for sigma in sigmas {
                let admitted = (0..stages).find(|&s| {
                    at(m, s).contains(&sigma) && (0..m).all(|k| measures[k][s] > bound)
                });
                let Some(s) = admitted else { continue };
                let gens = PrefixSet::from_iter([sigma]);
                trees.push(TreeCode::comparable(&gens, cut, cut, depth)?);
                idx.push(Some(ThinIndex { sigma, m, s }));
            }
        }
        if trees.is_empty() {
            trees.push(TreeCode::empty(depth));
            idx.push(None);
        }
        out_rows.push(Sigma2Code::new(trees)?);
        indices.push(idx);
    }
    Ok(Thinned {
        test: Sigma2Test::certify(out_rows)?,
        indices,
        least_m,
    })
}

fn at_measure(r: &[PrefixSet], s: usize) -> Rat {
    if r.is_empty() {
        return Rat::zero();
    }
    r[s.min(r.len() - 1)].measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opensets::{MLTestCode, OpenCode, UniformSeq};

    fn code(stages: &[&[&str]]) -> OpenCode {
        OpenCode::frozen(stages.iter().map(|s| PrefixSet::parse(s).unwrap()).collect())
    }

    #[test]
    fn empty_rows_get_trivial_witnesses() {
        let seq = UniformSeq::new(vec![code(&[&[]]), code(&[&[]]), code(&[&[]])]);
        let w2 = W2TestCode::new(seq, vec![0, 0, 0]).unwrap();
        let t = thin_w2_to_sigma2(&w2).unwrap();
        for w in t.test.witnesses() {
            assert_eq!(w, &vec![1]);
        }
    }

    #[test]
    fn ml_test_thins_to_itself() {
        let rows = vec![code(&[&["0"], &["0", "11"]]), code(&[&["00"], &["01"]]), code(&[&["011"]])];
        let ml = MLTestCode::new(UniformSeq::new(rows.clone())).unwrap();
        let t = thin_w2_to_sigma2(&ml.as_w2()).unwrap();
        assert_eq!(t.least_m, vec![0, 1, 2]);
        for (n, row) in t.test.rows().iter().enumerate() {
            let d = row.depth();
            let expect = rows[n].limit().cylinder_members(d).unwrap();
            assert_eq!(row.level_union(d).unwrap(), expect);
        }
    }

    #[test]
    fn skips_heavy_rows() {
        let rows = vec![code(&[&["0"], &[""]]), code(&[&["00"]])];
        let w2 = W2TestCode::new(UniformSeq::new(rows), vec![0, 0]).unwrap();
        let t = thin_w2_to_sigma2(&w2).unwrap();
        assert_eq!(t.least_m, vec![0, 1]);
        // Early trees for row 0 reach stage 1 and are cut there.
        let row1 = &t.test.rows()[1];
        assert_eq!(row1.level_union(row1.depth()).unwrap().len(), 1 << (row1.depth() - 2));
    }

    #[test]
    fn reports_missing_row() {
        let rows = vec![code(&[&["0"]])];
        let w2 = W2TestCode::new(UniformSeq::new(rows), vec![0, 0, 0]).unwrap();
        assert!(matches!(thin_w2_to_sigma2(&w2), Err(Error::Insufficient(_))));
    }
}

//! Dense two-phase simplex with Bland's rule, and the placement LP that
//! scales and translates a closed polygonal line onto a facet sequence.

use nalgebra::DVector;

use super::ToleranceProfile;
use crate::error::{Error, Result};

const PIVOT_CAP: usize = 1000;

/// `maximize cᵀx` subject to equality rows, `≤` rows and per-variable sign
/// constraints (`x_j ≥ 0` unless marked free).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub free: Vec<bool>,
    pub eq_rows: Vec<(Vec<f64>, f64)>,
    pub le_rows: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, free: Vec<bool>) -> Self {
        Self {
            objective,
            free,
            ..Default::default()
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push((row, rhs));
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.le_rows.push((row, rhs));
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.free.len() != n {
            return Err(Error::invalid(
                "LP: sign vector length differs from objective",
            ));
        }
        for (row, rhs) in self.eq_rows.iter().chain(&self.le_rows) {
            if row.len() != n {
                return Err(Error::invalid("LP: row length differs from variable count"));
            }
            if !rhs.is_finite() || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("LP: non-finite coefficient"));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("LP: non-finite objective"));
        }
        Ok(())
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum Stop {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Maximize `cost · x` from the current basic feasible solution.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Result<Stop> {
        let scale = 1.0 + cost.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let eps_cost = 1e-11 * scale;
        let eps_pivot = 1e-11;
        loop {
            let mut is_basic = vec![false; self.width];
            for &b in &self.basis {
                is_basic[b] = true;
            }
            // Bland: lowest-index improving column enters.
            let entering = (0..self.width).find(|&j| {
                if !allowed[j] || is_basic[j] {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .rows
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| cost[b] * row[j])
                        .sum::<f64>();
                reduced > eps_cost
            });
            let Some(c) = entering else {
                return Ok(Stop::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a <= eps_pivot {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Stop::Unbounded);
            };
            if self.pivots >= PIVOT_CAP {
                return Err(Error::numerical(format!(
                    "simplex exceeded {PIVOT_CAP} pivots"
                )));
            }
            self.pivot(r, c);
        }
    }
}

/// Solve a [`LinearProgram`] by the two-phase simplex method.
///
/// Infeasible programs yield [`Error::Infeasible`]; unbounded ones a
/// numerical failure.
pub fn solve_lp(lp: &LinearProgram, tol: &ToleranceProfile) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.n_vars();
    // Standard-form columns: x_j = plus_j − minus_j for free variables.
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    let mut width = 0usize;
    for &free in &lp.free {
        plus.push(width);
        width += 1;
        if free {
            minus.push(Some(width));
            width += 1;
        } else {
            minus.push(None);
        }
    }
    let structural = width;
    let n_eq = lp.eq_rows.len();
    let n_le = lp.le_rows.len();
    let slack0 = width;
    width += n_le;
    let n_rows = n_eq + n_le;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_rows);
    let mut needs_artificial = Vec::with_capacity(n_rows);
    let mut slack_basic = Vec::with_capacity(n_rows);
    for (k, (coef, rhs)) in lp.eq_rows.iter().chain(&lp.le_rows).enumerate() {
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[plus[j]] = coef[j];
            if let Some(mj) = minus[j] {
                row[mj] = -coef[j];
            }
        }
        let slack = (k >= n_eq).then(|| slack0 + k - n_eq);
        if let Some(s) = slack {
            row[s] = 1.0;
        }
        let mut rhs = *rhs;
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        row.push(rhs);
        let slack_ok = slack.filter(|&s| row[s] > 0.0);
        needs_artificial.push(slack_ok.is_none());
        slack_basic.push(slack_ok);
        rows.push(row);
    }

    let art0 = width;
    let n_art = needs_artificial.iter().filter(|&&a| a).count();
    let total = width + n_art;
    let mut basis = Vec::with_capacity(n_rows);
    let mut next_art = art0;
    for (i, row) in rows.iter_mut().enumerate() {
        let rhs = row.pop().unwrap();
        row.resize(total, 0.0);
        if needs_artificial[i] {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(slack_basic[i].unwrap());
        }
        row.push(rhs);
    }
    let mut t = Tableau {
        rows,
        basis,
        width: total,
        pivots: 0,
    };
    let b_scale = 1.0
        + lp.eq_rows
            .iter()
            .chain(&lp.le_rows)
            .fold(0.0f64, |m, (_, b)| m.max(b.abs()));

    if n_art > 0 {
        let mut cost = vec![0.0; total];
        cost[art0..].iter_mut().for_each(|c| *c = -1.0);
        let allowed = vec![true; total];
        if let Stop::Unbounded = t.run(&cost, &allowed)? {
            return Err(Error::numerical("phase one reported unbounded"));
        }
        let infeas: f64 = t
            .rows
            .iter()
            .zip(&t.basis)
            .filter(|(_, &b)| b >= art0)
            .map(|(r, _)| r[total])
            .sum();
        if infeas > tol.feas * b_scale {
            return Err(Error::Infeasible(format!(
                "phase one residual {infeas:.3e}"
            )));
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art0 {
                let col = (0..art0).find(|&j| t.rows[i][j].abs() > 1e-9);
                match col {
                    Some(c) => t.pivot(i, c),
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = vec![0.0; total];
    for j in 0..n {
        cost[plus[j]] = lp.objective[j];
        if let Some(mj) = minus[j] {
            cost[mj] = -lp.objective[j];
        }
    }
    let allowed: Vec<bool> = (0..total).map(|j| j < art0).collect();
    if let Stop::Unbounded = t.run(&cost, &allowed)? {
        return Err(Error::numerical("linear program is unbounded"));
    }

    let mut values = vec![0.0; total];
    for (i, &b) in t.basis.iter().enumerate() {
        values[b] = t.rhs(i);
    }
    let x: Vec<f64> = (0..n)
        .map(|j| values[plus[j]] - minus[j].map_or(0.0, |mj| values[mj]))
        .collect();
    debug_assert!(structural <= art0);
    let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        x,
        objective,
        pivots: t.pivots,
    })
}

/// Which facets the clearance rows of a [`PlacementLp`] range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClearanceScope {
    /// Every facet of the polytope other than the point's own.
    #[default]
    AllFacets,
    /// Only the other facets of the chosen tuple.
    ChosenFacets,
}

/// Place the closed polygonal line `ξ` as `p_j = λ ξ_j + s` with `p_j` on
/// facet `on_facet[j]`, maximizing the smallest clearance `ρ` from the
/// remaining facets.
///
/// Variables are ordered `(ρ, λ, s_1, …, s_n)` with `ρ, λ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementLp {
    pub xi: Vec<DVector<f64>>,
    pub on_facet: Vec<usize>,
    pub halfspaces: Vec<(DVector<f64>, f64)>,
    pub scope: ClearanceScope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSolution {
    pub rho: f64,
    pub scale: f64,
    pub shift: DVector<f64>,
}

impl PlacementLp {
    pub fn dim(&self) -> usize {
        self.halfspaces.first().map_or(0, |(u, _)| u.len())
    }

    fn row(&self, facet: usize, point: usize) -> Vec<f64> {
        let (u, _) = &self.halfspaces[facet];
        let mut row = Vec::with_capacity(u.len() + 2);
        row.push(0.0);
        row.push(self.xi[point].dot(u));
        row.extend(u.iter());
        row
    }

    /// The LP over `(ρ, λ, s)`; `objective` defaults to maximizing `ρ`.
    pub fn to_linear_program(&self, objective: Option<&[f64]>) -> LinearProgram {
        let n = self.dim();
        let obj = objective.map(<[f64]>::to_vec).unwrap_or_else(|| {
            let mut o = vec![0.0; n + 2];
            o[0] = 1.0;
            o
        });
        let mut free = vec![false, false];
        free.extend(std::iter::repeat_n(true, n));
        let mut lp = LinearProgram::new(obj, free);
        for (j, &f) in self.on_facet.iter().enumerate() {
            lp.add_eq(self.row(f, j), self.halfspaces[f].1);
        }
        let candidates: Vec<usize> = match self.scope {
            ClearanceScope::AllFacets => (0..self.halfspaces.len()).collect(),
            ClearanceScope::ChosenFacets => self.on_facet.clone(),
        };
        for (j, &own) in self.on_facet.iter().enumerate() {
            for &i in candidates.iter().filter(|&&i| i != own) {
                let mut row = self.row(i, j);
                row[0] = 1.0;
                lp.add_le(row, self.halfspaces[i].1);
            }
        }
        lp
    }

    fn unpack(&self, sol: &LpSolution, tol: &ToleranceProfile) -> Result<PlacementSolution> {
        let scale = sol.x[1];
        if scale <= tol.positivity {
            return Err(Error::numerical(format!(
                "placement returned non-positive scale {scale:.3e}"
            )));
        }
        Ok(PlacementSolution {
            rho: sol.x[0],
            scale,
            shift: DVector::from_column_slice(&sol.x[2..]),
        })
    }

    pub fn solve(&self, tol: &ToleranceProfile) -> Result<PlacementSolution> {
        let sol = solve_lp(&self.to_linear_program(None), tol)?;
        self.unpack(&sol, tol)
    }

    /// Optimize an arbitrary linear objective over the same feasible region.
    pub fn solve_with_objective(
        &self,
        objective: &[f64],
        tol: &ToleranceProfile,
    ) -> Result<PlacementSolution> {
        if objective.len() != self.dim() + 2 {
            return Err(Error::invalid(
                "placement objective must have n + 2 entries",
            ));
        }
        let sol = solve_lp(&self.to_linear_program(Some(objective)), tol)?;
        self.unpack(&sol, tol)
    }

    pub fn points(&self, sol: &PlacementSolution) -> Vec<DVector<f64>> {
        self.xi.iter().map(|x| x * sol.scale + &sol.shift).collect()
    }
}

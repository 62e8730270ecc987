//! Parameter sweeps over Schmidt coefficients and ξ, returned as tables.
//!
//! Points on the simplex of squared coefficients come from an affine lattice
//! `x_l = m + (1 − D·m)·n_l/N` with nonnegative integers `n_l` summing to
//! `N`. Every point keeps a margin `m` from the boundary, the corners sit
//! exactly at the margin and the centroid is on the grid whenever `D | N`.

use rayon::prelude::*;

use crate::channel::SchmidtState;
use crate::discrimination::{stage_success_probability, FinalAction, StagePlan};
use crate::error::{Error, Result};
use crate::info::{mutual_info_me, mutual_info_multistage, mutual_info_sep};

pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Formats `x` with at most nine significant digits.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    // Avoid "-0".
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a numeric column, in row order.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Interior lattice points of the squared-coefficient simplex for `rank`
/// levels, in lexicographic order of the lattice indices.
pub fn simplex_grid(rank: usize, resolution: usize, margin: f64) -> Result<Vec<Vec<f64>>> {
    if rank < 2 {
        return Err(Error::InvalidDimension(format!("rank {rank} must be at least 2")));
    }
    if resolution < 2 {
        return Err(Error::Config(format!("grid resolution {resolution} must be at least 2")));
    }
    if !(margin > 0.0 && margin * (rank as f64) < 1.0) {
        return Err(Error::Config(format!("margin {margin} must lie in (0, 1/{rank})")));
    }
    let span = 1.0 - rank as f64 * margin;
    let mut points = Vec::new();
    let mut idx = vec![0usize; rank];
    fill(&mut idx, 0, resolution, &mut |n| {
        points.push(
            n.iter()
                .map(|&k| margin + span * k as f64 / resolution as f64)
                .collect(),
        )
    });
    Ok(points)
}

fn fill(idx: &mut Vec<usize>, pos: usize, left: usize, emit: &mut impl FnMut(&[usize])) {
    if pos == idx.len() - 1 {
        idx[pos] = left;
        emit(idx);
        return;
    }
    for k in 0..=left {
        idx[pos] = k;
        fill(idx, pos + 1, left - k, emit);
    }
}

fn coeff_header(rank: usize) -> Vec<String> {
    (0..rank - 1).map(|l| format!("a{l}")).collect()
}

fn coeff_cells(s: &SchmidtState) -> Vec<Cell> {
    s.coeffs()[..s.rank() - 1].iter().map(|&a| Cell::Float(a)).collect()
}

fn states(d1: usize, d2: usize, resolution: usize, margin: f64) -> Result<Vec<SchmidtState>> {
    simplex_grid(d1.min(d2), resolution, margin)?
        .iter()
        .map(|sq| SchmidtState::from_squared(d1, d2, sq))
        .collect()
}

fn with_header(fixed: Vec<String>, rest: &[&str]) -> Table {
    let mut h = fixed;
    h.extend(rest.iter().map(|s| s.to_string()));
    Table {
        header: h,
        rows: Vec::new(),
    }
}

/// Minimum-error information over the full-rank simplex: `a0, …, I_bits`.
pub fn sweep_me(d1: usize, d2: usize, resolution: usize, margin: f64) -> Result<Table> {
    let states = states(d1, d2, resolution, margin)?;
    let mut table = with_header(coeff_header(d1.min(d2)), &["I_bits"]);
    table.rows = states
        .par_iter()
        .map(|s| {
            let mut row = coeff_cells(s);
            row.push(Cell::Float(mutual_info_me(s).total_bits));
            row
        })
        .collect();
    Ok(table)
}

/// Separation followed by minimum-error decoding at `steps + 1` evenly
/// spaced ξ in `[0, 1]`.
pub fn sweep_sep(s: &SchmidtState, steps: usize) -> Result<Table> {
    if steps < 1 {
        return Err(Error::Config("xi steps must be at least 1".into()));
    }
    let i_me = mutual_info_me(s).total_bits;
    let mut table = Table::new(&["xi", "P_s", "I_total", "I_success", "I_ME"]);
    table.rows = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let xi = i as f64 / steps as f64;
            let r = mutual_info_sep(s, xi)?;
            Ok(vec![
                Cell::Float(xi),
                Cell::Float(r.branch_probabilities[0]),
                Cell::Float(r.total_bits),
                Cell::Float(r.success_branch_bits.unwrap_or(r.total_bits)),
                Cell::Float(i_me),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(table)
}

/// One multistage comparison point.
#[derive(Clone, Debug, PartialEq)]
pub struct MultistagePoint {
    pub i_mc: f64,
    pub i_mc_me: f64,
    pub i_mc_mc: f64,
    pub i_suc1: f64,
    pub i_suc2: f64,
    pub i_me: f64,
    pub p_s1: f64,
    pub p_s2: f64,
    pub p_overall: f64,
    /// No second stage can run: the first failure family is uniform on its
    /// support or the first stage never fails.
    pub stage2_degenerate: bool,
}

pub fn multistage_point(s: &SchmidtState) -> Result<MultistagePoint> {
    let log_d2 = (s.d2() as f64).log2();
    let mc = mutual_info_multistage(s, &StagePlan::max_confidence(1, FinalAction::Abstain))?;
    let mc_me = mutual_info_multistage(s, &StagePlan::max_confidence(1, FinalAction::Me))?;
    let depth = if s.rank() >= 3 { 2 } else { 1 };
    let mc_mc = mutual_info_multistage(s, &StagePlan::max_confidence(depth, FinalAction::Abstain))?;
    let i_me = mutual_info_me(s).total_bits;
    let p_s1 = mc.branch_probabilities[0];
    let i_suc1 = mc.stage_success_bits.first().copied().unwrap_or(i_me);
    let (i_suc2, stage2_degenerate) = match mc_mc.stage_success_bits.get(1) {
        Some(&b) => (b, false),
        None => (log_d2, true),
    };
    let p_s2 = if stage2_degenerate || p_s1 >= 1.0 {
        0.0
    } else {
        stage_success_probability(s.coeffs())?.probability()
    };
    let gain = if i_suc2 > i_me { p_s2 } else { 0.0 };
    Ok(MultistagePoint {
        i_mc: mc.total_bits,
        i_mc_me: mc_me.total_bits,
        i_mc_mc: mc_mc.total_bits,
        i_suc1,
        i_suc2,
        i_me,
        p_s1,
        p_s2,
        p_overall: p_s1 + (1.0 - p_s1) * gain,
        stage2_degenerate,
    })
}

/// Two-stage comparison over the full-rank simplex.
pub fn sweep_multistage(d1: usize, d2: usize, resolution: usize, margin: f64) -> Result<Table> {
    let states = states(d1, d2, resolution, margin)?;
    let mut table = with_header(
        coeff_header(d1.min(d2)),
        &[
            "I_MC",
            "I_MC_ME",
            "I_MC_MC",
            "I_suc1",
            "I_suc2",
            "I_ME",
            "P_s1",
            "P_overall",
            "stage2_degenerate",
        ],
    );
    table.rows = states
        .par_iter()
        .map(|s| {
            let p = multistage_point(s)?;
            let mut row = coeff_cells(s);
            row.extend(
                [p.i_mc, p.i_mc_me, p.i_mc_mc, p.i_suc1, p.i_suc2, p.i_me, p.p_s1, p.p_overall].map(Cell::Float),
            );
            row.push(Cell::Bool(p.stage2_degenerate));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(table)
}

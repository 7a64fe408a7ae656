//! Per-iteration record of the alternating scheme with the descent checks.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One outer iteration of the alternating scheme.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    /// Objective after the iteration: `L(x^{k+1}, theta^{k+1})`.
    pub objective: f64,
    /// `kappa * |A(theta) x - y|^2` component.
    pub fidelity: f64,
    /// Prior component `f(x)`.
    pub prior: f64,
    /// Cost-to-move value `h_mu(D^T (x^{k+1} - x^k))`.
    pub move_huber: f64,
    /// `|x^{k+1} - x^k|_2`.
    pub dx: f64,
    /// `|theta^{k+1} - theta^k|_2` over all views.
    pub dtheta: f64,
    /// Largest backtracking index over the views.
    pub i_max: u32,
    /// Wall time of the iteration in milliseconds.
    pub ms: f64,
    /// Cost-to-move weight used this iteration.
    pub gamma_x: f64,
    /// Per-view backtracking indices.
    pub backtrack: Vec<u32>,
    /// Step 1 kept the previous iterate because the decrease check failed.
    pub step1_fallback: bool,
    /// Views whose parameter update was skipped (backtracking cap).
    pub step2_skipped: Vec<bool>,
    /// Fraction of wavelet coefficients of `x^{k+1}` above 1e-8 in
    /// magnitude (coarse-to-fine diagnostic).
    pub nnz_frac: f64,
}

/// Full trace of a run. Row `k = 0` is implicit: the initial objective at
/// `(x^0, theta^0)` with zero increments.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub initial_objective: f64,
    pub initial_fidelity: f64,
    pub rows: Vec<TraceRow>,
}

pub const CSV_HEADER: &str = "k,L,fidelity,prior,move,dx,dtheta,i_max,ms";

impl IterationTrace {
    /// CSV export, one row per outer iteration plus the `k = 0` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        let _ = writeln!(
            out,
            "0,{:.12e},{:.12e},{:.12e},0,0,0,0,0",
            self.initial_objective,
            self.initial_fidelity,
            self.initial_objective - self.initial_fidelity,
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.3}",
                r.k, r.objective, r.fidelity, r.prior, r.move_huber, r.dx, r.dtheta, r.i_max, r.ms
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())
    }

    pub fn last_objective(&self) -> f64 {
        self.rows
            .last()
            .map(|r| r.objective)
            .unwrap_or(self.initial_objective)
    }

    /// `|x^{k+1} - x^k| + |theta^{k+1} - theta^k|` of the last iteration.
    pub fn final_increment(&self) -> f64 {
        self.rows.last().map(|r| r.dx + r.dtheta).unwrap_or(0.0)
    }

    /// Smallest cost-to-move weight encountered, including `gamma_theta`.
    pub fn gamma_min(&self, gamma_theta: f64) -> f64 {
        self.rows
            .iter()
            .map(|r| r.gamma_x)
            .fold(gamma_theta, f64::min)
    }

    /// The objective never increases along the recorded sequence.
    pub fn check_monotone(&self, tol: f64) -> Result<()> {
        let mut prev = self.initial_objective;
        for r in &self.rows {
            if r.objective > prev + tol * (1.0 + prev.abs()) {
                return Err(Error::DescentViolation {
                    iteration: r.k,
                    details: format!("objective rose from {prev:.9e} to {:.9e}", r.objective),
                });
            }
            prev = r.objective;
        }
        Ok(())
    }

    /// Per-iteration sufficient decrease with the uniform weight
    /// `gamma_min`:
    /// `L_k + (gamma_min/2) [kappa dtheta^2 + move] <= L_{k-1}`.
    pub fn check_sufficient_decrease(
        &self,
        kappa: f64,
        gamma_theta: f64,
        tol: f64,
    ) -> Result<()> {
        let gamma_min = self.gamma_min(gamma_theta);
        let mut prev = self.initial_objective;
        for r in &self.rows {
            let lhs =
                r.objective + 0.5 * gamma_min * (kappa * r.dtheta * r.dtheta + r.move_huber);
            if lhs > prev + tol * (1.0 + prev.abs()) {
                return Err(Error::DescentViolation {
                    iteration: r.k,
                    details: format!(
                        "sufficient decrease violated: {lhs:.9e} > {prev:.9e}"
                    ),
                });
            }
            prev = r.objective;
        }
        Ok(())
    }

    /// Telescoped decrease: the accumulated guaranteed decrease amounts
    /// never exceed the total objective drop.
    pub fn check_telescoping(&self, kappa: f64, gamma_theta: f64, tol: f64) -> Result<()> {
        let gamma_min = self.gamma_min(gamma_theta);
        let sum: f64 = self
            .rows
            .iter()
            .map(|r| 0.5 * gamma_min * (r.move_huber + kappa * r.dtheta * r.dtheta))
            .sum();
        let drop = self.initial_objective - self.last_objective();
        if sum > drop + tol * (1.0 + self.initial_objective.abs()) {
            return Err(Error::DescentViolation {
                iteration: self.rows.len(),
                details: format!("telescoping bound violated: {sum:.9e} > {drop:.9e}"),
            });
        }
        Ok(())
    }

    /// Formatted tail of the trace for diagnostics.
    pub fn dump_tail(&self, count: usize) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.rows.iter().rev().take(count).rev() {
            let _ = writeln!(
                out,
                "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{:.1}",
                r.k, r.objective, r.fidelity, r.prior, r.move_huber, r.dx, r.dtheta, r.i_max, r.ms
            );
        }
        out
    }
}

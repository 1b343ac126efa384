//! Coordinate bisection for the period problem F(q) = 0 inside the box
//! prod_i [2 p_i - eta0, 2 p_i + eta0].
//!
//! Handles separated by at least one spare even slot interact only weakly, so
//! the period map is strongly diagonally dominant in practice and a
//! Gauss-Seidel sweep of one-dimensional lattice bisections converges without
//! full N-dimensional subdivision. The face-sign check remains the license
//! for the bracket signs. Roots are reported as brackets of width 2h at the
//! lattice floor; sub-lattice root claims would be spurious because the
//! singular nodes are grid-snapped.

use crate::period_engine::{evaluate, PeriodError, PeriodOptions, PeriodReport};
use crate::maximal_solver::ScalarField;
use crate::strip_domain::{SingularSet, StripConfig};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// every |F_i| <= tol_F at the final point
    Converged,
    /// every coordinate bracketed at lattice resolution (width <= 2h)
    BracketAtResolution,
    /// a bracket lost its sign change, or the sweep limit was hit
    Failed,
}

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub sweep: usize,
    pub coord: usize,
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub bracket_width: f64,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub iterations: Vec<SweepRecord>,
    pub status: SolveStatus,
    pub final_q: SingularSet,
    pub final_f: Vec<f64>,
    /// final brackets in q units
    pub brackets: Vec<(f64, f64)>,
    pub eta0: f64,
    pub tol_f: f64,
    /// human-readable detail for Failed status
    pub failure: Option<String>,
}

struct Evaluator<'a> {
    cfg: &'a StripConfig,
    placements: &'a [i64],
    opts: &'a PeriodOptions,
    cache: HashMap<Vec<i64>, Vec<f64>>,
    warm: Option<ScalarField>,
    solves: usize,
}

impl<'a> Evaluator<'a> {
    fn f_at(&mut self, lattice: &[i64]) -> Result<Vec<f64>, PeriodError> {
        if let Some(f) = self.cache.get(lattice) {
            return Ok(f.clone());
        }
        let h = self.cfg.grid_h;
        let q: Vec<f64> = self
            .placements
            .iter()
            .zip(lattice.iter())
            .map(|(&p, &k)| 2.0 * p as f64 + k as f64 * h)
            .collect();
        let s = SingularSet {
            q,
            p: self.placements.to_vec(),
        };
        let eval = evaluate(self.cfg, &s, self.opts, self.warm.as_ref())?;
        self.solves += 1;
        let f = eval.report.f.clone();
        self.warm = Some(eval.field);
        self.cache.insert(lattice.to_vec(), f.clone());
        Ok(f)
    }
}

/// Solve the period problem for the given handle placements by repeated
/// coordinate bisection on the snapped lattice.
pub fn solve_periods(
    cfg: &StripConfig,
    placements: &[i64],
    eta0: f64,
    tol_f: f64,
    opts: &PeriodOptions,
) -> Result<SolveTrace, PeriodError> {
    if !(eta0 > 0.0 && eta0 < cfg.eta) {
        return Err(PeriodError::BadEta0(eta0, cfg.eta));
    }
    let n = placements.len();
    let h = cfg.grid_h;
    if n == 0 {
        return Ok(SolveTrace {
            iterations: vec![],
            status: SolveStatus::Converged,
            final_q: SingularSet::empty(),
            final_f: vec![],
            brackets: vec![],
            eta0,
            tol_f,
            failure: None,
        });
    }
    let span = (eta0 / h).floor() as i64; // lattice half-width of the box
    let mut lo = vec![-span; n];
    let mut hi = vec![span; n];
    let mut k: Vec<i64> = vec![0; n]; // current lattice offsets (box centers)
    let mut ev = Evaluator {
        cfg,
        placements,
        opts,
        cache: HashMap::new(),
        warm: None,
        solves: 0,
    };

    let q_of = |k: &[i64]| -> Vec<f64> {
        placements
            .iter()
            .zip(k.iter())
            .map(|(&p, &kk)| 2.0 * p as f64 + kk as f64 * h)
            .collect()
    };

    let mut iterations = Vec::new();
    let max_sweeps = 24usize;
    let mut status = SolveStatus::Failed;
    let mut failure = None;
    'outer: for sweep in 0..max_sweeps {
        let mut all_parked = true;
        for i in 0..n {
            let f = ev.f_at(&k)?;
            let width = (hi[i] - lo[i]) as f64 * h;
            iterations.push(SweepRecord {
                sweep,
                coord: i,
                q: q_of(&k),
                f: f.clone(),
                bracket_width: width,
            });
            if f[i].abs() <= tol_f {
                continue; // parked by tolerance
            }
            if hi[i] - lo[i] <= 2 {
                continue; // parked at lattice resolution
            }
            all_parked = false;
            if f[i] > 0.0 {
                hi[i] = k[i];
            } else {
                lo[i] = k[i];
            }
            // midpoint, keeping the left half on ties
            k[i] = lo[i] + (hi[i] - lo[i]) / 2;
        }
        if all_parked {
            let f = ev.f_at(&k)?;
            if f.iter().all(|v| v.abs() <= tol_f) {
                status = SolveStatus::Converged;
                break 'outer;
            }
            // at resolution: confirm every unconverged bracket still changes
            // sign across its remaining interval
            for i in 0..n {
                if f[i].abs() <= tol_f {
                    continue;
                }
                let mut at_lo = k.clone();
                at_lo[i] = lo[i];
                let mut at_hi = k.clone();
                at_hi[i] = hi[i];
                let f_lo = ev.f_at(&at_lo)?[i];
                let f_hi = ev.f_at(&at_hi)?[i];
                if !(f_lo < 0.0 && f_hi > 0.0) {
                    failure = Some(format!(
                        "coordinate {i} lost its sign change: F({}) = {f_lo}, F({}) = {f_hi}",
                        lo[i] as f64 * h,
                        hi[i] as f64 * h
                    ));
                    status = SolveStatus::Failed;
                    break 'outer;
                }
            }
            status = SolveStatus::BracketAtResolution;
            break 'outer;
        }
    }
    let final_f = ev.f_at(&k)?;
    if status == SolveStatus::Failed && failure.is_none() {
        failure = Some("sweep limit reached".to_string());
    }
    Ok(SolveTrace {
        iterations,
        status,
        final_q: SingularSet {
            q: q_of(&k),
            p: placements.to_vec(),
        },
        final_f,
        brackets: (0..n)
            .map(|i| {
                (
                    2.0 * placements[i] as f64 + lo[i] as f64 * h,
                    2.0 * placements[i] as f64 + hi[i] as f64 * h,
                )
            })
            .collect(),
        eta0,
        tol_f,
        failure,
    })
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub coarse_f: Vec<f64>,
    pub fine: PeriodReport,
    pub drift: Vec<f64>,
}

/// Re-evaluate the final point of a trace on a once-refined grid (h/2) and
/// report the drift of each period.
pub fn verify_solution(
    cfg: &StripConfig,
    trace: &SolveTrace,
    opts: &PeriodOptions,
) -> Result<VerifyReport, PeriodError> {
    let fine_cfg = StripConfig {
        grid_h: cfg.grid_h / 2.0,
        ..cfg.clone()
    };
    if trace.final_q.is_empty() {
        return Ok(VerifyReport {
            coarse_f: vec![],
            fine: PeriodReport {
                q: SingularSet::empty(),
                f: vec![],
                handle_sizes: vec![],
                half_loop_check: vec![],
                closedness_bounds: vec![],
                grid_h: fine_cfg.grid_h,
            },
            drift: vec![],
        });
    }
    let mut opts_fine = opts.clone();
    opts_fine.loop_radius = opts.loop_radius * 2; // same physical loop size
    let eval = evaluate(&fine_cfg, &trace.final_q, &opts_fine, None)?;
    let drift = trace
        .final_f
        .iter()
        .zip(eval.report.f.iter())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(VerifyReport {
        coarse_f: trace.final_f.clone(),
        fine: eval.report,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> StripConfig {
        StripConfig::new(0.8, 0.1, None, Some((-4.0, 4.0)), &[0]).unwrap()
    }

    #[test]
    fn single_handle_root_is_the_center() {
        let c = cfg();
        let trace = solve_periods(&c, &[0], c.eta0, 1e-4, &PeriodOptions::default()).unwrap();
        assert_eq!(trace.status, SolveStatus::Converged);
        assert!(trace.final_q.q[0].abs() <= 2.0 * c.grid_h);
        // iterates stay in the box, brackets shrink monotonically
        let mut widths = vec![f64::INFINITY];
        for rec in &trace.iterations {
            assert!(rec.q[0].abs() <= c.eta0 + 1e-12);
            widths.push(rec.bracket_width);
            assert!(rec.bracket_width <= widths[widths.len() - 2] + 1e-12);
        }
    }

    #[test]
    fn empty_problem_is_trivially_converged() {
        let c = cfg();
        let trace = solve_periods(&c, &[], c.eta0, 1e-6, &PeriodOptions::default()).unwrap();
        assert_eq!(trace.status, SolveStatus::Converged);
        let verify = verify_solution(&c, &trace, &PeriodOptions::default()).unwrap();
        assert!(verify.drift.is_empty());
    }

    #[test]
    fn two_handles_reach_tolerance_or_resolution() {
        let c = StripConfig::new(0.8, 0.1, None, None, &[0, 3]).unwrap();
        let o = PeriodOptions::default();
        let noise = crate::period_engine::snapping_noise(
            &c,
            &SingularSet::centered(&[0, 3], c.eta0).unwrap(),
            &o,
        )
        .unwrap();
        let trace = solve_periods(&c, &[0, 3], c.eta0, 5.0 * noise, &o).unwrap();
        assert_ne!(trace.status, SolveStatus::Failed, "{:?}", trace.failure);
        for (i, f) in trace.final_f.iter().enumerate() {
            let width = trace.brackets[i].1 - trace.brackets[i].0;
            assert!(
                f.abs() <= 5.0 * noise || width <= 2.0 * c.grid_h + 1e-12,
                "coordinate {i}: f = {f}, width = {width}"
            );
        }
    }

    #[test]
    fn translated_windows_give_identical_offsets() {
        // p = (0, 3) on its default window vs p = (-3, 0) on its own: the two
        // problems are exact translates of each other, so the solved offsets
        // r_i = q_i - 2 p_i agree.
        let o = PeriodOptions::default();
        let c1 = StripConfig::new(0.8, 0.1, None, None, &[0, 3]).unwrap();
        let c2 = StripConfig::new(0.8, 0.1, None, None, &[-3, 0]).unwrap();
        let t1 = solve_periods(&c1, &[0, 3], c1.eta0, 1e-3, &o).unwrap();
        let t2 = solve_periods(&c2, &[-3, 0], c2.eta0, 1e-3, &o).unwrap();
        for i in 0..2 {
            let r1 = t1.final_q.q[i] - 2.0 * t1.final_q.p[i] as f64;
            let r2 = t2.final_q.q[i] - 2.0 * t2.final_q.p[i] as f64;
            assert!(
                (r1 - r2).abs() <= 2.0 * c1.grid_h + 1e-9,
                "offsets differ: {r1} vs {r2}"
            );
        }
    }

    #[test]
    fn verification_refines_without_blowup() {
        let c = cfg();
        let o = PeriodOptions::default();
        let trace = solve_periods(&c, &[0], c.eta0, 1e-4, &o).unwrap();
        let v = verify_solution(&c, &trace, &o).unwrap();
        assert_eq!(v.fine.grid_h, c.grid_h / 2.0);
        // a non-root point fails verification loudly
        let centered = SingularSet {
            q: vec![c.eta0],
            p: vec![0],
        };
        let off = crate::period_engine::periods(&c, &centered, &o).unwrap();
        assert!(off.f[0].abs() > v.fine.f[0].abs());
    }
}

//! Dörfler marking, the adaptive loop and convergence diagnostics.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Instant;

use log::{info, warn};

use crate::control::{solve_ocp, DiscreteSolution, ProblemSpec, SolverOptions};
use crate::estimator::{total_indicators, EstimatorOptions, IndicatorSet};
use crate::mesh::{ElementSet, Mesh};
use crate::problems::exact_errors;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "k,n_elem,n_dof,eta,eta_y,eta_p,osc,err_u,err_y,err_p,grading,marked,ratio_err,ratio_eta,seconds";

#[derive(Debug, Clone)]
pub struct AdaptOptions {
    pub theta: f64,
    /// Bisections applied to each marked element.
    pub r: usize,
    /// Stop once the current mesh has at least this many DOFs.
    pub max_dofs: Option<usize>,
    /// Maximum number of SOLVE steps (= history records).
    pub max_iters: Option<usize>,
    pub eta_tol: Option<f64>,
    /// Mark every element and bisect it `uniform_bisections` times per level.
    pub uniform: bool,
    pub uniform_bisections: usize,
    pub initial_subdivisions: usize,
    /// Iterations excluded from contraction statistics.
    pub preasymptotic: usize,
    pub estimator: EstimatorOptions,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            theta: 0.3,
            r: 1,
            max_dofs: Some(100_000),
            max_iters: None,
            eta_tol: None,
            uniform: false,
            uniform_bisections: 2,
            initial_subdivisions: 8,
            preasymptotic: 5,
            estimator: EstimatorOptions::default(),
        }
    }
}

impl AdaptOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidArgument(format!("theta must lie in (0,1], got {}", self.theta)));
        }
        if self.r == 0 || self.uniform_bisections == 0 {
            return Err(Error::InvalidArgument("bisection counts must be >= 1".into()));
        }
        if self.initial_subdivisions == 0 {
            return Err(Error::InvalidArgument("initial mesh needs at least one subdivision".into()));
        }
        if self.max_dofs.is_none() && self.max_iters.is_none() && self.eta_tol.is_none() {
            return Err(Error::InvalidArgument("no stopping rule given".into()));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// `θ = 1` means uniform refinement.
    pub fn is_uniform(&self) -> bool {
        self.uniform || self.theta == 1.0
    }
}

/// `λ = 1 - 2^{-3r/2}`, the guaranteed size reduction factor for marked
/// elements in two dimensions.
pub fn lambda(r: usize) -> f64 {
    1.0 - 2f64.powf(-1.5 * r as f64)
}

/// Result of bulk marking.
#[derive(Debug, Clone, PartialEq)]
pub struct Marking {
    pub marked: ElementSet,
    /// All indicators vanish; nothing to refine.
    pub converged: bool,
}

/// Minimal set carrying a `θ²` fraction of `Σ η²(T)`: greedy by descending
/// `η²`, ties by ascending element id.
pub fn doerfler_mark(eta2: &[f64], theta: f64) -> Result<Marking> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0,1], got {theta}")));
    }
    if eta2.is_empty() {
        return Err(Error::InvalidArgument("empty indicator set".into()));
    }
    if let Some(t) = eta2.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("indicator {t} is {}", eta2[t])));
    }
    let total: f64 = eta2.iter().sum();
    if total == 0.0 {
        return Ok(Marking {
            marked: ElementSet::new(),
            converged: true,
        });
    }
    let mut order: Vec<usize> = (0..eta2.len()).collect();
    order.sort_by(|&a, &b| eta2[b].total_cmp(&eta2[a]).then(a.cmp(&b)));
    let bulk = theta * theta * total;
    let mut marked = ElementSet::new();
    let mut acc = 0.0;
    for t in order {
        // zeros never help; θ = 1 takes every positive indicator
        if eta2[t] == 0.0 || (acc >= bulk && theta < 1.0) {
            break;
        }
        acc += eta2[t];
        marked.insert(t);
    }
    Ok(Marking {
        marked,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub n_elem: usize,
    pub n_dof: usize,
    pub eta: f64,
    pub eta_y: f64,
    pub eta_p: f64,
    pub osc: f64,
    pub err_u: Option<f64>,
    pub err_y: Option<f64>,
    pub err_p: Option<f64>,
    pub grading: f64,
    pub marked: usize,
    /// `Q_k / Q_{k-1}` for `Q = err_u + err_y + err_p + osc`.
    pub ratio_err: Option<f64>,
    pub ratio_eta: Option<f64>,
    pub seconds: f64,
}

impl IterationRecord {
    /// `‖u-u_k‖ + ‖y-y_k‖ + ‖p-p_k‖` when exact errors are known.
    pub fn combined_error(&self) -> Option<f64> {
        Some(self.err_u? + self.err_y? + self.err_p?)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptiveHistory {
    pub records: Vec<IterationRecord>,
    /// Set when the loop was aborted by a solver failure.
    pub failed: Option<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

impl AdaptiveHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Adds a record after checking index and DOF monotonicity, and fills in
    /// the ratio columns.
    pub fn push(&mut self, mut rec: IterationRecord) -> Result<()> {
        if let Some(prev) = self.records.last() {
            if rec.k <= prev.k || rec.n_dof < prev.n_dof {
                return Err(Error::InvalidArgument(format!(
                    "record k={} N={} does not follow k={} N={}",
                    rec.k, rec.n_dof, prev.k, prev.n_dof
                )));
            }
            rec.ratio_eta = Some(rec.eta / prev.eta);
            rec.ratio_err = match (rec.combined_error(), prev.combined_error()) {
                (Some(a), Some(b)) => Some((a + rec.osc) / (b + prev.osc)),
                _ => None,
            };
        }
        self.records.push(rec);
        Ok(())
    }

    /// CSV text with the fixed header. Without `timing` the `seconds` column
    /// is left empty so identical runs give identical files.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{:.17e},{},{},{},{}",
                r.k,
                r.n_elem,
                r.n_dof,
                r.eta,
                r.eta_y,
                r.eta_p,
                r.osc,
                fmt_opt(r.err_u),
                fmt_opt(r.err_y),
                fmt_opt(r.err_p),
                r.grading,
                r.marked,
                fmt_opt(r.ratio_err),
                fmt_opt(r.ratio_eta),
                if timing { format!("{:.6}", r.seconds) } else { String::new() },
            );
        }
        s
    }

    pub fn write_csv(&self, w: &mut impl Write, timing: bool) -> Result<()> {
        w.write_all(self.to_csv(timing).as_bytes())?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != CSV_HEADER {
            return Err(Error::InvalidArgument(format!("unexpected CSV header '{header}'")));
        }
        let mut hist = AdaptiveHistory::default();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 15 {
                return Err(Error::InvalidArgument(format!("line {}: expected 15 fields", i + 2)));
            }
            let bad = |name: &str| Error::InvalidArgument(format!("line {}: bad {name}", i + 2));
            let num = |k: usize, name: &str| f[k].parse::<f64>().map_err(|_| bad(name));
            let int = |k: usize, name: &str| f[k].parse::<usize>().map_err(|_| bad(name));
            let opt = |k: usize, name: &str| -> Result<Option<f64>> {
                if f[k].is_empty() {
                    Ok(None)
                } else {
                    f[k].parse::<f64>().map(Some).map_err(|_| bad(name))
                }
            };
            hist.records.push(IterationRecord {
                k: int(0, "k")?,
                n_elem: int(1, "n_elem")?,
                n_dof: int(2, "n_dof")?,
                eta: num(3, "eta")?,
                eta_y: num(4, "eta_y")?,
                eta_p: num(5, "eta_p")?,
                osc: num(6, "osc")?,
                err_u: opt(7, "err_u")?,
                err_y: opt(8, "err_y")?,
                err_p: opt(9, "err_p")?,
                grading: num(10, "grading")?,
                marked: int(11, "marked")?,
                ratio_err: opt(12, "ratio_err")?,
                ratio_eta: opt(13, "ratio_eta")?,
                seconds: opt(14, "seconds")?.unwrap_or(0.0),
            });
        }
        Ok(hist)
    }
}

/// Quantity tracked by [`eoc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Eta,
    EtaY,
    EtaP,
    Osc,
    ErrU,
    ErrY,
    ErrP,
    /// `err_u + err_y + err_p`.
    Combined,
}

impl Quantity {
    pub fn of(self, r: &IterationRecord) -> Option<f64> {
        match self {
            Quantity::Eta => Some(r.eta),
            Quantity::EtaY => Some(r.eta_y),
            Quantity::EtaP => Some(r.eta_p),
            Quantity::Osc => Some(r.osc),
            Quantity::ErrU => r.err_u,
            Quantity::ErrY => r.err_y,
            Quantity::ErrP => r.err_p,
            Quantity::Combined => r.combined_error(),
        }
    }
}

/// Convergence rates against the DOF count.
#[derive(Debug, Clone, PartialEq)]
pub struct EocReport {
    /// `s_k = -log(q_{k+1}/q_k) / log(N_{k+1}/N_k)`, positive for decay.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log q` against `log N` over the tail window;
    /// negative for decay.
    pub tail_slope: Option<f64>,
}

/// Rates of `(N_k, q_k)` pairs. Non-positive quantities are skipped.
pub fn eoc_points(points: &[(usize, f64)], tail: usize) -> EocReport {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|&(n, q)| {
            if q > 0.0 && q.is_finite() && n > 0 {
                Some(((n as f64).ln(), q.ln()))
            } else {
                warn!("skipping non-positive quantity {q} at N={n}");
                None
            }
        })
        .collect();
    let pairwise = pts
        .windows(2)
        .filter(|w| w[1].0 != w[0].0)
        .map(|w| -(w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let start = pts.len().saturating_sub(tail.max(2));
    let tail_slope = least_squares_slope(&pts[start..]);
    EocReport { pairwise, tail_slope }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

pub fn eoc(history: &AdaptiveHistory, quantity: Quantity, tail: usize) -> EocReport {
    let pts: Vec<(usize, f64)> = history
        .records
        .iter()
        .filter_map(|r| quantity.of(r).map(|q| (r.n_dof, q)))
        .collect();
    eoc_points(&pts, tail)
}

/// Successive ratios `Q_{k+1}/Q_k` of `(error + osc)` and of `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub err: Vec<f64>,
    pub eta: Vec<f64>,
    pub excluded: usize,
}

impl ContractionReport {
    /// Fraction of post-window error ratios below one.
    pub fn err_fraction_below_one(&self) -> Option<f64> {
        fraction_below_one(self.err.get(self.excluded..)?)
    }

    pub fn eta_fraction_below_one(&self) -> Option<f64> {
        fraction_below_one(self.eta.get(self.excluded..)?)
    }
}

fn fraction_below_one(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().filter(|&&x| x < 1.0).count() as f64 / v.len() as f64)
    }
}

pub fn ratios(q: &[f64]) -> Vec<f64> {
    q.windows(2).map(|w| w[1] / w[0]).collect()
}

pub fn contraction_report(history: &AdaptiveHistory, excluded: usize) -> ContractionReport {
    let errs: Vec<f64> = history
        .records
        .iter()
        .map_while(|r| r.combined_error().map(|e| e + r.osc))
        .collect();
    let etas: Vec<f64> = history.records.iter().map(|r| r.eta).collect();
    ContractionReport {
        err: ratios(&errs),
        eta: ratios(&etas),
        excluded,
    }
}

/// State handed to the observer after each ESTIMATE step.
pub struct IterationView<'a> {
    pub mesh: &'a Mesh,
    pub solution: &'a DiscreteSolution,
    pub indicators: &'a IndicatorSet,
    pub record: &'a IterationRecord,
}

/// Final state of an adaptive run.
pub struct AdaptiveRun {
    pub history: AdaptiveHistory,
    pub mesh: Mesh,
    pub solution: Option<DiscreteSolution>,
}

/// SOLVE → ESTIMATE → MARK → REFINE on the unit square.
pub fn afem_loop(spec: &ProblemSpec, opts: &AdaptOptions, solver: &SolverOptions) -> Result<AdaptiveRun> {
    afem_loop_with(spec, opts, solver, Mesh::unit_square(opts.initial_subdivisions)?, |_| Ok(()))
}

/// [`afem_loop`] from a given mesh, calling `observer` after every estimate.
/// A solver failure ends the loop with `history.failed` set; errors from the
/// observer or from refinement are returned.
pub fn afem_loop_with(
    spec: &ProblemSpec,
    opts: &AdaptOptions,
    solver: &SolverOptions,
    initial: Mesh,
    mut observer: impl FnMut(&IterationView<'_>) -> Result<()>,
) -> Result<AdaptiveRun> {
    opts.validate()?;
    solver.validate()?;
    spec.validate()?;
    let mut history = AdaptiveHistory::default();
    let mut mesh = initial;
    let mut warm: Option<crate::fe::DiscreteField> = None;
    let mut k = 0;
    loop {
        let start = Instant::now();
        let sol = match solve_ocp(&mesh, spec, solver.clone(), warm.as_ref()) {
            Ok(s) => s,
            Err(e) => {
                warn!("solve failed at iteration {k}: {e}");
                history.failed = Some(e.to_string());
                return Ok(AdaptiveRun {
                    history,
                    mesh,
                    solution: None,
                });
            }
        };
        let ind = total_indicators(&mesh, &sol, spec, &opts.estimator)?;
        debug_assert!(ind.check().is_ok());
        let (err_u, err_y, err_p) = match &spec.exact {
            Some(triple) => {
                let (a, b, c) = exact_errors(&mesh, &sol, triple, spec, opts.estimator.quad_order)?;
                (Some(a), Some(b), Some(c))
            }
            None => (None, None, None),
        };
        let n_dof = mesh.num_vertices();
        let stop = opts.max_dofs.is_some_and(|m| n_dof >= m)
            || opts.max_iters.is_some_and(|m| k + 1 >= m)
            || opts.eta_tol.is_some_and(|t| ind.eta() <= t);
        let marking = if stop {
            None
        } else if opts.is_uniform() {
            Some(Marking {
                marked: ElementSet::all(&mesh),
                converged: false,
            })
        } else {
            Some(doerfler_mark(&ind.eta2_all(), opts.theta)?)
        };
        let marked = marking.as_ref().map_or(0, |m| m.marked.len());
        history.push(IterationRecord {
            k,
            n_elem: mesh.num_elements(),
            n_dof,
            eta: ind.eta(),
            eta_y: ind.eta_y(),
            eta_p: ind.eta_p(),
            osc: ind.osc(),
            err_u,
            err_y,
            err_p,
            grading: mesh.grading_norm(),
            marked,
            ratio_err: None,
            ratio_eta: None,
            seconds: 0.0,
        })?;
        let rec = history.records.last_mut().expect("just pushed");
        rec.seconds = start.elapsed().as_secs_f64();
        info!(
            "k={k} N={n_dof} eta={:.4e} osc={:.4e} marked={marked} iters={}",
            rec.eta, rec.osc, sol.iterations
        );
        observer(&IterationView {
            mesh: &mesh,
            solution: &sol,
            indicators: &ind,
            record: rec,
        })?;
        let marking = match marking {
            Some(m) if !m.converged => m,
            _ => {
                return Ok(AdaptiveRun {
                    history,
                    mesh,
                    solution: Some(sol),
                })
            }
        };
        let fine = if opts.is_uniform() {
            mesh.refine_uniform(opts.uniform_bisections)?
        } else {
            mesh.refine(&marking.marked, opts.r)?.0
        };
        warm = Some(fine.prolongate(&sol.p)?);
        mesh = fine;
        k += 1;
    }
}

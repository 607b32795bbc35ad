use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Constitutive, FieldF, GreenOperator, LaminateStats, Microstructure, Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::material::Material;
use crate::tensor::{det3, sym_eig3, Tensor2, Vec3};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    /// Fraction of the target load reached by this step.
    pub load_factor: f64,
    pub f_bar: [[f64; 3]; 3],
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    pub residuals: Vec<f64>,
    /// Bisections needed before this step was accepted.
    pub bisections: usize,
    pub alpha: Option<f64>,
    pub laminate: LaminateStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub steps_s: Vec<f64>,
    pub total_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps: Vec<StepReport>,
    /// Kept apart so the rest of the report is reproducible.
    pub timings: Timings,
}

impl ConvergenceReport {
    pub fn outer_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.outer_iterations).sum()
    }

    pub fn cg_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.cg_iterations).sum()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.residuals.last().copied())
    }
}

/// Converged cell state.
#[derive(Clone, Debug)]
pub struct Solution {
    pub f: FieldF,
    pub p: FieldF,
    pub p_mean: Tensor2,
    /// Jump-vector warm starts, one per composite material point.
    pub warm: Vec<Vec3>,
    pub report: ConvergenceReport,
}

pub fn tensor_rows(t: &Tensor2) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| t[(i, j)]))
}

fn sphere_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut dirs: Vec<Vec3> = (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) * 2.0 / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    dirs.extend([Vec3::x(), Vec3::y(), Vec3::z()]);
    dirs
}

/// Bounds of the acoustic-tensor spectrum of `mat` at `f` over a set of
/// directions.
pub fn acoustic_bounds(mat: &Material, f: &Tensor2) -> Result<(f64, f64)> {
    let (_, a) = mat.eval(f)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in sphere_directions(128) {
        let q = Tensor2::from_fn(|i, k| {
            let mut s = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    s += a[(3 * i + j, 3 * k + l)] * n[j] * n[l];
                }
            }
            s
        });
        let (ev, _) = sym_eig3(&(0.5 * (q + q.transpose())))?;
        lo = lo.min(ev[0]);
        hi = hi.max(ev[2]);
    }
    Ok((lo, hi))
}

/// Reference stiffness `α = (a_min + a_max) / 2` over both phases at `F̄`.
pub fn reference_alpha(micro: &Microstructure, fbar: &Tensor2) -> Result<f64> {
    let (l1, h1) = acoustic_bounds(micro.plus(), fbar)?;
    let (l2, h2) = acoustic_bounds(micro.minus(), fbar)?;
    Ok(0.5 * (l1.min(l2).max(0.0) + h1.max(h2)))
}

/// One load level of the periodic cell problem.
pub struct CellProblem<'a> {
    micro: &'a Microstructure,
    cfg: SolverConfig,
    green: GreenOperator,
    law: Constitutive<'a>,
    floor: f64,
}

impl<'a> CellProblem<'a> {
    pub fn new(micro: &'a Microstructure, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            micro,
            cfg: cfg.clone(),
            green: GreenOperator::new(cfg.green, *micro.grid()),
            law: Constitutive::new(micro, cfg.material_eval, cfg.laminate.clone()),
            floor: cfg.stress_floor * micro.modulus_scale(),
        })
    }

    pub fn constitutive(&self) -> &Constitutive<'a> {
        &self.law
    }

    pub fn green(&self) -> &GreenOperator {
        &self.green
    }

    pub fn warm_len(&self) -> usize {
        self.law.warm_len()
    }

    /// Returns the residual and `Γ⁰P` (with `α = 1`).
    fn residual_of(&self, p: &FieldF) -> (f64, FieldF) {
        let pbar = p.mean().norm();
        let mut q = p.clone();
        self.green.project(&mut q);
        (q.rms() / pbar.max(self.floor), q)
    }

    pub fn equilibrium_residual(&self, p: &FieldF) -> f64 {
        self.residual_of(p).0
    }

    pub fn solve_step(&self, fbar: &Tensor2, f: &mut FieldF, warm: &mut [Vec3]) -> Result<StepReport> {
        match self.cfg.scheme {
            Scheme::Basic => self.basic_scheme(fbar, f, warm),
            Scheme::NewtonCg => self.newton_cg(fbar, f, warm),
        }
    }

    /// Fixed point `F ← F − Γ⁰ P(F) / α` with the mean pinned to `F̄`.
    pub fn basic_scheme(&self, fbar: &Tensor2, f: &mut FieldF, warm: &mut [Vec3]) -> Result<StepReport> {
        let alpha = match self.cfg.alpha {
            Some(a) => a,
            None => reference_alpha(self.micro, fbar)?,
        };
        let mut rep = StepReport { f_bar: tensor_rows(fbar), alpha: Some(alpha), ..Default::default() };
        f.set_mean(fbar);
        let mut p = FieldF::zeros(f.dims());
        for _ in 0..self.cfg.max_outer {
            rep.laminate = self.law.stress(f, warm, &mut p, None)?;
            let (r, q) = self.residual_of(&p);
            rep.residuals.push(r);
            rep.outer_iterations += 1;
            if r <= self.cfg.tol_equilibrium {
                return Ok(rep);
            }
            if !r.is_finite() {
                break;
            }
            f.axpy(-1.0 / alpha, &q);
            f.set_mean(fbar);
        }
        Err(Error::NoConvergence { iterations: rep.outer_iterations, residual: rep.residuals.last().copied().unwrap_or(f64::NAN) })
    }

    /// Newton's method on `Γ⁰P(F) = 0`; each linearized cell problem is
    /// solved by CG on the compatible fields, followed by step halving until
    /// the residual does not increase.
    pub fn newton_cg(&self, fbar: &Tensor2, f: &mut FieldF, warm: &mut [Vec3]) -> Result<StepReport> {
        let mut rep = StepReport { f_bar: tensor_rows(fbar), ..Default::default() };
        f.set_mean(fbar);
        let dims = f.dims();
        let mut p = FieldF::zeros(dims);
        let mut tan = vec![0.0; self.law.tangent_len()];
        rep.laminate = self.law.stress(f, warm, &mut p, Some(&mut tan))?;
        let (mut res, mut q) = self.residual_of(&p);
        rep.residuals.push(res);
        rep.outer_iterations = 1;
        let n = f.cells() as f64;
        let fail = |rep: &StepReport| Error::NoConvergence { iterations: rep.outer_iterations, residual: *rep.residuals.last().unwrap() };
        while res > self.cfg.tol_equilibrium {
            if rep.outer_iterations >= self.cfg.max_outer || !res.is_finite() {
                return Err(fail(&rep));
            }
            // Solve Γ(A : x) = −ΓP on compatible fields.
            q.scale(-1.0);
            let scale = p.mean().norm().max(self.floor);
            let stop = (self.cfg.cg_tol * q.norm_squared().sqrt()).max(0.1 * self.cfg.tol_equilibrium * scale * n.sqrt());
            let x = self.cg(&tan, &q, stop, &mut rep.cg_iterations)?;
            let mut s = 1.0;
            let mut accepted = false;
            let mut trial = FieldF::zeros(dims);
            for _ in 0..=self.cfg.max_halvings {
                trial.copy_from(f);
                trial.axpy(s, &x);
                trial.set_mean(fbar);
                let mut w = warm.to_vec();
                match self.law.stress(&trial, &mut w, &mut p, None) {
                    Ok(_) => {
                        let (r, qq) = self.residual_of(&p);
                        if r <= res {
                            res = r;
                            q = qq;
                            warm.copy_from_slice(&w);
                            accepted = true;
                            break;
                        }
                    }
                    Err(Error::InadmissibleDeformation { .. }) => {}
                    Err(e) => return Err(e),
                }
                s *= 0.5;
            }
            if !accepted {
                return Err(fail(&rep));
            }
            f.copy_from(&trial);
            rep.laminate = self.law.stress(f, warm, &mut p, Some(&mut tan))?;
            rep.residuals.push(res);
            rep.outer_iterations += 1;
        }
        Ok(rep)
    }

    fn cg(&self, tan: &[f64], b: &FieldF, stop: f64, count: &mut usize) -> Result<FieldF> {
        let dims = b.dims();
        let mut x = FieldF::zeros(dims);
        let mut r = b.clone();
        let mut d = b.clone();
        let mut kd = FieldF::zeros(dims);
        let mut rr = r.norm_squared();
        for it in 1..=self.cfg.cg_max {
            if rr.sqrt() <= stop {
                break;
            }
            self.law.apply_tangent(tan, &d, &mut kd);
            self.green.project(&mut kd);
            let dkd = d.dot(&kd);
            if !(dkd > 0.0) {
                return Err(Error::CgBreakdown { iteration: it });
            }
            let a = rr / dkd;
            x.axpy(a, &d);
            r.axpy(-a, &kd);
            let rr_new = r.norm_squared();
            *count += 1;
            d.xpay(&r, rr_new / rr);
            rr = rr_new;
        }
        Ok(x)
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoConvergence { .. } | Error::InadmissibleDeformation { .. } | Error::CgBreakdown { .. } | Error::LaminateNoConvergence(_)
    )
}

/// Ramps `F̄` linearly from `I` to `target` in `cfg.load_steps` steps,
/// halving a step that fails (at most `cfg.max_bisections` times per step).
pub fn solve(micro: &Microstructure, target: &Tensor2, cfg: &SolverConfig) -> Result<Solution> {
    let det = det3(target);
    if !(det > 0.0) {
        return Err(Error::InadmissibleMacroState { det });
    }
    let start = Instant::now();
    let problem = CellProblem::new(micro, cfg)?;
    let dims = micro.grid().dims;
    let mut f = FieldF::uniform(dims, &Tensor2::identity());
    let mut warm = vec![Vec3::zeros(); problem.warm_len()];
    let mut report = ConvergenceReport::default();
    let mut t = 0.0;
    let mut dt = 1.0 / cfg.load_steps as f64;
    let load = |t: f64| Tensor2::identity() + (target - Tensor2::identity()) * t;
    while t < 1.0 - 1e-12 {
        let mut bisections = 0;
        loop {
            let t_new = if t + dt > 1.0 - 1e-12 { 1.0 } else { t + dt };
            let fbar = load(t_new);
            let step_start = Instant::now();
            let mut f_try = f.clone();
            f_try.shift(&(fbar - load(t)));
            let mut w_try = warm.clone();
            let outcome = problem.solve_step(&fbar, &mut f_try, &mut w_try).and_then(|rep| {
                if rep.laminate.failures > 0 {
                    Err(Error::NoConvergence { iterations: rep.outer_iterations, residual: f64::NAN })
                } else {
                    Ok(rep)
                }
            });
            match outcome {
                Ok(mut rep) => {
                    rep.step = report.steps.len() + 1;
                    rep.load_factor = t_new;
                    rep.bisections = bisections;
                    log::info!("step {} (load {:.4}): {} outer, {} CG iterations", rep.step, t_new, rep.outer_iterations, rep.cg_iterations);
                    report.steps.push(rep);
                    report.timings.steps_s.push(step_start.elapsed().as_secs_f64());
                    f = f_try;
                    warm = w_try;
                    t = t_new;
                    break;
                }
                Err(e) if recoverable(&e) && bisections < cfg.max_bisections => {
                    log::warn!("load step to {t_new:.4} failed ({e}); bisecting");
                    bisections += 1;
                    dt *= 0.5;
                }
                Err(e) if recoverable(&e) => {
                    return Err(Error::LoadPathFailed { step: report.steps.len() + 1, bisections, reason: e.to_string() });
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut p = FieldF::zeros(dims);
    problem.constitutive().stress(&f, &mut warm, &mut p, None)?;
    let p_mean = p.mean();
    report.timings.total_s = start.elapsed().as_secs_f64();
    Ok(Solution { f, p, p_mean, warm, report })
}

/// Single-step basic scheme from a homogeneous start.
pub fn basic_scheme(micro: &Microstructure, fbar: &Tensor2, cfg: &SolverConfig) -> Result<Solution> {
    solve(micro, fbar, &SolverConfig { scheme: Scheme::Basic, load_steps: 1, ..cfg.clone() })
}

/// Single-step Newton-CG from a homogeneous start.
pub fn newton_cg(micro: &Microstructure, fbar: &Tensor2, cfg: &SolverConfig) -> Result<Solution> {
    solve(micro, fbar, &SolverConfig { scheme: Scheme::NewtonCg, load_steps: 1, ..cfg.clone() })
}

//! Run configuration, mesh sources and the command implementations behind the CLI.

pub mod generators;
pub mod manufactured;

use std::path::PathBuf;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddr::DdrComplex;
use crate::error::{DdrError, Result};
use crate::forms::PolyForm;
use crate::hodge::{self, Bc, ProblemData, SolveReport};
use crate::linalg::{csr_to_dense, norm};
use crate::mesh::{load_mesh, CellRef, MeshComplex};
use crate::product::{global_mass, local_product};
use crate::spaces::{basis_full, dim_trimmed};

pub use generators::generate;

/// Where a mesh comes from: a JSON file or a generator `gen:<kind>:<n>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeshSource {
    File(PathBuf),
    Generator { kind: String, n: usize },
}

impl std::str::FromStr for MeshSource {
    type Err = DdrError;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("gen:") {
            let (kind, n) = match rest.rsplit_once(':') {
                Some((k, n)) => {
                    (k, n.parse::<usize>().map_err(|_| DdrError::Parse(format!("bad mesh resolution in '{s}'")))?)
                }
                None => (rest, 2),
            };
            if !generators::KINDS.contains(&kind) {
                return Err(DdrError::Parse(format!("unknown mesh generator '{kind}'")));
            }
            return Ok(MeshSource::Generator { kind: kind.to_string(), n });
        }
        Ok(MeshSource::File(PathBuf::from(s)))
    }
}

impl MeshSource {
    /// Mesh at refinement `level`; generators double `n` per level.
    pub fn mesh(&self, level: usize, seed: u64) -> Result<MeshComplex> {
        match self {
            MeshSource::File(p) if level == 0 => load_mesh(p),
            MeshSource::File(_) => Err(DdrError::Invalid("file meshes cannot be refined".into())),
            MeshSource::Generator { kind, n } => generate(kind, n << level, seed),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub k: usize,
    pub r: usize,
    pub tau: f64,
    /// Quadrature degree for sampling smooth data; `None` picks `2r + 4`.
    pub quad_order: Option<usize>,
    pub levels: usize,
    pub bc: Bc,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(mesh: MeshSource, k: usize, r: usize) -> Self {
        RunConfig { mesh, k, r, tau: 1.0, quad_order: None, levels: 3, bc: Bc::Natural, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r > 3 {
            return Err(DdrError::OutOfRange(format!("order r = {} not in 0..=3", self.r)));
        }
        if self.levels == 0 {
            return Err(DdrError::OutOfRange("at least one refinement level is needed".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(DdrError::OutOfRange("stabilization parameter must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> usize {
        self.quad_order.unwrap_or(2 * self.r + 4)
    }
}

/// Outcome of one named invariant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub config: RunConfig,
    pub checks: Vec<CheckResult>,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn push(checks: &mut Vec<CheckResult>, name: &str, value: f64, tolerance: f64, passed: bool) {
    checks.push(CheckResult { name: name.to_string(), passed, value, tolerance });
}

/// Random ambient polynomial k-form of degree `deg`.
pub fn random_form(n: usize, k: usize, deg: usize, rng: &mut ChaCha8Rng) -> Result<PolyForm> {
    let mut u = PolyForm::zero(n, k, deg);
    for b in basis_full(n, deg, k)?.forms {
        u.axpy(rng.random_range(-1.0..1.0), &b);
    }
    Ok(u)
}

/// Exact `int_T a . b` of two ambient polynomial forms over a top cell.
pub fn exact_inner(mesh: &MeshComplex, t: CellRef, a: &PolyForm, b: &PolyForm) -> f64 {
    let deg = a.deg() + b.deg();
    let mut acc = 0.0;
    for s in mesh.simplex_decomposition(t) {
        acc += crate::integrate::integrate_simplex(s, deg, |x| {
            let p = a.eval(x.as_slice());
            let q = b.eval(x.as_slice());
            p.iter().zip(&q).map(|(u, v)| u * v).sum()
        });
    }
    acc
}

/// Run the invariant suite on the first mesh of the configuration.
pub fn cmd_check(cfg: &RunConfig) -> Result<CheckReport> {
    cfg.validate()?;
    let mesh = cfg.mesh.mesh(0, cfg.seed)?;
    let n = mesh.ambient_dim();
    let top = mesh.top_dim();
    if cfg.k > top {
        return Err(DdrError::OutOfRange(format!("k = {} exceeds mesh dimension {top}", cfg.k)));
    }
    let cx = DdrComplex::new(&mesh, cfg.r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();
    let k = cfg.k;
    let r = cfg.r;

    // Dimension counts.
    let mut ok = true;
    for m in 0..=top {
        for i in 0..mesh.count(m) {
            let c = CellRef::new(m, i);
            let want = if m < k {
                0
            } else if r == 0 {
                usize::from(m == k)
            } else {
                dim_trimmed(m, r, m - k)
            };
            ok &= cx.layout(k).count(c) == want && cx.space(k).face(c).dof_basis.len() == want;
        }
    }
    push(&mut checks, "dimension-counts", if ok { 0.0 } else { 1.0 }, 0.0, ok);

    // Complex property.
    if k + 2 <= top {
        let dd = cx.discrete_d(k + 1)? * cx.discrete_d(k)?;
        let scale = csr_to_dense(cx.discrete_d(k)?).abs().max() * csr_to_dense(cx.discrete_d(k + 1)?).abs().max();
        let v = dd.values().iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale.max(1.0);
        push(&mut checks, "complex-property", v, 1e-12, v <= 1e-12);
    }

    // Commuting interpolation.
    if k < top {
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let p = random_form(n, k, r + 1, &mut rng)?;
            let a = cx.interpolate_poly(k + 1, &p.d())?;
            let ip = cx.interpolate_poly(k, &p)?;
            let b = crate::linalg::spmv(cx.discrete_d(k)?, &ip);
            let e: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            worst = worst.max(norm(&e) / norm(&a).max(1e-300));
        }
        push(&mut checks, "commuting-interpolation", worst, 1e-12, worst <= 1e-12);
    }

    // Consistency of the discrete product on polynomials.
    let mass = global_mass(&cx, k, cfg.tau)?;
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let p = random_form(n, k, r, &mut rng)?;
        let q = random_form(n, k, r + 1, &mut rng)?;
        let ip = cx.interpolate_poly(k, &p)?;
        let iq = cx.interpolate_poly(k, &q)?;
        let h: f64 = ip.iter().zip(crate::linalg::spmv(&mass, &iq)).map(|(a, b)| a * b).sum();
        let mut exact = 0.0;
        let mut np = 0.0;
        let mut nq = 0.0;
        for i in 0..mesh.count(top) {
            let t = CellRef::new(top, i);
            exact += exact_inner(&mesh, t, &p, &q);
            np += exact_inner(&mesh, t, &p, &p);
            nq += exact_inner(&mesh, t, &q, &q);
        }
        worst = worst.max((h - exact).abs() / (np * nq).sqrt().max(1e-300));
    }
    push(&mut checks, "consistency", worst, 1e-10, worst <= 1e-10);

    // Coercivity: local products are positive definite.
    let mut min_ratio = f64::INFINITY;
    for i in 0..mesh.count(top) {
        let lp = local_product(&cx, k, CellRef::new(top, i), cfg.tau)?;
        let ev = lp.matrix().symmetric_eigenvalues();
        let max = ev.max();
        let min = ev.min();
        if max > 0.0 {
            min_ratio = min_ratio.min(min / max);
        }
    }
    push(&mut checks, "coercivity", min_ratio, 1e-12, min_ratio > 1e-12);

    // Cohomology agrees with the cellular complex.
    match (hodge::betti(&cx), hodge::cellular_betti(&mesh, false)) {
        (Ok(a), Ok(b)) => push(&mut checks, "cohomology", if a == b { 0.0 } else { 1.0 }, 0.0, a == b),
        _ => push(&mut checks, "cohomology", 1.0, 0.0, false),
    }

    let failures = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    Ok(CheckReport { config: cfg.clone(), checks, failures })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshSummary {
    pub ambient_dim: usize,
    pub counts: Vec<usize>,
    pub mesh_size: f64,
    pub betti: Vec<usize>,
}

pub fn cmd_check_mesh(mesh: &MeshComplex) -> Result<MeshSummary> {
    Ok(MeshSummary {
        ambient_dim: mesh.ambient_dim(),
        counts: mesh.counts(),
        mesh_size: mesh.mesh_size(),
        betti: hodge::cellular_betti(mesh, false)?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub err_u: f64,
    pub err_p: f64,
    pub rate_u: Option<f64>,
    pub rate_p: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub reports: Vec<SolveReport>,
    /// Least-squares slope of `log err` against `log h`.
    pub rate_u: Option<f64>,
    pub rate_p: Option<f64>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,dofs,err_u,err_p,rate_u,rate_p\n");
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6e},{},{:.6e},{:.6e},{},{}\n",
                r.level,
                r.h,
                r.dofs,
                r.err_u,
                r.err_p,
                f(r.rate_u),
                f(r.rate_p)
            ));
        }
        s
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn ls_rate(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solve one manufactured problem on one mesh and report the errors.
pub fn solve_manufactured(mesh: &MeshComplex, cfg: &RunConfig) -> Result<SolveReport> {
    let n = mesh.ambient_dim();
    let k = cfg.k;
    let q = cfg.quadrature();
    let man = manufactured::smooth(n, k, cfg.bc)?;
    let cx = DdrComplex::new(mesh, cfg.r)?;
    let load = cx.interpolate_fn(k, &man.f, q)?;
    let iu = cx.interpolate_fn(k, &man.u, q)?;
    let ip = match &man.p {
        Some(p) => Some(cx.interpolate_fn(k - 1, p, q)?),
        None => None,
    };
    let data = ProblemData { k, bc: cfg.bc, tau: cfg.tau, load: &load, lift_u: Some(&iu), lift_p: ip.as_deref() };
    let sys = hodge::assemble(&cx, &data)?;
    let sol = hodge::solve(&sys)?;
    let err_u = hodge::reconstruction_error(&cx, k, &sol.u, &man.u, q)?;
    let err_u_discrete = hodge::discrete_norm_error(&sys.mass_u, &iu, &sol.u);
    let (err_p, err_p_discrete) = match (&man.p, &ip, &sys.mass_p) {
        (Some(p), Some(ipv), Some(mp)) => (
            hodge::reconstruction_error(&cx, k - 1, &sol.p, p, q)?,
            hodge::discrete_norm_error(mp, ipv, &sol.p),
        ),
        _ => (0.0, 0.0),
    };
    Ok(SolveReport {
        k,
        r: cfg.r,
        h: mesh.mesh_size(),
        dofs: sys.matrix.nrows(),
        residual: sol.residual,
        err_u,
        err_p,
        err_u_discrete,
        err_p_discrete,
    })
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for level in 0..cfg.levels {
        let mesh = cfg.mesh.mesh(level, cfg.seed)?;
        reports.push(solve_manufactured(&mesh, cfg)?);
    }
    let mut rows = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let rate = |a: f64, b: f64| -> Option<f64> {
            if i == 0 || a <= 0.0 || b <= 0.0 {
                return None;
            }
            Some((b / a).ln() / (r.h / reports[i - 1].h).ln())
        };
        let rate_u = rate(reports.get(i.wrapping_sub(1)).map_or(0.0, |p| p.err_u), r.err_u);
        let rate_p = rate(reports.get(i.wrapping_sub(1)).map_or(0.0, |p| p.err_p), r.err_p);
        rows.push(ConvergenceRow { level: i, h: r.h, dofs: r.dofs, err_u: r.err_u, err_p: r.err_p, rate_u, rate_p });
    }
    let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
    let eu: Vec<f64> = reports.iter().map(|r| r.err_u).collect();
    let ep: Vec<f64> = reports.iter().map(|r| r.err_p).collect();
    Ok(ConvergenceTable { rows, rate_u: ls_rate(&hs, &eu), rate_p: ls_rate(&hs, &ep), reports })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub r: usize,
    pub levels: Vec<Vec<usize>>,
    pub betti: Vec<usize>,
}

pub fn cmd_cohomology(cfg: &RunConfig) -> Result<CohomologyReport> {
    cfg.validate()?;
    let mut levels = Vec::new();
    for level in 0..cfg.levels {
        let mesh = cfg.mesh.mesh(level, cfg.seed)?;
        let cx = DdrComplex::new(&mesh, cfg.r)?;
        levels.push(hodge::betti(&cx)?);
    }
    if levels.windows(2).any(|w| w[0] != w[1]) {
        return Err(DdrError::Invariant {
            cell: CellRef::new(0, 0),
            what: "Betti numbers change under refinement".into(),
        });
    }
    Ok(CohomologyReport { r: cfg.r, betti: levels[0].clone(), levels })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoincareReport {
    pub k: usize,
    pub r: usize,
    pub h: Vec<f64>,
    pub constants: Vec<f64>,
    /// Largest relative change between consecutive levels.
    pub max_variation: f64,
}

pub fn cmd_poincare(cfg: &RunConfig) -> Result<PoincareReport> {
    cfg.validate()?;
    let mut h = Vec::new();
    let mut constants = Vec::new();
    for level in 0..cfg.levels {
        let mesh = cfg.mesh.mesh(level, cfg.seed)?;
        let cx = DdrComplex::new(&mesh, cfg.r)?;
        h.push(mesh.mesh_size());
        constants.push(hodge::poincare_constant(&cx, cfg.k, cfg.tau, cfg.bc)?);
    }
    let max_variation = constants.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).fold(0.0, f64::max);
    Ok(PoincareReport { k: cfg.k, r: cfg.r, h, constants, max_variation })
}

/// Sampler for an ambient polynomial form.
pub fn poly_sampler(u: PolyForm) -> impl Fn(&DVector<f64>) -> Vec<f64> + Sync {
    move |x| u.eval(x.as_slice())
}

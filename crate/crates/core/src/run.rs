//! Command dispatch for the batch front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::checkpoint;
use crate::config::{Command, NuSource, RunConfig};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, coulomb_inner, ChargeDensity, FourierField, MomentumLattice};
use crate::output::{write_json, Table};
use crate::profiles;
use crate::pv::{self, EMPotential};
use crate::renorm;
use crate::scf::{self, ScfResult};
use crate::vacuum;

/// Appends one JSON object per line to `log.jsonl`.
pub struct Logger {
    file: Option<fs::File>,
}

impl Logger {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("log.jsonl"))?;
        Ok(Self { file: Some(file) })
    }

    pub fn disabled() -> Self {
        Self { file: None }
    }

    pub fn event(&mut self, event: &str, fields: Value) {
        let Some(f) = self.file.as_mut() else { return };
        let mut obj = match fields {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        obj.insert("event".into(), json!(event));
        // logging must never mask the actual outcome
        let _ = writeln!(f, "{}", Value::Object(obj));
    }

    pub fn error(&mut self, err: &Error) {
        self.event(
            "error",
            json!({"code": err.code_name(), "exit_code": err.exit_code(), "message": err.to_string()}),
        );
    }
}

/// Files written by a successful run, relative to the output directory.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
}

struct Sink<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Sink<'_> {
    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        write_json(&self.dir.join(name), v)?;
        self.files.push(name.into());
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<()> {
        fs::write(self.dir.join(name), s)?;
        self.files.push(name.into());
        Ok(())
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.dir.join(name))?;
        self.files.push(name.into());
        Ok(())
    }
}

pub fn external_density(cfg: &RunConfig, lat: &MomentumLattice) -> Result<ChargeDensity> {
    let p = lat.params();
    match &cfg.nu {
        NuSource::Zero => Ok(FourierField::zeros(p)),
        NuSource::Gaussian { charge, width } => Ok(profiles::gaussian(p, *charge, *width)),
        NuSource::PointPair { mode, amplitude } => profiles::point_pair(p, *mode, *amplitude),
        NuSource::File(path) => {
            let nu = FourierField::from_json(&fs::read_to_string(path)?)?;
            if nu.params() != p {
                return Err(Error::Validation {
                    key: "nu.file".into(),
                    message: format!("density lattice {:?} differs from the configured {:?}", nu.params(), p),
                });
            }
            if !nu.is_real(1e-12 * nu.max_abs().max(f64::MIN_POSITIVE)) {
                return Err(Error::Validation {
                    key: "nu.file".into(),
                    message: "density is not real (nu_-q != conj nu_q)".into(),
                });
            }
            Ok(nu)
        }
    }
}

/// Executes the configured command, writing its outputs into `out`.
pub fn run(cfg: &RunConfig, out: &Path, resume: Option<&Path>, log: &mut Logger) -> Result<RunSummary> {
    fs::create_dir_all(out)?;
    log.event("start", json!({"command": cfg.command.name()}));
    let mut sink = Sink {
        dir: out,
        files: Vec::new(),
    };
    if resume.is_some() && !matches!(cfg.command, Command::Solve | Command::SolveCharged) {
        return Err(Error::Validation {
            key: "--resume".into(),
            message: format!("only solve and solve-charged accept a checkpoint, not {}", cfg.command.name()),
        });
    }
    match cfg.command {
        Command::Solve | Command::SolveCharged => solve(cfg, resume, &mut sink, log)?,
        Command::Renorm => renorm_cmd(cfg, &mut sink, log)?,
        Command::PvSaddle => pv_cmd(cfg, &mut sink, log)?,
        Command::Expand => expand_cmd(cfg, &mut sink, log)?,
    }
    log.event("done", json!({"files": sink.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>()}));
    Ok(RunSummary { files: sink.files })
}

fn envelope(cfg: &RunConfig, result: Value) -> Value {
    json!({
        "command": cfg.command.name(),
        "config": cfg.to_json_value(),
        "result": result,
    })
}

fn scf_summary(r: &ScfResult, nu: &ChargeDensity, alpha: f64) -> Value {
    let d_nu = coulomb_inner(nu, nu);
    json!({
        "energy": r.energy,
        "iterations": r.iterations,
        "residual": r.final_residual(),
        "residual_history": r.residual_history,
        "mu": r.mu,
        "degenerate": r.degenerate,
        "charge": r.state.charge(),
        "electron_charge": r.electron_charge(),
        "positron_charge": r.positron_charge(),
        "relative_trace": vacuum::relative_trace(&r.state),
        "coulomb_self_energy_nu": d_nu,
        "energy_lower_bound": -0.5 * alpha * d_nu,
        "num_modes": r.state.lattice().num_modes(),
    })
}

fn solve(cfg: &RunConfig, resume: Option<&Path>, sink: &mut Sink<'_>, log: &mut Logger) -> Result<()> {
    let p = cfg.lattice;
    let lat = build_lattice(p.box_length, p.max_index, p.cutoff)?;
    let nu = external_density(cfg, &lat)?;
    let rho0 = match resume {
        Some(path) => {
            let (state, header) = checkpoint::read_checkpoint(path)?;
            if state.lattice().params() != lat.params() || state.lattice().modes() != lat.modes() {
                return Err(Error::Checkpoint("checkpoint lattice differs from the configured lattice".into()));
            }
            if header.mass != cfg.mass {
                return Err(Error::Checkpoint(format!(
                    "checkpoint mass {} differs from configured {}",
                    header.mass, cfg.mass
                )));
            }
            log.event("resume", json!({"checkpoint": path.display().to_string()}));
            Some(vacuum::density(&state))
        }
        None => None,
    };
    let r = match cfg.command {
        Command::SolveCharged => {
            scf::scf_solve_charged_from(&nu, cfg.alpha, cfg.target_charge, &cfg.scf, &lat, cfg.mass, rho0.as_ref())?
        }
        _ => scf::scf_solve_from(&nu, cfg.alpha, &cfg.scf, &lat, cfg.mass, rho0.as_ref())?,
    };
    log.event(
        "converged",
        json!({"iterations": r.iterations, "residual": r.final_residual(), "energy": r.energy}),
    );
    let mut res = scf_summary(&r, &nu, cfg.alpha);
    res["resumed"] = json!(resume.is_some());
    sink.json("result.json", &envelope(cfg, res))?;
    let mut hist = Table::new(&["iteration", "residual"]);
    for (i, x) in r.residual_history.iter().enumerate() {
        hist.push(vec![(i + 1) as f64, *x]);
    }
    sink.table("residuals.csv", &hist)?;
    sink.text("density.json", &r.density.to_json())?;
    if cfg.checkpoint {
        let meta = json!({
            "iterations": r.iterations,
            "residual": r.final_residual(),
            "energy": r.energy,
            "mu": r.mu,
        });
        checkpoint::write_checkpoint(&sink.dir.join("checkpoint.bin"), &r.state, meta)?;
        sink.files.push("checkpoint.bin".into());
    }
    Ok(())
}

fn renorm_cmd(cfg: &RunConfig, sink: &mut Sink<'_>, log: &mut Logger) -> Result<()> {
    let s = &cfg.renorm;
    let mut b_rows = Vec::new();
    for &r in &s.ratios {
        let q = renorm::b_constant_quadrature(r)?;
        b_rows.push(json!({
            "ratio": r,
            "B": q.value,
            "B_asymptotic": renorm::b_asymptotic(r),
            "quadrature_error": q.error,
        }));
    }
    let mut landau_rows = Vec::new();
    for &a in &s.landau_couplings {
        let c = renorm::landau_cutoff(a, cfg.mass)?;
        landau_rows.push(json!({
            "alpha_ph": a,
            "lambda_exact": c.exact,
            "lambda_asymptotic": c.asymptotic,
            "log_ratio_exact": c.log_ratio_exact,
            "log_ratio_asymptotic": c.log_ratio_asymptotic,
        }));
    }
    sink.table("b_constant.csv", &renorm::b_table(&s.ratios)?)?;
    sink.table("landau.csv", &renorm::landau_table(&s.landau_couplings, cfg.mass)?)?;
    let mut result = json!({"b_constant": b_rows, "landau": landau_rows});
    if s.lattice_response {
        let p = cfg.lattice;
        let lat = build_lattice(p.box_length, p.max_index, p.cutoff)?;
        let nu = external_density(cfg, &lat)?;
        let est = renorm::lattice_response_constant(&nu, s.probe_alpha, &lat, cfg.mass, &cfg.scf)?;
        let oracle = renorm::perturbative_response_constant(&lat, cfg.mass, lat.q_min());
        log.event("response", json!({"b_lat": est.b_lat, "perturbative": oracle}));
        let mut rows = Vec::new();
        for &a in &s.screening_alphas {
            let r = scf::scf_solve(&nu, a, &cfg.scf, &lat, cfg.mass)?;
            rows.push((a, renorm::verify_charge_identity(&r, &nu, a, est.b_lat)));
        }
        sink.table("screening.csv", &renorm::screening_table(&rows))?;
        result["lattice_response"] = json!({
            "estimate": serde_json::to_value(&est)?,
            "perturbative": oracle,
            "relative_difference": (est.b_lat - oracle).abs() / oracle.abs(),
            "b_constant_continuum": renorm::b_constant(p.cutoff / cfg.mass)?,
            "screening": rows.iter().map(|(a, r)| {
                let mut v = serde_json::to_value(r).unwrap_or(Value::Null);
                v["alpha"] = json!(a);
                v
            }).collect::<Vec<_>>(),
        });
    }
    sink.json("result.json", &envelope(cfg, result))
}

fn pv_cmd(cfg: &RunConfig, sink: &mut Sink<'_>, log: &mut Logger) -> Result<()> {
    let s = &cfg.pv;
    let p = cfg.lattice;
    let lat = build_lattice(p.box_length, p.max_index, p.cutoff)?;
    let ext = if s.ext_amplitude == 0.0 {
        EMPotential::zeros(lat.params())
    } else {
        pv::scalar_probe(lat.params(), s.ext_mode, s.ext_amplitude)?
    };
    let r = pv::saddle_solve(&ext, cfg.e, &s.setup, &s.saddle, &lat)?;
    log.event(
        "saddle",
        json!({"iterations": r.iterations, "grad_v": r.grad_v, "grad_a": r.grad_a}),
    );
    let (res_v, res_a) = pv::pv_residuals(&r.potential, &ext, cfg.e, &s.setup, &lat)?;
    let (gv, ca) = (r.potential.grad_v_norm(), r.potential.curl_a_norm());
    let (sum0, sum2) = s.setup.sum_rules();
    let mut result = json!({
        "lagrangian": r.lagrangian,
        "iterations": r.iterations,
        "grad_v": r.grad_v,
        "grad_a": r.grad_a,
        "residual_v": res_v,
        "residual_a": res_a,
        "grad_v_norm": gv,
        "curl_a_norm": ca,
        "potential_norm": (gv * gv + ca * ca).sqrt(),
        "pv_masses": s.setup.masses,
        "pv_coefficients": s.setup.coefficients,
        "sum_rules": [sum0, sum2],
    });
    sink.table("saddle_trace.csv", &r.trace)?;
    sink.text("potential.json", &r.potential.to_json())?;
    if !s.uv_cutoffs.is_empty() {
        let amp = if s.ext_amplitude == 0.0 { 0.05 } else { s.ext_amplitude };
        let mode = s.ext_mode;
        let t = pv::uv_cancellation_table(
            p.box_length,
            p.max_index,
            &s.uv_cutoffs,
            |lp| pv::scalar_probe(lp, mode, amp),
            cfg.e,
            &s.setup,
        )?;
        sink.table("uv_table.csv", &t)?;
        result["uv_probe_amplitude"] = json!(amp);
    }
    sink.json("result.json", &envelope(cfg, result))
}

fn expand_cmd(cfg: &RunConfig, sink: &mut Sink<'_>, log: &mut Logger) -> Result<()> {
    let p = cfg.lattice;
    let lat = build_lattice(p.box_length, p.max_index, p.cutoff)?;
    let nu = external_density(cfg, &lat)?;
    let s = &cfg.expand;
    let fit = renorm::dressed_density_expansion(&nu, &s.couplings_ph, s.order, &lat, cfg.mass, &cfg.scf)?;
    log.event("fit", json!({"residual_norm": fit.residual_norm}));
    let mut t = Table::new(&["alpha_ph", "alpha_bare", "residual"]);
    for i in 0..fit.couplings_ph.len() {
        t.push(vec![fit.couplings_ph[i], fit.couplings_bare[i], fit.residuals[i]]);
    }
    sink.table("expansion.csv", &t)?;
    let q = lat.q_min();
    let mut result = json!({"fit": fit.to_json_value()});
    let nq = nu.get(q);
    if nq.norm() > 0.0 && !fit.coefficients.is_empty() {
        result["q_min_check"] = json!({
            "leading_over_nu": (fit.leading.get(q) / nq).re,
            "nu1_over_nu": (fit.coefficients[0].get(q) / nq).re,
            "b_minus_b_lat": fit.b - renorm::perturbative_response_constant(&lat, cfg.mass, q),
        });
    }
    sink.json("result.json", &envelope(cfg, result))
}

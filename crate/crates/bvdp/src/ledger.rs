//! Files of a run directory.
//!
//! * `config.toml`: the effective configuration.
//! * `steps.csv`: one row per time node.
//! * `reparam.csv`: one row per arclength sample.
//! * `samples.bin`: the sampled states `(s, t, u, z, p)`, little-endian `f64`.
//! * `diagnostics.json`: the diagnostics report.
//! * `ledger.json`: status, summary and content hashes.
//!
//! Non-finite numbers appear as `inf` in CSV and as `null` in JSON.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bvdp_core::bv_diagnostics::{DiagnosticsReport, RegimeTag};
use bvdp_core::energetics::State;
use bvdp_core::reparam::{normalization_residual, reparam_edb_residual, ReparamTrajectory};
use bvdp_core::tensor_mesh::SymTensor2;
use bvdp_core::viscous_solver::Trajectory;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RunError};

pub const CONFIG_FILE: &str = "config.toml";
pub const STEPS_FILE: &str = "steps.csv";
pub const REPARAM_FILE: &str = "reparam.csv";
pub const SAMPLES_FILE: &str = "samples.bin";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const MANIFEST_FILE: &str = "ledger.json";

/// Files whose bytes enter the run hash, in hashing order.
pub const HASHED_FILES: [&str; 3] = [STEPS_FILE, REPARAM_FILE, SAMPLES_FILE];

const SAMPLES_MAGIC: &[u8; 8] = b"BVDPSMP1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct StepRow {
    pub t: f64,
    pub outer_iters: usize,
    pub r_u: f64,
    pub kkt_z: f64,
    pub kkt_p: f64,
    pub Q: f64,
    pub Phi: f64,
    /// `∫₀ᵗ ∂_tE`.
    pub work: f64,
    pub R_cum: f64,
    pub H_cum: f64,
    pub visc_cum: f64,
    pub conj_cum: f64,
    pub edb_residual: f64,
    pub energy: f64,
    /// `⟨F(t), u + w(t)⟩`.
    pub load: f64,
    pub tau: f64,
    pub halvings: u32,
    /// Largest nodal increase of `z` over the step; `≤ 0` when unidirectional.
    pub max_dz: f64,
    pub min_z: f64,
}

pub fn step_rows(traj: &Trajectory) -> Vec<StepRow> {
    let ledger = traj.ledger();
    (0..traj.nodes.len())
        .map(|k| {
            let node = &traj.nodes[k];
            let step = k.checked_sub(1).map(|i| &traj.steps[i]);
            let max_dz = match k {
                0 => 0.0,
                _ => traj.states[k].z.iter().zip(&traj.states[k - 1].z).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max),
            };
            let l = &ledger[k];
            StepRow {
                t: node.t,
                outer_iters: step.map_or(0, |s| s.outer_iters),
                r_u: node.slopes.r_u,
                kkt_z: step.map_or(0.0, |s| s.kkt_z),
                kkt_p: step.map_or(0.0, |s| s.kkt_p),
                Q: node.energy.elastic,
                Phi: node.energy.phi,
                work: l.work_cum,
                R_cum: l.r_cum,
                H_cum: l.h_cum,
                visc_cum: l.visc_cum,
                conj_cum: l.conj_cum,
                edb_residual: l.edb_residual,
                energy: l.energy,
                load: node.energy.load,
                tau: step.map_or(0.0, |s| s.tau),
                halvings: step.map_or(0, |s| s.halvings),
                max_dz,
                min_z: traj.states[k].z.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ReparamRow {
    pub s: f64,
    pub t: f64,
    pub tprime: f64,
    pub z_l1_rate: f64,
    pub p_l1_rate: f64,
    pub D: f64,
    pub Dstar: f64,
    pub norm_residual: f64,
    /// `B` (stable) or `A` (unstable).
    pub regime: String,
    pub M_eps: f64,
    pub energy: f64,
    pub d_t_energy: f64,
    pub r_u: f64,
    pub edb_residual: f64,
}

pub fn reparam_rows(rpt: &ReparamTrajectory, regimes: &RegimeTag) -> Vec<ReparamRow> {
    let norm = normalization_residual(rpt);
    let edb = reparam_edb_residual(rpt);
    (0..rpt.len())
        .map(|j| ReparamRow {
            s: rpt.s[j],
            t: rpt.t[j],
            tprime: rpt.tprime[j],
            z_l1_rate: rpt.z_rate_l1[j],
            p_l1_rate: rpt.p_rate_l1[j],
            D: rpt.d[j],
            Dstar: rpt.dstar(j),
            norm_residual: norm[j],
            regime: regimes.regime[j].label().to_string(),
            M_eps: rpt.m_eps[j].value,
            energy: rpt.energy[j],
            d_t_energy: rpt.d_t_energy[j],
            r_u: rpt.slopes[j].r_u,
            edb_residual: edb[j],
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(RunError::io(path))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> RunError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => RunError::Io { path: path.into(), source },
        other => RunError::format(path, format!("{other:?}")),
    }
}

/// Sampled states with their arclength and time.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub eps: f64,
    pub total: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub states: Vec<State>,
}

impl Samples {
    pub fn of(rpt: &ReparamTrajectory) -> Self {
        Self { eps: rpt.eps, total: rpt.total, s: rpt.s.clone(), t: rpt.t.clone(), states: rpt.states.clone() }
    }
}

pub fn encode_samples(x: &Samples) -> Vec<u8> {
    let q0 = &x.states[0];
    let mut out = Vec::new();
    out.extend_from_slice(SAMPLES_MAGIC);
    for n in [x.s.len(), q0.u.len(), q0.z.len(), q0.p.len()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
    put(x.eps);
    put(x.total);
    for (j, q) in x.states.iter().enumerate() {
        put(x.s[j]);
        put(x.t[j]);
        q.u.iter().chain(&q.z).for_each(|v| put(*v));
        for p in &q.p {
            put(p.xx);
            put(p.yy);
            put(p.xy);
        }
    }
    out
}

pub fn decode_samples(bytes: &[u8]) -> std::result::Result<Samples, String> {
    let mut pos = 0;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let b = bytes.get(pos..pos + n).ok_or("truncated sample file")?;
        pos += n;
        Ok(b)
    };
    if take(8)? != SAMPLES_MAGIC {
        return Err("not a sample file".into());
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    }
    let [n, nu, nz, np] = dims;
    let expected = 16 + n.checked_mul(8 * (2 + nu + nz + 3 * np)).ok_or("sample dimensions overflow")?;
    if bytes.len() != 40 + expected {
        return Err(format!("sample file has {} bytes, dimensions need {}", bytes.len(), 40 + expected));
    }
    let mut f = || -> f64 { f64::from_le_bytes(take(8).expect("length checked").try_into().expect("8 bytes")) };
    let (eps, total) = (f(), f());
    let mut out = Samples { eps, total, s: Vec::with_capacity(n), t: Vec::with_capacity(n), states: Vec::with_capacity(n) };
    for _ in 0..n {
        out.s.push(f());
        out.t.push(f());
        let u = (0..nu).map(|_| f()).collect();
        let z = (0..nz).map(|_| f()).collect();
        let p = (0..np).map(|_| SymTensor2 { xx: f(), yy: f(), xy: f() }).collect();
        out.states.push(State { u, z, p });
    }
    Ok(out)
}

pub fn write_samples(path: &Path, x: &Samples) -> Result<()> {
    fs::write(path, encode_samples(x)).map_err(RunError::io(path))
}

pub fn read_samples(path: &Path) -> Result<Samples> {
    let bytes = fs::read(path).map_err(RunError::io(path))?;
    decode_samples(&bytes).map_err(|m| RunError::format(path, m))
}

/// `diagnostics.json` content: the report plus its verdict.
pub fn diagnostics_json(report: &DiagnosticsReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["passed"] = serde_json::Value::Bool(report.passed());
    v
}

pub fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut f = fs::File::create(path).map_err(RunError::io(path))?;
    serde_json::to_writer_pretty(&mut f, v).map_err(|e| RunError::format(path, e.to_string()))?;
    f.write_all(b"\n").map_err(RunError::io(path))
}

pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(RunError::io(path))?;
    serde_json::from_str(&text).map_err(|e| RunError::format(path, e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    FailedStep,
    FailedCheck,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::FailedStep => 2,
            Status::FailedCheck => 3,
        }
    }
}

/// Scalar results of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub halvings: u32,
    pub max_edb_residual: f64,
    pub final_edb_residual: f64,
    pub unidirectional: bool,
    pub m0_observed: f64,
    pub total_dz_l1: f64,
    pub total_dp_l1: f64,
    pub max_kkt_p: f64,
    pub max_kkt_z: f64,
    pub max_objective_rise: f64,
    /// `S_ε`.
    pub arclength: Option<f64>,
    pub m_eps_integral: Option<f64>,
    pub max_norm_residual: Option<f64>,
    pub max_reparam_edb_residual: Option<f64>,
    pub change_of_variables_gap: Option<f64>,
    pub diagnostics_passed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: Status,
    pub eps: f64,
    pub tau: f64,
    pub t_end: f64,
    pub failure: Option<String>,
    pub failed_checks: Vec<String>,
    pub summary: RunSummary,
    /// SHA-256 of each hashed file.
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the hashed files in [`HASHED_FILES`] order.
    pub hash: String,
    pub elapsed_seconds: f64,
}

/// Per-file hashes and the combined hash of the files present in `dir`.
pub fn content_hashes(dir: &Path) -> Result<(BTreeMap<String, String>, String)> {
    let mut files = BTreeMap::new();
    let mut all = Sha256::new();
    for name in HASHED_FILES {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path).map_err(RunError::io(&path))?;
        files.insert(name.to_string(), hex(&Sha256::digest(&bytes)));
        all.update(name.as_bytes());
        all.update((bytes.len() as u64).to_le_bytes());
        all.update(&bytes);
    }
    Ok((files, hex(&all.finalize())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let v = read_json(&path)?;
    serde_json::from_value(v).map_err(|e| RunError::format(&path, e.to_string()))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(RunError::io(dir))?;
    Ok(dir.to_path_buf())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use micellar_core::diagnostics::{
    energy_law_residual, energy_report, fit_decay, sobolev_report, state_cancellation_residual, DecayFit, EnergyReport,
    SobolevReport,
};
use micellar_core::fluid::VelocityField;
use micellar_core::{Model, SimConfig, SimState};

use crate::Failure;

/// Columns of `timeseries.csv`, in order.
pub const COLUMNS: [&str; 16] = [
    "t",
    "kinetic",
    "free_energy",
    "total_energy",
    "D_u",
    "D_micro",
    "D_R",
    "mass_rel_err",
    "rho_constraint_max",
    "E0",
    "D0",
    "E1",
    "D1",
    "E2",
    "D2",
    "cancel_residual",
];

/// Relative tolerance, against the initial total energy, for counting an energy increase.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-13;

/// Reaction dissipation below this is counted as a sign violation.
pub const DISSIPATION_FLOOR: f64 = -1e-12;

pub fn parse_config(text: &str) -> Result<SimConfig, Failure> {
    let config: SimConfig = toml::from_str(text).map_err(|e| Failure::Config(e.message().trim().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// SHA-256 of the resolved configuration and the code version.
pub fn manifest_hash(config: &SimConfig) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(serde_json::to_vec(config).expect("configuration serialises"));
    hex::encode(h.finalize())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Steps at which the total energy rose by more than the tolerance.
    pub free_energy_increase: usize,
    /// Steps with reaction dissipation below the roundoff floor.
    pub negative_reaction_dissipation: usize,
    /// Sobolev reports failing the energy equivalence bounds.
    pub sobolev_equivalence: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub violations: Violations,
    pub max_constraint_residual: f64,
    pub max_mass_rel_err: f64,
    pub max_energy_law_residual: f64,
    pub max_cancel_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub hash: String,
    pub code_version: String,
    pub config: SimConfig,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub invariants: InvariantSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub manifest_hash: String,
    pub scenario: String,
    pub steps: usize,
    pub t_final: f64,
    pub free_energy_final: f64,
    pub energy_final: EnergyReport,
    pub sobolev_final: Vec<SobolevReport>,
    /// Fit of the total energy over the second half of the recorded rows.
    pub energy_decay: Option<DecayFit>,
    /// Fit of the weighted order-0 Sobolev energy.
    pub sobolev_decay: Option<DecayFit>,
    pub invariants: InvariantSummary,
}

/// One recorded row.
#[derive(Clone, Debug)]
pub struct Record {
    pub t: f64,
    pub energy: EnergyReport,
    pub mass_rel_err: f64,
    pub constraint: f64,
    pub sobolev: Vec<SobolevReport>,
    pub cancel: f64,
}

impl Record {
    fn values(&self) -> Vec<Option<f64>> {
        let e = &self.energy;
        let mut v = vec![
            Some(self.t),
            Some(e.kinetic),
            Some(e.free_energy),
            Some(e.total),
            Some(e.d_u),
            Some(e.d_micro),
            Some(e.d_reaction),
            Some(self.mass_rel_err),
            Some(self.constraint),
        ];
        for s in 0..3 {
            let r = self.sobolev.get(s);
            v.push(r.map(|r| r.energy_eta));
            v.push(r.map(|r| r.dissipation_eta));
        }
        v.push(Some(self.cancel));
        v
    }

    /// CSV line; orders above the configured Sobolev maximum are left empty.
    pub fn csv_line(&self) -> Result<String, Failure> {
        let mut line = String::new();
        for (i, v) in self.values().into_iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Failure::Runtime(format!("non-finite {} = {v} at t = {}", COLUMNS[i], self.t)));
                }
                write!(line, "{v:e}").unwrap();
            }
        }
        line.push('\n');
        Ok(line)
    }
}

fn check_energy(e: &EnergyReport, t: f64) -> Result<(), Failure> {
    let all = [e.kinetic, e.free_energy, e.total, e.d_u, e.d_micro, e.d_reaction, e.d_total];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Failure::Runtime(format!("non-finite energy budget at t = {t}")));
    }
    Ok(())
}

fn record(model: &Model, state: &SimState, energy: EnergyReport, mass0: f64) -> Result<Record, Failure> {
    let (f_a, f_b) = model.fluctuations(state)?;
    let sobolev = (0..=model.config.sobolev_s_max)
        .map(|s| sobolev_report(model, &f_a, &f_b, &state.u, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Record {
        t: state.t,
        energy,
        mass_rel_err: (model.total_mass(state) - mass0).abs() / mass0,
        constraint: model.constraint_residual(state),
        sobolev,
        cancel: state_cancellation_residual(model, state)?,
    })
}

/// Everything a run produces, before it is written to disk.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub hash: String,
    pub records: Vec<Record>,
    pub summary: Summary,
    pub final_state: SimState,
}

/// Integrates the configured scenario to `t_end`, recording every `cadence` steps.
pub fn simulate(config: &SimConfig) -> Result<RunOutput, Failure> {
    let model = Model::new(config)?;
    let mut state = model.initial_state()?;
    let hash = manifest_hash(config);
    let mass0 = model.total_mass(&state);
    let mut prev = energy_report(&model, &state)?;
    check_energy(&prev, 0.0)?;
    let tol = MONOTONICITY_TOLERANCE * prev.total.abs();
    let mut inv = InvariantSummary::default();
    let mut records = vec![record(&model, &state, prev, mass0)?];
    let t_end = config.t_end;
    let mut steps = 0;
    while state.t < t_end * (1.0 - 1e-12) {
        let dt = match config.dt {
            Some(dt) => dt,
            None => model.default_dt(&state)?,
        }
        .min(t_end - state.t);
        model.step(&mut state, dt)?;
        steps += 1;
        let next = energy_report(&model, &state)?;
        check_energy(&next, state.t)?;
        if next.total > prev.total + tol {
            inv.violations.free_energy_increase += 1;
        }
        if next.d_reaction < DISSIPATION_FLOOR {
            inv.violations.negative_reaction_dissipation += 1;
        }
        inv.max_energy_law_residual = inv.max_energy_law_residual.max(energy_law_residual(&prev, &next, dt).abs());
        prev = next;
        let last = state.t >= t_end * (1.0 - 1e-12);
        if steps % config.cadence == 0 || last {
            records.push(record(&model, &state, next, mass0)?);
        }
    }
    for r in &records {
        inv.max_constraint_residual = inv.max_constraint_residual.max(r.constraint);
        inv.max_mass_rel_err = inv.max_mass_rel_err.max(r.mass_rel_err);
        inv.max_cancel_residual = inv.max_cancel_residual.max(r.cancel);
        inv.violations.sobolev_equivalence += r.sobolev.iter().filter(|s| !s.equivalence_holds()).count();
    }
    let fit = |pick: &dyn Fn(&Record) -> f64| -> Option<DecayFit> {
        let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, pick(r))).collect();
        fit_decay(&series).ok()
    };
    let last = records.last().expect("initial record").clone();
    let summary = Summary {
        manifest_hash: hash.clone(),
        scenario: config.scenario.name().into(),
        steps,
        t_final: state.t,
        free_energy_final: last.energy.free_energy,
        energy_final: last.energy,
        sobolev_final: last.sobolev.clone(),
        energy_decay: fit(&|r| r.energy.total),
        sobolev_decay: fit(&|r| r.sobolev[0].energy_eta),
        invariants: inv,
    };
    Ok(RunOutput { hash, records, summary, final_state: state })
}

pub fn timeseries_csv(hash: &str, records: &[Record]) -> Result<String, Failure> {
    let mut out = format!("# manifest {hash}\n{}\n", COLUMNS.join(","));
    for r in records {
        out += &r.csv_line()?;
    }
    Ok(out)
}

/// Layout of `snapshot.bin`, stored next to it as `snapshot.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLayout {
    pub manifest_hash: String,
    pub t: f64,
    pub dtype: String,
    pub endianness: String,
    pub ordering: String,
    pub x_shape: Vec<usize>,
    pub q_shape: Vec<usize>,
    /// Active configuration cells; fewer than the product of `q_shape` on a ball.
    pub q_len: usize,
    /// Field names in file order.
    pub fields: Vec<SnapshotField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotField {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

pub fn write_snapshot(dir: &Path, hash: &str, config: &SimConfig, state: &SimState) -> Result<(), Failure> {
    let mut data: Vec<u8> = Vec::new();
    let mut fields = Vec::new();
    let mut push = |name: String, values: &[f64]| {
        fields.push(SnapshotField { name, offset: data.len() / 8, len: values.len() });
        for v in values {
            data.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (i, c) in state.u.comps.iter().enumerate() {
        push(format!("u{i}"), c);
    }
    push("psi_a".into(), &state.psi_a);
    push("psi_b".into(), &state.psi_b);
    let layout = SnapshotLayout {
        manifest_hash: hash.into(),
        t: state.t,
        dtype: "f64".into(),
        endianness: "little".into(),
        ordering: "row-major; densities are x-major then q, axis 0 slowest".into(),
        x_shape: vec![config.n_x; config.d_x],
        q_shape: vec![config.n_q; config.d_q],
        q_len: state.psi_a.len() / config.n_x.pow(config.d_x as u32),
        fields,
    };
    fs::write(dir.join("snapshot.bin"), data)?;
    fs::write(dir.join("snapshot.json"), to_json(&layout)?)?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(dir: &Path) -> Result<(SnapshotLayout, SimState), Failure> {
    let layout: SnapshotLayout = serde_json::from_str(&fs::read_to_string(dir.join("snapshot.json"))?)
        .map_err(|e| Failure::Runtime(format!("snapshot sidecar: {e}")))?;
    let bytes = fs::read(dir.join("snapshot.bin"))?;
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let field = |name: &str| -> Result<Vec<f64>, Failure> {
        let f = layout
            .fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Failure::Runtime(format!("snapshot lacks field {name}")))?;
        values
            .get(f.offset..f.offset + f.len)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Failure::Runtime(format!("snapshot field {name} truncated")))
    };
    let comps = (0..layout.x_shape.len()).map(|i| field(&format!("u{i}"))).collect::<Result<Vec<_>, _>>()?;
    let state = SimState { t: layout.t, u: VelocityField { comps }, psi_a: field("psi_a")?, psi_b: field("psi_b")? };
    Ok((layout, state))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))
}

/// Runs a configuration and writes its outputs; returns the output directory.
pub fn run(config: &SimConfig) -> Result<(PathBuf, Summary), Failure> {
    let started = chrono::Utc::now().to_rfc3339();
    let dir = PathBuf::from(&config.out_dir);
    fs::create_dir_all(&dir)?;
    let out = simulate(config)?;
    fs::write(dir.join("timeseries.csv"), timeseries_csv(&out.hash, &out.records)?)?;
    fs::write(dir.join("summary.json"), to_json(&out.summary)?)?;
    if config.snapshot {
        write_snapshot(&dir, &out.hash, config, &out.final_state)?;
    }
    let manifest = RunManifest {
        hash: out.hash.clone(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        seed: config.seed,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        invariants: out.summary.invariants,
    };
    fs::write(dir.join("manifest.json"), to_json(&manifest)?)?;
    Ok((dir, out.summary))
}

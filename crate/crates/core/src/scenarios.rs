//! Displacement estimation on two-mode probes under thermal loss: the numeric
//! pipeline, the closed-form benchmark bounds and parameter sweeps.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ModeBath, NoisyChannel};
use crate::error::{Error, Result};
use crate::gaussian::{probe_tmsdt, GaussianState};
use crate::measurements::{epr_readout, heterodyne, GeneralDyne, OutcomeLaw};
use crate::numkit::{self, RMat};
use crate::qfi::{invert_qfim, qfim_report_at, DisplacementModel, ModelPoint, QfimReport};

pub const SCHEMA: &str = "gaussfish/scenario-v1";
pub const CSV_HEADER: &str = "axis,b_s,b_r,b_h_mid,b_h_upper,hdb,r_q,sql";

fn default_phi() -> f64 {
    PI
}

fn default_angle() -> f64 {
    PI / 2.0
}

/// Probe families. `phi` is the angle of the two-mode squeezer reflection;
/// the default π correlates Q1 + Q2 and P1 - P2, the combinations read out
/// behind the beam splitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    Tmsv {
        r: f64,
        #[serde(default = "default_phi")]
        phi: f64,
    },
    Tmst {
        r: f64,
        n_th: f64,
        #[serde(default = "default_phi")]
        phi: f64,
    },
    Tmdv {
        #[serde(default)]
        alpha: [f64; 4],
    },
    Tmdt {
        #[serde(default)]
        alpha: [f64; 4],
        n_th: f64,
    },
    Custom {
        state: GaussianState,
    },
}

impl Probe {
    pub fn kind(&self) -> ProbeKind {
        match self {
            Probe::Tmsv { .. } => ProbeKind::Tmsv,
            Probe::Tmst { .. } => ProbeKind::Tmst,
            Probe::Tmdv { .. } => ProbeKind::Tmdv,
            Probe::Tmdt { .. } => ProbeKind::Tmdt,
            Probe::Custom { .. } => ProbeKind::Custom,
        }
    }

    pub fn squeezing(&self) -> Option<f64> {
        match self {
            Probe::Tmsv { r, .. } | Probe::Tmst { r, .. } => Some(*r),
            _ => None,
        }
    }

    pub fn n_th(&self) -> f64 {
        match self {
            Probe::Tmst { n_th, .. } | Probe::Tmdt { n_th, .. } => *n_th,
            _ => 0.0,
        }
    }

    /// Same probe with squeezing `r`; fails for families without squeezing.
    pub fn with_squeezing(&self, r: f64) -> Result<Probe> {
        match self {
            Probe::Tmsv { phi, .. } => Ok(Probe::Tmsv { r, phi: *phi }),
            Probe::Tmst { n_th, phi, .. } => Ok(Probe::Tmst { r, n_th: *n_th, phi: *phi }),
            _ => Err(Error::Validation(format!("{:?} probe has no squeezing parameter to sweep", self.kind()))),
        }
    }

    pub fn state(&self) -> Result<GaussianState> {
        match self {
            Probe::Tmsv { r, phi } => probe_tmsdt(*r, *phi, [0.0; 4], 0.0),
            Probe::Tmst { r, n_th, phi } => probe_tmsdt(*r, *phi, [0.0; 4], *n_th),
            Probe::Tmdv { alpha } => probe_tmsdt(0.0, 0.0, *alpha, 0.0),
            Probe::Tmdt { alpha, n_th } => probe_tmsdt(0.0, 0.0, *alpha, *n_th),
            Probe::Custom { state } => Ok(state.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Tmsv,
    Tmst,
    Tmdv,
    Tmdt,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    R,
    T,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::R => "r",
            Axis::T => "t",
        }
    }
}

/// Inclusive grid start, start + step, ... up to stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.stop < self.start {
            return vec![];
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub probe: Probe,
    pub bath: ModeBath,
    /// Evolution time; ignored when sweeping over t.
    #[serde(default)]
    pub t: f64,
    pub sweep: Sweep,
    /// Row-major 2x2 weight; identity when absent.
    #[serde(default)]
    pub weight: Option<[[f64; 2]; 2]>,
    /// True displacement. Bounds do not depend on it.
    #[serde(default)]
    pub theta: [f64; 2],
    /// Quadrature angle read on the second beam-splitter output.
    #[serde(default = "default_angle")]
    pub homodyne_angle: f64,
    /// Dress the homodyne detectors with the bath loss rate over the same time.
    #[serde(default)]
    pub dress_measurement: bool,
}

impl ScenarioConfig {
    pub fn new(probe: Probe, bath: ModeBath, t: f64, sweep: Sweep) -> Self {
        Self {
            schema: SCHEMA.into(),
            probe,
            bath,
            t,
            sweep,
            weight: None,
            theta: [0.0, 0.0],
            homodyne_angle: default_angle(),
            dress_measurement: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Validation(format!("unsupported schema '{}', expected '{SCHEMA}'", self.schema)));
        }
        self.bath.validate()?;
        let Sweep { start, stop, step, axis } = self.sweep;
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || !step.is_finite() {
            return Err(Error::Validation("sweep needs finite start/stop and step > 0".into()));
        }
        match axis {
            Axis::R => {
                self.probe.with_squeezing(start)?;
                if start < 0.0 {
                    return Err(Error::Validation("squeezing sweep must start at r >= 0".into()));
                }
            }
            Axis::T => {
                if start < 0.0 {
                    return Err(Error::Validation("time sweep must start at t >= 0".into()));
                }
            }
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::Validation(format!("t = {} must be finite and >= 0", self.t)));
        }
        if let Some(r) = self.probe.squeezing() {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Validation(format!("squeezing r = {r} must be finite and >= 0")));
            }
        }
        if !(self.probe.n_th() >= 0.0) {
            return Err(Error::Validation("n_th must be >= 0".into()));
        }
        let st = self.probe.state()?;
        GaussianState::new(st.d().clone(), st.v().clone())?;
        let w = self.weight_matrix();
        if (&w - w.transpose()).amax() > 1e-12 || numkit::min_eigenvalue(&w)? < -1e-10 {
            return Err(Error::Validation("weight must be symmetric positive semidefinite".into()));
        }
        if !self.homodyne_angle.is_finite() || !self.theta.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("homodyne angle and theta must be finite".into()));
        }
        Ok(())
    }

    pub fn weight_matrix(&self) -> RMat {
        match self.weight {
            Some(w) => RMat::from_row_slice(2, 2, &[w[0][0], w[0][1], w[1][0], w[1][1]]),
            None => RMat::identity(2, 2),
        }
    }

    /// (probe, t) at one sweep value.
    fn resolve(&self, axis_value: f64) -> Result<(Probe, f64)> {
        match self.sweep.axis {
            Axis::R => Ok((self.probe.with_squeezing(axis_value)?, self.t)),
            Axis::T => Ok((self.probe.clone(), axis_value)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: f64,
    pub b_s: f64,
    pub b_r: f64,
    pub b_h_mid: f64,
    pub b_h_upper: f64,
    pub hdb: f64,
    pub r_q: f64,
    pub sql: f64,
}

impl SweepRow {
    fn failed(axis: f64) -> Self {
        let n = f64::NAN;
        SweepRow { axis, b_s: n, b_r: n, b_h_mid: n, b_h_upper: n, hdb: n, r_q: n, sql: n }
    }

    pub fn is_failed(&self) -> bool {
        [self.b_s, self.b_r, self.b_h_mid, self.b_h_upper, self.hdb, self.r_q, self.sql].iter().any(|x| !x.is_finite())
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.axis, self.b_s, self.b_r, self.b_h_mid, self.b_h_upper, self.hdb, self.r_q, self.sql
        )
    }
}

/// Everything computed at one sweep value.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: SweepRow,
    pub report: QfimReport,
    /// Classical Fisher information of the homodyne readout.
    pub f_c: RMat,
}

/// Displacement model on mode 0 of `probe`, evolved for time t in `bath`.
pub fn displacement_point(probe: &GaussianState, bath: ModeBath, t: f64, theta: [f64; 2]) -> Result<ModelPoint> {
    let channel = NoisyChannel::uniform(probe.modes(), bath)?;
    let v_out = channel.evolve(probe, t)?.v().clone();
    let model = DisplacementModel::with_map(probe, 0, channel.damping(t), v_out)?;
    ModelPoint::evaluate(&model, &theta)
}

/// Readout used for the HDB: Q and the `angle` quadrature behind a 50:50 beam
/// splitter on two-mode probes, heterodyne on every mode otherwise.
fn readout_cfim(pt: &ModelPoint, angle: f64, dressing: Option<(f64, f64)>) -> Result<RMat> {
    let (pre, mut meas): (Option<_>, GeneralDyne) = if pt.state.modes() == 2 {
        let (bs, m) = epr_readout(angle);
        (Some(bs), m)
    } else {
        (None, heterodyne(pt.state.modes()))
    };
    if let Some((g, t)) = dressing {
        meas = meas.with_inefficiency(g, t)?;
    }
    Ok(OutcomeLaw::at_point(pt, &meas, pre.as_ref())?.cfim())
}

/// Holevo upper bound of the coherent (vacuum-pair) probe in the same bath.
pub fn sql_reference(modes: usize, bath: ModeBath, t: f64, weight: &RMat) -> Result<f64> {
    let pt = displacement_point(&GaussianState::vacuum(modes)?, bath, t, [0.0, 0.0])?;
    Ok(qfim_report_at(&pt, Some(weight))?.b_h_upper())
}

pub fn run_point_full(cfg: &ScenarioConfig, axis_value: f64) -> Result<PointResult> {
    let inner = || -> Result<PointResult> {
        let (probe, t) = cfg.resolve(axis_value)?;
        let state = probe.state()?;
        let w = cfg.weight_matrix();
        let pt = displacement_point(&state, cfg.bath, t, cfg.theta)?;
        let report = qfim_report_at(&pt, Some(&w))?;
        let dressing = cfg.dress_measurement.then_some((cfg.bath.gamma, t));
        let f_c = readout_cfim(&pt, cfg.homodyne_angle, dressing)?;
        let hdb = (&w * invert_qfim(&f_c)?).trace();
        let sql = sql_reference(state.modes(), cfg.bath, t, &w)?;
        let row = SweepRow {
            axis: axis_value,
            b_s: report.b_s(),
            b_r: report.b_r(),
            b_h_mid: report.b_h_mid(),
            b_h_upper: report.b_h_upper(),
            hdb,
            r_q: report.r_q(),
            sql,
        };
        Ok(PointResult { row, report, f_c })
    };
    inner().map_err(|e| Error::AtPoint { axis: cfg.sweep.axis.name().into(), value: axis_value, source: Box::new(e) })
}

pub fn run_point(cfg: &ScenarioConfig, axis_value: f64) -> Result<SweepRow> {
    Ok(run_point_full(cfg, axis_value)?.row)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// One message per failed row, in axis order.
    pub failures: Vec<String>,
}

/// Evaluates every grid point in parallel; failed points become NaN rows.
pub fn sweep(cfg: &ScenarioConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let results: Vec<(SweepRow, Option<String>)> = cfg
        .sweep
        .values()
        .into_par_iter()
        .map(|x| match run_point(cfg, x) {
            Ok(row) => (row, None),
            Err(e) => {
                warn!("{e}");
                (SweepRow::failed(x), Some(e.to_string()))
            }
        })
        .collect();
    let failures = results.iter().filter_map(|(_, e)| e.clone()).collect();
    Ok(SweepOutput { rows: results.into_iter().map(|(r, _)| r).collect(), failures })
}

pub fn write_csv(rows: &[SweepRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub b_s: f64,
    pub b_r: f64,
    pub b_h_upper: f64,
    pub r_q: f64,
}

/// The benchmark bounds exactly as published for each probe family, evaluated
/// at squeezing r, probe occupation n_th, loss rate γ, time t and bath
/// occupation n_e. The mixed-probe formulas are only stated for n_th = n_e.
pub fn closed_form_bounds(kind: ProbeKind, r: f64, n_th: f64, gamma: f64, t: f64, n_e: f64) -> Result<ClosedForm> {
    let e = (gamma * t).exp();
    let (c2, s2) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let sh = r.sinh().powi(2);
    Ok(match kind {
        ProbeKind::Tmsv => {
            let a = (e - 1.0) * (1.0 + 2.0 * n_e) + c2;
            let b_s = a - s2 * s2 / a;
            let b_r = 2.0 * e * (1.0 + n_e) + c2 - (2.0 * n_e + 1.0) - s2 * s2 / (2.0 * (e - 1.0) * n_e + c2 - 1.0);
            let r_q = e / (e - 2.0 * n_e * (1.0 - e) + 2.0 * sh);
            let b_h_upper = (1.0 + e / a) * b_s;
            ClosedForm { b_s, b_r, b_h_upper, r_q }
        }
        ProbeKind::Tmdv => {
            let b_s = e * (1.0 + 2.0 * n_e) - 2.0 * n_e;
            let b_r = e * (1.0 + 2.0 * n_e) + e - 2.0 * n_e;
            let r_q = e / (e - 2.0 * n_e * (1.0 - e));
            ClosedForm { b_s, b_r, b_h_upper: b_r, r_q }
        }
        ProbeKind::Tmst => {
            let poly = 2.0 - 2.0 * e + e * e + 2.0 * (e - 1.0) * c2;
            let b_s = (1.0 + 2.0 * n_th) * poly / (c2 + e - 1.0);
            let b_r = (2.0 * n_th * (1.0 + n_th) * e * e + 2.0 * (e - 1.0) * (1.0 + 2.0 * n_th).powi(2) * sh)
                / (n_th * e + (1.0 + 2.0 * n_th) * sh);
            let n_bar = sh + n_th;
            let r_q = e / (2.0 * n_bar + 2.0 * n_e * (sh - 2.0 + e) + e);
            let b_h_upper = poly * (2.0 * e * (1.0 + n_th) + (2.0 + 4.0 * n_th) * s2 * s2) / (e + c2 - 1.0).powi(2);
            ClosedForm { b_s, b_r, b_h_upper, r_q }
        }
        ProbeKind::Tmdt => {
            let b_s = e * (1.0 + 2.0 * n_th);
            let b_r = b_s + e;
            ClosedForm { b_s, b_r, b_h_upper: b_r, r_q: 1.0 / (1.0 + 2.0 * n_th) }
        }
        ProbeKind::Custom => return Err(Error::InvalidArgument("no closed form for custom probes".into())),
    })
}

/// Built-in configurations: the squeezing sweeps at γ = 1, t = 0.2, n_e = 0.5
/// (n_th = 0.5 for the thermal probes) and the time sweeps at r = 0.4.
pub fn builtin_configs() -> Vec<(String, ScenarioConfig)> {
    let bath = ModeBath::thermal(1.0, 0.5);
    let r_sweep = Sweep { axis: Axis::R, start: 0.0, stop: 1.5, step: 0.05 };
    let t_sweep = Sweep { axis: Axis::T, start: 0.0, stop: 1.0, step: 0.05 };
    let probes = [
        ("tmsv", Probe::Tmsv { r: 0.4, phi: PI }),
        ("tmst", Probe::Tmst { r: 0.4, n_th: 0.5, phi: PI }),
        ("tmdv", Probe::Tmdv { alpha: [0.0; 4] }),
        ("tmdt", Probe::Tmdt { alpha: [0.0; 4], n_th: 0.5 }),
    ];
    let mut out = vec![];
    for (name, p) in &probes {
        if p.squeezing().is_some() {
            out.push((format!("{name}-r"), ScenarioConfig::new(p.clone(), bath, 0.2, r_sweep)));
        }
        out.push((format!("{name}-t"), ScenarioConfig::new(p.clone(), bath, 0.0, t_sweep)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig8(probe: Probe) -> ScenarioConfig {
        ScenarioConfig::new(
            probe,
            ModeBath::thermal(1.0, 0.5),
            0.2,
            Sweep { axis: Axis::R, start: 0.0, stop: 1.4, step: 0.2 },
        )
    }

    #[test]
    fn grid_values() {
        let s = Sweep { axis: Axis::R, start: 0.0, stop: 1.4, step: 0.2 };
        let v = s.values();
        assert_eq!(v.len(), 8);
        assert!((v[7] - 1.4).abs() < 1e-12);
        assert_eq!(Sweep { axis: Axis::R, start: 0.0, stop: 1.5, step: 0.05 }.values().len(), 31);
        assert!(Sweep { axis: Axis::T, start: 1.0, stop: 0.0, step: 0.1 }.values().is_empty());
    }

    #[test]
    fn tmsv_point_matches_published_forms() {
        let cfg = fig8(Probe::Tmsv { r: 0.0, phi: PI });
        let row = run_point(&cfg, 0.4).unwrap();
        let cf = closed_form_bounds(ProbeKind::Tmsv, 0.4, 0.0, 1.0, 0.2, 0.5).unwrap();
        assert!((row.b_s - cf.b_s).abs() < 1e-8);
        assert!((row.b_r - cf.b_r).abs() < 1e-8);
        assert!((row.r_q - cf.r_q).abs() < 1e-8);
        assert!((row.b_h_upper - cf.b_h_upper).abs() < 1e-8);
    }

    #[test]
    fn tmdv_at_zero_time() {
        let cfg = ScenarioConfig::new(
            Probe::Tmdv { alpha: [0.3, 0.1, -0.2, 0.0] },
            ModeBath::thermal(1.0, 0.5),
            0.0,
            Sweep { axis: Axis::T, start: 0.0, stop: 0.0, step: 0.1 },
        );
        let row = run_point(&cfg, 0.0).unwrap();
        assert!((row.b_s - 1.0).abs() < 1e-12);
        assert!((row.r_q - 1.0).abs() < 1e-9);
        assert!((row.sql - row.b_h_upper).abs() < 1e-12);
    }

    #[test]
    fn closed_form_identities() {
        let e = 0.3f64.exp();
        let c = closed_form_bounds(ProbeKind::Tmdt, 0.0, 0.7, 1.5, 0.2, 0.7).unwrap();
        assert!((c.b_s - e * 2.4).abs() < 1e-14);
        let c = closed_form_bounds(ProbeKind::Tmsv, 0.6, 0.0, 1.0, 0.0, 0.5).unwrap();
        assert!((c.b_s - 1.0 / 1.2f64.cosh()).abs() < 1e-14);
        let c = closed_form_bounds(ProbeKind::Tmdv, 0.0, 0.0, 1.0, 0.4, 0.5).unwrap();
        assert!((c.b_h_upper - c.b_r).abs() < 1e-15);
        assert!(closed_form_bounds(ProbeKind::Custom, 0.0, 0.0, 1.0, 0.4, 0.5).is_err());
    }

    #[test]
    fn config_validation() {
        let good = fig8(Probe::Tmsv { r: 0.0, phi: PI });
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.schema = "other".into();
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.sweep.step = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = fig8(Probe::Tmdv { alpha: [0.0; 4] });
        bad.sweep.axis = Axis::R;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.weight = Some([[1.0, 0.0], [0.0, -1.0]]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_config_roundtrip_and_errors() {
        let cfg = fig8(Probe::Tmst { r: 0.0, n_th: 0.5, phi: PI });
        let txt = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&txt).unwrap(), cfg);
        let minimal = r#"{"schema":"gaussfish/scenario-v1","probe":{"kind":"tmsv","r":0.4},
            "bath":{"gamma":1,"n_e":0.5},"t":0.2,"sweep":{"axis":"r","start":0,"stop":1,"step":0.5}}"#;
        let c = ScenarioConfig::from_json(minimal).unwrap();
        assert_eq!(c.probe, Probe::Tmsv { r: 0.4, phi: PI });
        match ScenarioConfig::from_json("{\n  \"schema\": ,\n}") {
            Err(Error::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected json error, got {other:?}"),
        }
    }

    #[test]
    fn sweep_rows_in_order_and_csv() {
        let out = sweep(&fig8(Probe::Tmsv { r: 0.0, phi: PI })).unwrap();
        assert!(out.failures.is_empty());
        let axes: Vec<f64> = out.rows.iter().map(|r| r.axis).collect();
        assert!(axes.windows(2).all(|w| w[0] < w[1]));
        let mut buf = vec![];
        write_csv(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first[1], out.rows[0].b_s);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn empty_sweep_is_empty() {
        let mut cfg = fig8(Probe::Tmsv { r: 0.0, phi: PI });
        cfg.sweep.start = 2.0;
        cfg.sweep.stop = 1.0;
        assert!(sweep(&cfg).unwrap().rows.is_empty());
    }

    #[test]
    fn failed_point_becomes_nan_row() {
        let row = SweepRow::failed(0.3);
        assert!(row.is_failed());
        assert!(row.csv_line().starts_with("0.3,NaN"));
    }
}

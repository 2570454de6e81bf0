//! File-backed configuration: cavity layouts and squeezer parameter sets in
//! TOML, with dotted-path `key=value` overrides.
//!
//! All dimensioned keys carry an explicit unit suffix (`_mm`, `_mW`, `_MHz`,
//! `_deg`, ...) so values in files are never ambiguous; everything is
//! converted to SI on load.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::analyzer::{AnalyzerConfig, AveragingMode};
use crate::cavity::{linewidth, CavityLayout, OpticalElement};
use crate::error::{Error, Result};
use crate::homodyne::TraceConfig;
use crate::squeezing::{DetectionChain, LossTable, OpoParams};

/// Parse TOML text into `T` after applying `key=value` overrides (dotted
/// paths, e.g. `opo.pump_mW=100`). Unknown keys are rejected.
pub fn parse_with_overrides<T: DeserializeOwned>(text: &str, overrides: &[String]) -> Result<T> {
    let mut value: toml::Value = text
        .parse()
        .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    value
        .try_into()
        .map_err(|e| Error::Config(format!("config error: {e}")))
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override '{spec}' has an empty key")));
    }
    // Parse the value as a TOML fragment so numbers, booleans and arrays all
    // work; fall back to a plain string.
    let parsed: toml::Value = format!("v = {raw}")
        .parse::<toml::Value>()
        .ok()
        .and_then(|t| t.get("v").cloned())
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));

    let mut node = root;
    let mut segments = path.split('.').peekable();
    while let Some(seg) = segments.next() {
        let table = node.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override '{path}': '{seg}' is not inside a table"))
        })?;
        if segments.peek().is_none() {
            table.insert(seg.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    unreachable!("split always yields at least one segment")
}

// ---------------------------------------------------------------------------
// Cavity layout files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub wavelength_nm: f64,
    pub reference_plane: Option<String>,
    #[serde(rename = "element")]
    pub elements: Vec<ElementSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    /// "free-space" | "curved-mirror" | "flat-mirror" | "dielectric-slab"
    pub kind: String,
    pub length_mm: Option<f64>,
    pub roc_mm: Option<f64>,
    pub aoi_deg: Option<f64>,
    pub index: Option<f64>,
    /// Free-space gaps that absorb mirror-spacing adjustments.
    #[serde(default)]
    pub scannable: bool,
    /// Marks the curved mirror the squeezed beam exits through.
    #[serde(default)]
    pub output_coupler: bool,
    pub substrate_index: Option<f64>,
}

impl ElementSpec {
    fn build(&self, position: usize) -> Result<OpticalElement<f64>> {
        let at = |what: &str| Error::Config(format!("element {position} ({}): {what}", self.kind));
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| at(&format!("missing required key '{name}'")))
        };
        let forbid = |v: bool, name: &str| {
            if v {
                Err(at(&format!("key '{name}' does not apply")))
            } else {
                Ok(())
            }
        };
        match self.kind.as_str() {
            "free-space" => {
                forbid(self.roc_mm.is_some(), "roc_mm")?;
                forbid(self.aoi_deg.is_some(), "aoi_deg")?;
                forbid(self.index.is_some(), "index")?;
                Ok(OpticalElement::FreeSpace {
                    length: need(self.length_mm, "length_mm")? * 1e-3,
                })
            }
            "curved-mirror" => {
                forbid(self.length_mm.is_some(), "length_mm")?;
                forbid(self.index.is_some(), "index")?;
                Ok(OpticalElement::CurvedMirror {
                    roc: need(self.roc_mm, "roc_mm")? * 1e-3,
                    aoi: self.aoi_deg.unwrap_or(0.0).to_radians(),
                })
            }
            "flat-mirror" => {
                forbid(self.length_mm.is_some(), "length_mm")?;
                forbid(self.roc_mm.is_some(), "roc_mm")?;
                forbid(self.index.is_some(), "index")?;
                Ok(OpticalElement::FlatMirror {
                    aoi: self.aoi_deg.unwrap_or(0.0).to_radians(),
                })
            }
            "dielectric-slab" => {
                forbid(self.roc_mm.is_some(), "roc_mm")?;
                forbid(self.aoi_deg.is_some(), "aoi_deg")?;
                Ok(OpticalElement::DielectricSlab {
                    length: need(self.length_mm, "length_mm")? * 1e-3,
                    index: need(self.index, "index")?,
                })
            }
            other => Err(Error::Config(format!(
                "element {position}: unknown kind '{other}' \
                 (expected free-space, curved-mirror, flat-mirror or dielectric-slab)"
            ))),
        }
    }
}

impl LayoutFile {
    pub fn build(&self) -> Result<CavityLayout<f64>> {
        if self.elements.is_empty() {
            return Err(Error::Config("layout has no elements".into()));
        }
        let elements: Vec<OpticalElement<f64>> = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| e.build(i))
            .collect::<Result<_>>()?;
        let scannable: Vec<usize> = self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.scannable)
            .map(|(i, _)| i)
            .collect();
        let couplers: Vec<usize> = self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.output_coupler)
            .map(|(i, _)| i)
            .collect();
        if couplers.len() > 1 {
            return Err(Error::Config(format!(
                "layout marks {} output couplers; at most one is allowed",
                couplers.len()
            )));
        }
        let mut layout = CavityLayout::new(elements, self.wavelength_nm * 1e-9)?;
        if let Some(label) = &self.reference_plane {
            layout = layout.with_reference_label(label.clone());
        }
        if !scannable.is_empty() {
            layout = layout.with_scannable_gaps(scannable)?;
        }
        if let Some(&i) = couplers.first() {
            let n_sub = self.elements[i].substrate_index.unwrap_or(1.45);
            layout = layout.with_output_coupler(i, n_sub)?;
        }
        Ok(layout)
    }
}

// ---------------------------------------------------------------------------
// Squeezer parameter files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub opo: OpoSection,
    pub detection: DetectionSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub analyzer: AnalyzerSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpoSection {
    pub transmissivity: f64,
    pub internal_loss: f64,
    /// Cavity half linewidth; alternatively derive it from the round-trip
    /// optical path length. Exactly one of the two must be given.
    #[serde(rename = "f_hwhm_MHz")]
    pub f_hwhm_mhz: Option<f64>,
    pub optical_length_mm: Option<f64>,
    #[serde(rename = "pump_mW")]
    pub pump_mw: f64,
    #[serde(rename = "threshold_mW")]
    pub threshold_mw: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub propagation_loss: f64,
    pub visibility: f64,
    pub photodiode_efficiency: f64,
    #[serde(default)]
    pub phase_jitter_deg: f64,
    /// Frequency-resolved electronic loss table (`freq_MHz,loss` CSV),
    /// resolved relative to the params file.
    pub electronic_loss_csv: Option<String>,
    /// Flat alternative: dark-noise clearance in dB.
    pub electronic_loss_snr_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    #[serde(rename = "sample_rate_MHz", default = "default_sample_rate_mhz")]
    pub sample_rate_mhz: f64,
    /// Record length; when absent, sized to supply the analyzer's averages.
    pub duration_ms: Option<f64>,
    #[serde(default)]
    pub lock_angle_deg: f64,
    /// 0 disables the high-pass entirely.
    #[serde(rename = "highpass_kHz", default = "default_highpass_khz")]
    pub highpass_khz: f64,
    #[serde(default = "default_jitter_corr_us")]
    pub jitter_correlation_us: f64,
}

fn default_sample_rate_mhz() -> f64 {
    1000.0
}
fn default_highpass_khz() -> f64 {
    300.0
}
fn default_jitter_corr_us() -> f64 {
    1000.0
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection {
            sample_rate_mhz: default_sample_rate_mhz(),
            duration_ms: None,
            lock_angle_deg: 0.0,
            highpass_khz: default_highpass_khz(),
            jitter_correlation_us: default_jitter_corr_us(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSection {
    #[serde(rename = "rbw_MHz", default = "default_rbw_mhz")]
    pub rbw_mhz: f64,
    #[serde(rename = "vbw_MHz", default = "default_rbw_mhz")]
    pub vbw_mhz: f64,
    #[serde(default = "default_averages")]
    pub averages: usize,
    #[serde(rename = "span_MHz", default = "default_span_mhz")]
    pub span_mhz: [f64; 2],
    /// "rms" (power) or "log" (legacy dB averaging).
    #[serde(default = "default_averaging")]
    pub averaging: String,
}

fn default_rbw_mhz() -> f64 {
    1.0
}
fn default_averages() -> usize {
    600
}
fn default_span_mhz() -> [f64; 2] {
    [1.0, 200.0]
}
fn default_averaging() -> String {
    "rms".into()
}

impl Default for AnalyzerSection {
    fn default() -> Self {
        AnalyzerSection {
            rbw_mhz: default_rbw_mhz(),
            vbw_mhz: default_rbw_mhz(),
            averages: default_averages(),
            span_mhz: default_span_mhz(),
            averaging: default_averaging(),
        }
    }
}

impl ParamsFile {
    pub fn opo(&self) -> Result<OpoParams<f64>> {
        let f_hwhm = match (self.opo.f_hwhm_mhz, self.opo.optical_length_mm) {
            (Some(mhz), None) => mhz * 1e6,
            (None, Some(mm)) => linewidth(self.opo.transmissivity, mm * 1e-3)?.f_hwhm,
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either f_hwhm_MHz or optical_length_mm, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of f_hwhm_MHz or optical_length_mm is required".into(),
                ))
            }
        };
        OpoParams::new(
            self.opo.transmissivity,
            self.opo.internal_loss,
            f_hwhm,
            self.opo.pump_mw * 1e-3,
            self.opo.threshold_mw * 1e-3,
        )
    }

    /// Assemble the detection chain; `load_table` resolves the electronic
    /// loss CSV (path as written in the file) to its text content.
    pub fn detection_chain(
        &self,
        load_table: impl FnOnce(&str) -> Result<String>,
    ) -> Result<DetectionChain<f64>> {
        let electronic_loss = match (
            &self.detection.electronic_loss_csv,
            self.detection.electronic_loss_snr_db,
        ) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either electronic_loss_csv or electronic_loss_snr_db, not both".into(),
                ))
            }
            (Some(path), None) => {
                let text = load_table(path)?;
                crate::io::read_loss_table(text.as_bytes())?
            }
            (None, Some(snr)) => LossTable::flat(crate::squeezing::electronic_loss_from_snr(snr)?)?,
            (None, None) => LossTable::flat(0.0)?,
        };
        let chain = DetectionChain {
            propagation_loss: self.detection.propagation_loss,
            visibility: self.detection.visibility,
            photodiode_efficiency: self.detection.photodiode_efficiency,
            electronic_loss,
            phase_jitter_rms: self.detection.phase_jitter_deg.to_radians(),
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn analyzer_config(&self) -> Result<AnalyzerConfig<f64>> {
        let averaging = match self.analyzer.averaging.as_str() {
            "rms" => AveragingMode::Rms,
            "log" => AveragingMode::LogPower,
            other => {
                return Err(Error::Config(format!(
                    "unknown averaging mode '{other}' (expected 'rms' or 'log')"
                )))
            }
        };
        Ok(AnalyzerConfig {
            rbw: self.analyzer.rbw_mhz * 1e6,
            vbw: self.analyzer.vbw_mhz * 1e6,
            n_averages: self.analyzer.averages,
            freq_span: (
                self.analyzer.span_mhz[0] * 1e6,
                self.analyzer.span_mhz[1] * 1e6,
            ),
            averaging,
        })
    }

    /// Trace configuration with the given seed; the jitter RMS is taken from
    /// the detection section so the synthetic and analytic models always
    /// share it. The duration defaults to exactly what the analyzer needs.
    pub fn trace_config(&self, seed: u64) -> Result<TraceConfig<f64>> {
        let fs = self.trace.sample_rate_mhz * 1e6;
        let duration = match self.trace.duration_ms {
            Some(ms) => ms * 1e-3,
            None => self.analyzer_config()?.required_duration(fs),
        };
        let tc = TraceConfig {
            sample_rate: fs,
            duration,
            rng_seed: seed,
            lock_angle: self.trace.lock_angle_deg.to_radians(),
            phase_jitter_rms: self.detection.phase_jitter_deg.to_radians(),
            jitter_correlation_time: self.trace.jitter_correlation_us * 1e-6,
            highpass_cutoff: if self.trace.highpass_khz > 0.0 {
                Some(self.trace.highpass_khz * 1e3)
            } else {
                None
            },
        };
        tc.validate()?;
        Ok(tc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ray::TransversePlane;

    const LAYOUT: &str = r#"
wavelength_nm = 860.0
reference_plane = "crystal centre"

[[element]]
kind = "dielectric-slab"
length_mm = 5.0
index = 1.8

[[element]]
kind = "free-space"
length_mm = 6.0
scannable = true

[[element]]
kind = "curved-mirror"
roc_mm = 15.0
aoi_deg = 10.0
output_coupler = true
substrate_index = 1.45

[[element]]
kind = "free-space"
length_mm = 11.5

[[element]]
kind = "flat-mirror"
aoi_deg = 70.0

[[element]]
kind = "free-space"
length_mm = 11.5

[[element]]
kind = "curved-mirror"
roc_mm = 15.0
aoi_deg = 10.0

[[element]]
kind = "free-space"
length_mm = 6.0
scannable = true

[[element]]
kind = "dielectric-slab"
length_mm = 5.0
index = 1.8
"#;

    const PARAMS: &str = r#"
[opo]
transmissivity = 0.146
internal_loss = 0.0030
f_hwhm_MHz = 65.0
pump_mW = 225.0
threshold_mW = 490.0

[detection]
propagation_loss = 0.034
visibility = 0.991
photodiode_efficiency = 0.98
phase_jitter_deg = 0.8
electronic_loss_snr_db = 20.0
"#;

    #[test]
    fn layout_file_builds_the_ring() {
        let file: LayoutFile = parse_with_overrides(LAYOUT, &[]).unwrap();
        let layout = file.build().unwrap();
        assert_eq!(layout.elements().len(), 9);
        assert_eq!(layout.reference_plane(), "crystal centre");
        assert!((layout.wavelength() - 860e-9).abs() < 1e-18);
        assert_eq!(layout.output_coupler().unwrap().element, 2);
        assert!((layout.mirror_spacing().unwrap() - 22e-3).abs() < 1e-12);
        assert!(layout.is_stable(TransversePlane::Tangential));
        assert!(layout.is_stable(TransversePlane::Sagittal));
    }

    #[test]
    fn params_file_builds_opo_and_chain() {
        let file: ParamsFile = parse_with_overrides(PARAMS, &[]).unwrap();
        let opo = file.opo().unwrap();
        assert!((opo.f_hwhm - 65e6).abs() < 1.0);
        assert!((opo.xi() - (225.0f64 / 490.0).sqrt()).abs() < 1e-12);
        let chain = file
            .detection_chain(|_| panic!("no table expected"))
            .unwrap();
        assert!((chain.electronic_loss.loss_at(0.0) - 0.01).abs() < 1e-12);
        assert!((chain.phase_jitter_rms - 0.8f64.to_radians()).abs() < 1e-15);
        // Defaults fill the trace/analyzer sections.
        let ac = file.analyzer_config().unwrap();
        assert_eq!(ac.n_averages, 600);
        let tc = file.trace_config(7).unwrap();
        assert_eq!(tc.rng_seed, 7);
        assert_eq!(tc.highpass_cutoff, Some(300e3));
        assert!(tc.n_samples() >= 1 << 16);
    }

    #[test]
    fn linewidth_can_come_from_cavity_length() {
        let text = PARAMS.replace("f_hwhm_MHz = 65.0", "optical_length_mm = 53.0");
        let file: ParamsFile = parse_with_overrides(&text, &[]).unwrap();
        let opo = file.opo().unwrap();
        // c*T/(4*pi*l) for T = 0.146, l = 53 mm.
        assert!((opo.f_hwhm / 65.7e6 - 1.0).abs() < 0.01, "{}", opo.f_hwhm);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let file: ParamsFile = parse_with_overrides(
            PARAMS,
            &[
                "opo.pump_mW=100".to_string(),
                "detection.phase_jitter_deg=0.0".to_string(),
                "analyzer.span_MHz=[2.0, 150.0]".to_string(),
            ],
        )
        .unwrap();
        assert!((file.opo.pump_mw - 100.0).abs() < 1e-12);
        assert_eq!(file.detection.phase_jitter_deg, 0.0);
        assert_eq!(file.analyzer.span_mhz, [2.0, 150.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = PARAMS.replace("pump_mW", "pump_watts");
        assert!(parse_with_overrides::<ParamsFile>(&text, &[]).is_err());
        // Also via override.
        let err = parse_with_overrides::<ParamsFile>(PARAMS, &["opo.bogus=1".to_string()]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn ambiguous_linewidth_is_rejected() {
        let text = PARAMS.replace(
            "f_hwhm_MHz = 65.0",
            "f_hwhm_MHz = 65.0\noptical_length_mm = 53.0",
        );
        let file: ParamsFile = parse_with_overrides(&text, &[]).unwrap();
        assert!(matches!(file.opo(), Err(Error::Config(_))));
    }

    #[test]
    fn element_field_mixups_are_reported() {
        let text = LAYOUT.replace(
            "kind = \"flat-mirror\"\naoi_deg = 70.0",
            "kind = \"flat-mirror\"\naoi_deg = 70.0\nroc_mm = 10.0",
        );
        let file: LayoutFile = parse_with_overrides(&text, &[]).unwrap();
        match file.build() {
            Err(Error::Config(msg)) => assert!(msg.contains("roc_mm"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = LAYOUT.replace("kind = \"dielectric-slab\"", "kind = \"crystal\"");
        let file: LayoutFile = parse_with_overrides(&text, &[]).unwrap();
        assert!(matches!(file.build(), Err(Error::Config(_))));
    }

    #[test]
    fn disabled_highpass_round_trips() {
        let text = format!("{PARAMS}\n[trace]\nhighpass_kHz = 0.0\n");
        let file: ParamsFile = parse_with_overrides(&text, &[]).unwrap();
        assert_eq!(file.trace_config(1).unwrap().highpass_cutoff, None);
    }
}

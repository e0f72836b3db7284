//! Hardware parameters and design-variable domains.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default parameter set, shipped with the crate.
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../data/isaac_defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarParams {
    pub xb_size: u32,
    pub res_rram: u32,
    /// Watts while computing.
    pub power: f64,
    /// Seconds per analog MVM (including DAC drive and sample-and-hold).
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DacParams {
    pub resolution: u32,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcParams {
    pub resolution: u32,
    pub power: f64,
    /// Samples per second.
    pub frequency: f64,
}

/// A vector functional unit: power draw and element operations per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitParams {
    pub power: f64,
    pub frequency: f64,
}

impl UnitParams {
    pub fn latency(&self) -> f64 {
        1.0 / self.frequency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AluParams {
    pub shift_add: UnitParams,
    pub pooling: UnitParams,
    pub relu: UnitParams,
    pub vector_add: UnitParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScratchpadParams {
    pub size_bytes: u64,
    pub bus_width_bits: u32,
    pub power: f64,
    /// Bus transfers per second.
    pub frequency: f64,
    /// Load slowdown per unit of buffer overflow fraction.
    pub spill_penalty: f64,
}

impl ScratchpadParams {
    /// Bits per second through one macro's scratchpad port.
    pub fn bandwidth(&self) -> f64 {
        f64::from(self.bus_width_bits) * self.frequency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NocParams {
    pub flit_size_bits: u32,
    pub ports: u32,
    /// Router power per macro.
    pub power: f64,
    /// Flits per second per router.
    pub frequency: f64,
    /// Seconds per mesh hop.
    pub hop_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterParams {
    /// Register-file power per macro.
    pub power: f64,
}

/// Rule deriving the ADC resolution from the crossbar configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdcPolicy {
    /// `ceil(log2(xb_size)) + res_rram + res_dac + offset`, raised to
    /// `min_bits`; anything above `max_bits` is infeasible.
    Lossless {
        offset: i32,
        min_bits: u32,
        max_bits: u32,
    },
    Fixed {
        bits: u32,
    },
}

impl Default for AdcPolicy {
    fn default() -> Self {
        AdcPolicy::Lossless {
            offset: -2,
            min_bits: 7,
            max_bits: 14,
        }
    }
}

/// Per-component power, frequency and latency figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareParams {
    pub label: String,
    pub crossbars: Vec<CrossbarParams>,
    pub dacs: Vec<DacParams>,
    pub adcs: Vec<AdcParams>,
    pub alu: AluParams,
    pub scratchpad: ScratchpadParams,
    pub noc: NocParams,
    pub register: RegisterParams,
    #[serde(default)]
    pub adc_policy: AdcPolicy,
}

impl Default for HardwareParams {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_PARAMS_JSON).expect("bundled defaults are valid")
    }
}

impl HardwareParams {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let params: HardwareParams = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "hardware parameter file".into(),
            message: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        fn pos(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        }
        for xb in &self.crossbars {
            let tag = format!("crossbar({}, {})", xb.xb_size, xb.res_rram);
            pos(&format!("{tag}.power"), xb.power)?;
            pos(&format!("{tag}.latency"), xb.latency)?;
            if xb.xb_size == 0 || xb.res_rram == 0 {
                return Err(Error::InvalidParameter(format!("{tag} has a zero dimension")));
            }
        }
        for dac in &self.dacs {
            pos(&format!("dac({}).power", dac.resolution), dac.power)?;
        }
        for adc in &self.adcs {
            pos(&format!("adc({}).power", adc.resolution), adc.power)?;
            pos(&format!("adc({}).frequency", adc.resolution), adc.frequency)?;
        }
        for bits in 7..=14 {
            if !self.adcs.iter().any(|a| a.resolution == bits) {
                return Err(Error::MissingParameter(format!("adc resolution {bits}")));
            }
        }
        for (name, unit) in [
            ("alu.shift_add", self.alu.shift_add),
            ("alu.pooling", self.alu.pooling),
            ("alu.relu", self.alu.relu),
            ("alu.vector_add", self.alu.vector_add),
        ] {
            pos(&format!("{name}.power"), unit.power)?;
            pos(&format!("{name}.frequency"), unit.frequency)?;
        }
        pos("scratchpad.power", self.scratchpad.power)?;
        pos("scratchpad.frequency", self.scratchpad.frequency)?;
        pos("scratchpad.size_bytes", self.scratchpad.size_bytes as f64)?;
        pos("scratchpad.bus_width_bits", f64::from(self.scratchpad.bus_width_bits))?;
        if !(self.scratchpad.spill_penalty >= 0.0) {
            return Err(Error::InvalidParameter("scratchpad.spill_penalty must be >= 0".into()));
        }
        pos("noc.power", self.noc.power)?;
        pos("noc.frequency", self.noc.frequency)?;
        pos("noc.hop_latency", self.noc.hop_latency)?;
        pos("noc.flit_size_bits", f64::from(self.noc.flit_size_bits))?;
        pos("noc.ports", f64::from(self.noc.ports))?;
        pos("register.power", self.register.power)?;
        Ok(())
    }

    pub fn crossbar(&self, xb_size: u32, res_rram: u32) -> Result<&CrossbarParams> {
        self.crossbars
            .iter()
            .find(|c| c.xb_size == xb_size && c.res_rram == res_rram)
            .ok_or_else(|| {
                Error::MissingParameter(format!("crossbar size {xb_size} with {res_rram}-bit cells"))
            })
    }

    /// Power of one computing crossbar.
    pub fn crossbar_power(&self, xb_size: u32, res_rram: u32) -> Result<f64> {
        self.crossbar(xb_size, res_rram).map(|c| c.power)
    }

    pub fn dac(&self, resolution: u32) -> Result<&DacParams> {
        self.dacs
            .iter()
            .find(|d| d.resolution == resolution)
            .ok_or_else(|| Error::MissingParameter(format!("{resolution}-bit DAC")))
    }

    pub fn adc(&self, resolution: u32) -> Result<&AdcParams> {
        self.adcs
            .iter()
            .find(|a| a.resolution == resolution)
            .ok_or_else(|| Error::MissingParameter(format!("{resolution}-bit ADC")))
    }

    /// Minimum ADC resolution that reads crossbar columns without losing bits.
    pub fn required_adc_resolution(&self, xb_size: u32, res_rram: u32, res_dac: u32) -> Result<u32> {
        required_adc_resolution(&self.adc_policy, xb_size, res_rram, res_dac)
    }

    /// Fixed power of one macro: scratchpad, router and registers.
    pub fn macro_overhead_power(&self) -> f64 {
        self.scratchpad.power + self.noc.power + self.register.power
    }
}

pub fn required_adc_resolution(policy: &AdcPolicy, xb_size: u32, res_rram: u32, res_dac: u32) -> Result<u32> {
    match *policy {
        AdcPolicy::Fixed { bits } => Ok(bits),
        AdcPolicy::Lossless {
            offset,
            min_bits,
            max_bits,
        } => {
            let log2 = xb_size.max(1).next_power_of_two().trailing_zeros() as i64;
            let raw = log2 + i64::from(res_rram) + i64::from(res_dac) + i64::from(offset);
            let bits = raw.max(i64::from(min_bits)) as u32;
            if bits > max_bits {
                Err(Error::InfeasiblePrecision {
                    required: bits,
                    max: max_bits,
                })
            } else {
                Ok(bits)
            }
        }
    }
}

/// Discrete domains of the swept design variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DseDomains {
    pub ratio_rram: Vec<f64>,
    pub xb_sizes: Vec<u32>,
    pub res_rram: Vec<u32>,
    pub res_dac: Vec<u32>,
    pub sa_top_k: usize,
}

impl Default for DseDomains {
    fn default() -> Self {
        DseDomains {
            ratio_rram: ratio_grid(0.1, 0.4, 4),
            xb_sizes: vec![128, 256, 512],
            res_rram: vec![1, 2, 4],
            res_dac: vec![1, 2, 4],
            sa_top_k: 30,
        }
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn ratio_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        n => (0..n)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                // keep grid values printable as short decimals
                (v * 1e9).round() / 1e9
            })
            .collect(),
    }
}

impl DseDomains {
    pub fn validate(&self) -> Result<()> {
        if self.ratio_rram.is_empty()
            || self.xb_sizes.is_empty()
            || self.res_rram.is_empty()
            || self.res_dac.is_empty()
        {
            return Err(Error::Config("every design-variable domain must be non-empty".into()));
        }
        if let Some(r) = self.ratio_rram.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::Config(format!("ratio_rram value {r} outside (0, 1)")));
        }
        if self.sa_top_k == 0 {
            return Err(Error::Config("sa_top_k must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of (RatioRram, ResRram, XbSize) prefixes.
    pub fn outer_triples(&self) -> usize {
        self.ratio_rram.len() * self.res_rram.len() * self.xb_sizes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossbar_power_range_matches_defaults() {
        let hw = HardwareParams::default();
        assert!((hw.crossbar_power(128, 1).unwrap() - 0.3e-3).abs() < 1e-12);
        assert!((hw.crossbar_power(512, 4).unwrap() - 4.8e-3).abs() < 1e-12);
        assert!(matches!(hw.crossbar_power(64, 1), Err(Error::MissingParameter(_))));
    }

    #[test]
    fn crossbar_power_monotone_in_size() {
        let hw = HardwareParams::default();
        for r in [1, 2, 4] {
            let p: Vec<f64> = [128, 256, 512]
                .iter()
                .map(|&s| hw.crossbar_power(s, r).unwrap())
                .collect();
            assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
        }
    }

    #[test]
    fn adc_resolution_examples() {
        let hw = HardwareParams::default();
        assert_eq!(hw.required_adc_resolution(128, 2, 1).unwrap(), 8);
        assert_eq!(hw.required_adc_resolution(128, 1, 1).unwrap(), 7);
        assert!(matches!(
            hw.required_adc_resolution(512, 4, 4),
            Err(Error::InfeasiblePrecision { required: 15, max: 14 })
        ));
    }

    #[test]
    fn every_domain_triple_is_in_window_or_rejected() {
        let hw = HardwareParams::default();
        let d = DseDomains::default();
        for &xb in &d.xb_sizes {
            for &rr in &d.res_rram {
                for &rd in &d.res_dac {
                    match hw.required_adc_resolution(xb, rr, rd) {
                        Ok(bits) => {
                            assert!((7..=14).contains(&bits));
                            assert!(hw.adc(bits).is_ok());
                        }
                        Err(Error::InfeasiblePrecision { required, .. }) => assert!(required > 14),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn default_ratio_grid() {
        assert_eq!(DseDomains::default().ratio_rram, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn validation_rejects_missing_adc_row() {
        let mut hw = HardwareParams::default();
        hw.adcs.retain(|a| a.resolution != 11);
        assert!(matches!(hw.validate(), Err(Error::MissingParameter(_))));
    }

    #[test]
    fn validation_rejects_nonpositive_power() {
        let mut hw = HardwareParams::default();
        hw.noc.power = 0.0;
        assert!(matches!(hw.validate(), Err(Error::InvalidParameter(_))));
    }
}

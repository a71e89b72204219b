//! Analytic FPGA cost model and the constraint gate.
//!
//! The model prices a 10-field CNN configuration `(kh, kw, nk, sh, sw, pool,
//! ai, af, wi, wf)` on a 32x32 input:
//!
//! ```text
//! lut_count  = kh * kw * nk * (wi + wf) * (ai + af)
//! throughput = 10^7 / (ceil(32/sh) * ceil(32/sw) * kh * kw * nk * pool)
//! ```
//!
//! Bigger, wider, higher-precision networks cost more lookup tables and less
//! throughput. A configuration is feasible when `lut_count <= lut_max` and
//! `throughput >= throughput_min`; infeasible configurations earn reward 0.
//! Degenerate inputs (zero stride or pool, zero total bit-width) report
//! `lut_count = 0, throughput = 0, feasible = false` instead of erroring, so
//! a miner handed a degenerate searching range keeps searching.

use crate::space::Configuration;

/// Field count of a hardware-modelled configuration.
pub const CNN_ARITY: usize = 10;

/// Input image edge (CIFAR-scale).
const INPUT_EDGE: u64 = 32;

/// Throughput numerator; sized so mid-range configurations straddle the
/// default lower bound of 10.
const THROUGHPUT_SCALE: f64 = 1.0e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareConstraints {
    /// Upper bound on FPGA lookup tables (chip size proxy).
    pub lut_max: u64,
    /// Lower bound on relative throughput (latency proxy).
    pub throughput_min: f64,
}

impl Default for HardwareConstraints {
    fn default() -> Self {
        Self {
            lut_max: 100_000,
            throughput_min: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareEstimate {
    pub lut_count: u64,
    pub throughput: f64,
    pub feasible: bool,
}

/// Price a configuration against the constraints. Pure; equal inputs give
/// bit-equal outputs. Configurations that are not 10-field CNNs are outside
/// the model and reported as feasible with zero cost (no hardware opinion).
pub fn estimate(config: &Configuration, hc: &HardwareConstraints) -> HardwareEstimate {
    let v = config.values();
    if v.len() != CNN_ARITY {
        return HardwareEstimate {
            lut_count: 0,
            throughput: 0.0,
            feasible: true,
        };
    }
    let (kh, kw, nk) = (v[0] as u64, v[1] as u64, v[2] as u64);
    let (sh, sw, pool) = (v[3] as u64, v[4] as u64, v[5] as u64);
    let act_bits = v[6] as u64 + v[7] as u64;
    let weight_bits = v[8] as u64 + v[9] as u64;

    if kh == 0 || kw == 0 || nk == 0 || sh == 0 || sw == 0 || pool == 0 {
        return infeasible_zero();
    }
    if act_bits == 0 || weight_bits == 0 {
        // A zero-width datapath carries no information.
        return infeasible_zero();
    }

    let lut_count = kh * kw * nk * weight_bits * act_bits;
    let out_h = INPUT_EDGE.div_ceil(sh);
    let out_w = INPUT_EDGE.div_ceil(sw);
    let work = (out_h * out_w * kh * kw * nk * pool) as f64;
    let throughput = THROUGHPUT_SCALE / work;
    let feasible = lut_count <= hc.lut_max && throughput >= hc.throughput_min;
    HardwareEstimate {
        lut_count,
        throughput,
        feasible,
    }
}

fn infeasible_zero() -> HardwareEstimate {
    HardwareEstimate {
        lut_count: 0,
        throughput: 0.0,
        feasible: false,
    }
}

/// Zero the reward of any configuration that violates the constraints; pass
/// feasible rewards through untouched.
pub fn gate(config: &Configuration, hc: &HardwareConstraints, raw_reward: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&raw_reward));
    if estimate(config, hc).feasible {
        raw_reward
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnn(values: [u32; 10]) -> Configuration {
        Configuration::new(values.to_vec())
    }

    #[test]
    fn minimal_config_four_luts() {
        let c = cnn([1, 1, 4, 1, 1, 1, 0, 1, 0, 1]);
        let e = estimate(&c, &HardwareConstraints::default());
        assert_eq!(e.lut_count, 4); // 1*1*4*1*1
        assert!(e.feasible);
    }

    #[test]
    fn mid_config_hand_computed() {
        // 5*5*64*(2+4)*(2+4) = 57,600 LUTs; work = 16*16*5*5*64*2 = 819,200
        // so throughput = 1e7/819200 = 12.207...
        let c = cnn([5, 5, 64, 2, 2, 2, 2, 4, 2, 4]);
        let e = estimate(&c, &HardwareConstraints::default());
        assert_eq!(e.lut_count, 57_600);
        assert!((e.throughput - 1.0e7 / 819_200.0).abs() < 1e-12);
        assert!(e.feasible);
    }

    #[test]
    fn oversized_config_infeasible() {
        // 9*9*128*(4+6)*(3+6) = 933,120 > 100,000
        let c = cnn([9, 9, 128, 1, 1, 1, 3, 6, 4, 6]);
        let e = estimate(&c, &HardwareConstraints::default());
        assert_eq!(e.lut_count, 933_120);
        assert!(!e.feasible);
    }

    #[test]
    fn zero_stride_is_infeasible_not_an_error() {
        let c = cnn([5, 5, 64, 0, 2, 1, 2, 4, 2, 4]);
        let e = estimate(&c, &HardwareConstraints::default());
        assert_eq!(e.lut_count, 0);
        assert_eq!(e.throughput, 0.0);
        assert!(!e.feasible);
        assert_eq!(gate(&c, &HardwareConstraints::default(), 0.5), 0.0);
    }

    #[test]
    fn zero_bit_widths_are_infeasible() {
        let hc = HardwareConstraints::default();
        let no_weight = cnn([3, 3, 8, 1, 1, 1, 1, 2, 0, 0]);
        assert!(!estimate(&no_weight, &hc).feasible);
        let no_act = cnn([3, 3, 8, 1, 1, 1, 0, 0, 1, 2]);
        assert!(!estimate(&no_act, &hc).feasible);
    }

    #[test]
    fn gate_passes_and_zeroes() {
        let hc = HardwareConstraints::default();
        let ok = cnn([5, 5, 64, 2, 2, 2, 2, 4, 2, 4]);
        assert_eq!(gate(&ok, &hc, 0.83), 0.83);
        let bad = cnn([9, 9, 128, 1, 1, 1, 3, 6, 4, 6]);
        assert_eq!(gate(&bad, &hc, 0.99), 0.0);
    }

    #[test]
    fn gate_is_idempotent() {
        let hc = HardwareConstraints::default();
        for c in [
            cnn([5, 5, 64, 2, 2, 2, 2, 4, 2, 4]),
            cnn([9, 9, 128, 1, 1, 1, 3, 6, 4, 6]),
            cnn([5, 5, 64, 0, 2, 1, 2, 4, 2, 4]),
        ] {
            let once = gate(&c, &hc, 0.7);
            assert_eq!(gate(&c, &hc, once), once);
        }
    }

    #[test]
    fn lut_monotone_in_each_factor() {
        let hc = HardwareConstraints::default();
        let base = [3u32, 3, 8, 1, 1, 1, 1, 2, 1, 2];
        let lut_of = |v: [u32; 10]| estimate(&cnn(v), &hc).lut_count;
        let baseline = lut_of(base);
        for idx in [0usize, 1, 2, 6, 7, 8, 9] {
            let mut bumped = base;
            bumped[idx] += 1;
            assert!(
                lut_of(bumped) >= baseline,
                "lut decreased when raising field {idx}"
            );
        }
    }

    #[test]
    fn estimate_is_pure() {
        let c = cnn([5, 5, 64, 2, 2, 2, 2, 4, 2, 4]);
        let hc = HardwareConstraints::default();
        let a = estimate(&c, &hc);
        let b = estimate(&c, &hc);
        assert_eq!(a.lut_count, b.lut_count);
        assert_eq!(a.throughput.to_bits(), b.throughput.to_bits());
        assert_eq!(a.feasible, b.feasible);
    }

    #[test]
    fn non_cnn_arity_bypasses_the_model() {
        let tiny = Configuration::new(vec![1, 2]);
        let hc = HardwareConstraints::default();
        assert!(estimate(&tiny, &hc).feasible);
        assert_eq!(gate(&tiny, &hc, 0.4), 0.4);
    }
}

//! Standard normal density, distribution function and quantile.

use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// `Φ(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)`, accurate far into the tail.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Φ⁻¹(prob)` on the open unit interval.
pub fn quantile(prob: f64) -> Result<f64> {
    if prob > 0.0 && prob < 1.0 {
        Ok(ppnd16(prob))
    } else {
        Err(Error::OutOfDomain(prob))
    }
}

/// `Z_{1−α}`: the upper-`α` critical value.
pub fn upper_critical(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(-ppnd16(alpha))
    } else {
        Err(Error::OutOfDomain(alpha))
    }
}

/// Inverse of [`sf`] without the domain check; `0` maps to `+∞`, `1` to `−∞`.
pub(crate) fn isf_unchecked(q: f64) -> f64 {
    if q <= 0.0 {
        f64::INFINITY
    } else if q >= 1.0 {
        f64::NEG_INFINITY
    } else {
        -ppnd16(q)
    }
}

// Wichura's AS 241 (PPND16), relative accuracy about 1e-16, followed by one
// Halley step against erfc to clean up the last bits.
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    let x = if libm::fabs(q) <= 0.425 {
        let r = 0.180625 - q * q;
        q * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
            + 67265.770_927_008_700)
            * r
            + 45921.953_931_549_871)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_4 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0)
    } else {
        let mut r = if q < 0.0 { p } else { 1.0 - p };
        r = libm::sqrt(-libm::log(r));
        let val = if r <= 5.0 {
            r -= 1.6;
            (((((((7.745_450_142_783_414_1e-4 * r + 0.022_723_844_989_269_184) * r
                + 0.241_780_725_177_450_61)
                * r
                + 1.270_458_252_452_368_4)
                * r
                + 3.647_848_324_763_204_5)
                * r
                + 5.769_497_221_460_691_4)
                * r
                + 4.630_337_846_156_545_3)
                * r
                + 1.423_437_110_749_683_5)
                / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4) * r
                    + 0.015_198_666_563_616_457)
                    * r
                    + 0.148_103_976_427_480_07)
                    * r
                    + 0.689_767_334_985_100_05)
                    * r
                    + 1.676_384_830_183_803_8)
                    * r
                    + 2.053_191_626_637_758_8)
                    * r
                    + 1.0)
        } else {
            r -= 5.0;
            (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
                + 1.242_660_947_388_078_4e-3)
                * r
                + 0.026_532_189_526_576_123)
                * r
                + 0.296_560_571_828_504_89)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114_4)
                * r
                + 6.657_904_643_501_103_8)
                / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                    + 1.846_318_317_510_054_8e-5)
                    * r
                    + 7.868_691_311_456_132_6e-4)
                    * r
                    + 0.014_875_361_290_850_615)
                    * r
                    + 0.136_929_880_922_735_81)
                    * r
                    + 0.599_832_206_555_887_94)
                    * r
                    + 1.0)
        };
        if q < 0.0 {
            -val
        } else {
            val
        }
    };
    refine(x, p)
}

fn refine(x: f64, p: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    // Residual taken on whichever tail is small so it stays well conditioned.
    let err = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - sf(x) };
    let dens = pdf(x);
    if dens == 0.0 {
        return x;
    }
    let u = err / dens;
    x - u / (1.0 + 0.5 * x * u)
}

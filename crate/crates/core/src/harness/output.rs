use std::io::Write;

use crate::beamforming::Scheme;
use crate::error::Result;

/// Column names, in output order.
pub const RESULT_HEADER: [&str; 11] = [
    "scenario",
    "realization",
    "seed",
    "scheme",
    "n_d",
    "pre_snr_db",
    "elevation_errors_rad",
    "azimuth_errors_rad",
    "eta",
    "post_snr_db",
    "wall_time_s",
];

/// Comment lines written above the header.
pub const RESULT_PREAMBLE: &str = "\
# pre_snr_db: narrowband = 10*log10(||v||^2 / M_r) with v the noiseless received vector; wideband = configured SNR per receive antenna per chip\n\
# post_snr_db = 10*log10(mean_t |b^H x[t]|^2 / ||b||^2), unit noise power per antenna\n\
# eta = |b^H v|^2 / |b_IDEAL^H v|^2 (narrowband only)\n\
# angle errors: absolute, one per true path in generation order, ';'-separated\n";

/// One (realization, scheme, pilot length) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub realization: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub n_d: usize,
    pub pre_snr_db: f64,
    pub elevation_errors: Vec<f64>,
    pub azimuth_errors: Vec<f64>,
    pub eta: Option<f64>,
    pub post_snr_db: f64,
    pub wall_time_s: Option<f64>,
}

/// Decimal notation with `digits` significant digits (never scientific).
pub fn format_significant(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    if v == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    // let the scientific formatter do the rounding, then read the exponent
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i64 = sci[sci.find('e').expect("scientific format") + 1..]
        .parse()
        .expect("exponent");
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn float(v: f64) -> String {
    format_significant(v, 9)
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| float(*x)).collect::<Vec<_>>().join(";")
}

impl ResultRow {
    pub fn record(&self) -> [String; 11] {
        [
            self.scenario.clone(),
            self.realization.to_string(),
            self.seed.to_string(),
            self.scheme.to_string(),
            self.n_d.to_string(),
            float(self.pre_snr_db),
            list(&self.elevation_errors),
            list(&self.azimuth_errors),
            self.eta.map(float).unwrap_or_default(),
            float(self.post_snr_db),
            self.wall_time_s.map(float).unwrap_or_default(),
        ]
    }
}

/// Writes the preamble, header and rows.
pub fn write_results<W: Write>(mut out: W, rows: &[ResultRow]) -> Result<()> {
    out.write_all(RESULT_PREAMBLE.as_bytes())
        .map_err(csv::Error::from)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_significant(1.0, 9), "1.00000000");
        assert_eq!(format_significant(-0.123456789123, 9), "-0.123456789");
        assert_eq!(format_significant(12345.6789012, 9), "12345.6789");
        assert_eq!(format_significant(1.23456789e-5, 9), "0.0000123456789");
        assert_eq!(format_significant(123456789012.0, 9), "123456789012");
        assert_eq!(format_significant(0.0, 9), "0.00000000");
        // rounding that carries into a new leading digit
        assert_eq!(format_significant(9.999999999, 9), "10.0000000");
        assert_eq!(format_significant(f64::NAN, 9), "NaN");
    }

    #[test]
    fn csv_layout() {
        let row = ResultRow {
            scenario: "s".into(),
            realization: 2,
            seed: 9,
            scheme: Scheme::Est,
            n_d: 40,
            pre_snr_db: -3.5,
            elevation_errors: vec![0.01, 0.02],
            azimuth_errors: vec![],
            eta: Some(0.95),
            post_snr_db: 10.0,
            wall_time_s: None,
        };
        let mut buf = Vec::new();
        write_results(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], RESULT_HEADER.join(","));
        assert_eq!(
            lines[1],
            "s,2,9,EST,40,-3.50000000,0.0100000000;0.0200000000,,0.950000000,10.0000000,"
        );
    }
}

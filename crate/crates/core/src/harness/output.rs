use std::io::Write;

use super::TrialResult;

pub const CSV_HEADER: &str =
    "scheme,R,B,trial,seed,min_sumrate_bpshz,dir1_sumrate,dir2_sumrate,outer_iters,wall_ms";

/// Format with `digits` significant digits: positional for moderate
/// magnitudes, scientific otherwise.
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    // the exponent is read back from scientific formatting so that rounding
    // across a power of ten (9.99.. -> 10.0) is accounted for
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').expect("scientific format") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[TrialResult]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.ris_elements,
            r.codebook,
            r.trial,
            r.seed,
            format_sig(r.min_sumrate, 12),
            format_sig(r.dir_sumrates[0], 12),
            format_sig(r.dir_sumrates[1], 12),
            r.outer_iters,
            r.wall_ms
        )?;
    }
    Ok(())
}

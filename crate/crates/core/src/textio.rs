//! Shared text encoding for reals in CSV and model files.

use std::fmt::Write;

/// 17 significant decimal digits, which round-trips every finite `f64`.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn push_real(buf: &mut String, v: f64) {
    write!(buf, "{v:.16e}").expect("writing to a String cannot fail");
}

pub fn join_reals(values: &[f64], sep: &str) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push_str(sep);
        }
        push_real(&mut s, *v);
    }
    s
}

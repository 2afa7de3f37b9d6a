//! Plain-text matrix format: one row per line, `,`-separated, every value
//! printed like C's `%.17g`.

use super::{LinalgError, Matrix, Result};

/// Format a float exactly as C's `printf("%.17g", v)`.
pub fn fmt_g17(v: f64) -> String {
    const P: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // 17 significant digits, correctly rounded
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");

    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|&v| fmt_g17(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| LinalgError::Parse {
                    line: idx + 1,
                    reason: format!("{t:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(LinalgError::Parse {
                    line: idx + 1,
                    reason: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LinalgError::Parse { line: 0, reason: "no rows".into() });
    }
    let (r, c) = (rows.len(), rows[0].len());
    let m = Matrix::from_row_iterator(r, c, rows.into_iter().flatten());
    super::ensure_finite(&m)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_g17() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (0.0, "0"),
            (-0.0, "-0"),
            (7.76, "7.7599999999999998"),
            (1e-5, "1.0000000000000001e-05"),
            (0.00012345, "0.00012344999999999999"),
            (1.2345678901234568e17, "1.2345678901234568e+17"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (-1608.84, "-1608.8399999999999"),
            (3.1622776601683795, "3.1622776601683795"),
            (1e-300, "1e-300"),
            (2.5e300, "2.5000000000000001e+300"),
            (0.0001, "0.0001"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_g17(v), s, "{v:?}");
        }
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matches!(from_csv("1,2\n3\n"), Err(LinalgError::Parse { line: 2, .. })));
        assert!(matches!(from_csv("1,x\n"), Err(LinalgError::Parse { line: 1, .. })));
        assert!(from_csv("\n\n").is_err());
        assert_eq!(from_csv("nan\n").unwrap_err(), LinalgError::NonFinite);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(v in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let m = Matrix::from_row_slice(3, 4, &v);
            prop_assert_eq!(from_csv(&to_csv(&m)).unwrap(), m);
        }
    }
}

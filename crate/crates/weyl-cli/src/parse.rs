//! Parsers for the inline argument syntaxes.
//!
//! * spec: `N=5,n=0:3,nu=0.5+1i`, optionally `discrete=+` (with `nu = p - 1/2`)
//! * lambda: rows top-down separated by `/`, entries by `,`; `0` is the zero array
//! * tuples: `0,2` or `-1,3`

use std::str::FromStr;

use weyl_core::gc_lattice::GcArray;
use weyl_core::rep_params::{RepSpec, Sign};
use weyl_core::C64;

use crate::error::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_tuple(s: &str) -> Result<Vec<i64>, CliError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| usage(format!("bad integer {t:?} in {s:?}"))))
        .collect()
}

pub fn parse_dims(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| usage(format!("bad dimension {t:?}"))))
        .collect()
}

/// Accepts `0.5`, `2i`, `-i`, `0.5+1i`, `1e-3-2i`.
pub fn parse_nu(s: &str) -> Result<C64, CliError> {
    let t = s.trim();
    let fixed = match t {
        "i" | "+i" => "1i".to_string(),
        "-i" => "-1i".to_string(),
        _ if t.ends_with("+i") || t.ends_with("-i") => format!("{}1i", &t[..t.len() - 1]),
        _ => t.to_string(),
    };
    C64::from_str(&fixed).map_err(|_| usage(format!("cannot parse nu = {s:?}")))
}

pub fn parse_spec(s: &str) -> Result<RepSpec, CliError> {
    let mut dim = None;
    let mut n = None;
    let mut nu = None;
    let mut discrete = None;
    for field in s.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| usage(format!("expected key=value in spec, got {field:?}")))?;
        match key.trim() {
            "N" => dim = Some(value.trim().parse::<usize>().map_err(|_| usage(format!("bad N {value:?}")))?),
            "n" => n = Some(parse_tuple(&value.replace(':', ","))?),
            "nu" => nu = Some(parse_nu(value)?),
            "discrete" => {
                discrete = Some(match value.trim() {
                    "+" => Sign::Plus,
                    "-" => Sign::Minus,
                    other => return Err(usage(format!("discrete sign must be + or -, got {other:?}"))),
                })
            }
            other => return Err(usage(format!("unknown spec key {other:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| usage("spec needs N"))?;
    let n = n.unwrap_or_else(|| vec![0; dim.saturating_sub(1) / 2]);
    let nu = nu.ok_or_else(|| usage("spec needs nu"))?;
    let spec = match discrete {
        Some(sign) => {
            let p = nu.re + 0.5;
            if nu.im != 0.0 || p.fract() != 0.0 {
                return Err(usage("a discrete spec needs nu = p - 1/2 with integer p"));
            }
            RepSpec::discrete(dim, n, p as i64, sign)?
        }
        None => RepSpec::new(dim, n, nu)?,
    };
    Ok(spec)
}

pub fn parse_lambda(s: &str, dim: usize) -> Result<GcArray, CliError> {
    if s.trim() == "0" {
        return Ok(GcArray::zero(dim));
    }
    let rows = s.split('/').map(parse_tuple).collect::<Result<Vec<_>, _>>()?;
    let lam = GcArray::from_rows_top_down(rows);
    lam.check_shape(dim)?;
    Ok(lam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use weyl_core::rep_params::SeriesClass;
    use weyl_core::WeylError;

    #[test]
    fn nu_forms() {
        assert_eq!(parse_nu("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_nu("2i").unwrap(), C64::new(0.0, 2.0));
        assert_eq!(parse_nu("0.5+1i").unwrap(), C64::new(0.5, 1.0));
        assert_eq!(parse_nu("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_nu("1+i").unwrap(), C64::new(1.0, 1.0));
        assert!(parse_nu("abc").is_err());
    }

    #[test]
    fn specs() {
        let s = parse_spec("N=5,n=0:3,nu=0.5").unwrap();
        assert_eq!(s.n(), &[0, 3]);
        assert!(matches!(s.series(), SeriesClass::Complementary { .. }));
        let s = parse_spec("N=3,n=0,nu=2i").unwrap();
        assert_eq!(s.series(), SeriesClass::Principal);
        let d = parse_spec("N=4,n=2,nu=1.5,discrete=+").unwrap();
        assert!(matches!(d.series(), SeriesClass::Discrete { p: 2, .. }));
        match parse_spec("N=3,n=0,nu=7") {
            Err(CliError::Weyl(WeylError::InvalidNu { .. })) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_spec("N=3,nu=0,x=1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn lambdas() {
        assert!(parse_lambda("0", 5).unwrap().is_zero());
        let l = parse_lambda("1/0", 4).unwrap();
        assert_eq!(l.rows_top_down(), vec![vec![1], vec![0]]);
        assert!(parse_lambda("1,2", 4).is_err());
    }
}

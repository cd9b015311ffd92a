//! Plain-text exchange format for block-diagonal matrix programs, in the
//! sparse SDPA layout:
//!
//! ```text
//! <number of constraints>
//! <number of blocks>
//! <block sizes, space separated>
//! <right-hand sides, space separated>
//! <entry lines: k b i j v>
//! ```
//!
//! Entry lines carry the upper triangle only (i <= j), 1-based block and
//! index numbering, with k = 0 for the objective and k >= 1 for constraint k.
//! Only nonzero entries are written, ordered by (k, b, i, j). Lines starting
//! with `"`, `*`, or `/` are comments on input.

use super::{Constraint, LinearMatrixProgram, SdpError};
use crate::linalg::DenseMatrix;

/// Serializes a well-formed program. Numbers render with 17 significant
/// digits (C's %.17g), with a ".0" suffix on values that would otherwise
/// print as integers, so every value round-trips through parsing bit-exactly.
pub fn export_sdpa(prog: &LinearMatrixProgram) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}\n", prog.constraints.len()));
    out.push_str(&format!("{}\n", prog.block_sizes.len()));
    let sizes: Vec<String> = prog.block_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let rhs: Vec<String> = prog.constraints.iter().map(|c| format_g17(c.rhs)).collect();
    out.push_str(&rhs.join(" "));
    out.push('\n');

    push_entries(&mut out, 0, &prog.objective);
    for (k, c) in prog.constraints.iter().enumerate() {
        push_entries(&mut out, k + 1, &c.coeffs);
    }
    out
}

fn push_entries(out: &mut String, k: usize, blocks: &[DenseMatrix]) {
    for (b, m) in blocks.iter().enumerate() {
        for i in 0..m.rows() {
            for j in i..m.cols() {
                let v = m.get(i, j);
                if v != 0.0 {
                    out.push_str(&format!(
                        "{} {} {} {} {}\n",
                        k,
                        b + 1,
                        i + 1,
                        j + 1,
                        format_g17(v)
                    ));
                }
            }
        }
    }
}

/// Formats like C's printf("%.17g") and then guarantees a float-looking
/// token: when the %g result carries neither '.' nor an exponent, ".0" is
/// appended (so 1.0 prints as "1.0", not "1").
pub(crate) fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    // Decimal exponent from the scientific rendering at 17 significant
    // digits (the same rounding %.17g applies).
    let sci = format!("{:.16e}", v);
    let exp: i32 = sci
        .split(['e', 'E'])
        .nth(1)
        .expect("scientific format always has an exponent")
        .parse()
        .expect("exponent is an integer");

    let mut s = if (-4..17).contains(&exp) {
        // Fixed notation with 17 significant digits total.
        let prec = (16 - exp) as usize;
        let fixed = format!("{:.*}", prec, v);
        trim_zeros(fixed)
    } else {
        // Scientific notation: trim the mantissa, pad the exponent to two
        // digits as %g does.
        let mantissa = sci.split(['e', 'E']).next().unwrap().to_string();
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exp.abs())
    };
    if !s.contains('.') && !s.contains('e') {
        s.push_str(".0");
    }
    s
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Parses the format written by [`export_sdpa`]. Comment lines (leading `"`,
/// `*`, or `/`) and blank lines are skipped; block sizes must be positive.
pub fn parse_sdpa(text: &str) -> Result<LinearMatrixProgram, SdpError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| {
        !l.is_empty() && !l.starts_with('"') && !l.starts_with('*') && !l.starts_with('/')
    });

    let (ln, m_line) = lines.next().ok_or_else(eof_err)?;
    let m: usize = parse_tokens::<usize>(m_line, ln)?
        .into_iter()
        .next()
        .ok_or_else(|| parse_err(ln, "expected the number of constraints"))?;

    let (ln, nb_line) = lines.next().ok_or_else(eof_err)?;
    let nblocks: usize = parse_tokens::<usize>(nb_line, ln)?
        .into_iter()
        .next()
        .ok_or_else(|| parse_err(ln, "expected the number of blocks"))?;
    if nblocks == 0 {
        return Err(parse_err(ln, "program must have at least one block"));
    }

    let (ln, sizes_line) = lines.next().ok_or_else(eof_err)?;
    let raw_sizes = parse_tokens::<i64>(sizes_line, ln)?;
    if raw_sizes.len() != nblocks {
        return Err(parse_err(
            ln,
            &format!("expected {} block sizes, found {}", nblocks, raw_sizes.len()),
        ));
    }
    if let Some(bad) = raw_sizes.iter().find(|&&s| s <= 0) {
        return Err(parse_err(ln, &format!("block sizes must be positive, found {bad}")));
    }
    let block_sizes: Vec<usize> = raw_sizes.iter().map(|&s| s as usize).collect();

    let (ln, rhs_line) = lines.next().ok_or_else(eof_err)?;
    let rhs = parse_tokens::<f64>(rhs_line, ln)?;
    if rhs.len() != m {
        return Err(parse_err(
            ln,
            &format!("expected {} right-hand sides, found {}", m, rhs.len()),
        ));
    }

    let zero_blocks = || block_sizes.iter().map(|&s| DenseMatrix::zeros(s, s)).collect::<Vec<_>>();
    let mut objective = zero_blocks();
    let mut coeffs: Vec<Vec<DenseMatrix>> = (0..m).map(|_| zero_blocks()).collect();

    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(parse_err(
                ln,
                &format!("expected 'k b i j v', found {} tokens", toks.len()),
            ));
        }
        let k: usize = toks[0].parse().map_err(|_| parse_err(ln, "bad constraint index"))?;
        let b: usize = toks[1].parse().map_err(|_| parse_err(ln, "bad block index"))?;
        let i: usize = toks[2].parse().map_err(|_| parse_err(ln, "bad row index"))?;
        let j: usize = toks[3].parse().map_err(|_| parse_err(ln, "bad column index"))?;
        let v: f64 = toks[4].parse().map_err(|_| parse_err(ln, "bad value"))?;
        if k > m {
            return Err(parse_err(ln, &format!("constraint index {k} out of range (m = {m})")));
        }
        if b == 0 || b > nblocks {
            return Err(parse_err(ln, &format!("block index {b} out of range")));
        }
        let size = block_sizes[b - 1];
        if i == 0 || j == 0 || i > size || j > size {
            return Err(parse_err(
                ln,
                &format!("entry ({i}, {j}) out of range for block size {size}"),
            ));
        }
        if i > j {
            return Err(parse_err(ln, "entries must address the upper triangle (i <= j)"));
        }
        let target = if k == 0 { &mut objective[b - 1] } else { &mut coeffs[k - 1][b - 1] };
        target.set(i - 1, j - 1, v);
        target.set(j - 1, i - 1, v);
    }

    let constraints: Vec<Constraint> =
        coeffs.into_iter().zip(rhs).map(|(c, r)| Constraint { coeffs: c, rhs: r }).collect();
    let prog = LinearMatrixProgram { block_sizes, objective, constraints };
    prog.validate()?;
    Ok(prog)
}

fn parse_tokens<T: std::str::FromStr>(line: &str, ln: usize) -> Result<Vec<T>, SdpError> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| parse_err(ln, &format!("bad token '{t}'"))))
        .collect()
}

fn parse_err(line: usize, msg: &str) -> SdpError {
    SdpError::Parse { line, msg: msg.to_string() }
}

fn eof_err() -> SdpError {
    SdpError::Parse { line: 0, msg: "unexpected end of input".to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_renders_integers_as_floats() {
        assert_eq!(format_g17(1.0), "1.0");
        assert_eq!(format_g17(-3.0), "-3.0");
        assert_eq!(format_g17(0.0), "0.0");
        assert_eq!(format_g17(10000000000000000.0), "10000000000000000.0");
    }

    #[test]
    fn g17_short_decimals_stay_short() {
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(123.456), "123.456");
        assert_eq!(format_g17(0.0001), "0.0001");
        assert_eq!(format_g17(-0.25), "-0.25");
    }

    #[test]
    fn g17_switches_to_scientific() {
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(2e20), "2e+20");
        assert_eq!(format_g17(-5e-7), "-4.9999999999999998e-07");
    }

    #[test]
    fn g17_survives_irrational_round_trip() {
        for v in [std::f64::consts::SQRT_2, 1.0 / 3.0, 9.869604401089358, 1e-17, 123456.789012] {
            let s = format_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
            let s2 = format_g17(-v);
            let back2: f64 = s2.parse().unwrap();
            assert_eq!(back2, -v, "{s2}");
        }
    }

    fn sample_program() -> LinearMatrixProgram {
        let a1 = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let a2 = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let c1 = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut s = DenseMatrix::zeros(1, 1);
        s.set(0, 0, -1.5);
        LinearMatrixProgram {
            block_sizes: vec![2, 1],
            objective: vec![c1, DenseMatrix::zeros(1, 1)],
            constraints: vec![
                Constraint { coeffs: vec![a1, s], rhs: 1.0 },
                Constraint {
                    coeffs: vec![a2, DenseMatrix::zeros(1, 1)],
                    rhs: std::f64::consts::SQRT_2,
                },
            ],
        }
    }

    #[test]
    fn round_trip_preserves_program() {
        let prog = sample_program();
        let text = export_sdpa(&prog);
        let back = parse_sdpa(&text).unwrap();
        assert_eq!(back.block_sizes, prog.block_sizes);
        assert_eq!(back.constraints.len(), prog.constraints.len());
        for (a, b) in prog.constraints.iter().zip(&back.constraints) {
            assert_eq!(a.rhs, b.rhs);
            for (ma, mb) in a.coeffs.iter().zip(&b.coeffs) {
                assert_eq!(ma.data(), mb.data());
            }
        }
        for (ma, mb) in prog.objective.iter().zip(&back.objective) {
            assert_eq!(ma.data(), mb.data());
        }
    }

    #[test]
    fn minimal_scalar_program_exports_exactly() {
        let prog = LinearMatrixProgram::feasibility(
            vec![1],
            vec![Constraint {
                coeffs: vec![DenseMatrix::from_rows(&[vec![1.0]]).unwrap()],
                rhs: 1.0,
            }],
        );
        assert_eq!(export_sdpa(&prog), "1\n1\n1\n1.0\n1 1 1 1 1.0\n");
    }

    #[test]
    fn export_layout_is_stable() {
        let prog = sample_program();
        let text = export_sdpa(&prog);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2");
        assert_eq!(lines[1], "2");
        assert_eq!(lines[2], "2 1");
        assert_eq!(lines[3], "1.0 1.4142135623730951");
        // Objective entries come first (k = 0), ordered by block and index.
        assert_eq!(lines[4], "0 1 1 1 1.0");
        assert_eq!(lines[5], "0 1 2 2 1.0");
        assert_eq!(lines[6], "1 1 1 1 1.0");
        assert_eq!(lines[7], "1 1 1 2 0.5");
        assert_eq!(lines[8], "1 2 1 1 -1.5");
        assert_eq!(lines[9], "2 1 2 2 2.0");
        assert_eq!(lines.len(), 10);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "\" header comment\n1\n* another\n1\n\n2\n/ slash comment\n3.5\n1 1 1 1 1.0\n1 1 2 2 1.0\n";
        let prog = parse_sdpa(text).unwrap();
        assert_eq!(prog.block_sizes, vec![2]);
        assert_eq!(prog.constraints[0].rhs, 3.5);
        assert_eq!(prog.constraints[0].coeffs[0].get(0, 0), 1.0);
        assert_eq!(prog.constraints[0].coeffs[0].get(1, 1), 1.0);
    }

    #[test]
    fn negative_block_sizes_are_rejected() {
        let text = "1\n1\n-2\n1.0\n1 1 1 1 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(SdpError::Parse { .. })));
    }

    #[test]
    fn lower_triangle_entries_are_rejected() {
        let text = "1\n1\n2\n1.0\n1 1 2 1 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(SdpError::Parse { .. })));
    }

    #[test]
    fn out_of_range_entries_are_rejected() {
        let text = "1\n1\n2\n1.0\n1 1 1 3 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(SdpError::Parse { .. })));
        let text2 = "1\n2\n2 2\n1.0\n1 3 1 1 1.0\n";
        assert!(matches!(parse_sdpa(text2), Err(SdpError::Parse { .. })));
    }
}

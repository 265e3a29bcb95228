//! Line-oriented netlist grammar.
//!
//! ```text
//! # comment
//! Mname drain gate source NMOS|PMOS W=<val> L=<val> [VTH=<val>] [DVTH=<val>]
//! PM0 drain gate source PMOS ...   (any other leading letter, given a model)
//! Cname n1 n2 <val>
//! Rname n1 n2 <val>
//! Iname n+ n- <val>
//! Vname n+ n- <val>
//! Vname n+ n- PWL(t1 v1 t2 v2 ...)
//! .probe node [alias]
//! ```
//!
//! Keywords are case-insensitive and `0` (or `gnd`) is ground. MOSFET lines
//! additionally accept `KP`, `LAMBDA`, `NSLOPE` and `UT` overrides.

use crate::devices::{MosfetParams, Polarity};
use crate::error::NetlistError;
use crate::units::{parse_scaled, parse_value};

use super::{Netlist, NetlistBuilder, VoltageValue};

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    let mut depth = 0usize;
    for (i, ch) in line.char_indices() {
        match ch {
            '(' => {
                depth += 1;
                start.get_or_insert(i);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                start.get_or_insert(i);
            }
            c if c.is_whitespace() && depth == 0 => {
                if let Some(s) = start.take() {
                    out.push(Token {
                        text: &line[s..i],
                        column: line[..s].chars().count() + 1,
                    });
                }
            }
            _ => {
                start.get_or_insert(i);
            }
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: line[..s].chars().count() + 1,
        });
    }
    out
}

struct LineCtx<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
    end_column: usize,
}

impl<'a> LineCtx<'a> {
    fn syntax(&self, column: usize, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn get(&self, i: usize, what: &str) -> Result<Token<'a>, NetlistError> {
        self.tokens
            .get(i)
            .copied()
            .ok_or_else(|| self.syntax(self.end_column, format!("expected {what}")))
    }

    fn value(&self, i: usize, what: &str) -> Result<f64, NetlistError> {
        let tok = self.get(i, what)?;
        parse_value(tok.text)
            .ok_or_else(|| self.syntax(tok.column, format!("invalid {what} '{}'", tok.text)))
    }

    fn expect_len(&self, n: usize) -> Result<(), NetlistError> {
        match self.tokens.get(n) {
            Some(extra) => Err(self.syntax(extra.column, format!("unexpected '{}'", extra.text))),
            None => Ok(()),
        }
    }
}

/// Parses netlist text. Parsing is deterministic and either yields a fully
/// validated [`Netlist`] or the first diagnostic encountered.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut b = NetlistBuilder::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let ctx = LineCtx {
            line: line_no,
            end_column: content.trim_end().chars().count() + 1,
            tokens,
        };
        let head = ctx.tokens[0];
        if let Some(directive) = head.text.strip_prefix('.') {
            if directive.eq_ignore_ascii_case("probe") {
                let node = ctx.get(1, "probe node")?.text;
                let alias = match ctx.tokens.get(2) {
                    Some(t) => t.text,
                    None => node,
                };
                ctx.expect_len(3)?;
                b.probe(node, alias);
                continue;
            }
            if directive.eq_ignore_ascii_case("end") {
                break;
            }
            return Err(ctx.syntax(head.column, format!("unknown directive '{}'", head.text)));
        }
        let name = head.text;
        if b.has_device(name) {
            return Err(NetlistError::DuplicateName {
                name: name.to_string(),
                line: Some(line_no),
            });
        }
        let mut kind = name.chars().next().unwrap().to_ascii_uppercase();
        // Names like `PM0` or `NC1` are MOSFETs when a model keyword
        // follows the three nodes.
        let model = ctx.tokens.get(4).map(|t| t.text);
        if !"MCRIV".contains(kind)
            && model.is_some_and(|m| m.eq_ignore_ascii_case("nmos") || m.eq_ignore_ascii_case("pmos"))
        {
            kind = 'M';
        }
        match kind {
            'M' => parse_mosfet(&ctx, &mut b)?,
            'C' | 'R' | 'I' => {
                let a = ctx.get(1, "node")?.text;
                let n = ctx.get(2, "node")?.text;
                let v = ctx.value(3, "value")?;
                ctx.expect_len(4)?;
                match kind {
                    'C' => b.capacitor(name, a, n, v),
                    'R' => b.resistor(name, a, n, v),
                    _ => b.current_source(name, a, n, v),
                };
            }
            'V' => {
                let a = ctx.get(1, "node")?.text;
                let n = ctx.get(2, "node")?.text;
                let tok = ctx.get(3, "value")?;
                let value = if tok.text.len() >= 3 && tok.text[..3].eq_ignore_ascii_case("pwl") {
                    parse_pwl(&ctx, tok)?
                } else {
                    VoltageValue::Dc(ctx.value(3, "value")?)
                };
                ctx.expect_len(4)?;
                b.voltage_source_value(name, a, n, value);
            }
            _ => {
                return Err(NetlistError::UnknownDeviceKind {
                    line: line_no,
                    kind: kind.to_string(),
                })
            }
        }
    }
    b.build()
}

fn parse_mosfet(ctx: &LineCtx<'_>, b: &mut NetlistBuilder) -> Result<(), NetlistError> {
    let name = ctx.tokens[0].text;
    let d = ctx.get(1, "drain node")?.text;
    let g = ctx.get(2, "gate node")?.text;
    let s = ctx.get(3, "source node")?.text;
    let ty = ctx.get(4, "NMOS or PMOS")?;
    let polarity: Polarity = ty
        .text
        .parse()
        .map_err(|_| ctx.syntax(ty.column, format!("expected NMOS or PMOS, got '{}'", ty.text)))?;
    let mut p = MosfetParams::default_for(polarity);
    let (mut have_w, mut have_l) = (false, false);
    for tok in &ctx.tokens[5..] {
        let (key, val) = tok
            .text
            .split_once('=')
            .ok_or_else(|| ctx.syntax(tok.column, format!("expected KEY=value, got '{}'", tok.text)))?;
        let bad = || ctx.syntax(tok.column, format!("invalid value in '{}'", tok.text));
        match key.to_ascii_uppercase().as_str() {
            "W" => {
                p.w = parse_scaled(val, -6).ok_or_else(bad)?;
                have_w = true;
            }
            "L" => {
                p.l = parse_scaled(val, -6).ok_or_else(bad)?;
                have_l = true;
            }
            "VTH" => {
                let v = parse_value(val).ok_or_else(bad)?;
                p.vth0 = match polarity {
                    Polarity::Nmos => v,
                    Polarity::Pmos => -v.abs(),
                };
            }
            "DVTH" => p.delta_vth = parse_value(val).ok_or_else(bad)?,
            "KP" => p.kp = parse_value(val).ok_or_else(bad)?,
            "LAMBDA" => p.lambda = parse_value(val).ok_or_else(bad)?,
            "NSLOPE" => p.n_slope = parse_value(val).ok_or_else(bad)?,
            "UT" => p.u_t = parse_value(val).ok_or_else(bad)?,
            _ => return Err(ctx.syntax(tok.column, format!("unknown MOSFET parameter '{key}'"))),
        }
    }
    if !have_w || !have_l {
        return Err(ctx.syntax(ctx.end_column, "MOSFET needs both W= and L="));
    }
    p.validate().map_err(|message| NetlistError::InvalidParameter {
        device: name.to_string(),
        message,
    })?;
    b.mosfet(name, d, g, s, p);
    Ok(())
}

fn parse_pwl(ctx: &LineCtx<'_>, tok: Token<'_>) -> Result<VoltageValue, NetlistError> {
    let body = tok.text[3..].trim_start();
    let inner = body
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| ctx.syntax(tok.column, "expected PWL(t1 v1 t2 v2 ...)"))?;
    let values = inner
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse_value(s).ok_or_else(|| ctx.syntax(tok.column, format!("invalid PWL value '{s}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(ctx.syntax(tok.column, "PWL needs an even, non-zero number of values"));
    }
    let points: Vec<(f64, f64)> = values.chunks(2).map(|c| (c[0], c[1])).collect();
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(ctx.syntax(tok.column, "PWL times must be strictly increasing"));
    }
    Ok(VoltageValue::Pwl(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Element;

    #[test]
    fn mosfet_line() {
        let n = parse_netlist("M1 d g s NMOS W=0.45u L=0.045u\nV1 d 0 1\nV2 g 0 1\nV3 s 0 0\n")
            .unwrap();
        let (name, p) = n.mosfets().next().unwrap();
        assert_eq!(name, "M1");
        assert_eq!(p.w, 0.45);
        assert_eq!(p.l, 0.045);
        assert_eq!(p.polarity, Polarity::Nmos);
    }

    #[test]
    fn capacitor_line() {
        let n = parse_netlist("C1 mem 0 100f\nI1 0 mem 1u\n").unwrap();
        match &n.devices()[0].element {
            Element::Capacitor { a, b, farads } => {
                assert_eq!(n.node_name(*a), "mem");
                assert!(b.is_ground());
                assert_eq!(*farads, 100e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_kind() {
        let err = parse_netlist("Q1 a b c").unwrap_err();
        assert_eq!(
            err,
            NetlistError::UnknownDeviceKind {
                line: 1,
                kind: "Q".into()
            }
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_netlist("# header\nC1 a 0 10x\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::Syntax {
                line: 2,
                column: 8,
                message: "invalid value '10x'".into()
            }
        );
    }

    #[test]
    fn duplicate_and_dangling() {
        let err = parse_netlist("R1 a 0 1k\nR1 a 0 1k\n").unwrap_err();
        assert!(matches!(err, NetlistError::DuplicateName { line: Some(2), .. }));
        let err = parse_netlist("R1 a 0 1k\nR2 a b 1k\n").unwrap_err();
        assert_eq!(err, NetlistError::DanglingNode("b".into()));
    }

    #[test]
    fn pwl_and_probe() {
        let n = parse_netlist(
            "V1 in 0 PWL(0 0 1n 1.1, 2n 1.1)\nR1 in out 1k\nC1 out 0 1p\n.probe out vout\n",
        )
        .unwrap();
        assert_eq!(n.probes()[0].alias, "vout");
        match &n.devices()[0].element {
            Element::VoltageSource {
                value: VoltageValue::Pwl(p),
                ..
            } => assert_eq!(p, &vec![(0.0, 0.0), (1e-9, 1.1), (2e-9, 1.1)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pwl_must_increase() {
        let err = parse_netlist("V1 in 0 PWL(0 0 0 1)\nR1 in 0 1k\n").unwrap_err();
        assert!(matches!(err, NetlistError::Syntax { line: 1, .. }));
    }

    #[test]
    fn case_insensitive_keywords() {
        let n = parse_netlist("m1 d g 0 pmos w=1u l=0.1u vth=0.5\nv1 d 0 1\nv2 g 0 0\n").unwrap();
        let (_, p) = n.mosfets().next().unwrap();
        assert_eq!(p.vth0, -0.5);
    }
}

// SPDX-License-Identifier: Apache-2.0

use super::{BinOp, IrBlock, IrFunction, IrId, IrInstr, IrOp, IrProgram, Pred, Value};
use crate::error::{Error, Result};
use crate::isa::is_ident;

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_value(tok: &str) -> std::result::Result<Value, String> {
    let tok = tok.trim();
    if let Some(name) = tok.strip_prefix('%') {
        if is_name(name) {
            return Ok(Value::Var(name.to_string()));
        }
    } else if let Ok(c) = tok.parse::<i64>() {
        return Ok(Value::Const(c));
    }
    Err(format!("expected %value or integer, got `{tok}`"))
}

fn split_args(s: &str) -> Vec<&str> {
    if s.trim().is_empty() {
        Vec::new()
    } else {
        s.split(',').map(str::trim).collect()
    }
}

fn label(tok: &str) -> std::result::Result<String, String> {
    let tok = tok.trim();
    if is_ident(tok) {
        Ok(tok.to_string())
    } else {
        Err(format!("bad block label `{tok}`"))
    }
}

fn parse_op(body: &str) -> std::result::Result<IrOp, String> {
    let (mnemonic, rest) = match body.split_once(char::is_whitespace) {
        Some((m, r)) => (m, r.trim()),
        None => (body, ""),
    };
    let args = split_args(rest);
    let want = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{mnemonic}` takes {n} operand(s), got {}", args.len()))
        }
    };
    let bin = |op| -> std::result::Result<IrOp, String> {
        want(2)?;
        Ok(IrOp::Bin(op, parse_value(args[0])?, parse_value(args[1])?))
    };
    match mnemonic {
        "const" => {
            want(1)?;
            args[0]
                .parse()
                .map(IrOp::Const)
                .map_err(|_| format!("bad constant `{}`", args[0]))
        }
        "add" => bin(BinOp::Add),
        "sub" => bin(BinOp::Sub),
        "mul" => bin(BinOp::Mul),
        "div" => bin(BinOp::Div),
        "icmp" => {
            let (pred, rest) = rest.split_once(char::is_whitespace).ok_or("icmp needs a predicate")?;
            let pred = Pred::ALL
                .iter()
                .copied()
                .find(|p| p.name() == pred)
                .ok_or_else(|| format!("unknown predicate `{pred}`"))?;
            let args = split_args(rest);
            if args.len() != 2 {
                return Err("icmp takes 2 operands".into());
            }
            Ok(IrOp::Icmp(pred, parse_value(args[0])?, parse_value(args[1])?))
        }
        "phi" => {
            let mut inc = Vec::new();
            let mut s = rest;
            while !s.is_empty() {
                let open = s.strip_prefix('[').ok_or("phi operands look like [%v, label]")?;
                let close = open.find(']').ok_or("unclosed `[` in phi")?;
                let (v, l) = open[..close].split_once(',').ok_or("phi operands look like [%v, label]")?;
                inc.push((parse_value(v)?, label(l)?));
                s = open[close + 1..].trim_start();
                s = s.strip_prefix(',').unwrap_or(s).trim_start();
            }
            if inc.is_empty() {
                return Err("phi needs at least one incoming value".into());
            }
            Ok(IrOp::Phi(inc))
        }
        "br" => {
            want(3)?;
            Ok(IrOp::Br(parse_value(args[0])?, label(args[1])?, label(args[2])?))
        }
        "jump" => {
            want(1)?;
            Ok(IrOp::Jump(label(args[0])?))
        }
        "load" => {
            want(1)?;
            Ok(IrOp::Load(parse_value(args[0])?))
        }
        "store" => {
            want(2)?;
            Ok(IrOp::Store(parse_value(args[0])?, parse_value(args[1])?))
        }
        "call" => {
            let open = rest.find('(').ok_or("call looks like `call f(args)`")?;
            let name = rest[..open].trim();
            if !is_ident(name) {
                return Err(format!("bad function name `{name}`"));
            }
            let inner = rest[open + 1..].trim_end().strip_suffix(')').ok_or("missing `)` in call")?;
            let args = split_args(inner).into_iter().map(parse_value).collect::<std::result::Result<_, _>>()?;
            Ok(IrOp::Call(name.to_string(), args))
        }
        "ret" => match args.len() {
            0 => Ok(IrOp::Ret(None)),
            1 => Ok(IrOp::Ret(Some(parse_value(args[0])?))),
            _ => Err("ret takes at most one operand".into()),
        },
        other => Err(format!("unknown IR instruction `{other}`")),
    }
}

/// Extracts trailing `!id N` / `!loc N` tags.
fn take_tag(body: &str, tag: &str) -> std::result::Result<(String, Option<IrId>), String> {
    match body.find(tag) {
        Some(i) => {
            let after = &body[i + tag.len()..];
            let end = after.find('!').unwrap_or(after.len());
            let v = after[..end].trim();
            let n = v.parse().map_err(|_| format!("bad {tag} value `{v}`"))?;
            Ok((format!("{}{}", &body[..i], &after[end..]), Some(n)))
        }
        None => Ok((body.to_string(), None)),
    }
}

/// Parses `.mir` text. Instructions without an explicit `!id` are numbered
/// densely from 1 in textual order.
pub fn parse_ir(text: &str, file: &str) -> Result<IrProgram> {
    let mut prog = IrProgram::default();
    let mut func: Option<IrFunction> = None;
    let mut next_id: IrId = 1;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = line.len() - line.trim_start().len() + 1;
        let err = |m: String| Error::parse(file, line_no, col, m);
        if let Some(rest) = trimmed.strip_prefix("mem ") {
            prog.mem_words = rest.trim().parse().map_err(|_| err(format!("bad memory size `{}`", rest.trim())))?;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("func ") {
            let rest = rest.trim().strip_suffix(':').ok_or_else(|| err("expected `func name(...):`".into()))?;
            let open = rest.find('(').ok_or_else(|| err("expected `(` after function name".into()))?;
            let name = rest[..open].trim();
            if !is_ident(name) {
                return Err(err(format!("bad function name `{name}`")));
            }
            let inner = rest[open + 1..]
                .trim_end()
                .strip_suffix(')')
                .ok_or_else(|| err("expected `)`".into()))?;
            let params = split_args(inner)
                .into_iter()
                .map(|p| match parse_value(p) {
                    Ok(Value::Var(v)) => Ok(v),
                    _ => Err(err(format!("bad parameter `{p}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(f) = func.take() {
                prog.functions.push(f);
            }
            func = Some(IrFunction {
                name: name.to_string(),
                params,
                blocks: Vec::new(),
            });
            continue;
        }
        let f = func.as_mut().ok_or_else(|| err("instruction outside of a function".into()))?;
        if let Some(l) = trimmed.strip_suffix(':') {
            let l = label(l).map_err(err)?;
            f.blocks.push(IrBlock {
                label: l,
                instrs: Vec::new(),
            });
            continue;
        }
        let block = f.blocks.last_mut().ok_or_else(|| err("instruction before the first block label".into()))?;
        let (body, id) = take_tag(trimmed, "!id").map_err(err)?;
        let (body, loc) = take_tag(&body, "!loc").map_err(err)?;
        let body = body.trim();
        let (result, op_text) = match body.split_once('=') {
            Some((lhs, rhs)) if lhs.trim().starts_with('%') => {
                let name = &lhs.trim()[1..];
                if !is_name(name) {
                    return Err(err(format!("bad value name `{}`", lhs.trim())));
                }
                (Some(name.to_string()), rhs.trim())
            }
            _ => (None, body),
        };
        let op = parse_op(op_text).map_err(err)?;
        let id = match id {
            Some(id) => id,
            None => next_id,
        };
        next_id = next_id.max(id + 1);
        block.instrs.push(IrInstr { id, result, op, loc });
    }
    if let Some(f) = func.take() {
        prog.functions.push(f);
    }
    prog.validate()?;
    Ok(prog)
}

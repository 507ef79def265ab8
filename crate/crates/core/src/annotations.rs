// SPDX-License-Identifier: Apache-2.0

//! Loop-bound, infeasible-edge and call-bound annotations (`.ann` files).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Annotation {
    /// Iterations of the loop per entry: back-edge traversals at most `max`
    /// (and at least `min`) times the loop's entry count.
    LoopBound {
        func: String,
        header: String,
        max: u64,
        min: Option<u64>,
    },
    Infeasible {
        func: String,
        from: String,
        to: String,
    },
    /// Calls from `func` to `callee` per invocation of `func`. For a self-call
    /// this bounds the recursion depth.
    CallBound {
        func: String,
        callee: String,
        max: u64,
    },
}

impl Annotation {
    pub fn func(&self) -> &str {
        match self {
            Annotation::LoopBound { func, .. } | Annotation::Infeasible { func, .. } | Annotation::CallBound { func, .. } => func,
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Annotation::LoopBound { func, header, max, min } => {
                write!(f, "loopbound func={func} header={header} max={max}")?;
                if let Some(min) = min {
                    write!(f, " min={min}")?;
                }
                Ok(())
            }
            Annotation::Infeasible { func, from, to } => write!(f, "infeasible func={func} edge={from}->{to}"),
            Annotation::CallBound { func, callee, max } => write!(f, "callbound func={func} callee={callee} max={max}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotations {
    pub items: Vec<Annotation>,
}

impl Annotations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, a: Annotation) {
        self.items.push(a);
    }

    pub fn loop_bound(&self, func: &str, header: &str) -> Option<(u64, Option<u64>)> {
        self.items.iter().rev().find_map(|a| match a {
            Annotation::LoopBound { func: f, header: h, max, min } if f == func && h == header => Some((*max, *min)),
            _ => None,
        })
    }

    pub fn infeasible_edges(&self, func: &str) -> Vec<(&str, &str)> {
        self.items
            .iter()
            .filter_map(|a| match a {
                Annotation::Infeasible { func: f, from, to } if f == func => Some((from.as_str(), to.as_str())),
                _ => None,
            })
            .collect()
    }

    pub fn call_bound(&self, func: &str, callee: &str) -> Option<u64> {
        self.items.iter().rev().find_map(|a| match a {
            Annotation::CallBound { func: f, callee: c, max } if f == func && c == callee => Some(*max),
            _ => None,
        })
    }

    pub fn for_function(&self, func: &str) -> impl Iterator<Item = &Annotation> {
        let func = func.to_string();
        self.items.iter().filter(move |a| a.func() == func)
    }
}

impl fmt::Display for Annotations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.items {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

fn bad(file: &str, line: usize, msg: impl fmt::Display) -> Error {
    Error::Annotation(format!("{file}:{line}: {msg}"))
}

pub fn parse_annotations(text: &str, file: &str) -> Result<Annotations> {
    let mut out = Annotations::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let kind = words.next().unwrap_or_default();
        let mut kv = BTreeMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| bad(file, line_no, format!("expected key=value, got `{w}`")))?;
            if kv.insert(k, v).is_some() {
                return Err(bad(file, line_no, format!("duplicate key `{k}`")));
            }
        }
        let take = |kv: &mut BTreeMap<&str, &str>, k: &str| -> Result<String> {
            kv.remove(k)
                .map(str::to_string)
                .ok_or_else(|| bad(file, line_no, format!("`{kind}` needs `{k}=`")))
        };
        let int = |s: String, k: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| bad(file, line_no, format!("`{k}` must be a non-negative integer, got `{s}`")))
        };
        let ann = match kind {
            "loopbound" => {
                let func = take(&mut kv, "func")?;
                let header = take(&mut kv, "header")?;
                let max = int(take(&mut kv, "max")?, "max")?;
                let min = match kv.remove("min") {
                    Some(m) => Some(int(m.to_string(), "min")?),
                    None => None,
                };
                if let Some(m) = min {
                    if m > max {
                        return Err(bad(file, line_no, format!("min={m} exceeds max={max}")));
                    }
                }
                Annotation::LoopBound { func, header, max, min }
            }
            "infeasible" => {
                let func = take(&mut kv, "func")?;
                let edge = take(&mut kv, "edge")?;
                let (from, to) = edge
                    .split_once("->")
                    .ok_or_else(|| bad(file, line_no, format!("edge must be `from->to`, got `{edge}`")))?;
                Annotation::Infeasible {
                    func,
                    from: from.to_string(),
                    to: to.to_string(),
                }
            }
            "callbound" => {
                let func = take(&mut kv, "func")?;
                let callee = take(&mut kv, "callee")?;
                let max = int(take(&mut kv, "max")?, "max")?;
                Annotation::CallBound { func, callee, max }
            }
            other => return Err(bad(file, line_no, format!("unknown annotation `{other}`"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(bad(file, line_no, format!("unexpected key `{k}`")));
        }
        out.push(ann);
    }
    Ok(out)
}

/// Replaces every `{x}` in an annotation template.
pub fn instantiate(template: &str, x: u64) -> String {
    template.replace("{x}", &x.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_kinds() {
        let a = parse_annotations(
            "# bounds\nloopbound func=main header=loop max=10\nloopbound func=main header=inner max=4 min=4\n\
             infeasible func=main edge=a->b\ncallbound func=f callee=f max=3\n",
            "x.ann",
        )
        .unwrap();
        assert_eq!(a.items.len(), 4);
        assert_eq!(a.loop_bound("main", "loop"), Some((10, None)));
        assert_eq!(a.loop_bound("main", "inner"), Some((4, Some(4))));
        assert_eq!(a.infeasible_edges("main"), vec![("a", "b")]);
        assert_eq!(a.call_bound("f", "f"), Some(3));
        let again = parse_annotations(&a.to_string(), "x.ann").unwrap();
        assert_eq!(again, a);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_annotations("\nloopbound func=main max=3\n", "x.ann").unwrap_err();
        assert!(e.is_annotation_error());
        assert!(e.to_string().contains("x.ann:2"), "{e}");
        assert!(parse_annotations("loopbound func=m header=h max=-1", "x").is_err());
        assert!(parse_annotations("loopbound func=m header=h max=2 min=3", "x").is_err());
        assert!(parse_annotations("bogus func=m", "x").is_err());
        assert!(parse_annotations("infeasible func=m edge=ab", "x").is_err());
    }

    #[test]
    fn template_substitution() {
        assert_eq!(instantiate("loopbound func=m header=h max={x}", 7), "loopbound func=m header=h max=7");
    }
}

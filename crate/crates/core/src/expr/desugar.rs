//! Shorthand elimination.
//!
//! Rewrites the notation-level conveniences into their plain form so that the
//! generator only sees core expressions:
//!
//! * `name BETWEEN (a, b)`  →  `name >= a && name <= b`
//! * `name ~ 'p'`           →  `REGEX(name, 'p')`
//! * `name ~* 'p'`          →  `REGEX(name, 'p', 'i')`
//! * `name LIKE 'p'`        →  `REGEX(name, …)` with SQL-style wildcards
//! * `name[i]`, `name[i,j]` →  `SUBSTR(name, i[, j])`
//! * `a ? b`                →  `COALESCE(a, b)`
//! * `IN (…)`               →  chained `=` joined by `||` (negated: `!=`/`&&`)
//!
//! The rewrite is idempotent: desugar(desugar(e)) == desugar(e).

use super::*;

pub fn desugar(expr: &Expr) -> Expr {
    match expr {
        Expr::Name(entity) => desugar_name(entity),
        Expr::Unary { op, expr } => Expr::Unary {
            op: *op,
            expr: Box::new(desugar(expr)),
        },
        Expr::Binary { op, lhs, rhs } => Expr::Binary {
            op: *op,
            lhs: Box::new(desugar(lhs)),
            rhs: Box::new(desugar(rhs)),
        },
        Expr::Call { name, args } => Expr::Call {
            name: name.clone(),
            args: args.iter().map(desugar).collect(),
        },
        Expr::Aggregate {
            func,
            distinct,
            arg,
            separator,
        } => Expr::Aggregate {
            func: func.clone(),
            distinct: *distinct,
            arg: Box::new(desugar(arg)),
            separator: separator.clone(),
        },
        Expr::Exists { negated, inner } => Expr::Exists {
            negated: *negated,
            inner: Box::new(desugar(inner)),
        },
        Expr::In {
            negated,
            lhs,
            items,
        } => {
            let lhs = desugar(lhs);
            let (cmp, join) = if *negated {
                (BinOp::Ne, BinOp::And)
            } else {
                (BinOp::Eq, BinOp::Or)
            };
            let mut result: Option<Expr> = None;
            for item in items {
                let test = Expr::Binary {
                    op: cmp,
                    lhs: Box::new(lhs.clone()),
                    rhs: Box::new(desugar(item)),
                };
                result = Some(match result {
                    None => test,
                    Some(acc) => Expr::Binary {
                        op: join,
                        lhs: Box::new(acc),
                        rhs: Box::new(test),
                    },
                });
            }
            result.unwrap_or(Expr::Bool(*negated))
        }
        Expr::Coalesce2 { lhs, rhs } => Expr::Call {
            name: "COALESCE".to_string(),
            args: vec![desugar(lhs), desugar(rhs)],
        },
        other => other.clone(),
    }
}

fn desugar_name(entity: &NameEntity) -> Expr {
    let mut bare = entity.clone();
    let between = bare.between.take();
    let like = bare.like.take();
    let substring = bare.substring.take();

    let mut current = Expr::Name(bare);

    if let Some((i, j)) = substring {
        let mut args = vec![current, Expr::Num(i.to_string())];
        if let Some(j) = j {
            args.push(Expr::Num(j.to_string()));
        }
        current = Expr::Call {
            name: "SUBSTR".to_string(),
            args,
        };
    }

    if let Some((lo, hi)) = between {
        let ge = Expr::Binary {
            op: BinOp::Ge,
            lhs: Box::new(current.clone()),
            rhs: Box::new(desugar(&lo)),
        };
        let le = Expr::Binary {
            op: BinOp::Le,
            lhs: Box::new(current),
            rhs: Box::new(desugar(&hi)),
        };
        return Expr::Binary {
            op: BinOp::And,
            lhs: Box::new(ge),
            rhs: Box::new(le),
        };
    }

    if let Some(like) = like {
        let (pattern, ci) = match like.op {
            LikeOp::Regex => (like.pattern.clone(), false),
            LikeOp::RegexCi => (like.pattern.clone(), true),
            LikeOp::Like => (like_to_regex(&like.pattern), false),
        };
        let mut args = vec![
            current,
            Expr::Str {
                value: pattern,
                lang: None,
                datatype: None,
            },
        ];
        if ci {
            args.push(Expr::Str {
                value: "i".to_string(),
                lang: None,
                datatype: None,
            });
        }
        return Expr::Call {
            name: "REGEX".to_string(),
            args,
        };
    }

    current
}

/// SQL LIKE pattern → regex: `%` is any sequence, `_` any character; a
/// pattern without wildcards at an end stays anchored there.
fn like_to_regex(pattern: &str) -> String {
    let anchored_start = !pattern.starts_with('%');
    let anchored_end = !pattern.ends_with('%');
    // Leading/trailing `%` just lift the anchor; they need no `.*`.
    let core = pattern.trim_start_matches('%');
    let core = if anchored_end {
        core
    } else {
        core.trim_end_matches('%')
    };
    let mut out = String::new();
    if anchored_start {
        out.push('^');
    }
    for c in core.chars() {
        match c {
            '%' => out.push_str(".*"),
            '_' => out.push('.'),
            c if "\\.^$|?*+()[]{}".contains(c) => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    if anchored_end {
        out.push('$');
    }
    out
}

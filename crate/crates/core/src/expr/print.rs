//! Canonical printing of parsed expressions.
//!
//! `print_canonical` produces text that reparses to the same tree, which the
//! property tests use as a round-trip fixpoint check.

use super::*;
use std::fmt::Write;

pub fn print_canonical(expr: &Expr) -> String {
    let mut out = String::new();
    print_expr(expr, 0, &mut out);
    out
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub | BinOp::Concat => 4,
        BinOp::Mul | BinOp::Div => 5,
    }
}

fn print_expr(expr: &Expr, min_prec: u8, out: &mut String) {
    match expr {
        Expr::Str {
            value,
            lang,
            datatype,
        } => {
            write!(out, "'{}'", value.replace('\'', "\\'")).unwrap();
            if let Some(l) = lang {
                write!(out, "@{l}").unwrap();
            } else if let Some(dt) = datatype {
                write!(out, "^^{dt}").unwrap();
            }
        }
        Expr::Num(n) => out.push_str(n),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Var { name, hidden } => {
            out.push_str(if *hidden { "??" } else { "?" });
            out.push_str(name);
        }
        Expr::ClassRef => out.push('.'),
        Expr::Star => out.push('*'),
        Expr::Name(entity) => print_name(entity, out),
        Expr::Unary { op, expr } => {
            out.push(*op);
            let needs_paren = matches!(**expr, Expr::Binary { .. } | Expr::Coalesce2 { .. });
            if needs_paren {
                out.push('(');
            }
            print_expr(expr, 6, out);
            if needs_paren {
                out.push(')');
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = prec(*op);
            let wrap = p < min_prec;
            if wrap {
                out.push('(');
            }
            print_expr(lhs, p, out);
            write!(out, " {} ", op.text()).unwrap();
            print_expr(rhs, p + 1, out);
            if wrap {
                out.push(')');
            }
        }
        Expr::Call { name, args } => {
            // Date difference shorthands read `f(a - b)`, not `f(a, b)`.
            let date_diff =
                matches!(name.as_str(), "days" | "months" | "years") && args.len() == 2;
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(if date_diff { " - " } else { ", " });
                }
                print_expr(a, 0, out);
            }
            out.push(')');
        }
        Expr::Aggregate {
            func,
            distinct,
            arg,
            separator,
        } => {
            out.push_str(func);
            out.push('(');
            if *distinct {
                out.push_str("DISTINCT ");
            }
            print_expr(arg, 0, out);
            if let Some(sep) = separator {
                write!(out, "; SEPARATOR = '{}'", sep.replace('\'', "\\'")).unwrap();
            }
            out.push(')');
        }
        Expr::Exists { negated, inner } => {
            if *negated {
                out.push_str("NOT ");
            }
            out.push_str("EXISTS(");
            print_expr(inner, 0, out);
            out.push(')');
        }
        Expr::In {
            negated,
            lhs,
            items,
        } => {
            print_expr(lhs, 4, out);
            if *negated {
                out.push_str(" NOT");
            }
            out.push_str(" IN (");
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(item, 0, out);
            }
            out.push(')');
        }
        Expr::Coalesce2 { lhs, rhs } => {
            print_expr(lhs, 4, out);
            out.push_str(" ? ");
            print_expr(rhs, 4, out);
        }
        Expr::Values(scope) => match scope {
            ValueScope::Range(lo, hi) => {
                write!(out, "{{{lo}..{hi}}}").unwrap();
            }
            ValueScope::List(items) => {
                out.push('{');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    match item {
                        Some(e) => print_expr(e, 6, out),
                        None => out.push_str("UNDEF"),
                    }
                }
                out.push('}');
            }
            ValueScope::Tuples(rows) => {
                out.push('{');
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push('(');
                    for (j, item) in row.iter().enumerate() {
                        if j > 0 {
                            out.push_str(", ");
                        }
                        match item {
                            Some(e) => print_expr(e, 6, out),
                            None => out.push_str("UNDEF"),
                        }
                    }
                    out.push(')');
                }
                out.push('}');
            }
        },
    }
}

fn print_name(entity: &NameEntity, out: &mut String) {
    if entity.reference_mark {
        out.push('@');
    }
    if entity.constant_mark {
        out.push('`');
    }
    for (i, step) in entity.steps.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        print_step(step, out);
    }
    if entity.lang_tags.len() == 1 {
        write!(out, "@{}", entity.lang_tags[0]).unwrap();
    } else if entity.lang_tags.len() > 1 {
        write!(out, "@({})", entity.lang_tags.join(",")).unwrap();
    }
    if let Some((i, j)) = entity.substring {
        match j {
            Some(j) => write!(out, "[{i},{j}]").unwrap(),
            None => write!(out, "[{i}]").unwrap(),
        }
    }
    if let Some((lo, hi)) = &entity.between {
        out.push_str(" BETWEEN (");
        print_expr(lo, 0, out);
        out.push_str(", ");
        print_expr(hi, 0, out);
        out.push(')');
    }
    if let Some(like) = &entity.like {
        let op = match like.op {
            LikeOp::Regex => "~",
            LikeOp::RegexCi => "~*",
            LikeOp::Like => "LIKE",
        };
        write!(out, " {op} '{}'", like.pattern.replace('\'', "\\'")).unwrap();
    }
}

pub(super) fn print_step(step: &PathStep, out: &mut String) {
    if step.inverse {
        out.push('^');
    }
    match &step.item {
        StepItem::Name {
            prefix,
            local,
            display,
        } => {
            if let Some(p) = prefix {
                out.push_str(p);
                out.push(':');
            }
            if *display {
                write!(out, "[{local}]").unwrap();
            } else {
                out.push_str(local);
            }
        }
        StepItem::Iri(iri) => write!(out, "<{iri}>").unwrap(),
        StepItem::Var { name, hidden } => {
            out.push_str(if *hidden { "??" } else { "?" });
            out.push_str(name);
        }
        StepItem::A => out.push('a'),
    }
    out.push_str(step.modifier.text());
}

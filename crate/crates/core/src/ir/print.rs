use std::fmt::Write;

use super::{ConstraintBody, Declaration, IrDocument, Term};

const INDENT: &str = "    ";

fn term_lines(out: &mut String, terms: &[Term]) {
    for t in terms {
        let _ = writeln!(
            out,
            "{INDENT}<VAR> {} </VAR> [TIMES] <PARAM> {} </PARAM>",
            t.variable, t.coefficient.text
        );
    }
}

/// Renders one declaration as a `<DECLARATION>` block.
pub fn print_declaration(decl: &Declaration) -> String {
    let mut out = String::from("<DECLARATION>\n");
    match decl {
        Declaration::Objective(o) => {
            let _ = writeln!(out, "{INDENT}<OBJ_DIR> {} </OBJ_DIR>", o.direction.word());
            let _ = writeln!(out, "{INDENT}<OBJ_NAME> {} </OBJ_NAME> [is]", o.name);
            term_lines(&mut out, &o.terms);
        }
        Declaration::Constraint(c) => {
            out.push_str(INDENT);
            if !c.const_dir.is_empty() {
                let _ = write!(out, "<CONST_DIR> {} </CONST_DIR>", c.const_dir);
            }
            if let Some(limit) = c.body.limit() {
                let _ = write!(out, "<LIMIT> {} </LIMIT>", limit.text);
            }
            out.push('\n');
            let _ = writeln!(out, "{INDENT}<OPERATOR> {} </OPERATOR>", c.operator.tag());
            let tag = match &c.body {
                ConstraintBody::XbyConstraint { xy_alias: true, .. } => "XY_CONSTRAINT",
                body => body.kind().tag(),
            };
            let _ = write!(out, "{INDENT}<CONST_TYPE> [{tag}] </CONST_TYPE>");
            match &c.body {
                ConstraintBody::LinearConstraint { terms, .. } => {
                    out.push_str(" [is]\n");
                    term_lines(&mut out, terms);
                }
                ConstraintBody::SumConstraint { .. } => out.push('\n'),
                ConstraintBody::UpperBound { variable, .. }
                | ConstraintBody::LowerBound { variable, .. }
                | ConstraintBody::RatioConstraint { variable, .. } => {
                    let _ = writeln!(out, " [for]\n{INDENT}<VAR> {variable} </VAR>");
                }
                ConstraintBody::XbyConstraint {
                    base,
                    compared,
                    multiplier,
                    ..
                } => {
                    out.push('\n');
                    match multiplier {
                        Some(k) => {
                            let _ = writeln!(
                                out,
                                "{INDENT}<VAR> {base} </VAR> [TIMES] <PARAM> {} </PARAM> [is] <VAR> {compared} </VAR>",
                                k.text
                            );
                        }
                        None => {
                            let _ = writeln!(out, "{INDENT}<VAR> {base} </VAR> [is] <VAR> {compared} </VAR>");
                        }
                    }
                }
            }
        }
    }
    out.push_str("</DECLARATION>\n");
    out
}

/// Renders a whole document, blocks separated by a blank line.
pub fn print_ir(doc: &IrDocument) -> String {
    doc.declarations
        .iter()
        .map(print_declaration)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_ir, Constraint, ConstraintBody, Direction, Objective, Operator, Quantity};
    use crate::number::{int, NumberContext};
    use proptest::prelude::*;

    fn q(text: &str, ctx: NumberContext) -> Quantity {
        Quantity::parse(text, ctx).unwrap()
    }

    #[test]
    fn sum_constraint_keeps_the_written_limit() {
        let doc = IrDocument::new(vec![
            Declaration::Objective(Objective {
                direction: Direction::Maximize,
                name: "return".into(),
                terms: vec![Term {
                    variable: "trust".into(),
                    coefficient: q("2%", NumberContext::Param),
                }],
            }),
            Declaration::Constraint(Constraint {
                const_dir: "has".into(),
                operator: Operator::LessOrEqual,
                body: ConstraintBody::SumConstraint {
                    limit: q("60,000", NumberContext::Limit),
                },
            }),
        ]);
        let text = print_ir(&doc);
        assert!(text.contains("<LIMIT> 60,000 </LIMIT>"));
        let back = parse_ir(&text).unwrap().into_complete().unwrap();
        assert_eq!(back, doc);
        assert_eq!(
            back.constraints().next().unwrap().body.limit().unwrap().value,
            int(60000)
        );
    }

    fn name() -> impl Strategy<Value = String> {
        prop::collection::vec("[a-z]{1,8}", 1..3).prop_map(|w| w.join(" "))
    }

    fn number() -> impl Strategy<Value = String> {
        prop_oneof![
            (0u32..100_000).prop_map(|n| n.to_string()),
            (0u32..1000, 1u32..100).prop_map(|(a, b)| format!("{a}.{b}")),
            Just("three".to_string()),
            Just("a third".to_string()),
            (1u32..100).prop_map(|n| format!("{n}%")),
        ]
    }

    fn term() -> impl Strategy<Value = Term> {
        (name(), number()).prop_map(|(v, p)| Term {
            variable: v,
            coefficient: q(&p, NumberContext::Param),
        })
    }

    fn operator() -> impl Strategy<Value = Operator> {
        prop_oneof![Just(Operator::GreaterOrEqual), Just(Operator::LessOrEqual)]
    }

    fn constraint() -> impl Strategy<Value = Declaration> {
        let body = prop_oneof![
            (number(), prop::collection::vec(term(), 1..4)).prop_map(|(l, terms)| {
                ConstraintBody::LinearConstraint {
                    limit: q(&l, NumberContext::Limit),
                    terms,
                }
            }),
            number().prop_map(|l| ConstraintBody::SumConstraint {
                limit: q(&l, NumberContext::Limit)
            }),
            (name(), number()).prop_map(|(v, l)| ConstraintBody::UpperBound {
                variable: v,
                limit: q(&l, NumberContext::Limit)
            }),
            (name(), number()).prop_map(|(v, l)| ConstraintBody::LowerBound {
                variable: v,
                limit: q(&l, NumberContext::Limit)
            }),
            (name(), 1u32..100).prop_map(|(v, l)| ConstraintBody::RatioConstraint {
                variable: v,
                limit: q(&format!("{l}%"), NumberContext::Ratio)
            }),
            (name(), name(), prop::option::of(number()), any::<bool>()).prop_map(|(base, compared, k, alias)| {
                ConstraintBody::XbyConstraint {
                    base,
                    compared,
                    xy_alias: alias && k.is_none(),
                    multiplier: k.map(|k| q(&k, NumberContext::Param)),
                }
            }),
        ];
        (prop::option::of(name()), operator(), body).prop_map(|(dir, operator, body)| {
            Declaration::Constraint(Constraint {
                const_dir: dir.unwrap_or_default(),
                operator,
                body,
            })
        })
    }

    fn document() -> impl Strategy<Value = IrDocument> {
        (
            prop_oneof![Just(Direction::Maximize), Just(Direction::Minimize)],
            name(),
            prop::collection::vec(term(), 1..4),
            prop::collection::vec(constraint(), 0..6),
        )
            .prop_map(|(direction, name, terms, cs)| {
                let mut decls = vec![Declaration::Objective(Objective { direction, name, terms })];
                decls.extend(cs);
                IrDocument::new(decls)
            })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(doc in document()) {
            let text = print_ir(&doc);
            let back = parse_ir(&text).unwrap().into_complete().unwrap();
            prop_assert_eq!(back, doc);
        }
    }
}

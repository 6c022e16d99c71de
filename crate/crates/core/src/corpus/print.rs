use super::{Clause, Form, Item, Justification, Opacity};

fn finish(mut toks: Vec<String>) -> String {
    let open = matches!(toks.last().map(String::as_str), Some(":") | Some(":="));
    if open {
        toks.push(";".into());
        toks.join(" ")
    } else {
        toks.join(" ") + ";"
    }
}

fn opacity_word(item: &Item, toks: &mut Vec<String>) {
    if item.opacity_keyword {
        toks.push(match item.opacity {
            Opacity::Opaque => "opaque".into(),
            Opacity::Transparent => "transparent".into(),
        });
    }
}

/// Canonical one-statement rendering of an item. Parsing the output yields
/// an equal item (up to the placeholder names of anonymous theorems).
pub fn print_item(item: &Item) -> String {
    let mut toks: Vec<String> = Vec::new();
    match &item.form {
        Form::Def { types, body } => {
            toks.push("def".into());
            opacity_word(item, &mut toks);
            toks.push(item.name.clone());
            if !types.is_empty() {
                toks.push(":".into());
                toks.extend(types.iter().cloned());
            }
            toks.push(":=".into());
            toks.extend(body.iter().cloned());
            finish(toks)
        }
        Form::Block { members } => {
            let mut out = String::from("defblock {\n");
            for m in members {
                out.push_str("  ");
                out.push_str(&print_item(m));
                out.push('\n');
            }
            out.push('}');
            out
        }
        Form::Thm { clauses } => {
            if item.link.is_some() {
                toks.push("then".into());
            }
            toks.push("thm".into());
            opacity_word(item, &mut toks);
            if !item.anonymous {
                toks.push(item.name.clone());
            }
            toks.push(":".into());
            for c in clauses {
                match c {
                    Clause::Uses(s) => {
                        toks.push("uses".into());
                        toks.push(s.clone());
                    }
                    Clause::Var(v) => {
                        toks.push("var".into());
                        toks.push(v.clone());
                    }
                }
            }
            match &item.justification {
                Justification::None => {}
                Justification::Auto => {
                    toks.push("by".into());
                    toks.push("auto".into());
                }
                Justification::ByRefs(refs) => {
                    toks.push("by".into());
                    toks.extend(refs.iter().cloned());
                }
            }
            finish(toks)
        }
        Form::Notation { target } => format!("notation {} for {};", item.name, target),
        Form::Hint { symbols } => format!("hint {} uses {};", item.name, symbols.join(" ")),
        Form::Reserve { segments } => {
            let mut groups: Vec<(Vec<&str>, &str)> = Vec::new();
            for (var, ty) in segments {
                match groups.last_mut() {
                    Some((vars, t)) if *t == ty.as_str() => vars.push(var),
                    _ => groups.push((vec![var], ty)),
                }
            }
            let body: Vec<String> = groups.iter().map(|(vars, ty)| format!("{} : {}", vars.join(", "), ty)).collect();
            format!("reserve {};", body.join(", "))
        }
    }
}

/// Renders the items of one file, one statement per line.
pub fn print_file<'a>(items: impl IntoIterator<Item = &'a Item>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&print_item(item));
        out.push('\n');
    }
    out
}
